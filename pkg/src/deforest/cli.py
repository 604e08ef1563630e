"""Command-line surface: catalog | preprocess | predict | fuse | evaluate | synth.

Every subcommand exits 0 on full success, 1 on a fatal error (with one
machine-readable JSON line on stderr), and 2 when individual items failed but
the batch carried on.  All outputs are deterministic for a fixed
configuration and corpus, including parallel runs.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, TypeVar

from . import synth
from .catalog import Catalog, Query, build_catalog, complete_sets, grid_key
from .config import load_run_config
from .errors import PipelineError
from .fusion import fuse_query
from .indices import BAND_ROLES
from .metrics import EvalReport, QueryMetrics, confusion
from .preprocess import assemble_stack, read_stack, stack_filename, write_stack
from .raster import read_label_tiff, read_mask_png, write_mask_png
from .segment import Prediction, import_mask, index_predict, sidecar_for, write_prediction

T = TypeVar("T")
U = TypeVar("U")


def _emit(doc: dict) -> None:
    print(json.dumps(doc, sort_keys=True))


def _fail_line(doc: dict) -> None:
    print(json.dumps(doc, sort_keys=True), file=sys.stderr)


def _parallel_map(
    fn: Callable[[T], U], items: Sequence[T], workers: int, processes: bool = False
) -> List[U]:
    """Order-preserving map; results are identical whatever the worker count."""
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    if processes:
        from concurrent.futures import ProcessPoolExecutor

        chunk = max(1, len(items) // (workers * 8))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items, chunksize=chunk))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_catalog(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    cat = build_catalog(args.data_dir, cfg.grammar)
    cat.save(args.out)
    _emit({"records": len(cat.records), "skipped": len(cat.skipped), "catalog": str(args.out)})
    return 0


def _preprocess_one(item) -> Optional[dict]:
    cand, table, out_dir = item
    try:
        stack = assemble_stack(cand.records, table)
        write_stack(stack, Path(out_dir) / stack_filename(stack))
        return None
    except PipelineError as exc:
        return {
            "satellite": cand.satellite.value,
            "date": cand.date.isoformat(),
            "error": str(exc),
        }


def cmd_preprocess(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    cat = Catalog.load(args.catalog)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sets, incomplete = complete_sets(cat)

    items = [(cand, cfg.normalization, str(out_dir)) for cand in sets]
    results = _parallel_map(_preprocess_one, items, cfg.parallelism, processes=True)
    failures = [f for f in results if f is not None]
    for failure in failures:
        _fail_line(failure)
    _emit(
        {
            "stacks": len(sets) - len(failures),
            "incomplete_dates": incomplete,
            "failed": len(failures),
        }
    )
    return 2 if failures else 0


def _predict_index_one(item) -> Tuple[str, Optional[dict]]:
    path_str, params, level, out_dir = item
    path = Path(path_str)
    try:
        stack = read_stack(path)
        if stack.satellite not in BAND_ROLES:
            return ("sar", None)
        mask = index_predict(stack, params)
        pred = Prediction.from_mask(
            mask=mask,
            satellite=stack.satellite,
            date=stack.date,
            lon=stack.lon,
            lat=stack.lat,
            source=f"index:{path.stem}",
            binarize_level=level,
        )
        name = path.stem.replace("stack_", "mask_", 1) + ".fgpm"
        write_prediction(pred, stack.bands, Path(out_dir) / name)
        return ("ok", None)
    except PipelineError as exc:
        return ("fail", {"stack": str(path), "error": str(exc)})


def cmd_predict(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    level = cfg.fusion.ratio_binarize_level

    if args.method == "index":
        if not args.stacks:
            raise PipelineError("--stacks is required with --method index")
        stack_paths = sorted(Path(args.stacks).glob("*.fgps"))
        skipped_sar = 0
        failures: List[dict] = []
        written = 0

        items = [(str(p), cfg.segmenter, level, str(out_dir)) for p in stack_paths]
        for status, failure in _parallel_map(
            _predict_index_one, items, cfg.parallelism, processes=True
        ):
            if status == "sar":
                skipped_sar += 1
            elif status == "ok":
                written += 1
            else:
                failures.append(failure)
        for failure in failures:
            _fail_line(failure)
        _emit({"masks": written, "skipped_sar": skipped_sar, "failed": len(failures)})
        return 2 if failures else 0

    # import: validate externally produced masks and normalize them in place
    if not args.masks_dir:
        raise PipelineError("--masks-dir is required with --method import")
    mask_paths = sorted(Path(args.masks_dir).glob("*.fgpm"))
    failures = []
    written = 0
    for path in mask_paths:
        try:
            pred = import_mask(path, binarize_level=level)
            meta = json.loads(sidecar_for(path).read_text())
            write_prediction(pred, tuple(meta["band_set"]), out_dir / path.name)
            written += 1
        except PipelineError as exc:
            failures.append({"mask": str(path), "error": str(exc)})
    for failure in failures:
        _fail_line(failure)
    _emit({"masks": written, "failed": len(failures)})
    return 2 if failures else 0


def _read_queries(path) -> List[Query]:
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != [
                "lat",
                "lon",
                "year",
                "month",
            ]:
                raise PipelineError(
                    f"queries file {path} must have the header lat,lon,year,month"
                )
            queries = []
            for row in reader:
                lat = row["lat"].strip()
                lon = row["lon"].strip()
                queries.append(
                    Query(
                        lon=float(lon),
                        lat=float(lat),
                        year=int(row["year"]),
                        month=int(row["month"]),
                        lon_text=lon,
                        lat_text=lat,
                    )
                )
    except OSError as exc:
        raise PipelineError(f"cannot read queries {path}: {exc}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise PipelineError(f"malformed queries file {path}: {exc}") from exc
    return queries


def cmd_fuse(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    queries = _read_queries(args.queries)

    groups: Dict[Tuple[str, str, int, int], List[Prediction]] = {}
    for path in sorted(Path(args.masks).glob("*.fgpm")):
        pred = import_mask(path, binarize_level=cfg.fusion.ratio_binarize_level)
        key = (grid_key(pred.lon), grid_key(pred.lat), pred.date.year, pred.date.month)
        groups.setdefault(key, []).append(pred)

    def work(query: Query) -> Tuple[Query, Optional[str], Optional[str]]:
        preds = groups.get(query.loc_key + (query.year, query.month), [])
        if not preds:
            return (query, None, "no data")
        mask, report = fuse_query(query, preds, cfg.fusion)
        name = (
            f"deforestation_{query.lon_text}_{query.lat_text}"
            f"_{query.year:04d}_{query.month:02d}.png"
        )
        write_mask_png(mask, out_dir / name)
        replace(report, output_path=name).save(out_dir / (Path(name).stem + ".json"))
        return (query, name, None)

    results = _parallel_map(work, queries, cfg.parallelism)

    fused = []
    failures = []
    for query, name, reason in results:
        entry = {
            "lon": query.lon_text,
            "lat": query.lat_text,
            "year": query.year,
            "month": query.month,
        }
        if reason is None:
            fused.append(dict(entry, output=name))
        else:
            failures.append(dict(entry, reason=reason))
    summary = {"queries": len(queries), "fused": len(fused), "no_data": failures}
    _write_json(out_dir / "summary.json", summary)
    for failure in failures:
        _fail_line(failure)
    _emit({"queries": len(queries), "fused": len(fused), "failed": len(failures)})
    return 2 if failures else 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    truth_cat = build_catalog(args.truth, cfg.grammar)
    labels = {
        r.loc_key + (r.year, r.month): r for r in truth_cat.labels()
    }

    entries: List[QueryMetrics] = []
    failures: List[dict] = []
    for path in sorted(Path(args.pred).glob("deforestation_*.png")):
        stem_parts = path.stem.split("_")
        if len(stem_parts) != 5:
            failures.append({"prediction": str(path), "reason": "unrecognized name"})
            continue
        _, lon_s, lat_s, year_s, month_s = stem_parts
        query = {"lon": lon_s, "lat": lat_s, "year": int(year_s), "month": int(month_s)}
        key = (grid_key(float(lon_s)), grid_key(float(lat_s)), int(year_s), int(month_s))
        label_rec = labels.get(key)
        if label_rec is None:
            failures.append({"prediction": str(path), "reason": "no matching label"})
            continue
        pred_mask = read_mask_png(path)
        truth_mask = read_label_tiff(label_rec.path)
        entries.append(QueryMetrics(query=query, counts=confusion(pred_mask, truth_mask)))

    report = EvalReport(per_query=tuple(entries))
    doc = report.to_json()
    doc["failures"] = failures
    _write_json(Path(args.out), doc)
    for failure in failures:
        _fail_line(failure)
    _emit(
        {
            "queries": len(entries),
            "failed": len(failures),
            "aggregate": doc["aggregate"],
        }
    )
    return 2 if failures else 0


def cmd_synth(args: argparse.Namespace) -> int:
    months = []
    year, month = args.start_year, args.start_month
    for _ in range(args.months):
        months.append((year, month))
        month += 1
        if month > 12:
            month, year = 1, year + 1
    manifest = synth.generate_corpus(
        args.out_dir,
        n_scenes=args.scenes,
        base_seed=args.seed,
        months=months,
        dates=synth.DateCounts(
            sentinel1=args.sen1_dates, sentinel2=args.sen2_dates, landsat8=args.land8_dates
        ),
        noise_sigma=args.noise_sigma,
        outlier_rate=args.outlier_rate,
        parallelism=args.parallelism,
    )
    n_files = sum(len(s["files"]) for s in manifest["scenes"])
    n_outliers = sum(len(s["outliers"]) for s in manifest["scenes"])
    _emit({"scenes": args.scenes, "files": n_files, "outliers": n_outliers})
    return 0


# ---------------------------------------------------------------------------
# wiring


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fg", description="Deforestation mapping pipeline over multi-satellite tiles."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("catalog", help="index a tile directory into catalog.json")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.set_defaults(fn=cmd_catalog)

    p = sub.add_parser("preprocess", help="assemble normalized stacks from a catalog")
    p.add_argument("--catalog", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_preprocess)

    p = sub.add_parser("predict", help="produce one probability mask per stack")
    p.add_argument("--method", choices=("index", "import"), required=True)
    p.add_argument("--stacks", default=None)
    p.add_argument("--masks-dir", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("fuse", help="fuse per-image masks into one map per query")
    p.add_argument("--masks", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_fuse)

    p = sub.add_parser("evaluate", help="score fused maps against label tiles")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("synth", help="generate a synthetic corpus with ground truth")
    p.add_argument("--scenes", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--months", type=int, default=1)
    p.add_argument("--start-year", type=int, default=2020)
    p.add_argument("--start-month", type=int, default=8)
    p.add_argument("--sen1-dates", type=int, default=2)
    p.add_argument("--sen2-dates", type=int, default=5)
    p.add_argument("--land8-dates", type=int, default=6)
    p.add_argument("--noise-sigma", type=float, default=150.0)
    p.add_argument("--outlier-rate", type=float, default=0.01)
    p.add_argument("--parallelism", type=int, default=1)
    p.set_defaults(fn=cmd_synth)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except PipelineError as exc:
        _fail_line({"error": type(exc).__name__, "message": str(exc)})
        return 1


if __name__ == "__main__":
    sys.exit(main())
