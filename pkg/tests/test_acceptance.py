"""Acceptance suite: every exit criterion, one printed pass/fail line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines inline.
"""

import json
import shutil
import time
from datetime import date as Date

import numpy as np
import pytest


from deforest.cli import main
from deforest.fusion import (
    StructuringElement,
    dilate,
    erode,
    opening,
    sigma_filter,
    two_stage_filter_indices,
)
from deforest.indices import nbr_map, ndvi_map
from deforest.metrics import confusion, f1, iou, pixel_accuracy
from deforest.preprocess import select_bands
from deforest.raster import BinaryMask, Satellite

from helpers import rand_binary_mask
from oracles import oracle_confusion, oracle_two_pass
from test_fusion import FIXTURE_11

SE3 = StructuringElement.square(3)


def announce(name: str, ok: bool, detail: str = "") -> None:
    line = f"{'PASS' if ok else 'FAIL'}: {name}"
    if detail:
        line += f" ({detail})"
    print(line, flush=True)
    assert ok, line


def test_band_selection():
    ok = (
        select_bands(Satellite.SENTINEL1) == ("VV", "VH")
        and select_bands(Satellite.SENTINEL2) == ("B4", "B7", "B8", "B11", "B12")
        and select_bands(Satellite.LANDSAT8) == ("B4", "B5", "B6", "B7")
    )
    announce("band selection matches the per-satellite tables", ok)


def test_metrics_oracle():
    start = time.time()
    rng = np.random.default_rng(2024)
    ok = True
    for _ in range(1000):
        pred = rand_binary_mask(rng, 16, 16, p=rng.random())
        truth = rand_binary_mask(rng, 16, 16, p=rng.random())
        c = confusion(pred, truth)
        tp, fp, fn, tn = oracle_confusion(pred.values, truth.values)
        if (c.tp, c.fp, c.fn, c.tn) != (tp, fp, fn, tn):
            ok = False
            break
        total = tp + fp + fn + tn
        if abs(pixel_accuracy(c) - (tp + tn) / total) > 1e-12:
            ok = False
            break
        f1_expect = 2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn else 1.0
        iou_expect = tp / (tp + fp + fn) if tp + fp + fn else 1.0
        if abs(f1(c) - f1_expect) > 1e-12 or abs(iou(c) - iou_expect) > 1e-12:
            ok = False
            break
    elapsed = time.time() - start
    announce(
        "metrics match brute-force confusion enumeration on 1000 mask pairs",
        ok and elapsed < 5.0,
        f"{elapsed:.2f}s",
    )


def test_sigma_filter_oracle():
    start = time.time()
    rng = np.random.default_rng(4321)
    ok = True
    for _ in range(1000):
        n = int(rng.integers(1, 21))
        ratios = list(np.round(rng.random(n), 6))
        got, _, _ = two_stage_filter_indices(ratios)
        if got != oracle_two_pass(ratios):
            ok = False
            break
    # population sigma cannot flag anything at three sigma for n <= 9
    for n in range(1, 10):
        for _ in range(400):
            ratios = list(rng.random(n))
            if sigma_filter(ratios, 3.0) != list(range(n)):
                ok = False
                break
    elapsed = time.time() - start
    announce(
        "two-stage filter equals the independent two-pass oracle; "
        "nothing removed for n <= 9 at k=3",
        ok and elapsed < 5.0,
        f"{elapsed:.2f}s",
    )


def test_scenario_fixture():
    retained, removed1, removed2 = two_stage_filter_indices(list(FIXTURE_11))
    counts = (len(FIXTURE_11), len(FIXTURE_11) - len(removed1), len(retained))
    ok = (
        counts == (11, 10, 8)
        and FIXTURE_11[removed1[0]] == 0.0
        and sorted(FIXTURE_11[i] for i in removed2) == [0.647, 0.671]
    )
    announce("11-prediction scenario filters 11 -> 10 -> 8", ok, f"trace {counts}")


def test_morphology_suite():
    start = time.time()
    rng = np.random.default_rng(77)
    ok = True

    for _ in range(500):
        mask = rand_binary_mask(rng, 256, 256, p=rng.random())
        opened = opening(mask, SE3)
        if not np.all(opened.values <= mask.values):
            ok = False
            break
        if not np.array_equal(opening(opened, SE3).values, opened.values):
            ok = False
            break

    single = np.zeros((256, 256), dtype=np.uint8)
    single[31, 57] = 1
    ok = ok and bool(np.all(opening(BinaryMask(values=single), SE3).values == 0))
    block = np.zeros((256, 256), dtype=np.uint8)
    block[100:102, 200:202] = 1
    ok = ok and bool(np.all(opening(BinaryMask(values=block), SE3).values == 0))

    hook = StructuringElement(matrix=np.array([[1, 1, 0], [0, 1, 0], [0, 0, 1]]))
    for element in (SE3, hook):
        for _ in range(50):
            mask = rand_binary_mask(rng, 128, 128)
            complement = BinaryMask(values=1 - mask.values)
            duality = 1 - erode(complement, element.reflected(), _pad_value=1).values
            if not np.array_equal(dilate(mask, element).values, duality):
                ok = False
                break

    elapsed = time.time() - start
    announce(
        "opening idempotent and anti-extensive on 500 masks; small objects removed; "
        "erosion/dilation duality holds",
        ok and elapsed < 10.0,
        f"{elapsed:.2f}s",
    )


def test_index_properties():
    start = time.time()
    rng = np.random.default_rng(11)
    a = rng.random(100_000) * 1e4
    b = rng.random(100_000) * 1e4
    k = 10 ** (rng.random(100_000) * 4 - 2)

    fwd = nbr_map(a, b)
    ok = bool(np.all(np.abs(fwd + nbr_map(b, a)) <= 1e-12))
    ok = ok and bool(np.all(np.abs(fwd) <= 1.0))
    ok = ok and bool(np.all(np.abs(ndvi_map(a, b)) <= 1.0))
    ok = ok and bool(np.all(np.abs(nbr_map(k * a, k * b) - fwd) <= 1e-12))
    ok = ok and bool(np.all(np.abs(ndvi_map(a, b) + ndvi_map(b, a)) <= 1e-12))
    elapsed = time.time() - start
    announce(
        "index antisymmetry, boundedness and scale invariance over 1e5 pairs",
        ok and elapsed < 2.0,
        f"{elapsed:.2f}s",
    )


@pytest.fixture(scope="module")
def e2e(tmp_path_factory):
    """One full 200-scene chain, parallelism 4, plus its wall-clock time."""
    root = tmp_path_factory.mktemp("e2e")
    cfg = root / "run.json"
    cfg.write_text(json.dumps({"parallelism": 4}))
    start = time.time()
    steps = [
        ["synth", "--scenes", "200", "--seed", "42", "--out-dir", str(root / "corpus"),
         "--parallelism", "4"],
        ["catalog", "--data-dir", str(root / "corpus"), "--out", str(root / "catalog.json")],
        ["preprocess", "--catalog", str(root / "catalog.json"), "--config", str(cfg),
         "--out-dir", str(root / "stacks")],
        ["predict", "--method", "index", "--stacks", str(root / "stacks"), "--config", str(cfg),
         "--out-dir", str(root / "masks")],
        ["fuse", "--masks", str(root / "masks"), "--queries", str(root / "corpus/queries.csv"),
         "--config", str(cfg), "--out-dir", str(root / "fused")],
        ["evaluate", "--pred", str(root / "fused"), "--truth", str(root / "corpus"),
         "--out", str(root / "report.json")],
    ]
    codes = [main(step) for step in steps]
    elapsed = time.time() - start
    yield {"root": root, "elapsed": elapsed, "codes": codes}
    for sub in ("stacks", "masks", "corpus", "fused"):
        shutil.rmtree(root / sub, ignore_errors=True)


def test_end_to_end_synthetic_run(e2e):
    root = e2e["root"]
    ok = all(code == 0 for code in e2e["codes"])

    manifest = json.loads((root / "corpus/manifest.json").read_text())
    catalog_doc = json.loads((root / "catalog.json").read_text())
    n_manifest = sum(len(s["files"]) for s in manifest["scenes"])
    ok = ok and len(catalog_doc["records"]) == n_manifest

    report = json.loads((root / "report.json").read_text())
    agg = report["aggregate"]
    ok = ok and agg["accuracy"] >= 0.95 and agg["f1"] >= 0.85 and agg["iou"] >= 0.75

    # every affected query: all injected outliers gone after stage 1
    affected = 0
    cleaned = 0
    for scene in manifest["scenes"]:
        if not scene["outliers"]:
            continue
        affected += 1
        year, month = scene["months"][0]
        rep = json.loads(
            (root / "fused" /
             f"deforestation_{scene['lon']}_{scene['lat']}_{year}_{month:02d}.json").read_text()
        )
        marked = {
            (o["satellite"], Date(o["year"], o["month"], o["day"]).isoformat())
            for o in scene["outliers"]
        }
        outlier_idx = {
            i
            for i, cand in enumerate(rep["candidates"])
            if (cand["satellite"], cand["date"]) in marked
        }
        if outlier_idx and outlier_idx <= set(rep["removed_stage1"]):
            cleaned += 1
    rate = cleaned / affected if affected else 1.0
    ok = ok and rate >= 0.90

    ok = ok and e2e["elapsed"] < 120.0
    announce(
        "end-to-end 200-scene run meets metric floors and outlier removal",
        ok,
        f"accuracy={agg['accuracy']:.4f} f1={agg['f1']:.4f} iou={agg['iou']:.4f} "
        f"stage1-removal={cleaned}/{affected} elapsed={e2e['elapsed']:.0f}s",
    )


def test_end_to_end_determinism(e2e):
    root = e2e["root"]
    rerun = root / "rerun"
    rerun.mkdir()
    cfg = rerun / "run.json"
    cfg.write_text(json.dumps({"parallelism": 2}))
    steps = [
        ["synth", "--scenes", "200", "--seed", "42", "--out-dir", str(rerun / "corpus"),
         "--parallelism", "2"],
        ["catalog", "--data-dir", str(rerun / "corpus"), "--out", str(rerun / "catalog.json")],
        ["preprocess", "--catalog", str(rerun / "catalog.json"), "--config", str(cfg),
         "--out-dir", str(rerun / "stacks")],
        ["predict", "--method", "index", "--stacks", str(rerun / "stacks"), "--config", str(cfg),
         "--out-dir", str(rerun / "masks")],
        ["fuse", "--masks", str(rerun / "masks"), "--queries",
         str(rerun / "corpus/queries.csv"), "--config", str(cfg),
         "--out-dir", str(rerun / "fused")],
        ["evaluate", "--pred", str(rerun / "fused"), "--truth", str(rerun / "corpus"),
         "--out", str(rerun / "report.json")],
    ]
    ok = all(main(step) == 0 for step in steps)

    first = sorted((root / "fused").glob("*.png"))
    second = sorted((rerun / "fused").glob("*.png"))
    ok = ok and [p.name for p in first] == [p.name for p in second]
    if ok:
        for a, b in zip(first, second):
            if a.read_bytes() != b.read_bytes():
                ok = False
                break
    ok = ok and (root / "report.json").read_bytes() == (rerun / "report.json").read_bytes()
    shutil.rmtree(rerun, ignore_errors=True)
    announce(
        "repeated run with different parallelism is byte-identical "
        "(fused PNGs and report.json)",
        ok,
    )
