"""Shared fixtures: synthetic corpora driven through the pipeline CLI."""

import pytest

from deforest.cli import main as fg


def build_corpus(root, scenes, seed, sen2_dates, extra=()):
    corpus = root / "corpus"
    args = [
        "synth", "--scenes", str(scenes), "--seed", str(seed),
        "--out-dir", str(corpus),
        "--sen1-dates", "0", "--sen2-dates", str(sen2_dates), "--land8-dates", "0",
        "--outlier-rate", "0",
    ] + list(extra)
    assert fg(args) == 0
    assert fg(["catalog", "--data-dir", str(corpus), "--out", str(root / "catalog.json")]) == 0
    assert fg(
        ["preprocess", "--catalog", str(root / "catalog.json"),
         "--out-dir", str(root / "stacks")]
    ) == 0
    return corpus, root / "stacks"


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """8 Sentinel-2 training pairs."""
    root = tmp_path_factory.mktemp("small")
    corpus, stacks = build_corpus(root, scenes=2, seed=3, sen2_dates=4)
    return {"corpus": corpus, "stacks": stacks}


@pytest.fixture(scope="session")
def corpus_200(tmp_path_factory):
    """200 Sentinel-2 training pairs: 20 scenes, 10 dates each."""
    root = tmp_path_factory.mktemp("pairs200")
    corpus, stacks = build_corpus(root, scenes=20, seed=11, sen2_dates=10)
    return {"corpus": corpus, "stacks": stacks, "root": root}
