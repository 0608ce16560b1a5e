"""Shared fixtures: the dual-annotation count fixture and toy corpora."""

from __future__ import annotations

import pytest

from banglasent.annotations import Label
from banglasent.corpus import TextSample, save_corpus
from banglasent.synthetic import make_keyword_corpus

# Dual-annotation reference counts: cell [r][c] is the number of samples the
# first annotator put in class r and the second in class c, with rows and
# columns ordered positive / negative / ambiguous. 9337 samples total.
PAIR_COUNTS = (
    (2817, 538, 392),
    (178, 3864, 404),
    (27, 95, 1022),
)

# Per-source sizes used by the same fixture; they sum to the same total.
SOURCE_SIZES = (
    ("facebook", 4621),
    ("twitter", 2610),
    ("youtube", 801),
    ("news", 1255),
    ("review", 50),
)

_MATRIX_LABELS = (Label.POSITIVE, Label.NEGATIVE, Label.AMBIGUOUS)


def make_pair_corpus(counts=PAIR_COUNTS) -> list[TextSample]:
    """Expand a 3x3 count matrix into a full corpus, deterministic order.

    Texts alternate Bangla script and Romanized filler so the script filter
    sees both kinds; sources follow the fixed per-source sizes.
    """
    sources = []
    for name, size in SOURCE_SIZES:
        sources.extend([name] * size)
    samples = []
    index = 0
    for r, row in enumerate(counts):
        for c, cell in enumerate(row):
            for _ in range(cell):
                bangla = index % 2 == 0
                text = f"নমুনা লেখা {index}" if bangla else f"nomuna lekha {index}"
                samples.append(
                    TextSample(
                        id=index,
                        raw_text=text,
                        modified_text=text,
                        label1=_MATRIX_LABELS[r],
                        label2=_MATRIX_LABELS[c],
                        source=sources[index] if index < len(sources) else "other",
                    )
                )
                index += 1
    return samples


@pytest.fixture(scope="session")
def pair_corpus():
    return make_pair_corpus()


@pytest.fixture(scope="session")
def pair_corpus_path(pair_corpus, tmp_path_factory):
    path = tmp_path_factory.mktemp("fixtures") / "dual_annotation.jsonl"
    save_corpus(pair_corpus, path)
    return path


@pytest.fixture(scope="session")
def toy2_corpus():
    return make_keyword_corpus(n_samples=200, n_classes=2, seed=7, label2_agreement=0.85)


@pytest.fixture(scope="session")
def toy3_corpus():
    return make_keyword_corpus(n_samples=240, n_classes=3, seed=11, label2_agreement=0.85)


@pytest.fixture(scope="session")
def toy2_path(toy2_corpus, tmp_path_factory):
    path = tmp_path_factory.mktemp("toy") / "toy2.jsonl"
    save_corpus(toy2_corpus, path)
    return path


@pytest.fixture(scope="session")
def toy3_path(toy3_corpus, tmp_path_factory):
    path = tmp_path_factory.mktemp("toy") / "toy3.jsonl"
    save_corpus(toy3_corpus, path)
    return path
