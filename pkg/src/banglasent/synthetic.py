"""Seeded toy corpora for benchmarks and tests.

Each sample embeds a few class-specific keywords in neutral filler, half in
Bangla script and half Romanized, so every dataset filter keeps a learnable
slice. The second annotation column agrees with the first on a configurable
fraction of samples, mimicking independent annotators.
"""

from __future__ import annotations

import random

from .annotations import Label
from .corpus import SOURCES, TextSample, save_corpus

__all__ = ["make_keyword_corpus", "write_toy_corpus", "KEYWORDS"]

# class 0: negative, class 1: positive, class 2: ambiguous
KEYWORDS = {
    "latin": (
        ("kharap", "baje", "joghonno", "birokto", "faltu"),
        ("bhalo", "darun", "chomotkar", "shundor", "oshadharon"),
        ("moto", "majhamajhi", "dotana", "oniscit"),
    ),
    "bangla": (
        ("খারাপ", "বাজে", "জঘন্য", "বিরক্ত", "ফালতু"),
        ("ভালো", "দারুণ", "চমৎকার", "সুন্দর", "অসাধারণ"),
        ("মাঝামাঝি", "দোটানা", "অনিশ্চিত", "হয়তো"),
    ),
}

_FILLER = {
    "latin": (
        "gan", "din", "aj", "manush", "shohor", "kotha", "onek", "ekta",
        "amar", "tomar", "pore", "dekhe", "natok", "chobi", "khela", "boi",
    ),
    "bangla": (
        "গান", "দিন", "আজ", "মানুষ", "শহর", "কথা", "অনেক", "একটা",
        "আমার", "তোমার", "পরে", "দেখে", "নাটক", "ছবি", "খেলা", "বই",
    ),
}

_NAMES = ("Rahim", "Karim", "Symphony", "Dhaka", "Mina", "Raju")
_NOISE = (":)", ":(", "#trend", "#news", ":D", "<3")


def make_keyword_corpus(
    n_samples: int = 200,
    n_classes: int = 2,
    seed: int = 0,
    label2_agreement: float = 1.0,
    bangla_fraction: float = 0.5,
) -> list[TextSample]:
    """Build a balanced keyword corpus.

    Classes cycle over the samples and map to labels 0 -> negative,
    1 -> positive, 2 -> ambiguous. ``label2`` matches ``label1`` with
    probability ``label2_agreement`` and is redrawn from the other classes
    otherwise.
    """
    if n_classes not in (2, 3):
        raise ValueError("n_classes must be 2 or 3")
    rng = random.Random(seed)
    class_labels = (Label.NEGATIVE, Label.POSITIVE, Label.AMBIGUOUS)
    samples = []
    for index in range(n_samples):
        cls = index % n_classes
        script = "bangla" if rng.random() < bangla_fraction else "latin"
        filler = _FILLER[script]
        words = [rng.choice(filler) for _ in range(rng.randint(3, 6))]
        for _ in range(3):
            words.insert(
                rng.randrange(len(words) + 1), rng.choice(KEYWORDS[script][cls])
            )
        name = rng.choice(_NAMES) if rng.random() < 0.4 else None
        if name:
            words.insert(rng.randrange(len(words) + 1), name)
        raw_words = list(words)
        if rng.random() < 0.3:
            raw_words.insert(rng.randrange(len(raw_words) + 1), rng.choice(_NOISE))
        modified = " ".join("<PN>" if w == name else w for w in words)
        label1 = class_labels[cls]
        if rng.random() < label2_agreement:
            label2 = label1
        else:
            others = [c for c in range(n_classes) if c != cls]
            label2 = class_labels[rng.choice(others)]
        samples.append(
            TextSample(
                id=index,
                raw_text=" ".join(raw_words),
                modified_text=modified,
                label1=label1,
                label2=label2,
                source=rng.choice(SOURCES),
            )
        )
    return samples


def write_toy_corpus(path, **kwargs) -> list[TextSample]:
    """Generate and save a toy corpus; returns the samples."""
    samples = make_keyword_corpus(**kwargs)
    save_corpus(samples, path)
    return samples
