"""Corpus preprocessing: normalization, tokenization, vocabulary, encoding.

Turns raw Bangla / Romanized Bangla posts into normalized, integer-encoded,
fixed-length sequences. All functions are pure; datasets are immutable value
objects, so callers may parallelize per-file work freely.

Reserved ids are fixed so serialized datasets stay portable across runs:
PAD=0, OOV=1, PN=2. ``<PN>`` is the literal tag substituted for proper nouns
upstream; the pipeline treats it as an atomic unit and never splits it.
"""

from __future__ import annotations

import importlib.resources
import json
import re
import struct
import unicodedata
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .annotations import Label

__all__ = [
    "PAD_ID",
    "OOV_ID",
    "PN_ID",
    "PN_TOKEN",
    "SOURCES",
    "TextSample",
    "Vocab",
    "EncodedDataset",
    "NormalizeOptions",
    "normalize_text",
    "tokenize",
    "build_vocab",
    "encode",
    "split_shuffle",
    "replace_proper_nouns",
    "is_bangla_text",
    "filter_by_dataset_tag",
    "select_text",
    "load_corpus",
    "save_corpus",
    "corpus_stats",
    "save_encoded",
    "load_encoded",
    "write_vocab_tsv",
]

PAD_ID = 0
OOV_ID = 1
PN_ID = 2
PN_TOKEN = "<PN>"
PAD_TOKEN = "<PAD>"
OOV_TOKEN = "<OOV>"
RESERVED_TOKENS = {PAD_TOKEN: PAD_ID, OOV_TOKEN: OOV_ID, PN_TOKEN: PN_ID}

SOURCES = ("facebook", "twitter", "youtube", "news", "review", "other")

# Private-use sentinel protecting <PN> while the surrounding text is rewritten.
_PN_SENTINEL = ""

# Punctuation stripped from token edges; includes the Bangla danda.
_EDGE_PUNCT = ".,!?;:\"'()[]{}|।"

_WS_RE = re.compile(r"\s+")


def _load_data_lines(name: str) -> list[str]:
    text = (
        importlib.resources.files("banglasent")
        .joinpath(f"data/{name}")
        .read_text(encoding="utf-8")
    )
    lines = []
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        lines.append(stripped.split("#", 1)[0].strip())
    return lines


def _load_emoticons() -> tuple[str, ...]:
    entries = _load_data_lines("emoticons.txt")
    # longest first so ":-)" wins over ":-" fragments
    return tuple(sorted(entries, key=len, reverse=True))


def _load_emoji_ranges() -> tuple[tuple[int, int], ...]:
    ranges = []
    for entry in _load_data_lines("emoji_ranges.txt"):
        lo, hi = entry.split("-")
        ranges.append((int(lo, 16), int(hi, 16)))
    return tuple(ranges)


EMOTICONS = _load_emoticons()
EMOJI_RANGES = _load_emoji_ranges()

_EMOTICON_RE = re.compile("|".join(re.escape(e) for e in EMOTICONS))


def _is_emoji(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in EMOJI_RANGES)


def _lower_latin(text: str) -> str:
    # Lowercase Latin script only (Basic Latin .. Latin Extended-B).
    # Bangla has no case; other scripts pass through untouched.
    return "".join(
        ch.lower() if ord(ch) < 0x0250 else ch for ch in text
    )


@dataclass(frozen=True)
class NormalizeOptions:
    lowercase_latin: bool = True
    remove_hashtags: bool = True
    remove_emoticons: bool = True
    remove_emoji: bool = True


_DEFAULT_NORMALIZE = NormalizeOptions()


def normalize_text(raw: str, opts: NormalizeOptions = _DEFAULT_NORMALIZE) -> str:
    """Normalize one post: NFC, strip hashtag tokens / emoticons / emoji,
    lowercase Latin, collapse whitespace. ``<PN>`` passes through verbatim.

    Idempotent; may return the empty string (callers decide whether to drop
    the sample).
    """
    text = unicodedata.normalize("NFC", raw.replace(_PN_SENTINEL, ""))
    text = text.replace(PN_TOKEN, _PN_SENTINEL)
    if opts.remove_emoji:
        text = "".join(ch for ch in text if not _is_emoji(ch))
    if opts.remove_emoticons:
        # iterate to a fixpoint: removal may juxtapose a new match
        while True:
            stripped = _EMOTICON_RE.sub("", text)
            if stripped == text:
                break
            text = stripped
    if opts.remove_hashtags:
        text = " ".join(
            chunk for chunk in text.split() if not chunk.startswith("#")
        )
    if opts.lowercase_latin:
        text = _lower_latin(text)
    text = _WS_RE.sub(" ", text).strip()
    # removals and lowercasing can juxtapose base + combining mark anew
    text = unicodedata.normalize("NFC", text)
    return text.replace(_PN_SENTINEL, PN_TOKEN)


def tokenize(text: str) -> list[str]:
    """Split normalized text on whitespace and trim edge punctuation.

    ``<PN>`` survives as a single token ('<' and '>' are never trimmed);
    tokens that trim to nothing are dropped.
    """
    tokens = []
    for chunk in text.split():
        token = chunk.strip(_EDGE_PUNCT)
        if token:
            tokens.append(token)
    return tokens


def _is_word_char(ch: str | None) -> bool:
    if ch is None:
        return False
    # letters, digits, and combining marks extend a word; re's \b misses the
    # marks Bangla vowel signs use, so the check is explicit
    return ch == "_" or unicodedata.category(ch)[0] in ("L", "N", "M")


def replace_proper_nouns(text: str, lexicon: Iterable[str]) -> str:
    """Replace whole-word occurrences of lexicon entries with ``<PN>``.

    Convenience for tagging new raw data; matching is case-sensitive and
    should run before :func:`normalize_text`.
    """
    entries = sorted((e for e in lexicon if e), key=len, reverse=True)
    if not entries:
        return text
    pattern = re.compile("|".join(re.escape(e) for e in entries))
    pieces = []
    pos = 0
    for match in pattern.finditer(text):
        before = text[match.start() - 1] if match.start() > 0 else None
        after = text[match.end()] if match.end() < len(text) else None
        if _is_word_char(before) or _is_word_char(after):
            continue
        pieces.append(text[pos : match.start()])
        pieces.append(PN_TOKEN)
        pos = match.end()
    pieces.append(text[pos:])
    return "".join(pieces)


# ---------------------------------------------------------------------------
# Samples


@dataclass(frozen=True)
class TextSample:
    """One post with two independent annotations.

    ``raw_text`` is the unmodified full text; ``modified_text``, when
    present, is the variant with proper nouns already replaced by ``<PN>``.
    """

    id: int
    raw_text: str
    modified_text: str | None
    label1: Label
    label2: Label
    source: str

    def __post_init__(self):
        if not self.raw_text.strip():
            raise ValueError(f"sample {self.id}: raw_text is empty")
        if self.source not in SOURCES:
            raise ValueError(
                f"sample {self.id}: unknown source {self.source!r}; "
                f"expected one of {SOURCES}"
            )


def select_text(sample: TextSample, text_mode: str) -> str | None:
    """Pick the text variant for an experiment: 'FT' raw, 'PN' tagged."""
    if text_mode == "FT":
        return sample.raw_text
    if text_mode == "PN":
        return sample.modified_text
    raise ValueError(f"text_mode must be 'PN' or 'FT', got {text_mode!r}")


def is_bangla_text(text: str) -> bool:
    """True when more than half of the letters fall in the Bangla block.

    Rows with no letters at all count as Romanized, keeping the rule total
    and exclusive: every corpus partitions exactly into Bangla + Romanized.
    """
    letters = bangla = 0
    for ch in text:
        if ch.isalpha():
            letters += 1
            if "ঀ" <= ch <= "৿":
                bangla += 1
    return letters > 0 and bangla * 2 > letters


def filter_by_dataset_tag(
    samples: Sequence[TextSample], dataset: str
) -> list[TextSample]:
    """Select rows for a dataset tag: 'Bangla', 'RB', or 'BRBT' (all)."""
    if dataset == "BRBT":
        return list(samples)
    if dataset == "Bangla":
        return [s for s in samples if is_bangla_text(s.raw_text)]
    if dataset == "RB":
        return [s for s in samples if not is_bangla_text(s.raw_text)]
    raise ValueError(f"unknown dataset tag {dataset!r}")


def corpus_stats(samples: Sequence[TextSample]) -> dict:
    """Per-source counts plus script split; count sums always equal total."""
    per_source = {name: 0 for name in SOURCES}
    bangla = 0
    for s in samples:
        per_source[s.source] += 1
        if is_bangla_text(s.raw_text):
            bangla += 1
    return {
        "total": len(samples),
        "per_source": per_source,
        "bangla": bangla,
        "romanized": len(samples) - bangla,
    }


# ---------------------------------------------------------------------------
# Vocabulary


@dataclass(frozen=True)
class Vocab:
    """Frequency-ranked token ids with fixed reserved entries.

    Ids are dense 0..size-1. Non-reserved ids are assigned by descending
    corpus frequency, ties broken by first occurrence. In fixed mode at most
    ``cap`` tokens are kept beyond the 3 reserved entries.
    """

    token_to_id: dict[str, int]
    id_to_token: tuple[str, ...]
    mode: str
    cap: int | None
    frequencies: dict[str, int]

    @property
    def size(self) -> int:
        return len(self.id_to_token)

    def lookup(self, token: str) -> int:
        if token in RESERVED_TOKENS:
            return RESERVED_TOKENS[token]
        return self.token_to_id.get(token, OOV_ID)


def build_vocab(
    token_lists: Sequence[Sequence[str]],
    mode: str = "full",
    cap: int | None = None,
) -> Vocab:
    """Rank tokens by frequency and assign dense ids above the reserved ones.

    ``mode='full'`` keeps every distinct token; ``mode='fixed'`` keeps only
    the ``cap`` most frequent. Reserved literals are never re-ranked.
    """
    if mode not in ("full", "fixed"):
        raise ValueError(f"mode must be 'full' or 'fixed', got {mode!r}")
    if mode == "fixed":
        if cap is None or cap < 1:
            raise ValueError("fixed mode needs a positive cap")
    counts: Counter[str] = Counter()
    first_seen: dict[str, int] = {}
    position = 0
    total_tokens = 0
    for tokens in token_lists:
        for token in tokens:
            total_tokens += 1
            counts[token] += 1
            if token not in first_seen:
                first_seen[token] = position
                position += 1
    if total_tokens == 0:
        raise ValueError("cannot build a vocabulary from an all-empty corpus")

    ranked = sorted(
        (t for t in counts if t not in RESERVED_TOKENS),
        key=lambda t: (-counts[t], first_seen[t]),
    )
    if mode == "fixed":
        ranked = ranked[:cap]

    id_to_token = [PAD_TOKEN, OOV_TOKEN, PN_TOKEN] + ranked
    token_to_id = {token: i for i, token in enumerate(id_to_token)}
    frequencies = {PAD_TOKEN: 0, OOV_TOKEN: 0, PN_TOKEN: counts.get(PN_TOKEN, 0)}
    frequencies.update({t: counts[t] for t in ranked})
    return Vocab(
        token_to_id=token_to_id,
        id_to_token=tuple(id_to_token),
        mode=mode,
        cap=cap if mode == "fixed" else None,
        frequencies=frequencies,
    )


def encode(tokens: Sequence[str], vocab: Vocab, maxlen: int) -> list[int]:
    """Map tokens to ids and shape to exactly ``maxlen``.

    Unknown tokens become OOV. Longer sequences keep their last ``maxlen``
    tokens; shorter ones are left-padded with PAD so the most recent tokens
    sit next to the classifier.
    """
    if maxlen < 1:
        raise ValueError("maxlen must be >= 1")
    ids = [vocab.lookup(t) for t in tokens]
    if len(ids) > maxlen:
        ids = ids[-maxlen:]
    return [PAD_ID] * (maxlen - len(ids)) + ids


# ---------------------------------------------------------------------------
# Encoded dataset


@dataclass(frozen=True)
class EncodedDataset:
    """Fixed-length id sequences with both annotation columns in parallel."""

    sequences: np.ndarray
    labels1: tuple[Label, ...]
    labels2: tuple[Label, ...]
    maxlen: int
    vocab_size: int

    def __post_init__(self):
        seq = np.array(self.sequences, dtype=np.int64)
        if seq.ndim != 2:
            raise ValueError(f"sequences must be 2-D, got shape {seq.shape}")
        if seq.shape[1] != self.maxlen:
            raise ValueError(
                f"rows have length {seq.shape[1]}, expected maxlen={self.maxlen}"
            )
        if seq.size and (seq.min() < 0 or seq.max() >= self.vocab_size):
            raise ValueError("token id out of range for vocab_size")
        if len(self.labels1) != seq.shape[0] or len(self.labels2) != seq.shape[0]:
            raise ValueError("label arrays must match the number of rows")
        seq.setflags(write=False)
        object.__setattr__(self, "sequences", seq)
        object.__setattr__(self, "labels1", tuple(self.labels1))
        object.__setattr__(self, "labels2", tuple(self.labels2))

    def __len__(self) -> int:
        return self.sequences.shape[0]

    def subset(self, selector) -> "EncodedDataset":
        """Row subset by boolean mask or index array; labels follow along."""
        selector = np.asarray(selector)
        if selector.dtype == bool:
            indices = np.flatnonzero(selector)
        else:
            indices = selector
        return EncodedDataset(
            sequences=self.sequences[indices],
            labels1=tuple(self.labels1[i] for i in indices),
            labels2=tuple(self.labels2[i] for i in indices),
            maxlen=self.maxlen,
            vocab_size=self.vocab_size,
        )


def encode_corpus(
    token_lists: Sequence[Sequence[str]],
    labels1: Sequence[Label],
    labels2: Sequence[Label],
    vocab: Vocab,
    maxlen: int,
) -> EncodedDataset:
    """Encode a tokenized corpus into an :class:`EncodedDataset`."""
    rows = [encode(tokens, vocab, maxlen) for tokens in token_lists]
    sequences = (
        np.array(rows, dtype=np.int64)
        if rows
        else np.zeros((0, maxlen), dtype=np.int64)
    )
    return EncodedDataset(
        sequences=sequences,
        labels1=tuple(labels1),
        labels2=tuple(labels2),
        maxlen=maxlen,
        vocab_size=vocab.size,
    )


def split_shuffle(
    dataset: EncodedDataset,
    ratios: tuple[float, float, float],
    seed: int,
) -> tuple[EncodedDataset, EncodedDataset, EncodedDataset]:
    """Seeded shuffle, then contiguous train/val/test slices.

    Sizes are floor(n*train), floor(n*val) and the remainder; the same
    permutation is applied to both label columns. Identical seeds produce
    identical splits.
    """
    train_r, val_r, test_r = ratios
    if min(train_r, val_r, test_r) <= 0:
        raise ValueError("all split ratios must be positive")
    if abs(train_r + val_r + test_r - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1, got {ratios}")
    n = len(dataset)
    n_train = int(n * train_r)
    n_val = int(n * val_r)
    n_test = n - n_train - n_val
    if min(n_train, n_val, n_test) < 1:
        raise ValueError(
            f"split of {n} rows by {ratios} leaves an empty part "
            f"({n_train}/{n_val}/{n_test})"
        )
    perm = np.random.default_rng(seed).permutation(n)
    return (
        dataset.subset(perm[:n_train]),
        dataset.subset(perm[n_train : n_train + n_val]),
        dataset.subset(perm[n_train + n_val :]),
    )


# ---------------------------------------------------------------------------
# Serialization

_ENCODED_MAGIC = b"BSE1"
_ENCODED_FORMAT = "banglasent-encoded-v1"


def load_corpus(path) -> list[TextSample]:
    """Read a JSON Lines corpus. One object per line, UTF-8:

    ``{"id": int, "raw": str, "modified": str|null,
       "label1": "0"|"1"|"A", "label2": "0"|"1"|"A", "source": str}``
    """
    samples = []
    seen_ids = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                sample = TextSample(
                    id=int(obj["id"]),
                    raw_text=obj["raw"],
                    modified_text=obj.get("modified"),
                    label1=Label.parse(obj["label1"]),
                    label2=Label.parse(obj["label2"]),
                    source=obj["source"],
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad corpus row: {exc}") from exc
            if sample.id in seen_ids:
                raise ValueError(f"{path}:{lineno}: duplicate sample id {sample.id}")
            seen_ids.add(sample.id)
            samples.append(sample)
    return samples


def save_corpus(samples: Sequence[TextSample], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(
                json.dumps(
                    {
                        "id": s.id,
                        "raw": s.raw_text,
                        "modified": s.modified_text,
                        "label1": s.label1.format(),
                        "label2": s.label2.format(),
                        "source": s.source,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def save_encoded(path, dataset: EncodedDataset, vocab: Vocab) -> None:
    """Write the binary encoded-dataset file.

    Layout: 4-byte magic ``BSE1`` | uint32 LE header length | UTF-8 JSON
    header | ``count * maxlen`` uint32 LE token ids, row-major.
    """
    header = {
        "format": _ENCODED_FORMAT,
        "maxlen": dataset.maxlen,
        "count": len(dataset),
        "vocab_size": dataset.vocab_size,
        "vocab": {
            "mode": vocab.mode,
            "cap": vocab.cap,
            "id_to_token": list(vocab.id_to_token),
            "frequencies": vocab.frequencies,
        },
        "labels1": [lab.format() for lab in dataset.labels1],
        "labels2": [lab.format() for lab in dataset.labels2],
    }
    header_bytes = json.dumps(header, ensure_ascii=False).encode("utf-8")
    body = np.ascontiguousarray(dataset.sequences, dtype="<u4").tobytes()
    with open(path, "wb") as fh:
        fh.write(_ENCODED_MAGIC)
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(body)


def load_encoded(path) -> tuple[EncodedDataset, Vocab]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _ENCODED_MAGIC:
        raise ValueError(f"{path}: not an encoded dataset file")
    (header_len,) = struct.unpack("<I", blob[4:8])
    header = json.loads(blob[8 : 8 + header_len].decode("utf-8"))
    if header.get("format") != _ENCODED_FORMAT:
        raise ValueError(f"{path}: unknown format {header.get('format')!r}")
    count, maxlen = header["count"], header["maxlen"]
    body = blob[8 + header_len :]
    expected = count * maxlen * 4
    if len(body) != expected:
        raise ValueError(
            f"{path}: body holds {len(body)} bytes, expected {expected}"
        )
    sequences = (
        np.frombuffer(body, dtype="<u4").astype(np.int64).reshape(count, maxlen)
    )
    vocab_meta = header["vocab"]
    id_to_token = tuple(vocab_meta["id_to_token"])
    vocab = Vocab(
        token_to_id={t: i for i, t in enumerate(id_to_token)},
        id_to_token=id_to_token,
        mode=vocab_meta["mode"],
        cap=vocab_meta["cap"],
        frequencies={k: int(v) for k, v in vocab_meta["frequencies"].items()},
    )
    dataset = EncodedDataset(
        sequences=sequences,
        labels1=tuple(Label.parse(v) for v in header["labels1"]),
        labels2=tuple(Label.parse(v) for v in header["labels2"]),
        maxlen=maxlen,
        vocab_size=header["vocab_size"],
    )
    return dataset, vocab


def write_vocab_tsv(vocab: Vocab, path) -> None:
    """Export ``token<TAB>id<TAB>frequency`` rows in id order."""
    with open(path, "w", encoding="utf-8") as fh:
        for token_id, token in enumerate(vocab.id_to_token):
            fh.write(f"{token}\t{token_id}\t{vocab.frequencies.get(token, 0)}\n")
