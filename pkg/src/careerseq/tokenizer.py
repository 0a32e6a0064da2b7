"""Reversible byte-level tokenizer with a trainable pair-merge vocabulary.

Tokens 0..255 are raw bytes, so every UTF-8 string is encodable and
``decode(encode(s)) == s`` holds unconditionally. Training greedily merges
the most frequent adjacent pair; ties break lexicographically on the pair's
byte strings, making training a pure function of the corpus. Encoding
replays merges in training order, which yields the same result as repeatedly
applying the lowest-ranked applicable merge.

Text is pre-split into word-like chunks (a letter, digit, or punctuation run
with an optional leading space, or a whitespace run) and merges never cross
chunk boundaries. Consequently encoding is compositional at chunk
boundaries: a prompt that ends at a word boundary tokenizes the same way on
its own as it does as a prefix of a longer text, which keeps continuation
scoring consistent with how full documents tokenize during training. Splits
that fall inside a chunk still tokenize differently from the concatenation,
so callers must never assume encode(a + b) == encode(a) + encode(b) in
general.

BOS/EOS sit at the top of the id space and never appear in encoder output;
language-model code prepends BOS to every context and appends EOS after the
end-of-data marker.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .taxonomy import OccupationTaxonomy

_BYTE_ALPHABET = 256
_CHUNK_SENTINEL = -1
_DOC_SENTINEL = -2
_PAIR_SHIFT = 1 << 21

_CHUNK_RE = re.compile(r" ?[A-Za-z]+| ?[0-9]+| ?[^\sA-Za-z0-9]+|\s+")


class TokenizerError(ValueError):
    pass


def _doc_array(text: str) -> np.ndarray:
    """Byte values of ``text`` with chunk sentinels between word chunks."""
    parts: list[np.ndarray] = []
    for chunk in _CHUNK_RE.findall(text):
        parts.append(np.frombuffer(chunk.encode("utf-8"), dtype=np.uint8).astype(np.int64))
        parts.append(np.array([_CHUNK_SENTINEL], dtype=np.int64))
    if parts:
        parts.pop()
    return np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)


class Vocabulary:
    def __init__(self, merges: list[tuple[int, int]], target_size: int):
        self.merges = list(merges)
        self.target_size = target_size
        self.token_bytes: list[bytes] = [bytes([i]) for i in range(_BYTE_ALPHABET)]
        for left, right in self.merges:
            self.token_bytes.append(self.token_bytes[left] + self.token_bytes[right])
        self.bos_id = _BYTE_ALPHABET + len(self.merges)
        self.eos_id = self.bos_id + 1
        self.specials = {"BOS": self.bos_id, "EOS": self.eos_id, "NEWLINE": 10}

    @property
    def size(self) -> int:
        return _BYTE_ALPHABET + len(self.merges) + 2

    def __len__(self) -> int:
        return self.size

    # ------------------------------------------------------------ encoding

    def encode_batch(self, texts: Sequence[str]) -> list[list[int]]:
        """Encode many texts in one vectorized pass over the merge list."""
        if not texts:
            return []
        parts = []
        for text in texts:
            arr = _doc_array(text)
            if arr.size:
                parts.append(arr)
            parts.append(np.array([_DOC_SENTINEL], dtype=np.int64))
        arr = np.concatenate(parts)
        for rank, (left, right) in enumerate(self.merges):
            arr = _apply_merge(arr, left, right, _BYTE_ALPHABET + rank)
        out: list[list[int]] = []
        current: list[int] = []
        for tok in arr.tolist():
            if tok == _DOC_SENTINEL:
                out.append(current)
                current = []
            elif tok != _CHUNK_SENTINEL:
                current.append(tok)
        return out

    def encode(self, text: str) -> list[int]:
        if text == "":
            return []
        return self.encode_batch([text])[0]

    def decode(self, ids: Iterable[int]) -> str:
        chunks = []
        for i in ids:
            if i in (self.bos_id, self.eos_id):
                continue
            if not (0 <= i < len(self.token_bytes)):
                raise TokenizerError(f"token id {i} out of range")
            chunks.append(self.token_bytes[i])
        return b"".join(chunks).decode("utf-8", errors="replace")

    # ------------------------------------------------------------------ IO

    def dump_text(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("#careerseq-vocab-v1\n")
            fh.write(f"target_size {self.target_size}\n")
            fh.write(f"specials BOS={self.bos_id} EOS={self.eos_id} NEWLINE=10\n")
            for left, right in self.merges:
                fh.write(f"merge {left} {right}\n")

    @classmethod
    def load_text(cls, path) -> "Vocabulary":
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().rstrip("\n")
            if header != "#careerseq-vocab-v1":
                raise TokenizerError(f"missing vocabulary header in {path}")
            target_line = fh.readline().split()
            if len(target_line) != 2 or target_line[0] != "target_size":
                raise TokenizerError("bad target_size line")
            target_size = int(target_line[1])
            specials_line = fh.readline()
            if not specials_line.startswith("specials "):
                raise TokenizerError("bad specials line")
            merges = []
            for line in fh:
                fields = line.split()
                if not fields:
                    continue
                if fields[0] != "merge" or len(fields) != 3:
                    raise TokenizerError(f"bad merge line {line!r}")
                merges.append((int(fields[1]), int(fields[2])))
        return cls(merges, target_size)


def _apply_merge(arr: np.ndarray, left: int, right: int, new_id: int) -> np.ndarray:
    """Replace every non-overlapping (left, right) pair with new_id,
    scanning left to right."""
    if arr.size < 2:
        return arr
    hits = np.flatnonzero((arr[:-1] == left) & (arr[1:] == right))
    if hits.size == 0:
        return arr
    if left == right:
        # overlapping runs: keep greedily from the left
        keep = []
        last = -2
        for pos in hits.tolist():
            if pos == last + 1:
                continue
            keep.append(pos)
            last = pos
        hits = np.asarray(keep, dtype=np.int64)
    arr = arr.copy()
    arr[hits] = new_id
    mask = np.ones(arr.size, dtype=bool)
    mask[hits + 1] = False
    return arr[mask]


def train_vocab(corpus: Sequence[str], target_size: int, seed: int = 0) -> Vocabulary:
    """Learn pair merges greedily until ``target_size`` base+merge tokens.

    ``target_size`` counts the 256 byte tokens plus learned merges; BOS and
    EOS ride on top. Training stops early if no pair repeats. ``seed`` is
    accepted for interface uniformity; the procedure is deterministic.
    """
    if not corpus or all(len(c) == 0 for c in corpus):
        raise TokenizerError("empty training corpus")
    if target_size < _BYTE_ALPHABET:
        raise TokenizerError(f"target_size {target_size} below byte alphabet {_BYTE_ALPHABET}")
    parts = []
    for text in corpus:
        arr = _doc_array(text)
        if arr.size:
            parts.append(arr)
        parts.append(np.array([_DOC_SENTINEL], dtype=np.int64))
    arr = np.concatenate(parts)
    token_bytes: list[bytes] = [bytes([i]) for i in range(_BYTE_ALPHABET)]
    merges: list[tuple[int, int]] = []
    while _BYTE_ALPHABET + len(merges) < target_size:
        if arr.size < 2:
            break
        a, b = arr[:-1], arr[1:]
        valid = (a >= 0) & (b >= 0)
        if not valid.any():
            break
        keys = a[valid] * _PAIR_SHIFT + b[valid]
        uniq, counts = np.unique(keys, return_counts=True)
        top = counts.max()
        if top < 2:
            break
        candidates = uniq[counts == top]
        pairs = [(int(k // _PAIR_SHIFT), int(k % _PAIR_SHIFT)) for k in candidates]
        left, right = min(pairs, key=lambda p: (token_bytes[p[0]], token_bytes[p[1]]))
        new_id = _BYTE_ALPHABET + len(merges)
        arr = _apply_merge(arr, left, right, new_id)
        merges.append((left, right))
        token_bytes.append(token_bytes[left] + token_bytes[right])
    return Vocabulary(merges, target_size)


def train_template_vocab(
    texts: Sequence[str],
    title_continuations: Sequence[str],
    target_size: int,
    seed: int = 0,
    title_boost: Optional[int] = None,
) -> Vocabulary:
    """Train a vocabulary for template scoring.

    Rare job titles would otherwise earn few merges and decompose into long
    byte runs, making their chained continuation scores the product of many
    weak conditionals. Boosting every title line in the tokenizer's training
    corpus (the tokenizer corpus need not equal the model corpus) drives the
    greedy merges to compact each title into a handful of tokens.
    """
    if title_boost is None:
        title_boost = max(2, len(texts) // max(len(title_continuations), 1))
    corpus = list(texts) + [t + "\n" for t in title_continuations] * title_boost
    return train_vocab(corpus, target_size, seed=seed)


# --------------------------------------------------------------------------
# Job-title helpers
# --------------------------------------------------------------------------


def title_prefix_match(
    taxonomy: OccupationTaxonomy,
    text: str,
    titles: Optional[dict[str, int]] = None,
) -> Optional[int]:
    """Occupation whose exact title prefixes ``text`` after left-trimming.

    When several titles are prefixes (nested titles), the longest wins.
    ``titles`` overrides the candidate map (e.g. numeric titles); it maps
    title string to occupation code.
    """
    trimmed = text.lstrip()
    if titles is None:
        titles = {e.title: e.code for e in taxonomy.entries}
    best: Optional[int] = None
    best_len = -1
    for title, code in titles.items():
        if len(title) > best_len and trimmed.startswith(title):
            best = code
            best_len = len(title)
    return best


@dataclass
class TitleTokenStats:
    mean: float
    min: int
    max: int


def title_token_stats(vocab: Vocabulary, titles: Sequence[str]) -> TitleTokenStats:
    """Token-length distribution of job titles under ``vocab`` (reported next
    to reference tokenizer figures, never asserted against them)."""
    lengths = [len(ids) for ids in vocab.encode_batch(list(titles))]
    return TitleTokenStats(mean=float(np.mean(lengths)), min=int(np.min(lengths)), max=int(np.max(lengths)))
