"""Deterministic tweet preprocessing and sparse feature encoding.

The preprocessing stages run in a fixed order: lowercase, whitespace
tokenisation, emoticon-to-word substitution, username removal, URL
removal, punctuation stripping (keeping '.', '!', '?' as standalone
tokens), stopword removal, squashing of 3+ repeated characters down to
two, and stemming.  Tokens are then counted into bag-of-words or
bag-of-Brown-cluster vectors.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources as importlib_resources
from typing import Callable, Optional

from stancekit import porter
from stancekit.sparse import SparseFeatureVector
from stancekit.stances import Stance

_KEPT_PUNCT = ".!?"
_SQUASH_RE = re.compile(r"(.)\1{2,}", re.DOTALL)
_URL_PREFIXES = ("http://", "https://", "www.")

BROWN_WIDTH = 1000


@dataclass
class LabeledInstance:
    tweet_id: str
    text: str
    rumour_id: str
    event_id: str = ""
    order_index: int = 0
    label: Optional[Stance] = None
    is_retweet: bool = False

    def __post_init__(self):
        if not self.event_id:
            self.event_id = self.rumour_id
        if self.order_index < 0:
            raise ValueError("order_index must be >= 0")


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _data_path(name: str):
    return importlib_resources.files("stancekit").joinpath("data").joinpath(name)


def load_stopwords(path=None) -> frozenset:
    src = _data_path("stopwords.txt") if path is None else path
    text = src.read_text(encoding="utf-8") if hasattr(src, "read_text") else open(src, encoding="utf-8").read()
    return frozenset(line.strip() for line in text.splitlines() if line.strip())


def load_emoticons(path=None) -> dict:
    src = _data_path("emoticons.tsv") if path is None else path
    text = src.read_text(encoding="utf-8") if hasattr(src, "read_text") else open(src, encoding="utf-8").read()
    table = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        emoticon, replacement = line.split("\t")
        table[emoticon] = replacement
    return table


def resource_digests() -> dict:
    """sha256 of the shipped resource files, pinned by tests."""
    return {
        "stopwords": _sha256(_data_path("stopwords.txt").read_bytes()),
        "emoticons": _sha256(_data_path("emoticons.tsv").read_bytes()),
    }


@dataclass(frozen=True)
class PreprocessResources:
    stopwords: frozenset
    emoticons: dict
    stemmer: Callable[[str], str]
    remove_urls: bool = True


@lru_cache(maxsize=1)
def default_resources() -> PreprocessResources:
    return PreprocessResources(load_stopwords(), load_emoticons(), porter.stem)


def _squash_repeats(token: str) -> str:
    return _SQUASH_RE.sub(r"\1\1", token)


def _strip_punctuation(token: str):
    """Drop punctuation, emitting kept marks ('.', '!', '?') as extra tokens."""
    letters = []
    kept = []
    for ch in token:
        if ch.isalnum():
            letters.append(ch)
        elif ch in _KEPT_PUNCT:
            kept.append(ch)
    word = "".join(letters)
    out = [word] if word else []
    out.extend(kept)
    return out


def preprocess(text: str, resources: PreprocessResources | None = None) -> list:
    if resources is None:
        resources = default_resources()
    tokens = []
    for raw in text.lower().split():
        raw = resources.emoticons.get(raw, raw)
        if raw.startswith("@"):
            continue
        if resources.remove_urls and raw.startswith(_URL_PREFIXES):
            continue
        for piece in _strip_punctuation(raw):
            if piece in resources.stopwords:
                continue
            piece = _squash_repeats(piece)
            tokens.append(resources.stemmer(piece))
    return tokens


def encode_bow(tokens, vocab: dict, grow: bool) -> SparseFeatureVector:
    """Count tokens against a token->index table, optionally growing it."""
    counts: dict = {}
    for tok in tokens:
        idx = vocab.get(tok)
        if idx is None:
            if not grow:
                continue
            idx = len(vocab)
            vocab[tok] = idx
        counts[idx] = counts.get(idx, 0) + 1
    return SparseFeatureVector.from_counts(counts)


@dataclass
class BrownClusterTable:
    """Word -> cluster-id mapping from a Brown paths file.

    The paths format is tab-separated ``bitstring<TAB>word<TAB>count``;
    cluster ids number the distinct bitstrings by first appearance.
    """

    rows: list = field(repr=False)
    word_to_cluster: dict = field(repr=False)
    cluster_of_bits: dict = field(repr=False)
    source_digest: str = ""

    MAX_CLUSTERS = BROWN_WIDTH

    @classmethod
    def from_text(cls, text: str, digest: str = "") -> "BrownClusterTable":
        rows = []
        cluster_of_bits: dict = {}
        word_to_cluster: dict = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"brown paths line {lineno}: expected 3 tab-separated columns")
            bits, word, count = parts
            if bits not in cluster_of_bits:
                cluster_of_bits[bits] = len(cluster_of_bits)
            rows.append((bits, word, count))
            word_to_cluster[word] = cluster_of_bits[bits]
        if len(cluster_of_bits) > cls.MAX_CLUSTERS:
            raise ValueError(
                f"brown paths file defines {len(cluster_of_bits)} clusters; "
                f"at most {cls.MAX_CLUSTERS} supported"
            )
        return cls(rows, word_to_cluster, cluster_of_bits, digest)

    @classmethod
    def from_file(cls, path) -> "BrownClusterTable":
        with open(path, "rb") as fh:
            raw = fh.read()
        return cls.from_text(raw.decode("utf-8"), digest=_sha256(raw))

    def lookup(self, word: str):
        return self.word_to_cluster.get(word)

    def to_text(self) -> str:
        return "".join(f"{bits}\t{word}\t{count}\n" for bits, word, count in self.rows)

    def to_file(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())

    def pairs(self):
        return sorted(self.word_to_cluster.items())


def encode_brown(tokens, table: BrownClusterTable) -> SparseFeatureVector:
    counts: dict = {}
    for tok in tokens:
        cid = table.lookup(tok)
        if cid is None:
            continue
        counts[cid] = counts.get(cid, 0) + 1
    return SparseFeatureVector.from_counts(counts)


def filter_retweets(instances, training: bool):
    """Drop retweets from training data; test data passes through untouched."""
    if not training:
        return list(instances)
    return [
        inst
        for inst in instances
        if not (inst.is_retweet or inst.text.startswith("RT @"))
    ]
