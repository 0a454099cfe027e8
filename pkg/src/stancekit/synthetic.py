"""Deterministic synthetic corpora for the harness, tests and benchmarks.

Class-indicative vocabularies are invented and stopword-free; texts get
the usual tweet decorations (mentions, links, elongations, retweets) so
the preprocessing stages all get exercised.
"""

from __future__ import annotations

import numpy as np

from stancekit.kernels import TaskedInput
from stancekit.sparse import SparseFeatureVector
from stancekit.stances import Stance
from stancekit.textpipe import LabeledInstance

_SUPPORT_WORDS = ["confirmed", "breaking", "terrible", "happening", "everyone", "praying"]
_DENY_WORDS = ["false", "hoax", "debunked", "untrue", "fabricated", "calm"]
_QUESTION_WORDS = ["source", "proof", "anyone", "verify", "doubt", "legit"]
_NOISE_WORDS = ["riot", "city", "police", "crowd", "street", "tonight", "photo", "report"]

_CLASS_WORDS = {
    Stance.SUPPORTING: _SUPPORT_WORDS,
    Stance.DENYING: _DENY_WORDS,
    Stance.QUESTIONING: _QUESTION_WORDS,
}

# per-rumour stance priors, echoing the skew of real collections
# (including one rumour with no denials at all)
_GRID_PRIORS = [
    (0.70, 0.20, 0.10),
    (0.50, 0.30, 0.20),
    (0.80, 0.00, 0.20),
    (0.40, 0.40, 0.20),
    (0.60, 0.10, 0.30),
    (0.34, 0.33, 0.33),
    (0.30, 0.50, 0.20),
]


def _decorate(words, rng, allow_noise=True):
    if allow_noise and rng.random() < 0.18:
        words.append("@user" + str(rng.integers(100, 999)))
    if allow_noise and rng.random() < 0.10:
        words.append("http://t.co/" + "".join(rng.choice(list("abcdefgh"), 4)))
    if allow_noise and rng.random() < 0.12:
        i = int(rng.integers(0, len(words)))
        if not words[i].startswith(("@", "http")):
            words[i] = words[i] + words[i][-1] * int(rng.integers(2, 5))
    rng.shuffle(words)
    text = " ".join(words)
    roll = rng.random()
    if roll < 0.25:
        text += "!"
    elif roll < 0.40:
        text += "?"
    return text


def make_grid_corpus(seed: int = 7, n_rumours: int = 7, per_rumour: int = 55,
                     retweet_rate: float = 0.08) -> list:
    """Multi-rumour corpus with varying stance skew for protocol testing."""
    rng = np.random.default_rng(seed)
    corpus = []
    stances = list(Stance)
    for r in range(n_rumours):
        rumour_id = f"rumour{r}"
        priors = np.array(_GRID_PRIORS[r % len(_GRID_PRIORS)])
        for i in range(per_rumour):
            label = stances[int(rng.choice(3, p=priors))]
            words = list(rng.choice(_CLASS_WORDS[label], size=int(rng.integers(2, 5))))
            words += list(rng.choice(_NOISE_WORDS, size=int(rng.integers(2, 4))))
            words.append(f"topic{r}" + rng.choice(list("ab")))
            text = _decorate(words, rng)
            is_retweet = bool(rng.random() < retweet_rate)
            if is_retweet:
                text = "RT @user" + str(rng.integers(10, 99)) + ": " + text
            corpus.append(
                LabeledInstance(
                    tweet_id=f"{rumour_id}-{i:03d}",
                    text=text,
                    rumour_id=rumour_id,
                    event_id="riot-event",
                    order_index=i,
                    label=label,
                    is_retweet=is_retweet,
                )
            )
    return corpus


def make_separable_corpus(seed: int = 11, n_rumours: int = 3, per_rumour: int = 36) -> list:
    """Linearly separable corpus: class vocabularies are disjoint."""
    rng = np.random.default_rng(seed)
    corpus = []
    stances = list(Stance)
    for r in range(n_rumours):
        rumour_id = f"sep{r}"
        labels = [stances[i % 3] for i in range(per_rumour)]
        rng.shuffle(labels)
        for i, label in enumerate(labels):
            words = list(rng.choice(_CLASS_WORDS[label], size=3))
            words.append(f"sepic{r}")
            rng.shuffle(words)
            corpus.append(
                LabeledInstance(
                    tweet_id=f"{rumour_id}-{i:03d}",
                    text=" ".join(words),
                    rumour_id=rumour_id,
                    event_id="sep-event",
                    order_index=i,
                    label=label,
                )
            )
    return corpus


def make_binary_dataset(seed: int, n: int, dim: int = 6, tasks: int = 1,
                        nnz: int = 3, max_count: int = 3):
    """Random tasked sparse inputs and +/-1 labels for inference tests."""
    rng = np.random.default_rng(seed)
    inputs = []
    for _ in range(n):
        k = int(rng.integers(1, nnz + 1))
        idx = np.sort(rng.choice(dim, size=k, replace=False))
        cnt = rng.integers(1, max_count + 1, size=k)
        inputs.append(
            TaskedInput(
                SparseFeatureVector(idx.astype(np.int64), cnt.astype(np.int64)),
                int(rng.integers(0, tasks)),
            )
        )
    labels = rng.choice([-1.0, 1.0], size=n)
    return inputs, labels
