"""Recursive mass cascades on the complete ternary tree.

A cascade of depth k assigns a positive mass to every word over {1,2,3} of
length <= k: the root carries mass 1 and each word splits its mass among its
three children by an independent Dirichlet(1/2, 1/2, 1/2) vector.  This is
the mass marginal of recursively decomposing a continuum tree at the branch
point of three uniformly sampled points; the geometry is deliberately not
materialised here (the excursion module covers geometric questions), so a
cascade is 3^k scalars instead of 3^k metric spaces.

A zoom trace is the view of the cascade along the path of one uniform
point: per scale an independent split vector plus the size-biased letter it
selects.  Good scales, the branching-random-walk envelope and the
size-biased descent used by the audit module all live here.

Storage is one numpy array per level; the word (a_1, ..., a_j) sits at rank
sum((a_i - 1) * 3^(j-i)), so the children of rank r are ranks 3r, 3r+1,
3r+2 of the next level.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import DomainError, InvariantError
from .randkit import sample_dirichlet_array, size_biased_letters

__all__ = [
    "MAX_DEPTH",
    "TernaryWord",
    "word_rank",
    "rank_to_word",
    "word_str",
    "MassCascade",
    "ZoomTrace",
    "build_cascade",
    "zoom_trace",
    "good_scales",
    "brw_envelope",
    "dump_cascade_jsonl",
]

# 3^14 ~ 4.8M leaf masses: memory guard for exact conservation checking
MAX_DEPTH = 14

TernaryWord = tuple  # tuple of letters in {1, 2, 3}

_DIR_HALF = (0.5, 0.5, 0.5)


def word_rank(word: Sequence[int]) -> int:
    """Rank of a word within its level (base-3, letters 1..3)."""
    r = 0
    for a in word:
        if a not in (1, 2, 3):
            raise DomainError(f"letters must be in {{1,2,3}}, got {a}")
        r = 3 * r + (a - 1)
    return r


def rank_to_word(rank: int, depth: int) -> TernaryWord:
    letters = []
    for _ in range(depth):
        letters.append(rank % 3 + 1)
        rank //= 3
    return tuple(reversed(letters))


def word_str(word: Sequence[int]) -> str:
    return "".join(str(a) for a in word) if len(word) else "∅"


class MassCascade:
    """Region masses of a depth-k recursive decomposition.

    ``levels[j]`` is the float array of the 3^j masses at depth j, indexed by
    word rank.  Invariants: the root mass is 1, each triple of children sums
    to its parent within 1e-12, and every mass is strictly positive.
    """

    __slots__ = ("depth", "levels")

    def __init__(self, levels: list):
        self.levels = [np.asarray(lv, dtype=float) for lv in levels]
        self.depth = len(self.levels) - 1
        for j, lv in enumerate(self.levels):
            if lv.shape != (3**j,):
                raise DomainError(f"level {j} must have 3^{j} masses")

    def mass(self, word: Sequence[int]) -> float:
        """Mass of the region indexed by ``word`` (the empty word is the root)."""
        j = len(word)
        if j > self.depth:
            raise DomainError(f"word depth {j} exceeds cascade depth {self.depth}")
        return float(self.levels[j][word_rank(word)])

    def child_ratios(self, word: Sequence[int]) -> np.ndarray:
        """Relative masses of the three children of ``word``, summing to 1."""
        j = len(word)
        if j >= self.depth:
            raise DomainError("word has no children at this cascade depth")
        r = word_rank(word)
        kids = self.levels[j + 1][3 * r : 3 * r + 3]
        return kids / self.levels[j][r]

    def path_ratios(self, path: Sequence[int]) -> np.ndarray:
        """(len(path), 3) array: row j holds the child ratios of path[:j]."""
        k = len(path)
        if k > self.depth:
            raise DomainError("path longer than cascade depth")
        out = np.empty((k, 3), dtype=float)
        r = 0
        for j, a in enumerate(path):
            kids = self.levels[j + 1][3 * r : 3 * r + 3]
            out[j] = kids / self.levels[j][r]
            r = 3 * r + (a - 1)
        return out

    def path_masses(self, path: Sequence[int]) -> np.ndarray:
        """Masses of the prefixes of ``path``, root included (length k+1)."""
        k = len(path)
        out = np.empty(k + 1, dtype=float)
        out[0] = self.levels[0][0]
        r = 0
        for j, a in enumerate(path):
            r = 3 * r + (a - 1)
            out[j + 1] = self.levels[j + 1][r]
        return out

    def descend_size_biased(self, rng: np.random.Generator) -> TernaryWord:
        """Sample a full-depth word, each letter drawn with probability equal
        to the relative child mass — the law of the path of a uniform point."""
        letters = []
        r = 0
        for j in range(self.depth):
            ratios = self.levels[j + 1][3 * r : 3 * r + 3] / self.levels[j][r]
            u = rng.random()
            a = int(np.searchsorted(np.cumsum(ratios), u, side="right"))
            a = min(a, 2) + 1
            letters.append(a)
            r = 3 * r + (a - 1)
        return tuple(letters)

    def items(self) -> Iterator[tuple]:
        """Yield (word, mass) over all words of depth <= k, level by level."""
        for j, lv in enumerate(self.levels):
            for rank in range(lv.shape[0]):
                yield rank_to_word(rank, j), float(lv[rank])

    def validate(self, tol: float = 1e-12) -> None:
        if abs(float(self.levels[0][0]) - 1.0) > tol:
            raise InvariantError("root mass must be 1")
        for j in range(self.depth):
            parents = self.levels[j]
            kids = self.levels[j + 1].reshape(-1, 3).sum(axis=1)
            if np.max(np.abs(kids - parents)) > tol * max(1.0, j):
                raise InvariantError(f"children do not sum to parents at depth {j}")
        for lv in self.levels:
            if np.any(lv <= 0.0):
                raise InvariantError("all masses must be strictly positive")


def build_cascade(k: int, rng: np.random.Generator) -> MassCascade:
    """Draw a depth-k cascade with i.i.d. Dirichlet(1/2,1/2,1/2) splits."""
    if not 0 <= k <= MAX_DEPTH:
        raise DomainError(f"cascade depth must be in [0, {MAX_DEPTH}]")
    levels = [np.ones(1)]
    for j in range(k):
        splits = sample_dirichlet_array(_DIR_HALF, 3**j, rng)
        levels.append((levels[j][:, None] * splits).ravel())
    return MassCascade(levels)


@dataclass(frozen=True)
class ZoomTrace:
    """Per-scale records of the decomposition around one uniform point.

    Row j of ``splits`` (j = 0..k-1) is the relative-mass vector of the
    depth-j region on the path, and ``letters[j]`` in {1,2,3} is the letter
    chosen out of it, i.e. path letter j+1.  The rows are i.i.d.: split ~
    Dirichlet(1/2,1/2,1/2), P[letter = a | split] = split_a.
    """

    splits: np.ndarray
    letters: np.ndarray

    @property
    def depth(self) -> int:
        return int(self.letters.shape[0])

    @property
    def path(self) -> TernaryWord:
        return tuple(int(a) for a in self.letters)

    @property
    def records(self) -> Iterator[tuple]:
        """Yield (W1, W2, W3, I) per scale."""
        for j in range(self.depth):
            w = self.splits[j]
            yield float(w[0]), float(w[1]), float(w[2]), int(self.letters[j])

    def chosen_weights(self) -> np.ndarray:
        """W_I per scale (Beta(3/2, 1) marginals)."""
        return self.splits[np.arange(self.depth), self.letters - 1]

    def log_path_mass(self) -> float:
        """log of the depth-k region mass along the path; computed in log
        space so arbitrarily deep traces cannot underflow."""
        return float(np.log(self.chosen_weights()).sum())


def zoom_trace(k: int, rng: np.random.Generator) -> ZoomTrace:
    """Sample the k i.i.d. (split, size-biased letter) records of a zoom."""
    if k < 1:
        raise DomainError("zoom trace depth must be >= 1")
    splits = sample_dirichlet_array(_DIR_HALF, k, rng)
    letters = size_biased_letters(splits, rng)
    return ZoomTrace(splits=splits, letters=letters)


def good_scales(trace: ZoomTrace, alpha: float) -> set:
    """Scales j in [1, k-1] that are alpha-good for the trace.

    Scale j is good when j is odd, path letters j and j+1 both equal 3, and
    the smallest of the three relative child masses of the depth-j region is
    at least alpha.  (Letter j is ``letters[j-1]``; the depth-j split is row
    j of ``splits``.)
    """
    if not 0.0 < alpha < 1.0 / 3.0:
        raise DomainError("alpha must lie in (0, 1/3)")
    k = trace.depth
    out = set()
    mins = trace.splits.min(axis=1)
    for j in range(1, k, 2):
        if trace.letters[j - 1] == 3 and trace.letters[j] == 3 and mins[j] >= alpha:
            out.add(j)
    return out


def brw_envelope(c: MassCascade) -> tuple:
    """Per-depth (min log-mass, max log-mass) of the cascade.

    The log masses along levels form a branching random walk with
    Dirichlet(1/2,1/2,1/2) log-increments; the envelope is its exact
    running extremes.
    """
    mins = np.empty(c.depth + 1)
    maxs = np.empty(c.depth + 1)
    for j, lv in enumerate(c.levels):
        logs = np.log(lv)
        mins[j] = logs.min()
        maxs[j] = logs.max()
    return mins, maxs


def dump_cascade_jsonl(c: MassCascade, fp) -> None:
    """Write one JSON record per word: {"word": "132", "mass": ...}.

    ``fp`` is a writable text file object.  The root is word "∅".
    """
    for word, mass in c.items():
        fp.write(json.dumps({"word": word_str(word), "mass": mass}) + "\n")
