"""Random primitives: seeded substreams and the Dirichlet/Beta toolbox.

Every stochastic routine in this package takes an explicit
``numpy.random.Generator``.  Reproducibility of an experiment row therefore
reduces to reproducing its stream, which is what :func:`substream` provides:
a master seed plus an integer key path (replicate index, grid index, ...) is
hashed through ``numpy.random.SeedSequence`` into an independent generator.
Parallel replicates must use disjoint key paths; they never share a stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "substream",
    "DirichletVector",
    "sample_dirichlet",
    "sample_dirichlet_array",
    "aggregate",
    "size_biased_index",
    "size_biased_letters",
]


def substream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for substream ``key`` of master stream ``seed``.

    The split rule is ``SeedSequence(entropy=seed, spawn_key=key)``: the key
    integers are hashed into the seed, so distinct key paths yield
    statistically independent streams and the same path always yields the
    same stream.
    """
    if seed < 0:
        raise DomainError("master seed must be a non-negative integer")
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


@dataclass(frozen=True)
class DirichletVector:
    """A point of the simplex together with the Dirichlet parameters it was
    drawn under.

    Invariants: ``weights`` sums to 1 within 1e-12 and every coordinate is
    strictly positive (the law is atomless at 0 for positive parameters).
    """

    weights: np.ndarray
    params: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        a = np.asarray(self.params, dtype=float)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "params", a)
        if w.ndim != 1 or a.shape != w.shape:
            raise DomainError("weights and params must be 1-d of equal length")
        if np.any(a <= 0.0):
            raise DomainError("Dirichlet parameters must be strictly positive")
        if abs(float(w.sum()) - 1.0) > 1e-12:
            raise DomainError("weights must sum to 1 within 1e-12")
        if np.any(w <= 0.0):
            raise DomainError("weights must be strictly positive")

    def __len__(self) -> int:
        return self.weights.shape[0]


def sample_dirichlet(params, rng: np.random.Generator) -> DirichletVector:
    """Draw one Dirichlet vector with the given positive parameters.

    Backed by the generator's gamma-based Dirichlet sampler (exact in law for
    all positive shapes, including 1/2) and renormalised so the coordinates
    sum to 1 at machine precision.
    """
    a = np.asarray(params, dtype=float)
    if a.ndim != 1 or a.size == 0 or np.any(a <= 0.0):
        raise DomainError("params must be a non-empty 1-d array of positive reals")
    w = rng.dirichlet(a)
    w = w / w.sum()
    return DirichletVector(weights=w, params=a)


def sample_dirichlet_array(
    params, size: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw ``size`` i.i.d. Dirichlet vectors, returned as a (size, d) array.

    Rows are renormalised to sum to exactly 1 up to float rounding.
    """
    a = np.asarray(params, dtype=float)
    if np.any(a <= 0.0):
        raise DomainError("params must be strictly positive")
    w = rng.dirichlet(a, size=size)
    return w / w.sum(axis=1, keepdims=True)


def aggregate(w: DirichletVector, i: int):
    """Split ``w`` after coordinate ``i`` (1-based, 1 <= i <= d-1).

    Returns ``(head_sum, head, tail)`` where ``head_sum`` is
    ``w_1 + ... + w_i``, and ``head``/``tail`` are the renormalised halves
    packaged with their own parameter vectors.  The arithmetic is
    deterministic; the distributional facts (head_sum is Beta of the summed
    parameters, the halves are Dirichlet, and the three pieces are mutually
    independent) are properties of the law, checked in the test suite.
    """
    d = len(w)
    if not 1 <= i <= d - 1:
        raise DomainError(f"split index must be in [1, {d - 1}], got {i}")
    head_sum = float(w.weights[:i].sum())
    tail_sum = float(w.weights[i:].sum())
    head = DirichletVector(w.weights[:i] / head_sum, w.params[:i])
    tail = DirichletVector(w.weights[i:] / tail_sum, w.params[i:])
    return head_sum, head, tail


def size_biased_index(w, rng: np.random.Generator) -> int:
    """Draw the 1-based index I with P[I = i | w] = w_i.

    ``w`` is a DirichletVector or any probability vector (zeros allowed in
    the raw-vector form).  Under Dirichlet(a) weights this makes
    P[I = i] = a_i / sum(a) and the conditional law of the weights given
    I = i a Dirichlet with a_i bumped by one; both are exercised as Monte
    Carlo properties in the tests.
    """
    weights = w.weights if isinstance(w, DirichletVector) else np.asarray(w, dtype=float)
    if abs(float(weights.sum()) - 1.0) > 1e-9:
        raise DomainError("weights must sum to 1")
    u = rng.random()
    i = int(np.searchsorted(np.cumsum(weights), u, side="right"))
    return min(i, weights.shape[0] - 1) + 1  # guard the ~1 ulp cdf shortfall


def size_biased_letters(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Vectorised size-biased draw: one 1-based index per row of ``weights``.

    Each row must be a probability vector.
    """
    w = np.asarray(weights, dtype=float)
    cdf = np.cumsum(w, axis=-1)
    u = rng.random(w.shape[:-1] + (1,))
    idx = (u >= cdf).sum(axis=-1).astype(np.int64)
    return np.minimum(idx, w.shape[-1] - 1) + 1
