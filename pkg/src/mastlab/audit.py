"""Mismatch and martingale audits of correspondences between two cascades.

A homeomorphism surrogate here is a *correspondence*: the hierarchical
assignment sending the source cascade's word i to an image mass — in
practice the mass of the same word in a second cascade.  Every audited
quantity is a functional of the two mass families:

* per-scale weak/strict mismatch flags (image child ratios straying from
  the source's by >= delta, with an alpha floor on the source ratios),
* the mass-ratio martingale M_j along a path, its log increments Z_j and
  the penalised increments Z~_j = Z_j + mu * 1{weak mismatch at j-1},
* the kernel e^(mu/2) * sum_i sqrt(p_i q_i), which is the conditional
  Chernoff factor E[exp((Z + mu)/2)] and is at most e^(mu/2)(1 - delta^2/8)
  whenever max|p - q| >= delta,
* sqrt-product sums sum_i sqrt(|R[i]| |R'[i]|) per depth,
* exceedance experiments for the subset-intersection and region-MAST tail
  bounds, and
* the explicit-constants ledger with self-verifying inequalities, evaluated
  in log10 space because most of the chain lives far below float underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .cascade import MassCascade, ZoomTrace
from .cladogram import Cladogram, Region, region, sample_uniform
from .errors import DomainError, InvariantError
from .mast import mast_regions
from .randkit import sample_dirichlet_array, size_biased_letters

__all__ = [
    "Correspondence",
    "MismatchFlags",
    "AuditReport",
    "detect_mismatches",
    "martingale_path",
    "mismatch_kernel",
    "sqrt_product_sum",
    "ChernoffResult",
    "chernoff_supermartingale_check",
    "chernoff_path_ensemble",
    "perturbed_image_splits",
    "exchangeable_tail_bound",
    "IntersectionTailResult",
    "intersection_tail_experiment",
    "RefinedBoundResult",
    "refined_sqrt_bound_experiment",
    "ConstantCheck",
    "LedgerEntry",
    "ConstantsLedger",
    "compute_constants",
]


# -- correspondences ----------------------------------------------------------


@dataclass(frozen=True)
class Correspondence:
    """Source cascade masses |R[i]| paired with image masses |Psi(R[i])|.

    The image is stored as a second cascade over the same words (a
    homeomorphic image of a partition is a partition, so the image masses
    satisfy the same child-sum invariant).  ``identity`` pairs a cascade
    with itself; ``of_pair`` pairs two independently built cascades under
    the index-preserving correspondence i -> i.
    """

    source: MassCascade
    image: MassCascade

    @property
    def depth(self) -> int:
        return min(self.source.depth, self.image.depth)

    @classmethod
    def identity(cls, c: MassCascade) -> "Correspondence":
        return cls(source=c, image=c)

    @classmethod
    def of_pair(cls, source: MassCascade, image: MassCascade) -> "Correspondence":
        return cls(source=source, image=image)

    def validate(self) -> None:
        self.source.validate()
        self.image.validate()
        if float(self.image.levels[0][0]) > 1.0 + 1e-12:
            raise InvariantError("image root mass must be at most 1")


def _path_of(path_or_trace) -> tuple:
    if isinstance(path_or_trace, ZoomTrace):
        return path_or_trace.path
    return tuple(int(a) for a in path_or_trace)


@dataclass(frozen=True)
class MismatchFlags:
    """Per-scale mismatch flags along a path.

    Scale j (0-based row j) refers to the split of the depth-j prefix into
    its three children.  ``weak[j]`` requires all three source child ratios
    >= alpha and max_a |source_a - image_a| >= delta; ``strict[j]``
    additionally requires j to be a good scale of the path (j odd, path
    letters j and j+1 both equal to 3).  strict implies weak by construction.
    """

    weak: np.ndarray
    strict: np.ndarray
    alpha: float
    delta: float

    @property
    def n_weak(self) -> int:
        return int(self.weak.sum())

    @property
    def n_strict(self) -> int:
        return int(self.strict.sum())


def detect_mismatches(
    corr: Correspondence, path_or_trace, alpha: float, delta: float
) -> MismatchFlags:
    """Flag weak and strict delta-mismatches along a path through ``corr``.

    The path may be a TernaryWord or a ZoomTrace (only its letters are
    used); its depth must not exceed the correspondence depth.
    """
    if not 0.0 < alpha < 1.0 / 3.0:
        raise DomainError("alpha must lie in (0, 1/3)")
    if not 0.0 < delta < 1.0:
        raise DomainError("delta must lie in (0, 1)")
    path = _path_of(path_or_trace)
    k = len(path)
    if k > corr.depth:
        raise DomainError("path deeper than the correspondence")
    p = corr.source.path_ratios(path)
    q = corr.image.path_ratios(path)
    weak = (p.min(axis=1) >= alpha) & (np.abs(p - q).max(axis=1) >= delta)
    letters = np.asarray(path, dtype=np.int64)
    good = np.zeros(k, dtype=bool)
    # scale j is good when j is odd and path letters j, j+1 are both 3
    if k >= 2:
        j = np.arange(1, k - 1 + 1)
        jj = j[(j % 2 == 1) & (j <= k - 1)]
        good[jj] = (letters[jj - 1] == 3) & (letters[jj] == 3)
    strict = weak & good
    return MismatchFlags(weak=weak, strict=strict, alpha=alpha, delta=delta)


@dataclass(frozen=True)
class AuditReport:
    """Martingale path and mismatch audit of one correspondence and path."""

    path: tuple
    alpha: float
    delta: float
    mu: float
    martingale: np.ndarray  # M_0..M_k
    log_martingale: np.ndarray
    z: np.ndarray  # Z_1..Z_k
    z_tilde: np.ndarray
    weak: np.ndarray
    strict: np.ndarray
    sqrt_product_sums: np.ndarray  # depths 0..correspondence depth

    def as_dict(self) -> dict:
        return {
            "path": "".join(str(a) for a in self.path),
            "alpha": self.alpha,
            "delta": self.delta,
            "mu": self.mu,
            "martingale": [float(x) for x in self.martingale],
            "z": [float(x) for x in self.z],
            "z_tilde": [float(x) for x in self.z_tilde],
            "weak_mismatch_scales": [int(j) for j in np.flatnonzero(self.weak)],
            "strict_mismatch_scales": [int(j) for j in np.flatnonzero(self.strict)],
            "sqrt_product_sums": [float(x) for x in self.sqrt_product_sums],
        }


def martingale_path(
    corr: Correspondence,
    path_or_trace,
    alpha: float = 1e-6,
    delta: float = 0.1,
    mu: float = 0.0,
) -> AuditReport:
    """Audit the mass-ratio martingale M_j = image/source along a path.

    M_0 is the image root mass over the source root mass; increments are
    computed in log space.  Z~_j adds mu at every scale whose *previous*
    split (scale j-1) is a weak mismatch, matching the penalised-increment
    convention of the supermartingale check.
    """
    path = _path_of(path_or_trace)
    k = len(path)
    if k > corr.depth:
        raise DomainError("path deeper than the correspondence")
    src = corr.source.path_masses(path)
    img = corr.image.path_masses(path)
    if np.any(src <= 0.0) or np.any(img <= 0.0):
        raise DomainError("zero mass along the path")
    log_m = np.log(img) - np.log(src)
    z = np.diff(log_m)
    flags = detect_mismatches(corr, path, alpha=alpha, delta=delta)
    z_tilde = z + mu * flags.weak.astype(float)
    sums = np.array([sqrt_product_sum(corr, j) for j in range(corr.depth + 1)])
    return AuditReport(
        path=path,
        alpha=alpha,
        delta=delta,
        mu=mu,
        martingale=np.exp(log_m),
        log_martingale=log_m,
        z=z,
        z_tilde=z_tilde,
        weak=flags.weak,
        strict=flags.strict,
        sqrt_product_sums=sums,
    )


# -- the mismatch kernel ------------------------------------------------------


def mismatch_kernel(p, q, mu: float = 0.0) -> float:
    """e^(mu/2) * sum_i sqrt(p_i q_i) = E[exp((Z + mu)/2)] for
    Z = log q_I - log p_I with P[I = i] = p_i.

    Requires p strictly positive (log p_I must exist) and both arguments on
    the simplex within 1e-12.  Whenever max|p_i - q_i| >= delta the value is
    at most e^(mu/2) (1 - delta^2 / 8).
    """
    if mu < 0.0:
        raise DomainError("mu must be non-negative")
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise DomainError("p and q must be 1-d of equal length")
    if np.any(p <= 0.0):
        raise DomainError("p must be strictly positive")
    if np.any(q < 0.0):
        raise DomainError("q must be non-negative")
    if abs(p.sum() - 1.0) > 1e-12 or abs(q.sum() - 1.0) > 1e-12:
        raise DomainError("p and q must sum to 1 within 1e-12")
    return float(np.exp(mu / 2.0) * np.sqrt(p * q).sum())


def sqrt_product_sum(corr: Correspondence, k: int) -> float:
    """Sum over depth-k words of sqrt(source mass * image mass).

    Equals 1 at every depth for the identity correspondence (Cauchy-Schwarz
    equality) and is non-increasing in k for any fixed correspondence.
    """
    if not 0 <= k <= corr.depth:
        raise DomainError("depth out of range for this correspondence")
    return float(np.sqrt(corr.source.levels[k] * corr.image.levels[k]).sum())


# -- supermartingale check ----------------------------------------------------


def mu_admissible_bound(delta: float) -> float:
    """Largest admissible penalty: mu <= -2 log(1 - delta^2 / 8)."""
    return -2.0 * math.log1p(-(delta**2) / 8.0)


@dataclass(frozen=True)
class ChernoffResult:
    """Monte Carlo estimate of E[exp(0.5 * sum Z~_j)] over size-biased paths."""

    mean: float
    stderr: float
    n_paths: int
    depth: int
    mu: float
    delta: float
    alpha: float
    mu_admissible: bool
    mode: str

    @property
    def within_bound(self) -> bool:
        """True when the estimate is <= 1 + 3 standard errors."""
        return self.mean <= 1.0 + 3.0 * self.stderr

    def as_dict(self) -> dict:
        return {
            "mean": self.mean,
            "stderr": self.stderr,
            "n_paths": self.n_paths,
            "depth": self.depth,
            "mu": self.mu,
            "delta": self.delta,
            "alpha": self.alpha,
            "mu_admissible": self.mu_admissible,
            "mode": self.mode,
            "within_bound": self.within_bound,
        }


def _chernoff_stat(
    p: np.ndarray, q: np.ndarray, letters: np.ndarray, mu, delta, alpha
) -> np.ndarray:
    """exp(0.5 sum_j Z~_j) per path from (n_paths, k, 3) split arrays."""
    n_paths, k, _ = p.shape
    rows = np.arange(n_paths)[:, None], np.arange(k)[None, :], letters - 1
    z = np.log(q[rows]) - np.log(p[rows])
    weak = (p.min(axis=2) >= alpha) & (np.abs(p - q).max(axis=2) >= delta)
    return np.exp(0.5 * (z.sum(axis=1) + mu * weak.sum(axis=1)))


def chernoff_supermartingale_check(
    corr: Correspondence, paths, mu: float, delta: float, alpha: float
) -> ChernoffResult:
    """Estimate E[exp(0.5 sum Z~_j)] over caller-supplied size-biased paths.

    Paths must be sampled with letter probabilities equal to the source's
    relative child masses (``MassCascade.descend_size_biased``); the
    estimate is then at most 1 (up to Monte Carlo error) whenever mu is
    within the admissible regime mu <= -2 log(1 - delta^2/8).  An
    out-of-regime mu is flagged, not rejected.
    """
    paths = [_path_of(p) for p in paths]
    if not paths:
        raise DomainError("at least one path is required")
    k = len(paths[0])
    if any(len(p) != k for p in paths):
        raise DomainError("all paths must have equal depth")
    n = len(paths)
    p = np.empty((n, k, 3))
    q = np.empty((n, k, 3))
    letters = np.empty((n, k), dtype=np.int64)
    for i, path in enumerate(paths):
        p[i] = corr.source.path_ratios(path)
        q[i] = corr.image.path_ratios(path)
        letters[i] = path
    stats = _chernoff_stat(p, q, letters, mu, delta, alpha)
    return ChernoffResult(
        mean=float(stats.mean()),
        stderr=float(stats.std(ddof=1) / math.sqrt(n)),
        n_paths=n,
        depth=k,
        mu=mu,
        delta=delta,
        alpha=alpha,
        mu_admissible=mu <= mu_admissible_bound(delta),
        mode="cascade",
    )


def perturbed_image_splits(p: np.ndarray, delta: float, alpha: float) -> np.ndarray:
    """Adversarial image splits: rows with min >= alpha and enough headroom
    get delta moved from their second-largest onto their largest coordinate,
    forcing a weak mismatch with the kernel as close to its upper bound as
    the source row allows.  Other rows are copied unchanged (no mismatch)."""
    q = p.copy()
    order = np.argsort(p, axis=-1)
    top = order[..., 2]
    second = order[..., 1]
    eligible = (p.min(axis=-1) >= alpha) & (
        np.take_along_axis(p, second[..., None], axis=-1)[..., 0] >= delta + alpha
    )
    idx = np.nonzero(eligible)
    q[idx + (top[idx],)] += delta
    q[idx + (second[idx],)] -= delta
    return q


def chernoff_path_ensemble(
    k: int,
    n_paths: int,
    mu: float,
    delta: float,
    alpha: float,
    rng: np.random.Generator,
    image: str = "independent",
) -> ChernoffResult:
    """Supermartingale check from per-scale split ensembles at any depth.

    Along a size-biased path the per-scale (source split, chosen letter)
    records are i.i.d., and an independent image cascade contributes i.i.d.
    Dirichlet splits of its own, so the statistic can be sampled without
    materialising any cascade: this is what allows k far beyond the cascade
    depth cap.  ``image`` selects the image law: "independent" (a second
    cascade) or "perturbed" (the adversarial mismatch-at-every-scale design
    used as a sensitivity control).
    """
    if k < 1 or n_paths < 2:
        raise DomainError("need k >= 1 and at least two paths")
    p = sample_dirichlet_array((0.5, 0.5, 0.5), n_paths * k, rng).reshape(n_paths, k, 3)
    letters = size_biased_letters(p, rng)
    if image == "independent":
        q = sample_dirichlet_array((0.5, 0.5, 0.5), n_paths * k, rng).reshape(
            n_paths, k, 3
        )
    elif image == "perturbed":
        q = perturbed_image_splits(p, delta, alpha)
    else:
        raise DomainError(f"unknown image mode {image!r}")
    stats = _chernoff_stat(p, q, letters, mu, delta, alpha)
    return ChernoffResult(
        mean=float(stats.mean()),
        stderr=float(stats.std(ddof=1) / math.sqrt(n_paths)),
        n_paths=n_paths,
        depth=k,
        mu=mu,
        delta=delta,
        alpha=alpha,
        mu_admissible=mu <= mu_admissible_bound(delta),
        mode=f"ensemble/{image}",
    )


# -- tail bounds --------------------------------------------------------------


def exchangeable_tail_bound(m: int, s: int) -> float:
    """binom(m, s) * 2^(s-2) * s / s!, the exchangeable MAST tail bound.

    Exact rational evaluation, returned as a float.  Values above 1 are
    vacuous but returned as computed.
    """
    if not 1 <= s <= m:
        raise DomainError("need 1 <= s <= m")
    val = Fraction(math.comb(m, s) * s, math.factorial(s))
    if s >= 2:
        val *= Fraction(2 ** (s - 2), 1)
    else:
        val *= Fraction(1, 2)
    return float(val)


@dataclass(frozen=True)
class IntersectionTailResult:
    frequency: float
    threshold: float
    bound: float
    stderr: float
    replicates: int

    @property
    def within_bound(self) -> bool:
        return self.frequency <= self.bound + 3.0 * self.stderr


def intersection_tail_experiment(
    n: int,
    m: int,
    m2: int,
    epsilon: float,
    replicates: int,
    rng: np.random.Generator,
    threshold_factor: float = 8.0,
) -> IntersectionTailResult:
    """Exceedance frequency of #(S ∩ S') over the intersection tail bound.

    S, S' are independent uniform subsets of {1..n} of sizes m, m'; the
    event is #(S ∩ S') >= threshold_factor * (n^eps ∨ m m' / n) and the
    bound is 2 exp(-2 n^eps / 3).  ``threshold_factor`` below the default 8
    yields a designed sensitivity failure (the threshold drops under the
    mean intersection).
    """
    if not (0 <= m <= n and 0 <= m2 <= n):
        raise DomainError("subset sizes must be within [0, n]")
    threshold = threshold_factor * max(n**epsilon, m * m2 / n)
    if m == 0 or m2 == 0:
        freq = 0.0 if threshold > 0 else 1.0
        return IntersectionTailResult(
            frequency=freq,
            threshold=threshold,
            bound=2.0 * math.exp(-2.0 * n**epsilon / 3.0),
            stderr=0.0,
            replicates=replicates,
        )
    hits = 0
    mask = np.zeros(n + 1, dtype=bool)
    for _ in range(replicates):
        s1 = rng.permutation(n)[:m]
        s2 = rng.permutation(n)[:m2]
        mask[:] = False
        mask[s1] = True
        inter = int(mask[s2].sum())
        if inter >= threshold:
            hits += 1
    freq = hits / replicates
    stderr = math.sqrt(max(freq * (1.0 - freq), 1.0 / replicates)) / math.sqrt(
        replicates
    )
    return IntersectionTailResult(
        frequency=freq,
        threshold=threshold,
        bound=2.0 * math.exp(-2.0 * n**epsilon / 3.0),
        stderr=stderr,
        replicates=replicates,
    )


@dataclass(frozen=True)
class RefinedBoundResult:
    violating_tree_fraction: float
    replicates: int
    region_pairs: int
    constant: float

    def as_dict(self) -> dict:
        return {
            "violating_tree_fraction": self.violating_tree_fraction,
            "replicates": self.replicates,
            "region_pairs": self.region_pairs,
            "constant": self.constant,
        }


_REFINED_CONSTANT = 4.0 * math.e * math.sqrt(2.0)


def _random_region(t: Cladogram, rng: np.random.Generator) -> Region:
    """A region with 0, 1 or 2 random internal boundary nodes and a random
    component."""
    internal = sorted(t.internal_nodes())
    n_boundary = int(rng.integers(0, 3))
    n_boundary = min(n_boundary, len(internal))
    if n_boundary == 0:
        return region(t, ())
    picks = rng.choice(len(internal), size=n_boundary, replace=False)
    boundary = {internal[int(i)] for i in picks}
    selector = int(rng.integers(0, len(t.edges)))
    return region(t, boundary, selector)


def refined_sqrt_bound_experiment(
    n: int,
    epsilon: float,
    replicates: int,
    rng: np.random.Generator,
    region_pairs: int = 50,
    constant_scale: float = 1.0,
) -> RefinedBoundResult:
    """Fraction of tree pairs with any region pair violating
    MAST(R, R') <= c * (n^eps ∨ sqrt(#R #R' / n)), c = 4 e sqrt(2).

    Each replicate samples an independent pair of uniform trees and a menu
    of random region pairs (the whole-tree pair is always included).
    ``constant_scale`` shrinks c for designed sensitivity failures.
    """
    if n > 512:
        raise DomainError("refined bound experiment capped at n = 512")
    c = constant_scale * _REFINED_CONSTANT
    violating = 0
    for _ in range(replicates):
        t1 = sample_uniform(n, rng)
        t2 = sample_uniform(n, rng)
        bad = False
        pairs = [(region(t1, ()), region(t2, ()))] + [
            (_random_region(t1, rng), _random_region(t2, rng))
            for _ in range(region_pairs - 1)
        ]
        for r1, r2 in pairs:
            bound = c * max(n**epsilon, math.sqrt(r1.size * r2.size / n))
            if r1.size and r2.size and mast_regions(r1, r2).size > bound:
                bad = True
                break
        if bad:
            violating += 1
    return RefinedBoundResult(
        violating_tree_fraction=violating / replicates,
        replicates=replicates,
        region_pairs=region_pairs,
        constant=c,
    )


# -- the explicit-constants ledger --------------------------------------------

_LOG10_E = math.log10(math.e)
_LOG10_2 = math.log10(2.0)
_LOG10_6 = math.log10(6.0)
_SLACK = 1e-12  # numerical slack on non-strict comparisons


@dataclass(frozen=True)
class ConstantCheck:
    """One verified inequality, compared in log10 space."""

    requirement: str
    lhs_log10: float
    rhs_log10: float
    strict: bool = False

    @property
    def ok(self) -> bool:
        if self.strict:
            return self.lhs_log10 < self.rhs_log10
        return self.lhs_log10 <= self.rhs_log10 + _SLACK

    @property
    def margin_log10(self) -> float:
        return self.rhs_log10 - self.lhs_log10


@dataclass(frozen=True)
class LedgerEntry:
    name: str
    log10: float
    display: str
    checks: tuple

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def value(self) -> float:
        """10**log10 — underflows to 0.0 below ~1e-308; use log10 instead."""
        return 10.0**self.log10


class ConstantsLedger:
    """The verified chain of explicit constants.

    Every entry carries the inequalities its value must satisfy; the ledger
    refuses to exist if any of them fails.  Values below float underflow are
    handled exclusively through their log10.
    """

    def __init__(self, entries):
        self.entries = tuple(entries)
        self._by_name = {e.name: e for e in self.entries}
        bad = [e.name for e in self.entries if not e.ok]
        if bad:
            raise InvariantError(f"constants ledger failed verification: {bad}")

    def __getitem__(self, name: str) -> LedgerEntry:
        return self._by_name[name]

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def log10(self, name: str) -> float:
        return self._by_name[name].log10

    def verify(self) -> None:
        bad = [e.name for e in self.entries if not e.ok]
        if bad:
            raise InvariantError(f"constants ledger failed verification: {bad}")

    def as_dict(self) -> dict:
        return {
            e.name: {
                "log10": e.log10,
                "display": e.display,
                "checks": [
                    {
                        "requirement": c.requirement,
                        "lhs_log10": c.lhs_log10,
                        "rhs_log10": c.rhs_log10,
                        "strict": c.strict,
                        "ok": c.ok,
                    }
                    for c in e.checks
                ],
                "ok": e.ok,
            }
            for e in self.entries
        }


def compute_constants() -> ConstantsLedger:
    """Build and verify the full explicit-constants chain.

    The chain: C = 7.5 (branching-walk lower envelope via E[W^-lambda] =
    1/(1-2 lambda)), c = 0.1 (upper envelope), alpha = 1e-6 and
    p = 0.997/9 (good-scale rate), beta = 1/20, gamma = (p - 2 beta)^2,
    K = (6/alpha) e^(C+2) 2^((2C+4)/beta) (candidate-sequence count),
    delta = 1e-166 against the admissibility threshold
    6^(-2/beta) alpha^(3/2) / (2K) ~ 1.89e-166, mu = delta^2/10,
    eta = mu beta / 8, xi = 1e-336 <= min(gamma, eta), rho = 4e-337 < xi/2,
    theta = 1/15, and the final exponents 1e-338 < rho theta / 2 and
    1e-338 < eta / (2C).

    All comparisons below float underflow happen in log10 space.  The
    xi <= eta comparison is non-strict at the stated decimals (it holds
    strictly: eta = 6.25e-336).
    """
    entries = []

    C = 7.5
    lam = 0.5 - 1.0 / C
    lhs_C = math.log10((C / 2.0) * math.exp(1.0 - C / 2.0))
    chernoff_route = math.log10(math.exp(-lam * C) / (1.0 - 2.0 * lam))
    entries.append(
        LedgerEntry(
            name="C",
            log10=math.log10(C),
            display="7.5",
            checks=(
                ConstantCheck("(C/2) e^(1-C/2) <= 1/4", lhs_C, math.log10(0.25)),
                ConstantCheck(
                    "e^(-lambda C) E[W^-lambda] <= 1/4 at lambda = 1/2 - 1/C",
                    chernoff_route,
                    math.log10(0.25),
                ),
            ),
        )
    )

    c_small = 0.1
    lam_c = 2.5
    moment = 1.0 / (2.0 * lam_c + 1.0)  # E[W^lambda] for Beta(1/2, 1)
    entries.append(
        LedgerEntry(
            name="c",
            log10=math.log10(c_small),
            display="0.1",
            checks=(
                ConstantCheck(
                    "E[W^lambda] < 1/5 at lambda = 2.5",
                    math.log10(moment),
                    math.log10(0.2),
                    strict=True,
                ),
                ConstantCheck(
                    "e^(lambda c) E[W^lambda] <= 1/4",
                    math.log10(math.exp(lam_c * c_small) * moment),
                    math.log10(0.25),
                ),
            ),
        )
    )

    alpha = 1e-6
    floor = 1.0 - 3.0 * math.sqrt(alpha)
    entries.append(
        LedgerEntry(
            name="alpha",
            log10=-6.0,
            display="1e-06",
            checks=(
                ConstantCheck(
                    "0.997 <= 1 - 3 sqrt(alpha)",
                    math.log10(0.997),
                    math.log10(floor),
                ),
            ),
        )
    )

    p = 0.997 / 9.0
    entries.append(
        LedgerEntry(
            name="p",
            log10=math.log10(p),
            display="0.997/9",
            checks=(
                ConstantCheck(
                    "p <= (1 - 3 sqrt(alpha)) / 9",
                    math.log10(p),
                    math.log10(floor / 9.0),
                ),
            ),
        )
    )

    beta = 1.0 / 20.0
    entries.append(
        LedgerEntry(
            name="beta",
            log10=math.log10(beta),
            display="1/20",
            checks=(
                ConstantCheck(
                    "beta < p/2", math.log10(beta), math.log10(p / 2.0), strict=True
                ),
            ),
        )
    )

    gamma = (p - 2.0 * beta) ** 2
    entries.append(
        LedgerEntry(
            name="gamma",
            log10=math.log10(gamma),
            display=f"{gamma:.3e}",
            checks=(
                ConstantCheck("gamma > 1e-5 (order 1e-4)", -5.0, math.log10(gamma)),
                ConstantCheck("gamma < 1e-3 (order 1e-4)", math.log10(gamma), -3.0),
            ),
        )
    )

    log10_K = _LOG10_6 + 6.0 + (C + 2.0) * _LOG10_E + ((2.0 * C + 4.0) / beta) * _LOG10_2
    log10_K_ln_route = (
        math.log(6.0) + math.log(1e6) + (C + 2.0) + ((2.0 * C + 4.0) / beta) * math.log(2.0)
    ) / math.log(10.0)
    entries.append(
        LedgerEntry(
            name="K",
            log10=log10_K,
            display=f"1e{log10_K:.3f}",
            checks=(
                ConstantCheck(
                    "log10 K route difference <= 1e-9",
                    math.log10(max(abs(log10_K - log10_K_ln_route), 1e-300)),
                    -9.0,
                ),
            ),
        )
    )

    # delta admissibility threshold: 6^(-2/beta) alpha^(3/2) / (2 K)
    log10_delta_threshold = (
        -(2.0 / beta) * _LOG10_6 + 1.5 * math.log10(alpha) - _LOG10_2 - log10_K
    )
    log10_delta = -166.0
    entries.append(
        LedgerEntry(
            name="delta",
            log10=log10_delta,
            display="1e-166",
            checks=(
                ConstantCheck(
                    "delta <= 6^(-2/beta) alpha^(3/2) / (2K)",
                    log10_delta,
                    log10_delta_threshold,
                ),
                ConstantCheck(
                    "threshold log10 within 0.01 of -165.722",
                    math.log10(max(abs(log10_delta_threshold + 165.7224), 1e-300)),
                    -2.0,
                ),
            ),
        )
    )

    # mu = delta^2 / 10 <= -2 log(1 - delta^2/8); the right side is at least
    # delta^2/4 because -2 log(1-x) >= 2x, so the log-space chain suffices.
    log10_mu = 2.0 * log10_delta - 1.0
    entries.append(
        LedgerEntry(
            name="mu",
            log10=log10_mu,
            display="1e-333",
            checks=(
                ConstantCheck(
                    "mu <= delta^2/4 <= -2 log(1 - delta^2/8)",
                    log10_mu,
                    2.0 * log10_delta - math.log10(4.0),
                ),
            ),
        )
    )

    log10_eta = log10_mu + math.log10(beta / 8.0)
    entries.append(
        LedgerEntry(
            name="eta",
            log10=log10_eta,
            display="mu/160",
            checks=(
                ConstantCheck("eta > 1e-336", -336.0, log10_eta, strict=True),
            ),
        )
    )

    log10_xi = -336.0
    entries.append(
        LedgerEntry(
            name="xi",
            log10=log10_xi,
            display="1e-336",
            checks=(
                ConstantCheck("xi <= gamma", log10_xi, math.log10(gamma)),
                # non-strict at the stated decimals; strictness holds since
                # eta = 6.25e-336, and is recorded by the eta entry above
                ConstantCheck("xi <= eta", log10_xi, log10_eta),
            ),
        )
    )

    log10_rho = math.log10(4.0) - 337.0
    entries.append(
        LedgerEntry(
            name="rho",
            log10=log10_rho,
            display="4e-337",
            checks=(
                ConstantCheck(
                    "rho < xi/2", log10_rho, log10_xi - _LOG10_2, strict=True
                ),
            ),
        )
    )

    theta = 1.0 / 15.0
    entries.append(
        LedgerEntry(
            name="theta",
            log10=math.log10(theta),
            display="1/15",
            checks=(
                ConstantCheck("theta <= 1/(2C)", math.log10(theta), math.log10(1.0 / (2.0 * C))),
                ConstantCheck(
                    "theta <= 1/(4 log 3)",
                    math.log10(theta),
                    math.log10(1.0 / (4.0 * math.log(3.0))),
                ),
            ),
        )
    )

    log10_eps = -338.0
    entries.append(
        LedgerEntry(
            name="eps_mast",
            log10=log10_eps,
            display="1e-338",
            checks=(
                ConstantCheck(
                    "eps_mast < rho theta / 2",
                    log10_eps,
                    log10_rho + math.log10(theta / 2.0),
                    strict=True,
                ),
            ),
        )
    )
    entries.append(
        LedgerEntry(
            name="eps_holder",
            log10=log10_eps,
            display="1e-338",
            checks=(
                ConstantCheck(
                    "eps_holder < eta / (2C)",
                    log10_eps,
                    log10_eta - math.log10(2.0 * C),
                    strict=True,
                ),
            ),
        )
    )

    return ConstantsLedger(entries)
