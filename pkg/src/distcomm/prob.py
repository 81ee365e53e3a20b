"""Finite-alphabet probability foundation.

Pmfs, empirical types, KL divergences, typicality windows, distortion
accounting, iid sampling and exact type-class computations.  Everything is
in bits (log base 2).  All values are immutable after construction and all
operations are pure, so they are safe to share across threads.

Conventions:
  * 0 * log(0/x) = 0.
  * q(i) > 0 where p(i) = 0 gives a +inf divergence sentinel, not an error.
  * Pmfs must sum to 1 within 1e-12; anything farther off is rejected rather
    than silently renormalized.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

#: Tolerance on the total mass of a pmf at construction time.
NORMALIZATION_TOL = 1e-12


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Pmf:
    """Probability mass function over a finite alphabet {0, ..., k-1}.

    Also used to represent empirical types (histograms of sequences).
    """

    mass: np.ndarray

    def __post_init__(self):
        mass = _frozen_array(self.mass)
        if mass.ndim != 1 or mass.size == 0:
            raise ValueError("pmf must be a nonempty 1-D vector")
        if np.any(mass < 0) or not np.all(np.isfinite(mass)):
            raise ValueError("pmf entries must be finite and >= 0")
        if abs(float(mass.sum()) - 1.0) > NORMALIZATION_TOL:
            raise ValueError(
                f"pmf must sum to 1 within {NORMALIZATION_TOL}, got {mass.sum()!r}"
            )
        object.__setattr__(self, "mass", mass)

    @property
    def alphabet_size(self) -> int:
        return self.mass.size


@dataclass(frozen=True)
class JointPmf:
    """Joint pmf over a product alphabet, indexed (x, y)."""

    mass: np.ndarray

    def __post_init__(self):
        mass = _frozen_array(self.mass)
        if mass.ndim != 2 or mass.size == 0:
            raise ValueError("joint pmf must be a nonempty 2-D matrix")
        if np.any(mass < 0) or not np.all(np.isfinite(mass)):
            raise ValueError("joint pmf entries must be finite and >= 0")
        if abs(float(mass.sum()) - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"joint pmf must sum to 1, got {mass.sum()!r}")
        object.__setattr__(self, "mass", mass)

    def x_marginal(self) -> Pmf:
        m = self.mass.sum(axis=1)
        return Pmf(m / m.sum())

    def y_marginal(self) -> Pmf:
        m = self.mass.sum(axis=0)
        return Pmf(m / m.sum())


@dataclass(frozen=True)
class CondPmf:
    """One pmf per conditioning symbol; ``rows[s]`` is the pmf given s."""

    rows: np.ndarray

    def __post_init__(self):
        rows = _frozen_array(self.rows)
        if rows.ndim != 2 or rows.size == 0:
            raise ValueError("conditional pmf must be a nonempty 2-D matrix")
        if np.any(rows < 0) or not np.all(np.isfinite(rows)):
            raise ValueError("conditional pmf entries must be finite and >= 0")
        sums = rows.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > NORMALIZATION_TOL):
            raise ValueError("every row of a conditional pmf must sum to 1")
        object.__setattr__(self, "rows", rows)

    @property
    def n_conditions(self) -> int:
        return self.rows.shape[0]

    @property
    def alphabet_size(self) -> int:
        return self.rows.shape[1]

    def row(self, s: int) -> Pmf:
        return Pmf(self.rows[s])

    def joint_with(self, p_cond: Pmf) -> JointPmf:
        """Joint pmf when the conditioning symbol is distributed p_cond."""
        if p_cond.alphabet_size != self.n_conditions:
            raise ValueError("conditioning pmf size mismatch")
        m = p_cond.mass[:, None] * self.rows
        return JointPmf(m / m.sum())


@dataclass(frozen=True)
class DistortionMatrix:
    """Per-symbol-pair distortion d(i, j) >= 0, i input symbol, j output."""

    d: np.ndarray

    def __post_init__(self):
        d = _frozen_array(self.d)
        if d.ndim != 2 or d.size == 0:
            raise ValueError("distortion matrix must be a nonempty 2-D matrix")
        if np.any(d < 0) or not np.all(np.isfinite(d)):
            raise ValueError("distortion entries must be finite and >= 0")
        object.__setattr__(self, "d", d)

    @property
    def input_size(self) -> int:
        return self.d.shape[0]

    @property
    def output_size(self) -> int:
        return self.d.shape[1]


def hamming_distortion(size: int) -> DistortionMatrix:
    """0/1 distortion on a common alphabet of the given size."""
    return DistortionMatrix(1.0 - np.eye(size))


@dataclass(frozen=True)
class Measure:
    """Non-negative measure on a finite alphabet; need not sum to 1."""

    mass: np.ndarray

    def __post_init__(self):
        mass = _frozen_array(self.mass)
        if mass.ndim != 1 or mass.size == 0:
            raise ValueError("measure must be a nonempty 1-D vector")
        if np.any(mass < 0) or not np.all(np.isfinite(mass)):
            raise ValueError("measure entries must be finite and >= 0")
        object.__setattr__(self, "mass", mass)

    @property
    def alphabet_size(self) -> int:
        return self.mass.size


def check_symbols(seq, alphabet_size: int) -> np.ndarray:
    """Validate a symbol sequence: nonempty integer indices in range."""
    arr = np.asarray(seq)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("symbol sequence must be nonempty and 1-D")
    arr = arr.astype(np.int64, casting="safe") if arr.dtype.kind in "iu" else None
    if arr is None:
        raise ValueError("symbol sequence must contain integers")
    if arr.min() < 0 or arr.max() >= alphabet_size:
        raise ValueError("symbol out of range for alphabet")
    return arr


def empirical_type(seq, alphabet_size: int) -> Pmf:
    """Histogram of a sequence as a pmf; entries are multiples of 1/n."""
    arr = check_symbols(seq, alphabet_size)
    counts = np.bincount(arr, minlength=alphabet_size).astype(float)
    return Pmf(counts / arr.size)


def joint_empirical_type(a, b, size_a: int, size_b: int) -> JointPmf:
    """Joint histogram of two equal-length sequences as a joint pmf."""
    aa = check_symbols(a, size_a)
    bb = check_symbols(b, size_b)
    if aa.size != bb.size:
        raise ValueError("sequences must have equal length")
    counts = np.bincount(aa * size_b + bb, minlength=size_a * size_b)
    return JointPmf(counts.reshape(size_a, size_b).astype(float) / aa.size)


def kl_divergence(q: Pmf, p: Pmf) -> float:
    """D(q || p) in bits; +inf where q puts mass outside p's support."""
    if q.alphabet_size != p.alphabet_size:
        raise ValueError("alphabet size mismatch")
    qm, pm = q.mass, p.mass
    support = qm > 0
    if np.any(pm[support] == 0):
        return math.inf
    qs, ps = qm[support], pm[support]
    return float(np.sum(qs * np.log2(qs / ps)))


def kl_vs_product(q_xy: JointPmf, p_x: Pmf) -> float:
    """D(q_XY || p_X x q_Y) in bits; q_Y is the Y-marginal of q_xy.

    Decomposes exactly as D(q_X || p_X) + I(X;Y) under q_xy, so it always
    dominates the mutual information.
    """
    if q_xy.mass.shape[0] != p_x.alphabet_size:
        raise ValueError("alphabet size mismatch")
    q = q_xy.mass
    q_y = q.sum(axis=0)
    ref = p_x.mass[:, None] * q_y[None, :]
    support = q > 0
    if np.any(ref[support] == 0):
        return math.inf
    return float(np.sum(q[support] * np.log2(q[support] / ref[support])))


def mutual_information(q_xy: JointPmf) -> float:
    """I(X;Y) in bits: divergence of q_xy from the product of its marginals."""
    return kl_vs_product(q_xy, q_xy.x_marginal())


def conditional_mutual_information(p_v: Pmf, joints_per_v) -> float:
    """I(X;Y|V) = sum_s p_V(s) I(X;Y | V=s), joints_per_v a list of JointPmf."""
    if p_v.alphabet_size != len(joints_per_v):
        raise ValueError("need one joint per conditioning symbol")
    total = 0.0
    for w, joint in zip(p_v.mass, joints_per_v):
        if w > 0:
            total += w * mutual_information(joint)
    return total


def is_typical(q: Pmf, p: Pmf, eps: float) -> bool:
    """True iff every coordinate of q is within eps of p (closed interval)."""
    if q.alphabet_size != p.alphabet_size:
        raise ValueError("alphabet size mismatch")
    if eps < 0:
        raise ValueError("eps must be >= 0")
    return bool(np.all(np.abs(q.mass - p.mass) <= eps))


def expected_distortion(q_xy: JointPmf, d: DistortionMatrix) -> float:
    """E_q d(X, Y) for a joint pmf."""
    if q_xy.mass.shape != d.d.shape:
        raise ValueError("joint/distortion shape mismatch")
    return float(np.sum(q_xy.mass * d.d))


def average_distortion(x, y, d: DistortionMatrix) -> float:
    """Arithmetic mean of d(x_t, y_t) over positions."""
    xa = check_symbols(x, d.input_size)
    ya = check_symbols(y, d.output_size)
    if xa.size != ya.size:
        raise ValueError("sequences must have equal length")
    return float(d.d[xa, ya].mean())


def sample_iid(p: Pmf, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n iid symbols from p, deterministically given the rng state."""
    if n < 1:
        raise ValueError("n must be >= 1")
    cdf = np.cumsum(p.mass)
    idx = np.searchsorted(cdf, rng.random(n), side="right")
    return np.minimum(idx, p.alphabet_size - 1).astype(np.int64)


def _counts_from_type(q: Pmf, n: int) -> np.ndarray:
    counts = q.mass * n
    rounded = np.rint(counts)
    if np.any(np.abs(counts - rounded) > 1e-6):
        raise ValueError("q is not an n-type (entries must be multiples of 1/n)")
    return rounded.astype(np.int64)


def type_class_probability(p: Pmf, q: Pmf, n: int) -> float:
    """Exact multinomial probability that an iid-p sequence has type q.

    Computed in the log domain so it stays finite for n up to ~1e4.
    """
    if p.alphabet_size != q.alphabet_size:
        raise ValueError("alphabet size mismatch")
    counts = _counts_from_type(q, n)
    log_prob = math.lgamma(n + 1)
    for k, pi in zip(counts, p.mass):
        if k == 0:
            continue
        if pi == 0:
            return 0.0
        log_prob += k * math.log(pi) - math.lgamma(k + 1)
    return math.exp(log_prob)


def type_class_bound(q: Pmf, mu: Measure, n: int) -> float:
    """Upper bound 2^(-n D(q || mu)) on the probability of type class q.

    Valid whenever mu dominates the generating distribution entrywise; the
    caller is responsible for that.  Returns 0 when the exponent is +inf.
    """
    if q.alphabet_size != mu.alphabet_size:
        raise ValueError("alphabet size mismatch")
    _counts_from_type(q, n)
    support = q.mass > 0
    if np.any(mu.mass[support] == 0):
        return 0.0
    div = float(np.sum(q.mass[support] * np.log2(q.mass[support] / mu.mass[support])))
    return float(2.0 ** (-n * div))


def binary_types(n: int):
    """All types of binary sequences of length n, as Pmf values."""
    return [Pmf(np.array([k / n, (n - k) / n])) for k in range(n + 1)]
