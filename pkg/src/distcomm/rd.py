"""Numerical rate-distortion machinery.

Solves the variational problems the rest of the package is built on:

  * ``blahut_arimoto``   -- R(D) for a finite source, via alternating
    minimization at a fixed Lagrange slope plus an outer bisection on the
    slope to hit the target distortion.
  * ``conditional_rd``   -- R(D) conditioned on a finite side alphabet; one
    shared slope allocates the distortion budget optimally across symbols.
  * ``exponent_infimum`` -- the random-coding exponent: the smallest
    divergence D(q_XY || p_X q_Y) over joints whose X-marginal sits in a
    per-coordinate window around p_X and whose expected distortion is within
    budget.  At a zero-width window this collapses to the R(D) value.
  * ``worst_case_channel`` -- the test channel achieving the R(D) infimum.

All rates are in bits per symbol.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize, minimize_scalar
from scipy.special import logsumexp

from .errors import ConvergenceError, InfeasibleDistortion
from .prob import CondPmf, DistortionMatrix, JointPmf, Pmf, kl_divergence

_LN2 = float(np.log(2.0))
_BETA_CAP = 1e5
_INNER_CAP = 100_000


@dataclass(frozen=True)
class RDResult:
    rate: float
    achieving_channel: CondPmf
    achieved_distortion: float
    lagrange_slope: float


@dataclass(frozen=True)
class ExponentResult:
    value: float
    minimizer: JointPmf


@dataclass(frozen=True)
class ConditionalRDResult:
    rate: float
    per_v_channels: list
    per_v_distortions: np.ndarray


def distortion_extremes(p_x: Pmf, d: DistortionMatrix) -> tuple:
    """Feasible distortion range (D_min, D_max) for a source.

    D_min assigns each input its best reproduction; D_max is the best single
    constant reproduction.
    """
    if p_x.alphabet_size != d.input_size:
        raise ValueError("source/distortion size mismatch")
    d_min = float(np.sum(p_x.mass * d.d.min(axis=1)))
    d_max = float(np.min(p_x.mass @ d.d))
    return d_min, d_max


def _ba_fixed_slope(p: np.ndarray, d: np.ndarray, beta: float,
                    tol: float = 1e-13, max_iter: int = _INNER_CAP,
                    logq0: np.ndarray = None):
    """Alternating minimization at fixed slope beta (nats per distortion unit).

    Returns (rate_bits, distortion, channel_matrix) for a source with strictly
    positive mass vector ``p``.  ``logq0`` warm-starts the output log-law.
    """
    ny = d.shape[1]
    logp = np.log(p)
    if logq0 is None:
        logq = np.full(ny, -np.log(ny))
    else:
        # collapsed outputs are absorbing under the update; leave room to regrow
        logq = np.maximum(logq0, np.log(1e-3 / ny))

    def sweep(lq):
        lw = lq[None, :] - beta * d
        lw -= logsumexp(lw, axis=1, keepdims=True)
        out = logsumexp(logp[:, None] + lw, axis=0)
        return np.maximum(out, -745.0), lw

    def merit(lq):
        # Lagrangian -sum_x p_x log sum_y q_y e^(-beta d); decreases under sweep
        return -float(p @ logsumexp(lq[None, :] - beta * d, axis=1))

    # Squared-extrapolation acceleration of the fixed-point map; an additive
    # shift of logq is immaterial because rows of log_w get renormalized.
    prev_dist = np.inf
    prev_step = np.inf
    log_w = None
    for _ in range(max(max_iter // 3, 1)):
        q1, log_w = sweep(logq)
        w = np.exp(log_w)
        dist = float(p @ np.sum(w * d, axis=1))
        step = abs(dist - prev_dist)
        # linear convergence: remaining error is about step * r / (1 - r)
        ratio = step / prev_step if np.isfinite(prev_step) else 1.0
        settled = ratio < 1.0 and step * ratio <= tol * (1.0 - ratio)
        if step < 1e-15 or (step < tol and settled):
            logq = q1
            break
        prev_dist = dist
        prev_step = step if step > 0 else prev_step
        q2, _ = sweep(q1)
        r = q1 - logq
        v = (q2 - q1) - r
        vn = float(np.linalg.norm(v))
        if vn < 1e-14:
            logq = q2
            continue
        alpha = max(min(-float(np.linalg.norm(r)) / vn, -1.0), -100.0)
        cand = logq - 2.0 * alpha * r + alpha * alpha * v
        cand, _ = sweep(np.maximum(cand, -745.0))
        logq = cand if merit(cand) <= merit(q2) else q2
    logq, log_w = sweep(logq)
    w = np.exp(log_w)
    with np.errstate(invalid="ignore"):
        terms = np.where(w > 0, w * (log_w - logq[None, :]), 0.0)
    rate = float(p @ terms.sum(axis=1)) / _LN2
    dist = float(p @ np.sum(w * d, axis=1))
    return max(rate, 0.0), dist, w, logq


def _channel_rate_dist(p: np.ndarray, d: np.ndarray, w: np.ndarray):
    """Exact mutual information (bits) and distortion of channel w under p."""
    q = p @ w
    q = q / q.sum()
    with np.errstate(divide="ignore", invalid="ignore"):
        lw = np.where(w > 0,
                      np.log(np.maximum(w, 1e-300))
                      - np.log(np.maximum(q, 1e-300))[None, :], 0.0)
    rate = float(p @ np.sum(w * lw, axis=1)) / _LN2
    dist = float(p @ np.sum(w * d, axis=1))
    return max(rate, 0.0), dist


def _constant_channel(d: np.ndarray) -> np.ndarray:
    col = int(np.argmin(d.sum(axis=0)))
    w = np.zeros_like(d)
    w[:, col] = 1.0
    return w


def blahut_arimoto(p_x: Pmf, d: DistortionMatrix, target_d: float,
                   tol: float = 1e-9) -> RDResult:
    """Evaluate R(target_d) for source p_x under distortion d.

    The outer loop bisects the Lagrange slope until the achieved distortion
    matches the target within ``tol`` (or the slope saturates at the cap,
    which happens when the target equals the minimum feasible distortion).
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    if p_x.alphabet_size != d.input_size:
        raise ValueError("source/distortion size mismatch")
    d_min, d_max = distortion_extremes(p_x, d)
    if target_d < d_min - 1e-12:
        raise InfeasibleDistortion(
            f"target distortion {target_d} below minimum feasible {d_min}")

    support = p_x.mass > 0
    p = p_x.mass[support]
    dm = d.d[support, :]

    full = np.empty_like(d.d)

    def _result(rate, dist, w, beta):
        # rows for zero-mass inputs are irrelevant; give them the output law
        q = p @ w
        q = q / q.sum()
        full[:] = q[None, :]
        full[support, :] = w
        return RDResult(rate=rate, achieving_channel=CondPmf(full.copy()),
                        achieved_distortion=dist, lagrange_slope=beta)

    if target_d >= d_max - 1e-15:
        w = _constant_channel(dm)
        dist = float(p @ np.sum(w * dm, axis=1))
        return _result(0.0, dist, w, 0.0)

    inner_tol = max(tol * 1e-2, 1e-14)

    # Bracket the slope: distortion decreases as beta grows.
    beta_lo, beta_hi = 0.0, 1.0
    rate_hi, dist_hi, w_hi, logq = _ba_fixed_slope(p, dm, beta_hi,
                                                   tol=inner_tol)
    while dist_hi > target_d and beta_hi < _BETA_CAP:
        beta_lo = beta_hi
        beta_hi *= 2.0
        rate_hi, dist_hi, w_hi, logq = _ba_fixed_slope(p, dm, beta_hi,
                                                       tol=inner_tol,
                                                       logq0=logq)
    if dist_hi > target_d:
        # Slope saturated; target is at (or numerically at) D_min.
        residual = abs(dist_hi - target_d)
        if residual > 1e-6 * max(1.0, d_max):
            raise ConvergenceError("slope saturated away from target", residual)
        return _result(rate_hi, dist_hi, w_hi, beta_hi)

    best = (rate_hi, dist_hi, w_hi, beta_hi)
    over = None
    for _ in range(200):
        mid = 0.5 * (beta_lo + beta_hi)
        rate_m, dist_m, w_m, logq = _ba_fixed_slope(p, dm, mid,
                                                    tol=inner_tol, logq0=logq)
        if dist_m <= target_d:
            beta_hi = mid
            best = (rate_m, dist_m, w_m, mid)
        else:
            beta_lo = mid
            over = (rate_m, dist_m, w_m, mid)
        if abs(dist_m - target_d) <= tol:
            best = (rate_m, dist_m, w_m, mid)
            break
        if beta_hi - beta_lo < 1e-13 * max(1.0, beta_hi):
            break
    rate, dist, w, beta = best
    if abs(dist - target_d) > tol and over is not None and over[1] > target_d > dist:
        # The curve has a linear segment here: distortion jumps across the
        # target as the slope crosses its critical value.  Time-share the two
        # channels straddling the jump; the mixture is optimal on the segment.
        lam = (target_d - dist) / (over[1] - dist)
        w = (1.0 - lam) * w + lam * over[2]
        rate, dist = _channel_rate_dist(p, dm, w)
        beta = 0.5 * (beta + over[3])
    residual = abs(dist - target_d)
    if residual > 1e-4 * max(1.0, d_max):
        raise ConvergenceError("slope bisection did not reach target", residual)
    return _result(rate, dist, w, beta)


def rd_curve(p_x: Pmf, d: DistortionMatrix, points: int,
             tol: float = 1e-9) -> list:
    """Sample (D, R) pairs on a uniform distortion grid spanning the range."""
    if points < 2:
        raise ValueError("points must be >= 2")
    d_min, d_max = distortion_extremes(p_x, d)
    grid = np.linspace(d_min, d_max, points)
    return [(float(dd), blahut_arimoto(p_x, d, float(dd), tol=tol).rate)
            for dd in grid]


def worst_case_channel(p_x: Pmf, d: DistortionMatrix, target_d: float) -> CondPmf:
    """Test channel achieving the R(D) infimum at the target distortion."""
    return blahut_arimoto(p_x, d, target_d).achieving_channel


def conditional_rd(p_v: Pmf, p_x_given_v: CondPmf, d: DistortionMatrix,
                   target_d: float, tol: float = 1e-9) -> ConditionalRDResult:
    """Conditional rate-distortion value sum_s p_V(s) I(X;Y|V=s) at distortion D.

    All per-symbol subproblems are solved at one shared slope, which is the
    optimality condition for splitting the distortion budget across symbols;
    the slope is bisected until the mixture distortion hits the target.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    if p_v.alphabet_size != p_x_given_v.n_conditions:
        raise ValueError("p_v / conditional source size mismatch")
    if p_x_given_v.alphabet_size != d.input_size:
        raise ValueError("source/distortion size mismatch")

    weights = p_v.mass
    active = [s for s in range(p_v.alphabet_size) if weights[s] > 0]
    sources = []
    for s in active:
        mask = p_x_given_v.rows[s] > 0
        sources.append((s, p_x_given_v.rows[s][mask], d.d[mask, :], mask))

    d_min = sum(weights[s] * float(p @ dm.min(axis=1))
                for s, p, dm, _ in sources)
    if target_d < d_min - 1e-12:
        raise InfeasibleDistortion(
            f"target distortion {target_d} below minimum feasible {d_min}")
    d_max = sum(weights[s] * float(np.min(p @ dm)) for s, p, dm, _ in sources)

    warm = {}

    def solve_at(beta):
        rates = np.zeros(p_v.alphabet_size)
        dists = np.zeros(p_v.alphabet_size)
        chans = [None] * p_v.alphabet_size
        for s, p, dm, mask in sources:
            if beta <= 0:
                w = _constant_channel(dm)
                r, dd = 0.0, float(p @ np.sum(w * dm, axis=1))
            else:
                r, dd, w, warm[s] = _ba_fixed_slope(
                    p, dm, beta, tol=max(tol * 1e-2, 1e-14),
                    logq0=warm.get(s))
            full = np.empty_like(d.d)
            q = p @ w
            q = q / q.sum()
            full[:] = q[None, :]
            full[mask, :] = w
            rates[s], dists[s], chans[s] = r, dd, CondPmf(full)
        for s in range(p_v.alphabet_size):
            if chans[s] is None:
                # zero-probability side symbol: any valid channel
                chans[s] = CondPmf(np.full_like(d.d, 1.0 / d.output_size))
        return rates, dists, chans

    if target_d >= d_max - 1e-15:
        rates, dists, chans = solve_at(0.0)
        return ConditionalRDResult(0.0, chans, dists)

    beta_lo, beta_hi = 0.0, 1.0
    rates, dists, chans = solve_at(beta_hi)
    while float(weights @ dists) > target_d and beta_hi < _BETA_CAP:
        beta_lo = beta_hi
        beta_hi *= 2.0
        rates, dists, chans = solve_at(beta_hi)
    best = (rates, dists, chans)
    if float(weights @ dists) > target_d:
        residual = abs(float(weights @ dists) - target_d)
        if residual > 1e-6 * max(1.0, d_max):
            raise ConvergenceError("slope saturated away from target", residual)
    else:
        over = None
        for _ in range(200):
            mid = 0.5 * (beta_lo + beta_hi)
            rates, dists, chans = solve_at(mid)
            total = float(weights @ dists)
            if total <= target_d:
                beta_hi = mid
                best = (rates, dists, chans)
            else:
                beta_lo = mid
                over = (rates, dists, chans)
            if abs(total - target_d) <= tol:
                best = (rates, dists, chans)
                break
            if beta_hi - beta_lo < 1e-13 * max(1.0, beta_hi):
                break
        rates, dists, chans = best
        total = float(weights @ dists)
        if abs(total - target_d) > tol and over is not None \
                and float(weights @ over[1]) > target_d > total:
            # Distortion jumps across the target at the critical slope
            # (linear segment); time-share the straddling solutions.
            o_total = float(weights @ over[1])
            lam = (target_d - total) / (o_total - total)
            mixed = []
            rates = np.empty(p_v.alphabet_size)
            dists = np.empty(p_v.alphabet_size)
            for s in range(p_v.alphabet_size):
                wm = (1.0 - lam) * chans[s].rows + lam * over[2][s].rows
                pv_row = p_x_given_v.rows[s]
                r, dd = _channel_rate_dist(pv_row, d.d, wm)
                mixed.append(CondPmf(wm))
                rates[s], dists[s] = r, dd
            chans = mixed
            best = (rates, dists, chans)
    rates, dists, chans = best
    total = float(weights @ dists)
    if abs(total - target_d) > 1e-4 * max(1.0, d_max) and total > target_d:
        raise ConvergenceError("slope bisection did not reach target",
                               abs(total - target_d))
    return ConditionalRDResult(float(weights @ rates), chans, dists)


def _box_bounds(p_x: Pmf, eps: float):
    lo = np.maximum(p_x.mass - eps, 0.0)
    hi = np.minimum(p_x.mass + eps, 1.0)
    return lo, hi


def _min_floor_distortion(lo, hi, d: DistortionMatrix) -> float:
    """Smallest achievable D_min(q) over the box: linear program solved greedily."""
    m = d.d.min(axis=1)
    order = np.argsort(m)
    q = lo.copy()
    slack = 1.0 - q.sum()
    for i in order:
        add = min(hi[i] - lo[i], slack)
        q[i] += add
        slack -= add
        if slack <= 1e-15:
            break
    return float(q @ m)


def exponent_infimum(p_x: Pmf, d: DistortionMatrix, target_d: float,
                     eps: float) -> ExponentResult:
    """Infimum of D(q_XY || p_X q_Y) over the distortion-constrained window.

    Uses the exact decomposition into D(q_X || p_X) plus the rate-distortion
    value of the perturbed source, reducing the search to the X-marginal:
    a dense 1-D scan for binary alphabets, constrained minimization otherwise.
    """
    if eps < 0:
        raise ValueError("eps must be >= 0")
    if p_x.alphabet_size != d.input_size:
        raise ValueError("source/distortion size mismatch")
    lo, hi = _box_bounds(p_x, eps)
    if _min_floor_distortion(lo, hi, d) > target_d + 1e-12:
        raise InfeasibleDistortion(
            "no distribution in the typicality window admits the distortion budget")

    cache = {}

    def objective(qm: np.ndarray, tol: float = 1e-8) -> float:
        qm = np.clip(qm, 0.0, None)
        total = qm.sum()
        if total <= 0:
            return np.inf
        qm = qm / total
        key = tuple(np.round(qm, 12))
        if key in cache:
            return cache[key]
        q = Pmf(qm)
        d_min_q = float(np.sum(q.mass * d.d.min(axis=1)))
        if d_min_q > target_d + 1e-12:
            value = 1e3 + 1e2 * (d_min_q - target_d)
        else:
            rd = blahut_arimoto(q, d, target_d, tol=tol)
            value = kl_divergence(q, p_x) + rd.rate
        cache[key] = value
        return value

    k = p_x.alphabet_size
    if k == 2:
        q0_lo = max(lo[0], 1.0 - hi[1])
        q0_hi = min(hi[0], 1.0 - lo[1])
        if q0_hi - q0_lo < 1e-12:
            best_q = np.array([q0_lo, 1.0 - q0_lo])
        else:
            grid = np.linspace(q0_lo, q0_hi, 41)
            vals = [objective(np.array([g, 1.0 - g])) for g in grid]
            i = int(np.argmin(vals))
            a = grid[max(i - 1, 0)]
            b = grid[min(i + 1, grid.size - 1)]
            res = minimize_scalar(lambda g: objective(np.array([g, 1.0 - g])),
                                  bounds=(a, b), method="bounded",
                                  options={"xatol": 1e-9})
            if res.fun <= vals[i]:
                best_q = np.array([res.x, 1.0 - res.x])
            else:
                best_q = np.array([grid[i], 1.0 - grid[i]])
    else:
        m = d.d.min(axis=1)
        order = np.argsort(m)
        vertex = lo.copy()
        slack = 1.0 - vertex.sum()
        for i in order:
            add = min(hi[i] - lo[i], slack)
            vertex[i] += add
            slack -= add
        starts = [p_x.mass.copy(), 0.5 * (p_x.mass + vertex)]
        best_q, best_val = p_x.mass.copy(), objective(p_x.mass)
        for x0 in starts:
            res = minimize(objective, x0, method="SLSQP",
                           bounds=list(zip(lo, hi)),
                           constraints=[{"type": "eq",
                                         "fun": lambda q: q.sum() - 1.0}],
                           options={"maxiter": 100, "ftol": 1e-10})
            if res.fun < best_val and abs(res.x.sum() - 1.0) < 1e-8:
                best_val = float(res.fun)
                best_q = np.clip(res.x, lo, hi)
                best_q = best_q / best_q.sum()

    q = Pmf(best_q / best_q.sum())
    rd = blahut_arimoto(q, d, target_d, tol=1e-10)
    joint = JointPmf(np.maximum(q.mass[:, None] * rd.achieving_channel.rows, 0.0)
                     / np.sum(q.mass[:, None] * rd.achieving_channel.rows))
    value = kl_divergence(q, p_x) + rd.rate
    return ExponentResult(value=max(float(value), 0.0), minimizer=joint)
