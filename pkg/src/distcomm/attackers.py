"""Attack channels and an empirical certifier of the block-distortion property.

The attacker is a black box mapping an input block to an output block; it may
randomize and it sees the whole block before producing anything.  Variants:

  * Identity            -- passes the block through.
  * Dmc                 -- memoryless channel applied symbol by symbol.
  * CoinFlipReplace     -- one coin per block: heads passes the block through,
    tails replaces it with a constant.  Meets an *expected* distortion budget
    while violating the block (with-high-probability) one, which is the whole
    point of keeping it around.
  * TypicalityGate      -- emits constant junk unless the input's empirical
    type is inside a window around a reference law, then applies an inner DMC.
  * BudgetGreedy        -- spends a hard per-block budget on the most damaging
    substitutions, never exceeding it.
  * AdditiveClippedUniform -- real-valued path: adds bounded uniform noise and
    clips back into the support.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .prob import (CondPmf, DistortionMatrix, Pmf, average_distortion,
                   check_symbols, empirical_type, is_typical, sample_iid)
from .rd import distortion_extremes, worst_case_channel
from .stats import wilson_halfwidth


@dataclass(frozen=True)
class Identity:
    pass


@dataclass(frozen=True)
class Dmc:
    channel: CondPmf


@dataclass(frozen=True)
class CoinFlipReplace:
    replacement_symbol: int
    heads_prob: float

    def __post_init__(self):
        if not 0.0 <= self.heads_prob <= 1.0:
            raise ValueError("heads_prob must be in [0, 1]")
        if self.replacement_symbol < 0:
            raise ValueError("replacement symbol must be a valid index")


@dataclass(frozen=True)
class TypicalityGate:
    eps_gate: float
    inner: CondPmf
    junk_symbol: int
    reference: Pmf  # law the gate tests the input's empirical type against

    def __post_init__(self):
        if self.eps_gate < 0:
            raise ValueError("eps_gate must be >= 0")


@dataclass(frozen=True)
class BudgetGreedy:
    budget_d: float

    def __post_init__(self):
        if self.budget_d < 0:
            raise ValueError("budget must be >= 0")


@dataclass(frozen=True)
class AdditiveClippedUniform:
    width: float
    lo: float
    hi: float

    def __post_init__(self):
        if self.width < 0:
            raise ValueError("noise width must be >= 0")


AttackerSpec = Union[Identity, Dmc, CoinFlipReplace, TypicalityGate,
                     BudgetGreedy, AdditiveClippedUniform]


def _apply_dmc(channel: CondPmf, x: np.ndarray,
               rng: np.random.Generator) -> np.ndarray:
    cdfs = np.cumsum(channel.rows, axis=1)[x]           # (n, |Y|)
    u = rng.random(x.size)
    y = (u[:, None] > cdfs).sum(axis=1)
    return np.minimum(y, channel.alphabet_size - 1).astype(np.int64)


def _apply_budget_greedy(spec: BudgetGreedy, x: np.ndarray,
                         d: DistortionMatrix) -> np.ndarray:
    y = x.copy()
    baseline = d.d[x, x].astype(float)
    gains = d.d[x].max(axis=1) - baseline
    targets = d.d[x].argmax(axis=1)
    budget = spec.budget_d * x.size - baseline.sum()
    order = np.argsort(-gains, kind="stable")
    for t in order:
        g = gains[t]
        if g <= 0:
            break
        if g <= budget:
            y[t] = targets[t]
            budget -= g
    return y


def apply_attacker(spec: AttackerSpec, x, v=None,
                   rng: Optional[np.random.Generator] = None,
                   d: Optional[DistortionMatrix] = None) -> np.ndarray:
    """Run one block through the attack channel.

    ``d`` is required by BudgetGreedy (it defines what "damage" means); ``v``
    is accepted for conditional experiments where the coverstory is public,
    though none of the built-in variants currently uses it.  Stochastic
    variants require ``rng``.
    """
    if isinstance(spec, AdditiveClippedUniform):
        xa = np.asarray(x, dtype=float)
        if xa.size == 0:
            raise ValueError("input block must be nonempty")
        if rng is None:
            raise ValueError("this attacker needs an rng")
        noise = rng.uniform(-spec.width / 2.0, spec.width / 2.0, xa.size)
        return np.clip(xa + noise, spec.lo, spec.hi)

    xa = np.asarray(x)
    if xa.size == 0:
        raise ValueError("input block must be nonempty")
    xa = xa.astype(np.int64)

    if isinstance(spec, Identity):
        return xa.copy()
    if isinstance(spec, Dmc):
        if rng is None:
            raise ValueError("this attacker needs an rng")
        return _apply_dmc(spec.channel, xa, rng)
    if isinstance(spec, CoinFlipReplace):
        if rng is None:
            raise ValueError("this attacker needs an rng")
        if rng.random() < spec.heads_prob:
            return xa.copy()
        return np.full(xa.size, spec.replacement_symbol, dtype=np.int64)
    if isinstance(spec, TypicalityGate):
        t = empirical_type(xa, spec.reference.alphabet_size)
        if not is_typical(t, spec.reference, spec.eps_gate):
            return np.full(xa.size, spec.junk_symbol, dtype=np.int64)
        if rng is None:
            raise ValueError("this attacker needs an rng")
        return _apply_dmc(spec.inner, xa, rng)
    if isinstance(spec, BudgetGreedy):
        if d is None:
            raise ValueError("budget attacker needs the distortion matrix")
        return _apply_budget_greedy(spec, xa, d)
    raise ValueError(f"unknown attacker spec {spec!r}")


def make_worst_case_attacker(p_x: Pmf, d: DistortionMatrix, target_d: float,
                             margin: float) -> Dmc:
    """DMC matching the rate-distortion test channel at distortion D - margin.

    Backing off by the margin keeps the realized block distortion below D
    with high probability, so the channel qualifies as a D-distortion attack.
    """
    d_min, _ = distortion_extremes(p_x, d)
    if target_d - margin < d_min - 1e-12:
        raise ValueError("margin pushes the distortion below the feasible floor")
    return Dmc(worst_case_channel(p_x, d, target_d - margin))


@dataclass(frozen=True)
class DistortionCertificate:
    n: int
    trials: int
    threshold_d: float
    exceedance_rate: float
    confidence_halfwidth: float


def verify_block_distortion(spec: AttackerSpec, p_x: Pmf, d: DistortionMatrix,
                            threshold_d: float, n: int, trials: int,
                            rng: np.random.Generator) -> DistortionCertificate:
    """Monte Carlo estimate of Pr(block-average distortion > threshold).

    A genuine D-distortion attacker drives this to zero as n grows; an
    expected-distortion-only attacker (the block coin flip) does not.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    exceed = 0
    for _ in range(trials):
        x = sample_iid(p_x, n, rng)
        y = apply_attacker(spec, x, rng=rng, d=d)
        if average_distortion(x, y, d) > threshold_d:
            exceed += 1
    return DistortionCertificate(
        n=n, trials=trials, threshold_d=threshold_d,
        exceedance_rate=exceed / trials,
        confidence_halfwidth=wilson_halfwidth(exceed, trials))
