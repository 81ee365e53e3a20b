"""Experiment orchestration: single trials, error estimation, sweeps.

A trial regenerates the codebook from the shared seed (fresh per trial, so
codebooks are independent block to block), draws a uniform message, runs the
block through the attacker and decodes.  Alongside the decode outcome each
trial records three diagnostic flags computed by direct inspection:

  e1 -- the transmitted codeword fell outside the typicality window
  e2 -- the realized block distortion exceeded the decode threshold
  e3 -- some other restricted codeword landed within the threshold

Any failed decode is covered by at least one flag, so the measured error
rate obeys the union bound over the three frequencies (checked on every
estimate).  All randomness is derived from the master seed and the trial
index; identical configs produce byte-identical CSV.
"""
from __future__ import annotations

import io
import warnings
from dataclasses import dataclass, replace
from typing import List, Optional, Union

import numpy as np

from . import attackers as atk
from .codec import (Codebook, CodecParams, DecodeOutcome, ErasureReason,
                    Quantizer, codeword_distortions, conditional_typical_mask,
                    continuity_margin, generate_codebook,
                    generate_codebook_conditional, typical_mask)
from .errors import ConfigError
from .prob import (CondPmf, DistortionMatrix, Pmf, empirical_type, is_typical,
                   sample_iid)
from .stats import wilson_halfwidth
from .streams import derive_rng, derive_seed


# ---------------------------------------------------------------------------
# Configuration (core, already validated)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IidSource:
    pmf: Pmf


@dataclass(frozen=True)
class ConditionalSource:
    p_v: Pmf
    p_x_given_v: CondPmf


@dataclass(frozen=True)
class ContinuousUniformSource:
    lo: float
    hi: float
    delta: float  # quantizer cell width used on the decode side

    def quantizer(self) -> Quantizer:
        return Quantizer(delta=self.delta, lo=self.lo, hi=self.hi)


SourceSpec = Union[IidSource, ConditionalSource, ContinuousUniformSource]


@dataclass(frozen=True)
class ExperimentConfig:
    source: SourceSpec
    distortion: Union[DistortionMatrix, str]  # matrix, or a family tag
    codec: CodecParams
    attacker: atk.AttackerSpec
    trials: int
    master_seed: int

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if isinstance(self.source, ContinuousUniformSource):
            if not isinstance(self.distortion, str):
                raise ConfigError(
                    "continuous sources need a distortion family tag")
            if not isinstance(self.attacker, (atk.Identity,
                                              atk.AdditiveClippedUniform)):
                raise ConfigError(
                    "continuous sources support only real-valued attackers")
        else:
            if not isinstance(self.distortion, DistortionMatrix):
                raise ConfigError("discrete sources need a distortion matrix")


@dataclass(frozen=True)
class TrialRecord:
    trial_index: int
    message: int
    outcome: DecodeOutcome
    realized_distortion: float
    e1_atypical_codeword: bool
    e2_distortion_exceeded: bool
    e3_impostor_within_d: bool

    @property
    def failed(self) -> bool:
        return not (self.outcome.is_decoded
                    and self.outcome.message == self.message)


@dataclass(frozen=True)
class ErrorEstimate:
    p_err: float
    ci_halfwidth: float
    e1_freq: float
    e2_freq: float
    e3_freq: float
    wrong_decode_freq: float
    trials: int


@dataclass(frozen=True)
class SweepResult:
    axis: str
    values: list
    estimates: List[ErrorEstimate]


# stream labels under the master seed
_MSG, _SRC, _ATK = 0, 1, 2
_CODEBOOK_BLOCK = 0  # block index namespace under the codec seed


def _flags_and_outcome(mask: np.ndarray, dists: np.ndarray, threshold: float,
                       message: int, transmitted_typical: bool,
                       realized: float):
    candidates = mask & (dists <= threshold)
    others = candidates.copy()
    others[message] = False
    e3 = bool(others.any())
    n_cand = int(candidates.sum())
    if n_cand == 0:
        outcome = DecodeOutcome.erased(ErasureReason.NO_CANDIDATE)
    elif n_cand > 1:
        outcome = DecodeOutcome.erased(ErasureReason.AMBIGUOUS)
    else:
        outcome = DecodeOutcome.decoded(int(np.flatnonzero(candidates)[0]))
    return outcome, (not transmitted_typical), realized > threshold, e3


def run_trial(cfg: ExperimentConfig, trial_index: int) -> TrialRecord:
    """Simulate one transmission; fully determined by (config, trial_index)."""
    if isinstance(cfg.source, IidSource):
        return _run_trial_iid(cfg, trial_index)
    if isinstance(cfg.source, ConditionalSource):
        return _run_trial_conditional(cfg, trial_index)
    return _run_trial_continuous(cfg, trial_index)


def _draw_message(cfg: ExperimentConfig, trial_index: int) -> int:
    rng = derive_rng(cfg.master_seed, _MSG, trial_index)
    return int(rng.integers(cfg.codec.codeword_count))


def _run_trial_iid(cfg: ExperimentConfig, trial_index: int) -> TrialRecord:
    p_x = cfg.source.pmf
    d = cfg.distortion
    codec = cfg.codec
    cb = generate_codebook(p_x, codec, block_index=trial_index)
    message = _draw_message(cfg, trial_index)
    x = cb.codewords[message]
    rng_atk = derive_rng(cfg.master_seed, _ATK, trial_index)
    y = atk.apply_attacker(cfg.attacker, x, rng=rng_atk, d=d)
    realized = float(d.d[x, y].mean())

    mask = typical_mask(cb, p_x, codec.eps)
    dists = codeword_distortions(cb, y, d)
    outcome, e1, e2, e3 = _flags_and_outcome(
        mask, dists, codec.target_d, message, bool(mask[message]), realized)
    return TrialRecord(trial_index, message, outcome, realized, e1, e2, e3)


def _run_trial_conditional(cfg: ExperimentConfig, trial_index: int) -> TrialRecord:
    src = cfg.source
    d = cfg.distortion
    codec = cfg.codec
    p_vx = src.p_x_given_v.joint_with(src.p_v)

    rng_src = derive_rng(cfg.master_seed, _SRC, trial_index)
    v = sample_iid(src.p_v, codec.n, rng_src)
    cb = generate_codebook_conditional(src.p_x_given_v, v, codec,
                                       block_index=trial_index)
    message = _draw_message(cfg, trial_index)
    x = cb.codewords[message]
    rng_atk = derive_rng(cfg.master_seed, _ATK, trial_index)
    y = atk.apply_attacker(cfg.attacker, x, v=v, rng=rng_atk, d=d)
    realized = float(d.d[x, y].mean())

    v_typical = is_typical(empirical_type(v, src.p_v.alphabet_size),
                           src.p_v, codec.eps)
    if not v_typical:
        outcome = DecodeOutcome.erased(ErasureReason.TRANSMITTER_ATYPICAL)
        return TrialRecord(trial_index, message, outcome, realized,
                           True, realized > codec.target_d, False)
    mask = conditional_typical_mask(cb, p_vx, codec.eps)
    dists = codeword_distortions(cb, y, d)
    outcome, e1, e2, e3 = _flags_and_outcome(
        mask, dists, codec.target_d, message, bool(mask[message]), realized)
    return TrialRecord(trial_index, message, outcome, realized, e1, e2, e3)


def _run_trial_continuous(cfg: ExperimentConfig, trial_index: int) -> TrialRecord:
    src = cfg.source
    codec = cfg.codec
    quant = src.quantizer()
    kind = cfg.distortion
    width = src.hi - src.lo
    threshold = codec.target_d + continuity_margin(kind, src.delta, width)
    p_cells = quant.cell_pmf()
    d_cells = quant.distortion_matrix(kind)

    # real-valued codebook, deterministic in (codec seed, trial index)
    m = codec.codeword_count
    rng_cb = derive_rng(codec.seed, trial_index)
    real_words = src.lo + rng_cb.random((m, codec.n)) * width
    message = _draw_message(cfg, trial_index)
    x = real_words[message]
    rng_atk = derive_rng(cfg.master_seed, _ATK, trial_index)
    y = atk.apply_attacker(cfg.attacker, x, rng=rng_atk)
    y = np.asarray(y, dtype=float)
    if kind == "squared_error":
        realized = float(np.mean((x - y) ** 2))
    else:
        realized = float(np.mean(np.abs(x - y)))

    from .codec import quantize_sequence
    words_q = quantize_sequence(quant, real_words.ravel()).reshape(m, codec.n)
    y_q = quantize_sequence(quant, y)
    cb = Codebook(codewords=words_q, params=codec, source=p_cells)
    mask = typical_mask(cb, p_cells, codec.eps)
    dists = codeword_distortions(cb, y_q, d_cells)
    outcome, e1, _, e3 = _flags_and_outcome(
        mask, dists, threshold, message, bool(mask[message]), realized)
    # e2 is against the decoder's inflated threshold, in the quantized domain
    e2 = float(dists[message]) > threshold
    return TrialRecord(trial_index, message, outcome, realized, e1, e2, e3)


def run_trials(cfg: ExperimentConfig) -> List[TrialRecord]:
    return [run_trial(cfg, t) for t in range(cfg.trials)]


def estimate_error(cfg: ExperimentConfig,
                   records: Optional[List[TrialRecord]] = None) -> ErrorEstimate:
    """Failure rate with a 95% Wilson interval and the per-event frequencies.

    A sanity check asserts the union bound: the measured error rate cannot
    exceed the summed event frequencies by more than the CI slack.
    """
    if cfg.trials < 30:
        warnings.warn("fewer than 30 trials: confidence interval is unreliable",
                      stacklevel=2)
    if records is None:
        records = run_trials(cfg)
    n = len(records)
    failures = sum(r.failed for r in records)
    e1 = sum(r.e1_atypical_codeword for r in records) / n
    e2 = sum(r.e2_distortion_exceeded for r in records) / n
    e3 = sum(r.e3_impostor_within_d for r in records) / n
    wrong = sum(r.outcome.is_decoded and r.outcome.message != r.message
                for r in records) / n
    half = wilson_halfwidth(failures, n)
    p_err = failures / n
    if p_err > e1 + e2 + e3 + 2 * half + 1e-12:
        raise AssertionError(
            f"union-bound sanity violated: p_err={p_err} vs "
            f"E1+E2+E3={e1 + e2 + e3} (+ slack {2 * half})")
    return ErrorEstimate(p_err=p_err, ci_halfwidth=half, e1_freq=e1,
                         e2_freq=e2, e3_freq=e3, wrong_decode_freq=wrong,
                         trials=n)


_AXES = ("rate", "n", "D", "eps")


def _config_at(cfg: ExperimentConfig, axis: str, value, point: int) -> ExperimentConfig:
    codec = cfg.codec
    if axis == "rate":
        codec = replace(codec, rate=float(value))
    elif axis == "n":
        codec = replace(codec, n=int(value))
    elif axis == "D":
        codec = replace(codec, target_d=float(value))
    elif axis == "eps":
        codec = replace(codec, eps=float(value))
    else:
        raise ConfigError(f"unknown sweep axis {axis!r}")
    codec = replace(codec, seed=derive_seed(cfg.master_seed, 10, point))
    return replace(cfg, codec=codec,
                   master_seed=derive_seed(cfg.master_seed, 11, point))


def sweep(cfg: ExperimentConfig, axis: str, values) -> SweepResult:
    """Independent error estimates along one axis, with per-point seeds."""
    if axis not in _AXES:
        raise ConfigError(f"sweep axis must be one of {_AXES}")
    values = list(values)
    if not values:
        raise ConfigError("sweep needs at least one value")
    estimates = [estimate_error(_config_at(cfg, axis, v, i))
                 for i, v in enumerate(values)]
    return SweepResult(axis=axis, values=values, estimates=estimates)


def certify_attacker(cfg: ExperimentConfig) -> atk.DistortionCertificate:
    """Block-distortion certificate for the configured attacker."""
    if not isinstance(cfg.source, IidSource):
        raise ConfigError("attacker certification expects an iid discrete source")
    rng = derive_rng(cfg.master_seed, 3)
    return atk.verify_block_distortion(
        cfg.attacker, cfg.source.pmf, cfg.distortion,
        threshold_d=cfg.codec.target_d, n=cfg.codec.n,
        trials=cfg.trials, rng=rng)


# ---------------------------------------------------------------------------
# Tabular outputs (shared by the CLI and the HTTP service)
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".9g")
    return str(value)


def format_csv(header: List[str], rows: List[list]) -> str:
    """Comma-separated table, LF endings, floats at 9 significant digits."""
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def simulate_table(cfg: ExperimentConfig):
    header = ["trial", "message", "outcome", "distortion", "e1", "e2", "e3"]
    rows = [[r.trial_index, r.message, r.outcome.label(),
             r.realized_distortion, r.e1_atypical_codeword,
             r.e2_distortion_exceeded, r.e3_impostor_within_d]
            for r in run_trials(cfg)]
    return header, rows


def sweep_table(cfg: ExperimentConfig, axis: str, values):
    result = sweep(cfg, axis, values)
    header = ["axis_value", "p_err", "ci", "e1", "e2", "e3"]
    rows = [[v, est.p_err, est.ci_halfwidth, est.e1_freq, est.e2_freq,
             est.e3_freq]
            for v, est in zip(result.values, result.estimates)]
    return header, rows


def _solver_inputs(cfg: ExperimentConfig):
    """Source pmf and distortion matrix seen by the rate-distortion solvers."""
    if isinstance(cfg.source, IidSource):
        return cfg.source.pmf, cfg.distortion
    if isinstance(cfg.source, ConditionalSource):
        joint = cfg.source.p_x_given_v.joint_with(cfg.source.p_v)
        return joint.y_marginal(), cfg.distortion
    quant = cfg.source.quantizer()
    return quant.cell_pmf(), quant.distortion_matrix(cfg.distortion)


def rd_table(cfg: ExperimentConfig, points: int):
    from .rd import rd_curve
    p_x, d = _solver_inputs(cfg)
    header = ["D", "R"]
    rows = [[dd, rr] for dd, rr in rd_curve(p_x, d, points)]
    return header, rows


def exponent_table(cfg: ExperimentConfig, eps_values):
    from .rd import exponent_infimum
    p_x, d = _solver_inputs(cfg)
    header = ["eps", "value"]
    rows = [[float(e), exponent_infimum(p_x, d, cfg.codec.target_d,
                                        float(e)).value]
            for e in eps_values]
    return header, rows


def certify_table(cfg: ExperimentConfig):
    cert = certify_attacker(cfg)
    header = ["n", "trials", "exceedance", "ci"]
    rows = [[cert.n, cert.trials, cert.exceedance_rate,
             cert.confidence_halfwidth]]
    return header, rows
