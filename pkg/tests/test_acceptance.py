"""Acceptance suite: ten end-to-end criteria, one pass/fail line each.

Every numeric target is checked against an oracle that does not share code
with the implementation under test: closed-form binary-entropy expressions,
dense grid searches over channels, binomial tails, or direct Monte Carlo.
"""
import json
import math
import time
from dataclasses import replace

import numpy as np
import pytest

from distcomm.attackers import (AdditiveClippedUniform, CoinFlipReplace, Dmc,
                                make_worst_case_attacker)
from distcomm.cli import main
from distcomm.codec import CodecParams, continuity_margin
from distcomm.harness import (ConditionalSource, ContinuousUniformSource,
                              ExperimentConfig, IidSource, certify_attacker,
                              estimate_error, run_trials)
from distcomm.prob import (CondPmf, JointPmf, Measure, Pmf, binary_types,
                           hamming_distortion, kl_divergence, kl_vs_product,
                           mutual_information, type_class_bound,
                           type_class_probability)
from distcomm.rd import blahut_arimoto, conditional_rd, exponent_infimum

UNIFORM2 = Pmf(np.array([0.5, 0.5]))
HAM2 = hamming_distortion(2)
BSC02 = CondPmf(np.array([[0.8, 0.2], [0.2, 0.8]]))


def h2(x):
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def report(num, ok, detail):
    print(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {num} failed: {detail}"


# ---------------------------------------------------------------------------

def test_criterion_01_rd_accuracy():
    worst_err, worst_dt = 0.0, 0.0
    for target in (0.05, 0.1, 0.25, 0.4):
        t0 = time.perf_counter()
        rate = blahut_arimoto(UNIFORM2, HAM2, target).rate
        dt = time.perf_counter() - t0
        worst_err = max(worst_err, abs(rate - (1.0 - h2(target))))
        worst_dt = max(worst_dt, dt)
    report(1, worst_err <= 1e-4 and worst_dt < 1.0,
           f"max |R - (1-h2(D))| = {worst_err:.2e}, max solve {worst_dt:.3f}s")


def test_criterion_02_exponent_matches_rd_value():
    # random instances with masses bounded away from zero, since the window
    # slack eps=1e-3 shifts the value by about eps * |R'(source)|, which
    # blows past any fixed tolerance for near-degenerate sources
    rng = np.random.default_rng(123)
    worst = 0.0
    for trial in range(10):
        k = 2 if trial % 2 == 0 else 3
        raw = rng.dirichlet(np.ones(k)) + 0.25
        p = Pmf(raw / raw.sum())
        d = hamming_distortion(k)
        lo = float(np.sum(p.mass * d.d.min(axis=1)))
        hi = float(np.min(p.mass @ d.d))
        target = 0.5 * (lo + hi)
        base = blahut_arimoto(p, d, target).rate
        value = exponent_infimum(p, d, target, 1e-3).value
        worst = max(worst, abs(base - value))

    # dense grid-search oracle in channel space for the uniform binary
    # instance at D = 0.25: minimize D(q_XY || p_X q_Y) directly over
    # (q0, w0, w1) with q0 in the window and q0*w0 + (1-q0)*w1 <= D
    def oracle_value(q_grid, w_step, center=None):
        best = math.inf
        arg = None
        if center is None:
            w0 = np.arange(0.0, 1.0 + w_step / 2, w_step)
        else:
            w0 = np.clip(np.arange(center[0] - 60 * w_step,
                                   center[0] + 60 * w_step, w_step), 0, 1)
        for q0 in q_grid:
            if center is None:
                w1 = w0
            else:
                w1 = np.clip(np.arange(center[1] - 60 * w_step,
                                       center[1] + 60 * w_step, w_step), 0, 1)
            a, b = np.meshgrid(w0, w1, indexing="ij")
            dist = q0 * a + (1 - q0) * b
            cells = np.stack([q0 * (1 - a), q0 * a, (1 - q0) * b,
                              (1 - q0) * (1 - b)])
            q_y = np.stack([cells[0] + cells[2], cells[1] + cells[3]])
            ref = np.stack([0.5 * q_y[0], 0.5 * q_y[1],
                            0.5 * q_y[0], 0.5 * q_y[1]])
            with np.errstate(divide="ignore", invalid="ignore"):
                terms = np.where(cells > 0, cells * np.log2(cells / ref), 0.0)
            val = terms.sum(axis=0)
            val = np.where(dist <= 0.25 + 1e-12, val, np.inf)
            i, j = np.unravel_index(np.argmin(val), val.shape)
            if val[i, j] < best:
                best = float(val[i, j])
                arg = (float(a[i, j]), float(b[i, j]))
        return best, arg

    eps = 1e-3
    q_grid = np.linspace(0.5 - eps, 0.5 + eps, 5)
    coarse, arg = oracle_value(q_grid, 1 / 400)
    fine, _ = oracle_value(q_grid, 1e-5, center=arg)
    oracle = min(coarse, fine)
    ours = exponent_infimum(UNIFORM2, HAM2, 0.25, eps).value
    grid_err = abs(ours - oracle)
    report(2, worst <= 5e-3 and grid_err <= 2e-3,
           f"max |exponent - R| = {worst:.2e} over 10 instances, "
           f"|exponent - grid oracle| = {grid_err:.2e}")


def _achievability_config(trials=300, master_seed=777):
    codec = CodecParams(n=200, rate=0.05, eps=0.1, target_d=0.25, seed=12345)
    return ExperimentConfig(source=IidSource(UNIFORM2), distortion=HAM2,
                            codec=codec, attacker=Dmc(BSC02), trials=trials,
                            master_seed=master_seed)


def test_criterion_03_achievability():
    cfg = _achievability_config()
    assert cfg.codec.codeword_count == 1024
    t0 = time.perf_counter()
    est = estimate_error(cfg)
    dt = time.perf_counter() - t0

    # error decay in n at the same operating rate: halving the block length
    # must raise the failure rate by a statistically clear margin
    small = estimate_error(replace(cfg, codec=replace(cfg.codec, n=100)))
    separated = (small.p_err - small.ci_halfwidth
                 > est.p_err + est.ci_halfwidth)
    report(3, est.p_err <= 0.10 and dt < 60.0 and separated,
           f"p_err = {est.p_err:.3f} (E1 {est.e1_freq:.3f}, "
           f"E2 {est.e2_freq:.3f}, E3 {est.e3_freq:.3f}) in {dt:.1f}s; "
           f"n=100: {small.p_err:.3f}+-{small.ci_halfwidth:.3f} vs "
           f"n=200: {est.p_err:.3f}+-{est.ci_halfwidth:.3f}")


def test_criterion_04_expected_distortion_insufficient():
    cfg = _achievability_config(trials=200, master_seed=9)
    cfg = replace(cfg, attacker=CoinFlipReplace(0, 0.5))
    outcomes = []
    for rate in (0.01, 0.03, 0.05):
        est = estimate_error(replace(cfg, codec=replace(cfg.codec, rate=rate)))
        outcomes.append((rate, est.p_err))
    stuck = all(0.35 <= p <= 0.65 for _, p in outcomes)

    rates_txt = ", ".join(f"rate {r}: {p:.3f}" for r, p in outcomes)
    certs = []
    for n in (100, 400):
        c = replace(cfg, codec=replace(cfg.codec, n=n), trials=400)
        certs.append(certify_attacker(c))
    nonvanishing = all(0.4 <= c.exceedance_rate <= 0.6 for c in certs)
    report(4, stuck and nonvanishing,
           f"p_err {rates_txt}; exceedance n=100: "
           f"{certs[0].exceedance_rate:.3f}, n=400: "
           f"{certs[1].exceedance_rate:.3f}")


def test_criterion_05_converse():
    assert blahut_arimoto(UNIFORM2, HAM2, 0.4).rate == pytest.approx(
        1.0 - h2(0.4), abs=1e-6)  # ~0.029, below the 0.035 operating rate
    attacker = make_worst_case_attacker(UNIFORM2, HAM2, 0.4, 0.05)
    codec = CodecParams(n=400, rate=0.035, eps=0.1, target_d=0.4, seed=5)
    assert codec.codeword_count == 16384
    cfg = ExperimentConfig(source=IidSource(UNIFORM2), distortion=HAM2,
                           codec=codec, attacker=attacker, trials=200,
                           master_seed=31)
    t0 = time.perf_counter()
    records = run_trials(cfg)
    dt = time.perf_counter() - t0
    est = estimate_error(cfg, records)
    ambiguous = np.mean([r.outcome.erasure is not None
                         and r.outcome.erasure.value == "ambiguous"
                         for r in records])
    report(5, est.p_err >= 0.20 and est.e3_freq >= 0.15 and dt < 300.0,
           f"p_err = {est.p_err:.3f}, E3 = {est.e3_freq:.3f}, "
           f"ambiguous = {ambiguous:.3f}, {dt:.1f}s")


def test_criterion_06_type_class_bound():
    rng = np.random.default_rng(2024)
    checks = 0
    for pair in range(100):
        p = Pmf(rng.dirichlet(np.ones(2)))
        extra = rng.random(2) * 0.5
        mu = Measure(p.mass + extra)   # dominates p entrywise
        for n in range(1, 13):
            for q in binary_types(n):
                assert (type_class_probability(p, q, n)
                        <= type_class_bound(q, mu, n) + 1e-15)
                checks += 1
    # mu equal to p itself, exhaustively
    p = Pmf(np.array([0.3, 0.7]))
    for n in range(1, 13):
        for q in binary_types(n):
            assert (type_class_probability(p, q, n)
                    <= type_class_bound(q, Measure(p.mass), n) + 1e-15)
            checks += 1
    report(6, True, f"probability <= bound on all {checks} (p, mu, type) checks")


def test_criterion_07_chain_identity():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        kx = int(rng.integers(2, 5))
        ky = int(rng.integers(2, 5))
        joint = JointPmf(rng.dirichlet(np.ones(kx * ky)).reshape(kx, ky))
        p_x = Pmf(rng.dirichlet(np.ones(kx)))
        lhs = kl_vs_product(joint, p_x)
        rhs = kl_divergence(joint.x_marginal(), p_x) + mutual_information(joint)
        worst = max(worst, abs(lhs - rhs))
    report(7, worst <= 1e-12, f"max identity residual = {worst:.2e}")


def test_criterion_08_conditional():
    # (a) identical rows reduce to the unconditional solver
    worst_a = 0.0
    for row in ([0.5, 0.5], [0.3, 0.7]):
        rows = CondPmf(np.array([row, row]))
        cond = conditional_rd(Pmf(np.array([0.5, 0.5])), rows, HAM2, 0.15).rate
        flat = blahut_arimoto(Pmf(np.array(row)), HAM2, 0.15).rate
        worst_a = max(worst_a, abs(cond - flat))

    # (b) optimal budget split against the closed-form scalar oracle
    p_v = Pmf(np.array([0.5, 0.5]))
    rows = CondPmf(np.array([[0.5, 0.5], [0.7, 0.3]]))
    d0 = np.linspace(0.0, 0.2, 20001)
    d1 = 0.2 - d0
    r0 = np.where(d0 < 0.5, 1.0 - np.vectorize(h2)(d0), 0.0)
    r1 = np.where(d1 < 0.3, h2(0.3) - np.vectorize(h2)(d1), 0.0)
    oracle = float(np.min(0.5 * r0 + 0.5 * r1))
    solved = conditional_rd(p_v, rows, HAM2, 0.1).rate
    err_b = abs(solved - oracle)

    # (c) end-to-end conditional simulation below the conditional R(0.25)
    r_cond = conditional_rd(p_v, rows, HAM2, 0.25).rate
    assert r_cond > 0.05
    codec = CodecParams(n=200, rate=0.05, eps=0.1, target_d=0.25, seed=5)
    cfg = ExperimentConfig(source=ConditionalSource(p_v, rows),
                           distortion=HAM2, codec=codec, attacker=Dmc(BSC02),
                           trials=300, master_seed=17)
    est = estimate_error(cfg)
    report(8, worst_a <= 1e-6 and err_b <= 1e-4 and est.p_err <= 0.12,
           f"equal-rows gap {worst_a:.2e}, split-oracle gap {err_b:.2e}, "
           f"end-to-end p_err = {est.p_err:.3f}")


def test_criterion_09_quantized_continuous():
    delta = 0.02
    src = ContinuousUniformSource(0.0, 1.0, delta)
    margin = continuity_margin("squared_error", delta, 1.0)
    threshold = 0.05 + margin
    quant = src.quantizer()
    ba = blahut_arimoto(quant.cell_pmf(),
                        quant.distortion_matrix("squared_error"), threshold)
    rate = 0.5 * ba.rate
    codec = CodecParams(n=200, rate=rate, eps=0.1, target_d=0.05, seed=5)
    # noise width 0.66: E[(clip(x+u)-x)^2] = 0.0303 by numeric integration
    cfg = ExperimentConfig(source=src, distortion="squared_error", codec=codec,
                           attacker=AdditiveClippedUniform(0.66, 0.0, 1.0),
                           trials=200, master_seed=55)
    records = run_trials(cfg)
    success = np.mean([not r.failed for r in records])
    realized = np.mean([r.realized_distortion for r in records])
    report(9, success >= 0.90 and 0.02 <= realized <= 0.04,
           f"success = {success:.3f} at rate {rate:.6f} "
           f"(M = {codec.codeword_count}), realized distortion "
           f"{realized:.4f} vs decode threshold {threshold:.4f}")


def test_criterion_10_reproducibility(tmp_path):
    doc = {
        "source": {"kind": "iid", "pmf": [0.5, 0.5]},
        "distortion": {"kind": "matrix", "d": [[0.0, 1.0], [1.0, 0.0]]},
        "codec": {"n": 100, "rate": 0.05, "eps": 0.1, "target_d": 0.25},
        "attacker": {"kind": "dmc", "channel": [[0.8, 0.2], [0.2, 0.8]]},
        "trials": 40,
        "master_seed": 7,
        "points": 7,
        "eps_values": [0.0],
        "sweep": {"axis": "rate", "values": [0.03, 0.05]},
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    identical = True
    for cmd in ("rd", "exponent", "simulate", "sweep", "certify"):
        outs = []
        for run in range(2):
            out = tmp_path / f"{cmd}_{run}.csv"
            code = main([cmd, "--config", str(path), "--seed", "99",
                         "--out", str(out), "--quiet"])
            assert code == 0
            outs.append(out.read_bytes())
        identical &= outs[0] == outs[1]
    report(10, identical, "all five subcommands byte-identical across reruns")
