"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines.  Every tolerance is pinned here; all randomness is seed-pinned, so
each criterion is deterministic.
"""

import math
import time

import numpy as np
import pytest

from doublewell import cli, decay, ergodic, stability
from doublewell.model import (
    SQRT2,
    Constant,
    LinearAtRoot,
    PolynomialBounded,
    PotentialParams,
    TabulatedLipschitz,
    deterministic_flow,
)
from doublewell.sde import SimConfig, run_batch, simulate

UNIT = PotentialParams()


def check(num: int, desc: str, ok: bool) -> None:
    print(f"ACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} - {desc}")
    assert ok, f"acceptance criterion {num} failed: {desc}"


def test_criterion_1_deterministic_flow_oracle():
    def max_err(dt: float) -> dict[float, float]:
        errs = {}
        for x0 in (0.5, -0.5, 2.0, -2.0):
            cfg = SimConfig(dt=dt, t_max=5.0, seed=0)
            tr = simulate(UNIT, Constant(0.0), x0, cfg)
            exact = np.array([deterministic_flow(UNIT, x0, t) for t in tr.times])
            errs[x0] = float(np.max(np.abs(tr.states - exact)))
        return errs

    t0 = time.perf_counter()
    coarse = max_err(1e-3)
    elapsed = time.perf_counter() - t0
    fine = max_err(5e-4)
    check(1, "noise-free paths match the closed-form flow within 5e-3",
          max(coarse.values()) <= 5e-3)
    ratios = [coarse[x0] / fine[x0] for x0 in coarse]
    check(1, "error halves (within 20%) when dt halves",
          all(1.6 <= r <= 2.4 for r in ratios))
    check(1, f"runtime under one second (got {elapsed:.3f}s)", elapsed < 1.0)


def test_criterion_2_classifier_thresholds():
    cases = {
        1.0: stability.StabilityCase.UNSTABLE_BELOW_SQRT2,
        SQRT2: stability.StabilityCase.UNSTABLE_CRITICAL_LINEAR,
        2.0: stability.StabilityCase.ASYMPTOTICALLY_STABLE_IN_PROB,
    }
    ok = all(
        stability.classify(LinearAtRoot(0.0, kappa, 10.0), 0.0).case is case
        for kappa, case in cases.items()
    )
    check(2, "center verdicts for slopes {1, sqrt(2) structural, 2}", ok)

    well_families = [
        (LinearAtRoot(1.0, 0.5, 10.0), 1.0),
        (LinearAtRoot(-1.0, 2.0, 10.0), -1.0),
        (PolynomialBounded((1.0, -2.0, 1.0)), 1.0),          # (x-1)^2
        (TabulatedLipschitz((-2.0, -1.0, 0.0), (1.0, 0.0, 1.0)), -1.0),
    ]
    ok = all(
        stability.classify(d, x_e).case
        is stability.StabilityCase.STABLE_NONDEGENERATE_WELL
        for d, x_e in well_families
    )
    check(2, "every vanishing-at-root family is stable at the wells", ok)


def test_criterion_3_empirical_instability_and_stability():
    cfg = SimConfig(dt=1e-3, t_max=50.0, seed=301)
    br = run_batch(UNIT, LinearAtRoot(0.0, 1.0, 10.0), 0.01, cfg, None, 1000,
                   ref=0.0, parallelism=4)
    frac, _ = br.exceedance_fraction(0.1)
    check(3, f"slope 1: {frac:.3f} of paths from 0.01 exceed 0.1 by T=50",
          frac >= 0.99)

    fracs, ses = [], []
    for i, x0 in enumerate((0.1, 0.01, 0.001)):
        cfg = SimConfig(dt=1e-3, t_max=50.0, seed=310 + i)
        br = run_batch(UNIT, LinearAtRoot(0.0, 2.0, 10.0), x0, cfg, None, 1000,
                       ref=0.0, parallelism=4)
        f, s = br.exceedance_fraction(0.1)
        fracs.append(f)
        ses.append(s)
    ok = all(
        fracs[i + 1] <= fracs[i] + 2.0 * math.hypot(ses[i], ses[i + 1])
        for i in range(2)
    )
    check(3, f"slope 2: exceedance {[round(f, 3) for f in fracs]} is "
             "non-increasing toward the equilibrium (within 2 SE)", ok)


def test_criterion_4_decay_rates():
    fams = [
        LinearAtRoot(1.0, 0.5, 10.0),
        Constant(0.0),
        PolynomialBounded((1.0, -2.0, 1.0)),
        TabulatedLipschitz((0.0, 1.0, 2.0), (1.0, 0.0, 1.0)),
    ]
    ok = all(stability.decay_rate(d, 1.0, 1.0).c == 2.0 for d in fams)
    check(4, "alpha=1 gives the exact constant 2 for every admissible family", ok)

    ok = True
    for beta in (0.5, 1.0):
        dr = stability.decay_rate(LinearAtRoot(1.0, beta, 10.0), 1.0, 2.0)
        ok &= abs(dr.c - (4.0 - beta * beta)) <= 1e-4
        ok &= dr.bound_lower - 1e-12 <= dr.c / 2.0 <= dr.bound_upper + 1e-12
    check(4, "alpha=2 linear-slope constant equals 4 - slope^2 inside the "
             "sandwich", ok)

    cfg = SimConfig(dt=1e-3, t_max=2.5, seed=404)
    rep = stability.moment_decay_check(
        UNIT, LinearAtRoot(1.0, 0.5, 10.0), 1.0, 1.0, 2.0,
        [0.5, 1.0, 2.0], 10_000, cfg,
    )
    check(4, "Monte Carlo first moment stays below e^{-2t} (within 2 SE) at "
             "t in {0.5, 1, 2}", rep.passed and rep.c == 2.0)


def test_criterion_5_exit_time_bounds():
    cfg = SimConfig(dt=1e-3, t_max=100.0, seed=505)
    st0 = ergodic.annulus_exit_time(UNIT, Constant(1.0), 0.0, 0.1, 0.5, 0.3,
                                    cfg, 2000, parallelism=4)
    ok = (abs(st0.bound - 4.0404) <= 1e-4 and st0.n_timeout == 0
          and st0.satisfies_bound())
    check(5, f"center annulus exit: mean {st0.mean:.4f} - 2SE below bound "
             f"{st0.bound:.4f}", ok)

    st1 = ergodic.annulus_exit_time(UNIT, Constant(1.0), 1.0, 0.1, 0.5, 1.3,
                                    cfg, 2000, parallelism=4)
    ok = (abs(st1.bound - 5.0505) <= 1e-4 and st1.n_timeout == 0
          and st1.satisfies_bound())
    check(5, f"well annulus exit: mean {st1.mean:.4f} - 2SE below bound "
             f"{st1.bound:.4f}", ok)

    st2 = ergodic.mean_hitting_time(UNIT, Constant(1.0), 2.0, (-1.5, 1.5),
                                    cfg, 2000, parallelism=4)
    ok = (abs(st2.bound - 1.06667) <= 1e-5 and st2.n_timeout == 0
          and st2.satisfies_bound())
    check(5, f"hitting time from 2: mean {st2.mean:.4f} - 2SE below bound "
             f"{st2.bound:.4f}", ok)


def test_criterion_6_invariant_measure():
    edges = np.linspace(-3.0, 3.0, 201)
    oracle = ergodic.stationary_bin_masses(UNIT, Constant(1.0), edges)
    m_plus = ergodic.time_average_measure(
        UNIT, Constant(1.0), 2.0, SimConfig(dt=1e-3, t_max=1e4, seed=100), edges
    )
    m_minus = ergodic.time_average_measure(
        UNIT, Constant(1.0), -2.0, SimConfig(dt=1e-3, t_max=1e4, seed=103), edges
    )
    l1_oracle = m_plus.l1_distance(oracle)
    check(6, f"histogram within L1 {l1_oracle:.4f} <= 0.05 of the reference "
             "density", l1_oracle <= 0.05)
    l1_pair = m_plus.l1_distance(m_minus.mass)
    check(6, f"independent runs from +-2 agree within L1 {l1_pair:.4f} <= 0.05",
          l1_pair <= 0.05)
    bound = ergodic.occupancy_lower_bound(1.0, 3.0, 1.0)
    ok = (m_plus.occupied_fraction >= bound
          and abs(bound - 0.28826) <= 5e-6)
    check(6, f"occupation of [-3,3] ({m_plus.occupied_fraction:.6f}) at least "
             f"the analytic bound {bound:.5f}", ok)


def test_criterion_7_phi_machinery():
    rb2 = math.exp(-0.5)
    rates = [
        decay.LinearCapped(1.0),
        decay.LinearCapped(0.25),
        decay.SuperGeometric(2.0, rb2),
        decay.SuperGeometric(3.0, 0.3),
        decay.PowerCapped(0.5, 1.0),
    ]
    ok = True
    for rate in rates:
        tr = decay.PhiTransform(rate, 1.3)
        for t in np.geomspace(1e-4, 1e3, 17):
            closed = decay.phi_c(tr, float(t), method="closed")
            quadr = decay.phi_c(tr, float(t), method="quadrature")
            ok &= abs(closed - quadr) <= 1e-9 * max(1.0, abs(closed))
    check(7, "adaptive quadrature matches the closed forms to 1e-9", ok)

    ok = True
    for rate in (decay.LinearCapped(1.0), decay.SuperGeometric(2.0, rb2)):
        tr = decay.PhiTransform(rate, 1.3)
        for t in np.geomspace(1e-6, 1e3, 25):
            back = decay.phi_c_inverse(tr, decay.phi_c(tr, float(t)))
            ok &= abs(back - t) <= 1e-9 * t
    check(7, "inverse-of-forward round-trips to 1e-9 relative", ok)

    tr = decay.PhiTransform(decay.LinearCapped(1.0), 2.0)
    ok = all(
        abs(decay.envelope(tr, 0.5, t) - 0.5 * math.exp(-2.0 * t))
        <= 1e-8 * 0.5 * math.exp(-2.0 * t)
        for t in (0.0, 0.25, 1.0, 3.0)
    )
    check(7, "linear-capped envelope is exactly exponential below the cap", ok)

    fits = [
        (decay.LinearCapped(1.0), 2.0, 0.5, np.linspace(0.5, 20, 40), 1.0, 2.0),
        (decay.SuperGeometric(2.0, rb2), 1.0, rb2, np.linspace(0.5, 8, 40),
         2.0, 1.0),
        (decay.SuperGeometric(3.0, math.exp(1 / 3 - 1)), 0.5, 0.2,
         np.linspace(0.5, 10, 40), 3.0, 0.125),
    ]
    ok = True
    for rate, c, v0, grid, b_want, r_want in fits:
        fit = decay.asymptotic_rate(decay.PhiTransform(rate, c), v0, grid)
        ok &= fit.conclusive
        ok &= abs(fit.exponent_order - b_want) <= 0.01 * b_want
        ok &= abs(fit.rate - r_want) <= 0.01 * r_want
    check(7, "fitted (order, rate) recover (beta, c^beta) within 1% for "
             "beta in {1, 2, 3}", ok)

    ok = (
        not decay.onto_check(decay.PowerCapped(0.5, 1.0)).diverges_at_zero
        and not decay.onto_check(decay.PowerCapped(0.9, 2.0)).diverges_at_zero
        and decay.onto_check(decay.LinearCapped(1.0)).holds
        and decay.onto_check(decay.SuperGeometric(2.0, rb2)).holds
        and decay.onto_check(decay.SmoothedConcave(decay.LinearCapped(1.0))).holds
    )
    check(7, "onto certificate false exactly for the power-law rates", ok)


def test_criterion_8_reproducibility(tmp_path, capsys):
    def run(name, *argv):
        out_dir = tmp_path / name
        rc = cli.main([*argv, "--out", str(out_dir)])
        captured = capsys.readouterr()
        files = {
            p.name: p.read_bytes() for p in sorted(out_dir.iterdir())
        }
        return rc, captured.out, files

    commands = {
        "simulate": ("simulate", "--x0", "0.5", "--t_max", "2", "--seed", "9"),
        "exit-time": ("exit-time", "--mode", "annulus", "--x0", "0.3",
                      "--n_paths", "60", "--t_max", "50", "--seed", "9",
                      "--parallelism", "3"),
        "invariant": ("invariant", "--t_max", "40", "--bins_n", "50",
                      "--seed", "9"),
        "envelope": ("envelope", "--rate", "supergeometric", "--rate_beta",
                     "2", "--c", "1", "--v0", "0.5", "--t_lo", "0.5",
                     "--t_hi", "8", "--t_n", "40"),
        "classify": ("classify", "--sigma", "linear", "--sigma_slope", "2",
                     "--x_e", "0"),
        "decay-rate": ("decay-rate", "--sigma", "linear", "--sigma_root", "1",
                       "--sigma_slope", "0.5", "--x_e", "1", "--alpha", "2"),
    }
    ok = True
    for name, argv in commands.items():
        rc1, out1, files1 = run(name + "_a", *argv)
        rc2, out2, files2 = run(name + "_b", *argv)
        same_stdout = out1.replace(name + "_a", "X") == out2.replace(name + "_b", "X")
        ok &= rc1 == rc2 and same_stdout and files1 == files2
    check(8, "every command re-run with identical config and seed is "
             "byte-identical (parallel batch included)", ok)
