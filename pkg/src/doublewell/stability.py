"""Equilibrium classification, moment-decay rates and drift-condition checks.

The classifier decides from the behaviour of sigma(x)/|x - x_e| near a
degenerate root x_e which stability regime applies:

* at the center (x_e = 0), a root-slope limsup below sqrt(2) means the
  equilibrium is unstable, a liminf above sqrt(2) means asymptotic
  stability in probability, and an exactly-linear critical coefficient
  sqrt(2) near the root is its own (unstable) case;
* the wells x_e = +-sqrt(a/b) are asymptotically stable in probability,
  with an explicit exponential moment-decay constant.

Root slopes are computed in closed form per diffusion family; the sampled
epsilon-grid diagnostics are attached as a cross-check only, since a pure
grid extrapolation of a limit at 0 is fragile.  The regime where the limsup
and liminf straddle sqrt(2) without the exact critical structure is
declared inconclusive; the theory does not cover it.  Detection of the
critical case is structural (family parameters), never a floating-point
comparison of numerical limits against sqrt(2).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .model import (
    SQRT2,
    AssumptionError,
    Constant,
    DiffusionSpec,
    LinearAtRoot,
    Oscillatory,
    PolynomialBounded,
    PotentialParams,
    TabulatedLipschitz,
    drift,
)
from .sde import SimConfig, path_generator
from .decay import RateFunction

__all__ = [
    "KappaEstimate",
    "StabilityCase",
    "StabilityVerdict",
    "DecayRate",
    "MomentDecayReport",
    "DriftCheckResult",
    "SignConditionReport",
    "kappa_at_root",
    "classify",
    "decay_rate",
    "moment_decay_check",
    "pathwise_log_slopes",
    "lyapunov_drift_check",
    "sign_condition_check",
]


# ---------------------------------------------------------------------------
# root-slope estimation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KappaEstimate:
    """Closed-form root-slope limits plus sampled shrinking-radius diagnostics.

    ``per_eps_sup[k]`` is the sampled sup of sigma(x)/|x - x_e| over
    0 < |x - x_e| < eps_grid[k]; sups are non-increasing and infs
    non-decreasing as the radius shrinks.  The limsup/liminf fields are the
    authoritative closed-form values.
    """

    limsup_at_root: float
    liminf_at_root: float
    eps_grid: np.ndarray
    per_eps_sup: np.ndarray
    per_eps_inf: np.ndarray


def kappa_at_root(
    d: DiffusionSpec,
    x_e: float,
    *,
    n_eps: int = 40,
    samples_per_octave: int = 160,
) -> KappaEstimate:
    """Limsup/liminf of sigma(x)/|x - x_e| at a degenerate root.

    Requires sigma(x_e) == 0.  The epsilon grid is dyadic, eps_k = 2^-k for
    k = 1..n_eps; ratios are sampled on a geometric radius grid on both
    sides of the root.
    """
    if d(x_e) != 0.0:
        raise AssumptionError(f"sigma({x_e!r}) = {d(x_e)!r} != 0; not a root")
    limsup, liminf = d.root_slopes(x_e)

    eps = 2.0 ** -np.arange(1, n_eps + 1, dtype=float)
    radii = np.geomspace(2.0 ** -(n_eps + 1), 0.5, n_eps * samples_per_octave)
    xs = np.concatenate([x_e - radii, x_e + radii])
    rr = np.concatenate([radii, radii])
    order = np.argsort(rr, kind="stable")
    rr = rr[order]
    ratios = d.values(xs)[order] / rr
    run_max = np.maximum.accumulate(ratios)
    run_min = np.minimum.accumulate(ratios)
    # sup over radii strictly below each epsilon
    idx = np.searchsorted(rr, eps, side="left") - 1
    per_sup = np.where(idx >= 0, run_max[np.maximum(idx, 0)], -np.inf)
    per_inf = np.where(idx >= 0, run_min[np.maximum(idx, 0)], np.inf)
    return KappaEstimate(limsup, liminf, eps, per_sup, per_inf)


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------


class StabilityCase(enum.Enum):
    UNSTABLE_BELOW_SQRT2 = "UnstableBelowSqrt2"
    UNSTABLE_CRITICAL_LINEAR = "UnstableCriticalLinear"
    ASYMPTOTICALLY_STABLE_IN_PROB = "AsymptoticallyStableInProb"
    STABLE_NONDEGENERATE_WELL = "StableNondegenerateWell"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class StabilityVerdict:
    case: StabilityCase
    x_e: float
    evidence: "KappaEstimate | DecayRate | None"

    @property
    def definitive(self) -> bool:
        return self.case is not StabilityCase.INCONCLUSIVE

    def to_report(self) -> dict[str, str]:
        rep = {"case": self.case.value, "x_e": format(self.x_e, ".17g")}
        ev = self.evidence
        if isinstance(ev, KappaEstimate):
            rep["limsup_at_root"] = format(ev.limsup_at_root, ".17g")
            rep["liminf_at_root"] = format(ev.liminf_at_root, ".17g")
        elif isinstance(ev, DecayRate):
            rep["alpha"] = format(ev.alpha, ".17g")
            rep["c"] = format(ev.c, ".17g")
        return rep


def classify(
    d: DiffusionSpec, x_e: float, p: PotentialParams = PotentialParams()
) -> StabilityVerdict:
    """Decide the stability case of a degenerate equilibrium x_e.

    x_e must be one of the exact values returned by ``p.equilibria()`` and a
    root of sigma.
    """
    eqs = p.equilibria()
    if x_e not in eqs:
        raise ValueError(f"x_e={x_e!r} is not an equilibrium of the potential {eqs}")
    if d(x_e) != 0.0:
        raise AssumptionError(f"sigma({x_e!r}) != 0: no degenerate equilibrium there")
    if x_e != 0.0:
        return StabilityVerdict(
            StabilityCase.STABLE_NONDEGENERATE_WELL, x_e, decay_rate(d, x_e, 1.0, p=p)
        )
    ke = kappa_at_root(d, x_e)
    slope = d.linear_slope_at_root(x_e)
    if slope is not None and slope == SQRT2:
        case = StabilityCase.UNSTABLE_CRITICAL_LINEAR
    elif ke.limsup_at_root < SQRT2:
        case = StabilityCase.UNSTABLE_BELOW_SQRT2
    elif ke.liminf_at_root > SQRT2:
        case = StabilityCase.ASYMPTOTICALLY_STABLE_IN_PROB
    else:
        case = StabilityCase.INCONCLUSIVE
    return StabilityVerdict(case, x_e, ke)


# ---------------------------------------------------------------------------
# moment-decay rate at a well
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecayRate:
    """Exponential moment-decay certificate at a well equilibrium.

    ``c = alpha * min(grid_inf, tail_inf)`` where the two infima cover a
    geometric grid near the well (boundary limit included in closed form)
    and an analytic tail bound beyond a family-specific radius.  The
    sandwich ``bound_lower <= c/alpha <= bound_upper`` is attached whenever
    the corresponding local-slope condition applies; bounds are in c/alpha
    units.  ``c <= 0`` means no exponential certificate at this alpha (the
    object still reports the computed value rather than failing).
    """

    alpha: float
    c: float
    grid_inf: float
    tail_inf: float
    bound_lower: float | None
    bound_upper: float | None

    @property
    def certificate(self) -> bool:
        return self.c > 0.0

    def to_report(self) -> dict[str, str]:
        rep = {
            "alpha": format(self.alpha, ".17g"),
            "c": format(self.c, ".17g"),
            "grid_inf": format(self.grid_inf, ".17g"),
            "tail_inf": format(self.tail_inf, ".17g"),
            "certificate": "yes" if self.certificate else "no-exponential-certificate",
        }
        if self.bound_lower is not None:
            rep["bound_lower"] = format(self.bound_lower, ".17g")
            rep["bound_upper"] = format(self.bound_upper, ".17g")
        return rep


def _bounded_tail_radius(sup_sigma: float, thr: float, x_e2: float) -> float:
    """Smallest u >= 2 with sup_sigma^2 <= thr^2 * x_e^4 * (u-1)^2 u^2.

    Solves u(u-1) = sup_sigma/(thr*x_e^2) in closed form.
    """
    if sup_sigma == 0.0:
        return 2.0
    w = sup_sigma / (thr * x_e2)
    return max(2.0, 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * w)))


def _poly_tail_radius(coeffs: Sequence[float], thr: float, x_abs_e: float) -> float:
    """Tail radius for |p(x)| <= thr*|x - x_e|*|x| via the coefficient bound
    |p(x)| <= sum |c_i| |x|^i (degree <= 2)."""
    c = [abs(v) for v in coeffs] + [0.0, 0.0, 0.0]
    x_e2 = x_abs_e * x_abs_e
    A = thr * x_e2 - c[2] * x_e2
    B = thr * x_e2 + c[1] * x_abs_e
    C = c[0]
    if A <= 0.0:
        raise AssumptionError(
            "quadratic coefficient too large for the required tail condition"
        )
    root = (B + math.sqrt(B * B + 4.0 * A * C)) / (2.0 * A)
    return max(2.0, root)


def decay_rate(
    d: DiffusionSpec,
    x_e: float,
    alpha: float,
    p: PotentialParams = PotentialParams(),
    *,
    n_grid: int = 100_000,
) -> DecayRate:
    """Decay constant c for E|X_t - x_e|^alpha <= |x0 - x_e|^alpha e^{-ct}.

    c = alpha * inf over {x : x*x_e > a/b} of

        (b/lam) x (x + x_e) - (alpha - 1) sigma(x)^2 / (2 (x - x_e)^2).

    The infimum is certified by a geometric grid up to a family-specific
    tail radius (plus the closed-form boundary limit at x -> x_e) and an
    analytic lower bound beyond it.  For alpha > 2 the strengthened tail
    condition (growth ratio below sqrt(2/(alpha-1))) is required.
    """
    if not (math.isfinite(alpha) and alpha > 0.0):
        raise ValueError("alpha must be a positive finite real")
    w = p.well()
    if abs(x_e) != w:
        raise ValueError(f"x_e must be one of the wells +-{w!r}")
    if d(x_e) != 0.0:
        raise AssumptionError("sigma must vanish at the well")
    coef = p.b / p.lam
    base = 2.0 * p.a / p.lam
    x_e2 = x_e * x_e

    thr = math.sqrt(2.0 * coef) if alpha <= 2.0 else math.sqrt(2.0 * coef / (alpha - 1.0))
    if isinstance(d, PolynomialBounded):
        u_tail = _poly_tail_radius(d.coeffs, thr, abs(x_e))
    else:
        sup_sigma = _global_sup(d)
        if not math.isfinite(sup_sigma):
            raise AssumptionError("family has no usable tail bound")
        u_tail = _bounded_tail_radius(sup_sigma, thr, x_e2)

    if alpha > 2.0:
        tail_inf = coef * x_e2 * u_tail
    elif alpha > 1.0:
        tail_inf = coef * x_e2 * ((2.0 - alpha) * u_tail * u_tail + u_tail)
    else:
        # the sigma term only helps; x(x+x_e) alone bounds the tail
        tail_inf = coef * x_e2 * (u_tail * u_tail + u_tail)

    # geometric grid on (1, u_tail]; x = x_e * u
    spacing = np.geomspace(1e-12, u_tail - 1.0, n_grid)
    u = 1.0 + spacing
    x = x_e * u
    sig = d.values(x)
    g = coef * x * (x + x_e) - (alpha - 1.0) * sig * sig / (2.0 * (x - x_e) ** 2)
    ls, li = d.root_slopes(x_e)
    if alpha > 1.0:
        boundary = base - 0.5 * (alpha - 1.0) * ls * ls
    elif alpha < 1.0:
        boundary = base + 0.5 * (1.0 - alpha) * li * li
    else:
        boundary = base
    grid_inf = min(float(np.min(g)), boundary)
    c = alpha * min(grid_inf, tail_inf)

    lower = upper = None
    if alpha <= 1.0:
        lower = base
        upper = base + 0.5 * (1.0 - alpha) * ls * ls
    else:
        ratio = sig / np.abs(x - x_e)
        beta_band = max(float(np.max(ratio)), ls)
        if beta_band < math.sqrt(2.0 * base / (alpha - 1.0)):
            lower = base - 0.5 * (alpha - 1.0) * beta_band * beta_band
            upper = base
    return DecayRate(alpha, c, grid_inf, tail_inf, lower, upper)


def _global_sup(d: DiffusionSpec) -> float:
    """Certified sup of sigma over the line for the bounded families."""
    if isinstance(d, Constant):
        return d.s
    if isinstance(d, LinearAtRoot):
        return d.kappa * d.cap
    if isinstance(d, Oscillatory):
        return d.hi * d.cap
    if isinstance(d, TabulatedLipschitz):
        return max(d.vals)
    return math.inf


# ---------------------------------------------------------------------------
# Monte Carlo moment-decay comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentDecayReport:
    alpha: float
    c: float
    times: np.ndarray
    estimates: np.ndarray
    std_errors: np.ndarray
    bounds: np.ndarray
    violations: np.ndarray  # True where estimate - 2*SE exceeds the bound

    @property
    def passed(self) -> bool:
        return not bool(np.any(self.violations))


def _accumulate_at_times(
    p: PotentialParams,
    d: DiffusionSpec,
    x0: float,
    cfg: SimConfig,
    n_paths: int,
    step_marks: Sequence[int],
    transform: Callable[[float], float],
) -> tuple[np.ndarray, np.ndarray]:
    """Per-mark mean and SE of transform(X_t) over n_paths paths.

    Paths are driven mark to mark so no full trajectories are stored.
    """
    kind, par = d.pack()
    sqrt_dt = math.sqrt(cfg.dt)
    milstein = cfg.scheme == "milstein"
    sums = np.zeros(len(step_marks))
    sq = np.zeros(len(step_marks))
    for k in range(n_paths):
        gen = path_generator(cfg.seed, k)
        x = x0
        prev = 0
        for j, mark in enumerate(step_marks):
            need = mark - prev
            while need > 0:
                mchunk = min(65536, need)
                noise = gen.standard_normal(mchunk)
                x, done, code, _ = kernels.run_path_chunk(
                    x, noise, cfg.dt, sqrt_dt, p.a, p.b, p.lam, kind, par,
                    milstein, kernels.RULE_NONE, 0.0, 0.0, 0.0,
                    cfg.truncation_radius, 0.0, 0.0, 1.0, None,
                )
                if code == kernels.STOP_NONFINITE:
                    raise RuntimeError(f"path {k} became non-finite")
                if code == kernels.STOP_TRUNCATION:
                    raise RuntimeError(f"path {k} hit the truncation radius")
                need -= done
            prev = mark
            v = transform(x)
            sums[j] += v
            sq[j] += v * v
    means = sums / n_paths
    var = np.maximum(sq / n_paths - means * means, 0.0)
    ses = np.sqrt(var / n_paths)
    return means, ses


def moment_decay_check(
    p: PotentialParams,
    d: DiffusionSpec,
    x_e: float,
    alpha: float,
    x0: float,
    times: Sequence[float],
    n_paths: int,
    cfg: SimConfig,
) -> MomentDecayReport:
    """Monte Carlo check of E|X_t - x_e|^alpha against the decay envelope.

    Requires x0 on the well's side with x0*x_e >= a/b and a strictly
    positive decay constant.  Report times are rounded to the step grid.
    """
    if x0 * x_e < p.a / p.b:
        raise ValueError("x0 must satisfy x0*x_e >= a/b")
    dr = decay_rate(d, x_e, alpha, p=p)
    if not dr.certificate:
        raise AssumptionError(f"no exponential certificate at alpha={alpha}")
    marks = sorted({max(1, int(round(t / cfg.dt))) for t in times})
    grid_times = np.array([m * cfg.dt for m in marks])
    if grid_times[-1] > cfg.t_max + 1e-12:
        raise ValueError("times exceed cfg.t_max")
    est, ses = _accumulate_at_times(
        p, d, x0, cfg, n_paths, marks, lambda x: abs(x - x_e) ** alpha
    )
    bounds = abs(x0 - x_e) ** alpha * np.exp(-dr.c * grid_times)
    violations = (est - 2.0 * ses) > bounds
    return MomentDecayReport(alpha, dr.c, grid_times, est, ses, bounds, violations)


def pathwise_log_slopes(
    p: PotentialParams,
    d: DiffusionSpec,
    x_e: float,
    x0: float,
    cfg: SimConfig,
    n_paths: int,
    *,
    fit_start: float = 0.25,
    sample_every: int = 100,
    resolution_floor: float = 1e-12,
) -> np.ndarray:
    """Least-squares slopes of ln|X_t - x_e| vs t on single paths.

    Used to probe the almost-sure exponential contraction toward a well:
    the slope should not exceed -c/alpha (checked by majority vote in the
    tests, with a small additive margin).  ``fit_start`` is the fraction of
    the horizon discarded as transient.  In double precision the distance
    |X - x_e| saturates at the ulp scale of x_e, which would flatten the
    fitted slope on long horizons; samples at or below ``resolution_floor``
    are therefore excluded.  Paths with fewer than four usable samples get
    a NaN slope.
    """
    kind, par = d.pack()
    sqrt_dt = math.sqrt(cfg.dt)
    milstein = cfg.scheme == "milstein"
    n = cfg.n_steps
    marks = list(range(sample_every, n + 1, sample_every))
    t_marks = np.array(marks, dtype=float) * cfg.dt
    log_floor = math.log(resolution_floor)
    slopes = np.empty(n_paths)
    for k in range(n_paths):
        gen = path_generator(cfg.seed, k)
        x = x0
        prev = 0
        vals = np.empty(len(marks))
        for j, mark in enumerate(marks):
            need = mark - prev
            while need > 0:
                mchunk = min(65536, need)
                noise = gen.standard_normal(mchunk)
                x, done, code, _ = kernels.run_path_chunk(
                    x, noise, cfg.dt, sqrt_dt, p.a, p.b, p.lam, kind, par,
                    milstein, kernels.RULE_NONE, 0.0, 0.0, 0.0,
                    cfg.truncation_radius, 0.0, 0.0, 1.0, None,
                )
                if code != kernels.STOP_NONE:
                    raise RuntimeError("unexpected stop during slope sampling")
                need -= done
            prev = mark
            vals[j] = math.log(max(abs(x - x_e), 1e-300))
        keep = (t_marks >= fit_start * cfg.t_max) & (vals > log_floor)
        if np.count_nonzero(keep) < 4:
            slopes[k] = math.nan
            continue
        slopes[k] = np.polyfit(t_marks[keep], vals[keep], 1)[0]
    return slopes


# ---------------------------------------------------------------------------
# drift-condition checkers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DriftCheckResult:
    passed: bool
    worst_margin: float
    worst_index: int


def lyapunov_drift_check(
    samples: Sequence[tuple[float, float]],
    rate: RateFunction,
    c: float,
) -> DriftCheckResult:
    """Check LV <= -c * phi(V) on supplied (V, LV) samples.

    Dimension-agnostic: callers compute V and LV however they like (e.g.
    via ``generator_apply`` in one dimension).  The margin of sample i is
    LV_i + c*phi(V_i); the check passes when every margin is <= 0.
    """
    if c <= 0.0:
        raise ValueError("c must be positive")
    worst = -math.inf
    worst_i = -1
    for i, (v, lv) in enumerate(samples):
        if not v > 0.0:
            raise ValueError(f"sample {i}: V must be positive, got {v!r}")
        margin = lv + c * rate(v)
        if margin > worst:
            worst = margin
            worst_i = i
    if worst_i < 0:
        raise ValueError("no samples supplied")
    return DriftCheckResult(worst <= 0.0, worst, worst_i)


@dataclass(frozen=True)
class SignConditionReport:
    passed: bool
    near_passed: bool
    near_worst_x: float
    near_worst_margin: float
    tail_sup: float
    tail_passed: bool


def sign_condition_check(
    b: "PotentialParams | Callable[[float], float]",
    x_e: float,
    c: float,
    r: float,
    gamma: float,
    *,
    n_grid: int = 4001,
    scan_radius: float = 50.0,
) -> SignConditionReport:
    """Verify the Hoelder sign conditions that yield a power-law drift bound.

    Conditions, with h(x) = sgn(x - x_e) * b(x):

    (i)  h(x) <= -c |x - x_e|^gamma for 0 < |x - x_e| <= r
         (checked on a geometric grid on both sides of x_e);
    (ii) sup_{|x - x_e| >= r} h(x) <= -c r^gamma.

    When ``b`` is a :class:`PotentialParams`, the tail sup in (ii) is exact
    (cubic critical points plus boundary).  For a general callable the sup
    is scanned up to ``scan_radius``; the caller asserts the tail behaviour
    beyond it.  A pass establishes the capped power-law drift condition for
    V(x) = |x - x_e| and hence the super-geometric envelopes obtained from
    it.
    """
    if not (0.0 < gamma < 1.0):
        raise ValueError("gamma must lie in (0, 1)")
    if c <= 0.0 or r <= 0.0:
        raise ValueError("c and r must be positive")

    if isinstance(b, PotentialParams):
        pp = b
        b_fn = lambda x: drift(pp, x)  # noqa: E731
        # exact tail sup: candidates are the band boundaries and the cubic
        # critical points +-sqrt(a/(3b)); h -> -inf in both tails
        cands = [x_e + r, x_e - r]
        xc = math.sqrt(pp.a / (3.0 * pp.b))
        for cand in (xc, -xc):
            if abs(cand - x_e) >= r:
                cands.append(cand)
        tail_sup = max(math.copysign(1.0, x - x_e) * b_fn(x) for x in cands)
    else:
        b_fn = b
        dist = np.geomspace(r, scan_radius, n_grid)
        vals = []
        for s in (1.0, -1.0):
            xs = x_e + s * dist
            vals.append(max(s * b_fn(x) for x in xs))
        tail_sup = max(vals)

    dist = np.geomspace(1e-12 * r, r, n_grid)
    worst_margin = -math.inf
    worst_x = x_e
    for s in (1.0, -1.0):
        for dd in dist:
            x = x_e + s * dd
            margin = s * b_fn(x) + c * dd**gamma
            if margin > worst_margin:
                worst_margin = margin
                worst_x = x
    near_ok = worst_margin <= 0.0
    tail_ok = tail_sup <= -c * r**gamma
    return SignConditionReport(
        near_ok and tail_ok, near_ok, worst_x, worst_margin, tail_sup, tail_ok
    )
