"""Invariant-measure estimation, exit-time statistics and occupancy bounds.

The invariant measure is estimated by the occupation fractions of a single
long path (rectangle rule on the step grid, after a burn-in).  Exit and
hitting times are Monte Carlo means compared one-sidedly against the
analytic upper bounds available in the normalized parameterization: the
bounds are certificates on the expectation, never treated as estimates,
and the comparison is reported invalid whenever any path failed to resolve
within the horizon.

The closed-form stationary density used as a reference (for non-vanishing
sigma) is the standard one-dimensional construction
pi(x) proportional to exp(2 * integral drift/sigma^2) / sigma^2; it is not
part of the stability theory itself and is included here as an independent
test oracle and reporting aid.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from . import kernels
from .model import DiffusionSpec, PotentialParams, drift_values
from .sde import (
    ExitAnnulus,
    HitInterval,
    SimConfig,
    StoppingRule,
    path_generator,
    run_batch,
)

__all__ = [
    "EmpiricalMeasure",
    "ExitStats",
    "time_average_measure",
    "stationary_density",
    "stationary_bin_masses",
    "occupancy_lower_bound",
    "mean_hitting_time",
    "annulus_exit_time",
    "hitting_time_bound",
    "annulus_exit_bound",
    "measure_to_csv",
    "exit_stats_to_csv",
]


# ---------------------------------------------------------------------------
# time-average measure
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Occupation-fraction histogram of a post-burn-in path.

    ``mass`` is normalized over the in-range samples (sums to one);
    ``occupied_fraction`` is the fraction of post-burn-in time spent inside
    the binned range.  ``bin_se`` are batch-means standard errors per bin,
    and ``block_fractions`` (n_blocks x n_bins) are the per-block occupation
    fractions they derive from, kept so callers can build standard errors
    for bin *contrasts* (differences of correlated bins) correctly.
    """

    bin_edges: np.ndarray
    mass: np.ndarray
    bin_se: np.ndarray
    block_fractions: np.ndarray
    total_time: float
    burn_in: float
    occupied_fraction: float
    n_samples: int

    def l1_distance(self, other_mass: np.ndarray) -> float:
        other = np.asarray(other_mass, dtype=float)
        if other.shape != self.mass.shape:
            raise ValueError("mass vectors have different lengths")
        return float(np.abs(self.mass - other).sum())


def time_average_measure(
    p: PotentialParams,
    d: DiffusionSpec,
    x0: float,
    cfg: SimConfig,
    bin_edges: np.ndarray,
    burn_in: float | None = None,
    *,
    path_index: int = 0,
    n_blocks: int = 16,
    allow_degenerate: bool = False,
) -> EmpiricalMeasure:
    """Histogram the occupation fractions of one long path.

    Unique ergodicity requires sigma bounded away from zero on an interval
    covering the equilibria; if that fails the estimate may depend on the
    starting point, so the call is rejected unless ``allow_degenerate``
    (which downgrades the rejection to a warning).  ``burn_in`` defaults to
    a tenth of the horizon.
    """
    edges = np.asarray(bin_edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or not np.all(np.diff(edges) > 0):
        raise ValueError("bin_edges must be a strictly increasing 1-d array")
    w = p.well()
    if d.inf_abs(-w, w) <= 0.0:
        msg = (
            "sigma is not bounded away from zero on an interval containing "
            "the equilibria; the time average may not identify a unique "
            "invariant measure"
        )
        if not allow_degenerate:
            raise ValueError(msg + " (pass allow_degenerate=True to override)")
        warnings.warn(msg, stacklevel=2)
    burn = 0.1 * cfg.t_max if burn_in is None else float(burn_in)
    if not (0.0 <= burn < cfg.t_max):
        raise ValueError("burn_in must lie in [0, t_max)")

    kind, par = d.pack()
    sqrt_dt = math.sqrt(cfg.dt)
    milstein = cfg.scheme == "milstein"
    n = cfg.n_steps
    burn_idx = int(math.ceil(burn / cfg.dt))
    n_keep = n - burn_idx + 1
    if n_keep < n_blocks:
        raise ValueError("horizon too short for the requested block count")
    block_len = n_keep // n_blocks

    nbins = edges.size - 1
    counts = np.zeros(nbins)
    block_counts = np.zeros((n_blocks, nbins))
    block_totals = np.zeros(n_blocks)
    n_inside = 0

    def _tally(vals: np.ndarray, start_sample: int) -> None:
        nonlocal n_inside
        h, _ = np.histogram(vals, bins=edges)
        counts[:] += h
        n_inside += int(h.sum())
        # split this span across batch-means blocks
        offs = np.arange(vals.size)
        blocks = np.minimum((start_sample + offs - burn_idx) // block_len, n_blocks - 1)
        for bl in np.unique(blocks):
            sel = blocks == bl
            hb, _ = np.histogram(vals[sel], bins=edges)
            block_counts[bl] += hb
            block_totals[bl] += hb.sum()

    gen = path_generator(cfg.seed, path_index)
    buf = np.empty(1 << 16)
    x = x0
    i = 0
    if burn_idx == 0:
        _tally(np.array([x0]), 0)
    while i < n:
        m = min(buf.size, n - i)
        noise = gen.standard_normal(m)
        x, k, code, _ = kernels.run_path_chunk(
            x, noise, cfg.dt, sqrt_dt, p.a, p.b, p.lam, kind, par, milstein,
            kernels.RULE_NONE, 0.0, 0.0, 0.0, cfg.truncation_radius,
            0.0, 0.0, 1.0, buf[:m],
        )
        if code == kernels.STOP_NONFINITE:
            raise RuntimeError(f"path became non-finite at t={(i + k) * cfg.dt:.6g}")
        if code == kernels.STOP_TRUNCATION:
            raise RuntimeError(
                f"path hit the truncation radius at t={(i + k) * cfg.dt:.6g}; "
                "the time average is unusable"
            )
        # samples in this chunk have indices i+1 .. i+k
        first_keep = max(burn_idx, i + 1)
        if first_keep <= i + k:
            off = first_keep - (i + 1)
            _tally(buf[off:k], first_keep)
        i += k

    total = n_keep
    if n_inside == 0:
        raise RuntimeError("no samples fell inside the binned range")
    mass = counts / n_inside
    frac = np.divide(
        block_counts,
        np.maximum(block_totals, 1.0)[:, None],
        out=np.zeros_like(block_counts),
        where=block_totals[:, None] > 0,
    )
    bin_se = np.std(frac, axis=0, ddof=1) / math.sqrt(n_blocks)
    return EmpiricalMeasure(
        bin_edges=edges,
        mass=mass,
        bin_se=bin_se,
        block_fractions=frac,
        total_time=cfg.t_max,
        burn_in=burn,
        occupied_fraction=n_inside / total,
        n_samples=total,
    )


# ---------------------------------------------------------------------------
# stationary-density reference (test oracle)
# ---------------------------------------------------------------------------


def stationary_density(p: PotentialParams, d: DiffusionSpec, xs: np.ndarray) -> np.ndarray:
    """Reference stationary density on the grid, normalized over its range.

    Standard one-dimensional construction: density proportional to
    exp(2 * integral_0^x drift/sigma^2) / sigma^2, computed by cumulative
    quadrature on the supplied grid.  Requires sigma > 0 on the grid.
    Included as an independent oracle for tests and reports; not part of
    the stability machinery.
    """
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 1 or xs.size < 3 or not np.all(np.diff(xs) > 0):
        raise ValueError("xs must be a strictly increasing 1-d grid")
    sig = d.values(xs)
    if np.any(sig <= 0.0):
        raise ValueError("sigma must be strictly positive on the grid")
    integrand = 2.0 * drift_values(p, xs) / (sig * sig)
    # anchor the antiderivative at the grid point closest to 0
    psi = cumulative_trapezoid(integrand, xs, initial=0.0)
    psi -= psi[np.argmin(np.abs(xs))]
    dens = np.exp(psi - psi.max()) / (sig * sig)
    norm = np.trapezoid(dens, xs)
    return dens / norm


def stationary_bin_masses(
    p: PotentialParams, d: DiffusionSpec, edges: np.ndarray, *, subdiv: int = 32
) -> np.ndarray:
    """Reference probability mass per bin (normalized over the bin range)."""
    edges = np.asarray(edges, dtype=float)
    fine = np.unique(
        np.concatenate(
            [np.linspace(a, b, subdiv + 1) for a, b in zip(edges[:-1], edges[1:])]
        )
    )
    dens = stationary_density(p, d, fine)
    masses = np.empty(edges.size - 1)
    for j in range(edges.size - 1):
        sel = (fine >= edges[j]) & (fine <= edges[j + 1])
        masses[j] = np.trapezoid(dens[sel], fine[sel])
    return masses / masses.sum()


# ---------------------------------------------------------------------------
# occupancy lower bound
# ---------------------------------------------------------------------------


def occupancy_lower_bound(delta: float, r: float, sigma_bar: float) -> float:
    """Lower bound on the long-run fraction of time spent in [-r, r].

    Valid for 0 < delta < 2, r > 2/sqrt(delta) and sigma_bar an upper bound
    for sup of sigma on [-r, r]; tends to one as delta -> 2 and r -> inf.
    """
    if not (0.0 < delta < 2.0):
        raise ValueError("delta must lie in (0, 2)")
    if not (r > 2.0 / math.sqrt(delta)):
        raise ValueError("r must exceed 2/sqrt(delta)")
    if sigma_bar < 0.0:
        raise ValueError("sigma_bar must be nonnegative")
    r2 = r * r
    r4 = r2 * r2
    num = 0.5 * delta * r4
    return num / (num + 2.0 * r2 + sigma_bar * sigma_bar + (2.0 - delta) * r4)


# ---------------------------------------------------------------------------
# exit-time statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExitStats:
    """Per-path exit/hitting times with the applicable analytic bound.

    ``times`` is NaN for unresolved paths; ``mean``/``se``/``max`` are over
    resolved paths only.  ``bound_valid`` is False when unresolved paths
    make the one-sided comparison against ``bound`` meaningless.
    """

    n_paths: int
    times: np.ndarray
    sides: tuple[str, ...]
    mean: float
    se: float
    max: float
    n_timeout: int
    bound: float | None

    @property
    def bound_valid(self) -> bool:
        return self.bound is not None and self.n_timeout == 0

    def satisfies_bound(self) -> bool:
        """One-sided Monte Carlo check: mean - 2*SE <= bound."""
        if not self.bound_valid:
            return False
        return self.mean - 2.0 * self.se <= self.bound


def _is_unit(p: PotentialParams) -> bool:
    return p.a == 1.0 and p.b == 1.0 and p.lam == 1.0


def hitting_time_bound(x0: float, eps: float) -> float:
    """Expected-time bound |x0| / ((1+eps)^3 - (1+eps)) for reaching
    (-1-eps, 1+eps) from outside (normalized parameters)."""
    if not (0.0 < eps < 1.0):
        raise ValueError("eps must lie in (0, 1)")
    one = 1.0 + eps
    return abs(x0) / (one**3 - one)


def annulus_exit_bound(x_e: float, eps1: float, eps2: float) -> float:
    """Expected-time bound for leaving {eps1 < |x - x_e| < eps2}
    (normalized parameters; x_e an equilibrium).

    The denominator is min(eps1 - eps1^3, eps2 - eps2^3); the numerator is
    eps2 - eps1 at the center equilibrium and eps2 at the wells.
    """
    if not (0.0 < eps1 < eps2 < 1.0):
        raise ValueError("need 0 < eps1 < eps2 < 1")
    if x_e not in (-1.0, 0.0, 1.0):
        raise ValueError("x_e must be a normalized equilibrium (-1, 0, 1)")
    denom = min(eps1 - eps1**3, eps2 - eps2**3)
    num = eps2 - eps1 if x_e == 0.0 else eps2
    return num / denom


def _exit_stats(
    p: PotentialParams,
    d: DiffusionSpec,
    x0: float,
    cfg: SimConfig,
    rule: StoppingRule,
    n_paths: int,
    parallelism: int,
    side_fn,
    bound: float | None,
) -> ExitStats:
    br = run_batch(p, d, x0, cfg, rule, n_paths, ref=x0, parallelism=parallelism)
    hit = br.stop_code == kernels.STOP_RULE
    times = np.where(hit, br.stop_time, np.nan)
    sides = tuple(
        side_fn(br.stop_state[k]) if hit[k] else "none" for k in range(n_paths)
    )
    resolved = times[hit]
    n_timeout = int(n_paths - hit.sum())
    if resolved.size:
        mean = float(np.mean(resolved))
        se = (
            float(np.std(resolved, ddof=1) / math.sqrt(resolved.size))
            if resolved.size > 1
            else 0.0
        )
        tmax = float(np.max(resolved))
    else:
        mean = se = tmax = math.nan
    return ExitStats(n_paths, times, sides, mean, se, tmax, n_timeout, bound)


def mean_hitting_time(
    p: PotentialParams,
    d: DiffusionSpec,
    x0: float,
    target: tuple[float, float],
    cfg: SimConfig,
    n_paths: int,
    *,
    parallelism: int = 1,
) -> ExitStats:
    """Monte Carlo mean time to enter the open interval ``target``.

    A starting point already inside the target hits at time zero.  When the
    target is the symmetric interval (-1-eps, 1+eps) under normalized
    parameters, the analytic expected-time bound is attached.
    """
    lo, hi = target
    rule = HitInterval(lo, hi)
    mid = 0.5 * (lo + hi)
    bound = None
    if _is_unit(p) and lo == -hi and hi > 1.0 and hi < 2.0 and not (lo < x0 < hi):
        bound = hitting_time_bound(x0, hi - 1.0)
    return _exit_stats(
        p, d, x0, cfg, rule, n_paths, parallelism,
        lambda s: "lower" if s <= mid else "upper", bound,
    )


def annulus_exit_time(
    p: PotentialParams,
    d: DiffusionSpec,
    x_e: float,
    eps1: float,
    eps2: float,
    x0: float,
    cfg: SimConfig,
    n_paths: int,
    *,
    parallelism: int = 1,
) -> ExitStats:
    """Monte Carlo mean time to leave the annulus {eps1 < |x - x_e| < eps2}.

    Requires eps1 < |x0 - x_e| < eps2 < 1 with x_e an equilibrium; under
    normalized parameters the analytic bound for the matching case (center
    vs well) is attached.
    """
    if not (0.0 < eps1 < abs(x0 - x_e) < eps2 < 1.0):
        raise ValueError("need 0 < eps1 < |x0 - x_e| < eps2 < 1")
    if x_e not in p.equilibria():
        raise ValueError("x_e must be an equilibrium of the potential")
    rule = ExitAnnulus(x_e, eps1, eps2)
    bound = annulus_exit_bound(x_e, eps1, eps2) if _is_unit(p) else None
    rmid = 0.5 * (eps1 + eps2)
    return _exit_stats(
        p, d, x0, cfg, rule, n_paths, parallelism,
        lambda s: "inner" if abs(s - x_e) <= rmid else "outer", bound,
    )


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------


def measure_to_csv(m: EmpiricalMeasure, path) -> None:
    """Write the histogram as ``bin_lo,bin_hi,mass`` rows."""
    with open(path, "w", newline="") as fh:
        fh.write("bin_lo,bin_hi,mass\n")
        for j in range(m.mass.size):
            fh.write(
                f"{format(m.bin_edges[j], '.17g')},"
                f"{format(m.bin_edges[j + 1], '.17g')},"
                f"{format(m.mass[j], '.17g')}\n"
            )


def exit_stats_to_csv(st: ExitStats, path) -> None:
    """Write per-path results as ``path,exit_time,exit_side`` rows."""
    with open(path, "w", newline="") as fh:
        fh.write("path,exit_time,exit_side\n")
        for k in range(st.n_paths):
            fh.write(f"{k},{format(st.times[k], '.17g')},{st.sides[k]}\n")
