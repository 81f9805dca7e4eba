"""Time-discretized strong simulation with stopping rules and seeded batches.

Discretization is fixed-step Euler-Maruyama or Milstein on the grid
t_i = i*dt.  Stopping conditions are evaluated at grid points only (no
Brownian-bridge correction), so recorded exit times carry a resolution of
one step and an O(sqrt(dt)) early/late-exit bias; reports treat them as
grid-time quantities.  Behaviour near a degenerate equilibrium (drift and
sigma both vanishing) inherits the discretization bias as well; it is
reported, not corrected.

Randomness contract
-------------------
Path k of a batch draws its gaussians from ``Philox(key=(seed, k))``, a
stateless mixing of the base seed and the path index.  This makes every
path reproducible in isolation, independent of batch partitioning,
chunking, thread scheduling and backend, and makes ``n_paths=1`` coincide
with :func:`simulate` (which uses path index 0 by default).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .model import (
    AssumptionError,
    DiffusionSpec,
    PotentialParams,
    validate_assumptions,
)

__all__ = [
    "SimConfig",
    "StoppingRule",
    "ExitInterval",
    "ExitAnnulus",
    "HitInterval",
    "StopInfo",
    "Trajectory",
    "BatchResult",
    "BlowUpError",
    "step",
    "simulate",
    "run_batch",
    "integrate_with_noise",
    "path_generator",
    "trajectory_to_csv",
    "batch_to_csv",
]

_CHUNK = 1 << 16  # gaussians generated per kernel call

_SCHEMES = ("euler", "milstein")


class BlowUpError(RuntimeError):
    """A path became non-finite before hitting the truncation radius."""


@dataclass(frozen=True)
class SimConfig:
    """Fixed-step simulation configuration.

    ``truncation_radius`` is the safety device stopping any path whose
    magnitude reaches it; with an admissible diffusion it should never
    trigger (the dynamics is non-explosive) and doing so is reported as a
    stop in its own right.
    """

    dt: float
    t_max: float
    scheme: str = "euler"
    seed: int = 0
    truncation_radius: float = 50.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.dt) and self.dt > 0.0):
            raise ValueError("dt must be a positive finite real")
        if not (math.isfinite(self.t_max) and self.t_max > 0.0):
            raise ValueError("t_max must be a positive finite real")
        if self.dt >= self.t_max:
            raise ValueError("dt must be smaller than t_max")
        if self.scheme not in _SCHEMES:
            raise ValueError(f"scheme must be one of {_SCHEMES}")
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must fit in 64 unsigned bits")
        if not (math.isfinite(self.truncation_radius) and self.truncation_radius > 0.0):
            raise ValueError("truncation_radius must be positive")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))


class StoppingRule:
    """Base class of grid-point stopping conditions."""

    name = "none"

    def pack(self) -> tuple[int, float, float, float]:
        raise NotImplementedError


@dataclass(frozen=True)
class ExitInterval(StoppingRule):
    """Stop at the first grid time with x <= lo or x >= hi."""

    lo: float
    hi: float
    name = "exit-interval"

    def __post_init__(self) -> None:
        if not self.lo < self.hi:
            raise ValueError("need lo < hi")

    def pack(self):
        return kernels.RULE_EXIT_INTERVAL, self.lo, self.hi, 0.0


@dataclass(frozen=True)
class ExitAnnulus(StoppingRule):
    """Stop at the first grid time with |x - center| <= r1 or >= r2."""

    center: float
    r1: float
    r2: float
    name = "exit-annulus"

    def __post_init__(self) -> None:
        if not (0.0 < self.r1 < self.r2):
            raise ValueError("need 0 < r1 < r2")

    def pack(self):
        return kernels.RULE_EXIT_ANNULUS, self.center, self.r1, self.r2


@dataclass(frozen=True)
class HitInterval(StoppingRule):
    """Stop at the first grid time with lo < x < hi."""

    lo: float
    hi: float
    name = "hit-interval"

    def __post_init__(self) -> None:
        if not self.lo < self.hi:
            raise ValueError("need lo < hi")

    def pack(self):
        return kernels.RULE_HIT_INTERVAL, self.lo, self.hi, 0.0


def _pack_rule(rule: StoppingRule | None) -> tuple[int, float, float, float]:
    if rule is None:
        return kernels.RULE_NONE, 0.0, 0.0, 0.0
    return rule.pack()


@dataclass(frozen=True)
class StopInfo:
    stop_time: float
    stop_state: float
    rule_triggered: str


@dataclass(frozen=True)
class Trajectory:
    """One sample path on the grid, with seed provenance and stop metadata."""

    times: np.ndarray
    states: np.ndarray
    stopped: StopInfo | None
    seed: int
    path_index: int = 0

    def __len__(self) -> int:
        return len(self.times)

    @property
    def terminal(self) -> float:
        return float(self.states[-1])


@dataclass(frozen=True)
class BatchResult:
    """Per-path summaries of a Monte Carlo batch.

    ``sup_dev[k]`` is the running sup of |X_t - ref| along path k (grid
    points, initial state included).  ``stop_time``/``stop_state`` are NaN
    for paths that never stopped; ``stop_code`` distinguishes rule hits from
    truncation.
    """

    n_paths: int
    base_seed: int
    ref: float
    stop_time: np.ndarray
    stop_state: np.ndarray
    terminal: np.ndarray
    sup_dev: np.ndarray
    stop_code: np.ndarray

    def exceedance_fraction(self, threshold: float) -> tuple[float, float]:
        """(fraction of paths with sup_dev > threshold, binomial SE)."""
        f = float(np.mean(self.sup_dev > threshold))
        se = math.sqrt(f * (1.0 - f) / self.n_paths)
        return f, se

    @property
    def n_stopped(self) -> int:
        return int(np.sum(self.stop_code == kernels.STOP_RULE))

    def stop_time_stats(self) -> tuple[float, float, float, int]:
        """(mean, SE, max) over rule-stopped paths plus the unresolved count."""
        hit = self.stop_code == kernels.STOP_RULE
        n_timeout = int(self.n_paths - np.sum(hit))
        t = self.stop_time[hit]
        if t.size == 0:
            return math.nan, math.nan, math.nan, n_timeout
        mean = float(np.mean(t))
        se = float(np.std(t, ddof=1) / math.sqrt(t.size)) if t.size > 1 else 0.0
        return mean, se, float(np.max(t)), n_timeout


def path_generator(base_seed: int, path_index: int) -> np.random.Generator:
    """Independent gaussian stream for one path: Philox keyed by (seed, k)."""
    key = np.array([np.uint64(base_seed), np.uint64(path_index)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def step(
    p: PotentialParams,
    d: DiffusionSpec,
    x: float,
    dt: float,
    gaussian: float,
    scheme: str = "euler",
) -> float:
    """One update of the chosen scheme with an externally supplied draw.

    With sigma == 0 (or gaussian == 0 and Euler) this reduces to a
    deterministic Euler step.  A non-finite result raises
    :class:`BlowUpError`.
    """
    if scheme not in _SCHEMES:
        raise ValueError(f"scheme must be one of {_SCHEMES}")
    if not (math.isfinite(x) and math.isfinite(dt) and math.isfinite(gaussian)):
        raise ValueError("inputs must be finite")
    kind, par = d.pack()
    noise = np.array([gaussian], dtype=float)
    x_new, _, code, _ = kernels.run_path_chunk(
        x, noise, dt, math.sqrt(dt), p.a, p.b, p.lam, kind, par,
        scheme == "milstein", kernels.RULE_NONE, 0.0, 0.0, 0.0,
        math.inf, 0.0, 0.0, 1.0, None,
    )
    if code == kernels.STOP_NONFINITE:
        raise BlowUpError(f"non-finite state after one step from x={x!r}")
    return x_new


def _check_simulation_inputs(
    p: PotentialParams, d: DiffusionSpec, x0: float, cfg: SimConfig
) -> None:
    rep = validate_assumptions(d)
    if not rep.admissible:
        raise AssumptionError(
            f"diffusion family inadmissible: a2 margin {rep.a2_margin:.6g} < 0"
        )
    if not math.isfinite(x0):
        raise ValueError("x0 must be finite")
    if cfg.truncation_radius <= p.well():
        raise ValueError("truncation_radius must exceed the well position sqrt(a/b)")


def _drive(
    p: PotentialParams,
    d: DiffusionSpec,
    x0: float,
    cfg: SimConfig,
    rule: StoppingRule | None,
    path_index: int,
    ref: float,
    noise_sign: float,
    states: np.ndarray | None,
) -> tuple[float, int, int, float]:
    """Chunked kernel driver.  Returns (x_end, steps_done, stop_code, sup_dev).

    The initial state is checked against the rule and the truncation radius
    before any step (a stop there reports zero steps).
    """
    rk, r0, r1, r2 = _pack_rule(rule)
    sup_dev = abs(x0 - ref)
    if rk != kernels.RULE_NONE and kernels.rule_fires(rk, r0, r1, r2, x0):
        return x0, 0, kernels.STOP_RULE, sup_dev
    if abs(x0) >= cfg.truncation_radius:
        return x0, 0, kernels.STOP_TRUNCATION, sup_dev
    kind, par = d.pack()
    gen = path_generator(cfg.seed, path_index)
    sqrt_dt = math.sqrt(cfg.dt)
    milstein = cfg.scheme == "milstein"
    n = cfg.n_steps
    x = x0
    i = 0
    code = kernels.STOP_NONE
    while i < n:
        m = min(_CHUNK, n - i)
        noise = gen.standard_normal(m)
        out = None if states is None else states[i + 1 : i + 1 + m]
        x, k, code, sup_dev = kernels.run_path_chunk(
            x, noise, cfg.dt, sqrt_dt, p.a, p.b, p.lam, kind, par, milstein,
            rk, r0, r1, r2, cfg.truncation_radius, ref, sup_dev, noise_sign, out,
        )
        i += k
        if code != kernels.STOP_NONE:
            break
    return x, i, code, sup_dev


def simulate(
    p: PotentialParams,
    d: DiffusionSpec,
    x0: float,
    cfg: SimConfig,
    rule: StoppingRule | None = None,
    *,
    path_index: int = 0,
    noise_sign: float = 1.0,
) -> Trajectory:
    """Simulate one path until the rule fires, truncation, or t_max.

    ``noise_sign`` flips the sign of every gaussian draw; it exists for
    mirror-symmetry diagnostics (with an even sigma the mirrored stream
    yields the exact negation of the path).
    """
    _check_simulation_inputs(p, d, x0, cfg)
    n = cfg.n_steps
    states = np.empty(n + 1, dtype=float)
    states[0] = x0
    x, i, code, _ = _drive(p, d, x0, cfg, rule, path_index, 0.0, noise_sign, states)
    if code == kernels.STOP_NONFINITE:
        raise BlowUpError(
            f"path became non-finite at t={i * cfg.dt:.6g} before truncation"
        )
    times = np.arange(i + 1, dtype=float) * cfg.dt
    stopped = None
    if code == kernels.STOP_RULE:
        stopped = StopInfo(i * cfg.dt, x, rule.name if rule is not None else "rule")
    elif code == kernels.STOP_TRUNCATION:
        stopped = StopInfo(i * cfg.dt, x, "truncation")
    return Trajectory(times, states[: i + 1].copy(), stopped, cfg.seed, path_index)


def _summarize_path(
    p: PotentialParams,
    d: DiffusionSpec,
    x0: float,
    cfg: SimConfig,
    rule: StoppingRule | None,
    k: int,
    ref: float,
    noise_sign: float,
) -> tuple[float, float, float, float, int]:
    x, i, code, sup_dev = _drive(p, d, x0, cfg, rule, k, ref, noise_sign, None)
    if code == kernels.STOP_NONFINITE:
        raise BlowUpError(f"path {k} became non-finite at t={i * cfg.dt:.6g}")
    if code in (kernels.STOP_RULE, kernels.STOP_TRUNCATION):
        return i * cfg.dt, x, x, sup_dev, code
    return math.nan, math.nan, x, sup_dev, code


def run_batch(
    p: PotentialParams,
    d: DiffusionSpec,
    x0: float,
    cfg: SimConfig,
    rule: StoppingRule | None = None,
    n_paths: int = 1,
    *,
    ref: float = 0.0,
    parallelism: int = 1,
    noise_sign: float = 1.0,
) -> BatchResult:
    """Simulate ``n_paths`` independent paths and collect per-path summaries.

    Path k uses the stream derived from (cfg.seed, k); results are merged in
    path-index order, so the output is independent of ``parallelism``.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    _check_simulation_inputs(p, d, x0, cfg)

    def work(k: int):
        return _summarize_path(p, d, x0, cfg, rule, k, ref, noise_sign)

    if parallelism == 1:
        rows = [work(k) for k in range(n_paths)]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as ex:
            rows = list(ex.map(work, range(n_paths)))
    arr = np.array(rows, dtype=float)
    return BatchResult(
        n_paths=n_paths,
        base_seed=cfg.seed,
        ref=ref,
        stop_time=arr[:, 0].copy(),
        stop_state=arr[:, 1].copy(),
        terminal=arr[:, 2].copy(),
        sup_dev=arr[:, 3].copy(),
        stop_code=arr[:, 4].astype(int),
    )


def integrate_with_noise(
    p: PotentialParams,
    d: DiffusionSpec,
    x0: float,
    dt: float,
    noise: np.ndarray,
    scheme: str = "euler",
) -> np.ndarray:
    """Deterministic integration against an explicit gaussian sequence.

    Returns the full state array (len(noise)+1 values, x0 first).  No
    stopping rule and no truncation; intended for coupling experiments and
    backend comparisons.
    """
    if scheme not in _SCHEMES:
        raise ValueError(f"scheme must be one of {_SCHEMES}")
    noise = np.ascontiguousarray(noise, dtype=float)
    kind, par = d.pack()
    states = np.empty(len(noise) + 1, dtype=float)
    states[0] = x0
    x, k, code, _ = kernels.run_path_chunk(
        x0, noise, dt, math.sqrt(dt), p.a, p.b, p.lam, kind, par,
        scheme == "milstein", kernels.RULE_NONE, 0.0, 0.0, 0.0,
        math.inf, 0.0, 0.0, 1.0, states[1:],
    )
    if code == kernels.STOP_NONFINITE:
        raise BlowUpError(f"non-finite state at step {k}")
    return states


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------


def _fmt(v: float) -> str:
    return format(v, ".17g")


def trajectory_to_csv(traj: Trajectory, path) -> None:
    """Write the trajectory as ``t,x`` rows at 17 significant digits."""
    with open(path, "w", newline="") as fh:
        fh.write("t,x\n")
        for t, x in zip(traj.times, traj.states):
            fh.write(f"{_fmt(t)},{_fmt(x)}\n")


def batch_to_csv(br: BatchResult, path) -> None:
    """Write per-path summaries as ``path,stop_time,stop_state,terminal,sup_dev``."""
    with open(path, "w", newline="") as fh:
        fh.write("path,stop_time,stop_state,terminal,sup_dev\n")
        for k in range(br.n_paths):
            fh.write(
                f"{k},{_fmt(br.stop_time[k])},{_fmt(br.stop_state[k])},"
                f"{_fmt(br.terminal[k])},{_fmt(br.sup_dev[k])}\n"
            )
