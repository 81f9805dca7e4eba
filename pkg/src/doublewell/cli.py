"""Command-line front end.

Subcommands: ``simulate | classify | exit-time | invariant | envelope |
decay-rate``.  Configuration comes from a flat ``key = value`` text file
(``--config PATH``) with per-key command-line overrides (``--key value``);
``--help`` on a subcommand lists every key it reads.  All floating-point
output is written at 17 significant digits, and every command is
deterministic given (config, seed), including at ``parallelism`` above one.

Exit codes: 0 ok/definitive verdict, 1 configuration error, 2 inconclusive
verdict, 3 runtime/simulation failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import decay, ergodic, stability
from .model import (
    AssumptionError,
    Constant,
    DiffusionSpec,
    LinearAtRoot,
    Oscillatory,
    PolynomialBounded,
    PotentialParams,
    TabulatedLipschitz,
)
from .sde import (
    BlowUpError,
    ExitAnnulus,
    ExitInterval,
    HitInterval,
    SimConfig,
    StoppingRule,
    simulate,
    trajectory_to_csv,
)

__all__ = ["main", "RunConfig", "parse_config_text"]


class ConfigError(ValueError):
    pass


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


# ---------------------------------------------------------------------------
# key registry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Key:
    name: str
    typ: str  # float | int | str | floats
    default: object
    help: str


def _parse_value(key: Key, raw: str):
    try:
        if key.typ == "float":
            return float(raw)
        if key.typ == "int":
            return int(raw)
        if key.typ == "floats":
            return tuple(float(tok) for tok in raw.split(",") if tok.strip())
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"key {key.name!r}: cannot parse {raw!r} as {key.typ}") from exc


def _value_to_text(key: Key, v) -> str:
    if key.typ == "float":
        return repr(float(v))
    if key.typ == "floats":
        return ",".join(repr(float(x)) for x in v)
    return str(v)


_POTENTIAL = [
    Key("a", "float", 1.0, "quadratic coefficient of the potential"),
    Key("b", "float", 1.0, "quartic coefficient of the potential"),
    Key("lam", "float", 1.0, "damping constant"),
]

_SIGMA = [
    Key("sigma", "str", "constant",
        "diffusion family: constant|linear|oscillatory|polynomial|tabulated"),
    Key("sigma_value", "float", 1.0, "constant family: the value s"),
    Key("sigma_root", "float", 0.0, "linear/oscillatory family: root x_e"),
    Key("sigma_slope", "float", 1.0, "linear family: slope kappa"),
    Key("sigma_cap", "float", -1.0,
        "linear/oscillatory family cap; negative means 10*sqrt(a/b) (linear) or 1 (oscillatory)"),
    Key("sigma_lo", "float", 1.0, "oscillatory family: liminf slope"),
    Key("sigma_hi", "float", 3.0, "oscillatory family: limsup slope"),
    Key("sigma_coeffs", "floats", (1.0,), "polynomial family: ascending coefficients"),
    Key("sigma_knots", "floats", (-1.0, 0.0, 1.0), "tabulated family: knots"),
    Key("sigma_values", "floats", (1.0, 1.0, 1.0), "tabulated family: values"),
]

_SIM = [
    Key("dt", "float", 1e-3, "time step"),
    Key("t_max", "float", 10.0, "simulation horizon"),
    Key("scheme", "str", "euler", "stepping scheme: euler|milstein"),
    Key("seed", "int", 0, "base seed (64-bit unsigned)"),
    Key("truncation_radius", "float", 50.0, "safety stop on |x|"),
]

_PARALLEL = [Key("parallelism", "int", 1, "worker threads for batches (1 = sequential)")]

_COMMAND_KEYS: dict[str, list[Key]] = {
    "simulate": _POTENTIAL + _SIGMA + _SIM + [
        Key("x0", "float", 0.5, "initial state"),
        Key("rule", "str", "none",
            "stopping rule: none|exit-interval|exit-annulus|hit-interval"),
        Key("rule_lo", "float", -1.0, "interval rules: lower endpoint"),
        Key("rule_hi", "float", 1.0, "interval rules: upper endpoint"),
        Key("rule_center", "float", 0.0, "annulus rule: center"),
        Key("rule_r1", "float", 0.1, "annulus rule: inner radius"),
        Key("rule_r2", "float", 0.5, "annulus rule: outer radius"),
    ],
    "classify": _POTENTIAL + _SIGMA + [
        Key("x_e", "float", 0.0, "equilibrium to classify (-sqrt(a/b), 0, sqrt(a/b))"),
    ],
    "exit-time": _POTENTIAL + _SIGMA + _SIM + _PARALLEL + [
        Key("mode", "str", "annulus", "annulus|hit"),
        Key("x0", "float", 0.3, "initial state"),
        Key("n_paths", "int", 1000, "Monte Carlo paths"),
        Key("x_e", "float", 0.0, "annulus mode: center equilibrium"),
        Key("eps1", "float", 0.1, "annulus mode: inner radius"),
        Key("eps2", "float", 0.5, "annulus mode: outer radius"),
        Key("hit_eps", "float", 0.5, "hit mode: target is (-1-eps, 1+eps)"),
    ],
    "invariant": _POTENTIAL + _SIGMA + _SIM + [
        Key("x0", "float", 0.0, "initial state"),
        Key("bins_n", "int", 200, "number of histogram bins"),
        Key("bins_lo", "float", -3.0, "left edge of the binned range"),
        Key("bins_hi", "float", 3.0, "right edge of the binned range"),
        Key("burn_in_fraction", "float", 0.1, "fraction of the horizon discarded"),
        Key("allow_degenerate", "int", 0,
            "1 to accept sigma vanishing near the equilibria (warning instead of error)"),
    ],
    "envelope": [
        Key("rate", "str", "linear",
            "rate family: linear|supergeometric|power|smoothed-linear"),
        Key("rate_r", "float", 1.0, "linear/power/smoothed cap location"),
        Key("rate_beta", "float", 2.0, "supergeometric order"),
        Key("rate_rbeta", "float", -1.0,
            "supergeometric cap; negative means the monotonicity limit e^(1/beta-1)"),
        Key("rate_gamma", "float", 0.5, "power family exponent"),
        Key("rate_eps", "float", -1.0, "smoothing half-width; negative means r/10"),
        Key("c", "float", 1.0, "decay constant"),
        Key("v0", "float", 0.5, "initial envelope value"),
        Key("t_lo", "float", 0.0, "first grid time"),
        Key("t_hi", "float", 10.0, "last grid time"),
        Key("t_n", "int", 101, "number of grid times"),
    ],
    "decay-rate": _POTENTIAL + _SIGMA + [
        Key("x_e", "float", 1.0, "well equilibrium (+-sqrt(a/b))"),
        Key("alpha", "float", 1.0, "moment order"),
    ],
}


@dataclass(frozen=True)
class RunConfig:
    """Typed key/value configuration for one command; round-trips to text."""

    command: str
    values: dict

    def to_text(self) -> str:
        keys = {k.name: k for k in _COMMAND_KEYS[self.command]}
        lines = [
            f"{name} = {_value_to_text(keys[name], self.values[name])}"
            for name in sorted(self.values)
        ]
        return "\n".join(lines) + "\n"


def parse_config_text(command: str, text: str) -> dict:
    """Parse ``key = value`` lines for one command (unknown keys rejected)."""
    keys = {k.name: k for k in _COMMAND_KEYS[command]}
    out = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected 'key = value', got {raw!r}")
        name, _, value = line.partition("=")
        name = name.strip()
        if name not in keys:
            raise ConfigError(f"line {ln}: unknown key {name!r} for {command!r}")
        out[name] = _parse_value(keys[name], value.strip())
    return out


def load_config(command: str, args: argparse.Namespace) -> RunConfig:
    values = {k.name: k.default for k in _COMMAND_KEYS[command]}
    if args.config is not None:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        values.update(parse_config_text(command, text))
    for key in _COMMAND_KEYS[command]:
        raw = getattr(args, key.name.replace("-", "_"), None)
        if raw is not None:
            values[key.name] = _parse_value(key, raw)
    if args.seed is not None and "seed" in values:
        values["seed"] = int(args.seed)
    if args.parallelism is not None and "parallelism" in values:
        values["parallelism"] = int(args.parallelism)
    return RunConfig(command, values)


# ---------------------------------------------------------------------------
# object construction
# ---------------------------------------------------------------------------


def _build_potential(v: dict) -> PotentialParams:
    return PotentialParams(v["a"], v["b"], v["lam"])


def _build_sigma(v: dict, p: PotentialParams) -> DiffusionSpec:
    fam = v["sigma"]
    if fam == "constant":
        return Constant(v["sigma_value"])
    if fam == "linear":
        cap = v["sigma_cap"]
        if cap <= 0.0:
            cap = 10.0 * p.well()
        return LinearAtRoot(v["sigma_root"], v["sigma_slope"], cap)
    if fam == "oscillatory":
        cap = v["sigma_cap"]
        if cap <= 0.0:
            cap = 1.0
        return Oscillatory(v["sigma_root"], v["sigma_lo"], v["sigma_hi"], cap)
    if fam == "polynomial":
        return PolynomialBounded(v["sigma_coeffs"])
    if fam == "tabulated":
        return TabulatedLipschitz(v["sigma_knots"], v["sigma_values"])
    raise ConfigError(f"unknown diffusion family {fam!r}")


def _build_sim(v: dict) -> SimConfig:
    return SimConfig(
        dt=v["dt"],
        t_max=v["t_max"],
        scheme=v["scheme"],
        seed=v["seed"],
        truncation_radius=v["truncation_radius"],
    )


def _build_rule(v: dict) -> StoppingRule | None:
    name = v["rule"]
    if name == "none":
        return None
    if name == "exit-interval":
        return ExitInterval(v["rule_lo"], v["rule_hi"])
    if name == "exit-annulus":
        return ExitAnnulus(v["rule_center"], v["rule_r1"], v["rule_r2"])
    if name == "hit-interval":
        return HitInterval(v["rule_lo"], v["rule_hi"])
    raise ConfigError(f"unknown stopping rule {name!r}")


def _build_rate(v: dict) -> decay.RateFunction:
    fam = v["rate"]
    if fam == "linear":
        return decay.LinearCapped(v["rate_r"])
    if fam == "supergeometric":
        rb = v["rate_rbeta"]
        if rb <= 0.0:
            rb = math.exp(1.0 / v["rate_beta"] - 1.0)
        return decay.SuperGeometric(v["rate_beta"], rb)
    if fam == "power":
        return decay.PowerCapped(v["rate_gamma"], v["rate_r"])
    if fam == "smoothed-linear":
        eps = v["rate_eps"]
        base = decay.LinearCapped(v["rate_r"])
        return decay.SmoothedConcave(base, None if eps <= 0.0 else eps)
    raise ConfigError(f"unknown rate family {fam!r}")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _emit(lines: Sequence[tuple[str, object]]) -> None:
    for k, v in lines:
        print(f"{k}={_fmt(v)}")


def cmd_simulate(cfg: RunConfig, out: Path) -> int:
    v = cfg.values
    p = _build_potential(v)
    d = _build_sigma(v, p)
    sim = _build_sim(v)
    rule = _build_rule(v)
    traj = simulate(p, d, v["x0"], sim, rule)
    path = out / "trajectory.csv"
    trajectory_to_csv(traj, path)
    lines: list[tuple[str, object]] = [
        ("n_points", len(traj)),
        ("terminal", traj.terminal),
        ("stopped", "yes" if traj.stopped else "no"),
    ]
    if traj.stopped:
        lines += [
            ("stop_time", traj.stopped.stop_time),
            ("stop_state", traj.stopped.stop_state),
            ("rule_triggered", traj.stopped.rule_triggered),
        ]
    lines.append(("trajectory_csv", path))
    _emit(lines)
    return 0


def cmd_classify(cfg: RunConfig, out: Path) -> int:
    v = cfg.values
    p = _build_potential(v)
    d = _build_sigma(v, p)
    verdict = stability.classify(d, v["x_e"], p)
    _emit(sorted(verdict.to_report().items()))
    return 0 if verdict.definitive else 2


def cmd_exit_time(cfg: RunConfig, out: Path) -> int:
    v = cfg.values
    p = _build_potential(v)
    d = _build_sigma(v, p)
    sim = _build_sim(v)
    if v["mode"] == "annulus":
        st = ergodic.annulus_exit_time(
            p, d, v["x_e"], v["eps1"], v["eps2"], v["x0"], sim, v["n_paths"],
            parallelism=v["parallelism"],
        )
    elif v["mode"] == "hit":
        hi = 1.0 + v["hit_eps"]
        st = ergodic.mean_hitting_time(
            p, d, v["x0"], (-hi, hi), sim, v["n_paths"],
            parallelism=v["parallelism"],
        )
    else:
        raise ConfigError(f"unknown exit-time mode {v['mode']!r}")
    path = out / "exit_times.csv"
    ergodic.exit_stats_to_csv(st, path)
    _emit([
        ("n_paths", st.n_paths),
        ("mean", st.mean),
        ("se", st.se),
        ("max", st.max),
        ("n_timeout", st.n_timeout),
        ("bound", st.bound if st.bound is not None else "none"),
        ("bound_satisfied",
         "invalid" if not st.bound_valid else ("yes" if st.satisfies_bound() else "no")),
        ("exit_times_csv", path),
    ])
    return 0


def cmd_invariant(cfg: RunConfig, out: Path) -> int:
    v = cfg.values
    p = _build_potential(v)
    d = _build_sigma(v, p)
    sim = _build_sim(v)
    edges = np.linspace(v["bins_lo"], v["bins_hi"], v["bins_n"] + 1)
    m = ergodic.time_average_measure(
        p, d, v["x0"], sim, edges,
        burn_in=v["burn_in_fraction"] * sim.t_max,
        allow_degenerate=bool(v["allow_degenerate"]),
    )
    path = out / "histogram.csv"
    ergodic.measure_to_csv(m, path)
    lines: list[tuple[str, object]] = [
        ("n_samples", m.n_samples),
        ("occupied_fraction", m.occupied_fraction),
    ]
    try:
        oracle = ergodic.stationary_bin_masses(p, d, edges)
        lines.append(("l1_to_reference", m.l1_distance(oracle)))
    except ValueError:
        lines.append(("l1_to_reference", "unavailable"))
    lines.append(("histogram_csv", path))
    _emit(lines)
    return 0


def cmd_envelope(cfg: RunConfig, out: Path) -> int:
    v = cfg.values
    rate = _build_rate(v)
    tr = decay.PhiTransform(rate, v["c"])
    if v["t_n"] < 8:
        raise ConfigError("t_n must be at least 8")
    t_lo = v["t_lo"]
    if t_lo < 0.0:
        raise ConfigError("t_lo must be nonnegative")
    grid = np.linspace(t_lo, v["t_hi"], v["t_n"])
    path = out / "envelope.csv"
    decay.envelope_to_csv(tr, v["v0"], grid, path)
    fit = decay.asymptotic_rate(tr, v["v0"], grid)
    _emit([
        ("diverges_at_zero", "yes" if tr.onto.diverges_at_zero else "no"),
        ("diverges_at_infinity", "yes" if tr.onto.diverges_at_infinity else "no"),
        ("fitted_exponent_order", fit.exponent_order),
        ("fitted_rate", fit.rate),
        ("fit_conclusive", "yes" if fit.conclusive else "no"),
        ("envelope_csv", path),
    ])
    return 0


def cmd_decay_rate(cfg: RunConfig, out: Path) -> int:
    v = cfg.values
    p = _build_potential(v)
    d = _build_sigma(v, p)
    dr = stability.decay_rate(d, v["x_e"], v["alpha"], p)
    _emit(sorted(dr.to_report().items()))
    return 0


_COMMANDS: dict[str, Callable[[RunConfig, Path], int]] = {
    "simulate": cmd_simulate,
    "classify": cmd_classify,
    "exit-time": cmd_exit_time,
    "invariant": cmd_invariant,
    "envelope": cmd_envelope,
    "decay-rate": cmd_decay_rate,
}

_DESCRIPTIONS = {
    "simulate": "simulate one path and write it as CSV",
    "classify": "classify the stability of a degenerate equilibrium",
    "exit-time": "Monte Carlo exit/hitting times with analytic bound comparison",
    "invariant": "estimate the invariant measure by a long time average",
    "envelope": "tabulate a decay envelope and fit its asymptotic order",
    "decay-rate": "compute the exponential moment-decay constant at a well",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="doublewell",
        description="Overdamped double-well Langevin dynamics: simulation and "
        "stability analysis.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, keys in _COMMAND_KEYS.items():
        sp = sub.add_parser(name, help=_DESCRIPTIONS[name], description=_DESCRIPTIONS[name])
        sp.add_argument("--config", metavar="PATH", default=None,
                        help="flat 'key = value' configuration file")
        sp.add_argument("--out", metavar="DIR", default=".",
                        help="output directory for CSV artifacts")
        sp.add_argument("--seed", metavar="U64", default=None,
                        help="base seed (config key 'seed' where the command reads one)")
        sp.add_argument("--parallelism", metavar="N", default=None,
                        help="worker threads (config key 'parallelism' where read)")
        for key in keys:
            if key.name in ("seed", "parallelism"):
                continue  # covered by the global flags above
            sp.add_argument(
                f"--{key.name}", metavar=key.typ.upper(), default=None,
                help=f"{key.help} (default: {_value_to_text(key, key.default)})",
            )
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.command, args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](cfg, out)
    except (ConfigError, AssumptionError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (BlowUpError, RuntimeError) as exc:
        print(f"simulation failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
