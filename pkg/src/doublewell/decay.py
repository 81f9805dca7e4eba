"""Concave rate functions and the reciprocal-integral decay transform.

A drift condition LV <= -c * phi(V) with a concave, vanishing-at-zero rate
phi converts into an explicit time envelope through

    Phi_c(t) = (1/c) * integral_1^t ds / phi(s),
    envelope(v0, t) = Phi_c^{-1}(Phi_c(v0) - t),

valid whenever Phi_c maps (0, inf) onto the whole line, i.e. the reciprocal
integral diverges both at 0 and at infinity.  Linear-capped rates produce
exponential envelopes; the super-geometric family phi_beta(t) =
beta*t*(-ln t)^(1-1/beta) (capped at r_beta) produces decay of ln(envelope)
like -(c*t)^beta; power-law rates t^gamma with gamma < 1 fail the
divergence test at 0 (their envelope would reach zero in finite time), so
their conclusions are transferred to super-geometric envelopes via the
pointwise domination check instead.

Envelopes are reported as functions of the supplied initial value v0; the
random initial comparison level appearing in the pathwise theory is not
modelled distributionally, v0 = V(x0) is its natural surrogate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize_scalar

__all__ = [
    "RateFunction",
    "LinearCapped",
    "SuperGeometric",
    "PowerCapped",
    "SmoothedConcave",
    "OntoCertificate",
    "PhiTransform",
    "OntoCertificateError",
    "onto_check",
    "phi_c",
    "phi_c_inverse",
    "envelope",
    "asymptotic_rate",
    "RateFit",
    "dominate",
    "DominanceReport",
    "envelope_to_csv",
]


class OntoCertificateError(ValueError):
    """The transform does not map (0, inf) onto the line; no global envelope."""


# ---------------------------------------------------------------------------
# rate functions
# ---------------------------------------------------------------------------


class RateFunction:
    """Nonnegative, non-decreasing concave rate with phi(0) = 0.

    Subclasses expose closed-form evaluation, the cap location (all
    supported rates are eventually constant), the slope below the cap, the
    closed-form reciprocal integral from 1 where available, and the
    divergence flag of the reciprocal integral at zero.
    """

    def __call__(self, t: float) -> float:
        raise NotImplementedError

    def values(self, ts: np.ndarray) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        return np.array([self(float(t)) for t in ts])

    @property
    def cap_location(self) -> float:
        raise NotImplementedError

    @property
    def cap_value(self) -> float:
        raise NotImplementedError

    def slope_below_cap(self, t: float) -> float:
        raise NotImplementedError

    def reciprocal_integral_from_one(self, t: float) -> float | None:
        """Closed form of integral_1^t ds/phi(s), or None if unavailable."""
        return None

    @property
    def integral_diverges_at_zero(self) -> bool:
        raise NotImplementedError

    def breakpoints(self) -> tuple[float, ...]:
        """Kink locations, forwarded to the adaptive quadrature."""
        return (self.cap_location,)


@dataclass(frozen=True)
class LinearCapped(RateFunction):
    """phi(t) = min(t, r)."""

    r: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.r) and self.r > 0.0):
            raise ValueError("r must be a positive finite real")

    def __call__(self, t: float) -> float:
        if t <= 0.0:
            return 0.0
        return t if t < self.r else self.r

    def values(self, ts):
        ts = np.asarray(ts, dtype=float)
        return np.clip(ts, 0.0, self.r)

    @property
    def cap_location(self) -> float:
        return self.r

    @property
    def cap_value(self) -> float:
        return self.r

    def slope_below_cap(self, t: float) -> float:
        return 1.0

    def reciprocal_integral_from_one(self, t: float) -> float:
        r = self.r
        if r >= 1.0:
            if t <= r:
                return math.log(t)
            return math.log(r) + (t - r) / r
        if t >= r:
            return (t - 1.0) / r
        return math.log(t / r) + (r - 1.0) / r

    @property
    def integral_diverges_at_zero(self) -> bool:
        return True


@dataclass(frozen=True)
class SuperGeometric(RateFunction):
    """phi_beta(t) = beta * t * (-ln t)^(1 - 1/beta), capped at r_beta.

    Requires beta > 1 and 0 < r_beta <= e^(1/beta - 1); the upper limit is
    exactly where phi_beta stops being non-decreasing (its derivative
    vanishes there).
    """

    beta: float
    r_beta: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.beta) and self.beta > 1.0):
            raise ValueError("beta must be > 1")
        r_max = math.exp(1.0 / self.beta - 1.0)
        if not (0.0 < self.r_beta <= r_max):
            raise ValueError(f"r_beta must lie in (0, {r_max!r}] for monotonicity")

    def _raw(self, t: float) -> float:
        return self.beta * t * (-math.log(t)) ** (1.0 - 1.0 / self.beta)

    def __call__(self, t: float) -> float:
        if t <= 0.0:
            return 0.0
        if t >= self.r_beta:
            return self._raw(self.r_beta)
        return self._raw(t)

    @property
    def cap_location(self) -> float:
        return self.r_beta

    @property
    def cap_value(self) -> float:
        return self._raw(self.r_beta)

    def slope_below_cap(self, t: float) -> float:
        u = -math.log(t)
        pwr = 1.0 - 1.0 / self.beta
        return self.beta * (u**pwr - pwr * u ** (pwr - 1.0))

    def reciprocal_integral_from_one(self, t: float) -> float:
        # antiderivative of 1/phi_beta below the cap is -(-ln s)^(1/beta)
        rb = self.r_beta
        K = self.cap_value
        if t >= rb:
            return (t - 1.0) / K
        return (rb - 1.0) / K + (-math.log(rb)) ** (1.0 / self.beta) - (
            -math.log(t)
        ) ** (1.0 / self.beta)

    @property
    def integral_diverges_at_zero(self) -> bool:
        return True


@dataclass(frozen=True)
class PowerCapped(RateFunction):
    """phi(t) = t^gamma for t <= r, r^gamma beyond, with 0 < gamma < 1.

    The reciprocal integral converges at zero, so this rate admits no
    global envelope (finite-time extinction regime); use
    :func:`dominate` to transfer its drift certificates to super-geometric
    rates.
    """

    gamma: float
    r: float

    def __post_init__(self) -> None:
        if not (0.0 < self.gamma < 1.0):
            raise ValueError("gamma must lie in (0, 1)")
        if not (math.isfinite(self.r) and self.r > 0.0):
            raise ValueError("r must be a positive finite real")

    def __call__(self, t: float) -> float:
        if t <= 0.0:
            return 0.0
        if t >= self.r:
            return self.r**self.gamma
        return t**self.gamma

    @property
    def cap_location(self) -> float:
        return self.r

    @property
    def cap_value(self) -> float:
        return self.r**self.gamma

    def slope_below_cap(self, t: float) -> float:
        return self.gamma * t ** (self.gamma - 1.0)

    def reciprocal_integral_from_one(self, t: float) -> float:
        g1 = 1.0 - self.gamma
        r = self.r

        def below(a: float, b: float) -> float:  # integral over [a,b] under cap
            return (b**g1 - a**g1) / g1

        K = self.cap_value
        if r >= 1.0:
            if t <= r:
                return below(1.0, t)
            return below(1.0, r) + (t - r) / K
        if t >= r:
            return (t - 1.0) / K
        return (r - 1.0) / K + below(r, t)

    @property
    def integral_diverges_at_zero(self) -> bool:
        return False


@dataclass(frozen=True)
class SmoothedConcave(RateFunction):
    """C^1 concave blend of a capped base rate around its cap kink.

    On (r - eps, r + eps) the slope interpolates linearly from the base
    slope at r - eps down to zero, i.e. the rate follows a quadratic; below
    the window it equals the base, above it is constant.  For a linear base
    this reproduces exactly the standard smoothing used to derive the
    exponential envelope (identical to the base outside the window); for
    strictly concave bases the plateau lands slightly above the base cap,
    which is still an admissible concave rate.  Default eps is a tenth of
    the cap location.
    """

    base: RateFunction
    eps: float | None = None

    def __post_init__(self) -> None:
        if isinstance(self.base, SmoothedConcave):
            raise ValueError("base must be an unsmoothed rate")
        e = self.eps if self.eps is not None else self.base.cap_location / 10.0
        if not (0.0 < e < self.base.cap_location):
            raise ValueError("eps must lie in (0, cap_location)")
        object.__setattr__(self, "eps", e)

    @property
    def _t_lo(self) -> float:
        return self.base.cap_location - self.eps

    @property
    def _t_hi(self) -> float:
        return self.base.cap_location + self.eps

    @property
    def _v0(self) -> float:
        return self.base(self._t_lo)

    @property
    def _s0(self) -> float:
        return self.base.slope_below_cap(self._t_lo)

    def __call__(self, t: float) -> float:
        if t <= self._t_lo:
            return self.base(t)
        tau = t - self._t_lo
        two_eps = 2.0 * self.eps
        if t >= self._t_hi:
            return self._v0 + self._s0 * self.eps
        return self._v0 + self._s0 * tau - self._s0 * tau * tau / (2.0 * two_eps)

    @property
    def cap_location(self) -> float:
        return self._t_hi

    @property
    def cap_value(self) -> float:
        return self._v0 + self._s0 * self.eps

    def slope_below_cap(self, t: float) -> float:
        if t <= self._t_lo:
            return self.base.slope_below_cap(t)
        return self._s0 * (1.0 - (t - self._t_lo) / (2.0 * self.eps))

    @property
    def integral_diverges_at_zero(self) -> bool:
        return self.base.integral_diverges_at_zero

    def breakpoints(self) -> tuple[float, ...]:
        return (self._t_lo, self._t_hi)


# ---------------------------------------------------------------------------
# transform
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OntoCertificate:
    diverges_at_zero: bool
    diverges_at_infinity: bool

    @property
    def holds(self) -> bool:
        return self.diverges_at_zero and self.diverges_at_infinity


def onto_check(rate: RateFunction) -> OntoCertificate:
    """Does Phi map (0, inf) onto the line?  Analytic per family.

    Divergence at infinity holds for every supported rate (they are all
    eventually constant); divergence at zero fails exactly for the
    power-law rates with gamma < 1.
    """
    return OntoCertificate(rate.integral_diverges_at_zero, True)


@dataclass(frozen=True)
class PhiTransform:
    """Rate function plus decay constant c, with its onto certificate."""

    rate: RateFunction
    c: float
    onto: OntoCertificate = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if not (math.isfinite(self.c) and self.c > 0.0):
            raise ValueError("c must be a positive finite real")
        object.__setattr__(self, "onto", onto_check(self.rate))


def _unscaled_quadrature(rate: RateFunction, t: float) -> float:
    lo, hi = min(1.0, t), max(1.0, t)
    pts = [b for b in rate.breakpoints() if lo < b < hi]
    val, _ = quad(
        lambda s: 1.0 / rate(s), lo, hi, points=pts or None,
        epsabs=1e-14, epsrel=1e-12, limit=200,
    )
    return val if t >= 1.0 else -val


def phi_c(tr: PhiTransform, t: float, method: str = "auto") -> float:
    """Phi_c(t) = (1/c) * integral_1^t ds/phi(s), strictly increasing in t.

    Closed forms are used where the family provides one; ``method`` can
    force ``"quadrature"`` (adaptive, relative tolerance 1e-12) or
    ``"closed"`` (raises if no closed form exists).
    """
    if not (math.isfinite(t) and t > 0.0):
        raise ValueError("t must be a positive finite real")
    if method not in ("auto", "closed", "quadrature"):
        raise ValueError("method must be auto|closed|quadrature")
    closed = None
    if method in ("auto", "closed"):
        closed = tr.rate.reciprocal_integral_from_one(t)
        if closed is None and method == "closed":
            raise ValueError("no closed form for this rate family")
    if closed is None:
        closed = _unscaled_quadrature(tr.rate, t)
    return closed / tr.c


def phi_c_inverse(tr: PhiTransform, y: float) -> float:
    """Inverse of :func:`phi_c` by geometric bisection.

    Requires the onto certificate.  Converges to
    |phi_c(result) - y| <= 1e-12 * max(1, |y|), with the bracket grown
    geometrically from [1e-30, 1e30] if needed.
    """
    if not tr.onto.holds:
        raise OntoCertificateError(
            "transform is not onto: no global inverse (rate fails the "
            "divergence-at-zero test)"
        )
    if not math.isfinite(y):
        raise ValueError("y must be finite")
    tol = 1e-12 * max(1.0, abs(y))
    lo, hi = 1e-30, 1e30
    while phi_c(tr, lo) > y and lo > 1e-300:
        lo *= 1e-10
    while phi_c(tr, hi) < y and hi < 1e300:
        hi *= 1e10

    def geo_mid(a: float, b: float) -> float:
        # in log space: sqrt(a*b) would under/overflow for extreme brackets
        return math.exp(0.5 * (math.log(a) + math.log(b)))

    for _ in range(400):
        mid = geo_mid(lo, hi)
        val = phi_c(tr, mid)
        if abs(val - y) <= tol:
            return mid
        if val < y:
            lo = mid
        else:
            hi = mid
        if hi / lo < 1.0 + 1e-15:
            break
    return geo_mid(lo, hi)


def envelope(tr: PhiTransform, v0: float, t: float) -> float:
    """Decay envelope Phi_c^{-1}(Phi_c(v0) - t); equals v0 at t = 0.

    For a linear-capped rate with v0 <= min(r, 1) this is exactly
    v0 * e^{-c t} while the value stays below the cap.
    """
    if not (math.isfinite(v0) and v0 > 0.0):
        raise ValueError("v0 must be a positive finite real")
    if not (math.isfinite(t) and t >= 0.0):
        raise ValueError("t must be a nonnegative finite real")
    if t == 0.0:
        return v0
    return phi_c_inverse(tr, phi_c(tr, v0) - t)


# ---------------------------------------------------------------------------
# asymptotic rate recovery
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateFit:
    exponent_order: float
    rate: float
    residual: float
    conclusive: bool


def asymptotic_rate(
    tr: PhiTransform,
    v0: float,
    t_grid: Sequence[float],
    *,
    residual_threshold: float = 1e-4,
) -> RateFit:
    """Fit ln(envelope) ~ -rate * t^beta on the tail of the grid.

    The exponent is found by maximizing the linearity of
    (-ln envelope)^(1/beta) against t (exactly linear at the true beta for
    the closed-form families); the rate is the fitted slope raised to beta.
    A relative residual above ``residual_threshold`` marks the fit
    non-conclusive.
    """
    ts = np.asarray(sorted(t_grid), dtype=float)
    if ts.size < 8:
        raise ValueError("need at least 8 grid times")
    env = np.array([envelope(tr, v0, float(t)) for t in ts])
    tail = ts >= ts[ts.size // 2]
    usable = tail & (env > 0.0) & (env < 1.0)
    if np.count_nonzero(usable) < 4:
        raise ValueError("tail of t_grid leaves too few usable envelope values")
    tt = ts[usable]
    neg_log = -np.log(env[usable])

    def misfit(beta: float) -> float:
        # 1 - R^2 of the linear fit: scale-invariant, so inflating beta
        # (which flattens z toward a constant) buys nothing
        z = neg_log ** (1.0 / beta)
        coef = np.polyfit(tt, z, 1)
        res = z - np.polyval(coef, tt)
        tss = float(np.dot(z - z.mean(), z - z.mean()))
        if tss <= 0.0:
            return math.inf
        return float(np.dot(res, res)) / tss

    grid = np.geomspace(0.3, 8.0, 160)
    j = int(np.argmin([misfit(b) for b in grid]))
    b_lo = grid[max(j - 1, 0)]
    b_hi = grid[min(j + 1, grid.size - 1)]
    opt = minimize_scalar(misfit, bounds=(b_lo, b_hi), method="bounded",
                          options={"xatol": 1e-12})
    beta = float(opt.x)
    z = neg_log ** (1.0 / beta)
    slope, _ = np.polyfit(tt, z, 1)
    residual = math.sqrt(max(misfit(beta), 0.0))
    conclusive = residual < residual_threshold and 0.3 < beta < 8.0
    return RateFit(beta, float(slope) ** beta, residual, conclusive)


# ---------------------------------------------------------------------------
# domination
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DominanceReport:
    holds: bool
    crossover: float | None


def dominate(
    rate_a: RateFunction,
    rate_b: RateFunction,
    domain: tuple[float, float],
    *,
    n: int = 20000,
) -> DominanceReport:
    """Pointwise rate_a >= rate_b on a geometric grid over ``domain``.

    A pass transfers a drift certificate for rate_a to every envelope
    derived from rate_b on that range (this is how power-law certificates
    yield super-geometric envelopes for every order).  ``crossover`` is the
    smallest grid point where domination fails, if any.
    """
    lo, hi = domain
    if not (0.0 < lo < hi):
        raise ValueError("domain must satisfy 0 < lo < hi")
    ts = np.geomspace(lo, hi, n)
    va = rate_a.values(ts)
    vb = rate_b.values(ts)
    bad = va < vb
    if not np.any(bad):
        return DominanceReport(True, None)
    return DominanceReport(False, float(ts[np.argmax(bad)]))


def envelope_to_csv(tr: PhiTransform, v0: float, t_grid: Sequence[float], path) -> None:
    """Write ``t,envelope`` rows at 17 significant digits."""
    with open(path, "w", newline="") as fh:
        fh.write("t,envelope\n")
        for t in t_grid:
            fh.write(f"{format(float(t), '.17g')},{format(envelope(tr, v0, float(t)), '.17g')}\n")
