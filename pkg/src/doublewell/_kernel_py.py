"""Pure-Python stepping kernel; reference twin of the compiled core.

Every arithmetic expression here is kept operation-for-operation identical
to ``_kernel_cy.pyx`` (same association order, same libm calls), so the two
backends produce bit-identical paths from the same noise.  Keep the two
files in sync when touching either.
"""

from __future__ import annotations

import math

# diffusion-family dispatch codes (must match model.py and _kernel_cy.pyx)
SIG_CONSTANT = 0
SIG_LINEAR = 1
SIG_OSCILLATORY = 2
SIG_POLYNOMIAL = 3
SIG_TABULATED = 4

# stopping-rule codes
RULE_NONE = 0
RULE_EXIT_INTERVAL = 1
RULE_EXIT_ANNULUS = 2
RULE_HIT_INTERVAL = 3

# stop codes returned by run_path_chunk
STOP_NONE = 0
STOP_RULE = 1
STOP_TRUNCATION = 2
STOP_NONFINITE = 3


def sigma_value(kind, par, x):
    """Evaluate the packed diffusion coefficient at x."""
    if kind == SIG_CONSTANT:
        return par[0]
    if kind == SIG_LINEAR:
        d = abs(x - par[0])
        m = d if d < par[2] else par[2]
        return par[1] * m
    if kind == SIG_OSCILLATORY:
        d = abs(x - par[0])
        if d == 0.0:
            return 0.0
        m = par[1] + par[2] * math.sin(1.0 / (x - par[0]))
        f = d if d < par[3] else par[3]
        return f * m
    if kind == SIG_POLYNOMIAL:
        n = len(par)
        acc = par[n - 1]
        for j in range(n - 2, -1, -1):
            acc = acc * x + par[j]
        return abs(acc)
    # SIG_TABULATED: par = [n, knots..., values...]
    n = int(par[0])
    if x <= par[1]:
        return par[n + 1]
    if x >= par[n]:
        return par[2 * n]
    lo = 1
    hi = n
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if x >= par[mid]:
            lo = mid
        else:
            hi = mid
    t = (x - par[lo]) / (par[lo + 1] - par[lo])
    return par[n + lo] + (par[n + lo + 1] - par[n + lo]) * t


def sigma_prime(kind, par, x):
    """One-sided derivative of the packed diffusion coefficient at x."""
    if kind == SIG_CONSTANT:
        return 0.0
    if kind == SIG_LINEAR:
        d = abs(x - par[0])
        if d >= par[2]:
            return 0.0
        if x >= par[0]:
            return par[1]
        return -par[1]
    if kind == SIG_OSCILLATORY:
        d = abs(x - par[0])
        if d == 0.0:
            return 0.0
        u = 1.0 / (x - par[0])
        if d < par[3]:
            s = 1.0 if x > par[0] else -1.0
            return s * (par[1] + par[2] * math.sin(u)) - par[2] * math.cos(u) / d
        return -par[3] * par[2] * math.cos(u) * u * u
    if kind == SIG_POLYNOMIAL:
        n = len(par)
        acc = par[n - 1]
        dacc = 0.0
        for j in range(n - 2, -1, -1):
            dacc = dacc * x + acc
            acc = acc * x + par[j]
        if acc > 0.0:
            return dacc
        if acc < 0.0:
            return -dacc
        return 0.0
    # SIG_TABULATED
    n = int(par[0])
    if x < par[1] or x >= par[n]:
        return 0.0
    lo = 1
    hi = n
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if x >= par[mid]:
            lo = mid
        else:
            hi = mid
    return (par[n + lo + 1] - par[n + lo]) / (par[lo + 1] - par[lo])


def rule_fires(rule_kind, r0, r1, r2, x):
    """Grid-point stopping condition shared by the drivers and kernels."""
    if rule_kind == RULE_EXIT_INTERVAL:
        return x <= r0 or x >= r1
    if rule_kind == RULE_EXIT_ANNULUS:
        d = abs(x - r0)
        return d <= r1 or d >= r2
    if rule_kind == RULE_HIT_INTERVAL:
        return r0 < x < r1
    return False


def run_path_chunk(
    x,
    noise,
    dt,
    sqrt_dt,
    a,
    b,
    lam,
    sig_kind,
    sig_params,
    milstein,
    rule_kind,
    r0,
    r1,
    r2,
    trunc_radius,
    ref,
    sup_dev,
    noise_sign,
    states_out=None,
):
    """Advance one path from x, consuming gaussian draws left to right.

    One step per draw: Euler-Maruyama, plus the sigma*sigma'/2 correction
    when ``milstein``.  After each step the state is recorded (when
    ``states_out`` is given), the running sup of |x - ref| is updated, and
    the stopping conditions are checked in the order non-finite -> rule ->
    truncation.

    Returns (x_end, n_done, stop_code, sup_dev) where n_done is the number
    of steps actually taken (the stopping step included).
    """
    par = list(sig_params)
    draws = list(noise)
    record = states_out is not None
    n_done = 0
    code = STOP_NONE
    for i in range(len(draws)):
        g = noise_sign * draws[i]
        dr = (a * x - b * x * x * x) / lam
        sg = sigma_value(sig_kind, par, x)
        xn = x + dr * dt + sg * sqrt_dt * g
        if milstein:
            sp = sigma_prime(sig_kind, par, x)
            xn = xn + 0.5 * sg * sp * (dt * g * g - dt)
        x = xn
        n_done = i + 1
        if record:
            states_out[i] = x
        if not math.isfinite(x):
            code = STOP_NONFINITE
            break
        dev = abs(x - ref)
        if dev > sup_dev:
            sup_dev = dev
        if rule_kind != RULE_NONE and rule_fires(rule_kind, r0, r1, r2, x):
            code = STOP_RULE
            break
        if abs(x) >= trunc_radius:
            code = STOP_TRUNCATION
            break
    return x, n_done, code, sup_dev
