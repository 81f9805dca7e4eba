# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled stepping kernel for the overdamped double-well dynamics.

Twin of ``_kernel_py``: every arithmetic expression matches the pure-Python
fallback operation for operation (and the build disables FP contraction), so
both backends produce bit-identical paths from the same noise.
"""

from libc.math cimport cos, fabs, isfinite, sin

# codes mirrored from _kernel_py
DEF SIG_CONSTANT = 0
DEF SIG_LINEAR = 1
DEF SIG_OSCILLATORY = 2
DEF SIG_POLYNOMIAL = 3
DEF SIG_TABULATED = 4

DEF RULE_NONE = 0
DEF RULE_EXIT_INTERVAL = 1
DEF RULE_EXIT_ANNULUS = 2
DEF RULE_HIT_INTERVAL = 3

DEF STOP_NONE = 0
DEF STOP_RULE = 1
DEF STOP_TRUNCATION = 2
DEF STOP_NONFINITE = 3


cdef inline double _sigma_value(int kind, const double* par, int npar, double x) noexcept nogil:
    cdef double d, m, f, t, acc
    cdef int n, j, lo, hi, mid
    if kind == SIG_CONSTANT:
        return par[0]
    if kind == SIG_LINEAR:
        d = fabs(x - par[0])
        m = d if d < par[2] else par[2]
        return par[1] * m
    if kind == SIG_OSCILLATORY:
        d = fabs(x - par[0])
        if d == 0.0:
            return 0.0
        m = par[1] + par[2] * sin(1.0 / (x - par[0]))
        f = d if d < par[3] else par[3]
        return f * m
    if kind == SIG_POLYNOMIAL:
        n = npar
        acc = par[n - 1]
        for j in range(n - 2, -1, -1):
            acc = acc * x + par[j]
        return fabs(acc)
    # SIG_TABULATED: par = [n, knots..., values...]
    n = <int> par[0]
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


cdef inline double _sigma_prime(int kind, const double* par, int npar, double x) noexcept nogil:
    cdef double d, u, s, acc, dacc
    cdef int n, j, lo, hi, mid
    if kind == SIG_CONSTANT:
        return 0.0
    if kind == SIG_LINEAR:
        d = fabs(x - par[0])
        if d >= par[2]:
            return 0.0
        if x >= par[0]:
            return par[1]
        return -par[1]
    if kind == SIG_OSCILLATORY:
        d = fabs(x - par[0])
        if d == 0.0:
            return 0.0
        u = 1.0 / (x - par[0])
        if d < par[3]:
            s = 1.0 if x > par[0] else -1.0
            return s * (par[1] + par[2] * sin(u)) - par[2] * cos(u) / d
        return -par[3] * par[2] * cos(u) * u * u
    if kind == SIG_POLYNOMIAL:
        n = npar
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
    n = <int> par[0]
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


cdef inline bint _rule_fires(int rule_kind, double r0, double r1, double r2, double x) noexcept nogil:
    cdef double d
    if rule_kind == RULE_EXIT_INTERVAL:
        return x <= r0 or x >= r1
    if rule_kind == RULE_EXIT_ANNULUS:
        d = fabs(x - r0)
        return d <= r1 or d >= r2
    if rule_kind == RULE_HIT_INTERVAL:
        return r0 < x < r1
    return False


def run_path_chunk(
    double x,
    double[::1] noise,
    double dt,
    double sqrt_dt,
    double a,
    double b,
    double lam,
    int sig_kind,
    double[::1] sig_params,
    bint milstein,
    int rule_kind,
    double r0,
    double r1,
    double r2,
    double trunc_radius,
    double ref,
    double sup_dev,
    double noise_sign,
    double[::1] states_out=None,
):
    """Compiled counterpart of ``_kernel_py.run_path_chunk``; same contract."""
    cdef Py_ssize_t m = noise.shape[0]
    cdef Py_ssize_t i
    cdef bint record = states_out is not None
    cdef const double* par = &sig_params[0]
    cdef int npar = <int> sig_params.shape[0]
    cdef double g, dr, sg, sp, xn, dev
    cdef Py_ssize_t n_done = 0
    cdef int code = STOP_NONE
    with nogil:
        for i in range(m):
            g = noise_sign * noise[i]
            dr = (a * x - b * x * x * x) / lam
            sg = _sigma_value(sig_kind, par, npar, x)
            xn = x + dr * dt + sg * sqrt_dt * g
            if milstein:
                sp = _sigma_prime(sig_kind, par, npar, x)
                xn = xn + 0.5 * sg * sp * (dt * g * g - dt)
            x = xn
            n_done = i + 1
            if record:
                states_out[i] = x
            if not isfinite(x):
                code = STOP_NONFINITE
                break
            dev = fabs(x - ref)
            if dev > sup_dev:
                sup_dev = dev
            if rule_kind != RULE_NONE and _rule_fires(rule_kind, r0, r1, r2, x):
                code = STOP_RULE
                break
            if fabs(x) >= trunc_radius:
                code = STOP_TRUNCATION
                break
    return x, n_done, code, sup_dev
