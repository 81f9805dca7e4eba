import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from doublewell.model import (
    SQRT2,
    AssumptionError,
    Constant,
    GeneratorInput,
    LinearAtRoot,
    Oscillatory,
    PolynomialBounded,
    PotentialParams,
    TabulatedLipschitz,
    deterministic_flow,
    drift,
    flow_crossing_time,
    generator_apply,
    sigma,
    validate_assumptions,
)

finite_x = st.floats(min_value=-5.0, max_value=5.0, allow_nan=False)


class TestDrift:
    def test_equilibria_exact(self, unit):
        assert drift(unit, 0.0) == 0.0
        assert drift(unit, 1.0) == 0.0
        assert drift(unit, -1.0) == 0.0

    def test_polynomial_value(self, unit):
        assert drift(unit, 2.0) == -6.0

    def test_general_params(self):
        p = PotentialParams(a=4.0, b=1.0, lam=2.0)
        assert p.equilibria() == (-2.0, 0.0, 2.0)
        assert drift(p, 2.0) == 0.0
        assert drift(p, 1.0) == (4.0 - 1.0) / 2.0

    @given(x=finite_x)
    def test_odd(self, x):
        p = PotentialParams()
        assert drift(p, -x) == -drift(p, x)

    def test_params_validation(self):
        with pytest.raises(ValueError):
            PotentialParams(a=-1.0)
        with pytest.raises(ValueError):
            PotentialParams(lam=0.0)


class TestSigmaFamilies:
    def test_constant(self):
        assert sigma(Constant(1.0), 3.7) == 1.0

    def test_linear_at_root(self):
        assert sigma(LinearAtRoot(0.0, 2.0, 10.0), 0.25) == 0.5
        assert sigma(LinearAtRoot(1.0, 0.5, 10.0), 1.0) == 0.0
        assert sigma(LinearAtRoot(0.0, 2.0, 1.0), 50.0) == 2.0  # capped

    def test_oscillatory_envelope(self):
        d = Oscillatory(0.0, 1.0, 3.0)
        xs = np.linspace(-0.9, 0.9, 2001)
        vals = d.values(xs)
        assert np.all(vals >= 0.0)
        assert np.all(vals <= 3.0 * np.abs(xs) + 1e-15)
        assert d(0.0) == 0.0

    def test_polynomial_abs(self):
        d = PolynomialBounded((1.0, -2.0, 1.0))  # (x-1)^2
        assert d(1.0) == 0.0
        assert d(3.0) == 4.0
        assert d(-1.0) == 4.0

    def test_tabulated_interpolation(self):
        d = TabulatedLipschitz((0.0, 1.0, 2.0), (1.0, 0.0, 2.0))
        assert d(0.5) == 0.5
        assert d(1.5) == 1.0
        assert d(-3.0) == 1.0  # constant extension
        assert d(5.0) == 2.0

    def test_validation(self):
        with pytest.raises(ValueError):
            LinearAtRoot(0.0, -1.0)
        with pytest.raises(ValueError):
            Oscillatory(0.0, 3.0, 1.0)
        with pytest.raises(ValueError):
            TabulatedLipschitz((0.0, 0.0), (1.0, 1.0))
        with pytest.raises(ValueError):
            TabulatedLipschitz((0.0, 1.0), (-1.0, 1.0))

    def test_scalar_matches_vectorized(self, rng):
        fams = [
            Constant(0.7),
            LinearAtRoot(0.3, 1.5, 2.0),
            Oscillatory(0.0, 0.5, 2.5),
            PolynomialBounded((0.2, -1.0, 0.4)),
            TabulatedLipschitz((-1.0, 0.0, 2.0), (2.0, 0.5, 1.0)),
        ]
        xs = rng.uniform(-4, 4, 200)
        for d in fams:
            vec = d.values(xs)
            for x, v in zip(xs, vec):
                assert d(float(x)) == pytest.approx(float(v), abs=0.0, rel=0.0)

    def test_sup_inf_bounds_cover_dense_grid(self):
        fams = [
            LinearAtRoot(0.5, 2.0, 3.0),
            Oscillatory(0.0, 1.0, 3.0),
            PolynomialBounded((0.5, 0.1, 0.2)),
            TabulatedLipschitz((-1.0, 0.5, 2.0), (1.0, 0.2, 3.0)),
        ]
        lo, hi = -1.5, 2.5
        xs = np.linspace(lo, hi, 20001)
        for d in fams:
            vals = d.values(xs)
            assert d.sup_abs(lo, hi) >= vals.max() - 1e-9
            assert d.inf_abs(lo, hi) <= vals.min() + 1e-9

    def test_derivative_one_sided_conventions(self):
        d = LinearAtRoot(1.0, 2.0, 3.0)
        assert d.derivative(1.5) == 2.0
        assert d.derivative(0.5) == -2.0
        assert d.derivative(1.0) == 2.0  # pointing away from the root
        assert d.derivative(4.5) == 0.0  # beyond the cap

    def test_derivative_matches_finite_differences(self):
        fams = [
            Oscillatory(0.0, 1.0, 3.0),
            PolynomialBounded((0.5, -0.3, 0.2)),
        ]
        for d in fams:
            for x in (0.37, 1.21, -0.83):
                h = 1e-7
                fd = (d(x + h) - d(x - h)) / (2 * h)
                assert d.derivative(x) == pytest.approx(fd, rel=1e-4, abs=1e-4)


class TestGenerator:
    def test_noise_only(self, unit):
        g = GeneratorInput(x=0.0, f=0.0, fp=0.0, fpp=2.0)
        assert generator_apply(unit, Constant(1.0), g) == 1.0

    def test_drift_only(self, unit):
        g = GeneratorInput(x=2.0, f=5.0, fp=1.0, fpp=0.0)
        assert generator_apply(unit, Constant(0.0), g) == -6.0

    def test_quadratic_test_function(self, unit):
        # V(x) = x^2 at x = 1: drift term vanishes, sigma^2 remains
        g = GeneratorInput(x=1.0, f=1.0, fp=2.0, fpp=2.0)
        assert generator_apply(unit, Constant(1.0), g) == 1.0

    @given(
        x=finite_x,
        f1=finite_x, fp1=finite_x, fpp1=finite_x,
        f2=finite_x, fp2=finite_x, fpp2=finite_x,
        c1=st.floats(-3, 3), c2=st.floats(-3, 3),
    )
    def test_linearity(self, x, f1, fp1, fpp1, f2, fp2, fpp2, c1, c2):
        p = PotentialParams()
        d = LinearAtRoot(0.0, 1.0, 10.0)
        lhs = generator_apply(
            p, d,
            GeneratorInput(x, c1 * f1 + c2 * f2, c1 * fp1 + c2 * fp2,
                           c1 * fpp1 + c2 * fpp2),
        )
        rhs = c1 * generator_apply(p, d, GeneratorInput(x, f1, fp1, fpp1)) + \
            c2 * generator_apply(p, d, GeneratorInput(x, f2, fp2, fpp2))
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            GeneratorInput(math.nan, 0.0, 0.0, 0.0)


class TestDeterministicFlow:
    def test_fixed_points(self, unit):
        assert deterministic_flow(unit, 1.0, 17.0) == 1.0
        assert deterministic_flow(unit, 0.0, 3.0) == 0.0
        assert deterministic_flow(unit, -1.0, 5.0) == -1.0

    def test_closed_form_value(self, unit):
        # x0 = 0.5, t = 1: e / sqrt(e^2 - 1 + 4)
        e = math.e
        expected = e / math.sqrt(e * e - 1.0 + 4.0)
        assert deterministic_flow(unit, 0.5, 1.0) == pytest.approx(
            expected, rel=1e-14
        )

    def test_against_ode_oracle(self, unit):
        # independent oracle: high-accuracy adaptive ODE integration
        for x0 in (0.5, -0.5, 2.0, -2.0, 0.05):
            sol = solve_ivp(
                lambda t, y: -y**3 + y, (0.0, 3.0), [x0],
                rtol=1e-12, atol=1e-14,
            )
            assert deterministic_flow(unit, x0, 3.0) == pytest.approx(
                float(sol.y[0, -1]), rel=1e-9, abs=1e-12
            )

    def test_long_time_limits(self, unit):
        assert deterministic_flow(unit, -0.5, 40.0) == pytest.approx(-1.0, abs=1e-12)
        assert deterministic_flow(unit, 3.0, 40.0) == pytest.approx(1.0, abs=1e-12)
        assert deterministic_flow(unit, 1e-300, 800.0) == pytest.approx(1.0, rel=1e-9)

    def test_sign_and_monotonicity(self, unit):
        for x0 in (0.3, -0.3, 2.5, -2.5):
            prev = abs(x0)
            for t in (0.5, 1.0, 2.0, 4.0):
                x = deterministic_flow(unit, x0, t)
                assert (x > 0) == (x0 > 0)
                # |x| monotone toward the well at 1
                assert abs(abs(x) - 1.0) <= abs(prev - 1.0) + 1e-15
                prev = abs(x)

    @settings(max_examples=200)
    @given(
        x0=st.floats(min_value=-3.0, max_value=3.0).filter(lambda v: abs(v) > 1e-6),
        s=st.floats(min_value=0.0, max_value=10.0),
        t=st.floats(min_value=0.0, max_value=10.0),
    )
    def test_semigroup(self, x0, s, t):
        p = PotentialParams()
        one = deterministic_flow(p, deterministic_flow(p, x0, s), t)
        two = deterministic_flow(p, x0, s + t)
        assert one == pytest.approx(two, rel=1e-12, abs=1e-15)

    def test_rescaled_params_consistency(self):
        # x(t) = sqrt(a/b) * y(a t / lam) against direct ODE integration
        p = PotentialParams(a=2.0, b=0.5, lam=3.0)
        sol = solve_ivp(
            lambda t, y: (p.a * y - p.b * y**3) / p.lam, (0.0, 4.0), [0.7],
            rtol=1e-12, atol=1e-14,
        )
        assert deterministic_flow(p, 0.7, 4.0) == pytest.approx(
            float(sol.y[0, -1]), rel=1e-9
        )

    def test_euler_first_order_convergence(self, unit):
        # forward Euler on the drift ODE converges at observed order >= 0.9
        def euler_err(h):
            worst = 0.0
            for x0 in (0.5, -2.0):
                x = x0
                n = int(round(5.0 / h))
                for i in range(n):
                    x = x + h * drift(unit, x)
                worst = max(worst, abs(x - deterministic_flow(unit, x0, 5.0)))
            return worst

        e1, e2, e4 = euler_err(0.02), euler_err(0.01), euler_err(0.005)
        assert math.log2(e1 / e2) >= 0.9
        assert math.log2(e2 / e4) >= 0.9

    def test_rejects_bad_inputs(self, unit):
        with pytest.raises(ValueError):
            deterministic_flow(unit, math.inf, 1.0)
        with pytest.raises(ValueError):
            deterministic_flow(unit, 0.5, -1.0)

    def test_crossing_time_round_trip(self, unit):
        t = flow_crossing_time(unit, 0.3, 0.5)
        assert t == pytest.approx(0.5 * math.log((1 / 0.09 - 1) / (1 / 0.25 - 1)))
        assert deterministic_flow(unit, 0.3, t) == pytest.approx(0.5, rel=1e-12)
        t2 = flow_crossing_time(unit, 2.0, 1.5)
        assert deterministic_flow(unit, 2.0, t2) == pytest.approx(1.5, rel=1e-12)


class TestAssumptions:
    def test_margins(self):
        assert validate_assumptions(Constant(5.0)).a2_margin == SQRT2
        assert validate_assumptions(LinearAtRoot(0.0, 3.0, 10.0)).a2_margin == SQRT2
        quad = PolynomialBounded((0.0, 0.0, 1.0))  # sigma = x^2
        assert validate_assumptions(quad).a2_margin == pytest.approx(SQRT2 - 1.0)
        assert validate_assumptions(quad).admissible

    def test_cubic_growth_inadmissible(self):
        cubic = PolynomialBounded((0.0, 0.0, 0.0, 1.0))
        rep = validate_assumptions(cubic)
        assert rep.a2_margin == -math.inf
        assert not rep.admissible

    def test_a1_by_construction(self):
        assert validate_assumptions(Oscillatory(0.0, 1.0, 3.0)).a1


class TestRootDiagnostics:
    def test_linear_slopes(self):
        assert LinearAtRoot(0.0, 1.5, 10.0).root_slopes(0.0) == (1.5, 1.5)
        with pytest.raises(AssumptionError):
            LinearAtRoot(0.0, 1.5, 10.0).root_slopes(1.0)

    def test_polynomial_double_root(self):
        d = PolynomialBounded((1.0, -2.0, 1.0))  # (x-1)^2
        assert d.root_slopes(1.0) == (0.0, 0.0)

    def test_tabulated_asymmetric_slopes(self):
        d = TabulatedLipschitz((-1.0, 0.0, 1.0), (2.0, 0.0, 1.0))
        assert d.root_slopes(0.0) == (2.0, 1.0)
        assert d.linear_slope_at_root(0.0) is None

    def test_structural_linearity(self):
        assert LinearAtRoot(0.0, SQRT2, 10.0).linear_slope_at_root(0.0) == SQRT2
        assert Oscillatory(0.0, 2.0, 2.0).linear_slope_at_root(0.0) == 2.0
        assert Oscillatory(0.0, 1.0, 3.0).linear_slope_at_root(0.0) is None
        d = TabulatedLipschitz((-1.0, 0.0, 1.0), (SQRT2, 0.0, SQRT2))
        assert d.linear_slope_at_root(0.0) == SQRT2
