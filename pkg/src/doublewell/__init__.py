"""Overdamped Langevin dynamics in a double-well potential.

Simulation (Euler-Maruyama / Milstein with seeded, reproducible batches),
equilibrium stability classification, moment-decay rates and envelopes,
exit-time statistics against analytic bounds, and invariant-measure
estimation.  See the README for the CLI and the acceptance suite.
"""

from .model import (
    AssumptionError,
    AssumptionReport,
    Constant,
    DiffusionSpec,
    GeneratorInput,
    LinearAtRoot,
    Oscillatory,
    PolynomialBounded,
    PotentialParams,
    TabulatedLipschitz,
    deterministic_flow,
    drift,
    generator_apply,
    sigma,
    validate_assumptions,
)
from .sde import (
    BatchResult,
    BlowUpError,
    ExitAnnulus,
    ExitInterval,
    HitInterval,
    SimConfig,
    StoppingRule,
    Trajectory,
    run_batch,
    simulate,
    step,
)
from .stability import (
    DecayRate,
    KappaEstimate,
    StabilityCase,
    StabilityVerdict,
    classify,
    decay_rate,
    kappa_at_root,
    lyapunov_drift_check,
    moment_decay_check,
    sign_condition_check,
)
from .decay import (
    LinearCapped,
    PhiTransform,
    PowerCapped,
    RateFunction,
    SmoothedConcave,
    SuperGeometric,
    asymptotic_rate,
    dominate,
    envelope,
    onto_check,
    phi_c,
    phi_c_inverse,
)
from .ergodic import (
    EmpiricalMeasure,
    ExitStats,
    annulus_exit_time,
    mean_hitting_time,
    occupancy_lower_bound,
    stationary_density,
    time_average_measure,
)
from .kernels import backend

__version__ = "0.1.0"
