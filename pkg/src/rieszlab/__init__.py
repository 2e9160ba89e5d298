"""rieszlab: solver and verification laboratory for the subcritical integral
equation f^{q-1}(x) = int_Omega f(y) |x-y|^{alpha-n} dy on bounded domains,
with concentration (blowup) diagnostics for schedules approaching the
critical exponent 2n/(n+alpha)."""

from .analytic import (
    BubbleProfile,
    Exponents,
    ParameterError,
    Regime,
    bubble_integrals,
    derive_exponents,
    gamma_fn,
    pin_bubble,
    radial_integral,
    sharp_constant,
    sigma_const,
    unit_sphere_area,
)
from .blowup import (
    BubbleFit,
    MonotonicityReport,
    RescaledProfile,
    SweepRecord,
    axis_probes,
    boundary_monotonicity_check,
    build_records,
    concentration_scale,
    dirac_limit_check,
    envelope_check,
    extremal_index,
    fit_bubble,
    fit_window,
    kelvin_transform,
    mu_power_check,
    product_limit_check,
    rescale_profile,
    smooth_bump,
    write_sweep_csv,
)
from .config import ConfigError, ExperimentConfig, load_config, parse_config_text, resolve_config_path
from .discretization import (
    Disk,
    Grid,
    Interval,
    KernelOperator,
    MemoryCapError,
    Rectangle,
    apply_kernel,
    assemble_kernel,
    build_grid,
    energy,
    lq_norm,
    quotient,
    write_grid_csv,
)
from .harness import CheckResult, SweepAnalysis, evaluate_checks, format_report, run_single, run_sweep
from .solver import (
    ConvergenceError,
    ExtremalSolution,
    SolverOptions,
    continuation_sweep,
    iterate_once,
    solve,
    write_solution_csv,
)

__version__ = "0.1.0"
