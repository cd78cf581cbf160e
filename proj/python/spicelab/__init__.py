from ._spicelab import (
    Dictionary,
    SolverConfig,
    SpicelabError,
    certify,
    default_config,
    frequency_grid,
    lad_objective,
    run_experiment,
    simulate,
    solve_lad_lasso,
    solve_sqrt_lasso,
    spice,
    sqrt_lasso_objective,
    uniform_time_samples,
    weights,
)

__all__ = [
    "Dictionary",
    "SolverConfig",
    "SpicelabError",
    "certify",
    "default_config",
    "frequency_grid",
    "lad_objective",
    "run_experiment",
    "simulate",
    "solve_lad_lasso",
    "solve_sqrt_lasso",
    "spice",
    "sqrt_lasso_objective",
    "uniform_time_samples",
    "weights",
]
