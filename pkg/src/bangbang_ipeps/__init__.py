from .errors import (
    BangBangError,
    ConfigError,
    ConeTooLargeError,
    ConvergenceError,
    ConvergenceWarning,
    DegenerateNormError,
    MemoryBudgetError,
    NotUnitaryError,
    NumericalError,
    ShapeError,
)
from .settings import BaseSettings, SettingsConfigDict, NtuOptions, BoundaryOptions, OptimizerOptions, RunConfig
from .ipeps import (
    BondClass,
    IPepsState,
    absorb_gate_exact,
    apply_one_site,
    init_product_x,
    load_state,
    save_state,
    split_zz_gate,
)
from .sequences import GateSequence, ap_sequence, bb_sequence, load_sequence, save_sequence
from .ntu import EvolutionReport, GateRecord, build_environment, evolve, truncate_bond
from .boundary import BoundaryMPS, apply_row, compress, converge_boundary, fidelity_per_site
from .observables import (
    ObservableResult,
    ObservableSet,
    connected_correlator,
    energy_per_bond,
    environment,
    expect_one_site,
    expect_two_site,
    fit_correlation_length,
    measure,
)
from .optimize import CostFunction, nelder_mead, optimize_bb, pattern_search, scan_dt
from .oracle import exact_expectation, extract_cone, oracle_values, pipeline_check

__all__ = [
    "BangBangError",
    "ConfigError",
    "ConeTooLargeError",
    "ConvergenceError",
    "ConvergenceWarning",
    "DegenerateNormError",
    "MemoryBudgetError",
    "NotUnitaryError",
    "NumericalError",
    "ShapeError",
    "BaseSettings",
    "SettingsConfigDict",
    "NtuOptions",
    "BoundaryOptions",
    "OptimizerOptions",
    "RunConfig",
    "BondClass",
    "IPepsState",
    "absorb_gate_exact",
    "apply_one_site",
    "init_product_x",
    "load_state",
    "save_state",
    "split_zz_gate",
    "GateSequence",
    "ap_sequence",
    "bb_sequence",
    "load_sequence",
    "save_sequence",
    "EvolutionReport",
    "GateRecord",
    "build_environment",
    "evolve",
    "truncate_bond",
    "BoundaryMPS",
    "apply_row",
    "compress",
    "converge_boundary",
    "fidelity_per_site",
    "ObservableResult",
    "ObservableSet",
    "connected_correlator",
    "energy_per_bond",
    "environment",
    "expect_one_site",
    "expect_two_site",
    "fit_correlation_length",
    "measure",
    "CostFunction",
    "nelder_mead",
    "optimize_bb",
    "pattern_search",
    "scan_dt",
    "exact_expectation",
    "extract_cone",
    "oracle_values",
    "pipeline_check",
]
