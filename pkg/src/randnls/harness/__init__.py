"""Configuration, persistence and orchestration of runs and ensembles."""
from randnls.harness.checks import CheckRow, check_suite, format_table
from randnls.harness.config import RunConfig, dumps, load, loads, parse_seed_range
from randnls.harness.fieldio import load_field, save_field
from randnls.harness.runner import (
    EXIT_BLOWUP,
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_PARTIAL,
    EnsembleResult,
    RunResult,
    diagnose,
    run_ensemble,
    run_single,
)
