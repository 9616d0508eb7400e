"""Exchange Monte Carlo sampling of supports and multi-histogram reweighting."""

from .chains import (
    LADDER_RANGE,
    STEP_TABLE,
    McRun,
    TemperatureLadder,
    default_steps,
    exchange_step,
    mc_pair_flip,
    run_exchange_mc,
)
from .wham import WhamResult, multi_histogram_phi0, solve_wham

__all__ = [
    "LADDER_RANGE",
    "STEP_TABLE",
    "McRun",
    "TemperatureLadder",
    "default_steps",
    "exchange_step",
    "mc_pair_flip",
    "run_exchange_mc",
    "WhamResult",
    "multi_histogram_phi0",
    "solve_wham",
]
