"""Python access to the gmetro simulator core."""

import json

from ._gmetro import (  # noqa: F401
    GmetroError,
    block_loss_probability,
    canonical_scenario,
    crc8,
    dbr_heater_power_mw,
    frame_pack,
    frame_unpack,
    hamming_decode,
    hamming_encode,
    hold_step,
    manchester_decode,
    manchester_encode,
    mems_frequency_thz,
    message_loss_interval_s,
    plan_sweep,
    spectral_fraction_in_band,
    sweep_power,
    validate_scenario,
    vernier_range_ghz,
)
from ._gmetro import run_scenario as _run_scenario


def run(text, seed=None):
    """Run a scenario; returns (metrics dict, trace lines, violations)."""
    metrics, trace, violations = _run_scenario(text, seed)
    return json.loads(metrics), trace, violations
