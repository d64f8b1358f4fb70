import math
import os
import pathlib

import pytest

import gmetro

SCENARIOS = pathlib.Path(os.environ.get("GMETRO_SCENARIO_DIR", pathlib.Path(__file__).parents[2] / "scenarios"))


def test_hamming_single_flip():
    word = gmetro.hamming_encode(0x5A5)
    data, corrected = gmetro.hamming_decode(word ^ (1 << 7))
    assert data == 0x5A5
    assert corrected


def test_crc8_check_value():
    assert gmetro.crc8(b"123456789") == 0xF4


def test_frame_round_trip():
    bits = gmetro.frame_pack("HELLO", 3, b"\xff\xec")
    out = gmetro.frame_unpack(bits)
    assert out["type"] == "HELLO"
    assert out["seq"] == 3
    assert out["payload"] == b"\xff\xec"


def test_bad_frame_raises():
    bits = gmetro.frame_pack("ACK", 1)
    bits[0] ^= 1
    bits[1] ^= 1
    bits[2] ^= 1
    with pytest.raises(gmetro.GmetroError):
        gmetro.frame_unpack(bits)


def test_manchester_round_trip():
    bits = [1, 0, 0, 1, 1, 1, 0]
    assert gmetro.manchester_decode(gmetro.manchester_encode(bits)) == bits


def test_loss_interval():
    p = 5e-6
    q = 1 - p
    tail = 1 - q**15 - 15 * p * q**14
    assert gmetro.block_loss_probability(p) == pytest.approx(tail, rel=1e-9)
    assert gmetro.message_loss_interval_s(p) / 3600 == pytest.approx(31.7, abs=0.1)
    assert math.isinf(gmetro.message_loss_interval_s(0.0))


def test_lasers():
    assert gmetro.vernier_range_ghz(100, 110) == pytest.approx(1100)
    assert gmetro.dbr_heater_power_mw(25) == pytest.approx(48.1, abs=0.1)


def test_plan_sweep():
    plan = gmetro.plan_sweep(16, 100, 193.1, 50, 3)
    assert plan["points"] == 129
    assert plan["worst_case_s"] == pytest.approx(6.45)


def test_validate_reports_errors():
    errors = gmetro.validate_scenario("[plan]\nspacing_ghz = -100\n")
    assert errors
    assert any("UNIT_VIOLATION" in e for e in errors)


def test_run_scenario_deterministic():
    text = (SCENARIOS / "pairwise.ini").read_text()
    m1, t1, v1 = gmetro.run(text)
    m2, t2, v2 = gmetro.run(text)
    assert t1 == t2
    assert v1 == [] and v2 == []
    assert m1["operator_events"] == 1
    assert m1 == m2


def test_canonical_round_trip():
    text = (SCENARIOS / "horseshoe8.ini").read_text()
    canon = gmetro.canonical_scenario(text)
    assert gmetro.canonical_scenario(canon) == canon
