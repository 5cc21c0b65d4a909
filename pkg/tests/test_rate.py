from __future__ import annotations

import json
import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fovopt.errors import DomainError, InputError
from fovopt.rate import (
    ContentProfile,
    SegmentConfig,
    bundled_profiles,
    fov_bitrate,
    get_profile,
    load_profiles,
    min_rl_q_hat_for,
    parse_profiles,
    published_bd_rates,
    refinement_duration,
    rl_bitrate,
)

BALBOA = ContentProfile("Balboa", 21.86, 1.1621, 0.8872, 5.95)

TABLE = [
    ("Balboa", 21.86, 1.1621, 0.8872, 5.95),
    ("PoleVault", 28.60, 1.7515, 1.0864, 4.75),
    ("Hangpai2", 38.66, 1.3522, 0.9607, 6.56),
    ("Hangpai3", 20.63, 1.2516, 0.8880, 4.49),
    ("Elephants2", 15.80, 1.1220, 1.0251, 4.38),
    ("NewYork", 11.31, 1.0275, 0.7898, 3.82),
    ("Snowberg", 5.87, 1.2349, 1.0041, 1.34),
    ("Street2", 15.34, 1.1137, 0.8537, 3.79),
]


def test_bundled_profiles_verbatim():
    got = [(p.name, p.r_max, p.alpha, p.beta, p.r_fov) for p in bundled_profiles()]
    assert got == TABLE


def test_published_bd_rates():
    bd = published_bd_rates()
    assert bd["Balboa"] == -11.26 and bd["NewYork"] == -16.30
    assert sum(bd.values()) / 8 == pytest.approx(-9.36, abs=0.005)


def test_rl_bitrate_full_quality_is_rmax():
    for p in bundled_profiles():
        assert rl_bitrate(1.0, 1.0, p) == p.r_max


def test_rl_bitrate_example():
    assert rl_bitrate(0.5, 0.25, BALBOA) == pytest.approx(21.86 * 0.5 ** 1.1621 * 0.25 ** 0.8872,
                                                           rel=1e-15)
    assert rl_bitrate(0.5, 0.25, BALBOA) == pytest.approx(2.855, abs=5e-4)


def test_rl_bitrate_vanishes_at_zero_limit():
    assert rl_bitrate(1e-12, 1.0, BALBOA) < 1e-10


@pytest.mark.parametrize("q, s", [(0.0, 1.0), (1.0, 0.0), (-0.1, 0.5)])
def test_rl_bitrate_domain(q, s):
    with pytest.raises(DomainError):
        rl_bitrate(q, s, BALBOA)


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-3, 0.999), st.floats(1e-3, 0.999), st.floats(1e-3, 1.0))
def test_rl_bitrate_monotone(x1, dx, s):
    x2 = x1 + (1 - x1) * dx
    if x2 <= x1:
        return
    assert rl_bitrate(x1, s, BALBOA) < rl_bitrate(x2, s, BALBOA)
    assert rl_bitrate(s, x1, BALBOA) < rl_bitrate(s, x2, BALBOA)


@pytest.mark.parametrize("tiles, total", [([5.95], 5.95), ([1.0, 2.0, 1.5], 4.5)])
def test_fov_bitrate(tiles, total):
    assert fov_bitrate(tiles) == total


def test_fov_bitrate_empty_warns(caplog):
    with caplog.at_level(logging.WARNING):
        assert fov_bitrate([]) == 0.0
    assert "empty" in caplog.text


def test_fov_bitrate_negative_rejected():
    with pytest.raises(DomainError):
        fov_bitrate([1.0, -0.5])


def test_refinement_duration_examples():
    r_rl = rl_bitrate(0.5, 0.25, BALBOA)
    tau = refinement_duration(5.95, r_rl, SegmentConfig(10.0, 5.0))
    assert tau == pytest.approx((5.95 + r_rl) / 10 * 5, rel=1e-15)
    assert tau == pytest.approx(4.4025, abs=5e-4)
    assert refinement_duration(0.0, 0.0, SegmentConfig(3.0, 5.0)) == 0.0
    assert refinement_duration(3.0, 4.0, SegmentConfig(7.0, 5.0)) == 5.0


def test_refinement_duration_scaling():
    a = refinement_duration(2.0, 1.0, SegmentConfig(4.0, 3.0))
    assert refinement_duration(2.0, 1.0, SegmentConfig(8.0, 3.0)) == pytest.approx(a / 2)
    assert refinement_duration(2.0, 1.0, SegmentConfig(4.0, 6.0)) == pytest.approx(2 * a)


@pytest.mark.parametrize("b, t", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0)])
def test_segment_config_validation(b, t):
    with pytest.raises(DomainError):
        SegmentConfig(b, t)


def test_profile_validation():
    with pytest.raises(DomainError):
        ContentProfile("x", 0.0, 1.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        ContentProfile("x", 1.0, 1.0, 1.0, -1.0)
    with pytest.raises(DomainError):
        ContentProfile("x", 1.0, 1.0, 1.0, 3.0, tile_rates=(1.0, 1.0))
    p = ContentProfile("x", 1.0, 1.0, 1.0, 3.0, tile_rates=(1.0, 2.0))
    assert p.tile_rates == (1.0, 2.0)


def test_min_rl_q_hat_for_is_the_rate_boundary():
    q = min_rl_q_hat_for(BALBOA, 10.0, 0.25)
    assert BALBOA.r_fov + rl_bitrate(q, 0.25, BALBOA) == pytest.approx(10.0, rel=1e-12)
    assert min_rl_q_hat_for(BALBOA, 5.0) == 0.0


def test_parse_profiles_units_and_tiles():
    text = json.dumps([
        {"name": "a", "r_max": 2000, "alpha": 1, "beta": 1, "r_fov": 500, "rate_unit": "kbps"},
        {"name": "b", "r_max": 3, "alpha": 1, "beta": 1, "tile_rates": [1, 0.5]},
    ])
    a, b = parse_profiles(text)
    assert (a.r_max, a.r_fov) == (2.0, 0.5)
    assert b.r_fov == 1.5 and b.tile_rates == (1.0, 0.5)


@pytest.mark.parametrize("text, line", [
    ('[\n {"name": "a",\n  "r_max": }\n]', 3),
    ('{"name": "a"}', None),
    ('[{"name": "a", "alpha": 1, "beta": 1, "r_fov": 1}]', None),
    ('[{"name": "a", "r_max": 1, "alpha": 1, "beta": 1, "r_fov": 1, "rate_unit": "furlongs"}]', None),
])
def test_parse_profiles_errors(text, line):
    with pytest.raises(InputError) as exc:
        parse_profiles(text, "p.json")
    assert exc.value.path == "p.json"
    assert exc.value.line == line


def test_profiles_env_var(tmp_path, monkeypatch):
    path = tmp_path / "alt.json"
    path.write_text(json.dumps([{"name": "Only", "r_max": 1, "alpha": 1, "beta": 1, "r_fov": 0.2}]))
    monkeypatch.setenv("FOVOPT_PROFILES", str(path))
    assert [p.name for p in load_profiles()] == ["Only"]
    monkeypatch.delenv("FOVOPT_PROFILES")
    assert len(load_profiles()) == 8


def test_get_profile():
    assert get_profile("balboa").name == "Balboa"
    with pytest.raises(KeyError):
        get_profile("Nope")


def test_vectorized_rl_bitrate():
    q = np.array([0.1, 0.5, 1.0])
    np.testing.assert_allclose(rl_bitrate(q, 1.0, BALBOA), 21.86 * q ** 1.1621)
