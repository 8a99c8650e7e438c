"""
Inter-carrier interference — test suite.

 Group 1 — Doppler parameter and Gaussian ICI power
 Group 2 — leakage
 Group 3 — closed form and small-b limit
 Group 4 — exact per-subcarrier ICI on the full 512-subcarrier band
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import make_config
from mimo_uplink.ici import (
    doppler_b,
    ici_integral_factor,
    ici_model,
    ici_power_closed_form,
    ici_power_exact,
    ici_power_profile,
    ici_power_small_b,
    leakage,
    profile_statistics,
    sigma_u_sq,
)
from mimo_uplink.system import build_allocation, sample_power_coefficients

_TINY_BAND = dict(n_subcarriers=16, n_users=64, users_per_subcarrier=8, subcarriers_per_user=2)


# ═══ Group 1 — Doppler parameter and Gaussian ICI power ═══

def test_lte_doppler_example():
    # 100 km/h at 2 GHz with 70 μs symbols
    cfg = make_config(v_max=100 / 3.6, carrier_frequency=2e9, subcarrier_spacing=1 / 70e-6)
    assert doppler_b(cfg) == pytest.approx(0.0407, abs=2e-4)


def test_static_users_have_no_ici():
    cfg = make_config(v_max=0.0)
    assert doppler_b(cfg) == 0.0
    assert sigma_u_sq(cfg) == 0.0
    assert ici_power_closed_form(cfg) == 0.0


def test_reference_doppler_and_sigma_u():
    cfg = make_config(v_max=25.0)
    assert doppler_b(cfg) == pytest.approx(0.07854, rel=1e-3)
    assert sigma_u_sq(cfg) == pytest.approx(3.43e-4, rel=2e-3)


def test_sigma_u_at_b_004():
    assert 0.04**2 / 18 == pytest.approx(8.89e-5, rel=1e-3)


# ═══ Group 2 — leakage ═══

def test_static_leakage_is_orthogonal():
    cfg = make_config(v_max=0.0, **_TINY_BAND)
    assert leakage(cfg, 3, 3) == pytest.approx(1.0)
    assert leakage(cfg, 3, 4) == pytest.approx(0.0, abs=1e-20)


@pytest.mark.parametrize("v_max", [5.0, 100.0])
def test_leakage_is_symmetric_and_bounded(v_max):
    cfg = make_config(v_max=v_max, **_TINY_BAND)
    assert abs(leakage(cfg, 5, 9) - leakage(cfg, 9, 5)) <= 1e-10
    values = [leakage(cfg, 0, j) for j in range(cfg.n_subcarriers)]
    assert all(0.0 <= v <= 1.0 for v in values)
    assert values[1] > values[2] > values[5]


def test_leakage_sums_to_one_over_a_wide_band():
    cfg = make_config(v_max=100.0)
    centre = cfg.n_subcarriers // 2
    total = sum(leakage(cfg, centre, j) for j in range(cfg.n_subcarriers))
    assert total == pytest.approx(1.0, abs=1e-4)


# ═══ Group 3 — closed form and small-b limit ═══

def test_closed_form_matches_small_b_at_reference_point():
    cfg = make_config(v_max=25.0, users_per_subcarrier=8, subcarriers_per_user=2)
    assert ici_power_closed_form(cfg) == pytest.approx(1.37e-2, rel=5e-3)
    assert ici_power_closed_form(cfg) == pytest.approx(ici_power_small_b(cfg), rel=5e-3)


def test_small_b_agreement_at_lte_point():
    factor = ici_integral_factor(0.04)
    assert abs(factor - 0.04**2 / 18) / factor <= 2e-3


@pytest.mark.parametrize("b", [0.005, 0.02, 0.05, 0.1])
def test_small_b_agreement_up_to_one_tenth(b):
    factor = ici_integral_factor(b)
    assert abs(factor - b**2 / 18) / factor <= 1e-2


def test_closed_form_depends_on_ratio_only():
    a = ici_power_closed_form(make_config(users_per_subcarrier=8, subcarriers_per_user=2))
    b = ici_power_closed_form(make_config(users_per_subcarrier=32, subcarriers_per_user=8))
    assert a == b


def test_doubling_users_doubles_closed_form():
    base = ici_power_closed_form(make_config(users_per_subcarrier=8, subcarriers_per_user=2, n_users=2048))
    doubled = ici_power_closed_form(make_config(users_per_subcarrier=16, subcarriers_per_user=2, n_users=4096))
    assert doubled == pytest.approx(2 * base, rel=1e-12)


def test_closed_form_increases_with_speed():
    speeds = np.linspace(1.0, 50.0, 25)
    values = [ici_power_closed_form(make_config(v_max=v)) for v in speeds]
    assert np.all(np.diff(values) > 0)


# ═══ Group 4 — exact per-subcarrier ICI ═══

def test_exact_ici_vanishes_without_mobility():
    cfg = make_config(v_max=0.0, **_TINY_BAND)
    plan = build_allocation(cfg)
    assert ici_power_exact(cfg, plan, 4) == pytest.approx(0.0, abs=1e-20)


def test_single_subcarrier_band_has_no_ici():
    cfg = make_config(n_subcarriers=1, n_users=8, users_per_subcarrier=8, subcarriers_per_user=1)
    assert ici_power_exact(cfg, build_allocation(cfg), 0) == 0.0


def test_exact_matches_profile():
    cfg = make_config(v_max=50.0, **_TINY_BAND)
    plan = sample_power_coefficients(build_allocation(cfg), "random", seed=4)
    profile = ici_power_profile(cfg, plan)
    for i in (0, 7, 15):
        assert ici_power_exact(cfg, plan, i) == pytest.approx(profile[i], rel=1e-10)


@pytest.mark.slow
@pytest.mark.parametrize("v_max", [5.0, 25.0, 100.0])
def test_exact_sum_matches_closed_form_on_512_subcarriers(v_max):
    cfg = make_config(v_max=v_max)
    plan = build_allocation(cfg)
    centre = ici_power_exact(cfg, plan, cfg.n_subcarriers // 2)
    closed = ici_power_closed_form(cfg)
    assert abs(centre - closed) / closed <= 1e-2, f"V_max={v_max}: {centre} vs {closed}"


@pytest.mark.slow
@pytest.mark.parametrize("v_max", [25.0, 100.0])
def test_ici_spread_shrinks_as_users_per_subcarrier_grow(v_max):
    cvs = []
    for n_u in (8, 16, 32, 64):
        cfg = make_config(v_max=v_max, users_per_subcarrier=n_u, subcarriers_per_user=n_u // 4)
        base = build_allocation(cfg)
        closed = ici_power_closed_form(cfg)
        means, spreads = [], []
        for seed in range(20):
            profile = ici_power_profile(cfg, sample_power_coefficients(base, "random", seed=seed))
            mean, cv = profile_statistics(profile)
            means.append(mean)
            spreads.append(cv)
        assert abs(np.mean(means) - closed) / closed <= 2e-2, f"N_U={n_u}: mean drifted from closed form"
        cvs.append(float(np.mean(spreads)))
    assert all(a > b for a, b in zip(cvs, cvs[1:])), f"coefficients of variation {cvs}"


def test_model_bundles_profile():
    cfg = make_config(v_max=25.0, **_TINY_BAND)
    model = ici_model(cfg, build_allocation(cfg))
    assert model.sigma_u_sq == pytest.approx(sigma_u_sq(cfg))
    assert model.leakage_table.shape == (16,)
    assert model.per_subcarrier_power.shape == (16,)
