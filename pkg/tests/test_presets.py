"""
Experiment presets — test suite.

 Group 1 — registry and request checks
 Group 2 — analytic sweeps
 Group 3 — Monte Carlo sweep
"""

from __future__ import annotations

import numpy as np
import pandas as pd
import pytest

from conftest import make_config
from mimo_uplink.errors import DomainError
from mimo_uplink.ici import ici_power_closed_form, profile_statistics
from mimo_uplink.presets import PRESETS, SCALES, get_preset
from mimo_uplink.rate import per_symbol_rate, sinr_trajectory, sum_rate
from mimo_uplink.system import build_allocation, scaled_user_split

HEADERS = {
    "fig1": "pilot_snr_db,nmse_singlecarrier,nmse_multicarrier",
    "fig2": "v_max_mps,n_users,allocation,subcarrier,ici_power",
    "fig3": "v_max_mps,combiner,n,analytic_rate,empirical_rate,empirical_stderr,failed_trials",
    "fig4": "v_max_mps,n_users,combiner,n,rate_bps",
    "fig5": "v_max_mps,n_users,combiner,n,rate_bps",
    "fig6": "v_max_mps,mu_pct,combiner,sum_rate_bps",
    "fig7": "v_max_mps,mu_pct,n_users,combiner,sum_rate_bps",
    "fig8": "v_max_mps,n_users,combiner,n_data,sum_rate_bps",
    "fig9": "v_max_mps,n_users,combiner,snr_db,n_data_opt,sum_rate_bps",
}


@pytest.fixture(scope="module")
def cfg():
    return make_config()


# ═══ Group 1 — registry and request checks ═══

def test_every_study_sweep_is_registered():
    assert sorted(PRESETS) == sorted(HEADERS)
    for name, header in HEADERS.items():
        assert ",".join(PRESETS[name].columns) == header, f"{name} header drifted"
        assert PRESETS[name].output == f"{name}.csv"


def test_only_fig3_is_monte_carlo():
    assert [name for name, p in PRESETS.items() if p.monte_carlo] == ["fig3"]


def test_scales():
    assert (SCALES["desk"].n_antennas, SCALES["desk"].trials) == (64, 20_000)
    assert (SCALES["paper"].n_antennas, SCALES["paper"].trials) == (256, 100_000)


@pytest.mark.parametrize(
    "name, kwargs",
    [
        ("fig4", dict(combiners=["mrc"])),
        ("fig5", dict(combiners=["zf"])),
        ("fig6", dict(scale="cluster")),
        ("fig3", dict(trials=0)),
    ],
)
def test_bad_requests_are_rejected(cfg, name, kwargs):
    with pytest.raises(DomainError):
        get_preset(name).run(cfg, **kwargs)


def test_unknown_preset():
    with pytest.raises(DomainError, match="fig10"):
        get_preset("fig10")


# ═══ Group 2 — analytic sweeps ═══

def test_fig1_nmse_sweep(cfg):
    table = get_preset("fig1").run(cfg)
    assert table["pilot_snr_db"].tolist() == [float(s) for s in range(-10, 51, 5)]
    assert (table["nmse_multicarrier"] >= table["nmse_singlecarrier"]).all()
    single = table.set_index("pilot_snr_db")["nmse_singlecarrier"]
    assert single[40.0] <= 1.1e-4


@pytest.mark.slow
def test_fig2_profiles(cfg):
    table = get_preset("fig2").run(cfg, seed=4)
    assert len(table) == 2 * 4 * 2 * cfg.n_subcarriers
    assert set(table["allocation"]) == {"uniform", "random"}

    random_cv = []
    for n_u in (8, 16, 32, 64):
        rows = table[(table["v_max_mps"] == 25.0) & (table["n_users"] == n_u)]
        uniform = rows[rows["allocation"] == "uniform"]["ici_power"].to_numpy()
        mean, _ = profile_statistics(uniform)
        assert mean == pytest.approx(ici_power_closed_form(scaled_user_split(cfg, n_u)), rel=0.02)
        random_cv.append(profile_statistics(rows[rows["allocation"] == "random"]["ici_power"].to_numpy())[1])
    assert all(b < a for a, b in zip(random_cv, random_cv[1:])), f"CV should fall with N_U: {random_cv}"

    again = get_preset("fig2").run(cfg, seed=4)
    pd.testing.assert_frame_equal(table, again)


@pytest.mark.parametrize("name, combiner", [("fig4", "zf"), ("fig5", "mrc")])
def test_rate_curves_per_user_count(cfg, name, combiner):
    table = get_preset(name).run(cfg)
    assert len(table) == 3 * 6 * 30
    assert set(table["combiner"]) == {combiner}
    for (_, _), group in table.groupby(["v_max_mps", "n_users"]):
        assert group["rate_bps"].is_monotonic_decreasing
    point = table[(table["v_max_mps"] == 100.0) & (table["n_users"] == 32) & (table["n"] == 7)]
    point_cfg = scaled_user_split(cfg.with_updates(v_max=100.0), 32)
    expected = per_symbol_rate(sinr_trajectory(combiner, point_cfg, build_allocation(point_cfg), [7])[0], point_cfg)
    assert point["rate_bps"].item() == pytest.approx(expected, rel=1e-12)


def test_fig6_pilot_percentage_curves(cfg):
    table = get_preset("fig6").run(cfg)
    assert len(table) == 101 * 3 * 2
    best = table.loc[table.groupby(["v_max_mps", "combiner"])["sum_rate_bps"].idxmax()]
    best = best.set_index(["combiner", "v_max_mps"])["mu_pct"]
    assert best[("zf", 0.0)] == 12.5
    assert best[("mrc", 0.0)] == 12.5
    assert best[("zf", 100.0)] > 12.5


def test_fig7_peaks_at_64_users(cfg):
    table = get_preset("fig7").run(cfg, combiners=["zf"])
    fast = table[table["v_max_mps"] == 100.0]
    for mu, group in fast.groupby("mu_pct"):
        rates = group.set_index("n_users")["sum_rate_bps"]
        if mu < 50.0:
            assert rates.idxmax() == 64, f"μ={mu}% peaks at N_U={rates.idxmax()}"
        else:
            assert abs(rates[128] - rates[64]) < 0.1 * rates[64], "μ=50% should flatten out past N_U=64"


def test_fig8_matches_direct_sum_rate(cfg):
    table = get_preset("fig8").run(cfg)
    assert len(table) == 3 * 6 * 64 * 2
    row = table[
        (table["v_max_mps"] == 25.0) & (table["n_users"] == 16) & (table["combiner"] == "mrc") & (table["n_data"] == 12)
    ]
    point_cfg = scaled_user_split(cfg, 16).with_updates(frame_data_length=12)
    direct = sum_rate("mrc", point_cfg, build_allocation(point_cfg)).system_sum_rate
    assert row["sum_rate_bps"].item() == pytest.approx(direct, rel=1e-12)


def test_fig9_optimized_rates_grow_with_snr(cfg):
    table = get_preset("fig9").run(cfg)
    assert len(table) == 3 * 4 * 2 * 9
    assert table["n_data_opt"].between(1, 64).all()
    for _, group in table.groupby(["v_max_mps", "n_users", "combiner"]):
        assert np.all(np.diff(group["sum_rate_bps"].to_numpy()) > 0)


# ═══ Group 3 — Monte Carlo sweep ═══

def test_fig3_analytic_columns_are_the_closed_form(cfg):
    table = get_preset("fig3").run(cfg, seed=7, trials=20)
    assert len(table) == 3 * 2 * 30
    assert list(table["combiner"].unique()) == ["zf", "mrc"]
    desk = cfg.with_updates(n_antennas=64, v_max=25.0)
    plan = build_allocation(desk)
    for combiner in ("zf", "mrc"):
        rows = table[(table["v_max_mps"] == 25.0) & (table["combiner"] == combiner)]
        assert rows["n"].tolist() == list(range(1, 31))
        expected = per_symbol_rate(sinr_trajectory(combiner, desk, plan, range(1, 31)), desk)
        assert rows["analytic_rate"].tolist() == expected.tolist()
    assert (table["failed_trials"] == 0).all()


@pytest.mark.slow
def test_fig3_is_reproducible_across_worker_counts(cfg):
    # 501 trials span two joblib chunks per grid point
    serial = get_preset("fig3").run(cfg, seed=7, trials=501, combiners=["mrc"], workers=1)
    parallel = get_preset("fig3").run(cfg, seed=7, trials=501, combiners=["mrc"], workers=2)
    pd.testing.assert_frame_equal(serial, parallel, check_exact=True)
    other = get_preset("fig3").run(cfg, seed=8, trials=20, combiners=["mrc"], workers=1)
    assert not serial["empirical_rate"].equals(other["empirical_rate"])
