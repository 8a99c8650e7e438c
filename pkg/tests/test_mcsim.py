"""
Monte Carlo engine — test suite.

 Group 1 — received-symbol synthesis
 Group 2 — combining
 Group 3 — trials, determinism and reduction
 Group 4 — campaigns
 Group 5 — agreement with the closed-form bound (desk scale)
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

from conftest import make_config
from mimo_uplink.channel import draw_ue_states, evolve_channel
from mimo_uplink.errors import DomainError, SingularityError
from mimo_uplink.estimation import EstimateBlock, ls_estimate, sigma_hhat_sq
from mimo_uplink.ici import gaussian_ici_variance, ici_power_exact
from mimo_uplink.mcsim import (
    CampaignSpec,
    TrialArrays,
    combine,
    draw_trial,
    measure_sinr,
    run_campaign,
    run_trials,
    summarize_trials,
    synthesize_symbol,
)
from mimo_uplink.rate import Combiner, per_symbol_rate, sinr_trajectory
from mimo_uplink.system import build_allocation

_DESK = dict(n_antennas=64)
_SMALL = dict(n_antennas=16)
# 64 subcarriers keep explicit leakage synthesis cheap
_NARROW_BAND = dict(n_antennas=16, n_subcarriers=64, n_users=256, v_max=100.0)
# twenty rows share one seed; two SE per row would miss about one time in three
SE_MARGIN = 3


def _trial(cfg, seed, n=1, ici_mode="gaussian"):
    plan = build_allocation(cfg)
    rng = np.random.default_rng(seed)
    states = draw_ue_states(cfg, cfg.users_per_subcarrier, rng)
    block = evolve_channel(rng, states, cfg, symbols=[n])
    est = ls_estimate(block, plan, cfg, rng)
    sym = synthesize_symbol(block, est, n, plan, cfg, rng, ici_mode=ici_mode)
    return plan, block, est, sym


def _noiseless_static(**overrides):
    return replace(make_config(v_max=0.0, **{**_SMALL, **overrides}), noise_variance=0.0)


# ═══ Group 1 — received-symbol synthesis ═══

def test_components_sum_to_received_vector():
    _, _, _, sym = _trial(make_config(v_max=25.0, **_SMALL), seed=1, n=7)
    total = sym.known + sym.estimation_error + sym.aging + sym.ici + sym.noise
    assert np.array_equal(sym.received, total)
    assert np.allclose(np.abs(sym.transmitted), 1.0)


def test_received_vector_follows_the_aged_channel():
    cfg = make_config(v_max=50.0, **_SMALL)
    plan, block, _, sym = _trial(cfg, seed=2, n=9)
    x = sym.transmitted * np.sqrt(plan.power_coefficients[0])
    expected = math.sqrt(cfg.effective_tx_power) * block.aged(9) @ x + sym.ici + sym.noise
    assert np.allclose(sym.received, expected, rtol=0.0, atol=1e-12)


def test_static_noiseless_symbol_is_clean():
    cfg = _noiseless_static()
    plan, block, _, sym = _trial(cfg, seed=3)
    x = sym.transmitted * np.sqrt(plan.power_coefficients[0])
    assert np.allclose(sym.received, math.sqrt(cfg.effective_tx_power) * block.pilot_channel @ x, atol=1e-12)


def test_gaussian_ici_power():
    cfg = make_config(v_max=100.0, **_SMALL)
    samples = np.array([_trial(cfg, np.random.SeedSequence([4, t]))[3].ici for t in range(10_000)])
    expected = gaussian_ici_variance(cfg)
    power = np.mean(np.abs(samples) ** 2)
    assert abs(power - expected) <= 3 * expected / math.sqrt(samples.size)


@pytest.mark.slow
def test_explicit_leakage_ici_power():
    cfg = make_config(**_NARROW_BAND)
    plan = build_allocation(cfg)
    samples = np.array(
        [_trial(cfg, np.random.SeedSequence([5, t]), ici_mode="leakage")[3].ici for t in range(2000)]
    )
    expected = ici_power_exact(cfg, plan, 0)
    power = np.mean(np.abs(samples) ** 2)
    assert abs(power - expected) <= 4 * expected / math.sqrt(samples.size)


def test_explicit_leakage_needs_a_narrow_band():
    with pytest.raises(DomainError):
        _trial(make_config(v_max=25.0, **_SMALL), seed=0, ici_mode="leakage")


def test_unknown_ici_mode():
    with pytest.raises(DomainError):
        _trial(make_config(**_SMALL), seed=0, ici_mode="exact")


# ═══ Group 2 — combining ═══

def test_zf_nulls_interference_on_a_clean_channel():
    cfg = _noiseless_static()
    plan, _, est, sym = _trial(cfg, seed=6)
    out = combine(sym, est, "zf")
    expected = math.sqrt(cfg.effective_tx_power) * np.sqrt(plan.power_coefficients[0]) * sym.transmitted
    assert np.allclose(out.output, expected, rtol=0.0, atol=1e-9)


def test_mrc_single_stream_is_a_matched_filter():
    cfg = _noiseless_static(users_per_subcarrier=1, subcarriers_per_user=1, n_users=512)
    plan, _, est, sym = _trial(cfg, seed=7)
    out = combine(sym, est, "mrc")
    h = est.estimate[:, 0]
    expected = math.sqrt(cfg.effective_tx_power) * np.vdot(h, h).real * math.sqrt(plan.power_coefficients[0, 0])
    assert np.allclose(out.output, expected * sym.transmitted, rtol=1e-12)


@pytest.mark.parametrize("combiner", ["zf", "mrc"])
def test_combined_terms_add_up(combiner):
    _, _, est, sym = _trial(make_config(v_max=25.0, **_SMALL), seed=8, n=4)
    out = combine(sym, est, combiner)
    assert np.allclose(sum(out.terms.values()), out.output, rtol=1e-12, atol=1e-10)


def test_rank_deficient_estimate_is_rejected():
    cfg = make_config(**_SMALL)
    _, block, est, sym = _trial(cfg, seed=9)
    twin = est.estimate.copy()
    twin[:, 1] = twin[:, 0]
    broken = EstimateBlock(estimate=twin, error=twin - block.pilot_channel, sigma_hhat_sq=est.sigma_hhat_sq)
    with pytest.raises(SingularityError):
        combine(sym, broken, "zf")
    combine(sym, broken, "mrc")


def test_cross_terms_vanish_on_average():
    cfg = make_config(v_max=100.0, **_SMALL)
    cross = []
    for t in range(2000):
        _, _, est, sym = _trial(cfg, np.random.SeedSequence([10, t]), n=5)
        terms = combine(sym, est, "mrc").terms
        cross.append(np.real(np.conj(terms["ici"]) * terms["noise"]))
    cross = np.array(cross).ravel()
    assert abs(cross.mean()) <= 4 * cross.std() / math.sqrt(cross.size)


# ═══ Group 3 — trials, determinism and reduction ═══

def test_trials_are_identical_for_any_worker_count():
    cfg = make_config(v_max=25.0, **_SMALL)
    plan = build_allocation(cfg)
    serial = run_trials(cfg, plan, 5, ["zf", "mrc"], master_seed=7, point_index=3, trials=1200, workers=1)
    parallel = run_trials(cfg, plan, 5, ["zf", "mrc"], master_seed=7, point_index=3, trials=1200, workers=2)
    for combiner in serial:
        for name in ("gain", "rho_sq", "residual", "failed"):
            assert np.array_equal(getattr(serial[combiner], name), getattr(parallel[combiner], name)), name


def test_measure_sinr_is_seeded():
    cfg = make_config(v_max=25.0, **_SMALL)
    plan = build_allocation(cfg)
    first = measure_sinr(300, 3, "mrc", cfg, plan, master_seed=1)
    second = measure_sinr(300, 3, "mrc", cfg, plan, master_seed=1)
    assert first.empirical_rate == second.empirical_rate
    assert np.array_equal(first.sinr, second.sinr)
    assert measure_sinr(300, 3, "mrc", cfg, plan, master_seed=2).empirical_rate != first.empirical_rate


def test_trials_must_be_positive():
    cfg = make_config(**_SMALL)
    with pytest.raises(DomainError):
        measure_sinr(0, 1, "zf", cfg, build_allocation(cfg), master_seed=0)


def test_single_user_zf_beats_mrc_on_shared_trials():
    cfg = make_config(users_per_subcarrier=1, subcarriers_per_user=1, n_users=512, v_max=25.0, **_SMALL)
    plan = build_allocation(cfg)
    arrays = run_trials(cfg, plan, 1, ["zf", "mrc"], master_seed=11, point_index=0, trials=2000)
    zf = summarize_trials(arrays[Combiner.ZF], "zf", 1, cfg, plan)
    mrc = summarize_trials(arrays[Combiner.MRC], "mrc", 1, cfg, plan)
    assert zf.empirical_sinr > mrc.empirical_sinr


def test_powers_and_rates_are_consistent():
    cfg = make_config(v_max=25.0, **_SMALL)
    result = measure_sinr(500, 2, "zf", cfg, build_allocation(cfg), master_seed=3)
    assert np.all(result.signal_power >= 0) and np.all(result.interference_power >= 0)
    assert np.allclose(result.sinr, result.signal_power / result.interference_power)
    assert result.empirical_rate == pytest.approx(per_symbol_rate(result.empirical_sinr, cfg))
    assert result.failed_trials == 0 and not result.capped


def test_noiseless_zf_sinr_is_capped():
    cfg = _noiseless_static()
    result = measure_sinr(20, 1, "zf", cfg, build_allocation(cfg), master_seed=0)
    assert result.capped
    assert result.empirical_stderr == 0.0


def test_independent_draw_keeps_the_estimate_split():
    cfg = make_config(v_max=25.0, **_SMALL)
    plan = build_allocation(cfg)
    block, est = draw_trial(cfg, plan, 4, seed=5)
    assert np.array_equal(block.pilot_channel, est.estimate - est.error)
    assert est.sigma_hhat_sq == sigma_hhat_sq(cfg, plan)
    ls_block, ls_est = draw_trial(cfg, plan, 4, seed=5, estimator="ls")
    assert np.allclose(ls_est.error, ls_est.estimate - ls_block.pilot_channel)


def test_unknown_estimator_is_rejected():
    cfg = make_config(**_SMALL)
    with pytest.raises(DomainError, match="estimator"):
        draw_trial(cfg, build_allocation(cfg), 1, seed=0, estimator="mmse")
    with pytest.raises(DomainError, match="estimator"):
        CampaignSpec(axis="n", grid=(1,), estimator="mmse")


def test_stderr_counts_trials_not_user_slots():
    rng = np.random.default_rng(9)
    trials = 400
    gain = rng.uniform(5.0, 15.0, trials)
    rho_sq = rng.uniform(0.8, 1.0, trials)
    residual = rng.uniform(0.5, 1.5, trials)

    def arrays(n_u):
        tiled = [np.repeat(x[:, None], n_u, axis=1) for x in (gain, rho_sq, residual)]
        return TrialArrays(*tiled, np.zeros(trials, dtype=bool))

    # η = 1/2 for both
    wide = make_config(**_SMALL)
    single = make_config(users_per_subcarrier=1, subcarriers_per_user=2, n_users=256, **_SMALL)
    copies = summarize_trials(arrays(8), "zf", 1, wide, build_allocation(wide))
    alone = summarize_trials(arrays(1), "zf", 1, single, build_allocation(single))
    assert copies.empirical_rate == pytest.approx(alone.empirical_rate, rel=1e-12)
    assert copies.empirical_stderr == pytest.approx(alone.empirical_stderr, rel=1e-9)
    assert alone.empirical_stderr > 0


def test_ls_estimator_runs_end_to_end():
    cfg = make_config(v_max=25.0, **_SMALL)
    result = measure_sinr(200, 2, "mrc", cfg, build_allocation(cfg), master_seed=3, estimator="ls")
    assert result.failed_trials == 0 and result.empirical_rate > 0


def test_all_failed_trials_raise():
    cfg = make_config(**_SMALL)
    shape = (4, cfg.users_per_subcarrier)
    arrays = TrialArrays(np.zeros(shape), np.zeros(shape), np.zeros(shape), np.ones(4, dtype=bool))
    with pytest.raises(SingularityError):
        summarize_trials(arrays, "zf", 1, cfg, build_allocation(cfg))


# ═══ Group 4 — campaigns ═══

def test_campaign_table_and_determinism():
    cfg = make_config(v_max=25.0, **_SMALL)
    plan = build_allocation(cfg)
    spec = CampaignSpec(axis="n", grid=(1, 10, 20), trials=200)
    first = run_campaign(spec, cfg, plan, master_seed=4)
    second = run_campaign(spec, cfg, plan, master_seed=4)
    assert list(first.columns) == ["n", "combiner", "analytic_rate", "empirical_rate", "empirical_stderr", "failed_trials"]
    assert len(first) == 6
    assert first.equals(second)
    zf = first[first["combiner"] == "zf"]
    expected = per_symbol_rate(sinr_trajectory("zf", cfg, plan, [1, 10, 20]), cfg).tolist()
    assert zf["analytic_rate"].tolist() == expected


@pytest.mark.parametrize("axis, grid", [("v_max", (5.0, 50.0)), ("snr_db", (0.0, 10.0)), ("n_users", (4, 8))])
def test_campaign_axes(axis, grid):
    cfg = make_config(v_max=25.0, **_SMALL)
    spec = CampaignSpec(axis=axis, grid=grid, combiners=("mrc",), trials=50, symbol=3)
    table = run_campaign(spec, cfg, build_allocation(cfg), master_seed=1)
    assert len(table) == len(grid)
    assert (table["empirical_rate"] > 0).all()


def test_frame_length_campaign_averages_over_the_frame():
    cfg = make_config(v_max=25.0, **_SMALL)
    spec = CampaignSpec(axis="n_data", grid=(2,), combiners=("zf",), trials=100)
    table = run_campaign(spec, cfg, build_allocation(cfg), master_seed=2)
    assert table["n_data"].tolist() == [2]
    row = table.iloc[0]
    # two data symbols out of a six-symbol frame
    assert row["analytic_rate"] < per_symbol_rate(sinr_trajectory("zf", cfg, build_allocation(cfg), [1])[0], cfg) / 2
    assert row["empirical_rate"] == pytest.approx(row["analytic_rate"], rel=0.1)


@pytest.mark.parametrize("kwargs", [dict(axis="n", grid=()), dict(axis="bandwidth", grid=(1,))])
def test_campaign_rejects_bad_sweeps(kwargs):
    with pytest.raises(DomainError):
        CampaignSpec(**kwargs)


# ═══ Group 5 — agreement with the closed-form bound (desk scale) ═══

@pytest.mark.slow
@pytest.mark.parametrize("v_max", [5.0, 25.0])
def test_desk_scale_monte_carlo_tracks_the_bound(v_max):
    cfg = make_config(v_max=v_max, **_DESK)
    plan = build_allocation(cfg)
    spec = CampaignSpec(axis="n", grid=(1, 5, 10, 20, 30), trials=20_000)
    table = run_campaign(spec, cfg, plan, master_seed=2024)
    for row in table.itertuples():
        gap = abs(row.empirical_rate - row.analytic_rate) / row.analytic_rate
        assert gap <= 0.10, f"{row.combiner} n={row.n}: empirical {row.empirical_rate:.1f} vs {row.analytic_rate:.1f}"
        floor = row.analytic_rate - SE_MARGIN * row.empirical_stderr
        assert row.empirical_rate >= floor, f"{row.combiner} n={row.n} fell below the bound"
        assert row.failed_trials == 0
