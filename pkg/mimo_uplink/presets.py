"""
────────────────────────────────────────────────────────────────────────────
Experiment presets: the numerical-study sweeps as reproducible tables
────────────────────────────────────────────────────────────────────────────

🔍 What It Does:
- Registers one ExperimentPreset per study figure (fig1 … fig9). Each preset
  names its swept axis, its grid, the combiners it covers and the exact CSV
  header it produces.
- Builds the table by calling the library's own evaluators (nmse_sweep,
  ici_power_profile, sinr_trajectory, sum_rate_for_percentage,
  sum_rate_curve, optimize_frame_length, run_campaign); a preset adds loops,
  never formulas.
- fig3 is the only Monte Carlo preset; `scale` picks N_B and the trial count
  for it. Every random draw is seeded from (seed, preset, grid point).

📥 Input:
- A validated SystemConfig (normally configs/section6.cfg), scale name,
  combiners, master seed and worker count.

📤 Output:
- pandas DataFrames with the preset's columns in a fixed row order.
────────────────────────────────────────────────────────────────────────────
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import DomainError
from .estimation import nmse_sweep
from .ici import ici_power_profile
from .mcsim import CampaignSpec, run_campaign
from .rate import (
    Combiner,
    optimize_frame_length,
    per_symbol_rate,
    sinr_trajectory,
    sum_rate_curve,
    sum_rate_for_percentage,
)
from .system import PowerMode, SystemConfig, build_allocation, sample_power_coefficients, scaled_user_split

logger = logging.getLogger(__name__)

# Sweep grids
SPEEDS = (5.0, 25.0, 100.0)
ICI_SPEEDS = (25.0, 100.0)
SPEED_SWEEP = tuple(float(v) for v in range(0, 101))
USER_GRID = (4, 8, 16, 32, 64, 128)
ICI_USER_GRID = (8, 16, 32, 64)
SNR_USER_GRID = (16, 32, 64, 128)
PERCENTAGES = (12.5, 25.0, 50.0)
SYMBOLS = tuple(range(1, 31))
FRAME_GRID = tuple(range(1, 65))
PILOT_SNR_DB = tuple(float(s) for s in range(-10, 51, 5))
SNR_DB = tuple(float(s) for s in range(-10, 31, 5))
NMSE_USERS = 4
REFERENCE_USERS = 8

BOTH = (Combiner.ZF, Combiner.MRC)


@dataclass(frozen=True)
class Scale:
    name: str
    n_antennas: int
    trials: int


SCALES = {
    "desk": Scale("desk", n_antennas=64, trials=20_000),
    "paper": Scale("paper", n_antennas=256, trials=100_000),
}


@dataclass(frozen=True)
class PresetRun:
    """Everything a builder may depend on; equal runs give equal tables."""

    cfg: SystemConfig
    scale: Scale
    combiners: Tuple[Combiner, ...]
    seed: int
    workers: int = 1
    trials: Optional[int] = None
    progress: bool = False

    @property
    def trial_count(self) -> int:
        return self.scale.trials if self.trials is None else self.trials


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    axis: str
    grid: Tuple[float, ...]
    columns: Tuple[str, ...]
    combiners: Tuple[Combiner, ...] = BOTH
    monte_carlo: bool = False
    builder: Callable[["ExperimentPreset", PresetRun], pd.DataFrame] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.grid:
            raise DomainError(f"preset {self.name} has an empty grid")

    @property
    def output(self) -> str:
        return f"{self.name}.csv"

    def run(
        self,
        cfg: SystemConfig,
        scale: str = "desk",
        combiners: Iterable[Union[Combiner, str]] = BOTH,
        seed: int = 0,
        workers: int = 1,
        trials: Optional[int] = None,
        progress: bool = False,
    ) -> pd.DataFrame:
        if scale not in SCALES:
            raise DomainError(f"unknown scale {scale!r}; choose from {', '.join(SCALES)}")
        if trials is not None and trials < 1:
            raise DomainError(f"trials must be >= 1, got {trials}")
        requested = {Combiner(c) for c in combiners}
        chosen = tuple(c for c in self.combiners if c in requested)
        if not chosen:
            raise DomainError(f"preset {self.name} covers {', '.join(c.value for c in self.combiners)} only")
        run = PresetRun(cfg, SCALES[scale], chosen, seed, workers, trials, progress)
        logger.info("preset %s at %s scale, seed %d", self.name, scale, seed)
        table = self.builder(self, run)
        return table.loc[:, list(self.columns)].reset_index(drop=True)


PRESETS: Dict[str, ExperimentPreset] = {}


def preset(name: str, axis: str, grid: Sequence, columns: str, **options):
    """Registers a builder under a unique preset name."""

    def register(builder):
        if name in PRESETS:
            raise DomainError(f"preset {name} registered twice")
        PRESETS[name] = ExperimentPreset(
            name=name, axis=axis, grid=tuple(grid), columns=tuple(columns.split(",")), builder=builder, **options
        )
        return builder

    return register


def get_preset(name: str) -> ExperimentPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise DomainError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None


def _substream(seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])


def _users(cfg: SystemConfig, v_max: float, n_u: int) -> SystemConfig:
    return scaled_user_split(cfg.with_updates(v_max=v_max), n_u)


# ----------------------------------------------------------------------------
# Analytic presets
# ----------------------------------------------------------------------------


@preset("fig1", "pilot_snr_db", PILOT_SNR_DB, "pilot_snr_db,nmse_singlecarrier,nmse_multicarrier")
def _nmse_vs_pilot_snr(spec: ExperimentPreset, run: PresetRun) -> pd.DataFrame:
    cfg = scaled_user_split(run.cfg, NMSE_USERS)
    return nmse_sweep(cfg, build_allocation(cfg), spec.grid)


@preset("fig2", "n_users", ICI_USER_GRID, "v_max_mps,n_users,allocation,subcarrier,ici_power")
def _ici_profiles(spec: ExperimentPreset, run: PresetRun) -> pd.DataFrame:
    blocks = []
    for v_index, v_max in enumerate(ICI_SPEEDS):
        for u_index, n_u in enumerate(spec.grid):
            cfg = _users(run.cfg, v_max, n_u)
            plan = build_allocation(cfg)
            for mode in PowerMode:
                drawn = sample_power_coefficients(plan, mode, seed=_substream(run.seed, 2, v_index, u_index))
                profile = ici_power_profile(cfg, drawn)
                blocks.append(
                    pd.DataFrame(
                        {
                            "v_max_mps": v_max,
                            "n_users": n_u,
                            "allocation": mode.value,
                            "subcarrier": np.arange(cfg.n_subcarriers),
                            "ici_power": profile,
                        }
                    )
                )
    return pd.concat(blocks, ignore_index=True)


def _rate_vs_symbol(spec: ExperimentPreset, run: PresetRun) -> pd.DataFrame:
    rows = []
    for v_max in SPEEDS:
        for n_u in USER_GRID:
            cfg = _users(run.cfg, v_max, n_u)
            plan = build_allocation(cfg)
            for combiner in run.combiners:
                rates = per_symbol_rate(sinr_trajectory(combiner, cfg, plan, spec.grid), cfg)
                for n, rate in zip(spec.grid, rates):
                    rows.append((v_max, n_u, combiner.value, n, rate))
    return pd.DataFrame(rows, columns=list(spec.columns))


preset("fig4", "n", SYMBOLS, "v_max_mps,n_users,combiner,n,rate_bps", combiners=(Combiner.ZF,))(_rate_vs_symbol)
preset("fig5", "n", SYMBOLS, "v_max_mps,n_users,combiner,n,rate_bps", combiners=(Combiner.MRC,))(_rate_vs_symbol)


@preset("fig6", "v_max", SPEED_SWEEP, "v_max_mps,mu_pct,combiner,sum_rate_bps")
def _sum_rate_vs_speed(spec: ExperimentPreset, run: PresetRun) -> pd.DataFrame:
    base = scaled_user_split(run.cfg, REFERENCE_USERS)
    rows = []
    for v_max in spec.grid:
        cfg = base.with_updates(v_max=v_max)
        for mu in PERCENTAGES:
            for combiner in run.combiners:
                rows.append((v_max, mu, combiner.value, sum_rate_for_percentage(combiner, cfg, mu).system_sum_rate))
    return pd.DataFrame(rows, columns=list(spec.columns))


@preset("fig7", "n_users", USER_GRID, "v_max_mps,mu_pct,n_users,combiner,sum_rate_bps")
def _sum_rate_vs_users(spec: ExperimentPreset, run: PresetRun) -> pd.DataFrame:
    rows = []
    for v_max in SPEEDS:
        for mu in PERCENTAGES:
            for n_u in spec.grid:
                cfg = _users(run.cfg, v_max, n_u)
                for combiner in run.combiners:
                    value = sum_rate_for_percentage(combiner, cfg, mu).system_sum_rate
                    rows.append((v_max, mu, n_u, combiner.value, value))
    return pd.DataFrame(rows, columns=list(spec.columns))


@preset("fig8", "n_data", FRAME_GRID, "v_max_mps,n_users,combiner,n_data,sum_rate_bps")
def _sum_rate_vs_frame_length(spec: ExperimentPreset, run: PresetRun) -> pd.DataFrame:
    rows = []
    for v_max in SPEEDS:
        for n_u in USER_GRID:
            cfg = _users(run.cfg, v_max, n_u)
            plan = build_allocation(cfg)
            for combiner in run.combiners:
                curve = sum_rate_curve(combiner, cfg, plan, spec.grid)
                rows.extend((v_max, n_u, combiner.value, n_d, value) for n_d, value in zip(spec.grid, curve))
    return pd.DataFrame(rows, columns=list(spec.columns))


@preset("fig9", "snr_db", SNR_DB, "v_max_mps,n_users,combiner,snr_db,n_data_opt,sum_rate_bps")
def _optimal_sum_rate_vs_snr(spec: ExperimentPreset, run: PresetRun) -> pd.DataFrame:
    rows = []
    for v_max in SPEEDS:
        for n_u in SNR_USER_GRID:
            cfg = _users(run.cfg, v_max, n_u)
            plan = build_allocation(cfg)
            for combiner in run.combiners:
                for snr_db in spec.grid:
                    n_d, best = optimize_frame_length(combiner, cfg.with_snr_db(snr_db), plan, FRAME_GRID)
                    rows.append((v_max, n_u, combiner.value, snr_db, n_d, best.system_sum_rate))
    return pd.DataFrame(rows, columns=list(spec.columns))


# ----------------------------------------------------------------------------
# Monte Carlo preset
# ----------------------------------------------------------------------------


@preset(
    "fig3",
    "n",
    SYMBOLS,
    "v_max_mps,combiner,n,analytic_rate,empirical_rate,empirical_stderr,failed_trials",
    monte_carlo=True,
)
def _rate_bound_vs_simulation(spec: ExperimentPreset, run: PresetRun) -> pd.DataFrame:
    base = scaled_user_split(run.cfg, REFERENCE_USERS).with_updates(n_antennas=run.scale.n_antennas)
    plan = build_allocation(base)
    campaign = CampaignSpec(axis="n", grid=spec.grid, combiners=run.combiners, trials=run.trial_count)
    blocks = []
    for v_index, v_max in enumerate(SPEEDS):
        table = run_campaign(
            campaign,
            base.with_updates(v_max=v_max),
            plan,
            master_seed=_substream(run.seed, 3, v_index),
            workers=run.workers,
            progress=run.progress,
        )
        table.insert(0, "v_max_mps", v_max)
        blocks.append(table)
    table = pd.concat(blocks, ignore_index=True)
    # one campaign row per (n, combiner); regroup per combiner as the curves are read
    order = {c.value: i for i, c in enumerate(run.combiners)}
    table["_order"] = table["combiner"].map(order)
    return table.sort_values(["v_max_mps", "_order", "n"], kind="stable")
