"""
────────────────────────────────────────────────────────────────────────────
Monte Carlo validation of the closed-form uplink rates
────────────────────────────────────────────────────────────────────────────

🔍 What It Does:
- Per trial: draws user speeds, the channel estimate with an estimation
  error independent of it (or an explicitly simulated LS pilot phase), the
  pilot-epoch channel they imply and its aged copy at data symbol n, and
  synthesizes the received data vector r = √P_T·H^D[n]·D_η^½·x + u + noise,
  holding each part of r separately.
- Combines r with the ZF pseudoinverse or the MRC matched filter of Ĥ and
  measures signal and interference-plus-noise power per UE: ZF against the
  known-channel desired term, MRC with the expected-gain ("use and forget")
  convention where gain fluctuation counts as interference.
- Runs trials in joblib workers over contiguous chunks; every trial owns a
  generator seeded from (master seed, grid point, trial) and results are
  reassembled in trial order, so the worker count never changes a number.

📥 Input:
- SystemConfig, AllocationPlan, symbol index n, trial count, master seed.

📤 Output:
- TrialResult per (combiner, n) and campaign tables as pandas DataFrames.
────────────────────────────────────────────────────────────────────────────
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from numpy.typing import NDArray
from tqdm import tqdm

from .channel import ChannelBlock, Seed, complex_normal, draw_ue_states, evolve_channel
from .errors import DomainError, SingularityError
from .estimation import EstimateBlock, independent_error_estimate, ls_estimate
from .ici import gaussian_ici_variance, leakage_by_offset
from .rate import Combiner, per_symbol_rate, sinr_trajectory, sum_rate
from .system import AllocationPlan, SystemConfig, build_allocation, scaled_user_split

logger = logging.getLogger(__name__)

ICI_MODES = ("gaussian", "leakage")
# "independent" draws G^P apart from Ĥ as the bounds assume; "ls" simulates the pilot phase
ESTIMATORS = ("independent", "ls")
# explicit leakage synthesis draws one interferer per subcarrier
LEAKAGE_MAX_SUBCARRIERS = 64
# condition number of Ĥ above which ZF is treated as singular
ZF_CONDITION_LIMIT = 1e6
SINR_CEILING = 1e12
# trials per joblib task
CHUNK_SIZE = 500

_TERMS = ("known", "estimation_error", "aging", "ici", "noise")


# ============================================================================
# Received symbols and combining
# ============================================================================


@dataclass(frozen=True)
class ReceivedSymbol:
    n: int
    subcarrier: int
    transmitted: NDArray[np.complex128]
    # √P_T·ρ_k·√η_k, the amplitude of stream k on the aged channel
    stream_amplitude: NDArray[np.float64]
    known: NDArray[np.complex128]
    estimation_error: NDArray[np.complex128]
    aging: NDArray[np.complex128]
    ici: NDArray[np.complex128]
    noise: NDArray[np.complex128]
    received: NDArray[np.complex128]

    @property
    def desired(self) -> NDArray[np.complex128]:
        """√P_T·H^D[n]·D_η^½·x, the part of r carried by the aged channel."""
        return self.known + self.estimation_error + self.aging

    def components(self) -> Dict[str, NDArray[np.complex128]]:
        return {name: getattr(self, name) for name in _TERMS}


@dataclass(frozen=True)
class CombinedSymbol:
    output: NDArray[np.complex128]
    terms: Dict[str, NDArray[np.complex128]] = field(repr=False)
    # ZF: 1/‖w_k‖²; MRC: ‖ĥ_k‖²
    gain: NDArray[np.float64] = field(repr=False)
    desired: NDArray[np.complex128] = field(repr=False)


def _unit_modulus(rng: np.random.Generator, count: int) -> NDArray[np.complex128]:
    return np.exp(2j * math.pi * rng.random(count))


def _leakage_ici(
    rng: np.random.Generator, cfg: SystemConfig, plan: AllocationPlan, subcarrier: int
) -> NDArray[np.complex128]:
    if cfg.n_subcarriers > LEAKAGE_MAX_SUBCARRIERS:
        raise DomainError(
            f"explicit leakage ICI needs N_G <= {LEAKAGE_MAX_SUBCARRIERS}, got {cfg.n_subcarriers}"
        )
    n_b, n_u = cfg.n_antennas, cfg.users_per_subcarrier
    total = np.zeros(n_b, dtype=complex)
    for j in range(cfg.n_subcarriers):
        if j == subcarrier:
            continue
        share = cfg.effective_tx_power * leakage_by_offset(cfg, subcarrier - j)
        streams = np.sqrt(plan.power_coefficients[j]) * _unit_modulus(rng, n_u)
        total += math.sqrt(share) * (complex_normal(rng, (n_b, n_u)) @ streams)
    return total


def synthesize_symbol(
    block: ChannelBlock,
    est: EstimateBlock,
    n: int,
    plan: AllocationPlan,
    cfg: SystemConfig,
    seed: Seed,
    subcarrier: int = 0,
    ici_mode: str = "gaussian",
) -> ReceivedSymbol:
    """
    Received data vector at symbol n on one subcarrier of the simulated group.

    r = √P_T·(Ĥ - G^P)·Λ[n]·D_η^½·x + √P_T·G^D[n]·D_η^½·x + u + noise, the
    three channel parts stored apart so combining can be traced term by term.
    """
    if n < 1:
        raise DomainError(f"data symbol index must be >= 1, got {n}")
    if ici_mode not in ICI_MODES:
        raise DomainError(f"unknown ICI mode {ici_mode!r}")
    rng = np.random.default_rng(seed)
    n_b, n_u = block.pilot_channel.shape
    rho = block.rho(n)
    base = math.sqrt(cfg.effective_tx_power) * np.sqrt(plan.power_coefficients[subcarrier])

    x = _unit_modulus(rng, n_u)
    stream = rho * base * x
    known = est.estimate @ stream
    estimation_error = -(est.error @ stream)
    aging = block.innovation[block.row(n)] @ (base * x)
    if ici_mode == "gaussian":
        ici = complex_normal(rng, n_b, gaussian_ici_variance(cfg))
    else:
        ici = _leakage_ici(rng, cfg, plan, subcarrier)
    noise = complex_normal(rng, n_b, cfg.noise_variance)

    return ReceivedSymbol(
        n=n,
        subcarrier=subcarrier,
        transmitted=x,
        stream_amplitude=rho * base,
        known=known,
        estimation_error=estimation_error,
        aging=aging,
        ici=ici,
        noise=noise,
        received=known + estimation_error + aging + ici + noise,
    )


def combine(sym: ReceivedSymbol, est: EstimateBlock, combiner: Union[Combiner, str]) -> CombinedSymbol:
    """
    Applies (Ĥ)† for ZF or (Ĥ)^H for MRC to r and to each stored component.

    Raises SingularityError when Ĥ is numerically rank deficient under ZF.
    """
    h_hat = est.estimate
    if Combiner(combiner) is Combiner.ZF:
        condition = np.linalg.cond(h_hat)
        if not np.isfinite(condition) or condition > ZF_CONDITION_LIMIT:
            raise SingularityError(f"channel estimate is rank deficient (condition number {condition:.3g})")
        inverse = np.linalg.inv(h_hat.conj().T @ h_hat)
        weights = inverse @ h_hat.conj().T
        gain = 1.0 / np.real(np.diag(inverse))
        desired = sym.stream_amplitude * sym.transmitted
    else:
        weights = h_hat.conj().T
        gain = np.sum(np.abs(h_hat) ** 2, axis=0)
        desired = sym.stream_amplitude * gain * sym.transmitted

    terms = {name: weights @ value for name, value in sym.components().items()}
    return CombinedSymbol(output=weights @ sym.received, terms=terms, gain=gain, desired=desired)


# ============================================================================
# Trials
# ============================================================================


@dataclass(frozen=True)
class TrialArrays:
    """Raw per-trial measurements of one combiner, shape (trials, N_U)."""

    gain: NDArray[np.float64]
    rho_sq: NDArray[np.float64]
    residual: NDArray[np.float64]
    failed: NDArray[np.bool_]


@dataclass(frozen=True)
class TrialResult:
    combiner: Combiner
    n: int
    trials: int
    failed_trials: int
    signal_power: NDArray[np.float64] = field(repr=False)
    interference_power: NDArray[np.float64] = field(repr=False)
    sinr: NDArray[np.float64] = field(repr=False)
    rate: NDArray[np.float64] = field(repr=False)
    # pooled over UEs
    empirical_sinr: float
    empirical_rate: float
    empirical_stderr: float
    capped: bool = False


def _trial_seed(master_seed: int, stream: Tuple[int, ...], trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([master_seed, *stream, trial])


def draw_trial(
    cfg: SystemConfig,
    plan: AllocationPlan,
    n: int,
    seed: Seed,
    estimator: str = "independent",
) -> Tuple[ChannelBlock, EstimateBlock]:
    """Channel block aged to symbol n and the AP's estimate of its pilot epoch."""
    if estimator not in ESTIMATORS:
        raise DomainError(f"unknown estimator {estimator!r}; choose from {', '.join(ESTIMATORS)}")
    rng = np.random.default_rng(seed)
    states = draw_ue_states(cfg, cfg.users_per_subcarrier, rng)
    if estimator == "ls":
        block = evolve_channel(rng, states, cfg, symbols=[n])
        return block, ls_estimate(block, plan, cfg, rng)
    est = independent_error_estimate(cfg, plan, rng)
    block = evolve_channel(rng, states, cfg, symbols=[n], pilot_channel=est.estimate - est.error)
    return block, est


def _run_chunk(
    cfg: SystemConfig,
    plan: AllocationPlan,
    n: int,
    combiners: Tuple[Combiner, ...],
    master_seed: int,
    stream: Tuple[int, ...],
    trial_range: range,
    ici_mode: str,
    estimator: str,
) -> Dict[Combiner, TrialArrays]:
    count, n_u = len(trial_range), cfg.users_per_subcarrier
    raw = {
        c: (np.zeros((count, n_u)), np.zeros((count, n_u)), np.zeros((count, n_u)), np.zeros(count, dtype=bool))
        for c in combiners
    }
    for row, trial in enumerate(trial_range):
        rng = np.random.default_rng(_trial_seed(master_seed, stream, trial))
        block, est = draw_trial(cfg, plan, n, rng, estimator)
        sym = synthesize_symbol(block, est, n, plan, cfg, rng, ici_mode=ici_mode)
        rho_sq = block.rho(n) ** 2
        for c in combiners:
            gain, rho_arr, residual, failed = raw[c]
            try:
                out = combine(sym, est, c)
            except SingularityError as exc:
                logger.debug("trial %d dropped: %s", trial, exc)
                failed[row] = True
                continue
            misfit = np.abs(out.output - out.desired) ** 2
            gain[row] = out.gain
            rho_arr[row] = rho_sq
            # ZF noise enhancement is normalized out per trial
            residual[row] = misfit * out.gain if c is Combiner.ZF else misfit
    return {c: TrialArrays(*raw[c]) for c in combiners}


def run_trials(
    cfg: SystemConfig,
    plan: AllocationPlan,
    n: int,
    combiners: Sequence[Union[Combiner, str]],
    master_seed: int,
    point_index: Union[int, Tuple[int, ...]],
    trials: int,
    workers: int = 1,
    ici_mode: str = "gaussian",
    estimator: str = "independent",
) -> Dict[Combiner, TrialArrays]:
    """
    Runs `trials` independent trials at symbol n for every combiner.

    All combiners see the same channels, estimates and symbols. Chunks of
    CHUNK_SIZE trials go to joblib workers and are concatenated in trial order.
    """
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    if estimator not in ESTIMATORS:
        raise DomainError(f"unknown estimator {estimator!r}; choose from {', '.join(ESTIMATORS)}")
    combiners = tuple(dict.fromkeys(Combiner(c) for c in combiners))
    if not combiners:
        raise DomainError("no combiner requested")
    stream = point_index if isinstance(point_index, tuple) else (point_index,)
    chunks = [range(s, min(s + CHUNK_SIZE, trials)) for s in range(0, trials, CHUNK_SIZE)]
    logger.debug("n=%d: %d trials in %d chunks on %d workers", n, trials, len(chunks), workers)

    job = (cfg, plan, n, combiners, master_seed, stream)
    if workers == 1:
        parts = [_run_chunk(*job, r, ici_mode, estimator) for r in chunks]
    else:
        parts = Parallel(n_jobs=workers)(delayed(_run_chunk)(*job, r, ici_mode, estimator) for r in chunks)
    return {
        c: TrialArrays(
            gain=np.concatenate([p[c].gain for p in parts]),
            rho_sq=np.concatenate([p[c].rho_sq for p in parts]),
            residual=np.concatenate([p[c].residual for p in parts]),
            failed=np.concatenate([p[c].failed for p in parts]),
        )
        for c in combiners
    }


def _powers(arrays: TrialArrays, combiner: Combiner, cfg: SystemConfig, eta: NDArray[np.float64]):
    valid = ~arrays.failed
    gain, rho_sq, residual = arrays.gain[valid], arrays.rho_sq[valid], arrays.residual[valid]
    scale = cfg.effective_tx_power * eta[None, :] * rho_sq
    if combiner is Combiner.ZF:
        return scale * gain, residual
    mean_gain = gain.mean(axis=0)
    return scale * mean_gain**2, residual + scale * (gain - mean_gain) ** 2


def _rate_stderr(signal: NDArray, interference: NDArray, sinr: float, cfg: SystemConfig) -> float:
    """
    Delta-method standard error of Δf·log₂(1 + S̄/Ī).

    UEs of one trial share the channel, so the samples are the per-trial
    means over UEs and the count is the number of trials.
    """
    per_trial_s, per_trial_i = signal.mean(axis=1), interference.mean(axis=1)
    count = per_trial_s.size
    s_bar, i_bar = per_trial_s.mean(), per_trial_i.mean()
    if count < 2 or i_bar == 0.0 or s_bar == 0.0:
        return 0.0
    cov = np.cov(per_trial_s, per_trial_i)
    rel_var = (
        cov[0, 0] / (count * s_bar**2) + cov[1, 1] / (count * i_bar**2) - 2 * cov[0, 1] / (count * s_bar * i_bar)
    )
    slope = cfg.subcarrier_spacing / math.log(2.0) * sinr / (1.0 + sinr)
    return float(slope * math.sqrt(max(rel_var, 0.0)))


def summarize_trials(
    arrays: TrialArrays,
    combiner: Union[Combiner, str],
    n: int,
    cfg: SystemConfig,
    plan: AllocationPlan,
    sinr_ceiling: float = SINR_CEILING,
) -> TrialResult:
    """Reduces raw trial arrays to per-UE and pooled SINR and rate."""
    combiner = Combiner(combiner)
    failed = int(arrays.failed.sum())
    total = len(arrays.failed)
    if failed == total:
        raise SingularityError(f"all {total} {combiner.value} trials failed at n={n}")
    signal, interference = _powers(arrays, combiner, cfg, plan.power_coefficients[0])

    s_ue, i_ue = signal.mean(axis=0), interference.mean(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        sinr_ue = np.where(i_ue > 0, s_ue / i_ue, np.inf)
        pooled = signal.mean() / interference.mean() if interference.mean() > 0 else math.inf
    capped = bool(np.any(sinr_ue > sinr_ceiling) or pooled > sinr_ceiling)
    sinr_ue = np.minimum(sinr_ue, sinr_ceiling)
    pooled = min(pooled, sinr_ceiling)
    if capped:
        logger.warning("%s SINR at n=%d capped at %.3g", combiner.value, n, sinr_ceiling)

    return TrialResult(
        combiner=combiner,
        n=n,
        trials=total,
        failed_trials=failed,
        signal_power=s_ue,
        interference_power=i_ue,
        sinr=sinr_ue,
        rate=per_symbol_rate(sinr_ue, cfg),
        empirical_sinr=float(pooled),
        empirical_rate=per_symbol_rate(pooled, cfg),
        empirical_stderr=0.0 if capped else _rate_stderr(signal, interference, pooled, cfg),
        capped=capped,
    )


def measure_sinr(
    trials: int,
    n: int,
    combiner: Union[Combiner, str],
    cfg: SystemConfig,
    plan: AllocationPlan,
    master_seed: int,
    workers: int = 1,
    point_index: int = 0,
    ici_mode: str = "gaussian",
    estimator: str = "independent",
) -> TrialResult:
    """Empirical SINR and rate of every UE at data symbol n."""
    arrays = run_trials(cfg, plan, n, [combiner], master_seed, point_index, trials, workers, ici_mode, estimator)
    return summarize_trials(arrays[Combiner(combiner)], combiner, n, cfg, plan)


# ============================================================================
# Campaigns
# ============================================================================

SWEEP_AXES = {
    "n": "n",
    "v_max": "v_max_mps",
    "n_users": "n_users",
    "n_data": "n_data",
    "snr_db": "snr_db",
}
CAMPAIGN_COLUMNS = ["combiner", "analytic_rate", "empirical_rate", "empirical_stderr", "failed_trials"]


@dataclass(frozen=True)
class CampaignSpec:
    axis: str
    grid: Tuple[float, ...]
    combiners: Tuple[Combiner, ...] = (Combiner.ZF, Combiner.MRC)
    trials: int = 20_000
    # data symbol measured when the swept axis is not n
    symbol: int = 1
    ici_mode: str = "gaussian"
    estimator: str = "independent"

    def __post_init__(self):
        if self.axis not in SWEEP_AXES:
            raise DomainError(f"unknown sweep axis {self.axis!r}; choose from {', '.join(SWEEP_AXES)}")
        if self.estimator not in ESTIMATORS:
            raise DomainError(f"unknown estimator {self.estimator!r}; choose from {', '.join(ESTIMATORS)}")
        object.__setattr__(self, "grid", tuple(self.grid))
        object.__setattr__(self, "combiners", tuple(Combiner(c) for c in self.combiners))
        if not self.grid:
            raise DomainError("campaign grid is empty")


def _point(spec: CampaignSpec, value, cfg: SystemConfig, plan: AllocationPlan):
    if spec.axis == "n":
        return cfg, plan, int(value)
    if spec.axis == "v_max":
        return cfg.with_updates(v_max=float(value)), plan, spec.symbol
    if spec.axis == "snr_db":
        return cfg.with_snr_db(float(value)), plan, spec.symbol
    if spec.axis == "n_users":
        point_cfg = scaled_user_split(cfg, int(value))
        return point_cfg, build_allocation(point_cfg), spec.symbol
    return cfg.with_updates(frame_data_length=int(value)), plan, None


def run_campaign(
    spec: CampaignSpec,
    cfg: SystemConfig,
    plan: AllocationPlan,
    master_seed: int,
    workers: int = 1,
    progress: bool = False,
) -> pd.DataFrame:
    """
    One row per (grid value, combiner) with the analytic bound next to the
    Monte Carlo rate. Grid point p draws its trials from (master_seed, p).

    On the n_data axis the rates are frame averages over n = 1..N_D; every
    other axis measures the per-symbol rate of a single data symbol.
    """
    column = SWEEP_AXES[spec.axis]
    rows: List[dict] = []
    # along n the bound is a single trajectory over the whole grid
    trajectory = {}
    if spec.axis == "n":
        symbols = [int(v) for v in spec.grid]
        trajectory = {
            c: dict(zip(symbols, per_symbol_rate(sinr_trajectory(c, cfg, plan, symbols), cfg))) for c in spec.combiners
        }
    logger.info("campaign over %s: %d points, %d trials each", spec.axis, len(spec.grid), spec.trials)
    points = tqdm(list(enumerate(spec.grid)), desc=f"mc {spec.axis}", disable=not progress, leave=False)
    for p, value in points:
        point_cfg, point_plan, n = _point(spec, value, cfg, plan)
        if n is not None:
            arrays = run_trials(
                point_cfg, point_plan, n, spec.combiners, master_seed, p, spec.trials, workers,
                spec.ici_mode, spec.estimator,
            )
            for c in spec.combiners:
                result = summarize_trials(arrays[c], c, n, point_cfg, point_plan)
                if trajectory:
                    analytic = trajectory[c][n]
                else:
                    analytic = per_symbol_rate(sinr_trajectory(c, point_cfg, point_plan, [n])[0], point_cfg)
                rows.append(
                    _row(column, value, c, analytic, result.empirical_rate, result.empirical_stderr, result.failed_trials)
                )
        else:
            rows.extend(_frame_rows(spec, column, value, point_cfg, point_plan, master_seed, p, workers))
    logger.info("campaign over %s finished", spec.axis)
    return pd.DataFrame(rows, columns=[column] + CAMPAIGN_COLUMNS)


def _row(column, value, combiner, analytic, empirical, stderr, failed) -> dict:
    return {
        column: value,
        "combiner": Combiner(combiner).value,
        "analytic_rate": float(analytic),
        "empirical_rate": float(empirical),
        "empirical_stderr": float(stderr),
        "failed_trials": int(failed),
    }


def _frame_rows(spec, column, n_d, cfg, plan, master_seed, p, workers) -> Iterable[dict]:
    n_d = int(n_d)
    n_p = plan.pilot_plan.pilot_length
    sums = {c: [0.0, 0.0, 0] for c in spec.combiners}
    for n in range(1, n_d + 1):
        arrays = run_trials(
            cfg, plan, n, spec.combiners, master_seed, (p, n), spec.trials, workers, spec.ici_mode, spec.estimator
        )
        for c in spec.combiners:
            result = summarize_trials(arrays[c], c, n, cfg, plan)
            acc = sums[c]
            acc[0] += result.empirical_rate
            acc[1] += result.empirical_stderr**2
            acc[2] += result.failed_trials
    for c in spec.combiners:
        analytic = sum_rate(c, cfg, plan).per_ue_frame_rate
        rate_sum, var_sum, failed = sums[c]
        yield _row(column, n_d, c, analytic, rate_sum / (n_p + n_d), math.sqrt(var_sum) / (n_p + n_d), failed)
