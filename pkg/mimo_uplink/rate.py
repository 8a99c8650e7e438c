"""
────────────────────────────────────────────────────────────────────────────
Closed-form SINR, per-symbol rate and system sum-rate for ZF and MRC
────────────────────────────────────────────────────────────────────────────

🔍 What It Does:
- Evaluates the lower-bound SINR of zero-forcing and maximal-ratio combining
  for any power coefficients η_ik, given the speed-averaged aging λ̄[n], the
  Gaussian ICI power σ_u² and the LS estimate variance σ_ĥ².
- Turns SINR into Δf·log₂(1 + SINR), averages it over a frame of N_P pilot
  and N_D data symbols and sums it over every user on every subcarrier.
- Searches the frame length and the users-per-subcarrier count that maximize
  the sum-rate.

📤 Output:
- RateResult objects and (argmax, value) pairs; no I/O.
────────────────────────────────────────────────────────────────────────────
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .channel import lambda_bar
from .errors import DomainError, RegimeError
from .estimation import sigma_hhat_sq
from .ici import sigma_u_sq
from .system import (
    AllocationPlan,
    NvRule,
    SystemConfig,
    build_allocation,
    frame_length_for_percentage,
    pilot_percentage,
    scaled_user_split,
)

logger = logging.getLogger(__name__)


class Combiner(str, Enum):
    ZF = "zf"
    MRC = "mrc"


@dataclass(frozen=True)
class RateResult:
    combiner: Combiner
    frame_data_length: int
    pilot_length: int
    # SINR and rate of a representative UE (subcarrier 0, slot 0) for n = 1..N_D
    per_symbol_sinr: NDArray[np.float64] = field(repr=False)
    per_symbol_rate: NDArray[np.float64] = field(repr=False)
    per_ue_frame_rate: float
    system_sum_rate: float
    # C_avg,ik for every subcarrier i and slot k
    frame_rates: NDArray[np.float64] = field(repr=False)

    @property
    def pilot_percentage(self) -> float:
        return pilot_percentage(self.pilot_length, self.frame_data_length)

    def sinr(self, n: int) -> float:
        if not 1 <= n <= self.frame_data_length:
            raise DomainError(f"symbol {n} outside 1..{self.frame_data_length}")
        return float(self.per_symbol_sinr[n - 1])

    def rate(self, n: int) -> float:
        self.sinr(n)
        return float(self.per_symbol_rate[n - 1])


# ----------------------------------------------------------------------------
# SINR
# ----------------------------------------------------------------------------


def _check_powers(eta: NDArray, eta_bar: NDArray) -> None:
    if np.any(eta < 0) or np.any(eta > eta_bar * (1 + 1e-12)):
        raise DomainError("power coefficients must satisfy 0 <= η_ik <= η̄_i")


def _sinr(
    combiner: Combiner,
    lam: ArrayLike,
    eta: ArrayLike,
    eta_bar: ArrayLike,
    cfg: SystemConfig,
    plan: AllocationPlan,
) -> NDArray[np.float64]:
    """Broadcasting core shared by the scalar and the sweep entry points."""
    lam, eta, eta_bar = (np.asarray(a, dtype=float) for a in (lam, eta, eta_bar))
    _check_powers(eta, eta_bar)
    pilots = plan.pilot_plan
    n_b, n_u = cfg.n_antennas, cfg.users_per_subcarrier
    hat = sigma_hhat_sq(cfg, pilots)
    disturbance = n_u * sigma_u_sq(cfg) / cfg.subcarriers_per_user + cfg.noise_variance / cfg.effective_tx_power
    reuse = pilots.pilot_carriers_per_ue / pilots.pilot_length

    denominator = disturbance * (1.0 + reuse * eta_bar * lam) + eta_bar * cfg.channel_variance * (1.0 - lam)
    if Combiner(combiner) is Combiner.ZF:
        if n_b <= n_u - 1:
            raise RegimeError(f"zero-forcing needs N_B > N_U - 1, got N_B={n_b}, N_U={n_u}")
        numerator = (n_b - n_u + 1) * eta * hat * lam
    else:
        numerator = n_b * eta * hat * lam
        denominator = denominator + hat * eta_bar * lam
    return numerator / denominator


def _scalar_sinr(combiner, n, eta_ik, eta_bar_i, cfg, plan) -> float:
    if n < 1:
        raise DomainError(f"data symbol index must be >= 1, got {n}")
    return float(_sinr(combiner, lambda_bar(n, cfg), eta_ik, eta_bar_i, cfg, plan))


def zf_sinr(n: int, eta_ik: float, eta_bar_i: float, cfg: SystemConfig, plan: AllocationPlan) -> float:
    """
    Lower-bound SINR of UE k on subcarrier i at data symbol n under ZF.

    (N_B - N_U + 1)·η_ik·σ_ĥ²·λ̄[n] over
    (N_U·σ_u²/N_C + σ_n²/P_T)(1 + N_V·η̄_i·λ̄[n]/N_P) + η̄_i·σ_h²·(1 - λ̄[n]).
    """
    return _scalar_sinr(Combiner.ZF, n, eta_ik, eta_bar_i, cfg, plan)


def mrc_sinr(n: int, eta_ik: float, eta_bar_i: float, cfg: SystemConfig, plan: AllocationPlan) -> float:
    """MRC counterpart of zf_sinr: gain N_B, plus σ_ĥ²·η̄_i·λ̄[n] of multi-user interference."""
    return _scalar_sinr(Combiner.MRC, n, eta_ik, eta_bar_i, cfg, plan)


def per_symbol_rate(sinr: Union[float, ArrayLike], cfg: SystemConfig):
    """Δf·log₂(1 + SINR) in bits/s."""
    values = np.asarray(sinr, dtype=float)
    if np.any(values < 0):
        raise DomainError(f"SINR must be >= 0, got {sinr!r}")
    rate = cfg.subcarrier_spacing * np.log2(1.0 + values)
    return float(rate) if rate.ndim == 0 else rate


def uniform_powers(cfg: SystemConfig) -> Tuple[float, float]:
    """(η_ik, η̄_i) = (1/N_C, N_U/N_C)."""
    return 1.0 / cfg.subcarriers_per_user, cfg.users_per_subcarrier / cfg.subcarriers_per_user


def sinr_trajectory(
    combiner: Union[Combiner, str],
    cfg: SystemConfig,
    plan: AllocationPlan,
    symbols: Optional[Iterable[int]] = None,
) -> NDArray[np.float64]:
    """Uniform-power SINR for each requested data symbol, 1..N_D by default."""
    symbols = list(range(1, cfg.frame_data_length + 1)) if symbols is None else list(symbols)
    if any(n < 1 for n in symbols):
        raise DomainError(f"data symbol indices must be >= 1, got {symbols}")
    lam = np.array([lambda_bar(n, cfg) for n in symbols])
    eta, eta_bar = uniform_powers(cfg)
    return _sinr(Combiner(combiner), lam, eta, eta_bar, cfg, plan)


def per_ue_total_rate(combiner: Union[Combiner, str], cfg: SystemConfig, plan: AllocationPlan, n: int) -> float:
    """Rate of one UE over all its N_C subcarriers at symbol n, uniform power."""
    sinr = float(sinr_trajectory(combiner, cfg, plan, [n])[0])
    return cfg.subcarriers_per_user * per_symbol_rate(sinr, cfg)


# ----------------------------------------------------------------------------
# Frame and system rates
# ----------------------------------------------------------------------------


def _symbol_rates(combiner: Combiner, cfg: SystemConfig, plan: AllocationPlan, n_max: int):
    """SINR and rate on every (subcarrier, slot, symbol) for n = 1..n_max."""
    lam = np.array([lambda_bar(n, cfg) for n in range(1, n_max + 1)])
    eta = plan.power_coefficients
    sinr = _sinr(combiner, lam[None, None, :], eta[:, :, None], plan.eta_bar[:, None, None], cfg, plan)
    return sinr, per_symbol_rate(sinr, cfg)


def sum_rate(combiner: Union[Combiner, str], cfg: SystemConfig, plan: AllocationPlan) -> RateResult:
    """
    C_avg,ik = Σ_{n=1..N_D} Δf·log₂(1 + SINR_ik[n]) / (N_P + N_D) for every
    (i, k) of the plan's power coefficients, and C_sum = Σ_i Σ_k C_avg,ik.
    """
    combiner = Combiner(combiner)
    n_d = cfg.frame_data_length
    n_p = plan.pilot_plan.pilot_length
    eta = plan.power_coefficients
    if n_d == 0:
        return RateResult(
            combiner=combiner,
            frame_data_length=0,
            pilot_length=n_p,
            per_symbol_sinr=np.zeros(0),
            per_symbol_rate=np.zeros(0),
            per_ue_frame_rate=0.0,
            system_sum_rate=0.0,
            frame_rates=np.zeros_like(eta),
        )

    sinr, rates = _symbol_rates(combiner, cfg, plan, n_d)
    frame_rates = rates.sum(axis=-1) / (n_p + n_d)
    total = float(frame_rates.sum())
    logger.debug("%s sum-rate N_D=%d N_U=%d: %.6e bit/s", combiner.value, n_d, cfg.users_per_subcarrier, total)
    return RateResult(
        combiner=combiner,
        frame_data_length=n_d,
        pilot_length=n_p,
        per_symbol_sinr=sinr[0, 0],
        per_symbol_rate=rates[0, 0],
        per_ue_frame_rate=float(frame_rates[0, 0]),
        system_sum_rate=total,
        frame_rates=frame_rates,
    )


def optimize_frame_length(
    combiner: Union[Combiner, str],
    cfg: SystemConfig,
    plan: AllocationPlan,
    n_d_grid: Sequence[int],
) -> Tuple[int, RateResult]:
    """Frame data length on the grid with the largest sum-rate; ties go to the shorter frame."""
    grid = sorted(int(n) for n in n_d_grid)
    curve = sum_rate_curve(combiner, cfg, plan, grid)
    best_n, best_value = grid[0], curve[0]
    for n_d, value in zip(grid[1:], curve[1:]):
        if value > best_value:
            best_n, best_value = n_d, value
    return best_n, sum_rate(combiner, cfg.with_updates(frame_data_length=best_n), plan)


def sum_rate_curve(
    combiner: Union[Combiner, str],
    cfg: SystemConfig,
    plan: AllocationPlan,
    n_d_grid: Sequence[int],
) -> NDArray[np.float64]:
    """
    System sum-rate for every frame data length on the grid.

    The per-symbol rates do not depend on N_D, so one evaluation up to the
    longest frame serves the whole grid through a running sum.
    """
    grid = [int(n) for n in n_d_grid]
    if not grid:
        raise DomainError("frame-length grid is empty")
    if min(grid) < 0:
        raise DomainError(f"frame data lengths must be >= 0, got {min(grid)}")
    n_max = max(grid)
    n_p = plan.pilot_plan.pilot_length
    if n_max == 0:
        return np.zeros(len(grid))
    _, rates = _symbol_rates(Combiner(combiner), cfg, plan, n_max)
    running = np.concatenate([[0.0], np.cumsum(rates.sum(axis=(0, 1)))])
    n_d = np.asarray(grid)
    return running[n_d] / (n_p + n_d)


def optimal_sum_rate(
    combiner: Union[Combiner, str],
    cfg: SystemConfig,
    plan: AllocationPlan,
    n_d_grid: Sequence[int],
) -> float:
    return optimize_frame_length(combiner, cfg, plan, n_d_grid)[1].system_sum_rate


def sum_rate_for_percentage(
    combiner: Union[Combiner, str],
    cfg: SystemConfig,
    mu: float,
    nv_rule: Optional[Union[NvRule, str]] = None,
) -> RateResult:
    """Uniform-power sum-rate with N_D chosen so that N_P pilots take μ percent of the frame."""
    plan = build_allocation(cfg, nv_rule)
    n_d = frame_length_for_percentage(plan.pilot_plan.pilot_length, mu)
    return sum_rate(combiner, cfg.with_updates(frame_data_length=n_d), plan)


def best_users_per_subcarrier(
    combiner: Union[Combiner, str],
    cfg: SystemConfig,
    n_u_grid: Sequence[int],
    mu: float,
) -> int:
    """N_U on the grid maximizing sum-rate at pilot percentage μ, keeping N_U/N_C fixed."""
    if not n_u_grid:
        raise DomainError("N_U grid is empty")
    scores = {}
    for n_u in sorted(n_u_grid):
        scores[n_u] = sum_rate_for_percentage(combiner, scaled_user_split(cfg, n_u), mu).system_sum_rate
    best = max(scores, key=lambda n_u: (scores[n_u], -n_u))
    logger.info("best N_U for %s at μ=%g%%: %d", Combiner(combiner).value, mu, best)
    return best

