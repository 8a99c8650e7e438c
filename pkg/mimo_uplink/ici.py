"""
────────────────────────────────────────────────────────────────────────────
Inter-carrier interference caused by user mobility
────────────────────────────────────────────────────────────────────────────

🔍 What It Does:
- Computes the Doppler parameter b = π·V_max·f_c·T_s/c and the normalized
  Gaussian ICI power σ_u² = b²/18 used by estimation and simulation.
- Computes the leakage L_i(f_j), the share of subcarrier j's power that lands
  on subcarrier i, averaged over user speed and arrival angle.
- Sums leakage into the exact per-subcarrier ICI power for any power
  allocation, and evaluates the closed-form total and its small-b limit.

Subcarrier indices are 0-based. Leakage depends only on |i - j| because
(f_i - f_j)·T_s = i - j, so one integral per offset is cached and shared by
every allocation with the same speed, carrier and symbol time.
────────────────────────────────────────────────────────────────────────────
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from numpy.typing import NDArray
from scipy import special
from scipy.linalg import toeplitz

from .errors import DomainError
from .numerics import DEFAULT_QUADRATURE, QuadratureSpec, integrate, sinc
from .system import AllocationPlan, SystemConfig

logger = logging.getLogger(__name__)

# below this b·cosψ the closed-form integrand is replaced by its series
_SERIES_CUTOFF = 1e-3

# subcarriers excluded at each band edge by profile_statistics
EDGE_MARGIN = 32


@dataclass(frozen=True)
class IciModel:
    b: float
    sigma_u_sq: float
    leakage_table: Optional[NDArray[np.float64]] = None
    per_subcarrier_power: Optional[NDArray[np.float64]] = None


def doppler_b(cfg: SystemConfig) -> float:
    return math.pi * cfg.v_max * cfg.carrier_frequency * cfg.ts / cfg.speed_of_light


def sigma_u_sq(cfg: SystemConfig) -> float:
    """Normalized ICI power, b²/18."""
    return doppler_b(cfg) ** 2 / 18.0


# ----------------------------------------------------------------------------
# Leakage
# ----------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _leakage(beta: float, offset: int, spec: QuadratureSpec) -> float:
    # beta = V_max·f_c·T_s/c, the largest frequency offset in subcarrier units
    if beta == 0.0:
        return float(sinc(offset)) ** 2

    def over_speed(psi: float) -> float:
        shift = beta * math.cos(psi)
        return integrate(lambda t: float(sinc(offset + shift * t)) ** 2, 0.0, 1.0, spec)

    # cos ψ is symmetric about π, so averaging over [0, π] covers the full circle
    value = integrate(over_speed, 0.0, math.pi, spec) / math.pi
    logger.debug("leakage beta=%.6g offset=%d -> %.6e", beta, offset, value)
    return min(max(value, 0.0), 1.0)


def _beta(cfg: SystemConfig) -> float:
    return cfg.v_max * cfg.carrier_frequency * cfg.ts / cfg.speed_of_light


def leakage_by_offset(cfg: SystemConfig, offset: int, spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """L(d) for a subcarrier offset d, computed once per (physics, |d|)."""
    return _leakage(_beta(cfg), abs(int(offset)), spec)


def leakage(cfg: SystemConfig, i: int, j: int, spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """
    Fraction of subcarrier j's power that leaks onto subcarrier i.

    Averages sinc²((f_i - f_j + (v/c)·f_c·cosψ)·T_s) over v uniform on
    [0, V_max] and ψ uniform on [0, 2π).
    """
    for name, index in (("i", i), ("j", j)):
        if not 0 <= index < cfg.n_subcarriers:
            raise DomainError(f"subcarrier {name}={index} outside 0..{cfg.n_subcarriers - 1}")
    return leakage_by_offset(cfg, i - j, spec)


def leakage_table(cfg: SystemConfig, spec: QuadratureSpec = DEFAULT_QUADRATURE) -> NDArray[np.float64]:
    """L(d) for d = 0..N_G-1."""
    return np.array([leakage_by_offset(cfg, d, spec) for d in range(cfg.n_subcarriers)])


# ----------------------------------------------------------------------------
# ICI power
# ----------------------------------------------------------------------------


def ici_power_profile(
    cfg: SystemConfig, plan: AllocationPlan, spec: QuadratureSpec = DEFAULT_QUADRATURE
) -> NDArray[np.float64]:
    """P_ICI,i = P_T·Σ_{j≠i} η̄_j·L(i - j) for every subcarrier i."""
    table = leakage_table(cfg, spec)
    weights = toeplitz(table)
    np.fill_diagonal(weights, 0.0)
    return cfg.effective_tx_power * (weights @ plan.eta_bar)


def ici_power_exact(
    cfg: SystemConfig, plan: AllocationPlan, i: int, spec: QuadratureSpec = DEFAULT_QUADRATURE
) -> float:
    """Exact ICI power on subcarrier i for the plan's power coefficients."""
    if not 0 <= i < cfg.n_subcarriers:
        raise DomainError(f"subcarrier {i} outside 0..{cfg.n_subcarriers - 1}")
    offsets = np.abs(np.arange(cfg.n_subcarriers) - i)
    table = np.array([leakage_by_offset(cfg, d, spec) for d in range(offsets.max() + 1)])
    received = plan.eta_bar @ table[offsets]
    return cfg.effective_tx_power * float(received - plan.eta_bar[i] * table[0])


def ici_integral_factor(b: float, spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """
    1 - (2/π)∫₀^{π/2} [Si(2x)/x - sin²(x)/x²] dψ with x = b·cosψ.

    Integrated as (2/π)∫(1 - bracket) so small b keeps its digits.
    """
    if not (math.isfinite(b) and b >= 0):
        raise DomainError(f"b must be finite and >= 0, got {b!r}")
    if b == 0.0:
        return 0.0

    def deficit(psi: float) -> float:
        x = b * math.cos(psi)
        if x < _SERIES_CUTOFF:
            return x * x / 9.0 - 2.0 * x**4 / 225.0
        si, _ = special.sici(2.0 * x)
        return 1.0 - (si / x - (math.sin(x) / x) ** 2)

    return 2.0 / math.pi * integrate(deficit, 0.0, math.pi / 2, spec)


def ici_power_closed_form(cfg: SystemConfig, spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Total ICI power for uniform power allocation on a large band."""
    ratio = cfg.users_per_subcarrier / cfg.subcarriers_per_user
    return ratio * cfg.effective_tx_power * ici_integral_factor(doppler_b(cfg), spec)


def ici_power_small_b(cfg: SystemConfig) -> float:
    """Quadratic approximation (N_U·P_T/N_C)·b²/18, valid for b ≪ 1."""
    ratio = cfg.users_per_subcarrier / cfg.subcarriers_per_user
    return ratio * cfg.effective_tx_power * sigma_u_sq(cfg)


def gaussian_ici_variance(cfg: SystemConfig) -> float:
    """Per-antenna variance of the Gaussian ICI term, N_U·P_T·σ_u²/N_C."""
    return ici_power_small_b(cfg)


def profile_statistics(profile: NDArray[np.float64], margin: int = EDGE_MARGIN) -> Tuple[float, float]:
    """Mean and coefficient of variation of an ICI profile away from the band edges."""
    interior = profile[margin : len(profile) - margin] if len(profile) > 2 * margin else profile
    mean = float(np.mean(interior))
    if mean == 0.0:
        return 0.0, 0.0
    return mean, float(np.std(interior) / mean)


def ici_model(
    cfg: SystemConfig,
    plan: Optional[AllocationPlan] = None,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
) -> IciModel:
    """Bundles b, σ_u² and, when a plan is given, the leakage table and profile."""
    if plan is None:
        return IciModel(b=doppler_b(cfg), sigma_u_sq=sigma_u_sq(cfg))
    return IciModel(
        b=doppler_b(cfg),
        sigma_u_sq=sigma_u_sq(cfg),
        leakage_table=leakage_table(cfg, spec),
        per_subcarrier_power=ici_power_profile(cfg, plan, spec),
    )
