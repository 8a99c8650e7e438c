"""
────────────────────────────────────────────────────────────────────────────
User mobility and channel aging
────────────────────────────────────────────────────────────────────────────

🔍 What It Does:
- Draws each user's speed (uniform on [0, V_max]) and direction.
- Ages the pilot-epoch channel with the Jakes autoregression
  H^D[n] = H^P·Λ[n] + G^D[n], ρ_k[n] = J0(2π·f_D,k·n·T_s).
- Computes the speed-averaged aging moment λ̄[n] = E[ρ²[n]] used by the
  closed-form rates.
────────────────────────────────────────────────────────────────────────────
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DomainError
from .numerics import DEFAULT_QUADRATURE, QuadratureSpec, bessel_j0, integrate
from .system import SystemConfig

logger = logging.getLogger(__name__)

Seed = Union[int, np.random.SeedSequence, np.random.Generator]


@dataclass(frozen=True)
class UePhysicalState:
    velocity: float
    angle: float
    max_doppler: float


@dataclass(frozen=True)
class ChannelBlock:
    pilot_channel: NDArray[np.complex128]
    symbols: Tuple[int, ...]
    # row r belongs to data symbol symbols[r]
    aging_coefficients: NDArray[np.float64]
    aged_channels: NDArray[np.complex128]
    innovation: NDArray[np.complex128]

    def row(self, n: int) -> int:
        try:
            return self.symbols.index(n)
        except ValueError:
            raise DomainError(f"symbol {n} was not synthesized; block holds {self.symbols}") from None

    def aged(self, n: int) -> NDArray[np.complex128]:
        return self.aged_channels[self.row(n)]

    def rho(self, n: int) -> NDArray[np.float64]:
        return self.aging_coefficients[self.row(n)]


def complex_normal(rng: np.random.Generator, shape, variance: ArrayLike = 1.0) -> NDArray[np.complex128]:
    """Circularly-symmetric complex Gaussian samples with the given variance."""
    scale = np.sqrt(np.asarray(variance, dtype=float) / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def draw_ue_states(cfg: SystemConfig, count: int, seed: Seed) -> List[UePhysicalState]:
    if count < 1:
        raise DomainError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(seed)
    velocities = rng.uniform(0.0, cfg.v_max, count) if cfg.v_max > 0 else np.zeros(count)
    angles = rng.uniform(0.0, 2.0 * math.pi, count)
    dopplers = velocities * cfg.carrier_frequency / cfg.speed_of_light
    return [
        UePhysicalState(velocity=float(v), angle=float(a), max_doppler=float(f))
        for v, a, f in zip(velocities, angles, dopplers)
    ]


def jakes_rho(v: ArrayLike, n: ArrayLike, cfg: SystemConfig):
    """ρ = J0(2π·(v·f_c/c)·n·T_s)."""
    if np.any(np.asarray(n) < 0):
        raise DomainError(f"symbol index must be >= 0, got {n!r}")
    doppler = np.asarray(v, dtype=float) * cfg.carrier_frequency / cfg.speed_of_light
    return bessel_j0(2.0 * math.pi * doppler * np.asarray(n, dtype=float) * cfg.ts)


@lru_cache(maxsize=None)
def _lambda_bar(x_max: float, spec: QuadratureSpec) -> float:
    # average of J0²(x_max·t) over t in [0, 1]
    return integrate(lambda t: bessel_j0(x_max * t) ** 2, 0.0, 1.0, spec)


def lambda_bar(
    n: int,
    cfg: SystemConfig,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
) -> float:
    """
    λ̄[n] = (1/V_max)∫₀^{V_max} J0²(2π·v·f_c·n·T_s/c) dv; 1 when V_max = 0.

    n may not exceed cfg.lambda_horizon.
    """
    if n < 0:
        raise DomainError(f"symbol index must be >= 0, got {n}")
    if n > cfg.lambda_horizon:
        raise DomainError(f"symbol index {n} beyond lambda_horizon {cfg.lambda_horizon}")
    if n == 0 or cfg.v_max == 0:
        return 1.0
    x_max = 2.0 * math.pi * cfg.v_max * cfg.carrier_frequency * n * cfg.ts / cfg.speed_of_light
    return _lambda_bar(x_max, spec)


def lambda_bar_table(cfg: SystemConfig, n_max: int, spec: QuadratureSpec = DEFAULT_QUADRATURE) -> NDArray[np.float64]:
    """λ̄[n] for n = 0..n_max."""
    return np.array([lambda_bar(n, cfg, spec) for n in range(n_max + 1)])


def evolve_channel(
    seed: Seed,
    states: Sequence[UePhysicalState],
    cfg: SystemConfig,
    symbols: Optional[Sequence[int]] = None,
    pilot_channel: Optional[NDArray[np.complex128]] = None,
) -> ChannelBlock:
    """
    Draws H^P and ages it to every requested data symbol.

    symbols defaults to 1..N_D. H^P is drawn first unless pilot_channel is
    given, then one innovation per symbol in the given order, so a fixed seed
    fixes the whole block.
    """
    if len(states) != cfg.users_per_subcarrier:
        raise DomainError(f"expected {cfg.users_per_subcarrier} user states, got {len(states)}")
    symbols = tuple(range(1, cfg.frame_data_length + 1)) if symbols is None else tuple(int(n) for n in symbols)
    rng = np.random.default_rng(seed)
    shape = (cfg.n_antennas, cfg.users_per_subcarrier)
    sigma_h_sq = cfg.channel_variance

    if pilot_channel is None:
        pilot = complex_normal(rng, shape, sigma_h_sq)
    elif pilot_channel.shape != shape:
        raise DomainError(f"pilot channel is {pilot_channel.shape}, config expects {shape}")
    else:
        pilot = np.asarray(pilot_channel, dtype=complex)
    speeds = np.array([s.velocity for s in states])
    rho = np.empty((len(symbols), cfg.users_per_subcarrier))
    for r, n in enumerate(symbols):
        rho[r] = jakes_rho(speeds, n, cfg)

    innovation = np.empty((len(symbols),) + shape, dtype=complex)
    for r in range(len(symbols)):
        innovation[r] = complex_normal(rng, shape, sigma_h_sq * (1.0 - rho[r] ** 2))
    aged = pilot[None, :, :] * rho[:, None, :] + innovation

    return ChannelBlock(
        pilot_channel=pilot,
        symbols=symbols,
        aging_coefficients=rho,
        aged_channels=aged,
        innovation=innovation,
    )
