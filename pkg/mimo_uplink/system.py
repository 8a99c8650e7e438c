"""
────────────────────────────────────────────────────────────────────────────
System configuration, UE/subcarrier allocation and pilot planning
────────────────────────────────────────────────────────────────────────────

🔍 What It Does:
- Holds every scalar parameter of the cell in a frozen SystemConfig and checks
  the grouping constraint N_R/N_U = N_G/N_C = L.
- Splits subcarriers into L contiguous groups of N_C and users into L groups
  of N_U, group g of users transmitting on group g of subcarriers.
- Derives the shortened pilot plan (N_P, N_V and per-subcarrier rosters) that
  lets users in one coherence block share pilot sequences across subcarriers
  without contamination.
- Samples per-user power-control coefficients, uniform or flat-random on the
  simplex.

📥 Input:
- A SystemConfig built in code or loaded from a flat `key = value` file with
  powers in dB.

📤 Output:
- Validated SystemConfig, AllocationPlan and PilotPlan objects, all immutable.
────────────────────────────────────────────────────────────────────────────
"""

from __future__ import annotations

import logging
import math
from dataclasses import MISSING, dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.typing import NDArray

from .errors import ConfigError, DomainError, GroupingError, RegimeError

logger = logging.getLogger(__name__)

SPEED_OF_LIGHT = 2.998e8
# λ̄ oscillates with J0² at large arguments; the numerical study stops at 30
LAMBDA_HORIZON = 64


class NvRule(str, Enum):
    """How many subcarriers a user pilots on."""

    PROOF = "proof"  # max(1, ceil(N_C / N_H)): one pilot per coherence block
    LITERAL = "literal"  # min(1, ceil(N_C / N_H)): always 1


class PowerMode(str, Enum):
    UNIFORM = "uniform"
    RANDOM = "random"


# ============================================================================
# Configuration
# ============================================================================


@dataclass(frozen=True)
class SystemConfig:
    n_antennas: int
    n_users: int
    n_subcarriers: int
    users_per_subcarrier: int
    subcarriers_per_user: int
    subcarrier_spacing: float
    carrier_frequency: float
    v_max: float
    effective_tx_power: float
    noise_variance: float
    channel_variance: float
    coherence_bandwidth: float
    frame_data_length: int
    symbol_duration: Optional[float] = None
    speed_of_light: float = SPEED_OF_LIGHT
    nv_rule: NvRule = NvRule.PROOF
    # last data symbol λ̄[n] may be evaluated at
    lambda_horizon: int = LAMBDA_HORIZON
    # filled in by validate_config
    n_groups: Optional[int] = field(default=None, compare=False)
    n_coherence: Optional[int] = field(default=None, compare=False)

    @property
    def total_bandwidth(self) -> float:
        return self.n_subcarriers * self.subcarrier_spacing

    @property
    def ts(self) -> float:
        return self.symbol_duration if self.symbol_duration is not None else 1.0 / self.subcarrier_spacing

    @property
    def is_validated(self) -> bool:
        return self.n_groups is not None and self.n_coherence is not None

    @property
    def snr(self) -> float:
        """Receive SNR P_T·σ_h²/σ_n² in linear units."""
        return self.effective_tx_power * self.channel_variance / self.noise_variance

    def with_updates(self, **changes) -> "SystemConfig":
        return validate_config(replace(self, n_groups=None, n_coherence=None, **changes))

    def with_snr_db(self, snr_db: float) -> "SystemConfig":
        p_t = db_to_linear(snr_db) * self.noise_variance / self.channel_variance
        return self.with_updates(effective_tx_power=p_t)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    if not x > 0:
        raise DomainError(f"cannot express {x!r} in dB")
    return 10.0 * math.log10(x)


def validate_config(cfg: SystemConfig) -> SystemConfig:
    """
    Check every invariant of a SystemConfig and attach L and N_H.

    Raises GroupingError when N_R/N_U and N_G/N_C are not the same integer,
    RegimeError when N_U >= N_B, DomainError for nonpositive physical values.
    """
    counts = {
        "n_antennas": cfg.n_antennas,
        "n_users": cfg.n_users,
        "n_subcarriers": cfg.n_subcarriers,
        "users_per_subcarrier": cfg.users_per_subcarrier,
        "subcarriers_per_user": cfg.subcarriers_per_user,
    }
    for name, value in counts.items():
        if int(value) != value or value < 1:
            raise DomainError(f"{name} must be a positive integer, got {value!r}")
    if int(cfg.frame_data_length) != cfg.frame_data_length or cfg.frame_data_length < 0:
        raise DomainError(f"frame_data_length must be a nonnegative integer, got {cfg.frame_data_length!r}")
    if int(cfg.lambda_horizon) != cfg.lambda_horizon or cfg.lambda_horizon < 1:
        raise DomainError(f"lambda_horizon must be a positive integer, got {cfg.lambda_horizon!r}")
    if cfg.frame_data_length > cfg.lambda_horizon:
        raise DomainError(
            f"frame_data_length {cfg.frame_data_length} runs past lambda_horizon {cfg.lambda_horizon}; "
            "raise lambda_horizon to age the channel that far"
        )

    positive = {
        "subcarrier_spacing": cfg.subcarrier_spacing,
        "carrier_frequency": cfg.carrier_frequency,
        "effective_tx_power": cfg.effective_tx_power,
        "noise_variance": cfg.noise_variance,
        "channel_variance": cfg.channel_variance,
        "coherence_bandwidth": cfg.coherence_bandwidth,
        "speed_of_light": cfg.speed_of_light,
    }
    for name, value in positive.items():
        if not (math.isfinite(value) and value > 0):
            raise DomainError(f"{name} must be positive and finite, got {value!r}")
    if not (math.isfinite(cfg.v_max) and cfg.v_max >= 0):
        raise DomainError(f"v_max must be >= 0, got {cfg.v_max!r}")
    if cfg.symbol_duration is not None and not math.isclose(
        cfg.symbol_duration * cfg.subcarrier_spacing, 1.0, rel_tol=1e-9
    ):
        raise DomainError(
            f"symbol_duration must equal 1/subcarrier_spacing, got {cfg.symbol_duration!r} "
            f"with spacing {cfg.subcarrier_spacing!r}"
        )

    if cfg.n_users % cfg.users_per_subcarrier or cfg.n_subcarriers % cfg.subcarriers_per_user:
        raise GroupingError(
            f"N_R/N_U = {cfg.n_users}/{cfg.users_per_subcarrier} and "
            f"N_G/N_C = {cfg.n_subcarriers}/{cfg.subcarriers_per_user} must both be integers"
        )
    n_groups = cfg.n_users // cfg.users_per_subcarrier
    if n_groups != cfg.n_subcarriers // cfg.subcarriers_per_user:
        raise GroupingError(
            f"N_R/N_U = {n_groups} differs from N_G/N_C = {cfg.n_subcarriers // cfg.subcarriers_per_user}"
        )
    if cfg.users_per_subcarrier >= cfg.n_antennas:
        raise RegimeError(f"N_U = {cfg.users_per_subcarrier} must be below N_B = {cfg.n_antennas}")

    n_coherence = int(math.floor(cfg.coherence_bandwidth / cfg.subcarrier_spacing + 1e-9))
    if n_coherence < 1:
        raise DomainError(
            f"coherence bandwidth {cfg.coherence_bandwidth} Hz is narrower than one subcarrier "
            f"({cfg.subcarrier_spacing} Hz)"
        )
    return replace(
        cfg,
        **{name: int(value) for name, value in counts.items()},
        frame_data_length=int(cfg.frame_data_length),
        lambda_horizon=int(cfg.lambda_horizon),
        nv_rule=NvRule(cfg.nv_rule),
        n_groups=n_groups,
        n_coherence=n_coherence,
    )


def _require_validated(cfg: SystemConfig) -> SystemConfig:
    return cfg if cfg.is_validated else validate_config(cfg)


# ============================================================================
# Config files
# ============================================================================

_INT_KEYS = {
    "n_antennas",
    "n_users",
    "n_subcarriers",
    "users_per_subcarrier",
    "subcarriers_per_user",
    "frame_data_length",
    "lambda_horizon",
}
_DB_KEYS = {"effective_tx_power", "noise_variance", "channel_variance"}
_FLOAT_KEYS = {
    "subcarrier_spacing",
    "carrier_frequency",
    "v_max",
    "coherence_bandwidth",
    "symbol_duration",
    "speed_of_light",
}
_DERIVED_KEYS = {"total_bandwidth"}


def _parse_value(key: str, text: str):
    """Converts one config value; powers arrive in dB and leave linear."""
    if key in _INT_KEYS:
        number = float(text)
        if number != int(number):
            raise ValueError(text)
        return int(number)
    if key in _DB_KEYS:
        return db_to_linear(float(text))
    if key in _FLOAT_KEYS or key in _DERIVED_KEYS:
        return float(text)
    if key == "nv_rule":
        return NvRule(text)
    raise KeyError(key)


def _assignment(raw: str, where: str) -> Tuple[str, object]:
    if "=" not in raw:
        raise ConfigError(f"{where}: expected 'key = value', got {raw.strip()!r}")
    key, text = (part.strip() for part in raw.split("=", 1))
    try:
        return key, _parse_value(key, text)
    except KeyError:
        raise ConfigError(f"{where}: unknown key {key!r}") from None
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value {text!r} for {key!r}") from exc


def _check_bandwidth(cfg: SystemConfig, stated: Optional[float], where: str) -> None:
    if stated is not None and not math.isclose(stated, cfg.total_bandwidth, rel_tol=1e-9):
        logger.warning("total_bandwidth %.6g Hz in %s ignored; using N_G*Δf = %.6g Hz", stated, where, cfg.total_bandwidth)


def load_config(path: Union[str, Path]) -> SystemConfig:
    """
    Reads a flat `key = value` file into a validated SystemConfig.

    Powers are given in dB and converted to linear here; nothing downstream
    sees dB. total_bandwidth is accepted but B is always N_G·Δf.
    """
    values: Dict[str, object] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            key, value = _assignment(line, f"{path}:{lineno}")
            values[key] = value

    stated_bandwidth = values.pop("total_bandwidth", None)
    required = [f.name for f in fields(SystemConfig) if f.default is MISSING]
    missing = [name for name in required if name not in values]
    if missing:
        raise ConfigError(f"{path}: missing keys {', '.join(missing)}")

    cfg = validate_config(SystemConfig(**values))
    _check_bandwidth(cfg, stated_bandwidth, str(path))
    return cfg


def override_config(cfg: SystemConfig, assignments: Sequence[str]) -> SystemConfig:
    """Applies command-line `key=value` overrides in config-file units."""
    changes = dict(_assignment(raw, "--set") for raw in assignments)
    stated_bandwidth = changes.pop("total_bandwidth", None)
    updated = cfg.with_updates(**changes) if changes else _require_validated(cfg)
    _check_bandwidth(updated, stated_bandwidth, "--set")
    return updated


# ============================================================================
# Pilot plan
# ============================================================================


@dataclass(frozen=True)
class PilotPlan:
    pilot_length: int
    pilot_carriers_per_ue: int
    n_coherence_subcarriers: int
    # offsets within a group; identical for every group; the first N_V carry pilots
    blocks: Tuple[range, ...]
    # rosters[offset] lists UE slots in pilot-row order
    rosters: Tuple[Tuple[int, ...], ...]

    def roster(self, subcarrier: int) -> Tuple[int, ...]:
        return self.rosters[subcarrier % len(self.rosters)]

    def pilot_offsets(self, slot: int) -> Tuple[int, ...]:
        """Group-relative subcarriers on which UE slot `slot` sends pilots."""
        return tuple(offset for offset, roster in enumerate(self.rosters) if slot in roster)


def pilot_counts(n_users: int, n_subcarriers: int, n_coherence: int, nv_rule: NvRule) -> Tuple[int, int]:
    """(N_P, N_V) for the given split."""
    n_p = math.ceil(n_users / min(n_subcarriers, n_coherence))
    blocks = math.ceil(n_subcarriers / n_coherence)
    n_v = max(1, blocks) if NvRule(nv_rule) is NvRule.PROOF else min(1, blocks)
    return n_p, n_v


def coherence_blocks(cfg: SystemConfig) -> Tuple[range, ...]:
    """
    Group-relative subcarrier blocks that each host one full pilot round.

    Blocks are consecutive runs of N_H subcarriers; a trailing run too short
    to carry all N_U pilots within N_P slots is merged into the one before.
    """
    cfg = _require_validated(cfg)
    n_c, n_h, n_u = cfg.subcarriers_per_user, cfg.n_coherence, cfg.users_per_subcarrier
    n_p, _ = pilot_counts(n_u, n_c, n_h, cfg.nv_rule)
    starts = list(range(0, n_c, n_h))
    blocks = [range(s, min(s + n_h, n_c)) for s in starts]
    if len(blocks) > 1 and len(blocks[-1]) * n_p < n_u:
        tail = blocks.pop()
        blocks[-1] = range(blocks[-1].start, tail.stop)
        logger.debug("merged short trailing coherence block of %d subcarriers", len(tail))
    return tuple(blocks)


def pilot_plan(cfg: SystemConfig, nv_rule: Optional[Union[NvRule, str]] = None) -> PilotPlan:
    """
    Shortened pilot plan: N_P = ceil(N_U / min(N_C, N_H)).

    Inside each coherence block UE slot k pilots on the block's
    (k mod block size)-th subcarrier, using pilot row k // block size, so
    every roster holds at most N_P users.

    N_V is the number of blocks that actually carry pilots: every block
    under the proof rule, only the first under the literal rule. A merged
    trailing block therefore lowers N_V below ceil(N_C/N_H).
    """
    cfg = _require_validated(cfg)
    rule = NvRule(nv_rule) if nv_rule is not None else cfg.nv_rule
    n_u = cfg.users_per_subcarrier
    n_p, nominal = pilot_counts(n_u, cfg.subcarriers_per_user, cfg.n_coherence, rule)

    blocks = coherence_blocks(cfg)
    n_v = len(blocks) if rule is NvRule.PROOF else 1
    if n_v != nominal:
        logger.info("N_V = %d pilot blocks laid out (formula gives %d)", n_v, nominal)
    rosters = [[] for _ in range(cfg.subcarriers_per_user)]
    for block in blocks[:n_v]:
        for slot in range(n_u):
            rosters[block[slot % len(block)]].append(slot)

    return PilotPlan(
        pilot_length=n_p,
        pilot_carriers_per_ue=n_v,
        n_coherence_subcarriers=cfg.n_coherence,
        blocks=blocks,
        rosters=tuple(tuple(r) for r in rosters),
    )


# ============================================================================
# Allocation and power control
# ============================================================================


def _frozen(array: NDArray) -> NDArray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class AllocationPlan:
    n_groups: int
    subcarrier_groups: Tuple[range, ...]
    ue_groups: Tuple[range, ...]
    pilot_plan: PilotPlan
    # eta[i, k]: power share of the k-th UE slot of subcarrier i's group on subcarrier i
    power_coefficients: NDArray[np.float64] = field(repr=False, compare=False)

    @property
    def eta_bar(self) -> NDArray[np.float64]:
        """η̄_i = Σ_k η_ik for every subcarrier."""
        return self.power_coefficients.sum(axis=1)

    def eta(self, subcarrier: int, slot: int) -> float:
        return float(self.power_coefficients[subcarrier, slot])

    def group_of_subcarrier(self, subcarrier: int) -> int:
        return subcarrier // len(self.subcarrier_groups[0])


def build_allocation(cfg: SystemConfig, nv_rule: Optional[Union[NvRule, str]] = None) -> AllocationPlan:
    """Contiguous subcarrier groups, index-order UE groups, uniform η = 1/N_C."""
    cfg = _require_validated(cfg)
    n_c, n_u, n_groups = cfg.subcarriers_per_user, cfg.users_per_subcarrier, cfg.n_groups
    eta = np.full((cfg.n_subcarriers, n_u), 1.0 / n_c)
    return AllocationPlan(
        n_groups=n_groups,
        subcarrier_groups=tuple(range(g * n_c, (g + 1) * n_c) for g in range(n_groups)),
        ue_groups=tuple(range(g * n_u, (g + 1) * n_u) for g in range(n_groups)),
        pilot_plan=pilot_plan(cfg, nv_rule),
        power_coefficients=_frozen(eta),
    )


def sample_power_coefficients(
    plan: AllocationPlan, mode: Union[PowerMode, str] = PowerMode.UNIFORM, seed: int = 0
) -> AllocationPlan:
    """
    Redraws η for every UE of every group.

    Random mode takes the spacings of sorted uniforms on [0, 1], the flat
    distribution on the simplex, so each UE's shares sum to 1.
    """
    n_groups = plan.n_groups
    n_c = len(plan.subcarrier_groups[0])
    n_u = len(plan.ue_groups[0])
    if PowerMode(mode) is PowerMode.UNIFORM:
        eta = np.full((n_groups * n_c, n_u), 1.0 / n_c)
    else:
        rng = np.random.default_rng(seed)
        cuts = np.sort(rng.random((n_groups, n_u, n_c - 1)), axis=-1)
        edges = np.concatenate(
            [np.zeros((n_groups, n_u, 1)), cuts, np.ones((n_groups, n_u, 1))], axis=-1
        )
        shares = np.diff(edges, axis=-1)  # (group, slot, offset)
        eta = shares.transpose(0, 2, 1).reshape(n_groups * n_c, n_u)
    return replace(plan, power_coefficients=_frozen(np.ascontiguousarray(eta)))


# ============================================================================
# Sweep helpers
# ============================================================================


def pilot_percentage(n_p: int, n_d: int) -> float:
    """μ = 100·N_P/(N_P + N_D)."""
    if n_p < 1 or n_d < 0:
        raise DomainError(f"pilot_percentage needs N_P >= 1 and N_D >= 0, got ({n_p}, {n_d})")
    return 100.0 * n_p / (n_p + n_d)


def frame_length_for_percentage(n_p: int, mu: float) -> int:
    """Data length N_D that gives pilot percentage μ with N_P pilots."""
    if not 0 < mu <= 100:
        raise DomainError(f"pilot percentage must lie in (0, 100], got {mu!r}")
    return int(round(n_p * (100.0 - mu) / mu))


def scaled_user_split(cfg: SystemConfig, users_per_subcarrier: int) -> SystemConfig:
    """Re-plans cfg at a new N_U keeping the ratio N_U/N_C."""
    cfg = _require_validated(cfg)
    scaled = users_per_subcarrier * cfg.subcarriers_per_user / cfg.users_per_subcarrier
    if scaled != int(scaled) or scaled < 1:
        raise GroupingError(
            f"N_U = {users_per_subcarrier} cannot keep N_U/N_C = "
            f"{cfg.users_per_subcarrier}/{cfg.subcarriers_per_user}"
        )
    return cfg.with_updates(users_per_subcarrier=users_per_subcarrier, subcarriers_per_user=int(scaled))
