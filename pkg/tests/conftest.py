import os
import sys

import pytest

_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, _ROOT)

from mimo_uplink.system import SystemConfig, validate_config  # noqa: E402

# reference cell of the numerical study: 3 GHz carrier, 10 kHz spacing, SNR 10 dB
REFERENCE = dict(
    n_antennas=256,
    n_users=2048,
    n_subcarriers=512,
    users_per_subcarrier=8,
    subcarriers_per_user=2,
    subcarrier_spacing=10e3,
    carrier_frequency=3e9,
    v_max=25.0,
    effective_tx_power=10.0,
    noise_variance=1.0,
    channel_variance=1.0,
    coherence_bandwidth=300e3,
    frame_data_length=28,
)


def make_config(**overrides) -> SystemConfig:
    return validate_config(SystemConfig(**{**REFERENCE, **overrides}))


@pytest.fixture
def reference_cfg() -> SystemConfig:
    return make_config()
