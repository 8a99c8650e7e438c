"""
────────────────────────────────────────────────────────────────────────────
Command-line front end
────────────────────────────────────────────────────────────────────────────

🔍 What It Does:
- validate   check a config file and print the derived L and N_H
- ici        per-subcarrier ICI power next to the closed form
- nmse       NMSE against pilot SNR, single- and multi-carrier
- rate       per-symbol SINR and rate for n = 1..N
- sumrate    system sum-rate over a range of frame data lengths
- mc         a Monte Carlo campaign along one axis
- preset     one of the study sweeps fig1 … fig9

📥 Input:
- A flat `key = value` config file (--config, default configs/section6.cfg)
  plus `--set key=value` overrides in the same units (powers in dB).

📤 Output:
- CSV on stdout or at --out; status lines (✅ / ⚠️ / ❌) on stderr.
  Exit 0 on success, 2 for invalid input, 3 when files cannot be read or written.
────────────────────────────────────────────────────────────────────────────
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from .errors import DomainError, UplinkError
from .estimation import nmse_sweep
from .ici import doppler_b, ici_power_closed_form, ici_power_profile, ici_power_small_b
from .mcsim import ESTIMATORS, ICI_MODES, SWEEP_AXES, CampaignSpec, run_campaign
from .presets import PILOT_SNR_DB, PRESETS, SCALES, get_preset
from .rate import Combiner, per_symbol_rate, sinr_trajectory, sum_rate_curve
from .system import (
    PowerMode,
    SystemConfig,
    build_allocation,
    load_config,
    override_config,
    pilot_percentage,
    sample_power_coefficients,
)

logger = logging.getLogger(__name__)

DEFAULT_CONFIG = Path(__file__).resolve().parents[1] / "configs" / "section6.cfg"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
COMBINER_CHOICES = {"zf": (Combiner.ZF,), "mrc": (Combiner.MRC,), "both": (Combiner.ZF, Combiner.MRC)}


def emit_csv(table: pd.DataFrame, path: Optional[Union[str, Path]] = None) -> Optional[Path]:
    """
    Writes a table as UTF-8 CSV with 17 significant digits per float.

    `path` None or "-" means stdout. Returns the file written, if any.
    """
    if table.empty:
        raise DomainError("refusing to write an empty table")
    text = table.to_csv(index=False, float_format="%.17g", lineterminator="\n")
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return None
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(text)
    return path


# ----------------------------------------------------------------------------
# Subcommands
# ----------------------------------------------------------------------------


def _combiners(args) -> tuple:
    return COMBINER_CHOICES[args.combiner]


def _validate(args, cfg: SystemConfig):
    plan = build_allocation(cfg)
    print(
        f"✅ L={cfg.n_groups}, N_H={cfg.n_coherence}, N_P={plan.pilot_plan.pilot_length}, "
        f"N_V={plan.pilot_plan.pilot_carriers_per_ue}, b={doppler_b(cfg):.6g}"
    )
    return None


def _ici(args, cfg: SystemConfig) -> pd.DataFrame:
    plan = sample_power_coefficients(build_allocation(cfg), args.allocation, seed=args.seed)
    profile = ici_power_profile(cfg, plan)
    return pd.DataFrame(
        {
            "subcarrier": np.arange(cfg.n_subcarriers),
            "ici_power": profile,
            "closed_form": ici_power_closed_form(cfg),
            "small_b": ici_power_small_b(cfg),
        }
    )


def _nmse(args, cfg: SystemConfig) -> pd.DataFrame:
    return nmse_sweep(cfg, build_allocation(cfg), PILOT_SNR_DB)


def _rate(args, cfg: SystemConfig) -> pd.DataFrame:
    plan = build_allocation(cfg)
    symbols = list(range(1, (args.max_symbol or cfg.frame_data_length) + 1))
    if not symbols:
        raise DomainError("no data symbols to evaluate")
    blocks = []
    for combiner in _combiners(args):
        sinr = sinr_trajectory(combiner, cfg, plan, symbols)
        blocks.append(
            pd.DataFrame({"combiner": combiner.value, "n": symbols, "sinr": sinr, "rate_bps": per_symbol_rate(sinr, cfg)})
        )
    return pd.concat(blocks, ignore_index=True)


def _sumrate(args, cfg: SystemConfig) -> pd.DataFrame:
    plan = build_allocation(cfg)
    grid = list(range(1, (args.max_data or cfg.frame_data_length) + 1))
    n_p = plan.pilot_plan.pilot_length
    blocks = []
    for combiner in _combiners(args):
        blocks.append(
            pd.DataFrame(
                {
                    "combiner": combiner.value,
                    "n_data": grid,
                    "pilot_pct": [pilot_percentage(n_p, n_d) for n_d in grid],
                    "sum_rate_bps": sum_rate_curve(combiner, cfg, plan, grid),
                }
            )
        )
    return pd.concat(blocks, ignore_index=True)


def _mc(args, cfg: SystemConfig) -> pd.DataFrame:
    spec = CampaignSpec(
        axis=args.axis,
        grid=tuple(args.grid),
        combiners=_combiners(args),
        trials=args.trials or SCALES[args.scale].trials,
        symbol=args.symbol,
        ici_mode=args.ici_mode,
        estimator=args.estimator,
    )
    return run_campaign(spec, cfg, build_allocation(cfg), args.seed, workers=args.workers, progress=not args.quiet)


def _preset(args, cfg: SystemConfig) -> pd.DataFrame:
    return get_preset(args.name).run(
        cfg,
        scale=args.scale,
        combiners=_combiners(args),
        seed=args.seed,
        workers=args.workers,
        trials=args.trials,
        progress=not args.quiet,
    )


# ----------------------------------------------------------------------------
# Parser
# ----------------------------------------------------------------------------


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=DEFAULT_CONFIG, help="flat key = value config file")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (config-file units, repeatable)")
    common.add_argument("--seed", type=_seed, default=0, help="master seed (u64)")
    common.add_argument("--out", default=None, help="CSV path or directory; stdout when omitted")
    common.add_argument("--combiner", choices=sorted(COMBINER_CHOICES), default="both")
    common.add_argument("--scale", choices=sorted(SCALES), default="desk")
    common.add_argument("--workers", type=int, default=1, help="joblib workers for Monte Carlo trials (-1 = all cores)")
    common.add_argument("--trials", type=_positive, default=None, help="Monte Carlo trials per point")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    common.add_argument("--quiet", action="store_true", help="no progress bar")

    parser = argparse.ArgumentParser(prog="mimo_uplink", description="Massive MIMO-OFDM uplink rates under channel aging and ICI")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", parents=[common], help="check a config file").set_defaults(handler=_validate)

    ici = sub.add_parser("ici", parents=[common], help="per-subcarrier and closed-form ICI power")
    ici.add_argument("--allocation", choices=[m.value for m in PowerMode], default=PowerMode.UNIFORM.value)
    ici.set_defaults(handler=_ici)

    sub.add_parser("nmse", parents=[common], help="NMSE against pilot SNR").set_defaults(handler=_nmse)

    rate = sub.add_parser("rate", parents=[common], help="per-symbol SINR and rate")
    rate.add_argument("--max-symbol", type=_positive, default=None, help="last data symbol (default N_D)")
    rate.set_defaults(handler=_rate)

    sumrate = sub.add_parser("sumrate", parents=[common], help="system sum-rate against frame data length")
    sumrate.add_argument("--max-data", type=_positive, default=None, help="longest frame data length (default N_D)")
    sumrate.set_defaults(handler=_sumrate)

    mc = sub.add_parser("mc", parents=[common], help="Monte Carlo campaign along one axis")
    mc.add_argument("--axis", choices=list(SWEEP_AXES), default="n")
    mc.add_argument("--grid", type=float, nargs="+", required=True, help="axis values")
    mc.add_argument("--symbol", type=_positive, default=1, help="data symbol measured when the axis is not n")
    mc.add_argument("--ici-mode", choices=ICI_MODES, default="gaussian")
    mc.add_argument(
        "--estimator", choices=ESTIMATORS, default="independent", help="how each trial draws Ĥ and G^P"
    )
    mc.set_defaults(handler=_mc)

    preset = sub.add_parser("preset", parents=[common], help="reproduce one study sweep")
    preset.add_argument("name", choices=list(PRESETS))
    preset.set_defaults(handler=_preset)
    return parser


def _destination(args) -> Optional[Path]:
    if args.out is None or args.out == "-":
        return None
    out = Path(args.out)
    if out.is_dir():
        name = get_preset(args.name).output if args.command == "preset" else f"{args.command}.csv"
        return out / name
    return out


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format=LOG_FORMAT)

    try:
        cfg = override_config(load_config(args.config), args.overrides)
        table = args.handler(args, cfg)
        if table is None:
            return 0
        written = emit_csv(table, _destination(args))
    except UplinkError as exc:
        print(f"❌ {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"❌ I/O error: {exc}", file=sys.stderr)
        return 3

    if written is not None:
        print(f"✅ saved {len(table)} rows to {written}", file=sys.stderr)
        logger.info("%s written to %s", args.command, written)
    return 0


def main(argv: Optional[List[str]] = None) -> None:
    sys.exit(run(argv))
