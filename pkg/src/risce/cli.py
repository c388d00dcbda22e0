"""Command-line entry points for sweeps and spectrum snapshots."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import fields

import numpy as np

from .angles import (default_n_sub, enm_estimate, music_spectrum,
                     project_rest_csi, spatial_smooth)
from .dictionary import grid
from .exceptions import InvalidConfigError, SimulationError
from .harness import ALGORITHMS, SweepSpec, run_sweep, write_csv, write_json
from .model import SystemConfig, draw_paths, steering_matrix, synthesize_channels
from .presets import (PRESET_NAMES, SPECTRUM_PRESETS, SPECTRUM_SUPPORTS,
                      SWEEP_PRESETS, LabeledSweep, fixed_support_paths,
                      merge_labeled_rows, spectrum_config, sweep_preset)
from .recovery import estimate_cascaded_two_sc
from .sounding import (compress_measurements, compress_pilots,
                       generate_pilots, measure)

_CONFIG_FIELDS = {f.name for f in fields(SystemConfig)}


def _normalize(overrides: dict) -> dict:
    if overrides.get("snr_db") in (None, "inf") and "snr_db" in overrides:
        overrides["snr_db"] = math.inf
    return overrides


def _parse_overrides(pairs) -> dict:
    """--set key=value pairs; values parse as JSON literals, else strings."""
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise InvalidConfigError(f"--set expects key=value, got '{pair}'")
        key, raw = pair.split("=", 1)
        if key not in _CONFIG_FIELDS:
            raise InvalidConfigError(f"unknown config field '{key}' in --set")
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return _normalize(out)


def _read_config_file(path: str) -> dict:
    """Fields present in the file become overrides; absent fields keep
    whatever the preset (or the defaults) say."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidConfigError(
            f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}")
    except OSError as exc:
        raise InvalidConfigError(f"cannot read config file: {exc}")
    if not isinstance(data, dict):
        raise InvalidConfigError(f"{path}: expected a JSON object")
    unknown = sorted(set(data) - _CONFIG_FIELDS)
    if unknown:
        raise InvalidConfigError(f"unknown config fields: {', '.join(unknown)}")
    return _normalize(data)


def _load_overrides(args) -> dict:
    merged = {}
    if args.config:
        merged.update(_read_config_file(args.config))
    merged.update(_parse_overrides(args.set))
    return merged


def cmd_run(args) -> int:
    overrides = _load_overrides(args)
    if args.preset in SPECTRUM_PRESETS:
        return cmd_spectrum(args, kind="enm")
    if args.preset:
        sweeps = sweep_preset(args.preset, overrides, trials=args.trials,
                              seed=args.seed)
    else:
        config = SystemConfig.from_dict(overrides)
        spec = SweepSpec(config, "snr_db", (config.snr_db,), ALGORITHMS,
                         args.trials, args.seed)
        sweeps = [LabeledSweep(spec)]
    labeled = [(ls.label_suffix, run_sweep(ls.spec, workers=args.threads))
               for ls in sweeps]
    rows = merge_labeled_rows(labeled)
    out = args.out or ("results.json" if args.json else "results.csv")
    if args.json:
        write_json(rows, out)
    else:
        write_csv(rows, out)
    _print_rows(rows)
    print(f"wrote {out}")
    return 0


def _print_rows(rows):
    cols = ("algorithm", "variable", "value", "nmse_mean", "rmse_mean",
            "pc_bs", "pc_ris", "failures")
    print("  ".join(f"{c:>16}" for c in cols))
    for row in rows:
        cells = []
        for c in cols:
            v = row[c]
            cells.append(f"{v:>16.6g}" if isinstance(v, float) else f"{v:>16}")
        print("  ".join(cells))


def cmd_spectrum(args, kind=None) -> int:
    kind = kind or args.kind
    overrides = _load_overrides(args)
    config = spectrum_config(kind, overrides)
    rng = np.random.default_rng(args.seed)
    paths_bs, paths_ue = draw_paths(config, rng)
    if kind == "enm":
        paths_bs = fixed_support_paths(config, rng, SPECTRUM_SUPPORTS)
    channel = synthesize_channels(config, paths_bs, paths_ue)
    pilots = generate_pilots(config, rng)
    y, noise_var = measure(channel, pilots, config.snr_db, rng)
    pilots, transforms = compress_pilots(pilots)
    y = compress_measurements(y, transforms)
    phase1 = estimate_cascaded_two_sc(y[0], noise_var[0], pilots, config,
                                      channel.etas)
    est = enm_estimate([s.x_hat for s in phase1.solutions],
                       config.n_paths_bs, config.q_tx, config.q_ris)
    out = args.out or "spectrum.csv"
    if kind == "enm":
        energy = est.spectrum / max(est.spectrum.max(), 1e-30)
        tx_grid = grid(config.q_tx).samples
        rows = [(q, f"{a:.10g}", f"{e:.10g}")
                for q, (a, e) in enumerate(zip(tx_grid, energy))]
        _write_spectrum_csv(out, ("grid_index", "angle", "energy"), rows)
        print(f"support: {[int(q) for q in est.support]}")
    else:
        n_sub = config.n_sub or default_n_sub(config.n_ris)
        rows = []
        for sc, h_hat in zip(phase1.sc_indices, phase1.h_hat):
            eta = float(channel.etas[sc])
            a_t = steering_matrix(est.dods, eta, config.n_tx)
            u = project_rest_csi(h_hat, a_t).u
            spec = music_spectrum(spatial_smooth(u[:, 0], n_sub),
                                  config.n_paths_ue, config.q_ris, eta)
            vals = spec.values[1:-1]
            vals = vals / max(vals.max(), 1e-30)
            rows.extend((sc + 1, q, f"{g:.10g}", f"{v:.10g}")
                        for q, (g, v) in enumerate(zip(spec.grid, vals)))
        _write_spectrum_csv(out, ("sc", "grid_index", "coupled_angle", "value"),
                            rows)
    print(f"wrote {out}")
    return 0


def _write_spectrum_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="risce",
        description="Monte Carlo channel-estimation experiments for a "
                    "RIS-assisted wideband downlink")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON system-config file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one config field (repeatable)")
    common.add_argument("--seed", type=int, default=0, help="base RNG seed")
    common.add_argument("--out", help="output path")

    run = sub.add_parser("run", parents=[common],
                         help="execute a sweep preset or a single config")
    run.add_argument("--preset", choices=PRESET_NAMES,
                     help="named experiment preset")
    run.add_argument("--trials", type=int, default=50,
                     help="Monte Carlo trials per sweep point")
    run.add_argument("--json", action="store_true",
                     help="write JSON instead of CSV")
    run.add_argument("--threads", type=int, default=1,
                     help="parallel trial workers")
    run.set_defaults(func=cmd_run)

    spec = sub.add_parser("spectrum", parents=[common],
                          help="emit an estimator spectrum as CSV")
    spec.add_argument("--kind", choices=("enm", "music"), default="enm",
                      help="which spectrum to emit")
    spec.set_defaults(func=cmd_spectrum)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InvalidConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SimulationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
