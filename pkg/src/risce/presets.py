"""Named experiment presets for the command-line runner.

Each sweep preset expands to one or more labeled SweepSpec runs whose
rows merge into a single table; spectrum presets describe a single-shot
scenario instead. Scales follow the reference evaluation setup
(terahertz band, 128 subcarriers); override any field with --set.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import PathSetBsRis, SystemConfig, _cn, _grid_sample
from .harness import SweepSpec

THZ_BASE = SystemConfig(n_users=8)  # terahertz setup, eight-user cell
MMWAVE_BASE = THZ_BASE.replace(f_c=28e9, bandwidth=600e6, tau_max=53e-9)

SPECTRUM_SUPPORTS = (3, 4, 24)  # transmit-grid columns for the demo scenario

SWEEP_PRESETS = ("fig4_rmse_vs_snr", "fig5_nmse_vs_snr", "fig6_nmse_vs_T",
                 "fig7_nmse_vs_P", "fig8_nmse_vs_paths", "fig9_nmse_vs_ris")
SPECTRUM_PRESETS = ("fig3_enm_spectrum",)
PRESET_NAMES = SPECTRUM_PRESETS + SWEEP_PRESETS

_ALL_ALGOS = ("proposed", "cbs_gamp_all_sc", "omp_conventional", "omp_bsa",
              "oracle_ls")
_SNR_GRID = (-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0)


@dataclass(frozen=True)
class LabeledSweep:
    """A SweepSpec plus the algorithm-label suffix for its rows."""

    spec: SweepSpec
    label_suffix: str = ""


def _sweep(config, variable, values, algorithms, trials, seed, suffix=""):
    return LabeledSweep(SweepSpec(config, variable, tuple(values),
                                  tuple(algorithms), trials, seed), suffix)


def sweep_preset(name: str, config_overrides: Optional[dict] = None,
                 trials: int = 50, seed: int = 0) -> list:
    """Expand a sweep preset name into labeled sweeps."""
    over = config_overrides or {}

    def cfg(**kw):
        merged = {**kw, **over}
        return THZ_BASE.replace(**merged)

    if name == "fig4_rmse_vs_snr":
        base = dict(n_paths_bs=1, n_paths_ue=2, n_subframes=25, n_slots=12,
                    on_grid=False, bs_dods_known=True, n_users=1)
        return [
            _sweep(cfg(q_ris=64, **base), "snr_db", _SNR_GRID, ("proposed",),
                   trials, seed, "_qr64"),
            _sweep(cfg(q_ris=128, **base), "snr_db", _SNR_GRID, ("proposed",),
                   trials, seed, "_qr128"),
        ]
    if name == "fig5_nmse_vs_snr":
        return [_sweep(cfg(n_subframes=50, n_slots=30), "snr_db", _SNR_GRID,
                       _ALL_ALGOS, trials, seed)]
    if name == "fig6_nmse_vs_T":
        return [_sweep(cfg(snr_db=20.0, n_slots=15), "n_subframes",
                       (10, 20, 30, 40, 50, 60), _ALL_ALGOS, trials, seed)]
    if name == "fig7_nmse_vs_P":
        return [_sweep(cfg(snr_db=20.0, n_subframes=30), "n_slots",
                       (10, 15, 20, 25, 30, 35), _ALL_ALGOS, trials, seed)]
    if name == "fig8_nmse_vs_paths":
        return [_sweep(cfg(snr_db=20.0, n_subframes=50, n_slots=30), "n_paths",
                       (1, 2, 3, 4), _ALL_ALGOS, trials, seed)]
    if name == "fig9_nmse_vs_ris":
        return [_sweep(cfg(snr_db=20.0, n_subframes=50, n_slots=30), "n_ris",
                       (32, 64, 96, 128), _ALL_ALGOS, trials, seed)]
    raise ValueError(f"unknown sweep preset '{name}'")


def merge_labeled_rows(labeled_rows: list) -> list:
    """Apply label suffixes so multi-run presets share one table."""
    out = []
    for suffix, rows in labeled_rows:
        for row in rows:
            item = dict(row)
            if suffix:
                item["algorithm"] = item["algorithm"] + suffix
            out.append(item)
    return out


def fixed_support_paths(config: SystemConfig, rng: np.random.Generator,
                        support) -> PathSetBsRis:
    """Transmit->surface paths with departure sines pinned to grid columns.

    Gains, delays and arrival sines follow the standard draw; only the
    departure support is forced (for spectrum demonstrations).
    """
    idx = np.asarray(sorted(support), dtype=int)
    l_bs = idx.shape[0]
    gains = _cn(rng, l_bs)
    delays = rng.uniform(0.0, config.tau_max, l_bs)
    doa_idx = np.sort(rng.choice(config.q_ris, size=l_bs, replace=False))
    return PathSetBsRis(gains, delays, _grid_sample(idx, config.q_tx),
                        _grid_sample(doa_idx, config.q_ris),
                        dod_index=idx, doa_index=doa_idx)


def spectrum_config(kind: str, config_overrides: Optional[dict] = None) -> SystemConfig:
    """Scenario config for a spectrum command."""
    over = config_overrides or {}
    if kind == "enm":
        base = dict(n_users=1, n_paths_bs=len(SPECTRUM_SUPPORTS), snr_db=20.0)
    elif kind == "music":
        base = dict(n_users=1, n_paths_bs=1, n_paths_ue=2, snr_db=20.0)
    else:
        raise ValueError(f"unknown spectrum kind '{kind}'")
    return THZ_BASE.replace(**{**base, **over})
