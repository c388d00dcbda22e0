"""Wideband geometric channel model for a RIS-assisted downlink.

A multi-antenna transmitter reaches single-antenna users through a
reflecting surface. All angles are direction sines; the array response
is frequency dependent (beam split), so every per-subcarrier quantity
carries the relative frequency eta = f_m / f_c.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from .exceptions import InvalidConfigError

SPEED_OF_LIGHT = 299792458.0  # m/s, only used for documentation-level sanity


@dataclass(frozen=True)
class SystemConfig:
    """Full description of one simulated downlink.

    Field names are the stable JSON interface; unknown keys are rejected
    on load.
    """

    n_tx: int = 16              # transmit antennas
    n_ris: int = 64             # reflecting elements
    n_rf: int = 4               # RF chains (n_rf <= n_tx)
    n_users: int = 1            # single-antenna users
    n_sc: int = 128             # OFDM subcarriers (even)
    f_c: float = 100e9          # carrier frequency [Hz]
    bandwidth: float = 15e9     # total bandwidth [Hz]
    n_subframes: int = 50       # pilot subframes (one RIS pattern each)
    n_slots: int = 30           # pilot slots per subframe (one beam each)
    q_tx: int = 32              # transmit-side dictionary grid size
    q_ris: int = 128            # surface-side dictionary grid size
    n_paths_bs: int = 3         # paths transmitter -> surface
    n_paths_ue: int = 3         # paths surface -> each user
    snr_db: float = 20.0        # receive SNR [dB]; inf disables noise
    tau_max: float = 20e-9      # maximum path delay [s]
    on_grid: bool = True        # draw direction sines from the grids
    seed: int = 0               # base RNG seed

    # estimator knobs (defaults follow the reference pipeline)
    solver: str = "gamp"        # gamp | omp_cbs | omp_conventional | omp_bsa
    gamp_max_iter: int = 50
    gamp_damping: float = 0.7
    gamp_tol: float = 1e-6
    sparsity_rate: Optional[float] = None  # None -> L*J/(Q_B*Q_T)
    n_sub: Optional[int] = None            # smoothing subarray; None -> ceil(N_R/2)-1
    rmse_squared: bool = False             # sqrt(mean|e|^2) instead of sqrt(mean|e|)
    bs_dods_known: bool = False            # skip transmit-side support estimation

    def __post_init__(self):
        checks = [
            (self.n_tx >= 1, "n_tx must be >= 1"),
            (self.n_ris >= 1, "n_ris must be >= 1"),
            (self.n_rf >= 1, "n_rf must be >= 1"),
            (self.n_rf <= self.n_tx, "n_rf must not exceed n_tx"),
            (self.n_users >= 1, "n_users must be >= 1"),
            (self.n_sc >= 2 and self.n_sc % 2 == 0, "n_sc must be even and >= 2"),
            (self.f_c > 0, "f_c must be positive"),
            (self.bandwidth >= 0, "bandwidth must be nonnegative"),
            (self.bandwidth < 2 * self.f_c, "bandwidth must keep all subcarriers positive"),
            (self.n_subframes >= 1, "n_subframes must be >= 1"),
            (self.n_slots >= 1, "n_slots must be >= 1"),
            (self.q_tx >= 1, "q_tx must be >= 1"),
            (self.q_ris >= 2, "q_ris must be >= 2"),
            (self.n_paths_bs >= 1, "n_paths_bs must be >= 1"),
            (self.n_paths_ue >= 1, "n_paths_ue must be >= 1"),
            (self.tau_max >= 0, "tau_max must be nonnegative"),
            (0.0 < self.gamp_damping <= 1.0, "gamp_damping must be in (0, 1]"),
            (self.gamp_max_iter >= 1, "gamp_max_iter must be >= 1"),
            (self.gamp_tol > 0, "gamp_tol must be positive"),
        ]
        if self.on_grid:
            checks.append((self.q_tx >= self.n_paths_bs,
                           "on-grid draw needs q_tx >= n_paths_bs"))
            checks.append((self.q_ris >= self.n_paths_ue,
                           "on-grid draw needs q_ris >= n_paths_ue"))
        if self.sparsity_rate is not None:
            checks.append((0 < self.sparsity_rate < 1, "sparsity_rate must be in (0, 1)"))
        if self.n_sub is not None:
            checks.append((self.n_sub >= 2, "n_sub must be >= 2"))
        if self.solver not in ("gamp", "omp_cbs", "omp_conventional", "omp_bsa"):
            raise InvalidConfigError(f"unknown solver '{self.solver}'")
        for ok, msg in checks:
            if not ok:
                raise InvalidConfigError(msg)

    @classmethod
    def from_dict(cls, data: dict) -> "SystemConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidConfigError(
                f"unknown config field(s): {', '.join(sorted(unknown))}")
        clean = dict(data)
        if "snr_db" in clean:
            v = clean["snr_db"]
            if v is None or (isinstance(v, str) and v.lower() == "inf"):
                clean["snr_db"] = math.inf
        return cls(**clean)

    @classmethod
    def from_json(cls, path: str) -> "SystemConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InvalidConfigError(
                    f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: "
                    f"{exc.msg}") from exc
        if not isinstance(data, dict):
            raise InvalidConfigError(f"{path}: top-level JSON value must be an object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        if math.isinf(out["snr_db"]):
            out["snr_db"] = None
        return out

    def replace(self, **kw) -> "SystemConfig":
        merged = {f.name: getattr(self, f.name) for f in fields(self)}
        merged.update(kw)
        return SystemConfig(**merged)


@dataclass(frozen=True)
class PathSetBsRis:
    """Multipath set transmitter -> surface (shared by all users)."""

    gains: np.ndarray       # (L,) complex path gains
    delays: np.ndarray      # (L,) delays [s]
    dod: np.ndarray         # (L,) departure direction sines at the transmitter
    doa: np.ndarray         # (L,) arrival direction sines at the surface
    dod_index: Optional[np.ndarray] = None  # grid indices when drawn on-grid
    doa_index: Optional[np.ndarray] = None


@dataclass(frozen=True)
class PathSetRisUe:
    """Multipath set surface -> one user."""

    gains: np.ndarray       # (J,) complex path gains
    delays: np.ndarray      # (J,) delays [s]
    dod: np.ndarray         # (J,) departure direction sines at the surface
    dod_index: Optional[np.ndarray] = None


@dataclass(frozen=True)
class ChannelRealization:
    """Per-subcarrier channel matrices for one draw."""

    freqs: np.ndarray       # (M,) subcarrier frequencies [Hz]
    etas: np.ndarray        # (M,) relative frequencies f_m / f_c
    bs_ris: np.ndarray      # (M, N_R, N_T)
    ris_ue: np.ndarray      # (K, M, N_R) row channels
    cascaded: np.ndarray    # (K, M, N_R, N_T)
    paths_bs: PathSetBsRis
    paths_ue: tuple         # K entries of PathSetRisUe


def subcarrier_frequencies(n_sc: int, f_c: float, bandwidth: float) -> np.ndarray:
    """Centered uniform subcarrier grid around the carrier."""
    m = np.arange(1, n_sc + 1, dtype=float)
    return f_c + (bandwidth / n_sc) * (m - 1.0 - (n_sc - 1.0) / 2.0)


def relative_frequencies(n_sc: int, f_c: float, bandwidth: float) -> np.ndarray:
    return subcarrier_frequencies(n_sc, f_c, bandwidth) / f_c


def arv(u: float, eta: float, n: int) -> np.ndarray:
    """Array response vector for direction sine u at relative frequency eta.

    Unit l2 norm; accepts the extended domain |u| <= 2 used for coupled
    angles (the response is 2-periodic in eta*u).
    """
    k = np.arange(n)
    return np.exp(-1j * np.pi * eta * u * k) / math.sqrt(n)


def steering_matrix(us: np.ndarray, eta: float, n: int) -> np.ndarray:
    """Stack array response vectors as columns: (n, len(us))."""
    us = np.asarray(us, dtype=float)
    k = np.arange(n)[:, None]
    return np.exp(-1j * np.pi * eta * us[None, :] * k) / math.sqrt(n)


def _grid_sample(idx: np.ndarray, q: int) -> np.ndarray:
    """Direction sine of grid column idx (0-based): -1 + (2*idx + 1)/q."""
    return -1.0 + (2.0 * np.asarray(idx, dtype=float) + 1.0) / q


def _cn(rng: np.random.Generator, size) -> np.ndarray:
    """Standard circular complex normal samples."""
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / math.sqrt(2.0)


def draw_paths(config: SystemConfig, rng: np.random.Generator):
    """Draw one multipath realization.

    On-grid mode samples direction sines from the dictionary grids without
    replacement inside each path set; otherwise sines are uniform on [-1, 1].
    Returns (PathSetBsRis, list of PathSetRisUe, one per user).
    """
    l_bs, j_ue = config.n_paths_bs, config.n_paths_ue
    if config.on_grid and (l_bs > config.q_tx or j_ue > config.q_ris):
        raise InvalidConfigError("path count exceeds grid size in on-grid mode")

    gains = _cn(rng, l_bs)
    delays = rng.uniform(0.0, config.tau_max, l_bs)
    if config.on_grid:
        dod_idx = np.sort(rng.choice(config.q_tx, size=l_bs, replace=False))
        doa_idx = np.sort(rng.choice(config.q_ris, size=l_bs, replace=False))
        bs = PathSetBsRis(gains, delays,
                          _grid_sample(dod_idx, config.q_tx),
                          _grid_sample(doa_idx, config.q_ris),
                          dod_index=dod_idx, doa_index=doa_idx)
    else:
        bs = PathSetBsRis(gains, delays,
                          rng.uniform(-1.0, 1.0, l_bs),
                          rng.uniform(-1.0, 1.0, l_bs))

    users = []
    for _ in range(config.n_users):
        g = _cn(rng, j_ue)
        mu = rng.uniform(0.0, config.tau_max, j_ue)
        if config.on_grid:
            idx = np.sort(rng.choice(config.q_ris, size=j_ue, replace=False))
            users.append(PathSetRisUe(g, mu, _grid_sample(idx, config.q_ris),
                                      dod_index=idx))
        else:
            users.append(PathSetRisUe(g, mu, rng.uniform(-1.0, 1.0, j_ue)))
    return bs, users


def synthesize_channels(config: SystemConfig, paths_bs: PathSetBsRis,
                        paths_ue) -> ChannelRealization:
    """Evaluate the geometric channel on every subcarrier.

    The transmitter->surface matrix is a sum of rank-one terms with
    frequency-scaled steering on both sides; each user's surface->user
    row channel conjugates the surface response. The cascaded matrix is
    the row-wise product of the two.
    """
    freqs = subcarrier_frequencies(config.n_sc, config.f_c, config.bandwidth)
    etas = freqs / config.f_c
    n_r, n_t = config.n_ris, config.n_tx

    kr = np.arange(n_r)
    kt = np.arange(n_t)
    # (M, L, N) steering stacks with per-subcarrier eta
    spat_r = etas[:, None] * paths_bs.doa[None, :]
    spat_t = etas[:, None] * paths_bs.dod[None, :]
    a_r = np.exp(-1j * np.pi * spat_r[:, :, None] * kr[None, None, :]) / math.sqrt(n_r)
    a_t = np.exp(-1j * np.pi * spat_t[:, :, None] * kt[None, None, :]) / math.sqrt(n_t)
    coef = paths_bs.gains[None, :] * np.exp(-2j * np.pi * paths_bs.delays[None, :]
                                            * freqs[:, None])
    bs_ris = np.einsum("mlr,ml,mlt->mrt", a_r, coef, np.conj(a_t))

    ris_ue = np.empty((config.n_users, config.n_sc, n_r), dtype=complex)
    for k, pu in enumerate(paths_ue):
        spat_u = etas[:, None] * pu.dod[None, :]
        a_u = np.exp(-1j * np.pi * spat_u[:, :, None] * kr[None, None, :]) / math.sqrt(n_r)
        c_u = pu.gains[None, :] * np.exp(-2j * np.pi * pu.delays[None, :] * freqs[:, None])
        ris_ue[k] = np.einsum("mji,mj->mi", np.conj(a_u), c_u)

    cascaded = ris_ue[:, :, :, None] * bs_ris[None, :, :, :]
    return ChannelRealization(freqs, etas, bs_ris, ris_ue, cascaded,
                              paths_bs, tuple(paths_ue))


def coupled_angles(paths_bs: PathSetBsRis, path_ue: PathSetRisUe) -> np.ndarray:
    """True coupled direction sines psi_l - theta_j, shape (L, J)."""
    return paths_bs.doa[:, None] - path_ue.dod[None, :]
