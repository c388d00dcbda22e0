"""Angle estimation from the anchor-subcarrier sparse solutions.

Transmit-side departure directions come from block energies of the
recovered coefficients. Surface-side coupled angles come from subspace
pseudo-spectra of the projected residual factors; frequency-scaled
dictionaries are periodic in the coupled angle, so each true angle casts
replicas. Peaks are paired across two subcarriers to reject replicas:
true angles coincide, replicas shift with frequency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .dictionary import coupled_grid, grid
from .exceptions import (DegenerateAnglesError, InsufficientPeaksError,
                         NumericalError, SubarrayConfigError)

COND_LIMIT = 1e12


@dataclass(frozen=True)
class BsAngleEstimate:
    """Transmit-side support and departure sines."""

    support: np.ndarray     # (L,) 0-based grid columns, ascending
    dods: np.ndarray        # (L,) direction sines at the grid samples
    spectrum: np.ndarray    # (Q_T,) summed block energies


@dataclass(frozen=True)
class RestCsi:
    """Per-path residual factors after removing the transmit side."""

    u: np.ndarray           # (N_R, L) one column per estimated path
    cond: float             # conditioning of the projected steering matrix


@dataclass(frozen=True)
class MusicSpectrum:
    """Subspace pseudo-spectrum over the coupled grid."""

    values: np.ndarray      # (Q_B + 2,) padded with the minimum at both ends
    grid: np.ndarray        # (Q_B,) coupled sines
    eta: float


@dataclass(frozen=True)
class RisAngleEstimate:
    """Surface-side coupled angles, grouped per transmit path."""

    support: np.ndarray     # unique 0-based coupled-grid indices, ascending
    indices: np.ndarray     # (L, J) per-path indices (duplicates possible)
    coupled: np.ndarray     # (L, J) coupled sines at those indices


def enm_estimate(x_hats: Sequence[np.ndarray], n_paths_bs: int, q_tx: int,
                 q_ris: int) -> BsAngleEstimate:
    """Pick transmit-side grid columns by summed block energy.

    Each anchor's complex solution is magnitude-normalized, reshaped to
    (Q_B, Q_T) column-major, and reduced to per-column norms; the sums
    across anchors rank the columns. Support is ascending.
    """
    q_b = 2 * q_ris - 1
    energy = np.zeros(q_tx)
    for x in x_hats:
        mag = np.abs(x)
        norm = np.linalg.norm(mag)
        if norm == 0.0:
            continue
        blocks = (mag / norm).reshape(q_b, q_tx, order="F")
        energy += np.linalg.norm(blocks, axis=0)
    support = np.sort(np.argsort(-energy, kind="stable")[:n_paths_bs])
    return BsAngleEstimate(support, grid(q_tx).samples[support], energy)


def project_rest_csi(h_hat: np.ndarray, bs_steering: np.ndarray) -> RestCsi:
    """Strip the transmit side: U = H_hat @ pinv(A_T^H).

    With exact inputs each column of U is a scaled superposition of
    surface responses at one path's coupled angles.
    """
    cond = float(np.linalg.cond(bs_steering))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise DegenerateAnglesError(
            f"steering matrix condition {cond:.3e} exceeds {COND_LIMIT:.0e}")
    return RestCsi(h_hat @ np.linalg.pinv(bs_steering.conj().T), cond)


def spatial_smooth(u_col: np.ndarray, n_sub: int, strict: bool = True) -> np.ndarray:
    """Average sliding-window outer products to restore rank.

    Windows of length n_sub slide over the length-N_R column; the
    averaged covariance is n_sub x n_sub Hermitian. strict enforces
    n_windows > n_sub (more snapshots than subarray size).
    """
    n_full = u_col.shape[0]
    n_avg = n_full - n_sub + 1
    if n_sub < 1 or n_avg < 1:
        raise SubarrayConfigError(
            f"n_sub={n_sub} incompatible with array size {n_full}")
    if strict and not n_avg > n_sub:
        raise SubarrayConfigError(
            f"violated n_windows > n_sub: n_windows={n_avg} <= n_sub={n_sub}")
    windows = np.lib.stride_tricks.sliding_window_view(u_col, n_sub)
    return (windows.T @ windows.conj()) / n_avg


def default_n_sub(n_ris: int) -> int:
    """Default smoothing subarray size: ceil(N_R/2) - 1."""
    return (n_ris + 1) // 2 - 1


def music_spectrum(r_smooth: np.ndarray, n_src: int, q_ris: int,
                   eta: float) -> MusicSpectrum:
    """Noise-subspace pseudo-spectrum over the coupled grid.

    Atoms are frequency-scaled window responses exp(-j*2*pi*eta*
    (q/Q_R - 1)*n), n = 1..n_sub, unit-normalized. The spectrum is
    padded with its minimum at both ends so edge peaks are detectable.
    """
    n_sub = r_smooth.shape[0]
    if n_sub < n_src + 1:
        raise SubarrayConfigError(
            f"violated n_sub >= n_src + 1: n_sub={n_sub}, n_src={n_src}")
    try:
        eigvals, eigvecs = np.linalg.eigh(r_smooth)
    except np.linalg.LinAlgError as exc:
        scale = float(np.abs(r_smooth).max())
        raise NumericalError(
            f"eigendecomposition failed (matrix scale {scale:.3e})") from exc
    noise_basis = eigvecs[:, : n_sub - n_src]  # ascending order: smallest first
    qs = np.arange(1, 2 * q_ris, dtype=float)
    ramp = np.arange(1, n_sub + 1, dtype=float)
    atoms = np.exp(-2j * np.pi * eta * (qs[None, :] / q_ris - 1.0) * ramp[:, None])
    atoms /= math.sqrt(n_sub)
    proj = noise_basis.conj().T @ atoms
    power = np.einsum("ij,ij->j", proj, np.conj(proj)).real
    values = 1.0 / np.maximum(power, 1e-30)
    lo = float(values.min())
    padded = np.concatenate([[lo], values, [lo]])
    return MusicSpectrum(padded, coupled_grid(q_ris), eta)


def find_spectrum_peaks(values_padded: np.ndarray, max_count: int) -> np.ndarray:
    """Strict local maxima of a padded spectrum, strongest first.

    Returns 0-based indices into the unpadded grid; ties rank the lower
    index first.
    """
    inner = values_padded[1:-1]
    mask = (inner > values_padded[:-2]) & (inner > values_padded[2:])
    idx = np.flatnonzero(mask)
    order = np.lexsort((idx, -inner[idx]))
    return idx[order][:max_count]


def k_cp_max(eta: float, q_ris: int) -> int:
    """Largest possible count of beam-identical coupled-grid positions."""
    return int(math.floor(eta * (2.0 - 1.0 / q_ris))) + 1


def sc_selection_valid(m: int, n_sc: int, f_c: float, bandwidth: float,
                       q_ris: int) -> bool:
    """Whether 1-based subcarrier m keeps the replica count at two or less.

    Zero bandwidth trivially qualifies.
    """
    if bandwidth == 0.0:
        return True
    q_b = 2 * q_ris - 1
    return m < n_sc / 2.0 + n_sc * f_c / (bandwidth * q_b) + 0.5


def peak_distance(k: int, q_ris: int, f_c: float, f_a: float, f_b: float) -> float:
    """Predicted index distance of order-k replicas across two subcarriers."""
    return k * q_ris * f_c * abs(1.0 / f_a - 1.0 / f_b)


def _peaks_oversampled(r_smooth: np.ndarray, n_src: int, q_ris: int,
                       eta: float, max_count: int, os: int = 16) -> np.ndarray:
    """Locate pseudo-spectrum peaks on a refined scan.

    Neighboring sources one grid step apart merge into a single local
    maximum when the spectrum is sampled at grid resolution; scanning at
    os points per step separates them. Returns fractional 0-based grid
    positions, strongest first, at most one per grid bin: sub-step
    offsets carry the replica signature that distinguishes a true peak
    repeated across subcarriers from two replicas landing on the same
    bin by accident.
    """
    n_sub = r_smooth.shape[0]
    if n_sub < n_src + 1:
        raise SubarrayConfigError(
            f"violated n_sub >= n_src + 1: n_sub={n_sub}, n_src={n_src}")
    try:
        eigvals, eigvecs = np.linalg.eigh(r_smooth)
    except np.linalg.LinAlgError as exc:
        scale = float(np.abs(r_smooth).max())
        raise NumericalError(
            f"eigendecomposition failed (matrix scale {scale:.3e})") from exc
    noise_basis = eigvecs[:, : n_sub - n_src]
    qs = np.linspace(1.0, 2.0 * q_ris - 1.0, os * (2 * q_ris - 2) + 1)
    ramp = np.arange(1, n_sub + 1, dtype=float)
    atoms = np.exp(-2j * np.pi * eta * (qs[None, :] / q_ris - 1.0)
                   * ramp[:, None])
    atoms /= math.sqrt(n_sub)
    proj = noise_basis.conj().T @ atoms
    power = np.einsum("ij,ij->j", proj, np.conj(proj)).real
    values = 1.0 / np.maximum(power, 1e-30)
    lo = float(values.min())
    padded = np.concatenate([[lo], values, [lo]])
    raw = find_spectrum_peaks(padded, os * max_count)
    out = []
    seen: set = set()
    for i in raw:
        frac = float(qs[i]) - 1.0
        gi = min(max(int(round(frac)), 0), 2 * q_ris - 2)
        if gi not in seen:
            seen.add(gi)
            out.append(frac)
        if len(out) == max_count:
            break
    return np.asarray(out, dtype=float)


def _pair_peaks(peaks_a: np.ndarray, peaks_b: np.ndarray, count: int):
    """Greedy one-to-one pairing by absolute index distance.

    Both inputs arrive strongest first and may be fractional grid
    positions. Candidates are ranked by (distance, summed strength rank,
    position_a, position_b): a true peak repeats at the same fractional
    position across subcarriers, while replicas of two different sources
    meeting near one bin keep a sub-step offset and lose on distance;
    remaining ties go to the stronger pair. Endpoints are consumed as
    pairs are taken.
    """
    cand = sorted((abs(float(a) - float(b)), ra + rb, float(a), float(b))
                  for ra, a in enumerate(peaks_a)
                  for rb, b in enumerate(peaks_b))
    used_a: set = set()
    used_b: set = set()
    pairs = []
    for d, _, a, b in cand:
        if a in used_a or b in used_b:
            continue
        pairs.append((a, b))
        used_a.add(a)
        used_b.add(b)
        if len(pairs) == count:
            break
    return pairs


def ds_music(u_by_sc: Sequence[np.ndarray], etas: Sequence[float],
             n_paths_ue: int, q_ris: int,
             n_sub: Optional[int] = None) -> RisAngleEstimate:
    """Coupled-angle estimation with cross-subcarrier replica rejection.

    u_by_sc: two (N_R, L) residual-factor matrices at the anchor
    subcarriers. Per path: smooth each column, form both pseudo-spectra,
    keep up to 2*J peaks each, pair greedily by distance, and keep the J
    closest pairs; each pair is merged to the half-up rounded mean index.
    """
    if len(u_by_sc) != 2 or len(etas) != 2:
        raise ValueError("exactly two anchor subcarriers are required")
    n_ris, n_paths = u_by_sc[0].shape
    if n_sub is None:
        n_sub = default_n_sub(n_ris)
    n_avg = n_ris - n_sub + 1
    if not n_sub > n_paths_ue:
        raise SubarrayConfigError(
            f"violated n_sub > n_paths_ue: n_sub={n_sub} <= {n_paths_ue}")
    if not n_avg > n_paths_ue:
        raise SubarrayConfigError(
            f"violated n_windows > n_paths_ue: n_windows={n_avg} <= {n_paths_ue}")

    cg = coupled_grid(q_ris)
    indices = np.empty((n_paths, n_paths_ue), dtype=int)
    for l in range(n_paths):
        peak_sets = []
        for u, eta in zip(u_by_sc, etas):
            r_sm = spatial_smooth(u[:, l], n_sub)
            peaks = _peaks_oversampled(r_sm, n_paths_ue, q_ris, float(eta),
                                       2 * n_paths_ue)
            if peaks.shape[0] < n_paths_ue:
                raise InsufficientPeaksError(
                    f"path {l}: {peaks.shape[0]} peaks < {n_paths_ue}", l)
            peak_sets.append(peaks)
        pairs = _pair_peaks(peak_sets[0], peak_sets[1], n_paths_ue)
        merged = sorted(min(max(int(math.floor((a + b) / 2.0 + 0.5)), 0),
                            2 * q_ris - 2) for a, b in pairs)
        indices[l] = merged
    support = np.unique(indices)
    return RisAngleEstimate(support, indices, cg[indices])
