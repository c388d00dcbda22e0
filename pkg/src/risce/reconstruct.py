"""Remaining-subcarrier reconstruction by direct least squares.

Once departure and coupled directions are fixed, every other subcarrier
only needs the small coefficient vector of the reduced dictionary
(conj(A_T) kron A_R), solved per subcarrier from the same pilots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import UnderdeterminedError
from .model import (PathSetBsRis, PathSetRisUe, SystemConfig, coupled_angles,
                    steering_matrix)
from .recovery import PhaseOneResult
from .sounding import PilotSchedule, factor_observation

COND_LIMIT = 1e10


@dataclass(frozen=True)
class ReducedObservation:
    """Observation restricted to the estimated angle pairs."""

    psi_tilde: np.ndarray       # (T*P, L*L*J) reduced sensing matrix
    bs_steering: np.ndarray     # (N_T, L)
    ris_steering: np.ndarray    # (N_R, L*J), per-path blocks of J columns
    cond: float
    rank_deficient: bool


@dataclass(frozen=True)
class ReconstructedCsi:
    """Cascaded channel estimates on every subcarrier."""

    h_hat: np.ndarray           # (M, N_R, N_T)
    ls_calls: int
    max_cond: float


def build_reduced_observation(pilots: PilotSchedule, dods: np.ndarray,
                              coupled: np.ndarray, eta: float, n_tx: int,
                              n_ris: int) -> ReducedObservation:
    """Assemble the per-subcarrier reduced observation.

    coupled is (L, J): column block l of the surface steering holds that
    path's J coupled responses, so the coefficient layout is l_tx outer,
    (l, j) inner.
    """
    n_paths = dods.shape[0]
    n_ue = coupled.shape[1]
    a_t = steering_matrix(dods, eta, n_tx)
    a_r = steering_matrix(coupled.reshape(-1), eta, n_ris)
    fac = factor_observation(pilots, a_t, a_r)
    psi_tilde = fac.materialize()
    n_meas, n_cols = psi_tilde.shape
    if n_meas < n_cols:
        raise UnderdeterminedError(
            f"{n_meas} measurements < {n_cols} unknowns "
            f"(L={n_paths}, J={n_ue})")
    cond = float(np.linalg.cond(psi_tilde))
    return ReducedObservation(psi_tilde, a_t, a_r, cond, cond > COND_LIMIT)


def ls_solve(reduced: ReducedObservation, y: np.ndarray):
    """Least-squares coefficients for one subcarrier.

    Normal equations on the well-conditioned path; pseudo-inverse route
    when the reduced matrix is flagged rank deficient. Returns
    (coefficients, residual norm).
    """
    psi = reduced.psi_tilde
    if reduced.rank_deficient:
        x, _, _, _ = np.linalg.lstsq(psi, y, rcond=None)
    else:
        gram = psi.conj().T @ psi
        rhs = psi.conj().T @ y
        try:
            x = np.linalg.solve(gram, rhs)
        except np.linalg.LinAlgError:
            x, _, _, _ = np.linalg.lstsq(psi, y, rcond=None)
    residual = float(np.linalg.norm(y - psi @ x))
    return x, residual


def _apply_reduced(reduced: ReducedObservation, x: np.ndarray) -> np.ndarray:
    """Channel matrix from reduced coefficients (column-major layout)."""
    n_cols = reduced.bs_steering.shape[1]
    n_rows = reduced.ris_steering.shape[1]
    coeffs = x.reshape(n_rows, n_cols, order="F")
    return reduced.ris_steering @ coeffs @ reduced.bs_steering.conj().T


def reconstruct_all_sc(y: np.ndarray, pilots: PilotSchedule,
                       config: SystemConfig, etas: np.ndarray,
                       phase1: PhaseOneResult, dods: np.ndarray,
                       coupled: np.ndarray) -> ReconstructedCsi:
    """Fill in every non-anchor subcarrier by reduced LS.

    Anchor subcarriers keep their sparse-recovery estimates; the other
    M - 2 are solved with the estimated angles at each subcarrier's eta.
    """
    m_sc = config.n_sc
    h_hat = np.empty((m_sc, config.n_ris, config.n_tx), dtype=complex)
    anchors = dict(zip(phase1.sc_indices, phase1.h_hat))
    ls_calls = 0
    max_cond = 0.0
    for m in range(m_sc):
        if m in anchors:
            h_hat[m] = anchors[m]
            continue
        reduced = build_reduced_observation(
            pilots, dods, coupled, float(etas[m]), config.n_tx, config.n_ris)
        x, _ = ls_solve(reduced, y[m])
        h_hat[m] = _apply_reduced(reduced, x)
        ls_calls += 1
        max_cond = max(max_cond, reduced.cond)
    return ReconstructedCsi(h_hat, ls_calls, max_cond)


def oracle_ls(y: np.ndarray, pilots: PilotSchedule, config: SystemConfig,
              etas: np.ndarray, paths_bs: PathSetBsRis,
              path_ue: PathSetRisUe) -> ReconstructedCsi:
    """Reduced LS on every subcarrier with the true angles.

    Lower bound for the two-phase pipeline: same pilots, perfect angle
    knowledge, no sparse-recovery stage.
    """
    dods = paths_bs.dod
    coupled = coupled_angles(paths_bs, path_ue)
    m_sc = config.n_sc
    h_hat = np.empty((m_sc, config.n_ris, config.n_tx), dtype=complex)
    max_cond = 0.0
    for m in range(m_sc):
        reduced = build_reduced_observation(
            pilots, dods, coupled, float(etas[m]), config.n_tx, config.n_ris)
        x, _ = ls_solve(reduced, y[m])
        h_hat[m] = _apply_reduced(reduced, x)
        max_cond = max(max_cond, reduced.cond)
    return ReconstructedCsi(h_hat, m_sc, max_cond)
