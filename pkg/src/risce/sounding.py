"""Downlink sounding: pilot generation, measurement, observation assembly.

Each subframe fixes one surface reflection pattern; each slot inside it
sends one hybrid beam. Stacking all slots gives a linear observation of
the vectorized cascaded channel. The observation matrix factors per
subframe into (small matrix) kron (row vector); the factored form is the
production path, the dense form is kept for verification.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import SystemConfig, ChannelRealization


@dataclass(frozen=True)
class PilotSchedule:
    """All training-phase transmit/reflect choices for one experiment."""

    analog_bf: np.ndarray     # (N_T, N_RF), unit-modulus entries / sqrt(N_T)
    baseband_bf: np.ndarray   # (T, P, N_RF), frequency-flat within a slot
    pilot_symbols: np.ndarray  # (T, P), all-ones reference symbols
    ris_phases: np.ndarray    # (T, N_R), unit-modulus reflection patterns
    processed: np.ndarray     # (T, N_T, P) hybrid beams scaled by the symbol


@dataclass
class ObservationSet:
    """Dense linear observation of one vectorized cascaded channel."""

    psi: np.ndarray                     # (T*P, n_cols) sensing matrix
    r_bar: np.ndarray                   # (T*P, N_T*N_R) stacked pilot operator
    noise_var: Optional[float] = None   # per-complex-sample noise variance
    measurements: Optional[np.ndarray] = None


@dataclass(frozen=True)
class FactoredObservation:
    """Per-subframe Kronecker factors of the sensing matrix.

    Row block t equals left[t] kron right[t]; column i*n_right + j is
    left[:, :, i] * right[:, j]. Matvec cost is linear in the factors
    instead of quadratic in the dense matrix.
    """

    left: np.ndarray    # (T, P, n_left)
    right: np.ndarray   # (T, n_right)

    @property
    def shape(self):
        t, p, n_l = self.left.shape
        return (t * p, n_l * self.right.shape[1])

    def matvec(self, x: np.ndarray) -> np.ndarray:
        n_r = self.right.shape[1]
        n_l = self.left.shape[2]
        mat = x.reshape(n_r, n_l, order="F")
        inner = self.right @ mat                      # (T, n_left)
        return np.einsum("tpi,ti->tp", self.left, inner).reshape(-1)

    def rmatvec(self, s: np.ndarray) -> np.ndarray:
        t, p, _ = self.left.shape
        s_t = s.reshape(t, p)
        w = np.einsum("tpi,tp->ti", np.conj(self.left), s_t)
        return (w.T @ np.conj(self.right)).ravel()    # (n_left, n_right) C-order

    def colnorms_sq(self) -> np.ndarray:
        ln = np.einsum("tpi,tpi->ti", self.left, np.conj(self.left)).real
        rn = (self.right * np.conj(self.right)).real
        return (ln.T @ rn).ravel()

    def frob_sq(self) -> float:
        return float(self.colnorms_sq().sum())

    def column(self, c: int) -> np.ndarray:
        n_r = self.right.shape[1]
        i, j = divmod(c, n_r)
        return (self.left[:, :, i] * self.right[:, j][:, None]).reshape(-1)

    def materialize(self) -> np.ndarray:
        t, p, n_l = self.left.shape
        n_r = self.right.shape[1]
        full = np.einsum("tpi,tj->tpij", self.left, self.right)
        return full.reshape(t * p, n_l * n_r)


def generate_pilots(config: SystemConfig, rng: np.random.Generator,
                    analog_bf: Optional[np.ndarray] = None) -> PilotSchedule:
    """Draw one full pilot schedule.

    Analog network: i.i.d. uniform phases with constant modulus
    1/sqrt(N_T) (drawn here unless one is supplied for reuse across
    trials). Baseband beams: standard complex normal, hybrid product
    normalized to unit norm. Surface patterns: i.i.d. unit-modulus
    phases. Pilot symbols are 1.
    """
    n_t, n_rf = config.n_tx, config.n_rf
    t_sf, p_sl = config.n_subframes, config.n_slots
    if analog_bf is None:
        analog_bf = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, (n_t, n_rf)))
        analog_bf = analog_bf / math.sqrt(n_t)
    baseband = (rng.standard_normal((t_sf, p_sl, n_rf))
                + 1j * rng.standard_normal((t_sf, p_sl, n_rf))) / math.sqrt(2.0)
    ris = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, (t_sf, config.n_ris)))
    symbols = np.ones((t_sf, p_sl))

    hybrid = np.einsum("nr,tpr->tnp", analog_bf, baseband)
    norms = np.linalg.norm(hybrid, axis=1, keepdims=True)
    hybrid = hybrid / norms
    processed = hybrid * symbols[:, None, :]
    return PilotSchedule(analog_bf, baseband, symbols, ris, processed)


def pilot_operator(pilots: PilotSchedule) -> np.ndarray:
    """Stacked dense operator acting on vec(H_cas): (T*P, N_T*N_R).

    Row block t is (R_t^T kron theta_t), matching column-major
    vectorization of the N_R x N_T cascaded matrix.
    """
    t_sf, n_t, p_sl = pilots.processed.shape
    n_r = pilots.ris_phases.shape[1]
    blocks = np.einsum("tnp,tr->tpnr", pilots.processed, pilots.ris_phases)
    return blocks.reshape(t_sf * p_sl, n_t * n_r)


def assemble_observation(pilots: PilotSchedule, total_matrix: np.ndarray) -> ObservationSet:
    """Dense observation: psi = stacked pilot operator @ total dictionary."""
    r_bar = pilot_operator(pilots)
    if total_matrix.shape[0] != r_bar.shape[1]:
        raise ValueError("dictionary row count does not match pilot operator")
    return ObservationSet(psi=r_bar @ total_matrix, r_bar=r_bar)


def factor_observation(pilots: PilotSchedule, bs_matrix: np.ndarray,
                       ris_matrix: np.ndarray) -> FactoredObservation:
    """Factored observation for a (conj(bs) kron ris) dictionary.

    left[t] = R_t^T conj(C_T); right[t] = theta_t Xi. Equals the dense
    route by the Kronecker mixed-product identity.
    """
    left = np.einsum("tnp,nq->tpq", pilots.processed, np.conj(bs_matrix))
    right = pilots.ris_phases @ ris_matrix
    return FactoredObservation(left, right)


def compress_pilots(pilots: PilotSchedule, tol_rel: float = 1e-12):
    """Receiver-side projection of each subframe onto its beam span.

    The slots of one subframe share a single analog network, so the
    stacked hybrid beams have rank at most the RF-chain count. Projecting
    the slot dimension onto that span (per-subframe SVD basis) keeps an
    exact sufficient statistic: the clean measurement lies in the span,
    the projected noise stays white with the same variance, and inner
    products against the observation matrix are unchanged. Returns
    (compressed schedule, transforms) where transforms is (T, P, r_max)
    with orthonormal columns, zero-padded past each subframe's rank; feed
    the transforms to compress_measurements.
    """
    t_sf, n_t, p_sl = pilots.processed.shape
    u_list, proc_list, ranks = [], [], []
    for t in range(t_sf):
        u, s, vh = np.linalg.svd(pilots.processed[t].T, full_matrices=False)
        r = int(np.sum(s > s[0] * tol_rel)) if s.size and s[0] > 0 else 0
        r = max(r, 1)
        u_list.append(u[:, :r])
        proc_list.append(vh[:r].T * s[:r][None, :])
        ranks.append(r)
    r_max = max(ranks)
    transforms = np.zeros((t_sf, p_sl, r_max), dtype=complex)
    processed = np.zeros((t_sf, n_t, r_max), dtype=complex)
    for t in range(t_sf):
        transforms[t, :, :ranks[t]] = u_list[t]
        processed[t, :, :ranks[t]] = proc_list[t]
    symbols = np.ones((t_sf, r_max))
    compressed = PilotSchedule(pilots.analog_bf, pilots.baseband_bf,
                               symbols, pilots.ris_phases, processed)
    return compressed, transforms


def compress_measurements(y: np.ndarray, transforms: np.ndarray) -> np.ndarray:
    """Apply the per-subframe projections to stacked measurements.

    y: (..., T*P) as produced by measure; returns (..., T*r_max) aligned
    with the compressed schedule from compress_pilots.
    """
    t_sf, p_sl, r_max = transforms.shape
    blocks = y.reshape(y.shape[:-1] + (t_sf, p_sl))
    out = np.einsum("tpr,...tp->...tr", np.conj(transforms), blocks)
    return out.reshape(y.shape[:-1] + (t_sf * r_max,))


def measure(channel: ChannelRealization, pilots: PilotSchedule, snr_db: float,
            rng: np.random.Generator):
    """Sound every user on every subcarrier through the exact channel.

    Returns (y, noise_var) with y of shape (K, M, T*P) and per-(user,
    subcarrier) complex noise variance calibrated on the realized
    noiseless vector so the requested receive SNR holds exactly in
    ratio. snr_db = inf disables noise.
    """
    k_users, m_sc = channel.cascaded.shape[0], channel.cascaded.shape[1]
    t_sf, _, p_sl = pilots.processed.shape
    n_meas = t_sf * p_sl
    y = np.empty((k_users, m_sc, n_meas), dtype=complex)
    noise_var = np.zeros((k_users, m_sc))
    for k in range(k_users):
        v = np.einsum("tn,mno->mto", pilots.ris_phases, channel.cascaded[k])
        clean = np.einsum("mto,top->mtp", v, pilots.processed).reshape(m_sc, n_meas)
        if math.isinf(snr_db):
            y[k] = clean
            continue
        power = np.mean(np.abs(clean) ** 2, axis=1)
        var = power / (10.0 ** (snr_db / 10.0))
        noise = (rng.standard_normal((m_sc, n_meas))
                 + 1j * rng.standard_normal((m_sc, n_meas)))
        y[k] = clean + np.sqrt(var / 2.0)[:, None] * noise
        noise_var[k] = var
    return y, noise_var


def realify(v: np.ndarray) -> np.ndarray:
    """Stack real over imaginary parts: C^n -> R^(2n). Norm preserving."""
    return np.concatenate([v.real, v.imag])


def complexify(v: np.ndarray) -> np.ndarray:
    """Inverse of realify."""
    n = v.shape[0] // 2
    return v[:n] + 1j * v[n:]


def realify_matrix(a: np.ndarray) -> np.ndarray:
    """Real block form [[Re, -Im], [Im, Re]] so realify commutes with matvec."""
    return np.block([[a.real, -a.imag], [a.imag, a.real]])
