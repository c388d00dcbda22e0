"""Sparsifying dictionaries on direction-sine grids.

The surface side uses a coupled-angle dictionary: products of a conjugated
and a plain response collapse to single responses at difference angles, so
the q_ris^2 column pairs reduce to 2*q_ris - 1 distinct columns. Builders
are cached per (size, eta) and the returned arrays are read-only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .model import arv, steering_matrix


@dataclass(frozen=True)
class GridSpec:
    """Uniform direction-sine grid with half-step edge offsets."""

    size: int
    step: float             # spacing between adjacent samples
    samples: np.ndarray     # (size,) sines -1 + (2q - 1)/size, q = 1..size


@dataclass(frozen=True)
class CbsDictionary:
    """Coupled-angle surface dictionary at one relative frequency."""

    matrix: np.ndarray      # (n_ris, 2*q_ris - 1) unit-norm columns
    grid: np.ndarray        # (2*q_ris - 1,) coupled sines 2(q - q_ris)/q_ris
    eta: float


@dataclass(frozen=True)
class MergeMap:
    """Partition of full coupled columns onto distinct coupled columns."""

    groups: tuple           # entry i: 0-based full-dictionary column indices
    sizes: np.ndarray       # (2*q_ris - 1,) group cardinalities


@dataclass(frozen=True)
class TotalDictionary:
    """Kronecker dictionary for the vectorized cascaded channel."""

    matrix: np.ndarray      # (n_tx*n_ris, q_tx*(2*q_ris - 1))
    bs_grid: np.ndarray     # (q_tx,) transmit-side sines
    coupled_grid: np.ndarray
    eta: float


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@lru_cache(maxsize=64)
def grid(q: int) -> GridSpec:
    """Standard dictionary grid on [-1 + 1/q, 1 - 1/q]."""
    if q < 1:
        raise ValueError("grid size must be >= 1")
    qs = np.arange(1, q + 1, dtype=float)
    return GridSpec(q, 2.0 / q, _readonly(-1.0 + (2.0 * qs - 1.0) / q))


def coupled_grid(q_ris: int) -> np.ndarray:
    """Coupled-angle grid 2(q - q_ris)/q_ris, q = 1..2*q_ris - 1."""
    qs = np.arange(1, 2 * q_ris, dtype=float)
    return _readonly(2.0 * (qs - q_ris) / q_ris)


@lru_cache(maxsize=256)
def bs_dictionary(q_tx: int, eta: float, n_tx: int) -> np.ndarray:
    """Transmit-side dictionary: responses on the standard grid, (n_tx, q_tx)."""
    return _readonly(steering_matrix(grid(q_tx).samples, eta, n_tx))


def full_coupled_dictionary(q_ris: int, eta: float, n_ris: int) -> np.ndarray:
    """All pairwise conjugate products, (n_ris, q_ris**2).

    Column q2*q_ris + q1 (0-based) equals the unit-norm response at the
    difference angle step*(q1 - q2). Quadratic in q_ris; intended for
    verification at small sizes.
    """
    step = 2.0 / q_ris
    q1, q2 = np.meshgrid(np.arange(q_ris), np.arange(q_ris), indexing="xy")
    diffs = step * (q1 - q2).reshape(-1)  # index j = q2*q_ris + q1
    return _readonly(steering_matrix(diffs, eta, n_ris))


@lru_cache(maxsize=256)
def cbs_dictionary(q_ris: int, eta: float, n_ris: int) -> CbsDictionary:
    """Distinct coupled columns only, (n_ris, 2*q_ris - 1)."""
    g = coupled_grid(q_ris)
    return CbsDictionary(_readonly(steering_matrix(g, eta, n_ris)), g, eta)


@lru_cache(maxsize=32)
def _pair_dictionary(q_ris: int, eta: float, n_ris: int):
    """Uncollapsed pair dictionary plus its per-column difference angles."""
    step = 2.0 / q_ris
    q1, q2 = np.meshgrid(np.arange(q_ris), np.arange(q_ris), indexing="xy")
    diffs = step * (q1 - q2).reshape(-1)
    return (_readonly(steering_matrix(diffs, eta, n_ris)), _readonly(diffs))


@lru_cache(maxsize=64)
def merge_map(q_ris: int) -> MergeMap:
    """Group full coupled columns by difference angle.

    Group i collects 0-based columns q2*q_ris + q1 with
    q1 - q2 = i - (q_ris - 1); cardinality q_ris - |i - (q_ris - 1)|.
    """
    groups = []
    for i in range(2 * q_ris - 1):
        d = i - (q_ris - 1)
        q1 = np.arange(max(d, 0), q_ris + min(d, 0))
        q2 = q1 - d
        groups.append(_readonly(q2 * q_ris + q1))
    sizes = np.array([len(g) for g in groups])
    return MergeMap(tuple(groups), _readonly(sizes))


def ris_dictionary(variant: str, q_ris: int, eta: float, n_ris: int):
    """Surface-side dictionary for one solver variant.

    cbs: coupled grid at the subcarrier's eta. conventional: coupled grid
    frozen at eta = 1. bsa: frequency-scaled responses at every pairwise
    difference of two standard (non-coupled) grids, q_ris^2 columns, so
    difference angles beyond the standard span stay representable without
    the collapse onto distinct coupled columns. Returns
    (matrix, grid_sines, atom_eta).
    """
    if variant == "cbs":
        d = cbs_dictionary(q_ris, eta, n_ris)
        return d.matrix, d.grid, eta
    if variant == "conventional":
        d = cbs_dictionary(q_ris, 1.0, n_ris)
        return d.matrix, d.grid, 1.0
    if variant == "bsa":
        mat, diffs = _pair_dictionary(q_ris, eta, n_ris)
        return mat, diffs, eta
    raise ValueError(f"unknown dictionary variant '{variant}'")


def bs_dictionary_for(variant: str, q_tx: int, eta: float, n_tx: int) -> np.ndarray:
    """Transmit-side dictionary matching a solver variant's eta rule."""
    if variant == "conventional":
        return bs_dictionary(q_tx, 1.0, n_tx)
    if variant in ("cbs", "bsa"):
        return bs_dictionary(q_tx, eta, n_tx)
    raise ValueError(f"unknown dictionary variant '{variant}'")


def total_dictionary(q_tx: int, q_ris: int, eta: float, n_tx: int,
                     n_ris: int, variant: str = "cbs") -> TotalDictionary:
    """Kronecker product of the conjugated transmit and surface dictionaries.

    Acts on column-major vectorized coefficient matrices:
    vec(Xi @ X @ C_T^H) = (conj(C_T) kron Xi) @ vec(X). Dense; quadratic
    memory, so production paths use the per-subframe factored form instead.
    """
    c_t = bs_dictionary_for(variant, q_tx, eta, n_tx)
    xi, g, _ = ris_dictionary(variant, q_ris, eta, n_ris)
    return TotalDictionary(_readonly(np.kron(np.conj(c_t), xi)),
                           grid(q_tx).samples, g, eta)
