"""Divergence transfer matrices and their modal decomposition.

For a joint ``P`` with marginals ``p_row`` and ``p_col`` the divergence
transfer matrix is ``B = diag(sqrt(p_row))^-1 P diag(sqrt(p_col))^-1``.
Its top singular triple is always ``(1, sqrt(p_row), sqrt(p_col))``; the
remaining triples carry the statistical dependence.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike

from .errors import DegenerateMarginal, DimensionMismatch, InconsistentMarginals
from .local_geometry import DirectionLike, _direction_vector
from .prob_core import FILE_TOL, JointXZ, Kernel, Pmf, PmfLike, as_pmf

ZERO_SIGMA_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class DivergenceTransferMatrix:
    """``B`` together with the (pruned) marginals it was built from.

    ``row_index``/``col_index`` give the original symbols kept after
    dropping zero-probability rows or columns.
    """

    B: np.ndarray
    p_row: Pmf
    p_col: Pmf
    row_index: np.ndarray
    col_index: np.ndarray
    row_size: int
    col_size: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.B.shape

    @property
    def dropped_rows(self) -> list[int]:
        return sorted(set(range(self.row_size)) - set(self.row_index.tolist()))

    @property
    def dropped_cols(self) -> list[int]:
        return sorted(set(range(self.col_size)) - set(self.col_index.tolist()))

    @cached_property
    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.B, compute_uv=False)

    @cached_property
    def modes(self) -> "ModalDecomposition":
        return svd_modes(self)

    def joint(self) -> np.ndarray:
        """Joint pmf on the kept alphabet, ``B * sqrt(p_row) sqrt(p_col)^T``."""
        return self.B * np.outer(np.sqrt(self.p_row.values), np.sqrt(self.p_col.values))


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _prune(m: np.ndarray, p: np.ndarray, axis: int) -> np.ndarray:
    keep = np.flatnonzero(p > 0)
    dead = np.flatnonzero(p <= 0)
    if dead.size:
        mass = np.abs(np.take(m, dead, axis=axis)).sum()
        if mass > 0:
            raise DegenerateMarginal("zero marginal entry carries joint mass")
    return keep


def build_dtm(joint: JointXZ) -> DivergenceTransferMatrix:
    pr, pc = joint.p_X.values, joint.p_Z.values
    rows = _prune(joint.matrix, pr, 0)
    cols = _prune(joint.matrix, pc, 1)
    P = joint.matrix[np.ix_(rows, cols)]
    sr, sc = np.sqrt(pr[rows]), np.sqrt(pc[cols])
    B = P / sr[:, None] / sc[None, :]
    return DivergenceTransferMatrix(
        _frozen(B), Pmf(_frozen(pr[rows])), Pmf(_frozen(pc[cols])), rows, cols, pr.size, pc.size
    )


def build_channel_dtm(kernel: Kernel | ArrayLike, p_input: PmfLike, p_output: PmfLike) -> DivergenceTransferMatrix:
    """DTM of a channel: ``diag(sqrt(p_out))^-1 W diag(sqrt(p_in))``.

    Used for ``B_{U,X}`` and ``B_{S,X}`` with ``W = P(U|X)`` or ``P(S|X)``.
    Output symbols of zero probability are dropped.
    """
    W = kernel.matrix if isinstance(kernel, Kernel) else Kernel(kernel).matrix
    pin, pout = as_pmf(p_input).values, as_pmf(p_output).values
    if W.shape != (pout.size, pin.size):
        raise DimensionMismatch(f"kernel shape {W.shape} vs marginals {(pout.size, pin.size)}")
    dev = np.abs(W @ pin - pout).max()
    if dev > FILE_TOL:
        raise InconsistentMarginals(f"W p_in misses p_out by {dev:.3g}")
    rows = _prune(W * pin[None, :], pout, 0)
    B = W[rows] * np.sqrt(pin)[None, :] / np.sqrt(pout[rows])[:, None]
    return DivergenceTransferMatrix(
        _frozen(B), Pmf(_frozen(pout[rows])), Pmf(_frozen(pin)), rows, np.arange(pin.size), pout.size, pin.size
    )


@dataclass(frozen=True, eq=False)
class ModalDecomposition:
    """Singular triples of a DTM plus the feature functions they induce.

    ``left``/``right`` hold the singular vectors as columns, the first being
    ``sqrt(p_row)``/``sqrt(p_col)``.  ``f_star``/``g_star`` hold the features
    for modes 2..K as columns.  ``blocks`` lists index groups of (numerically)
    repeated singular values among modes 2..K; only their span is unique.
    """

    sigmas: np.ndarray
    left: np.ndarray
    right: np.ndarray
    p_row: Pmf
    p_col: Pmf
    blocks: tuple[tuple[int, ...], ...] = field(default=())

    @property
    def K(self) -> int:
        return self.sigmas.size

    @property
    def f_star(self) -> np.ndarray:
        return self.left[:, 1:] / np.sqrt(self.p_row.values)[:, None]

    @property
    def g_star(self) -> np.ndarray:
        return self.right[:, 1:] / np.sqrt(self.p_col.values)[:, None]

    def reconstruct_joint(self) -> np.ndarray:
        pr, pc = self.p_row.values, self.p_col.values
        dep = self.f_star @ np.diag(self.sigmas[1:]) @ self.g_star.T
        return np.outer(pr, pc) * (1.0 + dep)

    def rank(self, rtol: float = ZERO_SIGMA_RTOL) -> int:
        return int(np.sum(self.sigmas > rtol * self.sigmas[0]))


def _complement_basis(v: np.ndarray) -> np.ndarray:
    """Orthonormal basis (columns) of the complement of unit vector ``v``.

    Columns 2..n of the Householder reflector sending ``v`` to ``e_1``.
    """
    n = v.size
    w = v.copy()
    w[0] += 1.0 if v[0] >= 0 else -1.0
    H = np.eye(n) - 2.0 * np.outer(w, w) / (w @ w)
    return H[:, 1:]


def _fix_signs(left: np.ndarray, right: np.ndarray) -> None:
    for i in range(left.shape[1]):
        col = left[:, i]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size and col[nz[0]] < 0:
            left[:, i] *= -1
            right[:, i] *= -1


def _degenerate_blocks(s: np.ndarray, scale: float) -> tuple[tuple[int, ...], ...]:
    blocks, cur = [], [1] if s.size > 1 else []
    for i in range(2, s.size):
        if abs(s[i] - s[i - 1]) <= ZERO_SIGMA_RTOL * scale:
            cur.append(i)
        else:
            if len(cur) > 1:
                blocks.append(tuple(cur))
            cur = [i]
    if len(cur) > 1:
        blocks.append(tuple(cur))
    return tuple(blocks)


def svd_modes(dtm: DivergenceTransferMatrix) -> ModalDecomposition:
    """Sign-fixed SVD of a DTM.

    The leading pair is pinned to ``sqrt(p_row)``, ``sqrt(p_col)``; the
    remaining ``K - 1`` pairs come from the SVD of ``B`` restricted to the
    orthogonal complements of those vectors, so they stay orthogonal to the
    leading pair even when the top singular value is repeated.  Modes 2..K
    are signed so the first non-negligible entry of the left vector is
    positive.
    """
    B = dtm.B
    nr, nc = B.shape
    K = min(nr, nc)
    sr, sc = np.sqrt(dtm.p_row.values), np.sqrt(dtm.p_col.values)
    sigma1 = float(dtm.singular_values[0])
    if K == 1:
        left, right = sr[:, None].copy(), sc[:, None].copy()
        sig = np.array([sigma1])
    else:
        Qr, Qc = _complement_basis(sr), _complement_basis(sc)
        U, s, Vt = np.linalg.svd(Qr.T @ B @ Qc, full_matrices=False)
        lv, rv = Qr @ U, Qc @ Vt.T
        _fix_signs(lv, rv)
        left = np.column_stack([sr, lv])
        right = np.column_stack([sc, rv])
        sig = np.concatenate([[sigma1], s])
    for a in (sig, left, right):
        a.setflags(write=False)
    return ModalDecomposition(sig, left, right, dtm.p_row, dtm.p_col, _degenerate_blocks(sig, sigma1))


def frobenius_mi(dtm: DivergenceTransferMatrix) -> float:
    """Local mutual information ``(|B|_F^2 - 1) / 2``.

    Evaluated as ``|B - sqrt(p_row) sqrt(p_col)^T|_F^2 / 2``, the same
    quantity without the cancellation against the unit leading mode.
    """
    D = dtm.B - np.outer(np.sqrt(dtm.p_row.values), np.sqrt(dtm.p_col.values))
    return 0.5 * float(np.sum(D * D))


def pushforward_direction(dtm: DivergenceTransferMatrix, k: DirectionLike) -> np.ndarray:
    kv = _direction_vector(k)
    if kv.shape != (dtm.B.shape[1],):
        raise DimensionMismatch(f"direction of length {kv.size} for a DTM of shape {dtm.B.shape}")
    return dtm.B @ kv


def induced_feature(dtm: DivergenceTransferMatrix, f: ArrayLike) -> np.ndarray:
    """Feature on the column alphabet induced by ``f`` through ``E[f(row) | col]``."""
    fv = np.asarray(f, dtype=float)
    if fv.shape != (dtm.B.shape[0],):
        raise DimensionMismatch(f"feature of length {fv.size} for a DTM with {dtm.B.shape[0]} rows")
    pc = dtm.p_col.values
    if not np.all(pc > 0):
        raise DegenerateMarginal("column marginal must be strictly positive")
    xi_row = fv * np.sqrt(dtm.p_row.values)
    return (dtm.B.T @ xi_row) / np.sqrt(pc)
