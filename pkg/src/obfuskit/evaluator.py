"""Exact audits of designed mechanisms, epsilon sweeps, and brute-force oracles."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .designer import (
    InfoTriple,
    ObfuscationMechanism,
    PerturbationDirection,
    default_tolerance,
    local_predictions,
    mechanism_from_directions,
    optimal_directions,
)
from .dtm import build_dtm, frobenius_mi
from .errors import OracleScaleExceeded
from .prob_core import JointUSX, compose_markov, mutual_information

ORACLE_TOLS = (1e-6, 1e-9, 1e-12)
ORACLE_MAX_X = 8


def _ratio(err: float, eps: float) -> float:
    if eps == 0:
        return 0.0 if err == 0 else float("inf")
    return err / eps**2


@dataclass(frozen=True)
class AuditResult:
    """Exact and local information measures of one mechanism.

    ``local`` is the direction-norm form ``eps^2/2 sum_z p_Z |B k_z|^2`` and
    ``frobenius`` the matrix form ``(|B|_F^2 - 1)/2`` of the composed joints.
    ``abs_errors`` compare exact against ``local``; ``frobenius_errors``
    compare exact against ``frobenius``.
    """

    epsilon: float
    exact: InfoTriple
    local: InfoTriple
    frobenius: InfoTriple
    abs_errors: InfoTriple
    frobenius_errors: InfoTriple

    @property
    def ratios_to_eps2(self) -> InfoTriple:
        return InfoTriple(*(_ratio(e, self.epsilon) for e in self.abs_errors))

    @property
    def frobenius_ratios_to_eps2(self) -> InfoTriple:
        return InfoTriple(*(_ratio(e, self.epsilon) for e in self.frobenius_errors))


def audit(joint: JointUSX, mech: ObfuscationMechanism) -> AuditResult:
    jxz, juz, jsz = compose_markov(joint, mech.p_Z, mech.P_X_given_Z)
    exact = InfoTriple(*(mutual_information(j) for j in (jxz, juz, jsz)))
    frob = InfoTriple(*(frobenius_mi(build_dtm(j)) for j in (jxz, juz, jsz)))
    if mech.directions:
        local = local_predictions(joint, mech.p_Z, mech.directions, mech.epsilon)
    else:
        local = mech.predicted
    return AuditResult(
        epsilon=mech.epsilon,
        exact=exact,
        local=local,
        frobenius=frob,
        abs_errors=InfoTriple(*(abs(a - b) for a, b in zip(exact, local))),
        frobenius_errors=InfoTriple(*(abs(a - b) for a, b in zip(exact, frob))),
    )


@dataclass(frozen=True)
class SweepRow:
    epsilon: float
    exact: InfoTriple
    local: InfoTriple
    ratios: InfoTriple

    CSV_HEADER = (
        "epsilon,I_XZ_exact,I_XZ_local,I_UZ_exact,I_UZ_local,"
        "I_SZ_exact,I_SZ_local,err_XZ_over_eps2,err_UZ_over_eps2"
    )

    def csv_values(self) -> list[float]:
        e, l, r = self.exact, self.local, self.ratios
        return [self.epsilon, e.I_XZ, l.I_XZ, e.I_UZ, l.I_UZ, e.I_SZ, l.I_SZ, r.I_XZ, r.I_UZ]


def sweep_row(
    joint: JointUSX,
    chosen: Sequence[tuple[PerturbationDirection, float]],
    epsilon: float,
    tol: float | None = None,
) -> SweepRow:
    tol = default_tolerance() if tol is None else tol
    mech = mechanism_from_directions(joint, chosen, epsilon, tol)
    res = audit(joint, mech)
    return SweepRow(float(epsilon), res.exact, res.local, res.ratios_to_eps2)


def epsilon_sweep(
    joint: JointUSX, m: int, eps_grid: Iterable[float], tol: float | None = None
) -> list[SweepRow]:
    """Audit the same directions at every ``epsilon`` of the grid (largest first).

    Raises :class:`~obfuskit.errors.EpsilonTooLarge` if any grid point is
    outside the feasible range.
    """
    grid = sorted({float(e) for e in eps_grid}, reverse=True)
    if not grid:
        return []
    chosen = optimal_directions(joint, m, tol)
    return [sweep_row(joint, chosen, e, tol) for e in grid]


# --- oracles -----------------------------------------------------------------


def brute_force_mi(matrix: np.ndarray) -> float:
    """Double sum of p(x,z) log(p(x,z) / (p(x) p(z))) over the support."""
    P = np.asarray(matrix, dtype=float)
    px, pz = P.sum(axis=1), P.sum(axis=0)
    total = 0.0
    for x in range(P.shape[0]):
        for z in range(P.shape[1]):
            if P[x, z] > 0:
                total += P[x, z] * np.log(P[x, z] / (px[x] * pz[z]))
    return total


def enumerate_release(joint: JointUSX, P_Z_given_X: np.ndarray) -> np.ndarray:
    """Full joint p(u, s, x, z) = p(u, s, x) P(z | x) by explicit enumeration."""
    t = joint.tensor
    nu, ns, nx = t.shape
    nz = P_Z_given_X.shape[0]
    out = np.zeros((nu, ns, nx, nz))
    for u in range(nu):
        for s in range(ns):
            for x in range(nx):
                for z in range(nz):
                    out[u, s, x, z] = t[u, s, x] * P_Z_given_X[z, x]
    return out


@dataclass(frozen=True)
class OracleVerdict:
    feasible: bool
    tolerance_sensitive: bool
    verdicts: tuple[bool, ...]

    def __bool__(self) -> bool:
        return self.feasible


def brute_force_feasibility(joint: JointUSX, tolerances: Sequence[float] = ORACLE_TOLS) -> OracleVerdict:
    """Rank test on the raw kernels, independent of the DTM machinery.

    A direction ``k`` with ``W_S diag(sqrt p_X) k = 0`` and
    ``W_U diag(sqrt p_X) k != 0`` exists iff stacking the two matrices
    raises the rank above that of the sensitive block alone.  The verdict
    is the majority over ``tolerances``; disagreement flags the instance.
    """
    nx = joint.p_X.alphabet_size
    if nx > ORACLE_MAX_X:
        raise OracleScaleExceeded(f"|X| = {nx} exceeds the oracle limit {ORACLE_MAX_X}")
    D = np.diag(np.sqrt(joint.p_X.values))
    A_s = joint.W_S.matrix @ D
    A_u = joint.W_U.matrix @ D
    stacked = np.vstack([A_s, A_u])
    verdicts = []
    for t in tolerances:
        r_s = np.linalg.matrix_rank(A_s, tol=t * np.linalg.norm(A_s, 2))
        r_all = np.linalg.matrix_rank(stacked, tol=t * np.linalg.norm(stacked, 2))
        verdicts.append(bool(r_all > r_s))
    yes = sum(verdicts)
    return OracleVerdict(yes * 2 > len(verdicts), 0 < yes < len(verdicts), tuple(verdicts))


def columns_dependent(W: np.ndarray, tol: float = 1e-9) -> bool:
    """Weak-independence test: are the columns of ``W`` linearly dependent?"""
    W = np.asarray(W, dtype=float)
    return int(np.linalg.matrix_rank(W, tol=tol * np.linalg.norm(W, 2))) < W.shape[1]
