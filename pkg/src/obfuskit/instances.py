"""Reference and random (U, S, X) instances."""

from __future__ import annotations

import numpy as np

from .prob_core import JointUSX


def independent_bits() -> JointUSX:
    """S, N iid uniform bits, X = (S, N) with x = 2 s + n, U = N."""
    t = np.zeros((2, 2, 4))
    for s in range(2):
        for n in range(2):
            t[n, s, 2 * s + n] = 0.25
    return JointUSX(t)


def secret_is_data(p_X, n_U: int = 2, rng=None) -> JointUSX:
    """S = X, with U drawn from an arbitrary kernel of X."""
    px = np.asarray(p_X, dtype=float)
    nx = px.size
    rng = np.random.default_rng(0) if rng is None else rng
    W_U = rng.dirichlet(np.ones(n_U), size=nx).T
    t = np.zeros((n_U, nx, nx))
    for x in range(nx):
        t[:, x, x] = W_U[:, x] * px[x]
    return JointUSX(t)


def utility_is_secret(p_SX: np.ndarray) -> JointUSX:
    """U = S for a given joint p(S, X)."""
    p_SX = np.asarray(p_SX, dtype=float)
    ns, nx = p_SX.shape
    t = np.zeros((ns, ns, nx))
    for s in range(ns):
        t[s, s] = p_SX[s]
    return JointUSX(t)


def utility_is_data(p_SX: np.ndarray) -> JointUSX:
    """U = X for a given joint p(S, X): the weak-independence special case."""
    p_SX = np.asarray(p_SX, dtype=float)
    ns, nx = p_SX.shape
    t = np.zeros((nx, ns, nx))
    for x in range(nx):
        t[x, :, x] = p_SX[:, x]
    return JointUSX(t)


def random_joint(rng: np.random.Generator, n_U: int, n_S: int, n_X: int) -> JointUSX:
    """Dirichlet(1) tensor over the full (U, S, X) alphabet, with interior p_X."""
    while True:
        t = rng.dirichlet(np.ones(n_U * n_S * n_X)).reshape(n_U, n_S, n_X)
        if np.all(t.sum(axis=(0, 1)) > 0):
            return JointUSX(t / t.sum())


def random_sizes(rng: np.random.Generator, max_us: int = 3, max_x: int = 5) -> tuple[int, int, int]:
    return (
        int(rng.integers(1, max_us + 1)),
        int(rng.integers(1, max_us + 1)),
        int(rng.integers(2, max_x + 1)),
    )
