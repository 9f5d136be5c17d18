"""Ground energies, groundstates and groundspace structure at desk scale."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import CapacityError, ConvergenceError, StoqwalkError
from .instance import DENSE_CAP, Hamiltonian, hamiltonian_matrix

POWER_CAP = 20
ZERO_TOL = 1e-9


@dataclass
class Spectrum:
    ground_energy: float
    groundstate: np.ndarray
    gap: float
    method: str
    residual: float = 0.0
    iterations: int = 0

    def summary(self) -> dict:
        return {"ground_energy": self.ground_energy, "gap": self.gap,
                "method": self.method, "residual": self.residual}


def apply_hamiltonian(h: Hamiltonian, v: np.ndarray) -> np.ndarray:
    """Matrix-free ``H v`` using the local term matrices."""
    n = h.n
    v = np.asarray(v)
    out = np.zeros_like(v)
    tensor = v.reshape((2,) * n)
    for t, mat in zip(h.terms, h.term_matrices):
        k = t.k
        front = np.moveaxis(tensor, t.qubits, range(k)).reshape(2 ** k, -1)
        res = (mat @ front).reshape((2,) * n)
        out += np.moveaxis(res, range(k), t.qubits).reshape(-1)
    return out / h.m


def frustration(h: Hamiltonian, psi: np.ndarray) -> float:
    psi = np.asarray(psi)
    if psi.shape != (2 ** h.n,):
        raise ValueError(f"state has shape {psi.shape}, expected ({2 ** h.n},)")
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"state is not normalized (norm {norm})")
    return float(np.real(np.vdot(psi, apply_hamiltonian(h, psi))))


def _nonneg(v: np.ndarray) -> np.ndarray:
    v = np.real(v)
    if v.sum() < 0:
        v = -v
    v = np.where(v < 0, 0.0, v)
    return v / np.linalg.norm(v)


def ground_energy(h: Hamiltonian, method: str = "dense", tol: float = 1e-10,
                  max_iter: int = 200_000, zero_tol: float = ZERO_TOL) -> Spectrum:
    if method == "dense":
        return _dense(h, zero_tol)
    if method == "power":
        return _power(h, tol, max_iter)
    raise ValueError(f"unknown method {method!r}")


def _dense(h, zero_tol):
    if h.n > DENSE_CAP:
        raise CapacityError(f"n={h.n} above dense cap {DENSE_CAP}")
    evals, evecs = np.linalg.eigh(hamiltonian_matrix(h))
    e0 = evals[0]
    ground = evecs[:, evals <= e0 + zero_tol]
    # projecting the all-ones vector onto the groundspace gives a non-negative groundstate
    psi = ground @ (ground.T @ np.ones(2 ** h.n))
    if np.linalg.norm(psi) < 1e-8:
        psi = ground[:, 0]
    psi = _nonneg(psi)
    energy = max(float(e0), 0.0) if e0 > -zero_tol else float(e0)
    return Spectrum(energy, psi, float(evals[1] - evals[0]), "dense")


def _power(h, tol, max_iter):
    """Power iteration on the entrywise non-negative operator ``I - H``."""
    if h.n > POWER_CAP:
        raise CapacityError(f"n={h.n} above power-iteration cap {POWER_CAP}")
    dim = 2 ** h.n

    def op(v):
        return v - apply_hamiltonian(h, v)

    v = np.ones(dim) / np.sqrt(dim)
    mu, residual = 0.0, np.inf
    for it in range(1, max_iter + 1):
        w = op(v)
        mu = float(v @ w)
        residual = float(np.linalg.norm(w - mu * v))
        if residual < tol:
            break
        v = w / np.linalg.norm(w)
    else:
        raise ConvergenceError("power iteration did not converge", residual, max_iter)
    v = _nonneg(v)

    # second eigenvalue by deflation; reported as an estimate if it stalls
    rng = np.random.default_rng(0)
    u = rng.standard_normal(dim)
    u -= (v @ u) * v
    u /= np.linalg.norm(u)
    mu2 = 0.0
    for _ in range(max_iter):
        w = op(u)
        w -= (v @ w) * v
        mu2 = float(u @ w)
        if np.linalg.norm(w - mu2 * u) < np.sqrt(tol):
            break
        norm = np.linalg.norm(w)
        if norm == 0:
            break
        u = w / norm
    energy = max(1.0 - mu, 0.0)
    return Spectrum(energy, v, max(mu - mu2, 0.0), "power", residual, it)


class DecompositionError(StoqwalkError):
    def __init__(self, message, pair=None):
        self.pair = pair
        super().__init__(message)


def groundspace_decomposition(h: Hamiltonian, zero_tol: float = ZERO_TOL,
                              tol: float = 1e-9) -> list[np.ndarray]:
    """Non-negative orthonormal vectors with disjoint supports spanning the groundspace.

    Connected components of the graph on strings with ``|P_xy| > tol`` (P the
    groundspace projector) each carry exactly one such vector.
    """
    if h.n > DENSE_CAP:
        raise CapacityError(f"n={h.n} above dense cap {DENSE_CAP}")
    evals, evecs = np.linalg.eigh(hamiltonian_matrix(h))
    ground = evecs[:, evals <= evals[0] + zero_tol]
    proj = ground @ ground.T
    support = np.flatnonzero(np.diag(proj) > tol)
    sub = proj[np.ix_(support, support)]
    ncomp, labels = connected_components(np.abs(sub) > tol, directed=False)
    vectors = []
    for c in range(ncomp):
        idx = support[labels == c]
        block = proj[np.ix_(idx, idx)]
        _, u = np.linalg.eigh(block)
        vec = np.zeros(2 ** h.n)
        vec[idx] = u[:, -1]
        if vec.sum() < 0:
            vec = -vec
        vectors.append(vec)
    vectors.sort(key=lambda v: int(np.flatnonzero(v > tol)[0]))
    if len(vectors) != ground.shape[1]:
        raise DecompositionError(
            f"{len(vectors)} components for a {ground.shape[1]}-dimensional groundspace")
    for a, va in enumerate(vectors):
        if va.min() < -tol:
            raise DecompositionError(f"vector {a} has a negative entry {va.min():.2e}")
        for b in range(a):
            ip = abs(float(va @ vectors[b]))
            if ip > tol:
                raise DecompositionError(f"vectors {b} and {a} overlap ({ip:.2e})", (b, a))
    return vectors
