"""Low-energy states to weakly expanding sets of good strings, and good starting points."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import LemmaViolation, StoqwalkError
from .graph import CutStats, boundary_vertices, cut_stats, edge_unit, is_bad
from .instance import Hamiltonian, to_int, to_str
from .spectral import frustration, ground_energy
from .walk import Estimate, WalkKernel, first_exit_times, stationary_weights

TOL = 1e-9


class DegenerateInstanceError(StoqwalkError):
    """Truncation removed every string."""


@dataclass
class NiceSetResult:
    S: tuple[str, ...]
    psi: np.ndarray
    delta: float
    frustration: float
    boundary_vertices: frozenset[str]
    bound: float
    rounds: int
    removed_mass: float = 0.0
    triangle_bound: float = 0.0
    epsilon_prime: float | None = None
    cut: CutStats | None = None
    vacuous: bool | None = None

    @property
    def bound_holds(self) -> bool:
        return self.frustration <= self.bound + TOL

    @property
    def ratio(self) -> float | None:
        """Multiplicity-weighted boundary per string of S."""
        return None if self.cut is None else self.cut.boundary / len(self.S)

    def report(self) -> dict:
        out = {
            "size": len(self.S), "delta": self.delta, "frustration": self.frustration,
            "frustration_bound": self.bound, "bound_holds": self.bound_holds,
            "removed_mass": self.removed_mass, "triangle_bound": self.triangle_bound,
            "rounds": self.rounds,
            "boundary_vertices": len(self.boundary_vertices),
        }
        if self.cut is not None:
            out.update({
                "boundary_edges": str(self.cut.boundary), "volume": str(self.cut.volume),
                "conductance": float(self.cut.conductance), "boundary_per_string": self.ratio,
                "epsilon_prime": self.epsilon_prime, "vacuous": self.vacuous,
            })
        return out


def amplitude_floor(g: float, support_size: int) -> float:
    return 1.0 / math.sqrt(g * support_size)


def truncate_groundstate(h: Hamiltonian, psi: np.ndarray, f: float, g: float,
                         support_tol: float = 1e-12, strict: bool = False) -> NiceSetResult:
    """Drop bad strings and amplitudes below ``1/sqrt(g |S|)`` until nothing changes.

    ``|S|`` is the support of the current candidate, so the floor is recomputed
    every round.  ``bound`` is ``1 / (f (1 - m/f - 1/g))``; removing a bad
    string next to a heavy neighbour can exceed it, so it is reported through
    ``bound_holds`` and only enforced with ``strict=True``.  ``triangle_bound``
    is ``(sqrt(E) + |r|)^2 / (1 - |r|^2)`` for removed part ``r``, which always
    holds because ``0 <= H <= I``.
    """
    psi = np.asarray(psi, dtype=float)
    if psi.min() < -TOL or abs(np.linalg.norm(psi) - 1.0) > TOL:
        raise ValueError("psi must be a non-negative unit vector")
    denom = 1.0 - h.m / f - 1.0 / g
    if denom <= 0:
        raise ValueError(f"1 - m/f - 1/g = {denom:.3g} is not positive")
    energy = frustration(h, psi)
    if energy > 1.0 / f + TOL:
        raise ValueError(f"state energy {energy:.3g} exceeds 1/f = {1 / f:.3g}")

    state = np.where(psi > support_tol, psi, 0.0)
    bad_cache: dict[int, bool] = {}

    def bad(x):
        if x not in bad_cache:
            bad_cache[x] = is_bad(h, to_str(x, h.n))
        return bad_cache[x]

    rounds = 0
    while True:
        support = np.flatnonzero(state)
        if support.size == 0:
            raise DegenerateInstanceError("truncation left an empty support")
        delta = amplitude_floor(g, support.size)
        drop = [x for x in support if bad(x) or state[x] < delta]
        if not drop:
            break
        rounds += 1
        state[drop] = 0.0
        norm = np.linalg.norm(state)
        if norm == 0:
            raise DegenerateInstanceError("truncation left an empty support")
        state /= norm

    S = tuple(to_str(int(x), h.n) for x in support)
    value = frustration(h, state)
    removed = max(0.0, 1.0 - float(np.sum(psi[support] ** 2)))
    triangle = (math.sqrt(energy) + math.sqrt(removed)) ** 2 / (1.0 - removed)
    res = NiceSetResult(S, state, delta, value, frozenset(boundary_vertices(h, S)),
                        1.0 / (f * denom), rounds, removed, triangle)
    if value > triangle + TOL:
        raise LemmaViolation("truncated state exceeds the triangle-inequality bound",
                             frustration=value, bound=triangle)
    if strict and not res.bound_holds:
        raise LemmaViolation("truncated state exceeds 1/(f(1 - m/f - 1/g))",
                             frustration=value, bound=res.bound)
    return res


@dataclass(frozen=True)
class BoundaryEnergy:
    lhs: float
    rhs: float
    boundary: frozenset[str]

    @property
    def holds(self) -> bool:
        return self.lhs >= self.rhs - TOL


def boundary_energy_check(h: Hamiltonian, psi: np.ndarray, support_tol: float = 0.0) -> BoundaryEnergy:
    """Energy of ``psi`` against ``(1/(2^k m)) sum_{x in N} psi_x^2``.

    N holds the support strings that share a term subset with a string outside
    the support.
    """
    psi = np.asarray(psi, dtype=float)
    if psi.min() < -TOL or abs(np.linalg.norm(psi) - 1.0) > TOL:
        raise ValueError("psi must be a non-negative unit vector")
    support = [to_str(int(x), h.n) for x in np.flatnonzero(psi > support_tol)]
    N = frozenset(boundary_vertices(h, support))
    rhs = sum(psi[to_int(x)] ** 2 for x in N) / (2 ** h.k * h.m)
    return BoundaryEnergy(frustration(h, psi), float(rhs), N)


def epsilon_prime(h: Hamiltonian, epsilon: float) -> float:
    return h.m ** 2 * 2 ** (2 * h.k + 1) * float(edge_unit(h)) * math.sqrt(epsilon)


def find_weak_set(h: Hamiltonian, epsilon: float) -> NiceSetResult:
    """Good-string set whose weighted boundary is below ``epsilon' |S|``.

    Truncates the oracle groundstate with ``f = 1/epsilon`` and
    ``g = 1/sqrt(epsilon)``.  ``vacuous`` marks results where ``epsilon'``
    exceeds the largest possible boundary per string (``m M``).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    spectrum = ground_energy(h, "dense")
    if spectrum.ground_energy > epsilon + 1e-12:
        raise ValueError(
            f"ground energy {spectrum.ground_energy:.3g} exceeds epsilon {epsilon:.3g}")
    res = truncate_groundstate(h, spectrum.groundstate, 1.0 / epsilon, 1.0 / math.sqrt(epsilon))
    res.cut = cut_stats(h, res.S)
    res.epsilon_prime = epsilon_prime(h, epsilon)
    res.vacuous = res.epsilon_prime > h.m * edge_unit(h)
    if not res.cut.boundary < res.epsilon_prime * len(res.S):
        raise LemmaViolation("weighted boundary is not below epsilon' |S|",
                             boundary=res.cut.boundary, epsilon_prime=res.epsilon_prime,
                             size=len(res.S))
    return res


@dataclass
class GoodStart:
    x0: str
    escape: Estimate
    estimates: dict[str, Estimate] = field(default_factory=dict)
    weighted_mean: float = 0.0


def find_good_start(h: Hamiltonian, S, p_steps: int, trials: int = 1000, seed: int = 0,
                    max_candidates: int = 64, threads: int | None = None) -> GoodStart:
    """Start inside ``S`` with the smallest estimated escape probability.

    Candidates are all of S, or a degree-weighted sample of ``max_candidates``
    strings when S is larger.  The minimum is checked against the weighted mean
    over the same candidates.
    """
    S = sorted(set(S))
    if not S:
        raise ValueError("S must be non-empty")
    bad = [x for x in S if is_bad(h, x)]
    if bad:
        raise ValueError(f"S contains bad strings: {bad[:5]}")
    if len(S) <= max_candidates:
        candidates = S
    else:
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1 << 21,)))
        pick = rng.choice(len(S), size=max_candidates, replace=False, p=stationary_weights(h, S))
        candidates = [S[i] for i in sorted(pick)]
    kernel = WalkKernel(h)
    members = np.array([to_int(x) for x in S], dtype=np.int64)
    starts = np.repeat(np.array([to_int(x) for x in candidates], dtype=np.int64), trials)
    times = first_exit_times(kernel, starts, members, p_steps, 0.5, seed, threads)
    hits = (times >= 0).reshape(len(candidates), trials).sum(axis=1)
    estimates = {x: Estimate.from_counts(int(c), trials) for x, c in zip(candidates, hits)}
    weights = stationary_weights(h, candidates)
    mean = float(np.dot(weights, hits / trials))
    best = min(candidates, key=lambda x: (estimates[x].hits, x))
    if estimates[best].mean > mean + 1e-12:
        raise LemmaViolation("minimum escape estimate exceeds the weighted mean",
                             minimum=estimates[best].mean, mean=mean)
    return GoodStart(best, estimates[best], estimates, mean)
