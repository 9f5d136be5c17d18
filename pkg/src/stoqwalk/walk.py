"""Random-walk verifier on the configuration graph and Monte-Carlo estimators.

One verifier run starts at ``x_0`` and for ``t = 0, ..., T-1`` rejects if
``x_t`` is bad, otherwise picks a term uniformly and moves to a uniform element
of ``S_i^x``.  With laziness ``p`` each move is replaced by staying put with
probability ``p``.

Trials are simulated in fixed-size blocks.  Block ``b`` draws from a Philox
stream keyed by ``(seed, b)``, so estimates do not depend on the thread count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binomtest

from .errors import CalibrationError, CapacityError
from .graph import is_bad, neighbors, subset_containing
from .instance import Hamiltonian, check_valid, hamiltonian_sparse, to_int, to_str

BLOCK = 4096
TABLE_CAP = 20


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


def default_T(h: Hamiltonian) -> int:
    return 100 * h.n * h.m


@dataclass(frozen=True)
class WalkParams:
    T: int
    laziness: float = 0.0
    trials: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be positive")
        if not 0.0 <= self.laziness < 1.0:
            raise ValueError("laziness must lie in [0, 1)")
        if self.trials < 1:
            raise ValueError("trials must be positive")


@dataclass(frozen=True)
class Estimate:
    hits: int
    trials: int
    low: float
    high: float

    @property
    def mean(self) -> float:
        return self.hits / self.trials

    @property
    def stderr(self) -> float:
        p = self.mean
        return float(np.sqrt(p * (1 - p) / self.trials))

    @classmethod
    def from_counts(cls, hits: int, trials: int, confidence: float = 0.95) -> "Estimate":
        ci = binomtest(int(hits), int(trials)).proportion_ci(confidence, method="wilson")
        return cls(int(hits), int(trials), float(ci.low), float(ci.high))

    def as_dict(self) -> dict:
        return {"mean": self.mean, "hits": self.hits, "trials": self.trials,
                "ci95": [self.low, self.high], "stderr": self.stderr}


class WalkKernel:
    """Vectorized neighbor sampling over integer-encoded strings."""

    def __init__(self, h: Hamiltonian):
        check_valid(h)
        if h.n > 62:
            raise CapacityError("walk kernel encodes strings in 63-bit integers")
        self.h = h
        n, m, k = h.n, h.m, h.k
        self.n, self.m = n, m
        width = 2 ** k
        max_sub = max(1, max(len(t.subsets) for t in h.terms))
        max_size = max(1, max((len(s) for t in h.terms for s in t.subsets), default=1))
        self.shifts = np.zeros((m, k), dtype=np.int64)
        self.weights = np.zeros((m, k), dtype=np.int64)
        self.sid = np.full((m, width), -1, dtype=np.int64)
        self.sizes = np.ones((m, max_sub), dtype=np.int64)
        self.members = np.zeros((m, max_sub, max_size), dtype=np.int64)
        self.scatter = np.zeros((m, width), dtype=np.int64)
        self.keep = np.zeros(m, dtype=np.int64)
        for i, t in enumerate(h.terms):
            ki = t.k
            mask = 0
            for pos, q in enumerate(t.qubits):
                self.shifts[i, pos] = n - 1 - q
                self.weights[i, pos] = 1 << (ki - 1 - pos)
                mask |= 1 << (n - 1 - q)
            self.keep[i] = ~mask
            for pat in range(2 ** ki):
                g = 0
                for pos in range(ki):
                    if (pat >> (ki - 1 - pos)) & 1:
                        g |= 1 << int(self.shifts[i, pos])
                self.scatter[i, pat] = g
            for j, sub in enumerate(t.subsets):
                self.sizes[i, j] = len(sub)
                for r, s in enumerate(sub):
                    self.members[i, j, r] = to_int(s)
                    self.sid[i, to_int(s)] = j
        self._bad_table = None
        if n <= TABLE_CAP:
            xs = np.arange(2 ** n, dtype=np.int64)
            self._bad_table = self._bad_direct(xs)

    def patterns(self, terms: np.ndarray, x: np.ndarray) -> np.ndarray:
        sh, wt = self.shifts[terms], self.weights[terms]
        return (((x[:, None] >> sh) & 1) * wt).sum(axis=1)

    def _bad_direct(self, x):
        bad = np.zeros(x.shape, dtype=bool)
        for i in range(self.m):
            pat = (((x[:, None] >> self.shifts[i]) & 1) * self.weights[i]).sum(axis=1)
            bad |= self.sid[i, pat] < 0
        return bad

    def bad(self, x: np.ndarray) -> np.ndarray:
        if self._bad_table is not None:
            return self._bad_table[x]
        return self._bad_direct(x)

    def step(self, x: np.ndarray, rng: np.random.Generator, laziness: float = 0.0):
        """One move for every walker in ``x`` (all assumed good).

        Returns the new positions and the chosen term per walker (-1 for a lazy stay).
        """
        size = x.size
        terms = rng.integers(0, self.m, size=size)
        pat = self.patterns(terms, x)
        sub = self.sid[terms, pat]
        r = rng.integers(0, self.sizes[terms, sub])
        new = self.members[terms, sub, r]
        y = (x & self.keep[terms]) | self.scatter[terms, new]
        if laziness > 0:
            stay = rng.random(size) < laziness
            y = np.where(stay, x, y)
            terms = np.where(stay, -1, terms)
        return y, terms


def _blocks(total: int):
    return [(b, b * BLOCK, min(total, (b + 1) * BLOCK)) for b in range((total + BLOCK - 1) // BLOCK)]


def _map_blocks(fn, total, threads):
    blocks = _blocks(total)
    threads = threads or os.cpu_count() or 1
    if threads == 1 or len(blocks) == 1:
        return [fn(*blk) for blk in blocks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda blk: fn(*blk), blocks))


def first_bad_times(kernel: WalkKernel, starts: np.ndarray, T: int, laziness: float = 0.0,
                    seed: int = 0, threads: int | None = None) -> np.ndarray:
    """For each walker, the first ``t < T`` with ``x_t`` bad, or -1 if it accepts."""
    starts = np.asarray(starts, dtype=np.int64)

    def run(block, lo, hi):
        rng = block_rng(seed, block)
        out = np.full(hi - lo, -1, dtype=np.int64)
        x = starts[lo:hi].copy()
        idx = np.arange(hi - lo)
        for t in range(T):
            hit = kernel.bad(x)
            if hit.any():
                out[idx[hit]] = t
                x, idx = x[~hit], idx[~hit]
            if x.size == 0 or t == T - 1:
                break
            x, _ = kernel.step(x, rng, laziness)
        return out

    return np.concatenate(_map_blocks(run, starts.size, threads)) if starts.size else starts


def first_exit_times(kernel: WalkKernel, starts: np.ndarray, members: np.ndarray, t: int,
                     laziness: float = 0.5, seed: int = 0,
                     threads: int | None = None) -> np.ndarray:
    """For each walker, the first step ``s`` in ``1..t`` with ``x_s`` outside ``members``, else -1."""
    starts = np.asarray(starts, dtype=np.int64)
    members = np.sort(np.asarray(members, dtype=np.int64))

    def inside(x):
        pos = np.searchsorted(members, x)
        pos = np.minimum(pos, members.size - 1)
        return members[pos] == x

    def run(block, lo, hi):
        rng = block_rng(seed, block)
        out = np.full(hi - lo, -1, dtype=np.int64)
        x = starts[lo:hi].copy()
        idx = np.arange(hi - lo)
        for s in range(1, t + 1):
            x, _ = kernel.step(x, rng, laziness)
            out_now = ~inside(x)
            if out_now.any():
                out[idx[out_now]] = s
                x, idx = x[~out_now], idx[~out_now]
            if x.size == 0:
                break
        return out

    return np.concatenate(_map_blocks(run, starts.size, threads)) if starts.size else starts


# -- single walks -------------------------------------------------------------

@dataclass(frozen=True)
class Step:
    term: int | None  # None marks a lazy stay
    string: str
    bad: bool


@dataclass
class WalkTrace:
    start: str
    steps: list[Step] = field(default_factory=list)
    reject_step: int | None = None
    seed: int = 0

    @property
    def accepted(self) -> bool:
        return self.reject_step is None

    @property
    def outcome(self) -> str:
        return "accept" if self.accepted else f"reject@{self.reject_step}"

    def strings(self) -> list[str]:
        return [self.start] + [s.string for s in self.steps]

    def jsonl_records(self):
        yield {"step": 0, "term": None, "string": self.start, "bad": bool(
            self.reject_step == 0)}
        for t, s in enumerate(self.steps, start=1):
            yield {"step": t, "term": "stay" if s.term is None else s.term,
                   "string": s.string, "bad": s.bad}


def verify(h: Hamiltonian, x0: str, params: WalkParams, trial: int = 0,
           kernel: WalkKernel | None = None) -> WalkTrace:
    """One run of the walk verifier, recording every move."""
    if len(x0) != h.n:
        raise ValueError(f"start string has length {len(x0)}, expected {h.n}")
    kernel = kernel or WalkKernel(h)
    rng = block_rng(params.seed, trial)
    trace = WalkTrace(x0, seed=params.seed)
    x = np.array([to_int(x0)], dtype=np.int64)
    for t in range(params.T):
        if kernel.bad(x)[0]:
            trace.reject_step = t
            break
        x, term = kernel.step(x, rng, params.laziness)
        trace.steps.append(Step(None if term[0] < 0 else int(term[0]), to_str(int(x[0]), h.n),
                                bool(kernel.bad(x)[0])))
    return trace


def walk_step(h: Hamiltonian, x: str, rng: np.random.Generator, laziness: float = 0.0):
    """Single walk move from ``x``.

    Returns ``(next, term)``.  ``term`` is None for a lazy stay; ``next`` is None
    when the drawn term has no subset containing ``x`` (x is bad).
    """
    if laziness > 0 and rng.random() < laziness:
        return x, None
    i = int(rng.integers(h.m))
    sub = subset_containing(h.terms[i], x)
    if sub is None:
        return None, i
    return sub[int(rng.integers(len(sub)))], i


def transition_probabilities(h: Hamiltonian, x: str, laziness: float = 0.0) -> dict[str, float]:
    """Exact one-step distribution from a good string."""
    probs: dict[str, float] = {}
    if laziness:
        probs[x] = laziness
    for t in h.terms:
        sub = subset_containing(t, x)
        if sub is None:
            raise ValueError(f"{x} is bad")
        for y in sub:
            probs[y] = probs.get(y, 0.0) + (1 - laziness) / (h.m * len(sub))
    return dict(sorted(probs.items()))


# -- estimators ---------------------------------------------------------------

def rejection_probability(h: Hamiltonian, x0: str, params: WalkParams,
                          threads: int | None = None,
                          kernel: WalkKernel | None = None) -> Estimate:
    if params.trials < 30:
        raise ValueError("rejection_probability needs at least 30 trials")
    kernel = kernel or WalkKernel(h)
    starts = np.full(params.trials, to_int(x0), dtype=np.int64)
    times = first_bad_times(kernel, starts, params.T, params.laziness, params.seed, threads)
    return Estimate.from_counts(int((times >= 0).sum()), params.trials)


def _bad_mask_dense(h: Hamiltonian) -> np.ndarray:
    """Bad strings read off the diagonals of the embedded single-term matrices."""
    bad = np.zeros(2 ** h.n, dtype=bool)
    for t in h.terms:
        hi = hamiltonian_sparse(Hamiltonian(h.n, [t]))
        bad |= np.isclose(hi.diagonal(), 1.0)
    return bad


def transition_matrix(h: Hamiltonian, laziness: float = 0.0) -> np.ndarray:
    """Dense ``lambda I + (1 - lambda)(I - H)``: the walk's transition matrix on good rows."""
    dim = 2 ** h.n
    return laziness * np.eye(dim) + (1 - laziness) * (np.eye(dim) - hamiltonian_sparse(h).toarray())


def exact_rejection_probability(h: Hamiltonian, x0: str, T: int, laziness: float = 0.0) -> float:
    """Rejection probability by powering the transition matrix (independent of the sampler)."""
    if h.n > 12:
        raise CapacityError("exact rejection probability limited to n <= 12")
    bad = _bad_mask_dense(h)
    trans = transition_matrix(h, laziness)
    p = np.zeros(2 ** h.n)
    p[to_int(x0)] = 1.0
    rejected = 0.0
    for t in range(T):
        rejected += p[bad].sum()
        p[bad] = 0.0
        if t < T - 1:
            p = p @ trans
    return float(rejected)


@dataclass
class Calibration:
    T: int
    curve: list[dict]

    def csv_rows(self):
        yield ["T", "min_rejection", "mean_rejection"]
        for row in self.curve:
            yield [row["T"], row["min_rejection"], row["mean_rejection"]]


def _doubling(T_max):
    T = 1
    while T < T_max:
        yield T
        T *= 2
    yield T_max


def calibrate_T(family, target_reject: float = 0.5, T_max: int = 10_000,
                starts_per_instance: int = 20, trials: int = 1000, seed: int = 0,
                laziness: float = 0.0, threads: int | None = None,
                starts: list[list[str]] | None = None) -> Calibration:
    """Smallest doubling-grid ``T <= T_max`` whose rejection rate reaches the target at every start.

    Every walker is simulated once up to ``T_max``; the rejection rate at ``T``
    is the fraction whose first bad time is below ``T``.
    """
    per_start = []
    seeds = np.random.SeedSequence(seed).spawn(len(family))
    for idx, h in enumerate(family):
        kernel = WalkKernel(h)
        if starts is not None:
            xs = np.array([to_int(s) for s in starts[idx]], dtype=np.int64)
        else:
            rng = np.random.default_rng(seeds[idx])
            xs = rng.integers(0, 2 ** h.n, size=starts_per_instance, dtype=np.int64)
        walkers = np.repeat(xs, trials)
        times = first_bad_times(kernel, walkers, T_max, laziness,
                                int(seeds[idx].generate_state(1)[0]), threads)
        per_start.append(times.reshape(xs.size, trials))
    curve = []
    for T in _doubling(T_max):
        rates = np.concatenate([((t >= 0) & (t < T)).mean(axis=1) for t in per_start])
        curve.append({"T": T, "min_rejection": float(rates.min()),
                      "mean_rejection": float(rates.mean())})
        if rates.min() >= target_reject:
            return Calibration(T, curve)
    raise CalibrationError(
        f"rejection never reached {target_reject} at every start for T <= {T_max}", curve)


def stationary_weights(h: Hamiltonian, strings) -> np.ndarray:
    """Degree-proportional distribution restricted to ``strings``."""
    degrees = [neighbors(h, s).degree for s in strings]
    top = max(degrees)
    w = np.array([d / top for d in degrees], dtype=float)
    return w / w.sum()


def escape_probability(h: Hamiltonian, S, start: str = "pi", t: int = 10, trials: int = 10_000,
                       seed: int = 0, threads: int | None = None,
                       kernel: WalkKernel | None = None) -> Estimate:
    """Probability that a lazy walk leaves ``S`` within ``t`` steps.

    ``start`` is ``"pi"`` (degree-proportional start inside S) or a fixed string.
    """
    S = sorted(set(S))
    if not S:
        raise ValueError("S must be non-empty")
    bad = [x for x in S if is_bad(h, x)]
    if bad:
        raise ValueError(f"S contains bad strings: {bad[:5]}")
    kernel = kernel or WalkKernel(h)
    members = np.array([to_int(x) for x in S], dtype=np.int64)
    if start == "pi":
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1 << 20,)))
        starts = rng.choice(members, size=trials, p=stationary_weights(h, S))
    else:
        if start not in set(S):
            raise ValueError(f"start {start} is not in S")
        starts = np.full(trials, to_int(start), dtype=np.int64)
    times = first_exit_times(kernel, starts, members, t, 0.5, seed, threads)
    return Estimate.from_counts(int((times >= 0).sum()), trials)


def escape_bound(conductance: float, t: int) -> float:
    """Upper bound ``1 - (1 - phi/2)^t`` on the expected escape probability of a lazy walk."""
    return 1.0 - (1.0 - conductance / 2.0) ** t


def visit_frequencies(h: Hamiltonian, x0: str, steps: int, walkers: int = 1000,
                      burn_in: int = 1000, laziness: float = 0.5, seed: int = 0) -> np.ndarray:
    """Empirical visit frequencies over ``{0,1}^n`` from ``walkers`` parallel lazy walks.

    Walks must avoid bad strings; counts start after ``burn_in`` moves.
    """
    if h.n > TABLE_CAP:
        raise CapacityError("visit frequencies tabulate all 2^n strings")
    kernel = WalkKernel(h)
    rng = block_rng(seed, 0)
    x = np.full(walkers, to_int(x0), dtype=np.int64)
    counts = np.zeros(2 ** h.n, dtype=np.int64)
    for s in range(burn_in + steps):
        if kernel.bad(x).any():
            raise ValueError("walk reached a bad string")
        x, _ = kernel.step(x, rng, laziness)
        if s >= burn_in:
            counts += np.bincount(x, minlength=2 ** h.n)
    return counts / counts.sum()
