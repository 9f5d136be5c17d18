"""Acceptance battery shared by ``stoqwalk suite`` and the test-suite.

Each criterion returns a :class:`CriterionResult`.  ``quick=True`` shortens the
three slowest criteria (completeness, soundness, compiler) by using fewer
steps, instances or verifiers; the others are cheap and always run at full
size, and tolerances never change.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import asdict, dataclass, field
from importlib import resources

import numpy as np

from . import compiler as cc
from .graph import (boundary_vertices, connected_component, cut_stats, degree_bound,
                    edge_unit, is_bad, neighbors, subset_containing)
from .instance import (Hamiltonian, all_strings, check_valid, gen_frustrated, gen_ghz_chain,
                       gen_hypercube, gen_leaky_chain, gen_random, hamiltonian_matrix,
                       hamiltonian_sparse, loads, to_int, to_str)
from .spectral import ground_energy
from .walk import (Estimate, WalkKernel, WalkParams, _bad_mask_dense, calibrate_T,
                   escape_bound, escape_probability, exact_rejection_probability,
                   first_bad_times, rejection_probability, visit_frequencies)


@dataclass
class CriterionResult:
    id: int
    name: str
    passed: bool
    metric: float
    threshold: float
    seed: int
    detail: dict = field(default_factory=dict)

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def line(self) -> str:
        return (f"criterion {self.id:2d} {self.status} {self.name}: "
                f"metric={self.metric:.6g} threshold={self.threshold:.6g} seed={self.seed}")


def criterion_seed(seed: int, cid: int) -> int:
    return int(np.random.SeedSequence([seed, cid]).generate_state(1)[0])


def golden_instances() -> dict[str, Hamiltonian]:
    """Bundled instances, keyed by file stem."""
    out = {}
    for entry in sorted(resources.files("stoqwalk.data").iterdir(), key=lambda p: p.name):
        if entry.name.endswith(".json"):
            out[entry.name[:-5]] = loads(entry.read_text())
    return out


def optimal_start(h: Hamiltonian) -> str:
    """Largest-amplitude string of the oracle groundstate (lowest index on ties)."""
    psi = ground_energy(h, "dense").groundstate
    return to_str(int(np.argmax(psi > psi.max() - 1e-12)), h.n)


def grow_set(h: Hamiltonian, x: str, size: int, rng: np.random.Generator) -> list[str]:
    """Random connected set of good strings around ``x`` (x must be good)."""
    S, frontier = {x}, [x]
    while frontier and len(S) < size:
        cur = frontier.pop(int(rng.integers(len(frontier))))
        nbrs = [y for y in neighbors(h, cur).entries if y not in S and not is_bad(h, y)]
        rng.shuffle(nbrs)
        for y in nbrs:
            if len(S) >= size:
                break
            S.add(y)
            frontier.append(y)
        if nbrs:
            frontier.append(cur)
    return sorted(S)


# -- criteria ----------------------------------------------------------------

def completeness(seed: int = 0, quick: bool = False, threads=None) -> CriterionResult:
    s = criterion_seed(seed, 1)
    T, trials = (1000, 200) if quick else (10_000, 1000)
    start = time.perf_counter()
    worst, rows = 0, {}
    for n in (4, 6, 8):
        for name, h in (("hypercube", gen_hypercube(n)), ("ghz", gen_ghz_chain(n))):
            x0 = optimal_start(h)
            est = rejection_probability(h, x0, WalkParams(T, 0.0, trials, s), threads)
            rows[f"{name}{n}"] = {"x0": x0, "accepted": trials - est.hits}
            worst = max(worst, est.hits)
    elapsed = time.perf_counter() - start
    return CriterionResult(1, "frustration-free completeness", worst == 0 and elapsed < 30,
                           worst, 0, s, {"T": T, "trials": trials, "instances": rows,
                                         "runtime_ok": elapsed < 30})


def frustrated_family(count: int, seed: int, n_max: int = 10) -> list[Hamiltonian]:
    rng = np.random.default_rng(seed)
    family = []
    for i in range(count):
        n = 6 + i % (n_max - 5)
        family.append(gen_frustrated(n, 3, n, rng, min_energy=0.05))
    return family


def soundness(seed: int = 0, quick: bool = False, threads=None) -> CriterionResult:
    s = criterion_seed(seed, 2)
    count, n_max = (6, 8) if quick else (20, 10)
    family = frustrated_family(count, s, n_max)
    energies = [ground_energy(h).ground_energy for h in family]
    start = time.perf_counter()
    rng = np.random.default_rng(s)
    starts = [[to_str(int(x), h.n) for x in rng.integers(0, 2 ** h.n, size=20)] for h in family]
    cal = calibrate_T(family, 0.5, 10_000, 20, 1000, s, 0.0, threads, starts=starts)
    # the same starts, re-measured at the calibrated T with independent randomness
    worst_low, worst_mean = 1.0, 1.0
    for h, xs in zip(family, starts):
        walkers = np.repeat([to_int(x) for x in xs], 1000)
        times = first_bad_times(WalkKernel(h), walkers, cal.T, 0.0,
                                int(rng.integers(2 ** 31)), threads)
        for hits in (times >= 0).reshape(20, 1000).sum(axis=1):
            est = Estimate.from_counts(int(hits), 1000)
            worst_low = min(worst_low, est.low)
            worst_mean = min(worst_mean, est.mean)
    elapsed = time.perf_counter() - start
    ok = (min(energies) >= 0.05 and cal.T <= 10_000 and worst_mean >= 0.5
          and worst_low > 0.4 and elapsed < 300)
    return CriterionResult(2, "soundness on frustrated instances", ok, worst_low, 0.4, s,
                           {"T": cal.T, "curve": cal.curve, "min_rejection": worst_mean,
                            "min_energy": min(energies), "instances": count})


def _dense_boundary(h: Hamiltonian, support: np.ndarray) -> set[int]:
    """Support strings with a non-zero projector entry to a string outside the support."""
    inside = np.zeros(2 ** h.n, dtype=bool)
    inside[support] = True
    N = set()
    for t in h.terms:
        proj = -hamiltonian_sparse(Hamiltonian(h.n, [t])).toarray()
        np.fill_diagonal(proj, 0.0)
        hit = (np.abs(proj[:, ~inside]) > 1e-12).any(axis=1) & inside
        N.update(int(x) for x in np.flatnonzero(hit))
    return N


def _random_support_state(h: Hamiltonian, rng: np.random.Generator) -> np.ndarray:
    dim = 2 ** h.n
    kind = rng.integers(3)
    psi = np.zeros(dim)
    if kind == 0:
        idx = rng.choice(dim, size=int(rng.integers(1, dim + 1)), replace=False)
        psi[idx] = rng.random(idx.size) + 1e-3
    else:
        x = to_str(int(rng.integers(dim)), h.n)
        S = [to_int(y) for y in connected_component(h, x, node_budget=int(rng.integers(1, dim + 1))).strings]
        psi[S] = 1.0 if kind == 1 else rng.random(len(S)) + 1e-3
    return psi / np.linalg.norm(psi)


def boundary_energy(seed: int = 0, quick: bool = False) -> CriterionResult:
    s = criterion_seed(seed, 3)
    rng = np.random.default_rng(s)
    n_inst, per = 20, 50
    worst, checked, mismatched = np.inf, 0, 0
    for _ in range(n_inst):
        n = int(rng.integers(3, 9))
        k = int(rng.integers(1, min(3, n) + 1))
        h = gen_random(n, k, int(rng.integers(2, n + 3)), rng)
        dense = hamiltonian_matrix(h)
        for _ in range(per):
            psi = _random_support_state(h, rng)
            support = np.flatnonzero(psi > 0)
            N = _dense_boundary(h, support)
            graph_N = {to_int(x) for x in boundary_vertices(h, [to_str(int(x), h.n) for x in support])}
            mismatched += N != graph_N
            lhs = float(psi @ dense @ psi)
            rhs = sum(psi[x] ** 2 for x in N) / (2 ** h.k * h.m)
            worst = min(worst, lhs - rhs)
            checked += 1
    return CriterionResult(3, "boundary energy inequality", worst >= -1e-9 and mismatched == 0,
                           worst, -1e-9, s, {"states": checked, "boundary_mismatches": mismatched})


def escape_instances() -> list[Hamiltonian]:
    out = [gen_hypercube(5), gen_hypercube(7), gen_leaky_chain(6), gen_leaky_chain(8),
           gen_ghz_chain(6)]
    rng = np.random.default_rng(2024)
    out += [gen_random(7, 2, 7, rng, full_cover=True), gen_random(6, 3, 6, rng, full_cover=True),
            gen_random(8, 3, 5, rng, full_cover=True), gen_random(6, 2, 4, rng),
            gen_random(7, 3, 4, rng)]
    return out


def escape(seed: int = 0, quick: bool = False, threads=None) -> CriterionResult:
    s = criterion_seed(seed, 4)
    rng = np.random.default_rng(s)
    count, trials = 50, 10_000
    instances = escape_instances()
    ts = (1, 2, 5, 10, 30)
    worst, rows = -np.inf, []
    for i in range(count):
        h = instances[i % len(instances)]
        good = [x for x in all_strings(h.n) if not is_bad(h, x)]
        x = good[int(rng.integers(len(good)))]
        S = grow_set(h, x, int(rng.integers(1, max(2, len(good) // 2) + 1)), rng)
        t = ts[(i // len(instances)) % len(ts)] if count > len(instances) else ts[i % len(ts)]
        phi = float(cut_stats(h, S).conductance)
        est = escape_probability(h, S, "pi", t, trials, s + i, threads)
        slack = est.mean - (escape_bound(phi, t) + 3 * est.stderr)
        worst = max(worst, slack)
        rows.append({"n": h.n, "size": len(S), "t": t, "phi": phi, "escape": est.mean,
                     "bound": escape_bound(phi, t)})
    return CriterionResult(4, "escape bound", worst <= 0, worst, 0.0, s, {"triples": rows})


def oracle_instances(seed: int) -> list[Hamiltonian]:
    rng = np.random.default_rng(seed)
    out = [gen_leaky_chain(5), gen_leaky_chain(7)]
    while len(out) < 10:
        n = int(rng.integers(4, 9))
        h = gen_random(n, int(rng.integers(2, 4)), int(rng.integers(2, n + 1)), rng)
        if any(not is_bad(h, x) for x in all_strings(h.n)):
            out.append(h)
    return out


def oracle_equivalence(seed: int = 0, quick: bool = False, threads=None) -> CriterionResult:
    s = criterion_seed(seed, 5)
    rng = np.random.default_rng(s)
    trials, T = 2000, 30
    inside, rows = 0, []
    for h in oracle_instances(s):
        good = [x for x in all_strings(h.n) if not is_bad(h, x)]
        x0 = good[int(rng.integers(len(good)))]
        exact = exact_rejection_probability(h, x0, T)
        est = rejection_probability(h, x0, WalkParams(T, 0.0, trials, int(rng.integers(2 ** 31))),
                                    threads)
        ok = est.low <= exact <= est.high
        inside += ok
        rows.append({"n": h.n, "x0": x0, "exact": exact, "estimate": est.as_dict(), "inside": ok})
    return CriterionResult(5, "Monte Carlo vs exact rejection", inside == len(rows), inside,
                           len(rows), s, {"T": T, "instances": rows})


def stationary(seed: int = 0, quick: bool = False) -> CriterionResult:
    s = criterion_seed(seed, 6)
    rng = np.random.default_rng(s)
    walkers, steps = 1000, 1000
    cands = [gen_hypercube(4), gen_hypercube(6)]
    while len(cands) < 5:
        n = int(rng.integers(3, 7))
        h = gen_random(n, int(rng.integers(1, 3)), int(rng.integers(n, 2 * n)), rng, full_cover=True)
        if len(connected_component(h, "0" * n).strings) == 2 ** n:
            cands.append(h)
    worst, rows = 0.0, []
    for h in cands:
        degrees = np.array([neighbors(h, to_str(x, h.n)).degree for x in range(2 ** h.n)], dtype=float)
        pi = degrees / degrees.sum()
        freq = visit_frequencies(h, "0" * h.n, steps, walkers, 1000, 0.5, int(rng.integers(2 ** 31)))
        tv = 0.5 * float(np.abs(freq - pi).sum())
        worst = max(worst, tv)
        rows.append({"n": h.n, "m": h.m, "tv": tv})
    return CriterionResult(6, "stationary distribution", worst <= 0.02, worst, 0.02, s,
                           {"walkers": walkers, "steps": steps, "instances": rows})


def verifier_corpus(seed: int, size: int = 50, max_total: int = 10) -> list[tuple]:
    """Random verifiers plus always-accepting ones, paired with inputs.

    A verifier made only of ``|+>`` ancillas accepts with certainty whatever
    its circuit, since any permutation fixes the uniform superposition.  Two
    embedded always-accepting MA circuits are added as well.
    """
    rng = np.random.default_rng(seed)
    corpus = []
    for W in (2, 3):
        accept = cc.ReversibleCircuit(W, [cc.Gate("NOT", (W - 1,))])
        v = cc.ma_to_stoqma(accept, cc.MALayout(0, W - 1, 1, 0, W - 1))
        if v.wires + v.L <= max_total + 1:
            corpus.append((v, ""))
    while len(corpus) < size // 5:
        W = int(rng.integers(1, 5))
        gates = cc.random_verifier(rng, max_wires=W, max_gates=max_total - W,
                                   min_wires=W).circuit.gates
        corpus.append((cc.StoqVerifier(0, 0, 0, W, cc.ReversibleCircuit(W, gates)), ""))
    while len(corpus) < size:
        v = cc.random_verifier(rng, max_wires=6, max_gates=8)
        if v.wires + v.L <= max_total:
            corpus.append((v, "".join(rng.choice(["0", "1"], size=v.n))))
    return corpus


def compiler(seed: int = 0, quick: bool = False) -> CriterionResult:
    s = criterion_seed(seed, 7)
    corpus = verifier_corpus(s, 12 if quick else 50, 9 if quick else 10)
    invalid = wrong_zero = history_bad = accepting = 0
    worst_slack = -np.inf
    rng = np.random.default_rng(s)
    for v, x in corpus:
        h = cc.kitaev_compile(v, x)
        invalid += not _passes_validate(h)
        acc, w = cc.optimal_acceptance(v, x)
        lam = ground_energy(h, "dense").ground_energy
        accepting += acc >= 1 - 1e-9
        wrong_zero += (acc >= 1 - 1e-9) != (abs(lam) <= 1e-9)
        for wit in (w, cc.random_nonneg_state(2 ** v.n_w, rng)):
            eta = cc.history_state(v, x, wit)
            dense = hamiltonian_matrix(h)
            slack = float(eta @ dense @ eta) - (1 - cc.acceptance_probability(v, x, wit)) / h.m
            worst_slack = max(worst_slack, slack)
            history_bad += slack > 1e-9
    ok = invalid == 0 and wrong_zero == 0 and history_bad == 0
    return CriterionResult(7, "compiler correctness", ok, worst_slack, 1e-9, s,
                           {"verifiers": len(corpus), "accepting": accepting, "invalid": invalid,
                            "zero_energy_mismatch": wrong_zero, "history_violations": history_bad})


def _passes_validate(h: Hamiltonian) -> bool:
    try:
        check_valid(h)
    except Exception:
        return False
    return True


def nonneg_floor(seed: int = 0, quick: bool = False) -> CriterionResult:
    s = criterion_seed(seed, 8)
    rng = np.random.default_rng(s)
    n_ver, per = 100, 100
    lowest = 1.0
    for _ in range(n_ver):
        v = cc.random_verifier(rng, max_wires=10, max_gates=8)
        x = "".join(rng.choice(["0", "1"], size=v.n))
        for _ in range(per):
            lowest = min(lowest, cc.acceptance_probability(
                v, x, cc.random_nonneg_state(2 ** v.n_w, rng)))
    return CriterionResult(8, "non-negative witness floor", lowest >= 0.5 - 1e-9, lowest,
                           0.5 - 1e-9, s, {"pairs": n_ver * per})


def ma_circuits(rng: np.random.Generator, count: int):
    """(circuit, layout, expected acceptance) triples for constant MA circuits."""
    out = []
    for i in range(count):
        n, n_w = int(rng.integers(0, 3)), int(rng.integers(0, 3))
        n_0, n_plus = int(rng.integers(1, 3)), int(rng.integers(0, 2))
        W = n + n_w + n_0 + n_plus
        output = n + n_w + int(rng.integers(n_0))
        others = [w for w in range(W) if w != output]
        gates = []
        for _ in range(int(rng.integers(0, 4))):
            if len(others) >= 2:
                a, b = rng.choice(others, size=2, replace=False)
                gates.append(cc.Gate("CNOT", (int(a), int(b))))
        accept = i % 2 == 0
        if accept:
            gates.append(cc.Gate("NOT", (output,)))
        out.append((cc.ReversibleCircuit(W, gates), cc.MALayout(n, n_w, n_0, n_plus, output),
                    1.0 if accept else 0.5))
    return out


def ma_embedding(seed: int = 0, quick: bool = False) -> CriterionResult:
    s = criterion_seed(seed, 9)
    rng = np.random.default_rng(s)
    worst = 0.0
    cases = ma_circuits(rng, 40)
    for circ, layout, expected in cases:
        v = cc.ma_to_stoqma(circ, layout)
        for x in all_strings(layout.n) if layout.n else [""]:
            for w in range(2 ** layout.n_w):
                wit = np.zeros(2 ** layout.n_w)
                wit[w] = 1.0
                worst = max(worst, abs(cc.acceptance_probability(v, x, wit) - expected))
            wit = cc.random_nonneg_state(2 ** layout.n_w, rng)
            worst = max(worst, abs(cc.acceptance_probability(v, x, wit) - expected))
    return CriterionResult(9, "MA embedding", worst <= 1e-12, worst, 1e-12, s,
                           {"circuits": len(cases)})


def structural(seed: int = 0, quick: bool = False) -> CriterionResult:
    failures, checked = [], 0
    for name, h in golden_instances().items():
        if h.n > 8:
            continue
        unit, bound = edge_unit(h), degree_bound(h)
        dense_bad = _bad_mask_dense(h)
        table = {}
        for xi in range(2 ** h.n):
            x = to_str(xi, h.n)
            for t in h.terms:
                sub = subset_containing(t, x)
                if sub is not None and unit % len(sub):
                    failures.append((name, x, "integrality"))
            nb = neighbors(h, x)
            table[x] = nb.entries
            if nb.degree > bound:
                failures.append((name, x, "degree"))
            if is_bad(h, x) != bool(dense_bad[xi]):
                failures.append((name, x, "bad-oracle"))
            checked += 1
        for x, entries in table.items():
            for y, mult in entries.items():
                if not isinstance(mult, int) or table[y].get(x) != mult:
                    failures.append((name, x, "symmetry"))
    return CriterionResult(10, "structural invariants", not failures and checked > 0,
                           len(failures), 0, seed, {"strings": checked, "failures": failures[:20]})


CRITERIA = {
    1: completeness, 2: soundness, 3: boundary_energy, 4: escape, 5: oracle_equivalence,
    6: stationary, 7: compiler, 8: nonneg_floor, 9: ma_embedding, 10: structural,
}
THREADED = {1, 2, 4, 5}


def run_criterion(cid: int, seed: int = 0, quick: bool = False, threads=None) -> CriterionResult:
    fn = CRITERIA[cid]
    if cid in THREADED:
        return fn(seed=seed, quick=quick, threads=threads)
    return fn(seed=seed, quick=quick)


def run_suite(seed: int = 0, quick: bool = False, threads=None, only=None) -> list[CriterionResult]:
    return [run_criterion(c, seed, quick, threads) for c in (only or sorted(CRITERIA))]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def suite_json(results: list[CriterionResult], seed: int, quick: bool) -> str:
    payload = {"suite": "acceptance", "seed": seed, "quick": quick,
               "passed": all(r.passed for r in results),
               "criteria": [dict(_jsonable(asdict(r)), status=r.status) for r in results]}
    return json.dumps(payload, indent=1, sort_keys=True) + "\n"


def suite_csv(results: list[CriterionResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", "name", "status", "metric", "threshold", "seed"])
    for r in results:
        w.writerow([r.id, r.name, r.status, repr(float(r.metric)), repr(float(r.threshold)), r.seed])
    return buf.getvalue()
