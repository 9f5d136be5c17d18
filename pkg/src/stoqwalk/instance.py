"""Projection uniform stoquastic local Hamiltonians.

A local term acts on ``k`` qubits and is described by the disjoint sets of
k-bit strings whose subset states span its groundspace.  The term itself is
``H_i = I - sum_j |S_ij><S_ij|`` and the instance is ``(1/m) sum_i H_i``.

Bit conventions: a global string is indexed with qubit 0 as the leftmost
character, which is also the most significant bit of its integer index.
Inside a term, local strings follow the order of the term's ``qubits``.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
import random
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import CapacityError, InstanceParseError, InvalidInstanceError

DEFAULT_MAX_LOCALITY = 6
DENSE_CAP = 14


# -- bitstrings -------------------------------------------------------------

def to_int(bits: str) -> int:
    return int(bits, 2)


def to_str(x: int, n: int) -> str:
    return format(x, f"0{n}b")


def all_strings(n: int) -> list[str]:
    return [to_str(x, n) for x in range(2 ** n)]


def _is_bitstring(s, length) -> bool:
    return isinstance(s, str) and len(s) == length and set(s) <= {"0", "1"}


# -- data model -------------------------------------------------------------

@dataclass(frozen=True)
class LocalTerm:
    qubits: tuple[int, ...]
    subsets: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "subsets", tuple(tuple(sorted(s)) for s in self.subsets))

    @property
    def k(self) -> int:
        return len(self.qubits)

    @cached_property
    def subset_of(self) -> dict[str, int]:
        """Map local pattern -> index of the subset containing it."""
        return {s: j for j, sub in enumerate(self.subsets) for s in sub}


@dataclass(frozen=True)
class Hamiltonian:
    n: int
    terms: tuple[LocalTerm, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))

    @property
    def m(self) -> int:
        return len(self.terms)

    @property
    def k(self) -> int:
        """Locality: the largest term support."""
        return max((t.k for t in self.terms), default=0)

    @cached_property
    def term_matrices(self) -> tuple[np.ndarray, ...]:
        return tuple(term_matrix(t) for t in self.terms)

    def digest(self) -> str:
        return hashlib.sha256(dumps(self, indent=None).encode()).hexdigest()


# -- validation -------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    term: int | None
    code: str
    message: str

    def __str__(self):
        where = "instance" if self.term is None else f"term {self.term}"
        return f"{where}: [{self.code}] {self.message}"


def validate(h: Hamiltonian, max_locality: int = DEFAULT_MAX_LOCALITY) -> list[Violation]:
    """Return every violated invariant; an empty list means the instance is valid."""
    report = []
    if not isinstance(h.n, int) or h.n <= 0:
        report.append(Violation(None, "n", f"qubit count must be positive, got {h.n!r}"))
    if h.m < 1:
        report.append(Violation(None, "empty", "at least one term is required"))
    for i, t in enumerate(h.terms):
        report.extend(_validate_term(i, t, h.n, max_locality))
    return report


def _validate_term(i, t, n, max_locality):
    out = []
    k = t.k
    if k == 0:
        out.append(Violation(i, "qubits", "term acts on no qubits"))
        return out
    if len(set(t.qubits)) != k:
        out.append(Violation(i, "qubits", f"repeated qubit in {list(t.qubits)}"))
    bad_q = [q for q in t.qubits if not 0 <= q < n]
    if bad_q:
        out.append(Violation(i, "qubits", f"qubit indices out of range [0,{n}): {bad_q}"))
    if k > max_locality:
        out.append(Violation(i, "locality", f"k={k} exceeds cap {max_locality}"))
    seen = {}
    for j, sub in enumerate(t.subsets):
        if not sub:
            out.append(Violation(i, "empty-subset", f"subset {j} is empty"))
        if len(sub) > 2 ** k:
            out.append(Violation(i, "subset-size", f"subset {j} has {len(sub)} > 2^{k} strings"))
        if len(set(sub)) != len(sub):
            out.append(Violation(i, "duplicate", f"subset {j} repeats a string"))
        for s in sub:
            if not _is_bitstring(s, k):
                out.append(Violation(i, "string", f"subset {j}: {s!r} is not a {k}-bit string"))
                continue
            if s in seen and seen[s] != j:
                out.append(Violation(
                    i, "disjoint", f"string {s} appears in subsets {seen[s]} and {j}"))
            seen.setdefault(s, j)
    if not out and k <= max_locality:
        mat = term_matrix(t, max_locality=max_locality)
        if not np.allclose(mat @ mat, mat, atol=1e-12):
            out.append(Violation(i, "projection", "H_i is not a projection"))
        off = mat - np.diag(np.diag(mat))
        if off.max(initial=0.0) > 0:
            out.append(Violation(i, "stoquastic", "positive off-diagonal entry"))
    return out


def check_valid(h: Hamiltonian, max_locality: int = DEFAULT_MAX_LOCALITY) -> None:
    report = validate(h, max_locality)
    if report:
        raise InvalidInstanceError(report)


# -- matrices ---------------------------------------------------------------

def term_matrix(t: LocalTerm, max_locality: int = DEFAULT_MAX_LOCALITY) -> np.ndarray:
    """Dense ``2^k x 2^k`` matrix of ``I - P_i`` in the term's local basis."""
    if t.k > max_locality:
        raise CapacityError(f"locality {t.k} above cap {max_locality}")
    dim = 2 ** t.k
    proj = np.zeros((dim, dim))
    for sub in t.subsets:
        idx = np.array([to_int(s) for s in sub])
        proj[np.ix_(idx, idx)] = 1.0 / len(sub)
    return np.eye(dim) - proj


def hamiltonian_sparse(h: Hamiltonian) -> sp.csr_matrix:
    """``(1/m) sum_i H_i`` as a sparse matrix built from the subset structure."""
    n = h.n
    dim = 2 ** n
    rows, cols, vals = [np.arange(dim)], [np.arange(dim)], [np.full(dim, float(h.m))]
    xs = np.arange(dim, dtype=np.int64)
    for t in h.terms:
        shifts = np.array([n - 1 - q for q in t.qubits], dtype=np.int64)
        mask = int(sum(1 << int(s) for s in shifts))
        rest = xs[(xs & mask) == 0]
        for sub in t.subsets:
            pats = [_scatter(to_int(s), shifts) for s in sub]
            w = 1.0 / len(sub)
            for a, b in itertools.product(pats, repeat=2):
                rows.append(rest | a)
                cols.append(rest | b)
                vals.append(np.full(rest.size, -w))
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim))
    return (mat.tocsr() / h.m).tocsr()


def _scatter(local: int, shifts: np.ndarray) -> int:
    k = len(shifts)
    out = 0
    for pos, s in enumerate(shifts):
        if (local >> (k - 1 - pos)) & 1:
            out |= 1 << int(s)
    return out


def hamiltonian_matrix(h: Hamiltonian, dense_cap: int = DENSE_CAP) -> np.ndarray:
    if h.n > dense_cap:
        raise CapacityError(f"n={h.n} above dense cap {dense_cap}")
    return hamiltonian_sparse(h).toarray()


# -- generators -------------------------------------------------------------

def gen_hypercube(n: int) -> Hamiltonian:
    """One ``I - |+><+|`` term per qubit; groundstate ``|+>^n``."""
    if n < 1:
        raise ValueError("n must be positive")
    return Hamiltonian(n, [LocalTerm((q,), [("0", "1")]) for q in range(n)])


def gen_ghz_chain(n: int) -> Hamiltonian:
    """Agreement projectors on neighbouring pairs; groundspace spanned by 0^n and 1^n."""
    if n < 2:
        raise ValueError("ghz chain needs n >= 2")
    return Hamiltonian(n, [LocalTerm((q, q + 1), [("00",), ("11",)]) for q in range(n - 1)])


def gen_leaky_chain(n: int, leak: bool = True) -> Hamiltonian:
    """Unary counter ``1^t 0^(n-t)`` with nearest-neighbour increments.

    Without the leak the uniform superposition over the n+1 counter states is a
    zero-energy state.  With ``leak=True`` the all-ones string is made bad, which
    leaves a small but non-zero ground energy (roughly ``1/(m n^2)``).
    """
    if n < 2:
        raise ValueError("chain needs n >= 2")
    terms = [LocalTerm((q, q + 1), [("00",), ("10",), ("11",)]) for q in range(n - 1)]
    terms.append(LocalTerm((0, 1), [("00", "10"), ("01",), ("11",)]))
    for t in range(1, n - 1):
        singles = [(p,) for p in all_strings(3) if p not in ("100", "110")]
        terms.append(LocalTerm((t - 1, t, t + 1), [("100", "110")] + singles))
    terms.append(LocalTerm((n - 2, n - 1), [("10", "11"), ("00",), ("01",)]))
    if leak:
        terms.append(LocalTerm((n - 1,), [("0",)]))
    return Hamiltonian(n, terms)


def _bell_numbers(upto: int) -> list[int]:
    bell = [1]
    for size in range(1, upto + 1):
        bell.append(sum(math.comb(size - 1, j) * bell[size - 1 - j] for j in range(size)))
    return bell


def _uniform_set_partition(items: list, rnd: random.Random) -> list[list]:
    """Uniformly random set partition (each of the Bell(N) partitions equally likely)."""
    bell = _bell_numbers(len(items))
    items = list(items)
    blocks = []
    while items:
        first, rest = items[0], items[1:]
        size = len(rest)
        r = rnd.randrange(bell[size + 1])
        j = 0
        while True:
            w = math.comb(size, j) * bell[size - j]
            if r < w:
                break
            r -= w
            j += 1
        mates = rnd.sample(rest, j)
        blocks.append([first] + mates)
        items = [x for x in rest if x not in mates]
    return blocks


def _random_term(n, k, rng: np.random.Generator, full_cover) -> LocalTerm:
    qubits = tuple(int(q) for q in rng.choice(n, size=k, replace=False))
    rnd = random.Random(int(rng.integers(2 ** 63)))
    patterns = all_strings(k)
    if full_cover:
        blocks = _uniform_set_partition(patterns, rnd)
    else:
        # the block holding the marker is the set of uncovered (bad) patterns
        blocks = [b for b in _uniform_set_partition(patterns + [None], rnd) if None not in b]
    blocks = sorted((sorted(b) for b in blocks), key=lambda b: b[0])
    return LocalTerm(qubits, blocks)


def gen_random(n: int, k: int, m: int, seed=None, full_cover: bool = False,
               max_locality: int = DEFAULT_MAX_LOCALITY) -> Hamiltonian:
    """Random instance with uniformly sampled disjoint subset families per term.

    With ``full_cover`` every local pattern lies in some subset, so the
    instance has no bad strings.
    """
    if min(n, k, m) < 1 or k > n:
        raise ValueError("need 1 <= k <= n and m >= 1")
    if k > max_locality:
        raise CapacityError(f"k={k} above cap {max_locality}")
    rng = np.random.default_rng(seed)
    return Hamiltonian(n, [_random_term(n, k, rng, full_cover) for _ in range(m)])


def gen_frustrated(n: int, k: int, m: int, seed=None, min_energy: float = 0.05,
                   max_attempts: int = 1000) -> Hamiltonian:
    """Rejection-sample :func:`gen_random` until the ground energy is at least ``min_energy``."""
    from .spectral import ground_energy

    rng = np.random.default_rng(seed)
    method = "dense" if n <= 10 else "power"
    for _ in range(max_attempts):
        h = gen_random(n, k, m, rng)
        if ground_energy(h, method=method).ground_energy >= min_energy:
            return h
    raise RuntimeError(
        f"no instance with ground energy >= {min_energy} after {max_attempts} attempts")


# -- serialization ----------------------------------------------------------

def to_dict(h: Hamiltonian) -> dict:
    return {
        "n": h.n,
        "terms": [{"qubits": list(t.qubits), "subsets": [list(s) for s in t.subsets]}
                  for t in h.terms],
    }


def dumps(h: Hamiltonian, indent=None) -> str:
    return json.dumps(to_dict(h), indent=indent)


def dump(h: Hamiltonian, path) -> None:
    Path(path).write_text(dumps(h, indent=1) + "\n")


def _expect(cond, message, path):
    if not cond:
        raise InstanceParseError(message, path=path)


def from_dict(data) -> Hamiltonian:
    _expect(isinstance(data, dict), "top level must be an object", "$")
    extra = set(data) - {"n", "terms"}
    _expect(not extra, f"unknown fields {sorted(extra)}", "$")
    _expect("n" in data and "terms" in data, "fields 'n' and 'terms' are required", "$")
    n = data["n"]
    _expect(isinstance(n, int) and not isinstance(n, bool), "'n' must be an integer", "$.n")
    _expect(isinstance(data["terms"], list), "'terms' must be an array", "$.terms")
    terms = []
    for i, raw in enumerate(data["terms"]):
        where = f"$.terms[{i}]"
        _expect(isinstance(raw, dict), "term must be an object", where)
        extra = set(raw) - {"qubits", "subsets"}
        _expect(not extra, f"unknown fields {sorted(extra)}", where)
        _expect("qubits" in raw and "subsets" in raw, "'qubits' and 'subsets' required", where)
        qubits = raw["qubits"]
        _expect(isinstance(qubits, list) and all(
            isinstance(q, int) and not isinstance(q, bool) for q in qubits),
            "'qubits' must be an array of integers", where + ".qubits")
        subsets = raw["subsets"]
        _expect(isinstance(subsets, list) and all(
            isinstance(s, list) and all(isinstance(b, str) for b in s) for s in subsets),
            "'subsets' must be an array of arrays of strings", where + ".subsets")
        for j, sub in enumerate(subsets):
            for b in sub:
                _expect(_is_bitstring(b, len(qubits)),
                        f"{b!r} is not a {len(qubits)}-character 0/1 string",
                        f"{where}.subsets[{j}]")
        terms.append(LocalTerm(tuple(qubits), tuple(tuple(s) for s in subsets)))
    return Hamiltonian(n, terms)


def loads(text: str) -> Hamiltonian:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceParseError(exc.msg, line=exc.lineno, column=exc.colno) from exc
    return from_dict(data)


def load(path) -> Hamiltonian:
    return loads(Path(path).read_text())
