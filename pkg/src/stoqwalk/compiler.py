"""Stoquastic verifiers: simulation, MA embedding, and circuit-to-Hamiltonian compilation.

A verifier is a reversible circuit of NOT/CNOT/TOFFOLI gates on wires laid out
as ``input | witness | |0> ancillas | |+> ancillas``.  It accepts when wire 0
(the first wire) is found in ``|+>``.  Wires are 0-indexed and wire 0 is the
most significant bit of a basis index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CapacityError, InstanceParseError, LemmaViolation
from .instance import Hamiltonian, LocalTerm, all_strings, to_int

SIM_CAP = 20
GATE_ARITY = {"NOT": 1, "CNOT": 2, "TOFFOLI": 3}


@dataclass(frozen=True)
class Gate:
    kind: str
    wires: tuple[int, ...]  # controls first, target last

    def __post_init__(self):
        object.__setattr__(self, "wires", tuple(int(w) for w in self.wires))
        if self.kind not in GATE_ARITY:
            raise ValueError(f"unknown gate {self.kind!r}")
        if len(self.wires) != GATE_ARITY[self.kind]:
            raise ValueError(f"{self.kind} takes {GATE_ARITY[self.kind]} wires")
        if len(set(self.wires)) != len(self.wires):
            raise ValueError(f"{self.kind} wires collide: {self.wires}")

    def apply_local(self, bits: str) -> str:
        """Action on the gate's own wires, written in gate wire order."""
        if all(b == "1" for b in bits[:-1]):
            return bits[:-1] + ("0" if bits[-1] == "1" else "1")
        return bits

    def apply(self, x: np.ndarray, wires: int) -> np.ndarray:
        target = wires - 1 - self.wires[-1]
        fire = np.ones(x.shape, dtype=bool)
        for c in self.wires[:-1]:
            fire &= ((x >> (wires - 1 - c)) & 1).astype(bool)
        return x ^ (fire.astype(np.int64) << target)

    def to_json(self) -> list:
        return [self.kind, *self.wires]


@dataclass(frozen=True)
class ReversibleCircuit:
    wires: int
    gates: tuple[Gate, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.wires < 1:
            raise ValueError("circuit needs at least one wire")
        for g in self.gates:
            if max(g.wires) >= self.wires or min(g.wires) < 0:
                raise ValueError(f"gate {g.to_json()} addresses a wire outside [0,{self.wires})")

    def permutation(self, upto: int | None = None) -> np.ndarray:
        """Image of every basis index under the first ``upto`` gates."""
        x = np.arange(2 ** self.wires, dtype=np.int64)
        for g in self.gates[:upto]:
            x = g.apply(x, self.wires)
        return x


@dataclass(frozen=True)
class StoqVerifier:
    n: int
    n_w: int
    n_0: int
    n_plus: int
    circuit: ReversibleCircuit

    def __post_init__(self):
        if min(self.n, self.n_w, self.n_0, self.n_plus) < 0:
            raise ValueError("register sizes must be non-negative")
        if self.circuit.wires != self.wires:
            raise ValueError(
                f"circuit has {self.circuit.wires} wires, registers need {self.wires}")

    @property
    def wires(self) -> int:
        return self.n + self.n_w + self.n_0 + self.n_plus

    @property
    def L(self) -> int:
        return len(self.circuit.gates)

    def input_wires(self) -> range:
        return range(0, self.n)

    def witness_wires(self) -> range:
        return range(self.n, self.n + self.n_w)

    def zero_wires(self) -> range:
        return range(self.n + self.n_w, self.n + self.n_w + self.n_0)

    def plus_wires(self) -> range:
        return range(self.wires - self.n_plus, self.wires)


# -- simulation ---------------------------------------------------------------

_PLUS = np.array([1.0, 1.0]) / np.sqrt(2.0)


def _check_input(v: StoqVerifier, x: str):
    if len(x) != v.n or set(x) - {"0", "1"}:
        raise ValueError(f"input must be a {v.n}-bit string, got {x!r}")
    if v.wires > SIM_CAP:
        raise CapacityError(f"{v.wires} wires above simulation cap {SIM_CAP}")


def input_state(v: StoqVerifier, x: str, witness) -> np.ndarray:
    """``|x> (x) |witness> (x) |0...0> (x) |+...+>``."""
    _check_input(v, x)
    witness = np.asarray(witness)
    if witness.shape != (2 ** v.n_w,):
        raise ValueError(f"witness has shape {witness.shape}, expected ({2 ** v.n_w},)")
    if abs(np.linalg.norm(witness) - 1.0) > 1e-9:
        raise ValueError("witness is not normalized")
    state = np.zeros(2 ** v.n, dtype=witness.dtype)
    state[to_int(x) if v.n else 0] = 1.0
    state = np.kron(state, witness)
    zeros = np.zeros(2 ** v.n_0)
    zeros[0] = 1.0
    state = np.kron(state, zeros)
    for _ in range(v.n_plus):
        state = np.kron(state, _PLUS)
    return state


def run_circuit(circuit: ReversibleCircuit, state: np.ndarray, upto: int | None = None) -> np.ndarray:
    out = np.zeros_like(state)
    out[circuit.permutation(upto)] = state
    return out


def plus_amplitudes(state: np.ndarray) -> np.ndarray:
    """``(<+| (x) I) state`` for a state whose first wire is the output."""
    halves = state.reshape(2, -1)
    return (halves[0] + halves[1]) / np.sqrt(2.0)


def acceptance_probability(v: StoqVerifier, x: str, witness) -> float:
    final = run_circuit(v.circuit, input_state(v, x, witness))
    return float(np.sum(np.abs(plus_amplitudes(final)) ** 2))


def acceptance_operator(v: StoqVerifier, x: str) -> np.ndarray:
    """``A[a, b] = <a_in| U^T Pi_out U |b_in>`` over witness basis states."""
    _check_input(v, x)
    dim = 2 ** v.n_w
    if dim * 2 ** v.wires > 2 ** 26:
        raise CapacityError("acceptance operator too large")
    rows = []
    for a in range(dim):
        basis = np.zeros(dim)
        basis[a] = 1.0
        rows.append(plus_amplitudes(run_circuit(v.circuit, input_state(v, x, basis))))
    psi = np.array(rows)
    return psi @ psi.T


def optimal_acceptance(v: StoqVerifier, x: str) -> tuple[float, np.ndarray]:
    """Largest acceptance probability over witnesses, with a maximizing witness."""
    if v.n_w > 12:
        raise CapacityError("optimal_acceptance limited to 12 witness qubits")
    evals, evecs = np.linalg.eigh(acceptance_operator(v, x))
    w = evecs[:, -1]
    if w.sum() < 0:
        w = -w
    return float(min(max(evals[-1], 0.0), 1.0)), w


def random_nonneg_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    kind = rng.integers(4)
    if kind == 0:
        v = np.abs(rng.standard_normal(dim))
    elif kind == 1:
        v = rng.random(dim)
    elif kind == 2:
        v = rng.random(dim) * (rng.random(dim) < 0.3)
    else:
        v = np.zeros(dim)
        v[rng.integers(dim)] = 1.0
    if not v.any():
        v[rng.integers(dim)] = 1.0
    return v / np.linalg.norm(v)


def check_nonneg_floor(v: StoqVerifier, x: str, trials: int = 100, seed: int = 0) -> float:
    """Smallest acceptance probability seen over random non-negative witnesses.

    Raises :class:`LemmaViolation` if it drops below one half.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    rng = np.random.default_rng(seed)
    dim = 2 ** v.n_w
    lowest = 1.0
    for _ in range(trials):
        lowest = min(lowest, acceptance_probability(v, x, random_nonneg_state(dim, rng)))
    if lowest < 0.5 - 1e-9:
        raise LemmaViolation("non-negative witness accepted with probability below 1/2",
                             minimum=lowest)
    return lowest


# -- MA embedding ---------------------------------------------------------------

@dataclass(frozen=True)
class MALayout:
    """Register sizes of a coherent MA circuit and the wire holding its decision."""
    n: int
    n_w: int
    n_0: int
    n_plus: int
    output: int


def _swap(a: int, b: int) -> list[Gate]:
    return [Gate("CNOT", (a, b)), Gate("CNOT", (b, a)), Gate("CNOT", (a, b))]


def _cswap(c: int, a: int, b: int) -> list[Gate]:
    return [Gate("TOFFOLI", (c, a, b)), Gate("TOFFOLI", (c, b, a)), Gate("TOFFOLI", (c, a, b))]


def ma_to_stoqma(ma_circuit: ReversibleCircuit, layout: MALayout) -> StoqVerifier:
    """Wrap an MA circuit so its decision swaps a fresh ``|0>`` with a fresh ``|+>``.

    The fresh ``|0>`` is appended to the zero register and the fresh ``|+>`` to
    the plus register; after the controlled swap the fresh ``|0>`` wire is
    swapped onto wire 0, the measured output.
    """
    W = layout.n + layout.n_w + layout.n_0 + layout.n_plus
    if W != ma_circuit.wires:
        raise ValueError(f"layout covers {W} wires, circuit has {ma_circuit.wires}")
    if not 0 <= layout.output < W:
        raise ValueError("output wire outside the circuit")
    fresh0 = layout.n + layout.n_w + layout.n_0

    def shift(w):
        return w + 1 if w >= fresh0 else w

    fresh_plus = W + 1
    gates = [Gate(g.kind, tuple(shift(w) for w in g.wires)) for g in ma_circuit.gates]
    gates += _cswap(shift(layout.output), fresh0, fresh_plus)
    if fresh0 != 0:
        gates += _swap(0, fresh0)
    return StoqVerifier(layout.n, layout.n_w, layout.n_0 + 1, layout.n_plus + 1,
                        ReversibleCircuit(W + 2, gates))


# -- Clock compilation -----------------------------------------------------------

def _clock_patterns(t: int, L: int, clock: list[int]):
    """Clock qubits checked by gate ``t`` (1-based) and their patterns at times t-1, t."""
    if L == 1:
        return [clock[0]], "0", "1"
    if t == 1:
        return [clock[0], clock[1]], "00", "10"
    if t == L:
        return [clock[L - 2], clock[L - 1]], "10", "11"
    return [clock[t - 2], clock[t - 1], clock[t]], "100", "110"


def _singletons_except(patterns, excluded):
    return [(p,) for p in patterns if p not in excluded]


def kitaev_compile(v: StoqVerifier, x: str | None = None) -> Hamiltonian:
    """Projection uniform stoquastic Hamiltonian whose history states encode ``v`` on ``x``.

    Qubits ``0..W-1`` are the circuit wires, ``W..W+L-1`` a unary clock where
    time ``t`` reads ``1^t 0^(L-t)``.  Terms: clock validity, input checks at
    time 0, one propagation term per gate, and ``|-><-|`` on wire 0 at time L.
    """
    x = "0" * v.n if x is None else x
    if len(x) != v.n:
        raise ValueError(f"input must have {v.n} bits")
    L = v.L
    if L < 1:
        raise ValueError("compilation needs at least one gate")
    W = v.wires
    clock = list(range(W, W + L))
    terms = []
    for j in range(L - 1):
        terms.append(LocalTerm((clock[j], clock[j + 1]), [("00",), ("10",), ("11",)]))

    two = all_strings(2)
    for w in v.input_wires():
        wrong = "10" if x[w] == "0" else "00"
        terms.append(LocalTerm((w, clock[0]), _singletons_except(two, {wrong})))
    for w in v.zero_wires():
        terms.append(LocalTerm((w, clock[0]), _singletons_except(two, {"10"})))
    for w in v.plus_wires():
        terms.append(LocalTerm((w, clock[0]), [("00", "10"), ("01",), ("11",)]))

    for t, gate in enumerate(v.circuit.gates, start=1):
        cq, before, after = _clock_patterns(t, L, clock)
        d = len(gate.wires)
        subsets = []
        for z in all_strings(d):
            subsets.append((before + z, after + gate.apply_local(z)))
        for cp in all_strings(len(cq)):
            if cp not in (before, after):
                subsets.extend((cp + z,) for z in all_strings(d))
        terms.append(LocalTerm(tuple(cq) + gate.wires, subsets))

    terms.append(LocalTerm((0, clock[-1]), [("01", "11"), ("00",), ("10",)]))
    return Hamiltonian(W + L, terms)


def clock_index(t: int, L: int) -> int:
    return ((1 << t) - 1) << (L - t)


def history_state(v: StoqVerifier, x: str, witness) -> np.ndarray:
    """``(L+1)^(-1/2) sum_t |U_t...U_1 psi_in> (x) |t>`` in the compiled qubit order."""
    L = v.L
    if v.wires + L > SIM_CAP:
        raise CapacityError("history state above simulation cap")
    psi_in = input_state(v, x, witness)
    eta = np.zeros(2 ** (v.wires + L), dtype=psi_in.dtype)
    data_idx = np.arange(2 ** v.wires, dtype=np.int64) << L
    state = psi_in
    for t in range(L + 1):
        if t > 0:
            g = v.circuit.gates[t - 1]
            nxt = np.zeros_like(state)
            nxt[g.apply(np.arange(state.size, dtype=np.int64), v.wires)] = state
            state = nxt
        eta[data_idx | clock_index(t, L)] = state
    return eta / np.sqrt(L + 1)


# -- circuit files ----------------------------------------------------------------

def verifier_to_dict(v: StoqVerifier) -> dict:
    return {"wires": v.wires,
            "registers": {"n": v.n, "n_w": v.n_w, "n_0": v.n_0, "n_plus": v.n_plus},
            "gates": [g.to_json() for g in v.circuit.gates]}


def _need(cond, message, path):
    if not cond:
        raise InstanceParseError(message, path=path)


def verifier_from_dict(data) -> StoqVerifier:
    _need(isinstance(data, dict), "top level must be an object", "$")
    extra = set(data) - {"wires", "registers", "gates"}
    _need(not extra, f"unknown fields {sorted(extra)}", "$")
    _need({"wires", "registers", "gates"} <= set(data), "wires, registers, gates required", "$")
    regs = data["registers"]
    _need(isinstance(regs, dict) and set(regs) == {"n", "n_w", "n_0", "n_plus"}
          and all(isinstance(regs[r], int) for r in regs),
          "registers must hold integer n, n_w, n_0, n_plus", "$.registers")
    _need(isinstance(data["gates"], list), "gates must be an array", "$.gates")
    gates = []
    for i, raw in enumerate(data["gates"]):
        where = f"$.gates[{i}]"
        _need(isinstance(raw, list) and raw and raw[0] in GATE_ARITY
              and len(raw) == GATE_ARITY[raw[0]] + 1
              and all(isinstance(w, int) for w in raw[1:]),
              'gate must look like ["NOT", t], ["CNOT", c, t] or ["TOFFOLI", c1, c2, t]', where)
        try:
            gates.append(Gate(raw[0], tuple(raw[1:])))
        except ValueError as exc:
            raise InstanceParseError(str(exc), path=where) from exc
    try:
        circuit = ReversibleCircuit(data["wires"], gates)
        return StoqVerifier(regs["n"], regs["n_w"], regs["n_0"], regs["n_plus"], circuit)
    except (TypeError, ValueError) as exc:
        raise InstanceParseError(str(exc), path="$") from exc


def load_verifier(path) -> StoqVerifier:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceParseError(exc.msg, line=exc.lineno, column=exc.colno) from exc
    return verifier_from_dict(data)


def dump_verifier(v: StoqVerifier, path) -> None:
    Path(path).write_text(json.dumps(verifier_to_dict(v), indent=1) + "\n")


def random_verifier(rng: np.random.Generator, max_wires: int = 10, max_gates: int = 8,
                    min_wires: int = 1) -> StoqVerifier:
    """Random register layout and NOT/CNOT/TOFFOLI sequence."""
    W = int(rng.integers(min_wires, max_wires + 1))
    cuts = np.sort(rng.integers(0, W + 1, size=3))
    n, n_w, n_0 = int(cuts[0]), int(cuts[1] - cuts[0]), int(cuts[2] - cuts[1])
    n_plus = W - n - n_w - n_0
    gates = []
    for _ in range(int(rng.integers(1, max_gates + 1))):
        kinds = [k for k, a in GATE_ARITY.items() if a <= W]
        kind = kinds[int(rng.integers(len(kinds)))]
        wires = tuple(int(w) for w in rng.choice(W, size=GATE_ARITY[kind], replace=False))
        gates.append(Gate(kind, wires))
    return StoqVerifier(n, n_w, n_0, n_plus, ReversibleCircuit(W, gates))
