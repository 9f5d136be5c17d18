"""``stoqwalk`` command line.

Exit codes: 0 success, 1 a check failed, 2 usage or parse error.  Every
subcommand takes ``--json`` for a machine-readable report; the JSON is
deterministic for a fixed seed (wall-clock time goes to stderr only).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import compiler as cc
from . import instance as inst
from . import suite as battery
from .errors import CalibrationError, CapacityError, InstanceParseError, LemmaViolation, StoqwalkError
from .expansion import boundary_energy_check, find_weak_set
from .graph import bad_strings, bad_terms, cut_stats, is_bad, neighbors
from .spectral import ground_energy
from .walk import (WalkKernel, WalkParams, default_T, first_bad_times, verify,
                   Estimate)

OK, CHECK_FAILED, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def default_seed() -> int:
    raw = os.environ.get("STOQWALK_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"STOQWALK_SEED must be an integer, got {raw!r}") from None


def _bits(n: int, x: str, what: str) -> str:
    if len(x) != n or set(x) - {"0", "1"}:
        raise UsageError(f"{what} must be a {n}-bit 0/1 string, got {x!r}")
    return x


def _load(path) -> inst.Hamiltonian:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return inst.loads(text)
    except InstanceParseError as exc:
        exc.file = str(path)
        raise


def _load_verifier(path) -> cc.StoqVerifier:
    if not Path(path).is_file():
        raise UsageError(f"cannot read {path}")
    try:
        return cc.load_verifier(path)
    except InstanceParseError as exc:
        exc.file = str(path)
        raise


def _report(command, args, h=None, **body) -> dict:
    out = {"command": command, "seed": getattr(args, "seed", None)}
    if h is not None:
        out["instance_digest"] = h.digest()
    out.update(body)
    return out


# -- subcommands ------------------------------------------------------------------

def cmd_validate(args):
    h = _load(args.file)
    report = inst.validate(h, args.max_locality)
    lines = [str(v) for v in report] or [f"valid: n={h.n} m={h.m} k={h.k}"]
    return (CHECK_FAILED if report else OK), _report(
        "validate", args, h, valid=not report, n=h.n, m=h.m, k=h.k,
        violations=[{"term": v.term, "code": v.code, "message": v.message} for v in report]), lines


def cmd_gen(args):
    fam = args.family
    if fam == "hypercube":
        h = inst.gen_hypercube(args.n)
    elif fam == "ghz":
        h = inst.gen_ghz_chain(args.n)
    elif fam == "chain":
        h = inst.gen_leaky_chain(args.n, leak=not args.no_leak)
    elif fam == "random":
        h = inst.gen_random(args.n, args.k, args.m, args.seed, full_cover=args.full_cover)
    else:
        h = inst.gen_frustrated(args.n, args.k, args.m, args.seed, min_energy=args.min_energy)
    text = inst.dumps(h, indent=1) + "\n"
    if args.output:
        Path(args.output).write_text(text)
        lines = [f"wrote {args.output}: n={h.n} m={h.m} k={h.k}"]
    else:
        lines = [text.rstrip("\n")]
    return OK, _report("gen", args, h, family=fam, n=h.n, m=h.m, k=h.k,
                       output=args.output), lines


def cmd_spectrum(args):
    h = _load(args.file)
    spec = ground_energy(h, args.method)
    body = spec.summary()
    lines = [f"ground_energy {spec.ground_energy:.12g}", f"gap {spec.gap:.12g}",
             f"method {spec.method}", f"residual {spec.residual:.3g}"]
    return OK, _report("spectrum", args, h, **body), lines


def cmd_graph(args):
    h = _load(args.file)
    if args.graph_cmd == "neighbors":
        x = _bits(h.n, args.x, "x")
        nb = neighbors(h, x)
        lines = [f"{y} {mult}" for y, mult in nb.entries.items()] + [f"degree {nb.degree}"]
        return OK, _report("graph neighbors", args, h, x=x, degree=str(nb.degree), bad=is_bad(h, x),
                           neighbors={y: str(c) for y, c in nb.entries.items()}), lines
    if args.graph_cmd == "badness":
        if args.string is not None:
            x = _bits(h.n, args.string, "string")
            terms = bad_terms(h, x)
            lines = [f"{x} {'bad' if terms else 'good'}" + (f" terms={terms}" if terms else "")]
            return OK, _report("graph badness", args, h, string=x, bad=bool(terms),
                               terms=terms), lines
        if h.n > 20:
            raise CapacityError("--all enumerates 2^n strings; n must be at most 20")
        bad = bad_strings(h)
        return OK, _report("graph badness", args, h, count=len(bad), bad=bad), \
            bad + [f"{len(bad)} bad of {2 ** h.n}"]
    try:
        S = [line.strip() for line in Path(args.set).read_text().splitlines() if line.strip()]
    except OSError as exc:
        raise UsageError(f"cannot read {args.set}: {exc.strerror}") from None
    for x in S:
        _bits(h.n, x, "set member")
    cut = cut_stats(h, S)
    lines = [f"boundary {cut.boundary}", f"volume {cut.volume}",
             f"conductance {float(cut.conductance):.12g}"]
    return OK, _report("graph cut", args, h, size=len(set(S)), boundary=str(cut.boundary),
                       volume=str(cut.volume), conductance=float(cut.conductance),
                       conductance_exact=str(cut.conductance)), lines


def cmd_verify(args):
    h = _load(args.file)
    x0 = _bits(h.n, args.start, "--start")
    T = args.steps if args.steps is not None else default_T(h)
    params = WalkParams(T, args.lazy, args.trials, args.seed)
    kernel = WalkKernel(h)
    starts = np.full(args.trials, inst.to_int(x0), dtype=np.int64)
    times = first_bad_times(kernel, starts, T, args.lazy, args.seed, args.threads)
    rejected = int((times >= 0).sum())
    accept = Estimate.from_counts(args.trials - rejected, args.trials)
    if args.trace:
        trace = verify(h, x0, params, 0, kernel)
        with open(args.trace, "w") as fh:
            for rec in trace.jsonl_records():
                fh.write(json.dumps(rec) + "\n")
    lines = [f"acceptance rate {accept.mean:.6g} ({args.trials - rejected}/{args.trials}) "
             f"95% CI [{accept.low:.4g}, {accept.high:.4g}]", f"T {T} laziness {args.lazy}"]
    return OK, _report("verify", args, h, parameters={"start": x0, "T": T, "trials": args.trials,
                                                      "laziness": args.lazy},
                       acceptance=accept.as_dict()), lines


def cmd_expansion(args):
    h = _load(args.file)
    if args.exp_cmd == "nice-set":
        try:
            res = find_weak_set(h, args.epsilon)
        except LemmaViolation as exc:
            return CHECK_FAILED, _report("expansion nice-set", args, h, epsilon=args.epsilon,
                                         check="fail", error=str(exc),
                                         details={k: str(v) for k, v in exc.details.items()}), \
                [f"FAIL {exc}"]
        body = res.report()
        status = "vacuous" if res.vacuous else "pass"
        truncation = "pass" if res.bound_holds else "fail"
        report = _report("expansion nice-set", args, h, epsilon=args.epsilon,
                         checks={"weak_set": status, "truncation_bound": truncation,
                                 "triangle_bound": "pass"},
                         set=list(res.S), **body)
        if args.report:
            Path(args.report).write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
        lines = [f"|S| {len(res.S)}", f"boundary {res.cut.boundary} (epsilon' |S| = "
                 f"{res.epsilon_prime * len(res.S):.6g}) {status}",
                 f"truncated frustration {res.frustration:.6g} bound {res.bound:.6g} {truncation}",
                 f"triangle bound {res.triangle_bound:.6g}"]
        code = CHECK_FAILED if args.strict and not res.bound_holds else OK
        return code, report, lines
    rng = np.random.default_rng(args.seed)
    worst, failures = np.inf, 0
    for _ in range(args.trials):
        psi = battery._random_support_state(h, rng)
        chk = boundary_energy_check(h, psi)
        worst = min(worst, chk.lhs - chk.rhs)
        failures += not chk.holds
    lines = [f"{args.trials - failures}/{args.trials} states satisfy the inequality",
             f"min slack {worst:.6g}"]
    return (CHECK_FAILED if failures else OK), _report(
        "expansion check-lemma52", args, h, trials=args.trials, failures=failures,
        min_slack=worst, check="fail" if failures else "pass"), lines


def cmd_compile(args):
    v = _load_verifier(args.circuit)
    x = _bits(v.n, args.input if args.input is not None else "0" * v.n, "--input")
    h = cc.kitaev_compile(v, x)
    inst.dump(h, args.output)
    lines = [f"wrote {args.output}: n={h.n} m={h.m} k={h.k} (clock {v.L} qubits)"]
    return OK, _report("compile", args, h, n=h.n, m=h.m, k=h.k, clock=v.L, input=x,
                       output=args.output), lines


def cmd_simulate(args):
    v = _load_verifier(args.circuit)
    x = _bits(v.n, args.input, "--input")
    if args.optimal_witness:
        acc, w = cc.optimal_acceptance(v, x)
        body = {"acceptance": acc, "witness": [float(a) for a in w]}
    else:
        wbits = _bits(v.n_w, args.witness if args.witness is not None else "0" * v.n_w,
                      "--witness")
        w = np.zeros(2 ** v.n_w)
        w[inst.to_int(wbits) if v.n_w else 0] = 1.0
        acc = cc.acceptance_probability(v, x, w)
        body = {"acceptance": acc, "witness": wbits}
    lines = [f"acceptance {acc:.12g}"]
    return OK, _report("simulate", args, input=x, **body), lines


def cmd_suite(args):
    only = None
    if args.only:
        try:
            only = sorted({int(c) for c in args.only.split(",")})
        except ValueError:
            raise UsageError("--only takes a comma-separated list of criterion numbers") from None
        if not set(only) <= set(battery.CRITERIA):
            raise UsageError(f"criteria are numbered 1..{len(battery.CRITERIA)}")
    results = battery.run_suite(args.seed, args.quick, args.threads, only)
    if args.csv:
        Path(args.csv).write_text(battery.suite_csv(results))
    if args.json_out:
        Path(args.json_out).write_text(battery.suite_json(results, args.seed, args.quick))
    if args.curve:
        for r in results:
            if r.id == 2:
                with open(args.curve, "w", newline="") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(["T", "min_rejection", "mean_rejection"])
                    for row in r.detail["curve"]:
                        w.writerow([row["T"], row["min_rejection"], row["mean_rejection"]])
    passed = all(r.passed for r in results)
    lines = [r.line() for r in results] + [
        f"{sum(r.passed for r in results)}/{len(results)} criteria passed"]
    report = json.loads(battery.suite_json(results, args.seed, args.quick))
    report["command"] = "suite"
    return (OK if passed else CHECK_FAILED), report, lines


# -- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="print a JSON report")
    common.add_argument("--seed", type=int, default=None,
                        help="RNG seed (default: $STOQWALK_SEED or 0)")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads for trials (default: all cores)")

    p = argparse.ArgumentParser(prog="stoqwalk", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    s = sub.add_parser("validate", parents=[common], help="check an instance file")
    s.add_argument("file")
    s.add_argument("--max-locality", type=int, default=inst.DEFAULT_MAX_LOCALITY)
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("gen", parents=[common], help="generate an instance")
    s.add_argument("--family", required=True,
                   choices=["hypercube", "ghz", "random", "frustrated", "chain"])
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--k", type=int, default=2)
    s.add_argument("--m", type=int, default=None)
    s.add_argument("--full-cover", action="store_true", help="random: no bad strings")
    s.add_argument("--min-energy", type=float, default=0.05, help="frustrated: energy floor")
    s.add_argument("--no-leak", action="store_true", help="chain: frustration-free variant")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_gen)

    s = sub.add_parser("spectrum", parents=[common], help="ground energy and gap")
    s.add_argument("file")
    s.add_argument("--method", choices=["dense", "power"], default="dense")
    s.set_defaults(func=cmd_spectrum)

    s = sub.add_parser("graph", help="configuration graph queries")
    gsub = s.add_subparsers(dest="graph_cmd", required=True, metavar="QUERY")
    g = gsub.add_parser("neighbors", parents=[common])
    g.add_argument("file")
    g.add_argument("x")
    g = gsub.add_parser("badness", parents=[common])
    g.add_argument("file")
    mode = g.add_mutually_exclusive_group()
    mode.add_argument("--all", action="store_true", default=True)
    mode.add_argument("--string")
    g = gsub.add_parser("cut", parents=[common])
    g.add_argument("file")
    g.add_argument("--set", required=True, help="file with one string per line")
    s.set_defaults(func=cmd_graph)

    s = sub.add_parser("verify", parents=[common], help="run the random-walk verifier")
    s.add_argument("file")
    s.add_argument("--start", required=True)
    s.add_argument("--steps", type=int, default=None, help="T (default 100 n m)")
    s.add_argument("--trials", type=int, default=1000)
    s.add_argument("--lazy", type=float, default=0.0)
    s.add_argument("--trace", help="write one walk as JSON lines")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("expansion", help="weakly expanding sets and boundary energy")
    esub = s.add_subparsers(dest="exp_cmd", required=True, metavar="CHECK")
    e = esub.add_parser("nice-set", parents=[common])
    e.add_argument("file")
    e.add_argument("--epsilon", type=float, required=True)
    e.add_argument("--report")
    e.add_argument("--strict", action="store_true",
                   help="exit 1 when the truncation bound is exceeded")
    e = esub.add_parser("check-lemma52", parents=[common])
    e.add_argument("file")
    e.add_argument("--trials", type=int, default=100)
    s.set_defaults(func=cmd_expansion)

    s = sub.add_parser("compile", parents=[common], help="verifier circuit to Hamiltonian")
    s.add_argument("circuit")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--input", help="input bits (default all zeros)")
    s.set_defaults(func=cmd_compile)

    s = sub.add_parser("simulate", parents=[common], help="acceptance probability of a verifier")
    s.add_argument("circuit")
    s.add_argument("--input", required=True)
    s.add_argument("--witness", help="classical witness bits (default all zeros)")
    s.add_argument("--optimal-witness", action="store_true")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("suite", parents=[common], help="run the acceptance battery")
    s.add_argument("--quick", action="store_true")
    s.add_argument("--only", help="comma-separated criterion numbers")
    s.add_argument("--csv", help="summary table as CSV")
    s.add_argument("--json-out", help="summary as JSON")
    s.add_argument("--curve", help="rejection-vs-T calibration curve as CSV")
    s.set_defaults(func=cmd_suite)
    return p


def _print_error(message: str) -> None:
    print(f"stoqwalk: error: {message}", file=sys.stderr)


def run_subcommand(argv=None) -> tuple[int, dict | None]:
    """Run one command; returns ``(exit code, report)``."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0), None
    start = time.perf_counter()
    try:
        if args.seed is None:
            args.seed = default_seed()
        if args.command == "gen" and args.m is None:
            args.m = args.n
        code, report, lines = args.func(args)
    except UsageError as exc:
        _print_error(str(exc))
        return USAGE, None
    except InstanceParseError as exc:
        where = getattr(exc, "file", "<input>")
        if exc.line is not None:
            where += f":{exc.line}:{exc.column}"
        _print_error(f"{where}: {exc}")
        return USAGE, {"error": "parse", "file": getattr(exc, "file", None),
                       "line": exc.line, "column": exc.column, "path": exc.path,
                       "message": str(exc)}
    except (CapacityError, CalibrationError, LemmaViolation, StoqwalkError) as exc:
        _print_error(str(exc))
        return CHECK_FAILED, {"error": type(exc).__name__, "message": str(exc)}
    except ValueError as exc:
        _print_error(str(exc))
        return USAGE, None
    if args.json:
        print(json.dumps(report, indent=1, sort_keys=True))
    else:
        for line in lines:
            print(line)
    print(f"elapsed {time.perf_counter() - start:.3f}s", file=sys.stderr)
    return code, report


def main(argv=None) -> int:
    code, _ = run_subcommand(argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
