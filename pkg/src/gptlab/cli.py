"""Command-line entry point.

Exit codes: 0 ok, 2 parse/validation/configuration error, 3 guard exceeded,
4 bound violation or failed verification.
"""

from __future__ import annotations

import argparse
import itertools
import json
import string
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from . import bounds, dsl, principles, protocols, scalars, theories
from .model import (GPTError, GuardError, GVector, OUTCOME_GUARD, PostSelectionError, WiringError,
                    accept_functional, accept_probability, evaluate_closed, post_select, tensor_all)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_GUARD = 3
EXIT_VIOLATION = 4


class CLIError(Exception):
    def __init__(self, message: str, code: int = EXIT_INVALID):
        super().__init__(message)
        self.code = code


def fixture_path(name: str) -> Path:
    return Path(str(resources.files("gptlab") / "fixtures" / name))


# ---------------------------------------------------------------- helpers

def _config(args) -> dict:
    return {"mode": args.mode, "seed": args.seed, "tol": args.tol, "guard": args.guard}


def _theory_from_arg(spec: str, mode: str) -> theories.TheorySpec:
    path = Path(spec)
    if path.suffix == ".json" or path.exists():
        try:
            return theories.from_json(path.read_text(encoding="utf-8"))
        except (OSError, ValueError, KeyError) as exc:
            raise CLIError(f"cannot load theory {spec}: {exc}") from None
    try:
        return theories.builtin(spec, mode)
    except KeyError as exc:
        raise CLIError(str(exc.args[0])) from None


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CLIError(f"cannot read {path}: {exc.strerror}") from None


def _template(text: str, defines: dict[str, str]) -> str:
    fields = {f for _, f, _, _ in string.Formatter().parse(text) if f}
    missing = fields - set(defines)
    if missing:
        raise CLIError(f"template placeholders without a value: {sorted(missing)}")
    return text.format(**defines) if fields else text


def _parse_defines(items) -> dict[str, str]:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise CLIError(f"--define expects NAME=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _parse_sweeps(items) -> list[tuple[str, list[str]]]:
    out = []
    for item in items or []:
        if "=" not in item:
            raise CLIError(f"--sweep expects NAME=V1,V2,..., got {item!r}")
        k, v = item.split("=", 1)
        out.append((k.strip(), [x.strip() for x in v.split(",")]))
    return out


def _aux_state(spec: str, circuit, theory, mode) -> GVector:
    systems = circuit.aux_systems
    if spec == "mixed":
        parts = [GVector((s,), theories.completely_mixed_coords(theory, s.name)) for s in systems]
        return tensor_all(parts)
    if spec.startswith("pure:"):
        idx = [int(i) for i in spec[5:].split(",")]
        if len(idx) != len(systems):
            raise CLIError(f"pure: needs one index per aux system ({len(systems)})")
        return tensor_all([theory.system(s.name).states[i] for s, i in zip(systems, idx)])
    try:
        coords = scalars.array([c.strip() for c in spec.split(",")], mode)
        return GVector(systems, coords)
    except (ValueError, TypeError) as exc:
        raise CLIError(f"bad --aux value {spec!r}: {exc}") from None


def _outcome_str(z) -> str:
    return "".join(str(v) for v in z) if all(v < 10 for v in z) else ",".join(map(str, z))


# ---------------------------------------------------------------- commands

def cmd_simulate(args) -> tuple[dict, int]:
    text = _read(args.circuit)
    theory = _theory_from_arg(args.theory, args.mode) if args.theory else None
    defines = _parse_defines(args.define)
    sweeps = _parse_sweeps(args.sweep)
    runs = []
    combos = list(itertools.product(*[vals for _, vals in sweeps])) or [()]
    for combo in combos:
        env = dict(defines)
        env.update({k: v for (k, _), v in zip(sweeps, combo)})
        src = _template(text, env)
        ast = dsl.parse(src)
        circuit = dsl.validate(ast, theory, args.mode)
        th = theory or theories.builtin(ast.theory, args.mode)
        run = {"defines": env, "theory": th.name, "labels": list(circuit.labels)}
        if circuit.aux and not args.aux:
            run["accept_functional"] = scalars.fmt_all(accept_functional(circuit, args.guard).coords)
            run["aux_systems"] = [s.name for s in circuit.aux_systems]
            runs.append(run)
            continue
        closed = circuit.plugged(_aux_state(args.aux, circuit, th, th.mode)) if circuit.aux else circuit
        d = evaluate_closed(closed, args.guard)
        run["distribution"] = [{"outcome": _outcome_str(z), "p": scalars.fmt(p)} for z, p in d.items()]
        run["accept_probability"] = scalars.fmt(d.event(circuit.accept))
        if circuit.postselect is not None:
            try:
                cond, p_s = post_select(d, circuit.postselect)
                run["postselect"] = {"p_s": scalars.fmt(p_s),
                                     "accept_given_s": scalars.fmt(cond.event(circuit.accept)),
                                     "distribution": [{"outcome": _outcome_str(z), "p": scalars.fmt(p)}
                                                      for z, p in cond.items()]}
            except PostSelectionError as exc:
                run["postselect"] = {"p_s": "0", "error": str(exc)}
        if args.samples:
            from .model import sample
            draws = sample(d, args.seed, args.samples)
            run["samples"] = [_outcome_str(z) for z in draws]
        runs.append(run)
    return {"circuit": Path(args.circuit).name, "runs": runs}, EXIT_OK


def _advice_chunk(payload):
    n, bits, mode, inputs = payload
    f = theories.TruthTable(n, bits)
    state = theories.rho_f(f, mode) if n > 8 else None
    return [("".join(map(str, x)), f(x), protocols.advice_parity_eval(f, x, mode, state=state)) for x in inputs]


def cmd_advice_demo(args) -> tuple[dict, int]:
    n = args.n
    if not 1 <= n <= theories.MAX_PARTIES:
        raise CLIError(f"n must be in 1..{theories.MAX_PARTIES}", EXIT_GUARD)
    if args.f and args.f != "random":
        try:
            f = theories.TruthTable.parse(args.f, n)
        except ValueError as exc:
            raise CLIError(str(exc)) from None
        if f.n != n:
            raise CLIError(f"function {args.f!r} has arity {f.n}, not {n}")
    else:
        f = theories.TruthTable.random(n, np.random.Generator(np.random.PCG64(args.seed)))
    inputs = list(f.inputs())
    if args.jobs > 1 and len(inputs) > 1:
        chunks = [inputs[i::args.jobs] for i in range(args.jobs)]
        with ProcessPoolExecutor(args.jobs) as pool:
            parts = list(pool.map(_advice_chunk, [(n, f.bits, args.mode, c) for c in chunks]))
        merged = {row[0]: row for part in parts for row in part}
        rows = [merged["".join(map(str, x))] for x in inputs]
    else:
        rows = _advice_chunk((n, f.bits, args.mode, inputs))
    report = protocols.AdviceDemoReport(n, f.bits, tuple(rows))
    out = report.to_json()
    out["verdict"] = "exact match" if report.exact_match else "MISMATCH"
    return out, EXIT_OK if report.exact_match else EXIT_VIOLATION


def _d_rule(spec: str):
    if spec in (None, "", "ceil", "default"):
        return bounds.default_d_rule
    if spec == "n":
        return lambda n: n
    if spec.startswith("const:"):
        k = int(spec[6:])
        return lambda n: k
    raise CLIError(f"unknown --d-rule {spec!r} (use ceil, n or const:K)")


def _bound_one(payload):
    path, text, mode, rule, theory_arg = payload
    ast = dsl.parse(text)
    theory = _theory_from_arg(theory_arg, mode) if theory_arg else theories.builtin(ast.theory, mode)
    circuit = dsl.validate(ast, theory)
    rep = bounds.bound_report(circuit, theory, _d_rule(rule), experiment=Path(path).name, input=Path(path).stem)
    return rep.to_json()


def cmd_gma_bound(args) -> tuple[dict, int]:
    payloads = [(p, _read(p), args.mode, args.d_rule, args.theory) for p in args.circuits]
    _d_rule(args.d_rule)
    if args.jobs > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            reports = list(pool.map(_bound_one, payloads))
    else:
        reports = [_bound_one(p) for p in payloads]
    violated = [r["experiment"] for r in reports if r["classification"] == bounds.VIOLATION]
    out = {"reports": reports, "violations": violated}
    if violated:
        out["note"] = ("a violation means either a bug or a circuit whose aux register could not be "
                       "re-parametrised; see bound_holds and reparametrised per report")
    return out, EXIT_VIOLATION if violated else EXIT_OK


def cmd_verify(args) -> tuple[dict, int]:
    theory = _theory_from_arg(args.theory_json, args.mode)
    entries = principles.verify_theory(theory, args.depth)
    failed = [e["principle"] for e in entries if e["status"] == principles.FAIL]
    return {"theory": theory.name, "principles": entries, "failed": failed}, EXIT_VIOLATION if failed else EXIT_OK


def cmd_unbias(args) -> tuple[dict, int]:
    try:
        p = Fraction(args.p)
    except (ValueError, ZeroDivisionError):
        raise CLIError(f"bad probability {args.p!r}") from None
    if not 0 < p < 1:
        raise CLIError("p must lie strictly between 0 and 1")
    theory, y, e0 = protocols.biased_qubit(p, args.mode)
    rep = protocols.von_neumann_bit(theory, y, e0, args.n, args.seed)
    return rep.to_json(stream=args.stream), EXIT_OK


def cmd_distill(args) -> tuple[dict, int]:
    spec = args.family
    path = Path(spec)
    if not path.exists():
        candidate = fixture_path(f"distill_{spec}.json")
        if not candidate.exists():
            raise CLIError(f"no family file or shipped family named {spec!r}")
        path = candidate
    try:
        exp = protocols.load_family(str(path))
    except (ValueError, KeyError) as exc:
        raise CLIError(f"bad family file {path}: {exc}") from None
    res = protocols.advice_distillation(exp, args.t_max, args.amplify)
    return res.to_json(), EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "advice-demo": cmd_advice_demo,
    "gma-bound": cmd_gma_bound,
    "verify": cmd_verify,
    "unbias": cmd_unbias,
    "distill": cmd_distill,
}


# ---------------------------------------------------------------- output

def _tsv(command: str, result: dict) -> str:
    rows: list[list] = []
    if command == "simulate":
        rows.append(["run", "outcome", "p"])
        for i, run in enumerate(result["runs"]):
            for entry in run.get("distribution", []):
                rows.append([i, entry["outcome"], entry["p"]])
            if "accept_probability" in run:
                rows.append([i, "accept", run["accept_probability"]])
    elif command == "advice-demo":
        rows.append(["input", "f", "evaluated"])
        rows += [[r["input"], r["f"], r["evaluated"]] for r in result["results"]]
    elif command == "gma-bound":
        rows.append(["experiment", "n", "d", "sigma_max", "max_accept", "gap_trace", "classification"])
        rows += [[r["experiment"], r["n"], r["d"], r["sigma_max"], r["max_accept"], r["gap_trace"],
                  r["classification"]] for r in result["reports"]]
    elif command == "verify":
        rows.append(["principle", "system", "status"])
        for e in result["principles"]:
            system = e.get("system") or ",".join(e.get("details", {}).get("systems", []))
            rows.append([e["principle"], system, e["status"]])
    elif command == "distill":
        rows.append(["iteration", "input", "success", "postselect_prob"])
        for s in result["trace"]:
            rows.append([s["iteration"], s["input"] or "", ",".join(s["success"]), s["postselect_prob"] or ""])
    else:
        rows.append(["key", "value"])
        rows += [[k, v] for k, v in sorted(result.items()) if k != "bits"]
    return "\n".join("\t".join(str(c) for c in r) for r in rows) + "\n"


def _text(command: str, result: dict) -> str:
    lines = []
    if command == "simulate":
        for run in result["runs"]:
            if run["defines"]:
                lines.append(" ".join(f"{k}={v}" for k, v in run["defines"].items()))
            if "distribution" in run:
                label = "".join(run["labels"]) or "-"
                for entry in run["distribution"]:
                    lines.append(f"  P({label}={entry['outcome'] or '-'}) = {entry['p']}")
                lines.append(f"  accept = {run['accept_probability']}")
                if "postselect" in run:
                    lines.append(f"  P(S) = {run['postselect']['p_s']}")
            else:
                lines.append(f"  accept functional = ({', '.join(run['accept_functional'])})")
    elif command == "advice-demo":
        lines.append(f"truth table: {result['truth_table']}")
        for r in result["results"]:
            lines.append(f"  x={r['input']}  f(x)={r['f']}  evaluated={r['evaluated']}")
        lines.append(f"{result['matches']}/{result['total']} matches: {result['verdict']}")
    elif command == "gma-bound":
        for r in result["reports"]:
            lines.append(f"{r['experiment']}: n={r['n']} d={r['d']} sigma_max={r['sigma_max']:.12g} "
                         f"max_accept={r['max_accept']} f={r['gap_trace']} -> {r['classification']}")
    elif command == "verify":
        lines.append(f"theory {result['theory']}")
        for e in result["principles"]:
            where = e.get("system") or ",".join(e.get("details", {}).get("systems", []))
            lines.append(f"  {e['principle']:<22} {where:<12} {e['status']}")
    elif command == "unbias":
        lines.append(f"p={result['p']} samples={result['n_samples']} kept={result['kept']}")
        lines.append(f"  P(0) = {result['p_hat0']:.6f}  (|dev| bound {result['bias_bound']:.6f}, ok={result['bias_ok']})")
        lines.append(f"  keep rate = {result['keep_rate']:.6f}  expected {result['expected_keep_rate']:.6f} "
                     f"(ok={result['keep_ok']})")
        if "bits" in result:
            lines.append(result["bits"])
    elif command == "distill":
        for s in result["trace"]:
            lines.append(f"  t={s['iteration']} success=({', '.join(s['success'])}) "
                         f"update on {s['input'] or '-'}")
        verdict = "complete" if result["complete"] else f"incomplete ({result['reason']})"
        lines.append(f"{verdict} after {result['iterations']} iterations")
    return "\n".join(lines) + "\n"


def render(command: str, args, result: dict) -> str:
    if args.format == "json":
        doc = {"command": command, "config": _config(args), "result": result}
        return json.dumps(doc, sort_keys=True, indent=2, default=_default) + "\n"
    if args.format == "tsv":
        return _tsv(command, result)
    return _text(command, result)


def _default(obj):
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


# ---------------------------------------------------------------- parser

def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--mode", choices=("exact", "approx"), default=d("exact"), help="scalar mode")
    p.add_argument("--seed", type=int, default=d(0), help="PRNG seed (PCG64)")
    p.add_argument("--tol", type=float, default=d(scalars.TOL), help="approx-mode tolerance")
    p.add_argument("--format", choices=("json", "tsv", "text"), default=d("json"))
    p.add_argument("--jobs", type=int, default=d(1), help="parallel worker processes")
    p.add_argument("--guard", type=int, default=d(OUTCOME_GUARD), help="max outcome strings per circuit")
    p.add_argument("--out", default=d(None), help="write the report here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gptlab", description="GPT circuit simulator and verification lab")
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="evaluate a .gpc circuit")
    p.add_argument("circuit")
    p.add_argument("--theory", help="theory JSON or built-in name overriding the file header")
    p.add_argument("--aux", help="aux state: 'mixed', 'pure:i[,j...]' or coordinates 'p/q,...'")
    p.add_argument("--define", action="append", metavar="NAME=VALUE", help="fill a {NAME} placeholder")
    p.add_argument("--sweep", action="append", metavar="NAME=V1,V2", help="run once per value (product over sweeps)")
    p.add_argument("--samples", type=int, default=0, help="also draw this many outcome strings")

    p = sub.add_parser("advice-demo", parents=[common], help="Boxworld parity advice for a Boolean function")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--f", default="random", help="named function, bit string, or 'random'")

    p = sub.add_parser("gma-bound", parents=[common], help="sigma_max / gap-trace report for aux circuits")
    p.add_argument("circuits", nargs="+")
    p.add_argument("--d-rule", default="ceil", help="ceil (default), n, or const:K")
    p.add_argument("--theory", help="theory JSON or built-in name overriding the file header")

    p = sub.add_parser("verify", parents=[common], help="check principles on a theory")
    p.add_argument("theory_json", help="theory JSON file or built-in name")
    p.add_argument("--depth", type=int, default=6, help="symmetry search depth")

    p = sub.add_parser("unbias", parents=[common], help="von Neumann unbiasing of a biased qubit")
    p.add_argument("--p", required=True, help="bias P(0), e.g. 1/3 or 0.9")
    p.add_argument("--n", type=int, default=100_000, help="raw sample pairs")
    p.add_argument("--stream", action="store_true", help="include the output bit stream")

    p = sub.add_parser("distill", parents=[common], help="advice distillation on a quantum family")
    p.add_argument("family", help="family JSON or shipped name (plus, contradictory)")
    p.add_argument("--t-max", type=int, default=None)
    p.add_argument("--amplify", type=int, default=1)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.tol <= 0 or args.guard <= 0 or args.jobs < 1:
        print("error: --tol and --guard must be positive, --jobs at least 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        result, code = COMMANDS[args.command](args)
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except dsl.DSLError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except bounds.ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except GuardError as exc:
        print(f"guard exceeded: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (GPTError, WiringError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    text = render(args.command, args, result)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
