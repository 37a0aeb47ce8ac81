"""Command-line front end: analyze, design, simulate, learn, casestudy, export-dot."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import pauli_core as pc
from .casestudies import CASES, get_case
from .clifford import load_gateset
from .estimator import learn, plot_report
from .exp_design import RelativeUnavailable, choose_depths, load_plan, plan_relative, plan_simple
from .learnability import AnalyticUnavailable, reduced_spaces
from .noise_model import AnsatzSpec, GroundTruthModel, build_embedding, random_model
from .ptg import build_ptg
from .simulator import Simulator, derived_seed, read_results, simulate_plan, write_results

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CAP = 3
EXIT_REFUSED = 4
EXIT_MISMATCH = 5

EPILOG = """exit codes:
  0  success
  2  input could not be read or parsed (or a required flag is missing)
  3  qubit count exceeds the enumeration cap (raise it with --n-max or PTGLEARN_N_MAX)
  4  relative-precision design refused (needs the fully-local ansatz on 2-qubit gates)
  5  verification mismatch (casestudy dimensions or recovered values)

random seeds: every sampled experiment i uses SeedSequence(seed, spawn_key=(i,));
random models use numpy default_rng(seed)."""


class InputError(Exception):
    pass


# ---------------------------------------------------------------------------
# shared inputs


def _ansatz(text: str | None, n: int) -> AnsatzSpec:
    if text is None:
        raise InputError("--ansatz is required")
    key = text.replace("-", "_")
    if key in ("complete", "fully_local"):
        return AnsatzSpec(key)
    path = Path(text)
    if not path.exists():
        raise InputError(f"ansatz {text!r} is neither a known kind nor a file")
    return AnsatzSpec.from_json(path.read_text(), n)


def _model_inputs(args):
    """(gateset, ansatz) from --case or from --gateset/--ansatz."""
    if getattr(args, "case", None):
        return get_case(args.case).make(args.n)
    if not args.gateset:
        raise InputError("give --gateset (with --ansatz) or --case")
    gs = load_gateset(args.gateset)
    return gs, _ansatz(args.ansatz, gs.n)


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _model(args, Q):
    if args.model:
        return GroundTruthModel.from_json(Q, Path(args.model).read_text())
    if args.seed is None:
        raise InputError("a random model needs --seed (or pass --model)")
    return random_model(Q, args.seed, args.noise_scale)


def _m_values(text: str) -> list[int]:
    try:
        vals = sorted({int(v) for v in text.split(",") if v.strip()})
    except ValueError as exc:
        raise InputError(f"bad --m-values {text!r}") from exc
    if not vals or vals[0] < 0:
        raise InputError("--m-values must be nonnegative integers")
    return vals


# ---------------------------------------------------------------------------
# commands


HEADER = "X_R L_R X_R^G L_R^G"


def cmd_analyze(args) -> int:
    gs, ans = _model_inputs(args)
    Q = build_embedding(gs, ans)
    rep = reduced_spaces(Q, method=args.method)
    print(HEADER)
    print(rep.row())
    print(f"T_R={rep.dims['T_R']} method={rep.method}")
    if args.out:
        _write(args.out, _dumps(rep.to_json()))
    return EXIT_OK


def cmd_design(args) -> int:
    gs, ans = _model_inputs(args)
    Q = build_embedding(gs, ans)
    if args.mode == "simple":
        plan = plan_simple(Q)
    else:
        if args.m_values == "auto":
            model = _model(args, Q)
            sim = Simulator(model)
            counter = iter(range(10 ** 9))

            def probe(spec):
                r = sim.sample(spec, args.shots, None if args.seed is None else derived_seed(args.seed, next(counter)))
                return r.mean * r.sign

            ms = choose_depths(Q, probe)
        else:
            ms = _m_values(args.m_values or "0,1,2,4,8")
        plan = plan_relative(Q, ms)
    _write(args.out, plan.dumps() + "\n")
    n_fam = sum(e.estimator == "ratio" for e in plan.elements)
    print(f"{len(plan.experiments)} experiments, {len(plan.elements)} basis elements "
          f"({n_fam} germ families)", file=sys.stderr)
    return EXIT_OK


def cmd_simulate(args) -> int:
    plan = load_plan(args.plan)
    Q = plan.embedding()
    model = _model(args, Q)
    if args.shots > 0 and args.seed is None:
        raise InputError("sampling needs --seed")
    results = simulate_plan(model, plan, args.shots, args.seed)
    write_results(results, args.out)
    if args.model_out:
        _write(args.model_out, _dumps(model.to_json()))
    return EXIT_OK


def _report_paths(out: str):
    base = Path(out)
    stem = base.with_suffix("")
    return base, stem.with_suffix(".csv"), stem.with_suffix(".png")


def cmd_learn(args) -> int:
    plan = load_plan(args.plan)
    results = read_results(args.results)
    model = None
    if args.model:
        model = GroundTruthModel.from_json(plan.embedding(), Path(args.model).read_text())
    rep = learn(plan, results, model, fit=args.fit, metadata={"seed": args.seed})
    js, csv_path, png = _report_paths(args.out)
    _write(str(js), rep.dumps() + "\n")
    _write(str(csv_path), rep.to_csv())
    plotted = plot_report(rep, str(png))
    flagged = rep.metadata["flagged"]
    msg = f"{len(rep.elements)} elements, {flagged} flagged"
    if rep.max_abs_error() is not None:
        msg += f", max |error| = {rep.max_abs_error():.3e}"
    print(msg)
    if plotted:
        print(f"figure: {png}")
    return EXIT_OK


def run_casestudy(name: str, n: int | None, seed: int = 0, tol: float = 1e-9) -> tuple[bool, list[str]]:
    case = get_case(name)
    gs, ans = case.make(n)
    Q = build_embedding(gs, ans)
    rep = reduced_spaces(Q)
    expected = case.expected(gs.n)
    lines = [f"{name} n={gs.n}", HEADER, rep.row()]
    ok = True
    for key, want in expected.items():
        got = rep.dims.get(key)
        if want is not None and got != want:
            ok = False
            lines.append(f"MISMATCH {key}: expected {want}, got {got}")
    plan = plan_simple(Q, rep.dims["L_R"])
    model = random_model(Q, seed, 0.01)
    lrep = learn(plan, simulate_plan(model, plan, 0), model)
    err = lrep.max_abs_error()
    lines.append(f"exact-data learning: {len(plan.experiments)} experiments, max |error| = {err:.2e}")
    if not (err is not None and err <= tol):
        ok = False
    lines.append("PASS" if ok else "FAIL")
    return ok, lines


def cmd_casestudy(args) -> int:
    names = sorted(CASES) if args.name == "all" else [args.name]
    ok = True
    for name in names:
        good, lines = run_casestudy(name, args.n if args.name != "all" else None, args.seed or 0)
        print("\n".join(lines))
        ok &= good
    return EXIT_OK if ok else EXIT_MISMATCH


def cmd_export_dot(args) -> int:
    if getattr(args, "case", None):
        gs, _ = get_case(args.case).make(args.n)
    elif args.gateset:
        gs = load_gateset(args.gateset)
    else:
        raise InputError("give --gateset or --case")
    _write(args.out, build_ptg(gs).to_dot())
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ptglearn", description="Learnability analysis and learning of Pauli noise on Clifford gate sets.",
                                epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--n-max", type=int, default=None, help="enumeration cap on qubits (overrides PTGLEARN_N_MAX)")
    sub = p.add_subparsers(dest="command", required=True)

    def inputs(sp, ansatz=True):
        sp.add_argument("--gateset", help="gate-set JSON file")
        if ansatz:
            sp.add_argument("--ansatz", help="ansatz JSON file, or 'complete' / 'fully-local'")
        sp.add_argument("--case", choices=sorted(CASES), help="use a built-in configuration instead of files")
        sp.add_argument("--n", type=int, default=None, help="qubit count for --case")

    def common(sp):
        sp.add_argument("--n-max", type=int, default=argparse.SUPPRESS, help=argparse.SUPPRESS)
        sp.add_argument("--seed", type=int, default=None)

    sp = sub.add_parser("analyze", help="learnable / gauge dimensions", epilog=EPILOG,
                        formatter_class=argparse.RawDescriptionHelpFormatter)
    inputs(sp)
    common(sp)
    sp.add_argument("--method", choices=("auto", "brute", "analytic"), default="auto")
    sp.add_argument("--out", help="JSON report path")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("design", help="experiment plan", epilog=EPILOG,
                        formatter_class=argparse.RawDescriptionHelpFormatter)
    inputs(sp)
    common(sp)
    sp.add_argument("--mode", choices=("simple", "relative"), default="simple")
    sp.add_argument("--m-values", default=None, help="comma list of germ depths, or 'auto' (pilot depth search)")
    sp.add_argument("--shots", type=int, default=10000, help="pilot shots for --m-values auto")
    sp.add_argument("--model", help="model JSON for pilot runs")
    sp.add_argument("--noise-scale", type=float, default=0.01)
    sp.add_argument("--out", help="plan JSON path (stdout if omitted)")
    sp.set_defaults(func=cmd_design)

    sp = sub.add_parser("simulate", help="run a plan on a noise model", epilog=EPILOG,
                        formatter_class=argparse.RawDescriptionHelpFormatter)
    common(sp)
    sp.add_argument("--plan", required=True)
    sp.add_argument("--model", help="model JSON; otherwise a random model from --seed and --noise-scale")
    sp.add_argument("--noise-scale", type=float, default=0.01)
    sp.add_argument("--shots", type=int, default=0, help="0 = exact expectations")
    sp.add_argument("--out", required=True, help="results JSONL path")
    sp.add_argument("--model-out", help="write the model used")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("learn", help="estimate the plan's learnable basis", epilog=EPILOG,
                        formatter_class=argparse.RawDescriptionHelpFormatter)
    common(sp)
    sp.add_argument("--plan", required=True)
    sp.add_argument("--results", required=True)
    sp.add_argument("--model", help="ground-truth model JSON for error columns and the figure")
    sp.add_argument("--fit", choices=("two-point", "loglinear"), default="two-point")
    sp.add_argument("--out", required=True, help="report JSON path; CSV and PNG are written alongside")
    sp.set_defaults(func=cmd_learn)

    sp = sub.add_parser("casestudy", help="check a built-in configuration end to end", epilog=EPILOG,
                        formatter_class=argparse.RawDescriptionHelpFormatter)
    common(sp)
    sp.add_argument("name", choices=sorted(CASES) + ["all"])
    sp.add_argument("--n", type=int, default=None)
    sp.set_defaults(func=cmd_casestudy)

    sp = sub.add_parser("export-dot", help="pattern transfer graph as GraphViz DOT", epilog=EPILOG,
                        formatter_class=argparse.RawDescriptionHelpFormatter)
    inputs(sp, ansatz=False)
    common(sp)
    sp.add_argument("--out", help="DOT path (stdout if omitted)")
    sp.set_defaults(func=cmd_export_dot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.n_max is not None:
        pc.set_n_max(args.n_max)
    try:
        return args.func(args)
    except pc.CapExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except RelativeUnavailable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except ArithmeticError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except AnalyticUnavailable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    finally:
        if args.n_max is not None:
            pc.set_n_max(None)


if __name__ == "__main__":
    sys.exit(main())
