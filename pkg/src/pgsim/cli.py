"""Command-line interface.

Exit codes: 0 ok, 1 property violated (or relation rejected), 2 input
error, 3 value iteration hit its cap before the answer was settled.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .core import PLAYER_I, PLAYER_II, Distribution, ModelError
from .harness import (check_preservation, formula_batch, minimize_violation,
                      random_model)
from .lifting import ForwardRelationTable, forward_lift_check, relation_from_json
from .logic import (FormulaSyntaxError, in_a_patl, in_l_plus, parse_formula, parse_path, propositions,
                    read_formula_file, to_text)
from .modelcheck import EPS_VI, MAX_ITERS, patl_sat, value_of
from .modelfile import format_model, load_model
from .simcheck import (DEFAULT_SAMPLES, check_mode, compute_bisimulation, compute_forward_simulation,
                       compute_simulation, embed_sim_as_forward, forward_candidates,
                       verify_forward_simulation, verify_simulation)

SCHEMA = "pgsim-report/1"
EXIT_OK, EXIT_VIOLATED, EXIT_INPUT, EXIT_UNCONVERGED = 0, 1, 2, 3

COALITIONS = {"I": frozenset({PLAYER_I}), "II": frozenset({PLAYER_II}),
              "I,II": frozenset({PLAYER_I, PLAYER_II}), "": frozenset(), "none": frozenset()}


class InputError(Exception):
    pass


def _report(command: str, query: dict, **body) -> dict:
    return {"schema": SCHEMA, "tool": f"pgsim {__version__}", "command": command, "query": query,
            **body}


def _emit(report: dict, args, text: str) -> None:
    if args.json:
        sys.stdout.write(json.dumps(report, sort_keys=True, indent=2) + "\n")
    else:
        sys.stdout.write(text.rstrip("\n") + "\n")


def _relation(path):
    try:
        return relation_from_json(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise InputError(f"{path}: cannot read relation: {e}") from None


def _known_props(phi, *games) -> None:
    for G in games:
        unknown = sorted(propositions(phi) - set(G.props))
        if unknown:
            raise InputError(f"proposition {unknown[0]!r} is not declared in {G.name}")


def _formula(text: str):
    try:
        return parse_formula(text)
    except FormulaSyntaxError as e:
        raise InputError(str(e)) from None


# ---------------------------------------------------------------------------
# commands


def cmd_check(args) -> int:
    doc = load_model(args.model)
    G = doc.game
    phi = _formula(args.formula)
    _known_props(phi, G)
    if args.state is not None and args.state not in G.states:
        raise InputError(f"unknown state {args.state!r}")
    res = patl_sat(G, phi, eps=args.tol, max_iters=args.max_iters)
    states = [args.state] if args.state else list(G.states)
    verdicts = {s: res.verdict(s) for s in states}
    report = _report("check", {"model": G.name, "formula": to_text(phi), "state": args.state,
                               "tol": args.tol, "max_iters": args.max_iters},
                     verdicts=verdicts, notes=res.notes,
                     values={k: v.to_json() for k, v in sorted(res.values.items())})
    lines = [f"{s}: {v}" for s, v in verdicts.items()] + [f"note: {n}" for n in res.notes]
    _emit(report, args, "\n".join(lines))
    if any(v == "unsat" for v in verdicts.values()):
        return EXIT_VIOLATED
    if any(v == "uncertain" for v in verdicts.values()):
        return EXIT_UNCONVERGED
    return EXIT_OK


def cmd_value(args) -> int:
    G = load_model(args.model).game
    if args.coalition not in COALITIONS:
        raise InputError(f"unknown coalition {args.coalition!r} (use I, II, I,II or none)")
    try:
        psi = parse_path(args.path)
    except FormulaSyntaxError as e:
        raise InputError(str(e)) from None
    _known_props(psi, G)
    try:
        vf = value_of(G, COALITIONS[args.coalition], psi, eps=args.tol, max_iters=args.max_iters)
    except ValueError as e:
        raise InputError(str(e)) from None
    report = _report("value", {"model": G.name, "coalition": args.coalition, "path": to_text(psi),
                               "tol": args.tol, "max_iters": args.max_iters}, value=vf.to_json())
    lines = [f"{s}: {v}" for s, v in vf.to_json()["values"].items()]
    lines.append(f"status: {vf.status()}, iterations {vf.iterations}, residual {vf.residual}")
    lines += [f"note: {n}" for n in vf.notes]
    _emit(report, args, "\n".join(lines))
    return EXIT_OK if vf.converged else EXIT_UNCONVERGED


def cmd_sim(args) -> int:
    G, H = load_model(args.left).game, load_model(args.right).game
    fn = compute_bisimulation if args.mode == "bisim" else compute_simulation
    res = fn(G, H, args.player, samples=args.samples, seed=args.seed)
    report = _report("sim", {"left": G.name, "right": H.name, "player": args.player,
                             "mode": args.mode, "samples": args.samples, "seed": args.seed},
                     result=res.to_json(), check_mode=check_mode(args.samples))
    lines = [f"check mode: {check_mode(args.samples)}"]
    lines += [f"{s} <= {t}" for s, t in res.relation.sorted()]
    _emit(report, args, "\n".join(lines))
    return EXIT_OK


def cmd_fwdsim(args) -> int:
    G, H = load_model(args.left).game, load_model(args.right).game
    if args.relation:
        rel = _relation(args.relation)
        table = rel if isinstance(rel, ForwardRelationTable) else embed_sim_as_forward(rel)
    else:
        if args.verify:
            raise InputError("--verify needs --relation")
        table = forward_candidates(G, H, args.depth)
    query = {"left": G.name, "right": H.name, "player": args.player, "samples": args.samples,
             "seed": args.seed, "relation": args.relation, "verify": args.verify}
    if args.verify:
        out = verify_forward_simulation(G, H, table, args.player, args.samples, args.seed)
        report = _report("fwdsim", query, result=out)
        text = "verified" if out["verified"] else f"rejected: pair {out['pair']} ({out['reason']})"
        _emit(report, args, text)
        return EXIT_OK if out["verified"] else EXIT_VIOLATED
    kept, removed = compute_forward_simulation(G, H, table, args.player, args.samples, args.seed)
    report = _report("fwdsim", query, result={"table": kept.to_json()["pairs"],
                                              "removed": len(removed),
                                              "mode": check_mode(args.samples)})
    lines = [f"{s} <= {json.dumps(th.to_json(), sort_keys=True)}" for s, th in kept]
    _emit(report, args, "\n".join(lines) or "(empty)")
    return EXIT_OK


def cmd_gen(args) -> int:
    if args.states < 1 or args.actions < 1 or args.props < 0:
        raise InputError("need --states >= 1, --actions >= 1 and --props >= 0")
    G = random_model(args.states, args.actions, args.props, args.seed)
    text = format_model(G)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _preserve_pairs(G, H, rel, doc_l, doc_r) -> list:
    if isinstance(rel, ForwardRelationTable):
        pairs = [(Distribution.point(s), th) for s, th in rel]
        table = rel
    else:
        pairs = [(Distribution.point(s), Distribution.point(t)) for s, t in rel.sorted()]
        table = embed_sim_as_forward(rel)
    if forward_lift_check(table, doc_l.initial, doc_r.initial) is not None:
        pair = (doc_l.initial, doc_r.initial)
        if pair not in pairs:
            pairs.append(pair)
    return pairs


def cmd_preserve(args) -> int:
    doc_l, doc_r = load_model(args.left), load_model(args.right)
    G, H = doc_l.game, doc_r.game
    query = {"left": G.name, "right": H.name, "player": args.player, "bisim": args.bisim,
             "relation": args.relation, "seed": args.seed, "samples": args.samples,
             "tol": args.tol, "max_iters": args.max_iters}
    if args.relation:
        rel = _relation(args.relation)
        if args.bisim:
            if isinstance(rel, ForwardRelationTable):
                raise InputError("a bisimulation must be a plain relation")
            out = verify_simulation(G, H, rel, args.player, args.samples, args.seed)
            if out["verified"]:
                back = verify_simulation(H, G, rel.inverse(), args.player, args.samples, args.seed)
                out = back if not back["verified"] else out
        elif isinstance(rel, ForwardRelationTable):
            out = verify_forward_simulation(G, H, rel, args.player, args.samples, args.seed)
        else:
            out = verify_simulation(G, H, rel, args.player, args.samples, args.seed)
        if not out["verified"]:
            report = _report("preserve", query, verification=out)
            _emit(report, args, f"relation rejected: pair {out['pair']} ({out['reason']})")
            return EXIT_VIOLATED
    else:
        fn = compute_bisimulation if args.bisim else compute_simulation
        rel = fn(G, H, args.player, samples=args.samples, seed=args.seed).relation
        out = {"verified": True, "computed": True, "mode": check_mode(args.samples), "pairs": len(rel)}
    coalition = frozenset({args.player})
    in_frag = (lambda f: in_l_plus(f, coalition)) if args.bisim else (lambda f: in_a_patl(f, coalition))
    if args.formulas:
        try:
            formulas = read_formula_file(Path(args.formulas).read_text(encoding="utf-8"))
        except FormulaSyntaxError as e:
            raise InputError(f"{args.formulas}: {e}") from None
    else:
        depth, count = args.random
        props = sorted(set(G.props) & set(H.props))
        if not props:
            raise InputError("the two models share no propositions")
        formulas = formula_batch(args.seed, props, count, depth, "L+" if args.bisim else "A-PATL")
        if args.player == PLAYER_II:
            formulas = [_swap_coalitions(f) for f in formulas]
    for f in formulas:
        _known_props(f, G, H)
    outside = [to_text(f) for f in formulas if not in_frag(f)]
    formulas = [f for f in formulas if in_frag(f)]
    pairs = _preserve_pairs(G, H, rel, doc_l, doc_r)
    rep = check_preservation(G, H, pairs, formulas, bisim=args.bisim, eps=args.tol,
                             max_iters=args.max_iters)
    for v in rep.violations:
        phi = parse_formula(v["formula"])
        d = Distribution.from_json(v["left"])
        e = Distribution.from_json(v["right"])
        v["minimized"] = to_text(minimize_violation(G, H, d, e, phi, bisim=args.bisim, fragment=in_frag))
    report = _report("preserve", query, verification=out, preservation=rep.to_json(),
                     outside_fragment=outside, pairs=len(pairs))
    text = (f"checks {rep.checks}, holds {rep.holds}, skipped {rep.skipped} "
            f"({100 * rep.skip_rate:.2f}%), violations {len(rep.violations)}")
    for v in rep.violations:
        text += f"\nviolation: {v['minimized']} on {v['left']} vs {v['right']}"
    _emit(report, args, text)
    return EXIT_VIOLATED if rep.violations else EXIT_OK


def _strategy(G, player: str, spec: str):
    """``uniform``, ``pure:<action>`` or a JSON file ``{state: {action: "p"}}``."""
    from .core import Level1Strategy

    if spec == "uniform":
        return Level1Strategy.uniform(G, player)
    if spec.startswith("pure:"):
        a = spec[5:]
        if a not in G.actions(player):
            raise InputError(f"unknown action {a!r} of player {player}")
        return Level1Strategy.pure(G, player, a)
    try:
        data = json.loads(Path(spec).read_text(encoding="utf-8"))
        moves = {s: Distribution.from_json(m) for s, m in data.items()}
    except (OSError, ValueError, TypeError) as e:
        raise InputError(f"{spec}: cannot read strategy: {e}") from None
    missing = [s for s in G.states if s not in moves]
    if missing:
        raise InputError(f"{spec}: no move for state {missing[0]!r}")
    return Level1Strategy(moves)


def cmd_prob(args) -> int:
    from .executions import BudgetError, exact_path_probability, monte_carlo_path_probability
    from .logic import Next, Until
    from .modelcheck import formula_sets

    doc = load_model(args.model)
    G = doc.game
    try:
        psi = parse_path(args.path)
    except FormulaSyntaxError as e:
        raise InputError(str(e)) from None
    _known_props(psi, G)
    pi_I = _strategy(G, PLAYER_I, args.strategy_I)
    pi_II = _strategy(G, PLAYER_II, args.strategy_II)
    start = Distribution.point(args.state) if args.state else doc.initial
    if args.state and args.state not in G.states:
        raise InputError(f"unknown state {args.state!r}")
    sets = lambda f: formula_sets(G, f, eps=args.tol, max_iters=args.max_iters)
    if isinstance(psi, Next):
        kind, bound, S1, S2 = "X", None, frozenset(G.states), sets(psi.arg)
    else:
        kind = "U" if isinstance(psi, Until) else "R"
        bound, S1, S2 = psi.bound, sets(psi.left), sets(psi.right)
    try:
        pp = exact_path_probability(G, pi_I, pi_II, start, kind, bound, S1, S2, args.horizon,
                                    args.node_budget)
    except BudgetError as e:
        raise InputError(str(e)) from None
    body = {"exact": pp.to_json()}
    text = f"probability in [{pp.lower}, {pp.upper}] (horizon {pp.horizon})"
    if args.samples:
        mc = monte_carlo_path_probability(G, pi_I, pi_II, start, kind, bound, S1, S2,
                                          args.samples, args.horizon, args.seed)
        body["monte_carlo"] = mc.to_json()
        text += f"\nmonte carlo {mc.estimate:.6f}, 95% interval [{mc.low:.6f}, {mc.high:.6f}]"
    report = _report("prob", {"model": G.name, "path": to_text(psi), "strategy_I": args.strategy_I,
                              "strategy_II": args.strategy_II, "state": args.state,
                              "horizon": args.horizon, "samples": args.samples, "seed": args.seed},
                     **body)
    _emit(report, args, text)
    return EXIT_OK


def _swap_coalitions(phi):
    """Rename player I to II in every coalition (random formulas are drawn for I)."""
    from dataclasses import fields, is_dataclass, replace

    from .logic import Strategic

    if not is_dataclass(phi):
        return phi
    kw = {}
    for f in fields(phi):
        if f.name == "pos":
            continue
        v = getattr(phi, f.name)
        kw[f.name] = _swap_coalitions(v) if is_dataclass(v) else v
    if isinstance(phi, Strategic):
        kw["coalition"] = frozenset(PLAYER_II if p == PLAYER_I else p for p in phi.coalition)
    return replace(phi, **kw)


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pgsim", description="Model checking and simulation checking "
                                "for probabilistic game structures.")
    p.add_argument("--version", action="version", version=f"pgsim {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="print a JSON report")
    common.add_argument("--tol", type=float, default=EPS_VI, help="value-iteration tolerance")
    common.add_argument("--max-iters", type=int, default=MAX_ITERS, help="value-iteration cap")
    common.add_argument("--seed", type=int, default=0, help="seed for every random choice")
    common.add_argument("--horizon", type=int, default=20, help="unfolding depth for executions")
    common.add_argument("--node-budget", type=int, default=10 ** 6, help="largest execution tree")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", parents=[common], help="decide a PATL formula")
    c.add_argument("model")
    c.add_argument("formula")
    c.add_argument("--state")
    c.set_defaults(func=cmd_check)

    c = sub.add_parser("value", parents=[common], help="value of a path formula for a coalition")
    c.add_argument("model")
    c.add_argument("coalition", help="I, II, I,II or none")
    c.add_argument("path", help='path formula, e.g. "F phi" or "p U<=3 q"')
    c.set_defaults(func=cmd_value)

    for name, func, hlp in (("sim", cmd_sim, "greatest simulation or bisimulation"),
                            ("fwdsim", cmd_fwdsim, "forward simulation: verify or prune a table")):
        c = sub.add_parser(name, parents=[common], help=hlp)
        c.add_argument("left")
        c.add_argument("right")
        c.add_argument("--player", choices=[PLAYER_I, PLAYER_II], default=PLAYER_I)
        c.add_argument("--samples", type=int, default=DEFAULT_SAMPLES,
                       help="sampled mixed protagonist moves per pair (0 disables)")
        c.set_defaults(func=func)
        if name == "sim":
            c.add_argument("--mode", choices=["sim", "bisim"], default="sim")
        else:
            c.add_argument("--relation", help="relation JSON file")
            c.add_argument("--verify", action="store_true", help="verify the given table as is")
            c.add_argument("--depth", type=int, default=1, help="candidate successor depth (<= 3)",
                           choices=[0, 1, 2, 3])

    c = sub.add_parser("prob", parents=[common], help="path probability under fixed strategies")
    c.add_argument("model")
    c.add_argument("path")
    c.add_argument("--strategy-I", dest="strategy_I", default="uniform",
                   help="uniform, pure:<action> or a JSON file of per-state moves")
    c.add_argument("--strategy-II", dest="strategy_II", default="uniform")
    c.add_argument("--state", help="start state (default: the model's initial distribution)")
    c.add_argument("--samples", type=int, default=0, help="also estimate by sampling")
    c.set_defaults(func=cmd_prob)

    c = sub.add_parser("gen", parents=[common], help="random model")
    c.add_argument("--states", type=int, default=4)
    c.add_argument("--actions", type=int, default=2)
    c.add_argument("--props", type=int, default=1)
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_gen)

    c = sub.add_parser("preserve", parents=[common], help="test formula preservation")
    c.add_argument("left")
    c.add_argument("right")
    c.add_argument("--relation", help="relation JSON file (computed when omitted)")
    c.add_argument("--player", choices=[PLAYER_I, PLAYER_II], default=PLAYER_I)
    c.add_argument("--bisim", action="store_true", help="bisimulation and the biconditional")
    c.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    g = c.add_mutually_exclusive_group()
    g.add_argument("--formulas", help=".patl file, one formula per line")
    g.add_argument("--random", nargs=2, type=int, metavar=("DEPTH", "COUNT"), default=(2, 50))
    c.set_defaults(func=cmd_preserve)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code else EXIT_OK
    try:
        return args.func(args)
    except (InputError, ModelError, FormulaSyntaxError, OSError) as e:
        sys.stderr.write(f"pgsim: error: {e}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
