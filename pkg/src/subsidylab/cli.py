"""Command-line entry point: ``subsidylab <command> [options]``.

Every command writes canonical JSON (sorted keys, 12 significant digits) or
CSV to ``--out`` or stdout. Exit codes: 0 success, 1 a check reported a
mismatch, 2 invalid input, 3 a metric is undefined for the input, 4 a size
cap was exceeded.
"""
from __future__ import annotations

import argparse
import csv
import io as _io
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import config
from .errors import CapExceeded, GameError, InconsistentRevelation, UndefinedMetric
from .io import canonical_json

EXIT_MISMATCH, EXIT_SCHEMA, EXIT_UNDEFINED, EXIT_CAP = 1, 2, 3, 4


@dataclass
class ExperimentConfig:
    seed: int | None
    cap_n: int
    cap_profiles: int
    bound: float | None
    tol: float
    margin: float | None
    out: str | None
    fmt: str

    def __post_init__(self):
        if self.cap_n <= 0 or self.cap_profiles <= 0:
            raise GameError("caps must be positive")
        if not self.tol > 0:
            raise GameError("--tol must be positive")
        if self.margin is not None and not self.margin > 0:
            raise GameError("--margin must be positive")
        if self.bound is not None and not self.bound > 0:
            raise GameError("--bound must be positive")

    def require_seed(self) -> int:
        if self.seed is None:
            raise GameError("this command needs --seed")
        return self.seed


class _Overrides:
    """Temporarily install tolerance and caps in the shared config module."""

    keys = ("TOL", "CAP_N", "PROFILE_CAP")

    def __init__(self, cfg: ExperimentConfig):
        self.values = dict(zip(self.keys, (cfg.tol, cfg.cap_n, cfg.cap_profiles)))

    def __enter__(self):
        self.saved = {k: getattr(config, k) for k in self.keys}
        for k, v in self.values.items():
            setattr(config, k, v)

    def __exit__(self, *exc):
        for k, v in self.saved.items():
            setattr(config, k, v)


# ---------------------------------------------------------------------------
# output


def _csv_text(rows) -> str:
    rows = [{k: _cell(v) for k, v in r.items()} for r in rows]
    header = []
    for r in rows:
        header.extend(k for k in r if k not in header)
    buf = _io.StringIO()
    w = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def _cell(v):
    if isinstance(v, (list, tuple, dict)):
        return canonical_json(v)
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return v


def _scalar_row(doc: dict) -> dict:
    return {k: v for k, v in sorted(doc.items()) if not isinstance(v, (list, dict))}


def _emit(cfg: ExperimentConfig, doc, rows=None):
    if cfg.fmt == "csv":
        text = _csv_text(rows if rows is not None else [_scalar_row(doc)])
    else:
        text = canonical_json(doc, indent=2) + "\n"
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise GameError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise GameError(f"{path}: invalid JSON ({exc})") from exc


# ---------------------------------------------------------------------------
# commands


def _inspected(game, value):
    """Maintenance components are numbered from 1 on the command line."""
    from .game import MaintenanceGame

    if value is None:
        return None
    if isinstance(game, MaintenanceGame):
        try:
            j = int(value)
        except ValueError as exc:
            raise GameError(f"--inspect expects a component number, got {value!r}") from exc
        if not 1 <= j <= game.n:
            raise GameError(f"--inspect {j} is outside 1..{game.n}")
        return j - 1
    game.action_index(value)
    return value


def cmd_analyze(args, cfg):
    from .equilibrium import enumerate_nash, state_costs
    from .io import load_game, parse_scheme
    from .metrics import analysis_report

    game = load_game(args.game)
    scheme = parse_scheme(args.scheme, game) if args.scheme else None
    report = analysis_report(game, scheme, _inspected(game, args.inspect), args.selection)
    nash = enumerate_nash(game, scheme)
    costs = state_costs(game, nash, scheme)
    social = game.social_costs()[nash.indices]
    rows = [
        {"state": label, **{f"cost_{i + 1}": float(c) for i, c in enumerate(row)}, "social_cost": float(s)}
        for label, row, s in zip(nash.labels(), costs, social)
    ]
    _emit(cfg, report, rows)
    return 0


def _is_two_series(game) -> bool:
    from .game import SystemFunction

    return game.n == 2 and np.array_equal(game.phi.truth_table(), SystemFunction.series(2).truth_table())


def cmd_solve(args, cfg):
    from .game import CostSharingGame
    from .io import load_game
    from .solvers import (
        min_actions_poa1,
        min_agents_poa1,
        min_budget_decision,
        optimal_uniform_subsidy,
        two_series_poa_subsidy,
        two_series_system_subsidy,
    )

    game = load_game(args.game)
    if isinstance(game, CostSharingGame):
        if args.actions is None:
            raise GameError("cost-sharing games are solved with --actions N")
        if args.amount:
            d = min_actions_poa1(game, args.actions, amounts=tuple(args.amount))
        else:
            d = min_actions_poa1(game, args.actions)
        doc = {"problem": "min-actions-poa1", "n_star": args.actions, **d.to_json(game)}
        _emit(cfg, doc)
        return 0
    inspected = _inspected(game, args.inspect) or 0
    if args.closed_form:
        if not _is_two_series(game):
            raise GameError("closed forms need a two-component series game")
        (p1, p2), (c1, c2) = game.p, game.costs
        doc = {
            "problem": "two-series-closed-form",
            "poa1": two_series_poa_subsidy(p1, p2, c1, c2),
            "system": two_series_system_subsidy(p1, p2, c1, c2),
        }
    elif args.agents is not None:
        if args.objective != "poa1":
            raise GameError("--agents decides the poa1 objective only")
        d = min_agents_poa1(game, args.agents, config.SMALL_CAP, cfg.margin, cfg.bound)
        doc = {"problem": "min-agents-poa1", "n_star": args.agents, **d.to_json(game)}
    elif args.budget is not None:
        mode = {"per-agent": "per_agent", "conditional": "conditional"}.get(args.mode)
        if mode is None:
            raise GameError("--budget works with --mode per-agent or conditional")
        d = min_budget_decision(game, args.objective, args.budget, inspected, mode, margin=cfg.margin, bound=cfg.bound)
        doc = {"problem": "min-budget", "objective": args.objective, "budget": args.budget, **d.to_json(game)}
    else:
        if args.mode == "per-agent":
            raise GameError("per-agent subsidies are searched with --budget or --agents")
        mode = args.mode
        r = optimal_uniform_subsidy(game, args.objective, mode, inspected, cfg.margin, cfg.bound)
        doc = {"problem": "optimal-uniform", "objective": args.objective, "mode": mode, **r.to_json(game)}
    _emit(cfg, doc)
    return 0


def _distribution(doc: dict, csg: bool):
    from .io import parse_game
    from .learning import CsgDistribution, GameDistribution

    if not isinstance(doc, dict):
        raise GameError("the distribution file must hold a JSON object")
    if not csg:
        return GameDistribution.from_json(doc)
    template = doc.get("template")
    if template is None:
        raise GameError("a cost-sharing distribution needs a 'template' game")
    if isinstance(template, str):
        from .golden import FIXTURES, load_fixture

        game = load_fixture(template) if template in FIXTURES else parse_game(template)
    else:
        game = parse_game(template)
    return CsgDistribution(game, float(doc.get("jitter", 0.5)))


def cmd_learn_offline(args, cfg):
    from .game import CsgSubsidy, MaintenanceSubsidy
    from .learning import (
        erm_csg,
        erm_per_agent,
        erm_uniform,
        loss_posterior,
        loss_prior,
        loss_voi_csg,
    )
    from .rng import stream

    seed = cfg.require_seed()
    doc = _read_json(args.dist)
    dist = _distribution(doc, args.mode == "csg")
    train = dist.draw(stream(seed, "train"), args.train)
    test = dist.draw(stream(seed, "test"), args.test)
    out = {"mode": args.mode, "seed": seed, "train": args.train, "test": args.test}
    if args.mode == "uniform":
        fit = erm_uniform(train, cfg.bound, cfg.margin)
        best = erm_uniform(test, cfg.bound, cfg.margin)
        scheme = MaintenanceSubsidy.uniform(train[0].n, fit.sigma)
        test_loss = float(np.mean([loss_prior(g, scheme) for g in test]))
    elif args.mode == "per-agent":
        kind = "conditional" if args.conditional else "prior"
        j = _inspected(train[0], args.inspect)
        fit = erm_per_agent(train, kind, j, bound=cfg.bound, margin=cfg.margin)
        best = erm_per_agent(test, kind, j, bound=cfg.bound, margin=cfg.margin)
        n = train[0].n
        if kind == "prior":
            scheme = MaintenanceSubsidy.per_agent(fit.sigma)
            test_loss = float(np.mean([loss_prior(g, scheme) for g in test]))
        else:
            scheme = MaintenanceSubsidy.conditional(np.zeros(n), fit.sigma["post1"], fit.sigma["post0"])
            test_loss = float(np.mean([loss_posterior(g, scheme, j) for g in test]))
    else:
        subsidized = doc.get("subsidized", [])
        loss = doc.get("loss", "prior")
        fit = erm_csg(train, subsidized, loss, margin=cfg.margin)
        best = erm_csg(test, subsidized, loss, margin=cfg.margin)
        scheme = CsgSubsidy(fit.sigma)
        if loss == "prior":
            test_loss = float(np.mean([loss_prior(g, scheme) for g in test]))
        else:
            test_loss = float(np.mean([loss_voi_csg(g, scheme, None, loss == "voi_plus") for g in test]))
    out.update({
        "fit": fit.to_json(),
        "train_loss": fit.loss,
        "test_loss": test_loss,
        "test_optimal_loss": best.loss,
        "gap": test_loss - best.loss,
    })
    _emit(cfg, out)
    return 0


def cmd_learn_online(args, cfg):
    from .learning import dispersion_diagnostic, online_forecaster
    from .rng import stream

    seed = cfg.require_seed()
    if args.T <= 0:
        raise GameError("-T must be positive")
    dist = _distribution(_read_json(args.dist), False)
    games = dist.draw(stream(seed, "online-games"), args.T)
    res = online_forecaster(games, stream(seed, "forecaster"), args.lam, cfg.bound)
    eps = args.T ** -0.5
    summary = {
        "seed": seed,
        "T": args.T,
        "lambda": res.lam,
        "total_loss": float(res.losses.sum()),
        "best_fixed_loss": res.final.minimum(),
        "regret": res.regret,
        "dispersion_eps": eps,
        "dispersion_max_window": dispersion_diagnostic(res.curves, eps),
    }
    lines = [
        canonical_json({"t": t + 1, "sigma": s, "loss": l, "cum_regret": r})
        for t, (s, l, r) in enumerate(zip(res.sigmas, res.losses, res.cum_regret))
    ]
    text = "\n".join(lines) + "\n"
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.summary:
        Path(args.summary).write_text(_csv_text([summary]))
    return 0


def _load_instance(kind, path):
    from .io import parse_graph, parse_set_cover

    return parse_set_cover(path) if kind == "csg-poas" else parse_graph(path)


def cmd_reduce(args, cfg):
    from .reductions import (
        sc_to_csg_poas,
        vc_to_cig_voi,
        vc_to_cmg_poas,
        vc_to_cmg_system,
    )

    inst = _load_instance(args.kind, args.instance)
    if args.kind != "csg-poas" and args.k is None:
        raise GameError("graph reductions need --k")
    meta = {"kind": args.kind, "instance": inst.to_json()}
    if args.kind == "cmg-poas":
        game, meta["n_star"] = vc_to_cmg_poas(inst, args.k)
    elif args.kind == "cmg-system":
        game, meta["budget"] = vc_to_cmg_system(inst, args.k)
    elif args.kind == "csg-poas":
        game, meta["n_star"] = sc_to_csg_poas(inst)
    else:
        if not args.experimental:
            raise GameError("the cig-voi construction is experimental; pass --experimental")
        game, meta["budget"], meta["inspected"] = vc_to_cig_voi(inst, args.k, experimental=True)
        meta["inspected"] += 1
    if args.game_out:
        Path(args.game_out).write_text(canonical_json(game.to_json(), indent=2) + "\n")
        meta["game_file"] = args.game_out
    else:
        meta["game"] = game.to_json()
    _emit(cfg, meta)
    return 0


def cmd_verify(args, cfg):
    from .reductions import connected_graphs, random_set_cover, verify_many
    from .rng import stream

    if args.kind == "cig-voi" and not args.experimental:
        raise GameError("the cig-voi construction is experimental; pass --experimental")
    if args.kind == "csg-poas":
        rng = stream(cfg.seed if cfg.seed is not None else 0, "verify-set-cover")
        size = args.max_size if args.max_size is not None else 8
        cases = [(random_set_cover(rng, size), None) for _ in range(args.count)]
    else:
        size = args.max_size if args.max_size is not None else 6
        cases = [(g, k) for g in connected_graphs(size) for k in range(g.n + 1)]
    results = verify_many(args.kind, cases)
    rows = [
        {"index": i, "instance": inst.to_json(), "k": r["k"], "oracle": r["oracle"],
         "game_decision": r["game_decision"], "agree": r["agree"]}
        for i, ((inst, _), r) in enumerate(zip(cases, results))
    ]
    bad = [row for row in rows if not row["agree"]]
    doc = {
        "kind": args.kind,
        "max_size": size,
        "cases": len(rows),
        "agree": len(rows) - len(bad),
        "disagree": len(bad),
        "disagreements": bad[:20],
    }
    _emit(cfg, doc, rows)
    return EXIT_MISMATCH if bad else 0


def cmd_repro(args, cfg):
    from .golden import run_golden

    report = run_golden()
    report.pop("seconds")
    _emit(cfg, report, report["cells"])
    return 0 if report["passed"] else EXIT_MISMATCH


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="master seed (required by learning commands)")
    common.add_argument("--cap-n", type=int, default=config.CAP_N, help="largest n enumerated exhaustively")
    common.add_argument("--cap-profiles", type=int, default=config.PROFILE_CAP, help="largest cost-sharing profile count")
    common.add_argument("--bound", type=float, help="subsidy bound H (defaults to the game's)")
    common.add_argument("--tol", type=float, default=config.TOL, help="equilibrium and comparison tolerance")
    common.add_argument("--margin", type=float, help="offset placed above each threshold")
    common.add_argument("--out", help="output file (stdout by default)")
    common.add_argument("--format", dest="fmt", choices=("json", "csv"), default="json")

    p = argparse.ArgumentParser(prog="subsidylab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", parents=[common], help="equilibria, PoA, VoI and system predicate")
    a.add_argument("game")
    a.add_argument("--scheme", help="subsidy scheme JSON")
    a.add_argument("--inspect", help="inspected component (1-based) or action id")
    a.add_argument("--selection", choices=("worst", "min_social"), default="worst")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("solve", parents=[common], help="least subsidy for an objective")
    s.add_argument("game")
    s.add_argument("--objective", choices=("poa1", "system", "voi"), default="poa1")
    s.add_argument(
        "--mode", default="uniform",
        choices=("uniform", "per-agent", "conditional", "conditional-y0", "conditional-y1"),
    )
    s.add_argument("--inspect", help="inspected component (1-based)")
    s.add_argument("--budget", type=float, help="decide feasibility within this total subsidy")
    s.add_argument("--agents", type=int, help="decide PoA 1 with at most this many subsidized agents")
    s.add_argument("--actions", type=int, help="cost-sharing: at most this many subsidized actions")
    s.add_argument("--amount", type=float, action="append", help="absolute budget per subsidized action (repeatable)")
    s.add_argument("--closed-form", action="store_true", help="two-component series closed forms")
    s.set_defaults(func=cmd_solve)

    lo = sub.add_parser("learn-offline", parents=[common], help="ERM over sampled games")
    lo.add_argument("--dist", required=True, help="distribution JSON")
    lo.add_argument("--train", type=int, required=True)
    lo.add_argument("--test", type=int, required=True)
    lo.add_argument("--mode", choices=("uniform", "per-agent", "csg"), default="uniform")
    lo.add_argument("--conditional", action="store_true", help="per-agent: learn subsidies per inspection outcome")
    lo.add_argument("--inspect", type=int, default=1, help="conditional mode: inspected component (1-based)")
    lo.set_defaults(func=cmd_learn_offline)

    on = sub.add_parser("learn-online", parents=[common], help="exponential forecaster over a game stream")
    on.add_argument("--dist", required=True)
    on.add_argument("-T", type=int, required=True, help="number of rounds")
    on.add_argument("--lambda", dest="lam", type=float, help="learning rate (default tuned to T)")
    on.add_argument("--summary", help="CSV summary path")
    on.set_defaults(func=cmd_learn_online)

    kinds = ("cmg-poas", "cmg-system", "csg-poas", "cig-voi")
    r = sub.add_parser("reduce", parents=[common], help="build the game for a graph or set-cover instance")
    r.add_argument("--kind", choices=kinds, required=True)
    r.add_argument("instance")
    r.add_argument("--k", type=int, help="cover size for graph reductions")
    r.add_argument("-o", dest="game_out", help="write the game JSON here")
    r.add_argument("--experimental", action="store_true")
    r.set_defaults(func=cmd_reduce)

    v = sub.add_parser("verify", parents=[common], help="check a reduction against a brute-force oracle")
    v.add_argument("--kind", choices=kinds, required=True)
    v.add_argument("--max-size", type=int, help="largest graph or universe")
    v.add_argument("--count", type=int, default=200, help="random set-cover instances")
    v.add_argument("--experimental", action="store_true")
    v.set_defaults(func=cmd_verify)

    g = sub.add_parser("repro", parents=[common], help="recompute the bundled worked examples")
    g.set_defaults(func=cmd_repro)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig(
            args.seed, args.cap_n, args.cap_profiles, args.bound, args.tol, args.margin, args.out, args.fmt
        )
        with _Overrides(cfg):
            return args.func(args, cfg)
    except (UndefinedMetric, InconsistentRevelation) as exc:
        print(f"subsidylab: {exc}", file=sys.stderr)
        return EXIT_UNDEFINED
    except CapExceeded as exc:
        print(f"subsidylab: {exc}", file=sys.stderr)
        return EXIT_CAP
    except GameError as exc:
        print(f"subsidylab: invalid input: {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
