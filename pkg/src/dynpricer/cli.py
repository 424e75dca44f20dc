"""Command-line experiment harness.

``dynpricer run CONFIG`` executes one experiment and writes ``trace.csv`` and
``summary.json`` to the output directory; ``dynpricer describe CONFIG``
prints the resolved hyperparameters, including theory-schedule defaults.

Exit status: 0 on success, 1 on any error, 2 when ``--assert-gap`` is given
and the achieved welfare misses the benchmark by more than the tolerance.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bun_to_price import BtpBudget, BunToPrice, price_radius
from .config import ConfigError, load_config
from .exceptions import DynPricerError
from .ground_truth import opt_lottery, structural_checks
from .limited_supply import (FixedDistribution, FixedPrice, deviation_bound, episode_streams,
                             run_episode)
from .market import RevealedPreferenceOracle, expected_demand, expected_welfare_price
from .owel import OWel, default_xi
from .unit_demand import GumbelPriceDistribution, OWelUD, distribution_demand_exact

EXIT_OK, EXIT_ERROR, EXIT_GAP = 0, 1, 2

_BTP_KEYS = ("epsilon", "delta", "restarts", "iterations", "validation_samples", "step", "radius")
_OWEL_KEYS = ("alpha", "delta", "epsilon", "xi", "iterations", "step", "scale", "inner_iterations",
              "inner_validation", "inner_restarts", "inner_step", "inner_radius")


@dataclass
class RunRecord:
    """Trace rows plus the summary fields computed from them."""

    dim: int
    rows: list = field(default_factory=list)
    query_count: int = 0
    benchmark: float | None = None
    achieved: float | None = None
    tolerance: float | None = None
    details: dict = field(default_factory=dict)

    @property
    def gap(self):
        if self.benchmark is None or self.achieved is None:
            return None
        return self.benchmark - self.achieved

    def add(self, iteration, x, p, queries, welfare):
        self.rows.append((iteration, x, p, queries, welfare))


def _subset(params, keys):
    return {k: params[k] for k in keys if k in params}


def _require(params, key):
    if key not in params:
        raise ConfigError(f"params.{key}: required")
    return params[key]


def _num(x):
    return None if x is None else float(x)


def _run_buntoprice(cfg):
    m = cfg.market
    target = _require(cfg.params, "target")
    oracle = RevealedPreferenceOracle(m, cfg.seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        est = BunToPrice(**_subset(cfg.params, _BTP_KEYS)).fit(oracle, target)
    rec = RunRecord(m.dim, query_count=est.n_queries_)
    b = est.budget_
    for k, (x, p) in enumerate(zip(est.validation_bundles_, est.candidates_)):
        queries = b.restarts * b.iterations + (k + 1) * b.validation_samples
        welfare = expected_welfare_price(m, p) if cfg.oracle else None
        rec.add(k + 1, x, p, queries, welfare)
    rec.details = {"price": est.price_.tolist(), "target": est.target_.tolist(),
                   "converged": est.converged_, "selected": est.best_index_ + 1}
    if cfg.oracle:
        # Gap is the distance to the target; the tolerance is epsilon.
        rec.benchmark = 0.0
        rec.achieved = est.score(m)
        rec.tolerance = float(est.epsilon)
    return rec


def _run_owel(cfg, unit_demand=False):
    m = cfg.market
    keys = _OWEL_KEYS + (("eta",) if unit_demand else ())
    cls = OWelUD if unit_demand else OWel
    oracle = RevealedPreferenceOracle(m, cfg.seed)
    est = cls(**_subset(cfg.params, keys)).fit(oracle)
    tr = est.trace_

    def welfare(p):
        if not cfg.oracle:
            return None
        if unit_demand:
            return distribution_demand_exact(m, GumbelPriceDistribution(p - p[-1], est.eta_))[1]
        return expected_welfare_price(m, p)

    rec = RunRecord(m.dim, query_count=est.n_queries_)
    for t in range(len(tr)):
        rec.add(t + 1, tr.bundles[t], tr.prices[t], int(tr.queries[t]), welfare(tr.prices[t]))
    rec.add(len(tr) + 1, tr.average_bundle, tr.final_price, tr.final_queries, welfare(tr.final_price))
    params = est.params_
    rec.details = {"price": est.price_.tolist(), "xi": params.xi, "epsilon": params.epsilon,
                   "iterations": params.iterations, "step": params.step}
    if unit_demand:
        rec.details.update(base=est.distribution_.base.tolist(), eta=est.eta_)
    if cfg.oracle:
        rec.benchmark = opt_lottery(m)
        rec.achieved = rec.rows[-1][4]
        if unit_demand:
            demand = distribution_demand_exact(m, est.distribution_)[0]
        else:
            demand = expected_demand(m, est.price_)
        rec.details["demand"] = demand.tolist()
        rec.details["supply_feasible"] = bool(np.all(demand <= m.supply + 1e-9))
        rec.tolerance = float(est.alpha)
    return rec


def _run_limited_supply(cfg):
    m = cfg.market
    params = cfg.params
    T = _require(params, "T")
    runs = params.get("runs", 50)
    if "distribution" in params:
        dist = GumbelPriceDistribution(params["distribution"]["base"], params["distribution"]["eta"])
        policy, shown = FixedDistribution(dist), dist.base
        per_round = distribution_demand_exact(m, dist)[1] if cfg.oracle else None
    else:
        price = np.asarray(_require(params, "price"), dtype=float)
        policy, shown = FixedPrice(price), price
        per_round = expected_welfare_price(m, price) if cfg.oracle else None

    rec = RunRecord(m.dim)
    rounds = 0
    Z = []
    for k, g in enumerate(episode_streams(cfg.seed, runs)):
        ep = run_episode(m, policy, m.supply, T, g)
        rounds += ep.tau
        Z.append(ep.total_welfare)
        rec.add(k + 1, ep.consumption[-1] / T, shown, rounds, ep.total_welfare)
    rec.query_count = rounds
    Z = np.asarray(Z)
    stderr = float(Z.std(ddof=1) / np.sqrt(runs)) if runs > 1 else None
    rec.details = {"runs": runs, "T": T, "stderr": stderr}
    if cfg.oracle:
        rec.benchmark = T * per_round
        rec.achieved = float(Z.mean())
        s_min = float(m.supply[:-1].min() if m.unit_demand else m.supply.min())
        bound = deviation_bound(T, s_min)
        rec.details["deviation_bound"] = bound
        rec.tolerance = bound + 3.0 * (stderr or 0.0)
    return rec


def _run_structural(cfg):
    m = cfg.market
    trials = cfg.params.get("trials", 200)
    report = structural_checks(m, trials, rng=cfg.seed)
    rec = RunRecord(m.dim)
    for k, v in enumerate(report.violations):
        rec.add(k + 1, np.asarray(v.x), None, 0, v.excess)
    rec.details = {"counts": report.counts, "violations": len(report.violations)}
    # gap = number of violations
    rec.benchmark = 0.0
    rec.achieved = 0.0 - len(report.violations)
    rec.tolerance = 0.0
    return rec


_EXPERIMENTS = {
    "buntoprice": _run_buntoprice,
    "owel": _run_owel,
    "owel-ud": lambda cfg: _run_owel(cfg, unit_demand=True),
    "limited-supply": _run_limited_supply,
    "structural-checks": _run_structural,
}


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return repr(float(value))


def trace_columns(dim):
    return (["iteration"] + [f"x_{j + 1}" for j in range(dim)]
            + [f"p_{j + 1}" for j in range(dim)] + ["queries_cumulative", "oracle_welfare"])


def render_trace(rec):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(trace_columns(rec.dim))
    blank = [None] * rec.dim
    for it, x, p, queries, welfare in rec.rows:
        xs = blank if x is None else list(x)
        ps = blank if p is None else list(p)
        writer.writerow([_fmt(int(it))] + [_fmt(v) for v in xs] + [_fmt(v) for v in ps]
                        + [_fmt(int(queries)), _fmt(welfare)])
    return buf.getvalue()


def _atomic_write(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run_experiment(cfg):
    """Execute one configured experiment; returns ``(record, summary)``."""
    start = time.perf_counter()
    rec = _EXPERIMENTS[cfg.algorithm](cfg)
    summary = {
        "algorithm": cfg.algorithm,
        "seed": cfg.seed,
        "query_count": int(rec.query_count),
        "benchmark": _num(rec.benchmark),
        "achieved": _num(rec.achieved),
        "gap": _num(rec.gap),
        "tolerance": _num(rec.tolerance),
        "runtime_seconds": time.perf_counter() - start,
        "config_hash": cfg.hash,
        "details": rec.details,
    }
    return rec, summary


def cmd_run(args):
    cfg = load_config(args.config, seed=args.seed, out=args.out)
    if args.assert_gap and not cfg.oracle:
        raise ConfigError("oracle: --assert-gap needs the ground-truth oracle enabled")
    out = cfg.out or Path("results")
    rec, summary = run_experiment(cfg)
    _atomic_write(out / "trace.csv", render_trace(rec))
    _atomic_write(out / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    gap, tol = summary["gap"], summary["tolerance"]
    print(f"{cfg.algorithm}: benchmark={summary['benchmark']} achieved={summary['achieved']} "
          f"gap={gap} queries={summary['query_count']} -> {out}")
    if args.assert_gap and (gap is None or tol is None or gap > tol):
        print(f"gap {gap} exceeds tolerance {tol}", file=sys.stderr)
        return EXIT_GAP
    return EXIT_OK


def describe_config(cfg):
    """Resolved hyperparameters as ``(name, value)`` pairs."""
    m = cfg.market
    p = cfg.params
    lam, beta = m.holder
    lines = [("algorithm", cfg.algorithm), ("seed", cfg.seed), ("d", m.dim),
             ("lambda", lam), ("beta", beta)]
    if cfg.algorithm == "buntoprice":
        est = BunToPrice(**_subset(p, _BTP_KEYS))
        budget = est.budget()
        radius = est.radius if est.radius is not None else price_radius(m.dim, lam, beta, m.sigma, est.epsilon)
        theory = BtpBudget.theory(m.dim, lam, beta, m.sigma, est.epsilon, est.delta, m.norm_bound,
                                  scale=p.get("scale", 1e-3))
        lines += [("sigma", m.sigma), ("epsilon", est.epsilon), ("delta", est.delta),
                  ("radius", radius), ("restarts", budget.restarts),
                  ("iterations", budget.iterations), ("validation_samples", budget.validation_samples),
                  ("step", budget.step if budget.step is not None else m.sigma),
                  ("theory_iterations", theory.iterations),
                  ("theory_validation_samples", theory.validation_samples)]
    elif cfg.algorithm in ("owel", "owel-ud"):
        ud = cfg.algorithm == "owel-ud"
        est = (OWelUD if ud else OWel)(**_subset(p, _OWEL_KEYS + (("eta",) if ud else ())))
        learn = m.regularized(est.temperature(m)) if ud else m
        lam, beta = learn.holder
        r = est.resolve(m)
        lines += [("sigma", learn.sigma), ("alpha", r.alpha), ("delta", r.delta),
                  ("xi_default", default_xi(r.alpha, lam, beta, learn.dim, learn.costs)),
                  ("xi", r.xi), ("epsilon", r.epsilon), ("T", r.iterations), ("step", r.step),
                  ("radius", r.radius), ("inner_delta", r.inner_delta),
                  ("shrink_loss", r.shrink_loss)]
        if ud:
            lines.append(("eta", est.temperature(m)))
    elif cfg.algorithm == "limited-supply":
        T = _require(p, "T")
        s_min = float(m.supply[:-1].min() if m.unit_demand else m.supply.min())
        try:
            bound = deviation_bound(T, s_min)
        except DynPricerError as exc:
            bound = f"n/a ({exc})"
        lines += [("T", T), ("runs", p.get("runs", 50)), ("s_min", s_min), ("deviation_bound", bound)]
    else:
        lines += [("trials", p.get("trials", 200))]
    return lines


def _show(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def cmd_describe(args):
    cfg = load_config(args.config)
    for name, value in describe_config(cfg):
        print(f"{name}: {_show(value)}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="dynpricer", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment")
    run.add_argument("config")
    run.add_argument("--assert-gap", action="store_true",
                     help="exit 2 if the welfare gap exceeds the configured tolerance")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--out", default=None)
    run.set_defaults(func=cmd_run)
    desc = sub.add_parser("describe", help="print resolved hyperparameters")
    desc.add_argument("config")
    desc.set_defaults(func=cmd_describe)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DynPricerError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
