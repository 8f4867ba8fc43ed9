"""Command-line front end.

Exit codes: 0 success, 1 an enumeration or size guard was exceeded, 2 bad
input (the message carries a JSON pointer into the instance).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .amortize import chain_from_distribution, surrogate_values
from .chains import GuardExceeded, InstanceError, unroll_to_tree, validate_instance
from .constraints import ConstraintError
from .distributions import DistributionError
from .exante import ex_ante_opt_cics, ex_ante_value_bcs
from .instances import (
    bcs_from_json,
    bernoulli_bcs,
    cics_from_json,
    load_json,
    min_example,
    min_example_bcs,
    min_example_chains,
    random_dist,
    weitzman_box,
)
from .amortize import fair_indices
from .policies import (
    chain_views,
    commitment_gap_empirical,
    committing_pipeline,
    evaluate_policy_mc,
    greedy_factory,
    optimal_cics_dp,
    optimal_committing_dp,
    policy_from_semi_online,
    evaluate_policy_exact,
)
from .selection import ex_post_brute_force, rule_for, semi_online_from_frugal, semi_online_value

CSV_COLUMNS = ["instance", "benchmark", "value", "method", "seed", "runtime_ms"]


@dataclass
class RunConfig:
    command: str
    seed: int = 0
    trials: int = 100
    format: str = "json"
    tolerance: float = 1e-9
    out: str | None = None
    timing: bool = False


def _label(path: str, doc: dict) -> str:
    return doc.get("name") or Path(path).stem


def _rows_to_csv(rows: list) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: r.get(k, "") for k in CSV_COLUMNS})
    return buf.getvalue()


class _Timer:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.t0 = time.perf_counter()

    def ms(self) -> str:
        # runtimes break byte-identical output, so they are opt-in
        if not self.cfg.timing:
            return ""
        return f"{(time.perf_counter() - self.t0) * 1000:.3f}"


def _row(cfg: RunConfig, instance: str, benchmark: str, value, method: str, timer: _Timer) -> dict:
    return {"instance": instance, "benchmark": benchmark,
            "value": "" if value is None else repr(float(value)),
            "method": method, "seed": cfg.seed, "runtime_ms": timer.ms()}


# --------------------------------------------------------------------------
# commands: each returns (json document, csv rows)


def cmd_validate(cfg: RunConfig, path: str) -> tuple:
    doc = load_json(path)
    label = _label(path, doc)
    out: dict = {"instance": label, "ok": True}
    if "mdps" in doc:
        inst = cics_from_json(doc)
        out["mdps"] = validate_instance(inst.mdps, inst.constraint)["mdps"]
        out["constraint"] = inst.constraint.kind
        out["objective"] = inst.objective
    if "dists" in doc:
        b = bcs_from_json(doc)
        out["dists"] = len(b.dists)
        out["constraint"] = b.constraint.kind
    if "mdps" not in doc and "dists" not in doc:
        raise InstanceError("instance needs 'mdps' or 'dists'", "")
    return out, [{"instance": label, "benchmark": "valid", "value": "1.0", "method": "check",
                  "seed": cfg.seed, "runtime_ms": ""}]


def cmd_amortize(cfg: RunConfig, path: str) -> tuple:
    doc = load_json(path)
    inst = cics_from_json(doc)
    label = _label(path, doc)
    timer = _Timer(cfg)
    out = {"instance": label, "chains": []}
    rows = []
    for i, m in enumerate(inst.mdps):
        if not m.is_chain():
            raise InstanceError("amortize needs Markov chains (one action per state)",
                                f"/mdps/{i}")
        prof = surrogate_values(unroll_to_tree(m))
        out["chains"].append(prof.to_json())
        rows.append(_row(cfg, label, f"mean_W[{i}]", prof.W.mean(), "exact", timer))
    return out, rows


def cmd_exante(cfg: RunConfig, path: str) -> tuple:
    doc = load_json(path)
    label = _label(path, doc)
    timer = _Timer(cfg)
    if "mdps" in doc:
        inst = cics_from_json(doc)
        res = ex_ante_opt_cics(inst.constraint, inst.mdps, inst.objective)
        out = {"instance": label, **res.to_json(with_commitment=True)}
        return out, [_row(cfg, label, "ex_ante_cics", res.value, "exact", timer)]
    b = bcs_from_json(doc)
    sol = ex_ante_value_bcs(b.constraint, b.dists, b.objective)
    out = {"instance": label, "objective": b.objective, "value": float(sol.value),
           "q": [float(x) for x in sol.q]}
    return out, [_row(cfg, label, "ex_ante_bcs", sol.value, "exact", timer)]


def cmd_bcs(cfg: RunConfig, sub: str, path: str, rule: str | None) -> tuple:
    doc = load_json(path)
    b = bcs_from_json(doc)
    label = _label(path, doc)
    timer = _Timer(cfg)
    if sub == "expost":
        v = ex_post_brute_force(b.constraint, b.dists, b.objective)
        return ({"instance": label, "benchmark": "ex_post", "value": v},
                [_row(cfg, label, "ex_post", v, "enumeration", timer)])
    if sub == "exante":
        sol = ex_ante_value_bcs(b.constraint, b.dists, b.objective)
        return ({"instance": label, "benchmark": "ex_ante", "value": float(sol.value),
                 "q": [float(x) for x in sol.q]},
                [_row(cfg, label, "ex_ante", sol.value, "exact", timer)])
    if b.objective == "min":
        dists = [d.negate() for d in b.dists]
        sign = -1.0
    else:
        dists, sign = b.dists, 1.0
    fr = rule_for(b.constraint, rule)
    alg = semi_online_from_frugal(fr, b.constraint, dists)
    v = sign * semi_online_value(alg, dists)
    return ({"instance": label, "benchmark": "semi_online", "rule": fr.name, "value": v},
            [_row(cfg, label, f"semi_online_{fr.name}", v, "enumeration", timer)])


def cmd_pipeline(cfg: RunConfig, path: str, rule: str | None, monte_carlo: bool) -> tuple:
    doc = load_json(path)
    inst = cics_from_json(doc)
    label = _label(path, doc)
    timer = _Timer(cfg)
    res = committing_pipeline(inst, rule)
    out = {"instance": label, **res.to_json()}
    rows = [_row(cfg, label, "ex_ante", res.ex_ante, "exact", timer),
            _row(cfg, label, "pipeline", res.evaluation.objective_value, "exact", timer)]
    if monte_carlo:
        mc = evaluate_policy_mc(res.committed, res.policy, cfg.trials, cfg.seed)
        out["monte_carlo"] = mc.to_json()
        rows.append(_row(cfg, label, "pipeline", mc.objective_value, "monte_carlo", timer))
    return out, rows


def cmd_optimal(cfg: RunConfig, path: str) -> tuple:
    doc = load_json(path)
    inst = cics_from_json(doc)
    label = _label(path, doc)
    timer = _Timer(cfg)
    opt = optimal_cics_dp(inst)
    com, commitments = optimal_committing_dp(inst)
    out = {"instance": label, "objective": inst.objective, "opt": opt, "committing_opt": com,
           "best_commitments": [c.to_json() for c in commitments]}
    return out, [_row(cfg, label, "opt", opt, "dp", timer),
                 _row(cfg, label, "committing_opt", com, "dp", timer)]


def cmd_gap(cfg: RunConfig, path: str) -> tuple:
    doc = load_json(path)
    inst = cics_from_json(doc)
    label = _label(path, doc)
    timer = _Timer(cfg)
    rep = commitment_gap_empirical(inst)
    out = {"instance": label, **rep.to_json()}
    rows = [_row(cfg, label, k, v, "exact", timer) for k, v in rep.to_json().items()
            if k != "objective" and v is not None]
    return out, rows


# --------------------------------------------------------------------------
# reproduction suite


def _compare(cfg: RunConfig, rows: list, quantity: str, expected, computed) -> None:
    err = abs(float(expected) - float(computed))
    rows.append({"quantity": quantity, "expected": float(expected), "computed": float(computed),
                 "abs_error": err, "ok": err <= cfg.tolerance})


def _reproduce_min_example(cfg: RunConfig, N: int) -> list:
    rows: list = []
    inst = min_example(N)
    _compare(cfg, rows, "opt", 2 / (N + 1), optimal_cics_dp(inst))
    _compare(cfg, rows, "committing_opt", 1.0, optimal_committing_dp(inst)[0])
    rep = commitment_gap_empirical(inst)
    _compare(cfg, rows, "com_gap", (N + 1) / 2, rep.com_gap)
    _compare(cfg, rows, "ex_ante_cics", 1 / N, rep.ex_ante)
    b = min_example_bcs(N)
    _compare(cfg, rows, "bcs_ex_post", 1.0, ex_post_brute_force(b.constraint, b.dists, "min"))
    _compare(cfg, rows, "bcs_ex_ante", 1 / N,
             ex_ante_value_bcs(b.constraint, b.dists, "min").value)
    ch = min_example_chains(N)
    ev = evaluate_policy_exact(ch, policy_from_semi_online(ch, greedy_factory()))
    _compare(cfg, rows, "semi_online_policy_cost", 1.0, ev.objective_value)
    return rows


def _reproduce_bernoulli(cfg: RunConfig, n: int) -> list:
    rows: list = []
    b = bernoulli_bcs(n)
    expost = 1 - (1 - 1 / n) ** n
    _compare(cfg, rows, "ex_post", expost, ex_post_brute_force(b.constraint, b.dists))
    ea = ex_ante_value_bcs(b.constraint, b.dists).value
    _compare(cfg, rows, "ex_ante", 1.0, ea)
    _compare(cfg, rows, "ratio", 1 / expost, ea / ex_post_brute_force(b.constraint, b.dists))
    alg = semi_online_from_frugal(rule_for(b.constraint), b.constraint, b.dists)
    _compare(cfg, rows, "semi_online", expost, semi_online_value(alg, b.dists))
    return rows


def _reproduce_weitzman(cfg: RunConfig) -> list:
    rows: list = []
    inst = weitzman_box()
    view = chain_views(inst)[0]
    _compare(cfg, rows, "fair_index", 1.0, fair_indices(view.tree)[view.tree.root.id])
    _compare(cfg, rows, "opt", 0.5, optimal_cics_dp(inst))
    _compare(cfg, rows, "ex_ante", 0.5, ex_ante_opt_cics(inst.constraint, inst.mdps).value)
    _compare(cfg, rows, "pipeline", 0.5, committing_pipeline(inst).evaluation.objective_value)
    return rows


def _reproduce_md_roundtrip(cfg: RunConfig, k: int) -> list:
    rng = np.random.default_rng(cfg.seed)
    val_err = prob_err = 0.0
    for _ in range(cfg.trials):
        d = random_dist(rng, k_max=k, exact=True)
        W = surrogate_values(chain_from_distribution(d, 1e-4, exact=True)).W
        if len(W.atoms) != len(d.atoms):
            val_err = math.inf
            continue
        for (v1, p1), (v2, p2) in zip(d.atoms, W.atoms):
            val_err = max(val_err, abs(float(v1 - v2)))
            prob_err = max(prob_err, abs(float(p1 - p2)))
    rows: list = []
    _compare(cfg, rows, "max_value_error", 0.0, val_err)
    _compare(cfg, rows, "max_prob_error", 0.0, prob_err)
    return rows


def cmd_reproduce(cfg: RunConfig, name: str, N: int, n: int, k: int) -> tuple:
    timer = _Timer(cfg)
    if name == "min-example":
        rows, label = _reproduce_min_example(cfg, N), f"min_example_N{N}"
    elif name == "bernoulli":
        rows, label = _reproduce_bernoulli(cfg, n), f"bernoulli_n{n}"
    elif name == "weitzman":
        rows, label = _reproduce_weitzman(cfg), "weitzman"
    elif name == "md-roundtrip":
        rows, label = _reproduce_md_roundtrip(cfg, k), f"md_roundtrip_k{k}"
    else:
        raise InstanceError(f"unknown reproduction {name!r}", "")
    out = {"instance": label, "tolerance": cfg.tolerance, "rows": rows,
           "all_ok": all(r["ok"] for r in rows)}
    csv_rows = []
    for r in rows:
        csv_rows.append(_row(cfg, label, r["quantity"], r["expected"], "reference", timer))
        csv_rows.append(_row(cfg, label, r["quantity"], r["computed"], "computed", timer))
    return out, csv_rows


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--trials", type=int, default=100)
    common.add_argument("--format", choices=["json", "csv"], default="json")
    common.add_argument("--tolerance", type=float, default=1e-9)
    common.add_argument("--out", help="write output to this file instead of stdout")
    common.add_argument("--timing", action="store_true",
                        help="fill the runtime_ms column (output is then not reproducible)")

    p = argparse.ArgumentParser(prog="cics", description="Costly-information selection toolkit")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("validate", "amortize", "exante", "optimal", "gap"):
        sp = sub.add_parser(name, parents=[common])
        sp.add_argument("path")
    sp = sub.add_parser("pipeline", parents=[common])
    sp.add_argument("path")
    sp.add_argument("--rule", choices=["matroid", "ksystem", "knapsack"])
    sp.add_argument("--monte-carlo", action="store_true",
                    help="also estimate the policy by sampling --trials play-outs")
    sp = sub.add_parser("bcs", parents=[common])
    sp.add_argument("which", choices=["expost", "exante", "semionline"])
    sp.add_argument("path")
    sp.add_argument("--rule", choices=["matroid", "ksystem", "knapsack"])
    sp = sub.add_parser("reproduce", parents=[common])
    sp.add_argument("name", choices=["min-example", "bernoulli", "weitzman", "md-roundtrip"])
    sp.add_argument("--N", type=int, default=3)
    sp.add_argument("--n", type=int, default=3)
    sp.add_argument("--k", type=int, default=4)
    return p


def run(argv: list | None = None) -> tuple:
    """Parse ``argv`` and run; returns ``(exit code, stdout text, stderr text)``."""
    args = build_parser().parse_args(argv)
    if args.trials < 1:
        return 2, "", json.dumps({"error": "--trials must be at least 1", "pointer": ""}) + "\n"
    cfg = RunConfig(args.command, args.seed, args.trials, args.format, args.tolerance,
                    args.out, args.timing)
    try:
        if cfg.command == "validate":
            doc, rows = cmd_validate(cfg, args.path)
        elif cfg.command == "amortize":
            doc, rows = cmd_amortize(cfg, args.path)
        elif cfg.command == "exante":
            doc, rows = cmd_exante(cfg, args.path)
        elif cfg.command == "bcs":
            doc, rows = cmd_bcs(cfg, args.which, args.path, args.rule)
        elif cfg.command == "pipeline":
            doc, rows = cmd_pipeline(cfg, args.path, args.rule, args.monte_carlo)
        elif cfg.command == "optimal":
            doc, rows = cmd_optimal(cfg, args.path)
        elif cfg.command == "gap":
            doc, rows = cmd_gap(cfg, args.path)
        else:
            doc, rows = cmd_reproduce(cfg, args.name, args.N, args.n, args.k)
    except GuardExceeded as exc:
        return 1, "", json.dumps({"error": str(exc)}) + "\n"
    except InstanceError as exc:
        return 2, "", json.dumps({"error": str(exc), "pointer": exc.pointer}) + "\n"
    except (ConstraintError, DistributionError, OSError) as exc:
        return 2, "", json.dumps({"error": str(exc), "pointer": ""}) + "\n"
    if cfg.format == "csv":
        text = _rows_to_csv(rows)
    else:
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if cfg.out:
        Path(cfg.out).write_text(text)
        return 0, "", ""
    return 0, text, ""


def main(argv: list | None = None) -> int:
    code, out, err = run(argv)
    sys.stdout.write(out)
    sys.stderr.write(err)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
