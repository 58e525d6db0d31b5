"""Experiment runners that turn a validated spec into plot-ready tables.

Each runner returns a list of :class:`Table` objects and a summary dict.
Tables are written as CSV with a leading ``# greentopo-csv`` comment naming
the schema version, the experiment and the table. Floats are written with
``repr`` so identical inputs give byte-identical files.

Sweep points are independent, so they may be evaluated by a process pool;
rows are always emitted in sweep order.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentSpec
from .coverage import SurrogateKind, psi_closed4, psi_exact, psi_surrogate
from .errors import DomainError, InfeasibleError
from .mcsim import SimConfig, coverage_curve
from .model import PowerModel, Topology, apc, db_to_linear, dbm_to_watts, linear_to_db
from .optimizer import (
    Solution,
    given_beta_solve,
    grid_oracle,
    integer_beta_variants,
    p_star,
    prop1_refine,
    prop1_solve,
    prop2_candidates,
    prop2_refine,
    prop2_solve,
    required_power,
)

__all__ = ["SCHEMA_VERSION", "Table", "run_experiment", "write_outputs", "format_value"]

SCHEMA_VERSION = 1

SOLUTION_COLUMNS = ["lam", "p_w", "p_dbm", "beta", "case", "apc_total", "apc_reduced",
                    "psi", "feasible", "violations", "provenance", "residuals"]


@dataclass
class Table:
    name: str
    columns: list
    rows: list = field(default_factory=list)

    def add(self, **values):
        unknown = set(values) - set(self.columns)
        if unknown:
            raise KeyError(f"{self.name}: unknown columns {sorted(unknown)}")
        self.rows.append([values.get(c) for c in self.columns])


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return repr(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, dict):
        return ";".join(f"{k}={format_value(v[k])}" for k in sorted(v))
    if isinstance(v, (list, tuple)):
        return "|".join(format_value(x) for x in v)
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(v[k]) for k in v}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, (int, np.integer)):
        return int(v)
    return v


def _pmap(fn, items, workers):
    """Order-preserving map, optionally over a process pool."""
    items = list(items)
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def _solution_fields(sol: Solution) -> dict:
    return dict(lam=sol.lam, p_w=sol.p, p_dbm=10 * math.log10(sol.p) + 30, beta=sol.beta,
                case=sol.case.value if sol.case else None, apc_total=sol.apc_total,
                apc_reduced=sol.apc_reduced, psi=sol.psi_achieved, feasible=sol.feasible,
                violations=list(sol.violations), provenance=sol.provenance,
                residuals=sol.residuals)


def _solution_record(sol: Solution) -> dict:
    d = _solution_fields(sol)
    d["violations"] = list(sol.violations)
    d["residuals"] = dict(sol.residuals)
    return d


def _infeasible_fields(provenance: str, exc: InfeasibleError) -> dict:
    return dict(feasible=False, violations=[exc.assumption or str(exc)],
                provenance=provenance + "/infeasible",
                residuals={"achieved": exc.achieved} if exc.achieved is not None else {})


def _power_model(spec: ExperimentSpec, ratio=None, delta_p=None) -> PowerModel:
    pm = spec.pm
    if ratio is not None:
        pm = PowerModel.from_sleep_ratio(ratio, pm.p_active_standby, pm.delta_p, pm.p_max)
    if delta_p is not None:
        pm = pm.with_(delta_p=delta_p)
    return pm


# ---------------------------------------------------------------------------
# coverage-curves
# ---------------------------------------------------------------------------

_SURROGATE_COLUMNS = {
    SurrogateKind.LB_E: "psi_lb_e",
    SurrogateKind.LB_BETA: "psi_lb_beta",
    SurrogateKind.APPROX_A: "psi_approx_a",
    SurrogateKind.LB_Q: "psi_lb_q",
}


def _surrogate_values(top, env):
    out = {}
    for kind, col in _SURROGATE_COLUMNS.items():
        if kind is SurrogateKind.LB_Q and env.alpha != 4:
            continue
        out[col] = float(psi_surrogate(kind, top, env))
    return out


def run_coverage_curves(spec: ExperimentSpec):
    env = spec.env
    lambdas = spec.params.get("lambdas", [0.2, 0.5])
    betas = spec.params.get("betas", [1.0, 2.0])
    p = spec.params.get("p_tx", dbm_to_watts(39.0))
    xi_db = spec.params.get("xi_db", [float(x) for x in range(-10, 11)])
    cols = ["lam", "beta", "p_w", "xi_db", "psi_exact", "psi_closed4",
            *_SURROGATE_COLUMNS.values(), "mc_psi", "mc_ci_halfwidth", "mc_trials",
            "mc_window_km", "mc_truncation_bias", "mc_redrawn", "provenance", "residuals"]
    table = Table("curves", cols)
    summary = {"max_abs_mc_minus_exact": None, "max_abs_closed4_minus_exact": 0.0}
    worst_mc = 0.0
    for lam in lambdas:
        for beta in betas:
            top = Topology(lam, p, beta)
            mc = None
            if spec.oracle:
                # Every curve shares the seed: common random numbers across lambda and beta.
                cfg = SimConfig(env, top, trials=spec.trials, seed=spec.seed,
                                workers=spec.workers)
                mc = coverage_curve(cfg, [db_to_linear(x) for x in xi_db])
            for i, x in enumerate(xi_db):
                e = env.with_(xi=db_to_linear(x))
                ex = psi_exact(top, e)
                row = dict(lam=lam, beta=beta, p_w=p, xi_db=x, psi_exact=ex,
                           **_surrogate_values(top, e))
                res = {}
                prov = "quadrature"
                if env.alpha == 4:
                    row["psi_closed4"] = psi_closed4(top, e)
                    res["closed4_minus_exact"] = row["psi_closed4"] - ex
                    summary["max_abs_closed4_minus_exact"] = max(
                        summary["max_abs_closed4_minus_exact"], abs(res["closed4_minus_exact"]))
                if mc is not None:
                    r = mc[i]
                    row.update(mc_psi=r.psi_hat, mc_ci_halfwidth=r.ci_halfwidth,
                               mc_trials=r.trials_used, mc_window_km=r.window_radius,
                               mc_truncation_bias=r.truncation_bias, mc_redrawn=r.redrawn_trials)
                    res["mc_minus_exact"] = r.psi_hat - ex
                    worst_mc = max(worst_mc, abs(r.psi_hat - ex))
                    prov += "+monte-carlo"
                table.add(**row, provenance=prov, residuals=res)
    if spec.oracle:
        summary["max_abs_mc_minus_exact"] = worst_mc
        summary["mc_trials"] = spec.trials
    return [table], summary


# ---------------------------------------------------------------------------
# contour
# ---------------------------------------------------------------------------

def run_contour(spec: ExperimentSpec):
    env, cn = spec.env, spec.cn
    etas = spec.params.get("etas", [0.8, 0.9])
    betas = spec.params.get("betas", [1.0, 2.0])
    n = spec.params.get("grid_points", 40)
    lambdas = spec.params.get("lambdas") or list(np.geomspace(cn.lambda_l / 4, cn.lambda_u, n))
    kinds = [SurrogateKind.EXACT, SurrogateKind.LB_E, SurrogateKind.LB_BETA,
             SurrogateKind.APPROX_A]
    if env.alpha == 4:
        kinds.append(SurrogateKind.LB_Q)
    # The contour is traced well past P_max so the boundary is visible everywhere.
    p_upper = spec.pm.p_max * 1e4
    cols = ["eta", "beta", "kind", "lam", "p_w", "p_dbm", "status", "provenance", "residuals"]
    table = Table("contour", cols)
    for eta in etas:
        for beta in betas:
            for kind in kinds:
                for lam in lambdas:
                    prov = f"bisection/{kind.value}"
                    try:
                        r = required_power(kind, lam, beta, env, eta, p_upper, full_output=True)
                    except InfeasibleError as exc:
                        table.add(eta=eta, beta=beta, kind=kind.value, lam=float(lam),
                                  status="unreachable", provenance=prov,
                                  residuals={"achieved": exc.achieved})
                        continue
                    table.add(eta=eta, beta=beta, kind=kind.value, lam=float(lam), p_w=r.value,
                              p_dbm=10 * math.log10(r.value) + 30,
                              status="degenerate" if r.degenerate else "ok", provenance=prov,
                              residuals={"psi_minus_eta": r.psi - eta,
                                         "iterations": r.iterations})
    return [table], {"rows": len(table.rows)}


# ---------------------------------------------------------------------------
# apc-ufr
# ---------------------------------------------------------------------------

def _ufr_curve_point(args):
    env, pm, cn, lam = args
    try:
        r = p_star(lam, 1.0, env, pm, cn, full_output=True)
    except InfeasibleError as exc:
        return None, exc
    return r, None


def run_apc_ufr(spec: ExperimentSpec):
    cn = spec.cn.with_(eta=spec.params.get("eta", spec.cn.eta))
    alphas = spec.params.get("alphas", [4.0, 5.0])
    ratios = spec.params.get("sleep_ratios", [0.1, 0.3, 0.5, 0.7])
    n = spec.params.get("grid_points", 81)
    lambdas = spec.params.get("lambdas") or list(np.linspace(cn.lambda_l, cn.lambda_u, n))
    curve = Table("curves", ["alpha", "sleep_ratio", "lam", "p_w", "p_dbm", "apc_total",
                             "apc_reduced", "apc_ratio", "psi", "status", "provenance",
                             "residuals"])
    sols = Table("solutions", ["alpha", "sleep_ratio", "variant", *SOLUTION_COLUMNS,
                               "apc_ratio"])
    summary = {"eta": cn.eta, "min_ratio": {}, "solutions": [], "oracle": []}
    for alpha in alphas:
        env = spec.env.with_(alpha=alpha)
        for ratio in ratios:
            pm = _power_model(spec, ratio)
            top_max = Topology(cn.lambda_u, pm.p_max, 1.0)
            apc_max = apc(top_max, pm, cn)
            best = math.inf
            results = _pmap(_ufr_curve_point, [(env, pm, cn, lam) for lam in lambdas],
                            spec.workers)
            for lam, (r, exc) in zip(lambdas, results):
                if r is None:
                    curve.add(alpha=alpha, sleep_ratio=ratio, lam=float(lam), status="infeasible",
                              provenance="p-star/infeasible",
                              residuals={"achieved": exc.achieved})
                    continue
                top = Topology(float(lam), r.value, 1.0)
                tot = apc(top, pm, cn)
                best = min(best, tot / apc_max)
                curve.add(alpha=alpha, sleep_ratio=ratio, lam=float(lam), p_w=r.value,
                          p_dbm=10 * math.log10(r.value) + 30, apc_total=tot,
                          apc_reduced=apc(top, pm, cn, reduced=True), apc_ratio=tot / apc_max,
                          psi=r.psi, status="degenerate" if r.degenerate else "ok",
                          provenance="p-star",
                          residuals={"psi_minus_eta": r.psi - cn.eta,
                                     "iterations": r.iterations})
            variants = []
            try:
                s1 = prop1_solve(env, pm, cn)
                variants += [("prop1", s1), ("prop1-refined", prop1_refine(s1, env, pm, cn))]
            except InfeasibleError as exc:
                sols.add(alpha=alpha, sleep_ratio=ratio, variant="prop1",
                         **_infeasible_fields("prop1", exc))
            if spec.oracle:
                res = spec.params.get("oracle_resolution", 200)
                for prob in ("tightened", "exact"):
                    o = grid_oracle(prob, res, env, pm, cn)
                    if o is not None:
                        variants.append((f"oracle-{prob}", o))
            for name, s in variants:
                rec = _solution_fields(s)
                sols.add(alpha=alpha, sleep_ratio=ratio, variant=name, **rec,
                         apc_ratio=s.apc_total / apc_max)
                if name == "prop1-refined" and s.feasible:
                    best = min(best, s.apc_total / apc_max)
                summary["solutions"].append({"alpha": alpha, "sleep_ratio": ratio,
                                             "variant": name, **_solution_record(s)})
            summary["min_ratio"][f"alpha={alpha:g},sleep_ratio={ratio:g}"] = (
                best if math.isfinite(best) else None)
            if spec.oracle:
                by = dict(variants)
                if "prop1" in by and "oracle-tightened" in by:
                    summary["oracle"].append({
                        "alpha": alpha, "sleep_ratio": ratio, "check": "tightened",
                        "oracle_minus_closed_form": by["oracle-tightened"].apc_reduced
                        - by["prop1"].apc_reduced})
                if "prop1-refined" in by and "oracle-exact" in by:
                    summary["oracle"].append({
                        "alpha": alpha, "sleep_ratio": ratio, "check": "exact",
                        "oracle_minus_refined": by["oracle-exact"].apc_reduced
                        - by["prop1-refined"].apc_reduced})
    vals = [v for v in summary["min_ratio"].values() if v is not None]
    summary["min_ratio_range"] = [min(vals), max(vals)] if vals else None
    summary["ratio_band"] = [0.15, 0.34]
    summary["all_in_band"] = bool(vals) and all(0.15 <= v <= 0.34 for v in vals)
    summary["n_feasible"] = sum(1 for s in summary["solutions"] if s["feasible"])
    return [curve, sols], summary


# ---------------------------------------------------------------------------
# apc-pfr
# ---------------------------------------------------------------------------

def _given_beta_point(args):
    env, pm, cn, beta = args
    try:
        raw = given_beta_solve(beta, env, pm, cn)
        return raw, prop1_refine(raw, env, pm, cn), None
    except InfeasibleError as exc:
        return None, None, exc


def _pfr_kinds(spec, alpha):
    kinds = spec.params.get("kinds")
    if kinds is None:
        kinds = ["lb-beta", "approx-a"] + (["lb-q"] if alpha == 4 else [])
    return [SurrogateKind.parse(k) for k in kinds]


def run_apc_pfr(spec: ExperimentSpec):
    cn = spec.cn.with_(eta=spec.params.get("eta", 0.9))
    alphas = spec.params.get("alphas", [4.0, 5.0])
    ratios = spec.params.get("sleep_ratios", [0.25, 0.5, 0.75, 1.0])
    beta_max = cn.lambda_u / cn.lambda_l
    n = spec.params.get("grid_points", 41)
    betas = spec.params.get("betas") or list(np.linspace(1.0, beta_max, n))
    curve = Table("curves", ["alpha", "sleep_ratio", "beta", "lam", "p_w", "p_dbm",
                             "apc_total", "apc_reduced", "apc_total_tightened", "psi", "case",
                             "status", "provenance", "residuals"])
    sols = Table("solutions", ["alpha", "sleep_ratio", "kind", "variant", *SOLUTION_COLUMNS])
    cands = Table("candidates", ["alpha", "sleep_ratio", "kind", *SOLUTION_COLUMNS])
    summary = {"eta": cn.eta, "solutions": [], "oracle": [], "coincidence": {}}
    for alpha in alphas:
        env = spec.env.with_(alpha=alpha)
        at_top = []
        for ratio in ratios:
            pm = _power_model(spec, ratio)
            results = _pmap(_given_beta_point, [(env, pm, cn, float(b)) for b in betas],
                            spec.workers)
            for beta, (raw, ref, exc) in zip(betas, results):
                if raw is None:
                    curve.add(alpha=alpha, sleep_ratio=ratio, beta=float(beta),
                              status="infeasible", provenance="given-beta/infeasible",
                              residuals={"achieved": exc.achieved})
                    continue
                curve.add(alpha=alpha, sleep_ratio=ratio, beta=float(beta), lam=ref.lam,
                          p_w=ref.p, p_dbm=10 * math.log10(ref.p) + 30,
                          apc_total=ref.apc_total, apc_reduced=ref.apc_reduced,
                          apc_total_tightened=raw.apc_total, psi=ref.psi_achieved,
                          case=ref.case.value, status="ok", provenance=ref.provenance,
                          residuals=ref.residuals)
                if abs(beta - beta_max) <= 1e-12 * beta_max:
                    at_top.append(ref.apc_total)
            for kind in _pfr_kinds(spec, alpha):
                try:
                    all_c = prop2_candidates(kind, env, pm, cn)
                except (InfeasibleError, DomainError) as exc:
                    sols.add(alpha=alpha, sleep_ratio=ratio, kind=kind.value, variant="prop2",
                             feasible=False, violations=[str(exc)],
                             provenance=f"prop2/{kind.value}/error")
                    continue
                for c in all_c:
                    cands.add(alpha=alpha, sleep_ratio=ratio, kind=kind.value,
                              **_solution_fields(c))
                try:
                    s = prop2_solve(kind, env, pm, cn)
                except InfeasibleError as exc:
                    sols.add(alpha=alpha, sleep_ratio=ratio, kind=kind.value, variant="prop2",
                             **_infeasible_fields(f"prop2/{kind.value}", exc))
                    continue
                variants = [("prop2", s), ("prop2-refined", prop2_refine(s, env, pm, cn))]
                if spec.integer_beta:
                    iv = integer_beta_variants(s, env, pm, cn)
                    variants += [(f"integer-{k}", iv[k]) for k in ("floor", "ceil")
                                 if iv[k] is not None]
                if spec.oracle:
                    res = spec.params.get("oracle_resolution", 100)
                    o = grid_oracle("surrogate", res, env, pm, cn, kind=kind, zoom=2)
                    if o is not None:
                        variants.append(("oracle-surrogate", o))
                        summary["oracle"].append({
                            "alpha": alpha, "sleep_ratio": ratio, "kind": kind.value,
                            "relative_gap": (s.apc_reduced - o.apc_reduced) / o.apc_reduced})
                for name, v in variants:
                    sols.add(alpha=alpha, sleep_ratio=ratio, kind=kind.value, variant=name,
                             **_solution_fields(v))
                    summary["solutions"].append({"alpha": alpha, "sleep_ratio": ratio,
                                                 "kind": kind.value, "variant": name,
                                                 **_solution_record(v)})
        if len(at_top) == len(ratios) and at_top:
            spread = (max(at_top) - min(at_top)) / min(at_top)
            summary["coincidence"][f"alpha={alpha:g}"] = {"beta": beta_max,
                                                          "relative_spread": spread}
    summary["n_feasible"] = sum(1 for s in summary["solutions"] if s["feasible"])
    return [curve, sols, cands], summary


# ---------------------------------------------------------------------------
# pwc-model-effect
# ---------------------------------------------------------------------------

def _is_monotone(values, increasing):
    vals = [v for v in values if v is not None]
    diffs = np.diff(vals)
    tol = 1e-12 * max(1.0, max(abs(v) for v in vals)) if vals else 0.0
    return bool(np.all(diffs >= -tol) if increasing else np.all(diffs <= tol))


def run_pwc_model_effect(spec: ExperimentSpec):
    alphas = spec.params.get("alphas", [4.0, 5.0])
    ratios = spec.params.get("sleep_ratios", [round(0.1 * i, 10) for i in range(1, 11)])
    delta_ps = spec.params.get("delta_ps", [2.6, 4.0, 4.7, 8.0])
    kind = SurrogateKind.parse(spec.params.get("kinds", ["approx-a"])[0])
    cn_ufr = spec.cn.with_(eta=spec.params.get("eta", spec.cn.eta))
    cn_pfr = spec.cn.with_(eta=0.9) if "eta" not in spec.params else cn_ufr
    table = Table("density", ["mode", "alpha", "delta_p", "sleep_ratio", "p_bar",
                              *SOLUTION_COLUMNS])
    lam_of = {}
    for mode in ("ufr", "pfr"):
        cn = cn_ufr if mode == "ufr" else cn_pfr
        for alpha in alphas:
            env = spec.env.with_(alpha=alpha)
            for dp in delta_ps:
                for ratio in ratios:
                    pm = _power_model(spec, ratio, dp)
                    try:
                        s = prop1_solve(env, pm, cn) if mode == "ufr" else prop2_solve(kind, env, pm, cn)
                    except InfeasibleError as exc:
                        prov = "prop1" if mode == "ufr" else f"prop2/{kind.value}"
                        table.add(mode=mode, alpha=alpha, delta_p=dp, sleep_ratio=ratio,
                                  p_bar=pm.p_bar, **_infeasible_fields(prov, exc))
                        lam_of[(mode, alpha, dp, ratio)] = None
                        continue
                    table.add(mode=mode, alpha=alpha, delta_p=dp, sleep_ratio=ratio,
                              p_bar=pm.p_bar, **_solution_fields(s))
                    lam_of[(mode, alpha, dp, ratio)] = s.lam
    checks = {}
    for mode in ("ufr", "pfr"):
        for alpha in alphas:
            key = f"{mode},alpha={alpha:g}"
            in_pbar = all(_is_monotone([lam_of[(mode, alpha, dp, r)] for r in ratios], False)
                          for dp in delta_ps)
            in_dp = all(_is_monotone([lam_of[(mode, alpha, dp, r)] for dp in delta_ps], True)
                        for r in ratios)
            checks[key] = {"lambda_nonincreasing_in_p_bar": in_pbar,
                           "lambda_nondecreasing_in_delta_p": in_dp}
    return [table], {"pfr_kind": kind.value, "eta_ufr": cn_ufr.eta, "eta_pfr": cn_pfr.eta,
                     "monotonicity": checks}


# ---------------------------------------------------------------------------
# custom
# ---------------------------------------------------------------------------

def run_custom(spec: ExperimentSpec):
    """One problem on the configured parameters.

    ``problem`` is ``prop1`` (default), ``given-beta``, ``prop2`` or ``psi``.
    Infeasibility propagates so the caller can report it.
    """
    env, pm, cn = spec.env, spec.pm, spec.cn.with_(eta=spec.params.get("eta", spec.cn.eta))
    problem = spec.params.get("problem", "prop1")
    summary = {"problem": problem, "solutions": []}
    if problem == "psi":
        top = Topology(spec.params.get("lam", cn.lambda_u), spec.params.get("p", pm.p_max),
                       spec.params.get("beta", 1.0))
        table = Table("coverage", ["lam", "p_w", "beta", "psi_exact", "psi_closed4",
                                   *_SURROGATE_COLUMNS.values(), "mc_psi", "mc_ci_halfwidth",
                                   "mc_trials", "mc_truncation_bias", "provenance",
                                   "residuals"])
        row = dict(lam=top.lam, p_w=top.p, beta=top.beta, psi_exact=psi_exact(top, env),
                   **_surrogate_values(top, env))
        res = {}
        if env.alpha == 4:
            row["psi_closed4"] = psi_closed4(top, env)
            res["closed4_minus_exact"] = row["psi_closed4"] - row["psi_exact"]
        prov = "quadrature"
        if spec.oracle:
            r = coverage_curve(SimConfig(env, top, trials=spec.trials, seed=spec.seed,
                                         workers=spec.workers), [env.xi])[0]
            row.update(mc_psi=r.psi_hat, mc_ci_halfwidth=r.ci_halfwidth,
                       mc_trials=r.trials_used, mc_truncation_bias=r.truncation_bias)
            res["mc_minus_exact"] = r.psi_hat - row["psi_exact"]
            prov += "+monte-carlo"
        table.add(**row, provenance=prov, residuals=res)
        summary["coverage"] = {k: v for k, v in row.items()}
        return [table], summary

    table = Table("solutions", ["variant", *SOLUTION_COLUMNS])
    variants = []
    if problem == "prop1":
        s = prop1_solve(env, pm, cn)
        variants = [("prop1", s), ("prop1-refined", prop1_refine(s, env, pm, cn))]
        if spec.oracle:
            o = grid_oracle("tightened", spec.params.get("oracle_resolution", 200), env, pm, cn)
            variants.append(("oracle-tightened", o))
    elif problem == "given-beta":
        beta = spec.params.get("beta", 1.0)
        s = given_beta_solve(beta, env, pm, cn)
        variants = [("given-beta", s), ("given-beta-refined", prop1_refine(s, env, pm, cn))]
        if spec.oracle:
            o = grid_oracle("tightened", spec.params.get("oracle_resolution", 200), env, pm, cn,
                            beta=beta)
            variants.append(("oracle-tightened", o))
    elif problem == "prop2":
        kind = SurrogateKind.parse(spec.params.get("kinds", ["approx-a"])[0])
        s = prop2_solve(kind, env, pm, cn)
        variants = [("prop2", s), ("prop2-refined", prop2_refine(s, env, pm, cn))]
        if spec.integer_beta:
            iv = integer_beta_variants(s, env, pm, cn)
            variants += [(f"integer-{k}", iv[k]) for k in ("floor", "ceil") if iv[k] is not None]
        if spec.oracle:
            o = grid_oracle("surrogate", spec.params.get("oracle_resolution", 100), env, pm, cn,
                            kind=kind, zoom=2)
            variants.append(("oracle-surrogate", o))
    else:
        raise DomainError(f"unknown custom problem {problem!r}")
    for name, v in variants:
        if v is None:
            continue
        table.add(variant=name, **_solution_fields(v))
        summary["solutions"].append({"variant": name, **_solution_record(v)})
    return [table], summary


RUNNERS = {
    "coverage-curves": run_coverage_curves,
    "contour": run_contour,
    "apc-ufr": run_apc_ufr,
    "apc-pfr": run_apc_pfr,
    "pwc-model-effect": run_pwc_model_effect,
    "custom": run_custom,
}


def run_experiment(spec: ExperimentSpec):
    """Run ``spec`` and return ``(tables, summary)``."""
    spec.validate()
    tables, summary = RUNNERS[spec.experiment](spec)
    summary = {"experiment": spec.experiment, "schema_version": SCHEMA_VERSION,
               "seed": spec.seed, "params": spec.params,
               "env": {"alpha": spec.env.alpha, "xi_db": linear_to_db(spec.env.xi),
                       "sigma2": spec.env.sigma2},
               "power": {"p_active_standby": spec.pm.p_active_standby,
                         "p_sleep": spec.pm.p_sleep, "delta_p": spec.pm.delta_p,
                         "p_max": spec.pm.p_max},
               "constraints": {"eta": spec.cn.eta, "lambda_l": spec.cn.lambda_l,
                               "lambda_u": spec.cn.lambda_u},
               **summary}
    return tables, summary


def table_to_csv(table: Table, experiment: str) -> str:
    buf = io.StringIO()
    buf.write(f"# greentopo-csv schema={SCHEMA_VERSION} experiment={experiment} "
              f"table={table.name}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([format_value(v) for v in row])
    return buf.getvalue()


def write_outputs(tables, summary, out_dir: str):
    """Write ``<experiment>_<table>.csv`` files and ``<experiment>_summary.json``; returns paths."""
    os.makedirs(out_dir, exist_ok=True)
    exp = summary["experiment"]
    paths = []
    for t in tables:
        path = os.path.join(out_dir, f"{exp}_{t.name}.csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(table_to_csv(t, exp))
        paths.append(path)
    path = os.path.join(out_dir, f"{exp}_summary.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths.append(path)
    return paths
