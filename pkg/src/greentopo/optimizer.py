"""Area-power minimization over active density, transmit power and band count.

Three layers live here:

* monotone bisection for ``p*(lam, beta)`` and ``lam*(p, beta)``, the exact
  inverse of the coverage constraint;
* the closed-form four-case optimum of the monomially tightened UFR problem
  (also reused for a fixed band count) and the candidate enumeration for the
  joint (lam, p, beta) posynomial problem;
* a brute-force log-grid minimizer used as an independent check.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .coverage import (
    POSYNOMIAL_KINDS,
    SurrogateKind,
    posynomial_coeffs,
    posynomial_lhs,
    psi_closed4_array,
    psi_exact,
    psi_surrogate,
    psi_upper,
    theta,
    vartheta,
)
from .errors import ConvergenceError, DomainError, InfeasibleError
from .model import Constraints, PowerModel, RadioEnv, Topology, area_power

__all__ = [
    "CaseLabel",
    "Solution",
    "BisectionResult",
    "p_star",
    "lambda_star",
    "required_power",
    "four_case_optimum",
    "prop1_solve",
    "prop1_refine",
    "g_coefficients",
    "g_value",
    "g_roots",
    "prop2_candidates",
    "prop2_solve",
    "prop2_refine",
    "kkt_check",
    "given_beta_solve",
    "integer_beta_variants",
    "grid_oracle",
    "active_bounds",
    "CASE_ACTIVE_BOUND",
]

log = logging.getLogger(__name__)

PSI_TOL = 1e-6
REL_TOL = 1e-10
MAX_ITER = 200
BOUND_TOL = 1e-9


class CaseLabel(enum.Enum):
    TX_POWER_ONLY = "i"          # every BS stays on, power is trimmed
    BALANCED_TRADEOFF = "ii"     # density and power traded off, p ~ P_bar
    MIN_DENSITY_MAX_POWER = "iii"
    CAPACITY_LIMITED = "iv"


@dataclass(frozen=True)
class Solution:
    topology: Topology
    apc_reduced: float
    apc_total: float
    psi_achieved: float
    provenance: str
    residuals: dict = field(default_factory=dict)
    case: CaseLabel | None = None
    feasible: bool = True
    violations: tuple = ()
    degenerate: bool = False

    def __post_init__(self):
        if not self.provenance:
            raise DomainError("provenance must not be empty")

    @property
    def lam(self):
        return self.topology.lam

    @property
    def p(self):
        return self.topology.p

    @property
    def beta(self):
        return self.topology.beta


class BisectionResult(NamedTuple):
    value: float
    psi: float
    iterations: int
    degenerate: bool


def _make_solution(top, env, pm, cn, provenance, *, case=None, residuals=None,
                   feasible=True, violations=(), degenerate=False, psi=None):
    if psi is None:
        psi = psi_exact(top, env)
    lam_eval = min(top.lam, cn.lambda_u)
    return Solution(
        topology=top,
        apc_reduced=area_power(lam_eval, top.p, pm, cn.lambda_u, reduced=True),
        apc_total=area_power(lam_eval, top.p, pm, cn.lambda_u),
        psi_achieved=psi,
        provenance=provenance,
        residuals=dict(residuals or {}),
        case=case,
        feasible=feasible,
        violations=tuple(violations),
        degenerate=degenerate,
    )


# ---------------------------------------------------------------------------
# Inverse coverage by bisection
# ---------------------------------------------------------------------------

def _bisect_increasing(fn, lo, hi, target):
    """Log-domain bisection of an increasing ``fn`` with ``fn(lo) < target <= fn(hi)``.

    Returns ``(x, fn(x), iterations)`` on the feasible (upper) side.
    """
    f_hi = fn(hi)
    for it in range(1, MAX_ITER + 1):
        mid = math.sqrt(lo * hi)
        f_mid = fn(mid)
        if f_mid >= target:
            hi, f_hi = mid, f_mid
        else:
            lo = mid
        if hi / lo - 1.0 <= REL_TOL and f_hi - target <= PSI_TOL:
            return hi, f_hi, it
    raise ConvergenceError(f"bisection did not converge in {MAX_ITER} iterations "
                           f"(bracket [{lo:.6g}, {hi:.6g}], psi gap {f_hi - target:.3g})")


def _invert(fn, upper, target, what, full_output):
    f_up = fn(upper)
    if f_up < target:
        raise InfeasibleError(
            f"coverage {f_up:.6f} at the largest {what} is below eta={target}",
            assumption=f"psi(at max {what}) >= eta", achieved=f_up)
    lo = upper
    floor = upper * 1e-15
    f_lo = f_up
    while f_lo >= target:
        lo /= 10.0
        if lo < floor:
            res = BisectionResult(lo * 10.0, fn(lo * 10.0), 0, True)
            log.debug("coverage does not depend on %s here; returning bracket floor", what)
            return res if full_output else res.value
        f_lo = fn(lo)
    x, fx, it = _bisect_increasing(fn, lo, min(lo * 10.0, upper), target)
    res = BisectionResult(x, fx, it, False)
    return res if full_output else res.value


def p_star(lam: float, beta: float, env: RadioEnv, pm: PowerModel, cn: Constraints,
           full_output: bool = False):
    """Smallest transmit power meeting ``psi(lam, p, beta) >= eta`` (to 1e-6 in psi).

    With no noise the coverage does not depend on ``p``; the bracket floor is
    returned and ``full_output`` reports ``degenerate=True``.
    """
    return _invert(lambda p: psi_exact(Topology(lam, p, beta), env),
                   pm.p_max, cn.eta, "transmit power", full_output)


def required_power(kind, lam: float, beta: float, env: RadioEnv, eta: float, p_upper: float,
                   full_output: bool = False):
    """Smallest ``p <= p_upper`` with ``psi_kind(lam, p, beta) >= eta``.

    Same bisection as :func:`p_star`, for any coverage surrogate.
    """
    kind = SurrogateKind.parse(kind)
    if kind is SurrogateKind.EXACT:
        fn = lambda p: psi_exact(Topology(lam, p, beta), env)
    else:
        fn = lambda p: float(psi_surrogate(kind, Topology(lam, p, beta), env))
    return _invert(fn, p_upper, eta, "transmit power", full_output)


def lambda_star(p: float, beta: float, env: RadioEnv, cn: Constraints,
                full_output: bool = False):
    """Smallest active density meeting ``psi(lam, p, beta) >= eta``."""
    return _invert(lambda lam: psi_exact(Topology(lam, p, beta), env),
                   cn.lambda_u, cn.eta, "density", full_output)


# ---------------------------------------------------------------------------
# Four-case closed form (UFR and fixed beta)
# ---------------------------------------------------------------------------

def four_case_optimum(threshold, lam_lo, lam_hi, pm: PowerModel, alpha):
    """Minimize ``lam*(P_bar + delta_p*p)`` s.t. ``lam**k p >= threshold``, ``lam_lo <= lam <= lam_hi``, ``p <= P_max``.

    Returns ``(lam, p, CaseLabel)``; ``k = alpha/2``.
    """
    k = alpha / 2.0
    if not lam_hi**k * pm.p_max > threshold:
        raise InfeasibleError(
            "maximum density at maximum power cannot meet the coverage threshold",
            assumption="lambda_u^(alpha/2) * P_max > threshold")
    if lam_lo > lam_hi * (1 + 1e-12):
        raise InfeasibleError(f"density floor {lam_lo} exceeds lambda_u={lam_hi}",
                              assumption="beta * lambda_l <= lambda_u")
    lam_lo = min(lam_lo, lam_hi)
    scale = pm.delta_p * (k - 1.0)
    pb = pm.p_bar
    edge_hi = scale * threshold * lam_hi**-k
    edge_lo = scale * threshold * lam_lo**-k
    edge_pmax = scale * pm.p_max
    if pb < edge_hi:
        return lam_hi, threshold * lam_hi**-k, CaseLabel.TX_POWER_ONLY
    if pb < min(edge_lo, edge_pmax):
        p = pb / scale
        return (threshold / p) ** (1.0 / k), p, CaseLabel.BALANCED_TRADEOFF
    if lam_lo**k * pm.p_max < threshold:
        return (threshold / pm.p_max) ** (1.0 / k), pm.p_max, CaseLabel.MIN_DENSITY_MAX_POWER
    return lam_lo, threshold * lam_lo**-k, CaseLabel.CAPACITY_LIMITED


def _box_residuals(top, pm, lam_lo, lam_hi):
    return {
        "lambda_lo_slack": top.lam - lam_lo,
        "lambda_hi_slack": lam_hi - top.lam,
        "p_max_slack": pm.p_max - top.p,
    }


def _tightened(beta, threshold, lam_lo, env, pm, cn, tag):
    lam, p, case = four_case_optimum(threshold, lam_lo, cn.lambda_u, pm, env.alpha)
    top = Topology(lam, p, beta)
    res = _box_residuals(top, pm, lam_lo, cn.lambda_u)
    res["monomial_slack"] = lam ** (env.alpha / 2.0) * p / threshold - 1.0
    psi = psi_exact(top, env)
    res["psi_minus_eta"] = psi - cn.eta
    return _make_solution(top, env, pm, cn, f"{tag}/case-{case.value}", case=case,
                          residuals=res, psi=psi)


def prop1_solve(env: RadioEnv, pm: PowerModel, cn: Constraints) -> Solution:
    """Closed-form optimum of the UFR problem with the monomial coverage threshold."""
    if not cn.eta < psi_upper(1.0, env):
        raise InfeasibleError("eta is not below the noise-free coverage 1/(1+phi)",
                              assumption="eta < 1/(1+phi)", achieved=psi_upper(1.0, env))
    return _tightened(1.0, theta(env, cn), cn.lambda_l, env, pm, cn, "prop1")


def _refine_power(sol, env, pm, cn):
    if env.sigma2 == 0.0:
        return replace(sol, provenance=sol.provenance + "+refined", degenerate=True)
    r = p_star(sol.lam, sol.beta, env, pm, cn, full_output=True)
    top = Topology(sol.lam, r.value, sol.beta)
    res = dict(sol.residuals)
    res.update(_box_residuals(top, pm, min(sol.beta * cn.lambda_l, cn.lambda_u), cn.lambda_u))
    res["psi_minus_eta"] = r.psi - cn.eta
    res["bisection_iterations"] = r.iterations
    res["p_before_refine"] = sol.p
    return _make_solution(top, env, pm, cn, sol.provenance + "+refined", case=sol.case,
                          residuals=res, degenerate=r.degenerate, psi=r.psi)


def prop1_refine(sol: Solution, env: RadioEnv, pm: PowerModel, cn: Constraints) -> Solution:
    """Keep the density and lower the power to ``p*(lam, 1)`` so coverage is met with equality."""
    return _refine_power(sol, env, pm, cn)


def given_beta_solve(beta: float, env: RadioEnv, pm: PowerModel, cn: Constraints,
                     refine: bool = False) -> Solution:
    """Four-case optimum at a fixed band count: threshold ``vartheta(beta)``, floor ``beta*lambda_l``."""
    if beta * cn.lambda_l > cn.lambda_u * (1 + 1e-12):
        raise InfeasibleError(f"beta*lambda_l = {beta * cn.lambda_l:g} exceeds lambda_u",
                              assumption="beta * lambda_l <= lambda_u")
    sol = _tightened(beta, vartheta(beta, env, cn), min(beta * cn.lambda_l, cn.lambda_u),
                     env, pm, cn, "given-beta")
    return _refine_power(sol, env, pm, cn) if refine else sol


# ---------------------------------------------------------------------------
# Joint (lam, p, beta) posynomial problem
# ---------------------------------------------------------------------------

def g_coefficients(coeffs, pm: PowerModel, cn: Constraints):
    """Quartic coefficients (highest degree first) of the alpha = 4 stationarity polynomial."""
    c0, c1, c2 = coeffs
    e = c0 * pm.delta_p * cn.lambda_l**-2 / pm.p_bar
    return np.array([1.0, -2 * c1, c1**2 - 2 * c2, 2 * (c1 * c2 - e), c2**2 + c1 * e])


def g_value(beta, coeffs, pm: PowerModel, cn: Constraints, alpha: float):
    """Stationarity function in beta for the interior candidate.

    For ``alpha == 4`` this is the quartic (valid with ``c2 != 0``); otherwise
    the general form, which assumes ``c2 == 0``.
    """
    if alpha == 4:
        return np.polyval(g_coefficients(coeffs, pm, cn), beta)
    c0, c1, c2 = coeffs
    if c2 != 0:
        raise DomainError("general-alpha stationarity requires c2 == 0")
    k = alpha / 2.0
    e = c0 * pm.delta_p * cn.lambda_l**-k / pm.p_bar
    beta = np.asarray(beta, dtype=float)
    return beta**k * (beta - c1) ** 2 - e * k * beta + e * c1 * (k - 1.0)


def _companion_roots(poly):
    poly = np.asarray(poly, dtype=float)
    poly = poly / poly[0]
    n = len(poly) - 1
    comp = np.zeros((n, n))
    comp[0, :] = -poly[1:]
    comp[1:, :-1] = np.eye(n - 1)
    return np.linalg.eigvals(comp)


def _bisect_root(fn, lo, hi, tol=1e-12):
    f_lo = fn(lo)
    for _ in range(MAX_ITER):
        mid = 0.5 * (lo + hi)
        f_mid = fn(mid)
        if f_mid == 0:
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
        if hi - lo <= tol * max(1.0, abs(mid)):
            return 0.5 * (lo + hi)
    raise ConvergenceError("root bisection did not converge")


def _bracketed_roots(fn, lo, hi, n=4000):
    grid = np.geomspace(lo, hi, n)
    vals = np.asarray(fn(grid), dtype=float)
    roots = []
    for i in range(n - 1):
        a, b = vals[i], vals[i + 1]
        if a == 0.0:
            roots.append(float(grid[i]))
        elif a * b < 0:
            roots.append(_bisect_root(fn, float(grid[i]), float(grid[i + 1])))
    return roots


def g_roots(coeffs, pm: PowerModel, cn: Constraints, alpha: float, method: str = "auto"):
    """Real roots ``beta > 1`` of the stationarity function, ascending.

    ``method="companion"`` (alpha = 4 only) takes eigenvalues of the quartic's
    companion matrix, keeping those with ``|imag| < 1e-9``. ``method="bracket"``
    scans a log grid on ``(1, max(lambda_u/lambda_l, 50)]`` for sign changes and
    bisects each bracket to 1e-12. ``"auto"`` picks companion when available.
    """
    if method == "auto":
        method = "companion" if alpha == 4 else "bracket"
    if method == "companion":
        if alpha != 4:
            raise DomainError("companion-matrix roots need the alpha = 4 quartic")
        poly = g_coefficients(coeffs, pm, cn)
        eig = _companion_roots(poly)
        roots = []
        for z in eig:
            if abs(z.imag) < 1e-9 and z.real > 1.0:
                b = z.real
                for _ in range(3):  # Newton polish on the real quartic
                    d = np.polyval(np.polyder(poly), b)
                    if d == 0:
                        break
                    b -= np.polyval(poly, b) / d
                roots.append(float(b))
        return sorted(roots)
    if method == "bracket":
        hi = max(cn.lambda_u / cn.lambda_l, 50.0)
        return _bracketed_roots(lambda b: g_value(b, coeffs, pm, cn, alpha),
                                1.0 + 1e-12, hi)
    raise DomainError(f"unknown root method {method!r}")


def _max_power_roots(coeffs, pm, cn, alpha):
    """Roots ``beta > 1`` of ``f(lambda_l*beta, P_max, beta) = 1`` (at most one: f decreases in beta)."""
    fn = lambda b: posynomial_lhs(coeffs, cn.lambda_l * b, pm.p_max, b, alpha) - 1.0
    lo = 1.0
    if fn(lo) <= 0:
        return []
    hi = 2.0
    while fn(hi) > 0:
        hi *= 2.0
        if hi > 1e12:
            return []
    return [_bisect_root(fn, lo, hi)]


def _annotate(top, coeffs, denom, pm, cn, alpha):
    viol = []
    if denom is not None and not denom > 0:
        viol.append("beta^2 - c1*beta - c2 <= 0")
    if top.lam > cn.lambda_u * (1 + BOUND_TOL):
        viol.append("lambda > lambda_u")
    if top.lam < cn.lambda_l * top.beta * (1 - BOUND_TOL):
        viol.append("lambda < lambda_l*beta")
    if top.p > pm.p_max * (1 + BOUND_TOL):
        viol.append("p > P_max")
    if posynomial_lhs(coeffs, top.lam, top.p, top.beta, alpha) > 1 + 1e-8:
        viol.append("f(lambda, p, beta) > 1")
    return viol


def _candidate(cond, lam, p, beta, denom, kind, coeffs, env, pm, cn):
    alpha = env.alpha
    tag = f"prop2/{kind.value}/cond-{cond}"
    if denom is not None and not denom > 0 or not (p > 0 and math.isfinite(p)):
        # Implied power is negative or infinite; keep a placeholder for the record.
        top = Topology(min(max(lam, 1e-300), cn.lambda_u), pm.p_max, max(beta, 1.0))
        return _make_solution(top, env, pm, cn, tag, feasible=False,
                              violations=["beta^2 - c1*beta - c2 <= 0"],
                              residuals={"denominator": denom}, psi=float("nan"))
    top = Topology(lam, p, beta)
    viol = _annotate(top, coeffs, denom, pm, cn, alpha)
    res = {
        "f_minus_1": posynomial_lhs(coeffs, lam, p, beta, alpha) - 1.0,
        "lambda_minus_lambda_l_beta": lam - cn.lambda_l * beta,
        "lambda_u_slack": cn.lambda_u - lam,
        "p_max_slack": pm.p_max - p,
        "denominator": denom,
    }
    psi = psi_exact(top, env) if top.lam <= cn.lambda_u * (1 + BOUND_TOL) else float("nan")
    res["psi_minus_eta"] = psi - cn.eta
    return _make_solution(top, env, pm, cn, tag, residuals=res, feasible=not viol,
                          violations=viol, psi=psi)


def prop2_candidates(kind, env: RadioEnv, pm: PowerModel, cn: Constraints):
    """All candidates from the four necessary-condition families, feasible or not.

    Every candidate sits on ``lam = lambda_l*beta``. Infeasible candidates
    carry ``feasible=False`` and a list of violated constraints.
    """
    kind = SurrogateKind.parse(kind)
    if kind not in POSYNOMIAL_KINDS:
        raise DomainError(f"{kind.value} has no posynomial constraint form")
    if not cn.eta > 0.5:
        raise DomainError(f"partial-reuse design assumes eta > 1/2, got {cn.eta}")
    alpha = env.alpha
    k = alpha / 2.0
    coeffs = posynomial_coeffs(kind, env, cn)
    c0, c1, c2 = coeffs
    ll, lu = cn.lambda_l, cn.lambda_u
    out = []

    b = lu / ll
    d = b * b - c1 * b - c2
    out.append(_candidate("i", lu, c0 * lu**-k * b / d if d > 0 else float("nan"), b, d,
                          kind, coeffs, env, pm, cn))

    for b in g_roots(coeffs, pm, cn, alpha):
        d = b * b - c1 * b - c2
        p = c0 * ll**-k * b ** (1.0 - k) / d if d > 0 else float("nan")
        out.append(_candidate("ii", ll * b, p, b, d, kind, coeffs, env, pm, cn))

    for b in _max_power_roots(coeffs, pm, cn, alpha):
        out.append(_candidate("iii", ll * b, pm.p_max, b, b * b - c1 * b - c2,
                              kind, coeffs, env, pm, cn))

    d = 1.0 - c1 - c2
    out.append(_candidate("iv", ll, c0 * ll**-k / d if d > 0 else float("nan"), 1.0, d,
                          kind, coeffs, env, pm, cn))
    return out


def prop2_solve(kind, env: RadioEnv, pm: PowerModel, cn: Constraints) -> Solution:
    """Least reduced-APC feasible candidate."""
    cands = [c for c in prop2_candidates(kind, env, pm, cn) if c.feasible]
    if not cands:
        raise InfeasibleError("no candidate satisfies every constraint",
                              assumption="posynomial problem feasible")
    return min(cands, key=lambda c: c.apc_reduced)


def prop2_refine(sol: Solution, env: RadioEnv, pm: PowerModel, cn: Constraints) -> Solution:
    """Replace the power with ``p*(lam, beta)`` so the exact coverage equals ``eta``.

    Lower-bound surrogates over-provision power, so this lowers the APC; for
    the approximation it restores feasibility when the exact coverage fell
    short of ``eta``.
    """
    return _refine_power(sol, env, pm, cn)


def kkt_check(sol: Solution, kind, env: RadioEnv, pm: PowerModel, cn: Constraints):
    """Recover Lagrange multipliers of the log-transformed problem at ``sol``.

    The active set is read off the candidate (``lam = lambda_u``, ``p = P_max``,
    ``beta = 1`` within 1e-9); the coverage and ``lambda_l*beta`` constraints
    are always taken active. Multipliers solve the stationarity equations in
    the least-squares sense. Returns ``(multipliers, residual_norm)``.
    """
    kind = SurrogateKind.parse(kind)
    c0, c1, c2 = posynomial_coeffs(kind, env, cn)
    k = env.alpha / 2.0
    lam, p, beta = sol.lam, sol.p, sol.beta
    t0 = c0 * lam**-k / (p * beta)
    t1 = c1 / beta
    t2 = c2 / beta**2
    s = t0 + t1 + t2
    w_p = pm.delta_p * p / (pm.p_bar + pm.delta_p * p)
    # Columns: tau_c, tau_ll, tau_lu, tau_p, tau_beta; rows: d/dlog lam, d/dlog p, d/dlog beta.
    jac = np.array([
        [-k * t0 / s, -1.0, 1.0, 0.0, 0.0],
        [-t0 / s, 0.0, 0.0, 1.0, 0.0],
        [-(t0 + t1 + 2 * t2) / s, 1.0, 0.0, 0.0, -1.0],
    ])
    rhs = -np.array([1.0, w_p, 0.0])
    active = [True, True,
              abs(lam / cn.lambda_u - 1) < 1e-9,
              abs(p / pm.p_max - 1) < 1e-9,
              abs(beta - 1) < 1e-9]
    idx = [i for i, a in enumerate(active) if a]
    sol_tau, *_ = np.linalg.lstsq(jac[:, idx], rhs, rcond=None)
    tau = np.zeros(5)
    tau[idx] = sol_tau
    resid = float(np.linalg.norm(jac @ tau - rhs))
    names = ("coverage", "lambda_l", "lambda_u", "p_max", "beta_min")
    return dict(zip(names, tau.tolist())), resid


def integer_beta_variants(sol: Solution, env: RadioEnv, pm: PowerModel, cn: Constraints):
    """Re-optimize at ``floor(beta)`` and ``ceil(beta)`` with power refinement.

    Returns a dict with keys ``"real"``, ``"floor"``, ``"ceil"``; integer entries
    are ``None`` when that band count is infeasible.
    """
    out = {"real": sol}
    for name, b in (("floor", math.floor(sol.beta + 1e-9)), ("ceil", math.ceil(sol.beta - 1e-9))):
        b = max(b, 1)
        try:
            s = given_beta_solve(float(b), env, pm, cn, refine=True)
            out[name] = replace(s, provenance=s.provenance + f"/integer-{name}")
        except InfeasibleError:
            out[name] = None
    return out


# ---------------------------------------------------------------------------
# Brute-force grid oracle
# ---------------------------------------------------------------------------

def _feasible_mask(problem, lam, p, beta, env, cn, kind, threshold):
    if problem == "tightened":
        return lam ** (env.alpha / 2.0) * p >= threshold * (1 - 1e-12)
    if problem == "surrogate":
        coeffs = posynomial_coeffs(kind, env, cn)
        f = posynomial_lhs(coeffs, lam, p, beta, env.alpha)
        return (f <= 1.0 + 1e-12) & (lam >= cn.lambda_l * beta * (1 - 1e-12))
    if problem == "exact":
        if env.alpha == 4:
            psi = psi_closed4_array(lam, p, beta, env)
        else:
            psi = np.vectorize(lambda a, b, c: psi_exact(Topology(a, b, c), env))(lam, p, beta)
        return psi >= cn.eta
    raise DomainError(f"unknown oracle problem {problem!r}")


def grid_oracle(problem: str, resolution: int, env: RadioEnv, pm: PowerModel,
                cn: Constraints, *, kind=None, beta: float = 1.0, zoom: int = 0,
                p_decades: float = 4.0):
    """Exhaustive log-grid minimization of the reduced APC.

    ``problem`` is ``"tightened"`` (monomial threshold at fixed ``beta``),
    ``"exact"`` (exact coverage at fixed ``beta``) or ``"surrogate"`` (3-D
    over lam, p, beta with the posynomial constraint of ``kind``). The density
    axis spans ``[beta*lambda_l, lambda_u]`` (2-D) or ``[lambda_l, lambda_u]``
    (3-D, with beta on the same log spacing over ``[1, lambda_u/lambda_l]``);
    power spans ``p_decades`` decades below ``P_max``.

    ``zoom`` re-grids ``zoom`` more times on the bounding box (padded by two
    cells) of all points whose objective is within one cell of the incumbent. The minimum is taken in flat index order, so ties resolve
    deterministically. Returns ``None`` when no grid point is feasible.
    """
    if resolution < 50:
        raise DomainError("grid oracle needs at least 50 points per axis")
    three_d = problem == "surrogate"
    p_lo = pm.p_max * 10.0**-p_decades
    if three_d:
        kind = SurrogateKind.parse(kind)
        bounds = [(cn.lambda_l, cn.lambda_u), (p_lo, pm.p_max),
                  (1.0, cn.lambda_u / cn.lambda_l)]
    else:
        bounds = [(min(beta * cn.lambda_l, cn.lambda_u), cn.lambda_u), (p_lo, pm.p_max)]
    full = [(math.log(a), math.log(b)) for a, b in bounds]
    boxes = list(full)
    threshold = vartheta(beta, env, cn) if problem == "tightened" else None

    best = None
    cells = None
    for level in range(zoom + 1):
        axes = []
        for (a, b), (fa, fb), (la, lb) in zip(boxes, full, bounds):
            ax = np.exp(np.linspace(a, b, resolution))
            # Hit the box bounds exactly despite exp/log rounding.
            if a == fa:
                ax[0] = la
            if b == fb:
                ax[-1] = lb
            axes.append(ax)
        if three_d:
            lam, p, bb = np.meshgrid(*axes, indexing="ij")
        else:
            lam, p = np.meshgrid(*axes, indexing="ij")
            bb = np.full_like(lam, beta)
        ok = _feasible_mask(problem, lam, p, bb, env, cn, kind, threshold)
        obj = np.where(ok, lam * (pm.p_bar + pm.delta_p * p), np.inf)
        flat = int(np.argmin(obj))
        if not np.isfinite(obj.flat[flat]):
            if best is None:
                log.warning("grid oracle found no feasible point for %s", problem)
                return None
            break
        idx = np.unravel_index(flat, obj.shape)
        best = (lam[idx], p[idx], bb[idx], obj[idx])
        cells = [(b - a) / (resolution - 1) for a, b in boxes]
        # Rounding p up to the next grid point perturbs the objective by up to
        # one cell, so the true minimizer may sit anywhere in the set of points
        # within that slack of the incumbent. Re-grid on its bounding box.
        slack = math.exp(cells[0] + cells[1]) * obj.flat[flat]
        near = np.argwhere(obj <= slack)
        lo_i, hi_i = near.min(axis=0), near.max(axis=0)
        boxes = [(max(fa, math.log(ax[i0]) - 2 * c), min(fb, math.log(ax[i1]) + 2 * c))
                 for ax, i0, i1, c, (fa, fb) in zip(axes, lo_i, hi_i, cells, full)]

    lam_b, p_b, beta_b, _ = best
    top = Topology(float(lam_b), float(p_b), float(beta_b))
    tag = f"grid-oracle/{problem}" + (f"/{kind.value}" if three_d else "")
    psi = psi_exact(top, env)
    sol = _make_solution(top, env, pm, cn, tag, psi=psi,
                         residuals={"log_cell": cells[0], "log_cell_p": cells[1],
                                    "zoom_levels": zoom, "resolution": resolution})
    return sol


# Box bound that each case pins; the balanced case sits strictly inside.
CASE_ACTIVE_BOUND = {
    CaseLabel.TX_POWER_ONLY: frozenset({"lambda_u"}),
    CaseLabel.BALANCED_TRADEOFF: frozenset(),
    CaseLabel.MIN_DENSITY_MAX_POWER: frozenset({"p_max"}),
    CaseLabel.CAPACITY_LIMITED: frozenset({"lambda_l"}),
}


def active_bounds(lam, p, pm: PowerModel, cn: Constraints, log_tol, lam_lo=None):
    """Box bounds of the (lam, p) problem that are active at a point within ``log_tol``."""
    lam_lo = cn.lambda_l if lam_lo is None else lam_lo
    near = lambda x, y: abs(math.log(x) - math.log(y)) <= log_tol
    out = set()
    if near(lam, cn.lambda_u):
        out.add("lambda_u")
    if near(lam, lam_lo):
        out.add("lambda_l")
    if near(p, pm.p_max):
        out.add("p_max")
    return frozenset(out)
