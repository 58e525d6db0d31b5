import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import optimize

from greentopo.coverage import (
    SurrogateKind,
    posynomial_coeffs,
    posynomial_lhs,
    psi_closed4_array,
    psi_exact,
    psi_surrogate,
    theta,
    vartheta,
)
from greentopo.errors import ConvergenceError, DomainError, InfeasibleError
from greentopo.model import PowerModel, Topology, table_ii
from greentopo.optimizer import (
    CASE_ACTIVE_BOUND,
    CaseLabel,
    Solution,
    active_bounds,
    four_case_optimum,
    g_coefficients,
    g_roots,
    g_value,
    given_beta_solve,
    grid_oracle,
    integer_beta_variants,
    kkt_check,
    lambda_star,
    p_star,
    prop1_refine,
    prop1_solve,
    prop2_candidates,
    prop2_refine,
    prop2_solve,
    required_power,
)

LB_KINDS = [SurrogateKind.LB_BETA, SurrogateKind.LB_Q]


def ref(alpha=4.0, eta=0.8, ratio=1.0):
    return table_ii(alpha=alpha, eta=eta, sleep_ratio=ratio)


# ---------------------------------------------------------------------------
# Inverse coverage
# ---------------------------------------------------------------------------

def test_p_star_matches_dense_sweep():
    env, pm, cn = ref()
    grid = np.geomspace(1e-2, pm.p_max, 200_001)
    psi = psi_closed4_array(0.2, grid, 1.0, env)
    first = grid[np.argmax(psi >= cn.eta)]
    p = p_star(0.2, 1.0, env, pm, cn)
    step = grid[1] / grid[0]
    assert first / step <= p <= first * (1 + 1e-9)
    assert psi_exact(Topology(0.2, p, 1.0), env) == pytest.approx(cn.eta, abs=1e-6)


def test_p_star_noise_free_is_degenerate():
    env, pm, cn = ref()
    r = p_star(0.5, 1.0, env.with_(noise_total=0.0), pm, cn, full_output=True)
    assert r.degenerate
    assert r.value < 1e-12 * pm.p_max


def test_p_star_reports_unreachable_target():
    env, pm, cn = ref()
    with pytest.raises(InfeasibleError) as info:
        p_star(0.01, 1.0, env, pm, cn)
    assert info.value.achieved < cn.eta


@given(st.floats(0.0, 1.9), st.floats(1.0, 5.0))
def test_lambda_star_hits_target(log_p, beta):
    env, pm, cn = ref()
    p = 10**log_p
    try:
        lam = lambda_star(p, beta, env, cn)
    except InfeasibleError:
        return
    assert psi_exact(Topology(lam, p, beta), env) == pytest.approx(cn.eta, abs=1e-6)
    assert lambda_star(pm.p_max, beta, env, cn) <= lam


def test_required_power_for_surrogates_and_exact():
    env, pm, cn = ref(eta=0.9)
    for kind in (SurrogateKind.EXACT, SurrogateKind.LB_E, SurrogateKind.LB_BETA,
                 SurrogateKind.LB_Q):
        p = required_power(kind, 0.5, 3.0, env, 0.9, pm.p_max)
        assert psi_surrogate(kind, Topology(0.5, p, 3.0), env) == pytest.approx(0.9, abs=1e-6)
    # Lower bounds demand at least as much power as the exact constraint.
    p_ex = required_power("exact", 0.5, 3.0, env, 0.9, pm.p_max)
    assert required_power("lb-beta", 0.5, 3.0, env, 0.9, pm.p_max) > p_ex


# ---------------------------------------------------------------------------
# Four-case closed form
# ---------------------------------------------------------------------------

def test_case_one_when_sleep_saves_little():
    env, pm, cn = ref(ratio=1e-3)
    sol = prop1_solve(env, pm, cn)
    th = theta(env, cn)
    assert sol.case is CaseLabel.TX_POWER_ONLY
    assert sol.lam == cn.lambda_u
    assert sol.p == pytest.approx(th * cn.lambda_u**-2, rel=1e-15)


def test_case_two_power_proportional_to_sleep_saving():
    env, pm, cn = ref(ratio=0.3)
    sol = prop1_solve(env, pm, cn)
    assert sol.case is CaseLabel.BALANCED_TRADEOFF
    assert sol.p == pytest.approx(pm.p_bar / pm.delta_p, rel=1e-15)
    assert sol.lam == pytest.approx(math.sqrt(theta(env, cn) / sol.p), rel=1e-15)


def test_case_three_needs_low_floor_and_cheap_power():
    env, pm, cn = ref()
    pm = pm.with_(delta_p=1.0)
    cn = cn.with_(lambda_l=0.01)
    sol = prop1_solve(env, pm, cn)
    assert sol.case is CaseLabel.MIN_DENSITY_MAX_POWER
    assert sol.p == pm.p_max
    assert sol.lam == pytest.approx(math.sqrt(theta(env, cn) / pm.p_max))


def test_case_four_at_ideal_sleep():
    env, pm, cn = ref(ratio=1.0)
    sol = prop1_solve(env, pm, cn)
    assert sol.case is CaseLabel.CAPACITY_LIMITED
    assert sol.lam == cn.lambda_l


@pytest.mark.parametrize("alpha", [4.0, 5.0])
def test_case_boundary_continuity(alpha):
    env, pm, cn = ref(alpha=alpha)
    k = alpha / 2
    th = theta(env, cn)
    edge = pm.delta_p * (k - 1) * th * cn.lambda_u**-k
    below = four_case_optimum(th, cn.lambda_l, cn.lambda_u,
                              pm.with_(p_active_standby=edge * (1 - 1e-13), p_sleep=0.0), alpha)
    at = four_case_optimum(th, cn.lambda_l, cn.lambda_u,
                           pm.with_(p_active_standby=edge, p_sleep=0.0), alpha)
    assert below[2] is CaseLabel.TX_POWER_ONLY
    assert at[2] is CaseLabel.BALANCED_TRADEOFF
    assert at[0] == pytest.approx(below[0], rel=1e-10)
    assert at[1] == pytest.approx(below[1], rel=1e-10)


@given(st.floats(0.01, 1.0), st.sampled_from([4.0, 5.0]), st.floats(0.3, 0.8))
def test_monomial_constraint_is_active(ratio, alpha, eta):
    env, pm, cn = ref(alpha=alpha, eta=min(eta, 0.8), ratio=ratio)
    sol = prop1_solve(env, pm, cn)
    assert sol.lam ** (alpha / 2) * sol.p == pytest.approx(theta(env, cn), rel=1e-12)
    assert sol.psi_achieved >= cn.eta


def test_prop1_infeasibility_is_named():
    env, pm, cn = ref()
    with pytest.raises(InfeasibleError) as info:
        prop1_solve(env, pm, cn.with_(eta=0.85))
    assert info.value.assumption == "eta < 1/(1+phi)"
    with pytest.raises(InfeasibleError) as info:
        prop1_solve(env, pm.with_(p_max=1e-3), cn)
    assert "P_max" in info.value.assumption


@pytest.mark.parametrize("ratio", [0.1, 0.3, 0.5, 0.7, 0.9, 1.0])
def test_prop1_matches_tightened_grid_to_grid_resolution(ratio):
    env, pm, cn = ref(ratio=ratio)
    sol = prop1_solve(env, pm, cn)
    th = theta(env, cn)
    coarse = grid_oracle("tightened", 200, env, pm, cn)
    tol_l, tol_p = 2 * coarse.residuals["log_cell"], 2 * coarse.residuals["log_cell_p"]
    for zoom in (0, 2):
        grid = grid_oracle("tightened", 200, env, pm, cn, zoom=zoom)
        cell_l, cell_p = grid.residuals["log_cell"], grid.residuals["log_cell_p"]
        slack = math.exp(cell_l + cell_p)
        assert sol.apc_reduced * (1 - 1e-12) <= grid.apc_reduced <= sol.apc_reduced * slack
        # The case-ii valley along the constraint is flat, so the grid argmin is
        # only located up to the APC slack: on the constraint curve at the grid's
        # density the cost must be within one cell of the closed-form optimum.
        p_curve = min(th / grid.lam ** 2, pm.p_max)
        on_curve = grid.lam * (pm.p_bar + pm.delta_p * p_curve)
        assert on_curve <= sol.apc_reduced * slack
        pinned = (active_bounds(grid.lam, grid.p, pm, cn, tol_l) - {"p_max"}
                  | active_bounds(grid.lam, grid.p, pm, cn, tol_p) & {"p_max"})
        assert pinned == CASE_ACTIVE_BOUND[sol.case]


# ---------------------------------------------------------------------------
# Refinement
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("alpha", [4.0, 5.0])
@pytest.mark.parametrize("ratio", [0.1, 0.5, 1.0])
def test_prop1_refine_lowers_power_and_meets_target(alpha, ratio):
    env, pm, cn = ref(alpha=alpha, ratio=ratio)
    sol = prop1_solve(env, pm, cn)
    ref_sol = prop1_refine(sol, env, pm, cn)
    assert ref_sol.p < sol.p
    assert ref_sol.apc_reduced < sol.apc_reduced
    assert abs(ref_sol.psi_achieved - cn.eta) <= 1e-6
    assert ref_sol.provenance.endswith("+refined")


def test_refine_gap_is_visible_for_harsher_path_loss():
    gaps = {}
    for alpha in (4.0, 5.0):
        env, pm, cn = ref(alpha=alpha)
        sol = prop1_solve(env, pm, cn)
        gaps[alpha] = 1 - prop1_refine(sol, env, pm, cn).apc_reduced / sol.apc_reduced
    assert gaps[5.0] > 0.01
    assert gaps[5.0] > gaps[4.0]


def test_refine_without_noise_returns_input():
    env, pm, cn = ref()
    quiet = env.with_(noise_total=0.0)
    sol = prop1_solve(env, pm, cn)
    out = prop1_refine(sol, quiet, pm, cn)
    assert out.degenerate and out.topology == sol.topology


def test_solution_requires_provenance():
    with pytest.raises(DomainError):
        Solution(Topology(1.0, 1.0), 1.0, 1.0, 0.5, provenance="")


# ---------------------------------------------------------------------------
# Fixed band count
# ---------------------------------------------------------------------------

def test_given_beta_one_is_prop1():
    env, pm, cn = ref(ratio=0.4)
    a, b = given_beta_solve(1.0, env, pm, cn), prop1_solve(env, pm, cn)
    assert a.topology == b.topology and a.case is b.case


@pytest.mark.parametrize("ratio", [0.25, 0.5, 1.0])
def test_given_beta_at_top_forces_full_density(ratio):
    env, pm, cn = ref(eta=0.9, ratio=ratio)
    sol = given_beta_solve(5.0, env, pm, cn, refine=True)
    assert sol.lam == cn.lambda_u


def test_given_beta_matches_fixed_beta_grid():
    env, pm, cn = ref(eta=0.9, ratio=0.5)
    with pytest.raises(InfeasibleError):
        given_beta_solve(2.0, env, pm, cn)
    sol = given_beta_solve(3.0, env, pm, cn)
    grid = grid_oracle("tightened", 200, env, pm, cn, beta=3.0)
    assert sol.apc_reduced <= grid.apc_reduced * (1 + 1e-12)
    assert grid.apc_reduced <= sol.apc_reduced * 1.005
    assert sol.lam ** 2 * sol.p == pytest.approx(vartheta(3.0, env, cn), rel=1e-12)


def test_given_beta_rejects_excessive_floor():
    env, pm, cn = ref(eta=0.9)
    with pytest.raises(InfeasibleError) as info:
        given_beta_solve(6.0, env, pm, cn)
    assert info.value.assumption == "beta * lambda_l <= lambda_u"


# ---------------------------------------------------------------------------
# Joint (lam, p, beta) design
# ---------------------------------------------------------------------------

def _apc_along_floor(beta, coeffs, pm, cn, alpha):
    """Reduced APC on lam = lambda_l*beta with p set by f = 1 (independent of the g formula)."""
    c0, c1, c2 = coeffs
    k = alpha / 2
    lam = cn.lambda_l * beta
    p = c0 * lam**-k / (beta * (1 - c1 / beta - c2 / beta**2))
    return lam * (pm.p_bar + pm.delta_p * p)


@pytest.mark.parametrize("alpha,kind", [(4.0, "lb-beta"), (4.0, "approx-a"), (4.0, "lb-q"),
                                        (5.0, "lb-beta"), (5.0, "approx-a")])
@pytest.mark.parametrize("ratio", [0.25, 0.5, 1.0])
def test_stationarity_root_is_the_floor_minimizer(alpha, kind, ratio):
    env, pm, cn = ref(alpha=alpha, eta=0.9, ratio=ratio)
    coeffs = posynomial_coeffs(kind, env, cn)
    c0, c1, c2 = coeffs
    # Smallest beta with a positive implied power.
    b_min = (c1 + math.sqrt(c1 * c1 + 4 * c2)) / 2
    res = optimize.minimize_scalar(_apc_along_floor, bounds=(b_min * (1 + 1e-9), 60.0),
                                   args=(coeffs, pm, cn, alpha), method="bounded",
                                   options={"xatol": 1e-12})
    roots = g_roots(coeffs, pm, cn, alpha)
    assert any(abs(r - res.x) <= 1e-5 * res.x for r in roots)


def test_companion_and_bracket_roots_agree():
    for ratio in (0.1, 0.25, 0.5, 0.75, 1.0):
        for kind in ("lb-beta", "approx-a", "lb-q"):
            env, pm, cn = ref(eta=0.9, ratio=ratio)
            coeffs = posynomial_coeffs(kind, env, cn)
            comp = g_roots(coeffs, pm, cn, 4.0, method="companion")
            brack = g_roots(coeffs, pm, cn, 4.0, method="bracket")
            brack = [b for b in brack if b > 1.0]
            in_range = [r for r in comp if r <= max(cn.lambda_u / cn.lambda_l, 50.0)]
            assert len(in_range) == len(brack)
            for a, b in zip(in_range, brack):
                assert abs(a - b) <= 1e-10 * max(1.0, b)


def test_general_g_matches_quartic_when_c2_vanishes():
    env, pm, cn = ref(eta=0.9, ratio=0.5)
    coeffs = posynomial_coeffs("lb-beta", env, cn)
    beta = np.linspace(1.0, 8.0, 50)
    quartic = np.polyval(g_coefficients(coeffs, pm, cn), beta)
    c0, c1, c2 = coeffs
    e = c0 * pm.delta_p * cn.lambda_l**-2 / pm.p_bar
    general = beta**2 * (beta - c1) ** 2 - 2 * e * beta + e * c1
    assert np.allclose(quartic, general, rtol=1e-12, atol=1e-12)
    with pytest.raises(DomainError):
        g_value(2.0, (1.0, 0.5, 0.1), pm, cn, 5.0)


@pytest.mark.parametrize("alpha,kind", [(4.0, "lb-beta"), (4.0, "approx-a"), (4.0, "lb-q"),
                                        (5.0, "lb-beta"), (5.0, "approx-a")])
@pytest.mark.parametrize("ratio", [0.25, 0.5, 1.0])
def test_candidates_sit_on_relations(alpha, kind, ratio):
    env, pm, cn = ref(alpha=alpha, eta=0.9, ratio=ratio)
    cands = prop2_candidates(kind, env, pm, cn)
    conds = {c.provenance.rsplit("-", 1)[-1] for c in cands}
    assert {"i", "iv"} <= conds
    coeffs = posynomial_coeffs(kind, env, cn)
    for c in cands:
        if not c.feasible:
            assert c.violations
            continue
        assert c.lam == cn.lambda_l * c.beta
        assert posynomial_lhs(coeffs, c.lam, c.p, c.beta, alpha) == pytest.approx(1.0, abs=1e-8)
    first = [c for c in cands if c.provenance.endswith("cond-i")][0]
    assert first.beta == cn.lambda_u / cn.lambda_l == 5.0


@pytest.mark.parametrize("ratio", [0.25, 0.5, 1.0])
def test_kkt_multipliers_at_interior_candidate(ratio):
    env, pm, cn = ref(eta=0.9, ratio=ratio)
    for kind in ("lb-beta", "approx-a", "lb-q"):
        coeffs = posynomial_coeffs(kind, env, cn)
        sol = prop2_solve(kind, env, pm, cn)
        assert sol.provenance.endswith("cond-ii")
        poly = g_coefficients(coeffs, pm, cn)
        scale = np.sum(np.abs(poly) * sol.beta ** np.arange(4, -1, -1))
        assert abs(np.polyval(poly, sol.beta)) <= 1e-8 * scale
        mult, resid = kkt_check(sol, kind, env, pm, cn)
        assert resid <= 1e-6
        assert all(v >= -1e-9 for v in mult.values())


def test_condition_four_selected_with_small_reuse_penalty():
    env, pm, cn = ref(eta=0.7, ratio=1.0)
    for kind in ("lb-beta", "approx-a", "lb-q"):
        c0, c1, c2 = posynomial_coeffs(kind, env, cn)
        assert c1 + c2 < 1
        sol = prop2_solve(kind, env, pm, cn)
        assert sol.provenance.endswith("cond-iv")
        assert sol.lam == cn.lambda_l and sol.beta == 1.0
        grid = grid_oracle("surrogate", 100, env, pm, cn, kind=kind, zoom=2)
        assert grid.apc_reduced == pytest.approx(sol.apc_reduced, rel=1e-2)
        assert grid.apc_reduced >= sol.apc_reduced * (1 - 1e-9)


def test_prop2_requires_posynomial_kind_and_high_target():
    env, pm, cn = ref(eta=0.9)
    with pytest.raises(DomainError):
        prop2_candidates("lb-e", env, pm, cn)
    with pytest.raises(DomainError):
        prop2_candidates("lb-beta", env, pm, cn.with_(eta=0.4))


@pytest.mark.parametrize("ratio", [0.25, 0.5, 1.0])
def test_prop2_refine_directions(ratio):
    for alpha in (4.0, 5.0):
        env, pm, cn = ref(alpha=alpha, eta=0.9, ratio=ratio)
        for kind in ("lb-beta", "lb-q", "approx-a"):
            if kind == "lb-q" and alpha != 4:
                continue
            sol = prop2_solve(kind, env, pm, cn)
            out = prop2_refine(sol, env, pm, cn)
            assert abs(out.psi_achieved - cn.eta) <= 1e-6
            if kind != "approx-a":
                assert sol.psi_achieved > cn.eta
                assert out.apc_reduced < sol.apc_reduced
            elif sol.psi_achieved < cn.eta:
                assert out.p > sol.p
            else:
                assert out.apc_reduced <= sol.apc_reduced


def test_approximation_can_undershoot_and_refinement_repairs_it():
    env, pm, cn = ref(eta=0.9, ratio=0.5)
    sol = prop2_solve("approx-a", env, pm, cn)
    assert sol.psi_achieved < cn.eta
    fixed = prop2_refine(sol, env, pm, cn)
    assert fixed.psi_achieved >= cn.eta - 1e-6


def test_integer_band_variants():
    env, pm, cn = ref(eta=0.9, ratio=0.5)
    sol = prop2_solve("lb-q", env, pm, cn)
    v = integer_beta_variants(sol, env, pm, cn)
    assert v["real"] is sol
    assert v["ceil"].beta == math.ceil(sol.beta)
    names = ["ceil"]
    if v["floor"] is None:
        # The lower band count cannot reach the target at any power.
        with pytest.raises(InfeasibleError):
            given_beta_solve(float(math.floor(sol.beta)), env, pm, cn)
    else:
        assert v["floor"].beta == math.floor(sol.beta)
        names.append("floor")
    for name in names:
        assert abs(v[name].psi_achieved - cn.eta) <= 1e-6
        assert v[name].provenance.endswith(f"integer-{name}")


# ---------------------------------------------------------------------------
# Grid oracle
# ---------------------------------------------------------------------------

def test_grid_oracle_is_deterministic_and_bounded():
    env, pm, cn = ref(ratio=0.5)
    a = grid_oracle("exact", 60, env, pm, cn)
    b = grid_oracle("exact", 60, env, pm, cn)
    assert a == b
    refined = prop1_refine(prop1_solve(env, pm, cn), env, pm, cn)
    assert a.psi_achieved >= cn.eta
    # Exact-constraint optimum is no worse than the refined closed form, up to grid slack.
    assert a.apc_reduced <= refined.apc_reduced * (1 + 2 * a.residuals["log_cell"])


def test_grid_oracle_infeasible_and_resolution():
    env, pm, cn = ref()
    assert grid_oracle("exact", 50, env, pm.with_(p_max=1e-4), cn) is None
    with pytest.raises(DomainError):
        grid_oracle("exact", 10, env, pm, cn)
    with pytest.raises(DomainError):
        grid_oracle("bogus", 50, env, pm, cn)


def test_active_bound_labels():
    env, pm, cn = ref()
    assert active_bounds(cn.lambda_u, 1.0, pm, cn, 1e-9) == {"lambda_u"}
    assert active_bounds(0.5, pm.p_max, pm, cn, 1e-9) == {"p_max"}
    assert CASE_ACTIVE_BOUND[CaseLabel.BALANCED_TRADEOFF] == frozenset()


def test_bisection_failure_is_reported(monkeypatch):
    import greentopo.optimizer as opt
    monkeypatch.setattr(opt, "MAX_ITER", 3)
    env, pm, cn = ref()
    with pytest.raises(ConvergenceError):
        p_star(0.5, 1.0, env, pm, cn)
