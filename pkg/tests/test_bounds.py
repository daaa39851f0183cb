import math

import numpy as np
import pytest

import bounds
import geometry
from bounds import BoundCurve, InequalityCheck
from cones import Circular, Orthant
from geometry import MomentFunction
from numerics import chi_mixture_tail
from restricted import SolverConfig
from utils_conic import DimensionMismatch, DomainError, HypothesisViolation

FAST = SolverConfig(multistarts=6, max_iters=400)


# --- Curves ---

def test_conc_norm_bound_at_two_past_the_mean():
    dC, dD = 19.51, 49.25
    lam = math.sqrt(dD) + math.sqrt(dC) + 2.0
    curve = bounds.conc_bound("norm", [0.0, lam], dC, dD)
    assert curve.values[0] == 1.0
    assert curve.values[1] == pytest.approx(math.exp(-2.0))
    assert curve.kind == "conc_norm"


def test_conc_sv_bound_at_zero():
    dC, dD = 19.51, 49.25
    curve = bounds.conc_bound("sv", [0.0, 10.0], dC, dD)
    assert curve.values[0] == pytest.approx(math.exp(-0.5 * (math.sqrt(dD) - math.sqrt(dC)) ** 2))
    assert curve.values[1] == 1.0


def test_conc_bound_rejects_bad_input():
    with pytest.raises(DomainError):
        bounds.conc_bound("sv", [1.0, 0.5], 1.0, 2.0)
    with pytest.raises(DomainError):
        bounds.conc_bound("cdf", [0.0, 1.0], 1.0, 2.0)
    with pytest.raises(DomainError):
        bounds.conc_bound("sv", [0.0, 1.0], -1.0, 2.0)


def test_iv_bounds_are_monotone_probabilities():
    pC = geometry.profile(Circular(4, 1.0))
    pD = geometry.profile(Circular(9, 1.0))
    grid = np.linspace(0.0, 8.0, 25)
    sv = bounds.iv_bound("sv", grid, pC, pD)
    norm = bounds.iv_bound("norm", grid, pC, pD)
    for curve in (sv, norm):
        assert np.all((curve.values >= 0) & (curve.values <= 1))
    assert np.all(np.diff(sv.values) >= 0)
    assert np.all(np.diff(norm.values) <= 0)
    assert norm.values[0] == 1.0
    assert sv.meta["sdim_C"] == pytest.approx(2.0)


def test_default_grids():
    sv = bounds.default_grid("sv", 4.0, 16.0, points=11)
    norm = bounds.default_grid("norm", 4.0, 16.0, points=11)
    assert sv[0] == 0.0 and sv[-1] == pytest.approx(6.0)
    assert norm[-1] == pytest.approx(12.0)
    assert bounds.default_grid("sv", 16.0, 1.0)[-1] == 1.0


def test_curve_write_read(tmp_path):
    curve = bounds.conc_bound("norm", np.linspace(0.0, 5.0, 6), 1.0, 4.0)
    path = curve.write(str(tmp_path / "c.table"))
    back = BoundCurve.read(path, "conc_norm")
    np.testing.assert_allclose(back.grid, curve.grid)
    np.testing.assert_allclose(back.values, curve.values, rtol=1e-8)
    with pytest.raises(DomainError):
        BoundCurve([0.0], [1.0], "histogram")
    with pytest.raises(DimensionMismatch):
        BoundCurve([0.0, 1.0], [1.0], "marker")


def test_mean_marker_is_a_vertical_segment():
    marker = bounds.mean_marker(2.5, "mean_empirical_sv")
    np.testing.assert_array_equal(marker.grid, [2.5, 2.5])
    np.testing.assert_array_equal(marker.values, [0.0, 1.0])
    assert marker.meta["label"] == "mean_empirical_sv"


# --- Empirical distributions ---

def test_solver_samples_are_worker_independent():
    C, D = Circular(3, 1.0), Orthant(4)
    a, _ = bounds.solver_samples("sv", C, D, 12, seed=3, cfg=FAST, workers=1)
    b, _ = bounds.solver_samples("sv", C, D, 12, seed=3, cfg=FAST, workers=4)
    np.testing.assert_array_equal(a, b)


def test_empirical_curve_shapes_and_meta():
    C, D = Circular(3, 1.0), Circular(5, 1.0)
    grid = np.linspace(0.0, 6.0, 13)
    curve = bounds.empirical_curve("sv", C, D, 5, 3, grid, 100, seed=1, solver_cfg=FAST)
    assert curve.kind == "empirical_cdf_sv"
    assert np.all(np.diff(curve.values) >= 0)
    assert curve.meta["trials"] == 100 and curve.meta["seed"] == 1
    assert curve.meta["se"].shape == grid.shape
    with pytest.raises(DomainError):
        bounds.empirical_curve("sv", C, D, 5, 3, grid, 10, seed=1)
    with pytest.raises(DimensionMismatch):
        bounds.empirical_curve("sv", C, D, 3, 5, grid, 100, seed=1)


def _dominated(empirical, bound):
    return np.all(empirical.values <= bound.values + 3 * empirical.meta["se"] + 1e-12)


def test_bounds_dominate_empirical_curves_small():
    C, D = Circular(3, 1.0), Circular(6, 1.0)
    pC, pD = geometry.profile(C), geometry.profile(D)
    dC, dD = pC.gwidth_sq(), pD.gwidth_sq()
    for kind in ("sv", "norm"):
        grid = bounds.default_grid(kind, dC, dD, points=30)
        emp = bounds.empirical_curve(kind, C, D, 6, 3, grid, 300, seed=2, solver_cfg=FAST)
        assert _dominated(emp, bounds.iv_bound(kind, grid, pC, pD))
        assert _dominated(emp, bounds.conc_bound(kind, grid, dC, dD))


@pytest.mark.slow
def test_bounds_dominate_empirical_curves_acceptance_size():
    C, D = Circular(8, 1.0), Circular(20, 1.0)
    pC, pD = geometry.profile(C), geometry.profile(D)
    dC, dD = pC.gwidth_sq(), pD.gwidth_sq()
    for kind in ("sv", "norm"):
        grid = bounds.default_grid(kind, dC, dD)
        emp = bounds.empirical_curve(kind, C, D, 20, 8, grid, 2000, seed=0)
        assert _dominated(emp, bounds.iv_bound(kind, grid, pC, pD))
        assert _dominated(emp, bounds.conc_bound(kind, grid, dC, dD))


# --- Inequality checks ---

def test_inequality_check_margin():
    lhs = np.array([1.0, 2.0, 3.0])
    rhs = lhs + 10.0
    check = InequalityCheck.from_samples("demo", lhs, rhs, "<=")
    assert check.satisfied_within > 0 and check.holds
    flipped = InequalityCheck.from_samples("demo", lhs, rhs, ">=")
    assert flipped.satisfied_within == pytest.approx(-check.satisfied_within)
    assert not flipped.holds
    equal = InequalityCheck.from_samples("demo", np.ones(3), np.ones(3), "<=")
    assert equal.satisfied_within == 0.0
    with pytest.raises(DomainError):
        InequalityCheck.from_samples("demo", lhs, rhs, "<")


def test_paired_standard_error_is_smaller_for_correlated_sides():
    z = np.random.default_rng(0).standard_normal(500)
    pooled = InequalityCheck.from_samples("p", z, z + 0.05, "<=")
    paired = InequalityCheck.from_samples("p", z, z + 0.05, "<=", paired=True)
    assert paired.satisfied_within > pooled.satisfied_within


def test_check_thm11_admissibility():
    C, D = Circular(3, 1.0), Circular(4, 1.0)
    with pytest.raises(HypothesisViolation):
        bounds.check_thm11(MomentFunction.step(1.0), C, D, 4, 3, 100, 0, variant="norm_convex")
    with pytest.raises(HypothesisViolation):
        bounds.check_thm11(MomentFunction.exp_scaled(-1.0), C, D, 4, 3, 100, 0, variant="sv_gamma")
    with pytest.raises(DomainError):
        bounds.check_thm11(MomentFunction.identity(), C, D, 4, 3, 100, 0, variant="norm_strict")
    with pytest.raises(DimensionMismatch):
        bounds.check_thm11(MomentFunction.identity(), C, D, 3, 4, 100, 0)


@pytest.mark.parametrize("variant", bounds.THM11_VARIANTS)
def test_check_thm11_holds_on_small_pair(variant):
    C, D = Circular(3, 1.0), Circular(4, 1.0)
    check = bounds.check_thm11(MomentFunction.power(2.0), C, D, 4, 3, 400, seed=5, variant=variant, cfg=FAST)
    assert check.holds, str(check)
    assert check.meta["variant"] == variant
    assert check.name == f"thm11_{variant}"


def test_check_thm11_all_skips_inadmissible_pairs():
    fs = [MomentFunction.identity(), MomentFunction.step(1.0)]
    results = bounds.check_thm11_all(fs, Circular(3, 1.0), Orthant(3), 200, seed=1, cfg=FAST)
    names = [(c.name, c.meta["f"]) for c in results]
    assert len(results) == 5
    assert ("thm11_norm_convex", "step(1)") not in names
    assert all(c.holds for c in results)


def test_check_linear_image():
    C, D = Circular(3, 1.0), Orthant(3)
    T = np.diag([1.0, 2.0, 2.0])
    check = bounds.check_linear_image(C, D, T, np.eye(3), 1.0, 200, seed=4, cfg=FAST)
    assert check.name == "linear_image_kappa"
    assert check.meta["kappa_factor"] == pytest.approx(2.0)
    assert check.meta["renegar_le_kappa"]
    assert check.holds
    with pytest.raises(HypothesisViolation):
        bounds.check_linear_image(C, D, T, np.eye(3), 0.5, 200, seed=4)


# --- Gordon-type comparisons ---

@pytest.fixture
def catalog():
    return bounds.gordon_catalog(Circular(3, 1.0), Orthant(3), seed=2, points=4)


def test_catalog_instances_meet_increment_conditions(catalog):
    assert [inst.tag for inst in catalog] == ["slepian", "tensor_product", "affine_tensor", "affine_tensor_bundle"]
    for inst in catalog:
        cond = bounds.gram_conditions(inst)
        assert cond["same_row_ok"] and cond["cross_row_ok"], inst.tag
    assert bounds.gram_conditions(catalog[2])["equal_variance"]
    assert bounds.gram_conditions(catalog[3])["equal_variance"]


@pytest.mark.parametrize("f", [MomentFunction.identity(), MomentFunction.power(2.0)], ids=lambda f: f.label)
def test_gordon_checks_hold(catalog, f):
    for inst in catalog:
        check = bounds.check_gordon_variant(inst, f, 4000, seed=3)
        assert check.holds, str(check)
        assert check.meta["hypotheses_met"]


def test_gordon_hypotheses_are_enforced(catalog):
    slepian, _, affine, _ = catalog
    with pytest.raises(HypothesisViolation):
        bounds.check_gordon_variant(slepian, MomentFunction.step(0.5), 100, seed=0)
    check = bounds.check_gordon_variant(affine, MomentFunction.step(0.5), 2000, seed=0)
    assert check.meta["hypotheses_met"]
    with pytest.raises(HypothesisViolation):
        bounds.check_gordon_variant(affine, MomentFunction.exp_scaled(-1.0), 100, seed=0)


def test_linear_image_instance():
    inst = bounds.linear_image_instance(20, 2.0, t=0.3)
    holds = bounds.check_gordon_variant(inst, MomentFunction.power(2.0), 5000, seed=1)
    assert holds.holds
    with pytest.raises(HypothesisViolation):
        bounds.check_gordon_variant(inst, MomentFunction.power(0.5), 100, seed=1)
    shown = bounds.check_gordon_variant(inst, MomentFunction.power(0.5), 100, seed=1, enforce_hypotheses=False)
    assert not shown.meta["hypotheses_met"]
    with pytest.raises(DomainError):
        bounds.linear_image_instance(20, 0.5)


def test_linear_image_instance_default_t_minimizes_quotient():
    inst = bounds.linear_image_instance(10, 2.0, r=0.5)
    grid = geometry.figure1_grid()
    quotients = [geometry.circular_quotient(10, t, 2.0, 0.5) for t in grid]
    assert inst.params["t"] == pytest.approx(grid[int(np.argmin(quotients))])


@pytest.mark.slow
@pytest.mark.parametrize("C,D", [
    (Circular(3, 1.0), Circular(4, 1.0)),
    (Orthant(3), Orthant(4)),
    (Circular(4, 0.5), Orthant(4)),
    (Orthant(4), Circular(5, 2.0)),
    (Circular(5, 1.0), Circular(5, 1.0)),
    (Orthant(2), Circular(6, 1.0)),
])
def test_comparison_catalog_acceptance_size(C, D):
    fs = [MomentFunction.identity(), MomentFunction.power(2.0), MomentFunction.exp_scaled(0.25)]
    for check in bounds.check_thm11_all(fs, C, D, 100_000, seed=0):
        assert check.holds, str(check)


def test_norm_comparison_on_half_line_is_off_by_the_projection_mean():
    # for C = R+ the restricted norm is ‖Proj_D g‖, so the gap is E max(g, 0)
    check = bounds.check_thm11(MomentFunction.identity(), Orthant(1), Circular(3, 1.0), 3, 1, 4000, seed=3, cfg=FAST)
    gap = check.rhs_mean - check.lhs_mean
    assert abs(gap - 1.0 / math.sqrt(2.0 * math.pi)) <= 4 * math.hypot(check.lhs_se, check.rhs_se)


def test_iv_norm_bound_never_drops_below_the_pointwise_value():
    pC = geometry.profile(Circular(4, 1.0))
    pD = geometry.profile(Orthant(5))
    grid = np.linspace(0.0, 7.0, 40)
    curve = bounds.iv_bound("norm", grid, pC, pD)
    raw = np.minimum([2.0 * chi_mixture_tail(pC.v, pD.v, lam, "+") for lam in grid], 1.0)
    assert np.all(curve.values >= raw)
    assert np.all(np.diff(curve.values) <= 0)


def test_solver_samples_default_to_the_configured_pool(monkeypatch):
    seen = []
    real = bounds.parallel_map

    def spy(func, items, workers=None):
        seen.append(workers)
        return real(func, items, workers)

    monkeypatch.setattr(bounds, "parallel_map", spy)
    C, D = Circular(3, 1.0), Orthant(3)
    one, _ = bounds.solver_samples("norm", C, D, 8, seed=2, cfg=SolverConfig(multistarts=4, max_iters=300, workers=1))
    three, _ = bounds.solver_samples("norm", C, D, 8, seed=2, cfg=SolverConfig(multistarts=4, max_iters=300, workers=3))
    explicit, _ = bounds.solver_samples("norm", C, D, 8, seed=2, cfg=SolverConfig(multistarts=4, max_iters=300,
                                                                                   workers=3), workers=2)
    assert seen == [1, 3, 2]
    np.testing.assert_array_equal(one, three)
    np.testing.assert_array_equal(one, explicit)
