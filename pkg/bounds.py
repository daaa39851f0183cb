"""
Bounds
======
Tail and cdf bounds for the restricted norm and singular value of a Gaussian
matrix, their empirical counterparts, and Monte Carlo checkers for the
moment comparison inequalities:

    E f(‖G‖_{C→D})     ≤ E f(‖Proj_D g′‖ + ‖Proj_C g‖)   f increasing, convex
    E f(‖G‖_{C→D} + γ) ≤ E f(‖Proj_D g′‖ + ‖Proj_C g‖)   f increasing
    E f(σ_{C→D}(G) + γ) ≥ E f(‖Proj_D g′‖ − ‖Proj_C g‖)   f increasing

Checkers never assert; they report the favorable margin in pooled standard
errors so that near-equalities do not flake.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import MIN_TRIALS
from cones import Cone, Circular, Full, LinearImage, sample_stub_points
from feasibility import renegar
from geometry import IntrinsicVolumeProfile, MomentFunction, circular_quotient, figure1_grid
from numerics import (SeededSampler, QuadratureConfig, DEFAULT_QUAD, chi_mixture_tail, gauss_matrix,
                      kappa, mc_evaluate, mean_se)
from restricted import SolverConfig, restricted_norm, restricted_sv
from utils_conic import (logger, parallel_map, read_table, write_table, DomainError, DimensionMismatch,
                         HypothesisViolation, UnsupportedProjection)

CURVE_KINDS = ("conc_norm", "conc_sv", "iv_norm", "iv_sv", "empirical_cdf_sv", "empirical_tail_norm",
               "marker")
THM11_VARIANTS = ("norm_convex", "norm_gamma", "sv_gamma")
GORDON_TAGS = ("slepian", "tensor_product", "affine_tensor", "affine_tensor_bundle", "linear_image")

# Solver settings for trial loops: fewer starts and iterations than a single solve.
TRIAL_SOLVER = SolverConfig(multistarts=8, max_iters=500)
MARGIN_CAP = 1e6
DEFAULT_GRID_POINTS = 200

# Stream indices for the different random ingredients of a checker.
_STREAM_MATRIX = 6
_STREAM_STARTS = 7
_STREAM_GAMMA = 8
_STREAM_G_C = 9
_STREAM_G_D = 10
_STREAM_IMAGE_MATRIX = 11
_STREAM_GORDON = 12


@dataclass
class BoundCurve:
    grid: np.ndarray
    values: np.ndarray
    kind: str
    meta: Dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.kind not in CURVE_KINDS:
            raise DomainError(f"unknown curve kind '{self.kind}'")
        if self.grid.shape != self.values.shape:
            raise DimensionMismatch(f"grid {self.grid.shape} and values {self.values.shape} differ")

    def write(self, path: str) -> str:
        return write_table(path, self.grid, self.values)

    @classmethod
    def read(cls, path: str, kind: str, meta: Optional[Dict] = None) -> "BoundCurve":
        grid, values = read_table(path)
        return cls(grid, values, kind, dict(meta or {}))


@dataclass
class InequalityCheck:
    """
    Both sides of an inequality with their standard errors.

    satisfied_within is the favorable margin in standard errors: positive
    when the claimed direction holds on the sample, around zero at equality.
    """
    name: str
    lhs_mean: float
    lhs_se: float
    rhs_mean: float
    rhs_se: float
    direction: str
    satisfied_within: float
    meta: Dict = field(default_factory=dict)

    @classmethod
    def from_samples(cls, name: str, lhs: np.ndarray, rhs: np.ndarray, direction: str,
                     paired: bool = False, meta: Optional[Dict] = None) -> "InequalityCheck":
        if direction not in ("<=", ">="):
            raise DomainError(f"direction must be '<=' or '>=', got {direction!r}")
        lhs_mean, lhs_se = mean_se(lhs)
        rhs_mean, rhs_se = mean_se(rhs)
        if paired:
            _, se = mean_se(np.asarray(lhs, dtype=float) - np.asarray(rhs, dtype=float))
        else:
            se = math.hypot(lhs_se, rhs_se)
        gap = rhs_mean - lhs_mean if direction == "<=" else lhs_mean - rhs_mean
        return cls(name, lhs_mean, lhs_se, rhs_mean, rhs_se, direction, _margin(gap, se), dict(meta or {}))

    @property
    def holds(self) -> bool:
        return self.satisfied_within >= -3.0

    def __str__(self):
        return (f"{self.name}: {self.lhs_mean:.6g} ± {self.lhs_se:.2g} {self.direction} "
                f"{self.rhs_mean:.6g} ± {self.rhs_se:.2g} (margin {self.satisfied_within:+.2f} SE)")


def _margin(gap: float, se: float) -> float:
    if se > 0:
        return float(np.clip(gap / se, -MARGIN_CAP, MARGIN_CAP))
    if abs(gap) <= 1e-12:
        return 0.0
    return MARGIN_CAP if gap > 0 else -MARGIN_CAP


def _check_grid(lam_grid: Sequence[float]) -> np.ndarray:
    grid = np.asarray(lam_grid, dtype=float).ravel()
    if grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise DomainError("lambda grid must be non-empty and strictly increasing")
    return grid


def default_grid(kind: str, dstar_C: float, dstar_D: float, points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    """[0, √δ*D − √δ*C + 4] for sv curves, [0, √δ*D + √δ*C + 6] for norm curves."""
    if kind == "sv":
        hi = math.sqrt(dstar_D) - math.sqrt(dstar_C) + 4.0
    elif kind == "norm":
        hi = math.sqrt(dstar_D) + math.sqrt(dstar_C) + 6.0
    else:
        raise DomainError(f"kind must be 'norm' or 'sv', got {kind!r}")
    return np.linspace(0.0, max(hi, 1.0), points)


# --- Bound curves ---

def conc_bound(kind: str, lam_grid: Sequence[float], dstar_C: float, dstar_D: float) -> BoundCurve:
    """
    Concentration bounds from the Gaussian widths:
    P{σ ≤ λ} ≤ exp(−max{0, √δ*D − √δ*C − λ}²/2),
    P{‖G‖ ≥ λ} ≤ exp(−max{0, λ − √δ*D − √δ*C}²/2).
    """
    if dstar_C < 0 or dstar_D < 0:
        raise DomainError("Gaussian widths must be nonnegative")
    grid = _check_grid(lam_grid)
    a, b = math.sqrt(dstar_C), math.sqrt(dstar_D)
    if kind == "sv":
        gap = np.maximum(0.0, b - a - grid)
    elif kind == "norm":
        gap = np.maximum(0.0, grid - b - a)
    else:
        raise DomainError(f"kind must be 'norm' or 'sv', got {kind!r}")
    meta = {"dstar_C": dstar_C, "dstar_D": dstar_D}
    return BoundCurve(grid, np.exp(-0.5 * gap * gap), f"conc_{kind}", meta)


def iv_bound(kind: str, lam_grid: Sequence[float], pC: IntrinsicVolumeProfile, pD: IntrinsicVolumeProfile,
             cfg: QuadratureConfig = DEFAULT_QUAD) -> BoundCurve:
    """
    Intrinsic-volume bounds (union bound, factor 2):
    sv:   min{1, 2 Σ v_i(C) v_j(D) P{χ′_j − χ_i < λ}}
    norm: min{1, 2 Σ v_i(C) v_j(D) P{χ′_j + χ_i ≥ λ}}
    """
    grid = _check_grid(lam_grid)
    if kind == "sv":
        raw = np.array([2.0 * (1.0 - chi_mixture_tail(pC.v, pD.v, lam, "-", cfg)) for lam in grid])
        values = np.maximum.accumulate(np.minimum(raw, 1.0))
    elif kind == "norm":
        raw = np.array([2.0 * chi_mixture_tail(pC.v, pD.v, lam, "+", cfg) for lam in grid])
        # smallest non-increasing majorant of raw
        values = np.maximum.accumulate(np.minimum(raw, 1.0)[::-1])[::-1]
    else:
        raise DomainError(f"kind must be 'norm' or 'sv', got {kind!r}")
    meta = {"sdim_C": pC.sdim(), "sdim_D": pD.sdim(), "m": pC.ambient, "n": pD.ambient}
    return BoundCurve(grid, np.clip(values, 0.0, 1.0), f"iv_{kind}", meta)


# --- Empirical distributions ---

def solver_samples(kind: str, C: Cone, D: Cone, trials: int, seed: int,
                   cfg: SolverConfig = TRIAL_SOLVER, workers: Optional[int] = None,
                   stream: int = _STREAM_MATRIX) -> Tuple[np.ndarray, int]:
    """
    Restricted norm (kind='norm') or singular value (kind='sv') of `trials`
    Gaussian matrices. Trial i draws its matrix and its solver starts from
    substream i, so results do not depend on the pool size.

    Returns:
        (values, number of trials with converged_fraction < 0.5)
    """
    if kind not in ("norm", "sv"):
        raise DomainError(f"kind must be 'norm' or 'sv', got {kind!r}")
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    solve = restricted_norm if kind == "norm" else restricted_sv
    m, n = C.ambient, D.ambient
    matrices = SeededSampler(seed, stream)
    starts = SeededSampler(seed, _STREAM_STARTS, (stream,))

    def trial(i):
        G = gauss_matrix(matrices.substream(i), n, m)
        res = solve(G, C, D, cfg, sampler=starts.substream(i))
        return res.value, res.converged_fraction

    results = parallel_map(trial, range(trials), cfg.workers if workers is None else workers)
    values = np.array([v for v, _ in results])
    unreliable = sum(1 for _, frac in results if frac < 0.5)
    if unreliable:
        logger.warning(f"{kind} samples: {unreliable}/{trials} trials with fewer than half the starts converged")
    return values, unreliable


def empirical_curve(kind: str, C: Cone, D: Cone, n: int, m: int, lam_grid: Sequence[float], trials: int,
                    seed: int, solver_cfg: SolverConfig = TRIAL_SOLVER,
                    workers: Optional[int] = None) -> BoundCurve:
    """Empirical cdf of σ_{C→D}(G) (kind='sv') or tail of ‖G‖_{C→D} (kind='norm') on a λ grid."""
    if trials < MIN_TRIALS:
        raise DomainError(f"empirical curves need at least {MIN_TRIALS} trials, got {trials}")
    if C.ambient != m or D.ambient != n:
        raise DimensionMismatch(f"cones live in R^{C.ambient} -> R^{D.ambient} but m={m}, n={n}")
    grid = _check_grid(lam_grid)
    values, unreliable = solver_samples(kind, C, D, trials, seed, solver_cfg, workers)
    if kind == "sv":
        curve = (values[None, :] <= grid[:, None]).mean(axis=1)
        out_kind = "empirical_cdf_sv"
    else:
        curve = (values[None, :] >= grid[:, None]).mean(axis=1)
        out_kind = "empirical_tail_norm"
    meta = {"trials": trials, "seed": seed, "unreliable": unreliable,
            "mean": float(values.mean()), "se": binomial_se(curve, trials)}
    logger.info(f"empirical {kind}: {trials} trials, mean {values.mean():.6f}, {unreliable} unreliable")
    return BoundCurve(grid, curve, out_kind, meta)


def binomial_se(p: np.ndarray, trials: int) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return np.sqrt(np.clip(p * (1.0 - p), 0.0, None) / trials)


def mean_marker(mu: float, label: str) -> BoundCurve:
    """Vertical segment from (μ, 0) to (μ, 1)."""
    return BoundCurve([mu, mu], [0.0, 1.0], "marker", {"label": label})


# --- Moment comparison checks ---

def _admissible(f: MomentFunction, variant: str) -> None:
    if variant not in THM11_VARIANTS:
        raise DomainError(f"unknown variant '{variant}', expected one of {THM11_VARIANTS}")
    if not f.monotone:
        raise HypothesisViolation(f"{variant} needs an increasing f, got {f.label}")
    if variant == "norm_convex" and not f.convex:
        raise HypothesisViolation(f"norm_convex needs a convex f, got {f.label}")


@dataclass
class ComparisonSamples:
    """Shared draws for the comparison checks of one cone pair."""
    trials: int
    seed: int
    norm: Optional[np.ndarray]
    sv: Optional[np.ndarray]
    gamma: np.ndarray
    proj_C: np.ndarray
    proj_D: np.ndarray
    unreliable: int = 0


def comparison_samples(C: Cone, D: Cone, trials: int, seed: int, kinds: Sequence[str] = ("norm", "sv"),
                       cfg: SolverConfig = TRIAL_SOLVER, workers: Optional[int] = None) -> ComparisonSamples:
    workers = cfg.workers if workers is None else workers
    values = {}
    unreliable = 0
    for kind in kinds:
        values[kind], bad = solver_samples(kind, C, D, trials, seed, cfg, workers)
        unreliable += bad
    gamma = SeededSampler(seed, _STREAM_GAMMA).rng().standard_normal(trials)
    proj_C = mc_evaluate(lambda X: np.linalg.norm(C.project_many(X), axis=1),
                         SeededSampler(seed, _STREAM_G_C), trials, C.ambient, workers)
    proj_D = mc_evaluate(lambda X: np.linalg.norm(D.project_many(X), axis=1),
                         SeededSampler(seed, _STREAM_G_D), trials, D.ambient, workers)
    return ComparisonSamples(trials, seed, values.get("norm"), values.get("sv"), gamma, proj_C, proj_D, unreliable)


def _thm11_from_samples(f: MomentFunction, variant: str, s: ComparisonSamples, meta: Dict) -> InequalityCheck:
    _admissible(f, variant)
    if variant == "sv_gamma":
        lhs = f(s.sv + s.gamma)
        rhs = f(s.proj_D - s.proj_C)
        direction = ">="
    else:
        lhs = f(s.norm if variant == "norm_convex" else s.norm + s.gamma)
        rhs = f(s.proj_D + s.proj_C)
        direction = "<="
    meta = dict(meta, f=f.label, variant=variant, trials=s.trials, seed=s.seed, unreliable=s.unreliable)
    return InequalityCheck.from_samples(f"thm11_{variant}", lhs, rhs, direction, meta=meta)


def check_thm11(f: MomentFunction, C: Cone, D: Cone, n: int, m: int, trials: int, seed: int,
                variant: str = "norm_convex", cfg: SolverConfig = TRIAL_SOLVER,
                workers: Optional[int] = None) -> InequalityCheck:
    """
    Monte Carlo check of one comparison inequality for G ∈ ℝ^{n×m}.

    Variants:
        norm_convex: E f(‖G‖) ≤ E f(‖Proj_D g′‖ + ‖Proj_C g‖), f increasing and convex
        norm_gamma:  E f(‖G‖ + γ) ≤ E f(‖Proj_D g′‖ + ‖Proj_C g‖), f increasing
        sv_gamma:    E f(σ(G) + γ) ≥ E f(‖Proj_D g′‖ − ‖Proj_C g‖), f increasing
    """
    _admissible(f, variant)
    if C.ambient != m or D.ambient != n:
        raise DimensionMismatch(f"cones live in R^{C.ambient} -> R^{D.ambient} but m={m}, n={n}")
    kind = "sv" if variant == "sv_gamma" else "norm"
    samples = comparison_samples(C, D, trials, seed, (kind,), cfg, workers)
    return _thm11_from_samples(f, variant, samples, {"C": C.describe(), "D": D.describe()})


def check_thm11_all(fs: Sequence[MomentFunction], C: Cone, D: Cone, trials: int, seed: int,
                    variants: Sequence[str] = THM11_VARIANTS, cfg: SolverConfig = TRIAL_SOLVER,
                    workers: Optional[int] = None) -> List[InequalityCheck]:
    """Every admissible (f, variant) pair on one shared set of draws; inadmissible pairs are skipped."""
    kinds = sorted({"sv" if v == "sv_gamma" else "norm" for v in variants})
    samples = comparison_samples(C, D, trials, seed, kinds, cfg, workers)
    meta = {"C": C.describe(), "D": D.describe()}
    out = []
    for variant in variants:
        for f in fs:
            try:
                out.append(_thm11_from_samples(f, variant, samples, meta))
            except HypothesisViolation as e:
                logger.info(f"skipping {f.label} on {variant}: {e}")
    return out


def check_linear_image(C: Cone, D: Cone, T: np.ndarray, U: np.ndarray, r: float, trials: int, seed: int,
                       cfg: SolverConfig = TRIAL_SOLVER, workers: Optional[int] = None) -> InequalityCheck:
    """
    E ‖G̃‖^r_{TC→UD} ≤ κ(T)^r κ(U)^r E ‖G‖^r_{C→D} for r ≥ 1.

    The check is reported against the κ factor; meta also carries the
    sharper Renegar factor ℛ_C(T)^r ℛ_D(U)^r and its margin.
    """
    if r < 1:
        raise HypothesisViolation(f"linear-image bound needs r >= 1, got {r}")
    T = np.atleast_2d(np.asarray(T, dtype=float))
    U = np.atleast_2d(np.asarray(U, dtype=float))
    TC, UD = LinearImage(T, C, "T"), LinearImage(U, D, "U")
    for image in (TC, UD):
        if image.resolved is None:
            raise UnsupportedProjection(f"no projection for the image cone {image.describe()}")

    image_vals, bad_image = solver_samples("norm", TC, UD, trials, seed, cfg, workers, _STREAM_IMAGE_MATRIX)
    base_vals, bad_base = solver_samples("norm", C, D, trials, seed, cfg, workers)
    lhs = image_vals ** r
    rhs = base_vals ** r

    kappa_factor = (kappa(T) * kappa(U)) ** r
    ren_T = renegar(T, C, Full(T.shape[0]), cfg)
    ren_U = renegar(U, D, Full(U.shape[0]), cfg)
    renegar_factor = (ren_T * ren_U) ** r
    sharp = InequalityCheck.from_samples("linear_image_renegar", lhs, renegar_factor * rhs, "<=")

    meta = {"C": C.describe(), "D": D.describe(), "r": r, "trials": trials, "seed": seed,
            "kappa_factor": kappa_factor, "renegar_factor": renegar_factor,
            "renegar_T": ren_T, "kappa_T": kappa(T), "renegar_U": ren_U, "kappa_U": kappa(U),
            "renegar_margin": sharp.satisfied_within, "unreliable": bad_image + bad_base,
            "renegar_le_kappa": bool(ren_T <= kappa(T) * (1 + 1e-6) and ren_U <= kappa(U) * (1 + 1e-6))}
    return InequalityCheck.from_samples("linear_image_kappa", lhs, kappa_factor * rhs, "<=", meta=meta)


# --- Gordon-type comparisons on finite processes ---

@dataclass
class GordonInstance:
    """
    Two centered Gaussian processes indexed by (row, col), each linear in a
    standard Gaussian vector: side = phi @ z. The claimed direction is
    E f₊(min_row max_col A) ≥ E f₊(min_row max_col B).

    The linear_image tag carries circular-cone parameters instead of phis.
    """
    tag: str
    rows: int
    cols: int
    phi_a: Optional[np.ndarray]
    phi_b: Optional[np.ndarray]
    needs_convex: bool
    params: Dict = field(default_factory=dict)

    def __post_init__(self):
        if self.tag not in GORDON_TAGS:
            raise DomainError(f"unknown Gordon instance '{self.tag}', expected one of {GORDON_TAGS}")


def _ball_points(C: Cone, count: int, rng: np.random.Generator) -> np.ndarray:
    """The origin plus count − 1 points of the stub C ∩ B."""
    pts = sample_stub_points(C, count - 1, rng) * rng.uniform(0.1, 1.0, size=(count - 1, 1))
    return np.vstack([np.zeros(C.ambient), pts])


def slepian_instance(C: Cone, points: int = 12, seed: int = 0, scale: float = 0.5) -> GordonInstance:
    """Single row: the stub point set against its radial contraction by `scale` (origin kept)."""
    if not 0 < scale <= 1:
        raise DomainError(f"contraction scale must lie in (0, 1], got {scale}")
    P = _ball_points(C, points, SeededSampler(seed, _STREAM_GORDON, (0,)).rng())
    return GordonInstance("slepian", 1, len(P), P, scale * P, True, {"scale": scale, "C": C.describe()})


def tensor_product_instance(C: Cone, D: Cone, points: int = 6, seed: int = 0) -> GordonInstance:
    """
    Single row over pairs (x, y), x ∈ C ∩ S, y ∈ D ∩ B:
    A = ⟨g, x⟩ + ⟨g′, y⟩ against B = yᵀGx.
    """
    rng = SeededSampler(seed, _STREAM_GORDON, (1,)).rng()
    X = sample_stub_points(C, points, rng)
    Y = _ball_points(D, points, rng)
    pairs = [(x, y) for x in X for y in Y]
    phi_a = np.array([np.concatenate([x, y]) for x, y in pairs])
    phi_b = np.array([np.kron(y, x) for x, y in pairs])
    return GordonInstance("tensor_product", 1, len(pairs), phi_a, phi_b, True,
                          {"C": C.describe(), "D": D.describe()})


def affine_tensor_instance(C: Cone, D: Cone, points: int = 6, seed: int = 0) -> GordonInstance:
    """As tensor_product with B = yᵀGx + γ, which matches the variances of A."""
    inst = tensor_product_instance(C, D, points, seed)
    phi_b = np.hstack([inst.phi_b, np.ones((inst.cols, 1))])
    return GordonInstance("affine_tensor", 1, inst.cols, inst.phi_a, phi_b, False, inst.params)


def affine_tensor_bundle_instance(C: Cone, D: Cone, points: int = 6, seed: int = 0) -> GordonInstance:
    """
    Rows x ∈ C ∩ S, columns y ∈ D ∩ B:
    A = yᵀGx + γ‖y‖ against B = ‖y‖⟨g, x⟩ + ⟨g′, y⟩.
    """
    rng = SeededSampler(seed, _STREAM_GORDON, (2,)).rng()
    X = sample_stub_points(C, points, rng)
    Y = _ball_points(D, points, rng)
    phi_a = np.array([np.concatenate([np.kron(y, x), [np.linalg.norm(y)]]) for x in X for y in Y])
    phi_b = np.array([np.concatenate([np.linalg.norm(y) * x, y]) for x in X for y in Y])
    return GordonInstance("affine_tensor_bundle", len(X), len(Y), phi_a, phi_b, False,
                          {"C": C.describe(), "D": D.describe()})


def linear_image_instance(m: int, s: float, t: Optional[float] = None, r: float = 0.5) -> GordonInstance:
    """
    s·‖Proj_{C_m(t)} g‖ against ‖Proj_{C_m(st)} g‖. Without t, the grid point
    minimizing the circular quotient at exponent r is used.
    """
    if s < 1 or m < 2:
        raise DomainError(f"linear-image instance needs s >= 1 and m >= 2, got s={s}, m={m}")
    if t is None:
        grid = figure1_grid()
        t = float(grid[int(np.argmin([circular_quotient(m, tt, s, r) for tt in grid]))])
    return GordonInstance("linear_image", 1, 1, None, None, True, {"m": m, "s": float(s), "t": float(t), "r": r})


def gordon_catalog(C: Cone, D: Cone, seed: int = 0, points: int = 6) -> List[GordonInstance]:
    return [
        slepian_instance(C, 2 * points, seed),
        tensor_product_instance(C, D, points, seed),
        affine_tensor_instance(C, D, points, seed),
        affine_tensor_bundle_instance(C, D, points, seed),
    ]


def gram_conditions(inst: GordonInstance, tol: float = 1e-10) -> Dict:
    """
    Exact comparison of increment variances E(A_s − A_t)² against B's:
    within a row A must spread at least as much as B, across rows at most as
    much. Also reports whether the two sides have equal variances.
    """
    def increments(phi):
        gram = phi @ phi.T
        d = np.diag(gram)
        return gram, d[:, None] + d[None, :] - 2.0 * gram

    gram_a, inc_a = increments(inst.phi_a)
    gram_b, inc_b = increments(inst.phi_b)
    row = np.repeat(np.arange(inst.rows), inst.cols)
    same = row[:, None] == row[None, :]
    diff = inc_a - inc_b
    worst_same = float(diff[same].min()) if np.any(same) else 0.0
    worst_cross = float((-diff)[~same].min()) if np.any(~same) else 0.0
    return {
        "same_row_ok": worst_same >= -tol,
        "cross_row_ok": worst_cross >= -tol,
        "equal_variance": bool(np.allclose(np.diag(gram_a), np.diag(gram_b), atol=1e-10)),
        "worst_same_row": worst_same,
        "worst_cross_row": worst_cross,
    }


def _min_max(phi: np.ndarray, rows: int, cols: int):
    def stat(Z):
        return (Z @ phi.T).reshape(len(Z), rows, cols).max(axis=2).min(axis=1)
    return stat


def check_gordon_variant(instance: GordonInstance, f: MomentFunction, trials: int, seed: int,
                         workers: Optional[int] = None, enforce_hypotheses: bool = True) -> InequalityCheck:
    """
    E f₊(min max A) ≥ E f₊(min max B) for the catalog instance, by Monte Carlo.

    enforce_hypotheses=False runs an f that fails the instance's hypotheses,
    which is how the convexity failure of the linear-image family is shown.
    """
    if instance.tag not in GORDON_TAGS:
        raise DomainError(f"unknown Gordon instance '{instance.tag}'")
    if enforce_hypotheses:
        if not f.monotone:
            raise HypothesisViolation(f"{instance.tag} needs an increasing f, got {f.label}")
        if instance.needs_convex and not f.convex:
            raise HypothesisViolation(f"{instance.tag} needs a convex f, got {f.label}")
    name = f"gordon_{instance.tag}"
    meta = dict(instance.params, f=f.label, trials=trials, seed=seed,
                hypotheses_met=bool(f.monotone and (f.convex or not instance.needs_convex)))

    if instance.tag == "linear_image":
        p = instance.params
        small, large = Circular(p["m"], p["t"]), Circular(p["m"], p["s"] * p["t"])

        def both(Z):
            a = p["s"] * np.linalg.norm(small.project_many(Z), axis=1)
            b = np.linalg.norm(large.project_many(Z), axis=1)
            return np.column_stack([a, b])

        ab = mc_evaluate(both, SeededSampler(seed, _STREAM_GORDON, (3,)), trials, p["m"], workers)
        return InequalityCheck.from_samples(name, f.plus(ab[:, 0]), f.plus(ab[:, 1]), ">=", paired=True, meta=meta)

    meta.update(gram_conditions(instance))
    if not (meta["same_row_ok"] and meta["cross_row_ok"]):
        logger.warning(f"{name}: increment comparison fails on this finite instance "
                       f"(same row {meta['worst_same_row']:.3e}, cross row {meta['worst_cross_row']:.3e})")
    a = mc_evaluate(_min_max(instance.phi_a, instance.rows, instance.cols),
                    SeededSampler(seed, _STREAM_GORDON, (4,)), trials, instance.phi_a.shape[1], workers)
    b = mc_evaluate(_min_max(instance.phi_b, instance.rows, instance.cols),
                    SeededSampler(seed, _STREAM_GORDON, (5,)), trials, instance.phi_b.shape[1], workers)
    return InequalityCheck.from_samples(name, f.plus(a), f.plus(b), ">=", meta=meta)
