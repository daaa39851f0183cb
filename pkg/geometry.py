"""
Geometry
========
Conic intrinsic volumes and everything computed from them: statistical
dimension, squared Gaussian width, ν_r moments, moment functionals of cone
stubs, Euclidean stub volumes, the generalized Steiner identity, and the
circular-cone quotient behind the linear-image experiment.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate, linalg, special

from cones import (Cone, Full, Subspace, Orthant, Circular, PolyhedralV, PolyhedralH, Polar,
                   Product, LinearImage)
from numerics import (SeededSampler, QuadratureConfig, DEFAULT_QUAD, chi_moment, chi_sf, chi_pdf,
                      expect_chi, mc_evaluate, mean_se)
from utils_conic import logger, DomainError, UnsupportedProjection

PROFILE_NEG_TOL = 1e-12
PROFILE_SUM_TOL = 1e-9
FACE_TOL = 1e-8
DEFAULT_MC_TRIALS = 100_000


class IntrinsicVolumeProfile:
    """The distribution v_0..v_m of a cone in ℝ^m."""

    def __init__(self, v: Sequence[float], validate: bool = True):
        v = np.asarray(v, dtype=float).ravel()
        if v.size < 2:
            raise DomainError("a profile needs at least v_0 and v_1")
        if validate:
            if np.any(v < -PROFILE_NEG_TOL):
                raise DomainError(f"negative intrinsic volume {v.min():.3e}")
            total = v.sum()
            if abs(total - 1.0) > PROFILE_SUM_TOL:
                raise DomainError(f"intrinsic volumes sum to {total:.12g}, expected 1")
        self.v = np.maximum(v, 0.0)

    @property
    def ambient(self) -> int:
        return self.v.size - 1

    @classmethod
    def indicator(cls, m: int, j: int) -> "IntrinsicVolumeProfile":
        v = np.zeros(m + 1)
        v[j] = 1.0
        return cls(v)

    @classmethod
    def binomial(cls, m: int, k: int, offset: int = 0) -> "IntrinsicVolumeProfile":
        """ℝ₊^k × ℝ^offset × {0}: v_{offset+j} = C(k, j)/2^k."""
        v = np.zeros(m + 1)
        j = np.arange(k + 1)
        v[offset + j] = np.exp(special.gammaln(k + 1) - special.gammaln(j + 1)
                               - special.gammaln(k - j + 1) - k * math.log(2.0))
        return cls(v)

    def sdim(self) -> float:
        return float(np.dot(np.arange(self.v.size), self.v))

    def gwidth_sq(self) -> float:
        means = np.array([chi_moment(k, 1.0) for k in range(self.v.size)])
        return float(np.dot(means, self.v) ** 2)

    def nu_r(self, r: float) -> float:
        return float(sum(vk * chi_moment(k, r) for k, vk in enumerate(self.v) if vk > 0))

    def reversed(self) -> "IntrinsicVolumeProfile":
        return IntrinsicVolumeProfile(self.v[::-1].copy(), validate=False)

    def convolve(self, other: "IntrinsicVolumeProfile") -> "IntrinsicVolumeProfile":
        return IntrinsicVolumeProfile(np.convolve(self.v, other.v), validate=False)

    def to_text(self) -> str:
        lines = [f"# {self.ambient}"] + [f"{vk:.8e}" for vk in self.v]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "IntrinsicVolumeProfile":
        lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("#"):
            raise DomainError("profile text must start with '# m'")
        m = int(lines[0].lstrip("#").split()[0])
        values = [float(ln) for ln in lines[1:] if not ln.startswith("#")]
        if len(values) != m + 1:
            raise DomainError(f"profile header says m={m} but has {len(values)} values")
        # nine significant digits per entry
        total = sum(values)
        if abs(total - 1.0) > 1e-7:
            raise DomainError(f"intrinsic volumes sum to {total:.12g}, expected 1")
        return cls(np.asarray(values) / total)

    def __repr__(self):
        return f"IntrinsicVolumeProfile(m={self.ambient}, sdim={self.sdim():.6g})"


ProfileLike = Union[Cone, IntrinsicVolumeProfile]


# --- Moment functions ---

@dataclass
class MomentFunction:
    kind: str
    func: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    monotone: bool
    convex: bool
    param: Optional[float] = None

    def __call__(self, x):
        return self.func(np.asarray(x, dtype=float))

    def plus(self, x):
        """f₊(x) = f(max(x, 0)), constant f(0) on the negative half line."""
        return self.func(np.maximum(np.asarray(x, dtype=float), 0.0))

    @property
    def label(self) -> str:
        return self.kind if self.param is None else f"{self.kind}({self.param:g})"

    @classmethod
    def identity(cls) -> "MomentFunction":
        return cls("identity", lambda x: x, True, True)

    @classmethod
    def power(cls, r: float) -> "MomentFunction":
        if r < 0:
            raise DomainError(f"power moment needs r >= 0, got {r}")
        r = float(r)
        func = (lambda x: np.ones_like(x)) if r == 0 else (lambda x: np.power(np.maximum(x, 0.0), r))
        return cls("power", func, True, r >= 1 or r == 0, r)

    @classmethod
    def exp_scaled(cls, beta: float) -> "MomentFunction":
        beta = float(beta)
        return cls("exp_scaled", lambda x: np.exp(beta * x), beta >= 0, True, beta)

    @classmethod
    def step(cls, lam: float) -> "MomentFunction":
        lam = float(lam)
        return cls("step", lambda x: (x >= lam).astype(float), True, False, lam)

    @classmethod
    def tabulated(cls, xs: Sequence[float], ys: Sequence[float]) -> "MomentFunction":
        """Piecewise linear through (xs, ys), extended linearly beyond both ends."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if xs.size < 2 or np.any(np.diff(xs) <= 0) or xs.shape != ys.shape:
            raise DomainError("tabulated moment function needs >= 2 strictly increasing nodes")
        slopes = np.diff(ys) / np.diff(xs)

        def func(x):
            y = np.interp(x, xs, ys)
            y = np.where(x < xs[0], ys[0] + slopes[0] * (x - xs[0]), y)
            return np.where(x > xs[-1], ys[-1] + slopes[-1] * (x - xs[-1]), y)

        monotone = bool(np.all(slopes >= 0))
        convex = bool(np.all(np.diff(slopes) >= -1e-12))
        return cls("tabulated", func, monotone, convex)


# --- Profiles ---

def circular_profile(m: int, t: float) -> IntrinsicVolumeProfile:
    """
    Closed-form intrinsic volumes of C_m(t).

    v_j (1 ≤ j ≤ m−1) = Γ(m/2) t^{j−1} / (2 Γ((j+1)/2) Γ((m−j+1)/2) (1+t²)^{(m−2)/2});
    v_m is the normalized integral of sin^{m−2} over [0, arctan t];
    v_0 takes the remaining mass.
    """
    if m < 2 or not t > 0:
        raise DomainError(f"circular profile needs m >= 2 and t > 0, got m={m}, t={t}")
    v = np.zeros(m + 1)
    j = np.arange(1, m)
    log_vj = (special.gammaln(0.5 * m) + (j - 1) * math.log(t) - math.log(2.0)
              - special.gammaln(0.5 * (j + 1)) - special.gammaln(0.5 * (m - j + 1))
              - 0.5 * (m - 2) * math.log1p(t * t))
    v[1:m] = np.exp(log_vj)

    alpha = math.atan(t)
    log_pref = special.gammaln(0.5 * m) - 0.5 * math.log(math.pi) - special.gammaln(0.5 * (m - 1))
    if m == 2:
        integral = alpha
    else:
        integral, _ = integrate.quad(lambda th: math.sin(th) ** (m - 2),
                                     0.0, alpha, epsabs=0.0, epsrel=1e-13, limit=200)
    v[m] = math.exp(log_pref) * integral
    v[0] = 1.0 - v[1:].sum()
    if v[0] < -PROFILE_NEG_TOL:
        raise DomainError(f"circular profile for m={m}, t={t} lost normalization (v_0={v[0]:.3e})")
    return IntrinsicVolumeProfile(np.maximum(v, 0.0))


def _orthonormal_cols(M: np.ndarray) -> bool:
    return M.shape[1] > 0 and np.allclose(M.T @ M, np.eye(M.shape[1]), atol=1e-10)


def face_dimensions(C: Cone, G: np.ndarray, tol: float = FACE_TOL) -> np.ndarray:
    """
    Dimension of the face of a polyhedral C containing Proj_C(g), per row g.

    With inward normals N the face is cut out by the tight rows (N p ≈ 0) and
    has dimension m − rank(N_tight); with generators it is spanned by the
    generators orthogonal to the residual g − p.
    """
    P = C.project_many(G)
    N = C.normals()
    out = np.empty(len(G), dtype=int)
    if N is not None:
        scale = np.linalg.norm(N, axis=1)
        for i, p in enumerate(P):
            tight = np.abs(N @ p) <= tol * scale * max(1.0, np.linalg.norm(G[i]))
            out[i] = C.ambient - (np.linalg.matrix_rank(N[tight], tol=1e-9) if np.any(tight) else 0)
        return out
    Gen = C.generators()
    if Gen is None:
        raise UnsupportedProjection(f"face dimensions need a polyhedral cone, got {C.describe()}")
    R = G - P
    for i, r in enumerate(R):
        tight = Gen.T @ r >= -tol * max(1.0, np.linalg.norm(G[i]))
        out[i] = np.linalg.matrix_rank(Gen[:, tight], tol=1e-9) if np.any(tight) else 0
    return out


def mc_profile(C: Cone, trials: int = DEFAULT_MC_TRIALS, seed: Optional[int] = 0,
               workers: Optional[int] = None) -> IntrinsicVolumeProfile:
    """Monte Carlo profile of a polyhedral cone from face dimensions of Proj_C(g)."""
    if seed is None:
        raise DomainError(f"the profile of {C.describe()} is estimated by sampling and needs a seed")
    dims = mc_evaluate(lambda G: face_dimensions(C, G), SeededSampler(seed, 1), trials, C.ambient, workers)
    counts = np.bincount(dims, minlength=C.ambient + 1)
    return IntrinsicVolumeProfile(counts / counts.sum())


def profile(C: ProfileLike, trials: int = DEFAULT_MC_TRIALS, seed: Optional[int] = 0) -> IntrinsicVolumeProfile:
    if isinstance(C, IntrinsicVolumeProfile):
        return C
    m = C.ambient
    if isinstance(C, Full):
        return IntrinsicVolumeProfile.indicator(m, m)
    if isinstance(C, Subspace):
        return IntrinsicVolumeProfile.indicator(m, C.dim)
    if isinstance(C, Orthant):
        return IntrinsicVolumeProfile.binomial(m, m)
    if isinstance(C, Circular):
        return circular_profile(m, C.t)
    if isinstance(C, Product):
        out = profile(C.parts[0], trials, seed)
        for part in C.parts[1:]:
            out = out.convolve(profile(part, trials, seed))
        return out
    if isinstance(C, Polar):
        return profile(C.inner, trials, seed).reversed()
    if isinstance(C, LinearImage):
        if C.resolved is None:
            raise UnsupportedProjection(f"no profile for {C.describe()}")
        return profile(C.resolved, trials, seed)
    if isinstance(C, PolyhedralV):
        if _orthonormal_cols(C.G):
            return IntrinsicVolumeProfile.binomial(m, C.G.shape[1])
        return mc_profile(C, trials, seed)
    if isinstance(C, PolyhedralH):
        if len(C.N) == 0:
            return IntrinsicVolumeProfile.indicator(m, m)
        if _orthonormal_cols(C.N.T):
            k = C.N.shape[0]
            return IntrinsicVolumeProfile.binomial(m, k, offset=m - k)
        return mc_profile(C, trials, seed)
    raise UnsupportedProjection(f"no intrinsic-volume profile for {C.describe()}")


def mc_sdim(C: Cone, trials: int = DEFAULT_MC_TRIALS, seed: int = 0) -> Tuple[float, float]:
    """E‖Proj_C g‖² by Monte Carlo, with its standard error."""
    sq = mc_evaluate(lambda G: np.sum(C.project_many(G) ** 2, axis=1), SeededSampler(seed, 2), trials, C.ambient)
    return mean_se(sq)


def sdim(C: ProfileLike) -> float:
    try:
        return profile(C).sdim()
    except UnsupportedProjection:
        value, se = mc_sdim(C)
        logger.info(f"sdim: Monte Carlo estimate {value:.6f} ± {se:.1e} for {C.describe()}")
        return value


def gwidth_sq(C: ProfileLike) -> float:
    return profile(C).gwidth_sq()


def nu_r(C: ProfileLike, r: float) -> float:
    """ν_r(C) = E‖Proj_C g‖^r = Σ_j v_j E[χ_j^r]."""
    if r < 0:
        raise DomainError(f"nu_r needs r >= 0, got {r}")
    return profile(C).nu_r(r)


def moment_functional(f: MomentFunction, C: ProfileLike, cfg: QuadratureConfig = DEFAULT_QUAD) -> float:
    """μ_f(C ∩ B^m) = Σ_j v_j(C) E f(χ_j)."""
    p = profile(C)
    total = 0.0
    for j, vj in enumerate(p.v):
        if vj == 0:
            continue
        if f.kind == "identity":
            e = chi_moment(j, 1.0)
        elif f.kind == "power":
            e = chi_moment(j, f.param)
        elif f.kind == "step":
            e = float(chi_sf(j, f.param))
        else:
            e = expect_chi(lambda x: float(f(x)), j, cfg)
        total += vj * e
    return float(total)


def mc_moment(f: MomentFunction, C: Cone, trials: int = DEFAULT_MC_TRIALS, seed: int = 0) -> Tuple[float, float]:
    """Sample mean and standard error of f(‖Proj_C g‖)."""
    vals = mc_evaluate(lambda G: f(np.linalg.norm(C.project_many(G), axis=1)),
                       SeededSampler(seed, 3), trials, C.ambient)
    return mean_se(vals)


# --- Euclidean stub volumes ---

def _log_ball_volume(k: np.ndarray) -> np.ndarray:
    return 0.5 * k * math.log(math.pi) - special.gammaln(1.0 + 0.5 * k)


def _stub_matrix(m: int) -> np.ndarray:
    # M[i, j] = C(j, i) κ_j / κ_{j-i} for j ≥ i
    M = np.zeros((m + 1, m + 1))
    for i in range(m + 1):
        j = np.arange(i, m + 1)
        log_c = special.gammaln(j + 1) - special.gammaln(i + 1) - special.gammaln(j - i + 1)
        M[i, i:] = np.exp(log_c + _log_ball_volume(j) - _log_ball_volume(j - i))
    return M


def stub_euclidean_volumes(p: IntrinsicVolumeProfile) -> np.ndarray:
    """Euclidean intrinsic volumes V_0..V_m of the stub C ∩ B^m."""
    return _stub_matrix(p.ambient) @ p.v


def stub_profile_from_volumes(V: Sequence[float]) -> IntrinsicVolumeProfile:
    """Inverse of stub_euclidean_volumes (unit upper-triangular solve)."""
    V = np.asarray(V, dtype=float)
    v = linalg.solve_triangular(_stub_matrix(V.size - 1), V, lower=False, unit_diagonal=True)
    return IntrinsicVolumeProfile(v)


# --- Generalized Steiner identity ---

def steiner_formula_value(f: Callable[[float, float], float], C: ProfileLike,
                          cfg: QuadratureConfig = DEFAULT_QUAD) -> float:
    """Σ_i v_i E f(χ_i, χ'_{m−i}) by one- and two-dimensional quadrature."""
    p = profile(C)
    m = p.ambient
    total = 0.0
    for i, vi in enumerate(p.v):
        if vi == 0:
            continue
        j = m - i
        if i == 0 and j == 0:
            e = f(0.0, 0.0)
        elif i == 0:
            e = expect_chi(lambda b: f(0.0, b), j, cfg)
        elif j == 0:
            e = expect_chi(lambda a: f(a, 0.0), i, cfg)
        else:
            e, _ = integrate.dblquad(lambda b, a: f(a, b) * chi_pdf(i, a) * chi_pdf(j, b),
                                     0.0, cfg.tail_cut(i), 0.0, cfg.tail_cut(j),
                                     epsabs=1e-9, epsrel=1e-9)
        total += vi * e
    return float(total)


def mc_generalized_steiner(f: Callable[[float, float], float], C: Cone, trials: int = DEFAULT_MC_TRIALS,
                           seed: int = 0, cfg: QuadratureConfig = DEFAULT_QUAD) -> Tuple[float, float, float]:
    """
    Both sides of E f(‖Proj_C g‖, ‖Proj_{C°} g‖) = Σ v_i E f(χ_i, χ'_{m−i}).

    Returns:
        (mc_value, formula_value, std_err)
    """
    fv = np.vectorize(f, otypes=[float])

    def sample(G):
        P = C.project_many(G)
        return fv(np.linalg.norm(P, axis=1), np.linalg.norm(G - P, axis=1))

    mc_value, se = mean_se(mc_evaluate(sample, SeededSampler(seed, 4), trials, C.ambient))
    return mc_value, steiner_formula_value(f, C, cfg), se


# --- Circular quotient ---

def figure1_grid() -> np.ndarray:
    return np.round(np.arange(1, 101) * 0.01, 2)


def circular_quotient(m: int, t: float, s: float, r: float) -> float:
    """
    s^r ν_r(C_m(t)) / ν_r(C_m(st)); at least 1 when r ≥ 1 since
    diag(1, s, ..., s) maps C_m(t) onto C_m(st) with condition number s.
    """
    if not (t > 0 and s > 0) or m < 2:
        raise DomainError(f"circular_quotient needs t, s > 0 and m >= 2, got m={m}, t={t}, s={s}")
    num = s ** r * circular_profile(m, t).nu_r(r)
    den = circular_profile(m, s * t).nu_r(r)
    return float(num / den)


def circular_quotient_curve(m: int, s: float, r: float, grid: Optional[Sequence[float]] = None) -> np.ndarray:
    grid = figure1_grid() if grid is None else np.asarray(grid, dtype=float)
    return np.array([circular_quotient(m, t, s, r) for t in grid])
