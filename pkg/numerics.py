"""
Numerics
========
Special functions, chi distributions, chi quadrature, seeded Gaussian
sampling and small dense spectral routines. Everything else in the toolkit
sits on top of this module.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, special

from config import QUAD_ABS_TOL, QUAD_MAX_SUBDIVISIONS, CHI_TAIL_MASS
from utils_conic import logger, parallel_map, DomainError, QuadratureError

_LOG2 = math.log(2.0)
_SEED_MASK = (1 << 64) - 1
# Quadrature results with a worse error estimate than this are rejected outright.
_QUAD_HARD_LIMIT = 1e-5


def log_gamma(x: float) -> float:
    """ln Γ(x) for x > 0."""
    if not x > 0:
        raise DomainError(f"log_gamma needs x > 0, got {x}")
    return float(special.gammaln(x))


def _check_dof(k: int) -> int:
    if k < 0 or int(k) != k:
        raise DomainError(f"degrees of freedom must be a nonnegative integer, got {k}")
    return int(k)


def chi_moment(k: int, r: float) -> float:
    """
    E[χ_k^r] = 2^{r/2} Γ((k+r)/2) / Γ(k/2).

    χ_0 is the point mass at 0, so its moments vanish except moment(0) = 1.
    """
    k = _check_dof(k)
    if r < 0:
        raise DomainError(f"chi_moment needs r >= 0, got {r}")
    if r == 0:
        return 1.0
    if k == 0:
        return 0.0
    return math.exp(0.5 * r * _LOG2 + special.gammaln(0.5 * (k + r)) - special.gammaln(0.5 * k))


def chi_cdf(k: int, x):
    k = _check_dof(k)
    x = np.asarray(x, dtype=float)
    if k == 0:
        out = np.where(x >= 0, 1.0, 0.0)
    else:
        xc = np.maximum(x, 0.0)
        out = np.where(x > 0, special.gammainc(0.5 * k, 0.5 * xc * xc), 0.0)
    return out if out.ndim else float(out)


def chi_sf(k: int, x):
    """P{χ_k ≥ x}; equals 1 for x ≤ 0, including the point mass k = 0."""
    k = _check_dof(k)
    x = np.asarray(x, dtype=float)
    if k == 0:
        out = np.where(x <= 0, 1.0, 0.0)
    else:
        xc = np.maximum(x, 0.0)
        out = np.where(x > 0, special.gammaincc(0.5 * k, 0.5 * xc * xc), 1.0)
    return out if out.ndim else float(out)


def chi_pdf(k: int, x):
    k = _check_dof(k)
    x = np.asarray(x, dtype=float)
    if k == 0:
        out = np.zeros_like(x)
    else:
        pos = np.maximum(x, 1e-300)
        log_pdf = (k - 1) * np.log(pos) - 0.5 * pos * pos - (0.5 * k - 1.0) * _LOG2 - special.gammaln(0.5 * k)
        out = np.where(x > 0, np.exp(log_pdf), 0.0)
        if k == 1:
            out = np.where(x == 0, math.sqrt(2.0 / math.pi), out)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ChiDist:
    k: int

    def __post_init__(self):
        _check_dof(self.k)

    def cdf(self, x):
        return chi_cdf(self.k, x)

    def sf(self, x):
        return chi_sf(self.k, x)

    def pdf(self, x):
        return chi_pdf(self.k, x)

    def moment(self, r: float) -> float:
        return chi_moment(self.k, r)

    @property
    def mean(self) -> float:
        return chi_moment(self.k, 1.0)


@dataclass(frozen=True)
class QuadratureConfig:
    abs_tol: float = QUAD_ABS_TOL
    max_subdivisions: int = QUAD_MAX_SUBDIVISIONS
    tail_mass: float = CHI_TAIL_MASS

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise DomainError(f"abs_tol must be > 0, got {self.abs_tol}")
        if self.max_subdivisions < 1:
            raise DomainError(f"max_subdivisions must be >= 1, got {self.max_subdivisions}")

    def tail_cut(self, k: int) -> float:
        """Point beyond which χ_k carries less than tail_mass."""
        k = _check_dof(k)
        if k == 0:
            return 0.0
        return math.sqrt(2.0 * special.gammainccinv(0.5 * k, self.tail_mass))


DEFAULT_QUAD = QuadratureConfig()


def _quad(func: Callable[[float], float], a: float, b: float, cfg: QuadratureConfig,
          points: Optional[Sequence[float]] = None) -> float:
    if b <= a:
        return 0.0
    inner = None
    if points is not None:
        inner = [p for p in points if a < p < b] or None
    res = integrate.quad(func, a, b, epsabs=cfg.abs_tol, epsrel=cfg.abs_tol,
                         limit=cfg.max_subdivisions, points=inner, full_output=1)
    value, err = float(res[0]), float(res[1])
    if len(res) > 3:
        # QUADPACK flagged the run; keep it only if the error estimate is still usable.
        if not err <= _QUAD_HARD_LIMIT:
            raise QuadratureError(f"quadrature on [{a:.4g}, {b:.4g}] did not converge", err)
        logger.warning(f"Quadrature on [{a:.4g}, {b:.4g}] hit its limits (err {err:.2e}), accepting")
    return value


def expect_chi(f: Callable[[float], float], k: int, cfg: QuadratureConfig = DEFAULT_QUAD) -> float:
    """E f(χ_k) by quadrature over [0, tail_cut]."""
    k = _check_dof(k)
    if k == 0:
        return float(f(0.0))
    mode = math.sqrt(max(k - 1, 0))
    return _quad(lambda x: f(x) * chi_pdf(k, x), 0.0, cfg.tail_cut(k), cfg, points=[mode])


class _ChiMixture:
    """Σ_k w_k χ_k, evaluated with vectorized log densities."""

    def __init__(self, weights: Sequence[float]):
        w = np.asarray(weights, dtype=float)
        self.atom = float(w[0]) if w.size else 0.0
        ks = np.nonzero(w[1:] > 0)[0] + 1
        self.ks = ks.astype(float)
        self.w = w[ks]
        self.log_norm = (0.5 * self.ks - 1.0) * _LOG2 + special.gammaln(0.5 * self.ks)

    @property
    def continuous_mass(self) -> float:
        return float(self.w.sum())

    def pdf(self, x: float) -> float:
        if x <= 0 or self.ks.size == 0:
            return 0.0
        return float(np.dot(self.w, np.exp((self.ks - 1) * math.log(x) - 0.5 * x * x - self.log_norm)))

    def sf(self, z: float) -> float:
        # P{X >= z}; the atom at 0 counts only for z <= 0.
        if z <= 0:
            return self.atom + self.continuous_mass
        if self.ks.size == 0:
            return 0.0
        return float(np.dot(self.w, special.gammaincc(0.5 * self.ks, 0.5 * z * z)))

    def tail_cut(self, cfg: QuadratureConfig) -> float:
        if self.ks.size == 0:
            return 0.0
        return cfg.tail_cut(int(self.ks.max()))

    def points(self):
        # modes of the three heaviest components
        heavy = self.ks[np.argsort(-self.w, kind="stable")[:3]]
        return sorted(math.sqrt(max(k - 1.0, 0.0)) for k in heavy)


def chi_mixture_tail(weights_i: Sequence[float], weights_j: Sequence[float], lam: float, sign: str,
                     cfg: QuadratureConfig = DEFAULT_QUAD) -> float:
    """
    Tail probability of sums/differences of independent chi mixtures.

    Args:
        weights_i: mixture weights of Y = χ_I (index = degrees of freedom)
        weights_j: mixture weights of X = χ'_J
        lam: threshold λ
        sign: '+' for P{X + Y ≥ λ}, '-' for P{X − Y ≥ λ}

    Returns:
        The probability, weighted by the (possibly unnormalized) mixture masses.
    """
    if sign not in ("+", "-"):
        raise DomainError(f"sign must be '+' or '-', got {sign!r}")
    Y = _ChiMixture(weights_i)
    X = _ChiMixture(weights_j)
    lam = float(lam)

    # Y sits at 0
    total = Y.atom * X.sf(lam)
    if Y.ks.size == 0:
        return float(min(max(total, 0.0), 1.0))

    cut = Y.tail_cut(cfg)
    pts = Y.points()
    if sign == "+":
        # y >= λ forces X + y >= λ
        if lam > 0:
            total += float(np.dot(Y.w, special.gammaincc(0.5 * Y.ks, 0.5 * lam * lam)))
            total += _quad(lambda y: Y.pdf(y) * X.sf(lam - y), 0.0, min(lam, cut), cfg, points=pts)
        else:
            total += Y.continuous_mass * (X.atom + X.continuous_mass)
    else:
        lo = 0.0
        if lam < 0:
            # y <= -λ forces X - y >= λ
            lo = -lam
            total += (X.atom + X.continuous_mass) * float(np.dot(Y.w, special.gammainc(0.5 * Y.ks, 0.5 * lo * lo)))
        total += _quad(lambda y: Y.pdf(y) * X.sf(lam + y), lo, max(lo, cut), cfg, points=pts)
    return float(min(max(total, 0.0), 1.0))


def mixed_chi_tail(i: int, j: int, lam: float, sign: str, cfg: QuadratureConfig = DEFAULT_QUAD) -> float:
    """P{χ'_j + χ_i ≥ λ} (sign '+') or P{χ'_j − χ_i ≥ λ} (sign '-')."""
    i, j = _check_dof(i), _check_dof(j)
    wi = np.zeros(i + 1)
    wi[i] = 1.0
    wj = np.zeros(j + 1)
    wj[j] = 1.0
    return chi_mixture_tail(wi, wj, lam, sign, cfg)


# --- Seeded sampling ---

@dataclass(frozen=True)
class SeededSampler:
    """
    A reproducible Gaussian stream keyed by (master_seed, stream_index, path).

    Streams are counter based (Philox) and derived through SeedSequence spawn
    keys, so substreams can be consumed on any thread in any order.
    """
    master_seed: int
    stream_index: int = 0
    path: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.stream_index < 0:
            raise DomainError(f"stream_index must be >= 0, got {self.stream_index}")

    def rng(self) -> np.random.Generator:
        seq = np.random.SeedSequence(int(self.master_seed) & _SEED_MASK,
                                     spawn_key=(int(self.stream_index),) + tuple(int(p) for p in self.path))
        return np.random.Generator(np.random.Philox(seq))

    def substream(self, j: int) -> "SeededSampler":
        return SeededSampler(self.master_seed, self.stream_index, self.path + (int(j),))


def gauss_vector(sampler: SeededSampler, dim: int) -> np.ndarray:
    if dim < 1:
        raise DomainError(f"dim must be >= 1, got {dim}")
    return sampler.rng().standard_normal(dim)


def gauss_matrix(sampler: SeededSampler, n: int, m: int) -> np.ndarray:
    if n < 1 or m < 1:
        raise DomainError(f"matrix shape must be positive, got {n}x{m}")
    return sampler.rng().standard_normal((n, m))


def gauss_block(sampler: SeededSampler, count: int, dim: int) -> np.ndarray:
    """count x dim standard normal block drawn from one stream."""
    return sampler.rng().standard_normal((count, dim))


# --- Spectral routines ---

def singular_values(A: np.ndarray) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return np.linalg.svd(A, compute_uv=False)


def operator_norm(A: np.ndarray) -> float:
    s = singular_values(A)
    return float(s[0]) if s.size else 0.0


def smallest_sv(A: np.ndarray) -> float:
    """max{σ(A), σ(Aᵀ)}, i.e. the min(n, m)-th singular value."""
    s = singular_values(A)
    return float(s[-1]) if s.size else 0.0


def sigma_min(A: np.ndarray) -> float:
    """min over unit x of ‖Ax‖; zero when A has more columns than rows."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n, m = A.shape
    if n < m:
        return 0.0
    return smallest_sv(A)


def kappa(A: np.ndarray) -> float:
    s = singular_values(A)
    if s.size == 0 or s[0] == 0:
        raise DomainError("kappa of the zero matrix is undefined")
    A = np.atleast_2d(A)
    if s[-1] <= s[0] * max(A.shape) * np.finfo(float).eps:
        return math.inf
    return float(s[0] / s[-1])


MC_CHUNK = 4096


def mc_evaluate(func: Callable[[np.ndarray], np.ndarray], sampler: SeededSampler, trials: int, dim: int,
                workers: Optional[int] = None) -> np.ndarray:
    """
    Apply func to Gaussian blocks of shape (chunk, dim) and concatenate the
    per-row results. Chunk c always comes from substream c, so the output
    depends only on (sampler, trials, dim).
    """
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    sizes = [min(MC_CHUNK, trials - lo) for lo in range(0, trials, MC_CHUNK)]

    def run(c):
        return np.asarray(func(gauss_block(sampler.substream(c), sizes[c], dim)))

    return np.concatenate(parallel_map(run, range(len(sizes)), workers))


def mean_se(samples: np.ndarray) -> Tuple[float, float]:
    samples = np.asarray(samples, dtype=float)
    if samples.size < 2:
        return float(samples.mean()), 0.0
    return float(samples.mean()), float(samples.std(ddof=1) / math.sqrt(samples.size))
