"""
Feasibility
===========
Biconic feasibility of (P) ∃x ∈ C∖0 with Ax ∈ D° and (D) ∃y ∈ D∖0 with
−Aᵀy ∈ C°, distances to the primal and dual feasible sets, Renegar's
condition number, rank-one perturbation certificates, and the kinematic
probability that a Gaussian instance is primal feasible.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from config import FEAS_TOL, RENEGAR_CAP
from cones import Cone, Full, Subspace
from geometry import IntrinsicVolumeProfile
from numerics import SeededSampler, gauss_matrix, operator_norm
from restricted import SolverConfig, DEFAULT_SOLVER, RestrictedExtremum, restricted_sv, polyhedral_vanishes
from utils_conic import logger, parallel_map, DomainError, DimensionMismatch, AlreadyFeasible

PRIMAL_FEASIBLE = "PrimalFeasible"
DUAL_FEASIBLE = "DualFeasible"
NEAR_ILL_POSED = "NearIllPosed"
REGULAR = "Regular"


@dataclass
class FeasibilityReport:
    dist_primal: float
    dist_dual: float
    status: str
    renegar: float
    norm_A: float
    tol: float
    primal_certificate: Optional[np.ndarray] = None
    dual_certificate: Optional[np.ndarray] = None

    def to_text(self) -> str:
        """Flat key=value lines in a fixed key order."""
        def vec(v):
            return "none" if v is None else " ".join(f"{x:.8e}" for x in v)

        rows = [
            ("status", self.status),
            ("dist_primal", f"{self.dist_primal:.8e}"),
            ("dist_dual", f"{self.dist_dual:.8e}"),
            ("renegar", "inf" if math.isinf(self.renegar) else f"{self.renegar:.8e}"),
            ("norm_A", f"{self.norm_A:.8e}"),
            ("tol", f"{self.tol:.8e}"),
            ("primal_certificate", vec(self.primal_certificate)),
            ("dual_certificate", vec(self.dual_certificate)),
        ]
        return "\n".join(f"{k}={v}" for k, v in rows) + "\n"


def _is_full(C: Cone) -> bool:
    return isinstance(C, Full) or (isinstance(C, Subspace) and C.dim == C.ambient)


def _norm_or_fail(A: np.ndarray) -> float:
    norm_A = operator_norm(A)
    if norm_A == 0:
        raise DomainError("feasibility measures are undefined for the zero matrix")
    return norm_A


def _distances(A: np.ndarray, C: Cone, D: Cone, cfg: SolverConfig) -> Tuple[RestrictedExtremum, RestrictedExtremum]:
    # dist(A, P) = σ_{C→D}(A), dist(A, D) = σ_{D→C}(−Aᵀ)
    primal = restricted_sv(A, C, D, cfg)
    dual = restricted_sv(-A.T, D, C, cfg)
    return primal, dual


def _renegar_value(norm_A: float, dist_primal: float, dist_dual: float) -> float:
    denom = max(dist_primal, dist_dual)
    if denom <= 0:
        return math.inf
    value = norm_A / denom
    return math.inf if value > RENEGAR_CAP else value


def classify(A: np.ndarray, C: Cone, D: Cone, cfg: Optional[SolverConfig] = None,
             tol: Optional[float] = None) -> FeasibilityReport:
    """
    Classify the pair (A, C, D).

    Args:
        tol: absolute threshold on the distances; defaults to FEAS_TOL·‖A‖

    Returns:
        FeasibilityReport with certificates from the solver that reached zero
    """
    cfg = cfg or DEFAULT_SOLVER
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape != (D.ambient, C.ambient):
        raise DimensionMismatch(f"A is {A.shape[0]}x{A.shape[1]} but cones live in R^{C.ambient} -> R^{D.ambient}")
    norm_A = _norm_or_fail(A)
    tol = FEAS_TOL * norm_A if tol is None else float(tol)

    primal, dual = _distances(A, C, D, cfg)
    dp, dd = primal.value, dual.value
    if dp <= tol and dd <= tol:
        status = NEAR_ILL_POSED
    elif dp <= tol:
        status = PRIMAL_FEASIBLE
    elif dd <= tol:
        status = DUAL_FEASIBLE
    else:
        status = REGULAR
        if not (_is_full(C) and _is_full(D)):
            logger.warning(f"classify: both distances exceed tol={tol:.2e} for {C.describe()} -> {D.describe()} "
                           f"(dist_primal={dp:.3e}, dist_dual={dd:.3e})")

    report = FeasibilityReport(
        dist_primal=dp,
        dist_dual=dd,
        status=status,
        renegar=_renegar_value(norm_A, dp, dd),
        norm_A=norm_A,
        tol=tol,
        primal_certificate=primal.x_cert if dp <= tol else None,
        dual_certificate=dual.x_cert if dd <= tol else None,
    )
    logger.debug(f"classify: {status} dist_primal={dp:.3e} dist_dual={dd:.3e}")
    return report


def renegar(A: np.ndarray, C: Cone, D: Cone, cfg: Optional[SolverConfig] = None) -> float:
    """ℛ_{C,D}(A) = ‖A‖ / max(dist(A, 𝒫), dist(A, 𝒟)); infinity on or near the ill-posed set."""
    cfg = cfg or DEFAULT_SOLVER
    A = np.atleast_2d(np.asarray(A, dtype=float))
    norm_A = _norm_or_fail(A)
    primal, dual = _distances(A, C, D, cfg)
    return _renegar_value(norm_A, primal.value, dual.value)


def renegar_monotone_gap(A: np.ndarray, C: Cone, C_outer: Cone, D: Cone, nested: bool = True,
                         cfg: Optional[SolverConfig] = None) -> float:
    """
    σ_{C→D}(A) − σ_{C′→D}(A) for C ⊆ C′, which is nonnegative up to solver
    accuracy. With C′ = ℝ^m and D = ℝ^n this gives ℛ_C(A) ≤ κ(A).
    """
    if not nested:
        raise DomainError("renegar_monotone_gap needs C contained in C_outer")
    cfg = cfg or DEFAULT_SOLVER
    inner = restricted_sv(A, C, D, cfg).value
    outer = restricted_sv(A, C_outer, D, cfg).value
    return float(inner - outer)


def perturbation_to_primal(A: np.ndarray, C: Cone, D: Cone, cfg: Optional[SolverConfig] = None,
                           tol: Optional[float] = None) -> np.ndarray:
    """
    Rank-one ΔA with ‖ΔA‖ = σ_{C→D}(A) and A + ΔA primal feasible.

    With the minimizer x₀ ∈ C ∩ S^{m−1} and y₀ = Proj_D(Ax₀)/σ,
    ΔA = −σ y₀ x₀ᵀ sends x₀ to Ax₀ − Proj_D(Ax₀) ∈ D°.
    """
    cfg = cfg or DEFAULT_SOLVER
    A = np.atleast_2d(np.asarray(A, dtype=float))
    tol = FEAS_TOL * _norm_or_fail(A) if tol is None else float(tol)
    res = restricted_sv(A, C, D, cfg)
    if res.value <= tol:
        raise AlreadyFeasible(f"A is already primal feasible (dist_primal={res.value:.3e} <= tol={tol:.3e})")
    return -res.value * np.outer(res.y_cert, res.x_cert)


def perturbation_printed(A: np.ndarray, C: Cone, D: Cone, cfg: Optional[SolverConfig] = None,
                         tol: Optional[float] = None) -> np.ndarray:
    """ΔA = −y₀y₀ᵀA. Also lands in 𝒫, but ‖ΔA‖ = ‖Aᵀy₀‖ may exceed σ when x₀ ∈ ∂C."""
    cfg = cfg or DEFAULT_SOLVER
    A = np.atleast_2d(np.asarray(A, dtype=float))
    tol = FEAS_TOL * _norm_or_fail(A) if tol is None else float(tol)
    res = restricted_sv(A, C, D, cfg)
    if res.value <= tol:
        raise AlreadyFeasible(f"A is already primal feasible (dist_primal={res.value:.3e} <= tol={tol:.3e})")
    return -np.outer(res.y_cert, res.y_cert) @ A


def _is_subspace_profile(p: IntrinsicVolumeProfile) -> bool:
    return int(np.count_nonzero(p.v > 1e-15)) == 1


def kinematic_vanishing_prob(pC: IntrinsicVolumeProfile, pD: IntrinsicVolumeProfile, m: int, n: int) -> float:
    """
    P{σ_{C→D}(G) = 0} for Gaussian G ∈ ℝ^{n×m}:
    2 Σ_{k odd} Σ_{ℓ=0}^{m−k} v_{k+ℓ}(C) v_ℓ(D).
    """
    if pC.ambient != m or pD.ambient != n:
        raise DimensionMismatch(f"profiles live in R^{pC.ambient}, R^{pD.ambient} but m={m}, n={n}")
    if _is_subspace_profile(pC) and _is_subspace_profile(pD):
        raise DomainError("kinematic formula needs at least one cone that is not a linear subspace")
    vC, vD = pC.v, pD.v
    total = 0.0
    for k in range(1, m + 1, 2):
        ell = np.arange(0, min(m - k, n) + 1)
        total += float(np.dot(vC[k + ell], vD[ell]))
    return float(min(max(2.0 * total, 0.0), 1.0))


def mc_vanishing_rate(C: Cone, D: Cone, trials: int, seed: int,
                      workers: Optional[int] = None) -> Tuple[float, float]:
    """
    Fraction of Gaussian G with σ_{C→D}(G) = 0, decided exactly by linear
    programming, and its binomial standard error.
    """
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    m, n = C.ambient, D.ambient
    sampler = SeededSampler(seed, 5)

    def trial(i):
        return polyhedral_vanishes(gauss_matrix(sampler.substream(i), n, m), C, D)

    hits = sum(parallel_map(trial, range(trials), workers))
    rate = hits / trials
    se = math.sqrt(max(rate * (1.0 - rate), 0.0) / trials)
    logger.info(f"mc_vanishing_rate: {hits}/{trials} vanishing for {C.describe()} -> {D.describe()}")
    return rate, se
