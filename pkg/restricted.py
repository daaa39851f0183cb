"""
Restricted Operators
====================
Cone-restricted norm ‖A‖_{C→D} and singular value σ_{C→D}(A) of a matrix,
i.e. the max / min of ‖Proj_D(Ax)‖ over unit x ∈ C, plus independent
oracles used to validate the solvers.

Solvers run every multistart as one vectorized batch; start i draws its
initial point from its own substream, and the reduction keeps the first
best start, so results never depend on thread count.
"""

import itertools
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np
from scipy import linalg, optimize

from config import MULTISTARTS, MAX_ITERS, STEP_TOL, VALUE_TOL, ORACLE_GRID, WORKERS
from cones import Cone, Full, Subspace, member
from numerics import SeededSampler, sigma_min
from utils_conic import (logger, DimensionMismatch, DomainError, NotInCone, ZeroConeError, SolverError,
                         UnsupportedProjection)

# Backtracking gives up after this many halvings (stationary within float precision).
_MAX_HALVINGS = 60
_ORACLE_MAX_GENERATORS = 12
_ORACLE_MAX_PAIRS = 250_000


@dataclass(frozen=True)
class SolverConfig:
    multistarts: int = MULTISTARTS
    max_iters: int = MAX_ITERS
    step_tol: float = STEP_TOL
    value_tol: float = VALUE_TOL
    oracle_grid: int = ORACLE_GRID
    seed: int = 0
    workers: int = WORKERS

    def __post_init__(self):
        if self.multistarts < 1 or self.max_iters < 1:
            raise DomainError(f"multistarts and max_iters must be >= 1, got {self.multistarts}, {self.max_iters}")
        if not (self.step_tol > 0 and self.value_tol > 0):
            raise DomainError("solver tolerances must be > 0")
        if self.oracle_grid < 3:
            raise DomainError(f"oracle_grid must be >= 3, got {self.oracle_grid}")
        if self.workers < 1:
            raise DomainError(f"workers must be >= 1, got {self.workers}")

    def with_seed(self, seed: int) -> "SolverConfig":
        return replace(self, seed=int(seed))


DEFAULT_SOLVER = SolverConfig()


@dataclass
class RestrictedExtremum:
    value: float
    x_cert: np.ndarray
    y_cert: np.ndarray
    converged_fraction: float
    kind: str = "norm"
    start_values: List[float] = field(default_factory=list)


def _check_problem(A: np.ndarray, C: Cone, D: Cone) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n, m = A.shape
    if C.ambient != m or D.ambient != n:
        raise DimensionMismatch(f"A is {n}x{m} but C lives in R^{C.ambient} and D in R^{D.ambient}")
    if C.is_zero or D.is_zero:
        raise ZeroConeError("restricted operators need nonzero cones")
    return A


def apply_restricted(A: np.ndarray, C: Cone, D: Cone, x: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Proj_D(Ax) for x ∈ C."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    x = np.asarray(x, dtype=float).ravel()
    if A.shape != (D.ambient, C.ambient) or x.shape[0] != C.ambient:
        raise DimensionMismatch(f"A {A.shape}, x {x.shape}, cones in R^{C.ambient} -> R^{D.ambient}")
    if not member(C, x, tol * max(1.0, np.linalg.norm(x))):
        raise NotInCone("x is not in the domain cone")
    return D.project(A @ x)


# --- Starting points ---

def _normalize_rows(X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(X, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    return X / safe[:, None], norms


def _initial_points(C: Cone, count: int, sampler: SeededSampler,
                    extra_starts: Optional[np.ndarray]) -> np.ndarray:
    rows = []
    for i in range(count):
        rng = sampler.substream(i).rng()
        for _ in range(100):
            p = C.project(rng.standard_normal(C.ambient))
            r = np.linalg.norm(p)
            if r > 1e-12:
                rows.append(p / r)
                break
        else:
            raise SolverError(f"could not draw a unit vector of the cone for start {i}")
    X = np.array(rows)
    if extra_starts is not None and len(extra_starts):
        E = C.project_many(np.atleast_2d(extra_starts))
        E, norms = _normalize_rows(E)
        X = np.vstack([X, E[norms > 1e-12]])
    return X


def _subspace_pair(C: Cone, D: Cone) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    def basis(K: Cone):
        if isinstance(K, Full):
            return np.eye(K.ambient)
        if isinstance(K, Subspace):
            return K.basis
        return None

    B, E = basis(C), basis(D)
    if B is None or E is None:
        return None
    return B, E


# --- Restricted norm ---

def restricted_norm(A: np.ndarray, C: Cone, D: Cone, cfg: Optional[SolverConfig] = None,
                    sampler: Optional[SeededSampler] = None,
                    extra_starts: Optional[np.ndarray] = None) -> RestrictedExtremum:
    """
    ‖A‖_{C→D} by alternating maximization of ⟨Ax, y⟩ over (C ∩ B^m) × (D ∩ B^n).

    Each half step is closed form: y ← Proj_D(Ax)/‖·‖, x ← Proj_C(Aᵀy)/‖·‖,
    and the objective never decreases along the way.
    """
    cfg = cfg or DEFAULT_SOLVER
    A = _check_problem(A, C, D)

    pair = _subspace_pair(C, D)
    if pair is not None:
        B, E = pair
        U, s, Vt = np.linalg.svd(E.T @ A @ B)
        x = B @ Vt[0]
        y = E @ U[:, 0]
        if s[0] <= 0:
            y = np.zeros(D.ambient)
        return RestrictedExtremum(float(s[0]), x, y, 1.0, "norm", [float(s[0])])

    sampler = sampler or SeededSampler(cfg.seed, 0)
    X = _initial_points(C, cfg.multistarts, sampler, extra_starts)
    k = len(X)
    values = np.linalg.norm(D.project_many(X @ A.T), axis=1)
    active = np.ones(k, dtype=bool)
    converged = np.zeros(k, dtype=bool)

    for it in range(cfg.max_iters):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        Yp = D.project_many(X[idx] @ A.T)
        Y, ynorm = _normalize_rows(Yp)
        Xp = C.project_many(Y @ A)
        Xn, xnorm = _normalize_rows(Xp)

        stuck = (ynorm <= 0) | (xnorm <= 0)
        Xn[stuck] = X[idx][stuck]
        new_vals = np.linalg.norm(D.project_many(Xn @ A.T), axis=1)
        step = np.linalg.norm(Xn - X[idx], axis=1)
        gain = new_vals - values[idx]

        X[idx] = Xn
        values[idx] = np.maximum(values[idx], new_vals)
        done = stuck | (step <= cfg.step_tol) | (gain <= cfg.value_tol * 1e-3 * np.maximum(1.0, new_vals))
        converged[idx[done]] = True
        active[idx[done]] = False

    best = int(np.argmax(values))  # first maximizer wins
    x = X[best]
    Pd = D.project(A @ x)
    value = float(np.linalg.norm(Pd))
    y = Pd / value if value > 0 else np.zeros(D.ambient)
    frac = float(converged.mean())
    logger.debug(f"restricted_norm: {k} starts, best {value:.10g}, converged {frac:.0%}")
    return RestrictedExtremum(value, x, y, frac, "norm", values.tolist())


# --- Restricted singular value ---

def restricted_sv(A: np.ndarray, C: Cone, D: Cone, cfg: Optional[SolverConfig] = None,
                  sampler: Optional[SeededSampler] = None,
                  extra_starts: Optional[np.ndarray] = None) -> RestrictedExtremum:
    """
    σ_{C→D}(A) by multistart projected gradient on φ(x) = ½‖Proj_D(Ax)‖².

    ∇φ(x) = Aᵀ Proj_D(Ax); each step projects onto C, renormalizes onto the
    sphere and backtracks (Armijo) until φ decreases.
    """
    cfg = cfg or DEFAULT_SOLVER
    A = _check_problem(A, C, D)

    pair = _subspace_pair(C, D)
    if pair is not None:
        B, E = pair
        M = E.T @ A @ B
        if M.shape[0] < M.shape[1]:
            x = B @ linalg.null_space(M)[:, 0] if M.shape[0] else B[:, 0]
            return RestrictedExtremum(0.0, x, np.zeros(D.ambient), 1.0, "sv", [0.0])
        U, s, Vt = np.linalg.svd(M)
        x = B @ Vt[-1]
        value = sigma_min(M)
        y = E @ U[:, M.shape[1] - 1] if value > 0 else np.zeros(D.ambient)
        return RestrictedExtremum(float(value), x, y, 1.0, "sv", [float(value)])

    sampler = sampler or SeededSampler(cfg.seed, 0)
    X = _initial_points(C, cfg.multistarts, sampler, extra_starts)
    k = len(X)

    def phi_grad(Z):
        P = D.project_many(Z @ A.T)
        return 0.5 * np.sum(P * P, axis=1), P @ A

    phi, grad = phi_grad(X)
    eta = np.full(k, 1.0 / max(np.linalg.norm(A, 2) ** 2, 1e-300))
    active = phi > 0
    converged = ~active

    for it in range(cfg.max_iters):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        accepted = np.zeros(idx.size, dtype=bool)
        trial_X = X[idx].copy()
        trial_phi = phi[idx].copy()
        pending = np.arange(idx.size)
        for _ in range(_MAX_HALVINGS):
            if pending.size == 0:
                break
            rows = idx[pending]
            Xt = C.project_many(X[rows] - eta[rows, None] * grad[rows])
            Xt, norms = _normalize_rows(Xt)
            ok_norm = norms > 1e-14
            pt, _ = phi_grad(Xt)
            # Armijo sufficient decrease along the projected step
            decrease = phi[rows] - pt
            moved = np.sum((Xt - X[rows]) ** 2, axis=1)
            ok = ok_norm & (decrease >= 1e-4 * moved / eta[rows]) & (pt < phi[rows])
            trial_X[pending[ok]] = Xt[ok]
            trial_phi[pending[ok]] = pt[ok]
            accepted[pending[ok]] = True
            eta[rows[~ok]] *= 0.5
            pending = pending[~ok]

        step = np.linalg.norm(trial_X - X[idx], axis=1)
        old_val = np.sqrt(2.0 * phi[idx])
        new_val = np.sqrt(2.0 * trial_phi)
        X[idx] = trial_X
        phi[idx] = trial_phi
        _, g = phi_grad(trial_X)
        grad[idx] = g
        eta[idx[accepted]] *= 2.0

        done = (~accepted | (step <= cfg.step_tol) | (new_val <= 0)
                | (old_val - new_val <= cfg.value_tol * 1e-3 * np.maximum(1.0, new_val)))
        converged[idx[done]] = True
        active[idx[done]] = False

    values = np.sqrt(2.0 * phi)
    best = int(np.argmin(values))  # first minimizer wins
    x = X[best]
    Pd = D.project(A @ x)
    value = float(np.linalg.norm(Pd))
    y = Pd / value if value > 0 else np.zeros(D.ambient)
    frac = float(converged.mean())
    logger.debug(f"restricted_sv: {k} starts, best {value:.10g}, converged {frac:.0%}")
    return RestrictedExtremum(value, x, y, frac, "sv", values.tolist())


# --- Oracles ---

def sphere_grid(m: int, grid: int) -> np.ndarray:
    """
    Latitude/longitude grid on S^{m-1} for m ≤ 4.

    `grid` points per half great circle (angular spacing π/(grid-1)); the
    4-D grid uses a quarter of that resolution per angle.
    """
    if m == 1:
        return np.array([[1.0], [-1.0]])
    if m == 2:
        th = np.linspace(0.0, 2 * np.pi, 2 * grid, endpoint=False)
        return np.column_stack([np.cos(th), np.sin(th)])
    if m == 3:
        th = np.linspace(0.0, np.pi, grid)
        ph = np.linspace(0.0, 2 * np.pi, 2 * grid, endpoint=False)
        T, P = np.meshgrid(th, ph, indexing="ij")
        return np.column_stack([np.cos(T).ravel(), (np.sin(T) * np.cos(P)).ravel(),
                                (np.sin(T) * np.sin(P)).ravel()])
    if m == 4:
        g = max(grid // 4, 8)
        a = np.linspace(0.0, np.pi, g)
        b = np.linspace(0.0, np.pi, g)
        c = np.linspace(0.0, 2 * np.pi, 2 * g, endpoint=False)
        A_, B_, C_ = np.meshgrid(a, b, c, indexing="ij")
        return np.column_stack([np.cos(A_).ravel(),
                                (np.sin(A_) * np.cos(B_)).ravel(),
                                (np.sin(A_) * np.sin(B_) * np.cos(C_)).ravel(),
                                (np.sin(A_) * np.sin(B_) * np.sin(C_)).ravel()])
    raise UnsupportedProjection(f"sphere-grid oracle supports m <= 4, got {m}")


def _grid_oracle(A, C, D, kind, grid):
    P = C.project_many(sphere_grid(C.ambient, grid))
    X, norms = _normalize_rows(P)
    X = X[norms > 1e-12]
    vals = np.linalg.norm(D.project_many(X @ A.T), axis=1)
    sign = 1.0 if kind == "sv" else -1.0
    best = int(np.argmin(sign * vals))

    def objective(p):
        q = C.project(p)
        r = np.linalg.norm(q)
        if r <= 1e-12:
            return np.inf
        return sign * np.linalg.norm(D.project(A @ (q / r)))

    res = optimize.minimize(objective, X[best], method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
    polished = sign * res.fun if np.isfinite(res.fun) else vals[best]
    return float(min(vals[best], polished) if kind == "sv" else max(vals[best], polished))


def _span_basis(G: np.ndarray) -> np.ndarray:
    return linalg.orth(G) if G.size else np.zeros((G.shape[0], 0))


def _subsets(k: int):
    for r in range(1, k + 1):
        yield from itertools.combinations(range(k), r)


def _face_oracle(A, C, D, kind):
    Gc = C.generators()
    if Gc is None or Gc.shape[1] > _ORACLE_MAX_GENERATORS:
        raise UnsupportedProjection("face-enumeration oracle needs a polyhedral domain with <= 12 generators")
    if kind == "norm":
        Gd = D.generators()
    else:
        Nd = D.normals()
        Gd = None if Nd is None else -Nd.T  # generators of D°
    if Gd is None or Gd.shape[1] > _ORACLE_MAX_GENERATORS:
        raise UnsupportedProjection("face-enumeration oracle needs a polyhedral codomain with <= 12 generators")
    n_pairs = (2 ** Gc.shape[1]) * (2 ** Gd.shape[1])
    if n_pairs > _ORACLE_MAX_PAIRS:
        raise UnsupportedProjection(f"face-enumeration oracle would visit {n_pairs} face pairs")

    f = lambda x: float(np.linalg.norm(D.project(A @ x)))
    c_spans = [_span_basis(Gc[:, list(S)]) for S in _subsets(Gc.shape[1])]
    d_spans = [np.zeros((D.ambient, 0))] + [_span_basis(Gd[:, list(S)]) for S in _subsets(Gd.shape[1])]
    candidates = [g / np.linalg.norm(g) for g in Gc.T]

    for B in c_spans:
        for E in d_spans:
            if kind == "norm":
                if E.shape[1] == 0:
                    continue
                _, _, Vt = np.linalg.svd(E.T @ A @ B)
                v = B @ Vt[0]
            else:
                M = A @ B - E @ (E.T @ (A @ B))
                w, V = np.linalg.eigh(M.T @ M)
                v = B @ V[:, 0]
            candidates.extend([v, -v])

    tol = 1e-9
    vals = [f(x) for x in candidates if member(C, x, tol)]
    return float(max(vals) if kind == "norm" else min(vals))


def oracle_restricted(A: np.ndarray, C: Cone, D: Cone, kind: str, grid: Optional[int] = None,
                      cfg: Optional[SolverConfig] = None) -> float:
    """
    Independent value of ‖A‖_{C→D} (kind='norm') or σ_{C→D}(A) (kind='sv').

    Sphere-grid mode for m ≤ 4 (grid evaluation of normalized projections of
    grid points, then a Nelder–Mead polish); face-enumeration mode for
    polyhedral cones with at most 12 generators, exact up to eigen-solver accuracy.
    """
    if kind not in ("norm", "sv"):
        raise DomainError(f"kind must be 'norm' or 'sv', got {kind!r}")
    A = _check_problem(A, C, D)
    if C.ambient <= 4:
        return _grid_oracle(A, C, D, kind, grid or (cfg or DEFAULT_SOLVER).oracle_grid)
    return _face_oracle(A, C, D, kind)


def face_oracle(A: np.ndarray, C: Cone, D: Cone, kind: str) -> float:
    A = _check_problem(A, C, D)
    return _face_oracle(A, C, D, kind)


def polyhedral_vanishes(G: np.ndarray, C: Cone, D: Cone, tol: float = 1e-9) -> bool:
    """
    Exact test of σ_{C→D}(G) = 0, i.e. some nonzero x ∈ C has Gx ∈ D°, by
    linear programming. Needs generators for C and a polyhedral D.

    Variables are generator weights λ ≥ 0 (x = Gc λ) and, when D is given by
    normals, multipliers μ ≥ 0 with Gx = -Ndᵀ μ.
    """
    G = _check_problem(G, C, D)
    Gc = C.generators()
    if Gc is None:
        raise UnsupportedProjection("polyhedral_vanishes needs generators for the domain cone")
    M = G @ Gc
    k = Gc.shape[1]

    ub_rows, ub_rhs, eq_rows, eq_rhs = [], [], [], []
    Hd = D.generators()
    if Hd is not None:
        # Gx ∈ D°  <=>  Hdᵀ G x ≤ 0
        n_mu = 0
        ub_rows.append(Hd.T @ M)
        ub_rhs.append(np.zeros(Hd.shape[1]))
    else:
        Nd = D.normals()
        if Nd is None:
            raise UnsupportedProjection("polyhedral_vanishes needs a polyhedral codomain")
        n_mu = Nd.shape[0]
        eq_rows.append(np.hstack([M, Nd.T]))
        eq_rhs.append(np.zeros(M.shape[0]))

    def pad(rows):
        return np.hstack([rows, np.zeros((rows.shape[0], n_mu))])

    if ub_rows:
        ub_rows = [pad(r) if r.shape[1] == k else r for r in ub_rows]
    bounds = [(0, None)] * (k + n_mu)

    def lp(c, extra_ub=(), extra_ub_rhs=(), extra_eq=(), extra_eq_rhs=()):
        A_ub = list(ub_rows) + list(extra_ub)
        b_ub = list(ub_rhs) + list(extra_ub_rhs)
        A_eq = list(eq_rows) + list(extra_eq)
        b_eq = list(eq_rhs) + list(extra_eq_rhs)
        return optimize.linprog(c,
                                A_ub=np.vstack(A_ub) if A_ub else None,
                                b_ub=np.concatenate(b_ub) if b_ub else None,
                                A_eq=np.vstack(A_eq) if A_eq else None,
                                b_eq=np.concatenate(b_eq) if b_eq else None,
                                bounds=bounds, method="highs")

    Nc = C.normals()
    if Nc is not None and Nc.shape[0] and np.linalg.matrix_rank(Nc) == C.ambient:
        # pointed cone: weights on the simplex never produce x = 0
        simplex = np.concatenate([np.ones(k), np.zeros(n_mu)])[None, :]
        res = lp(np.zeros(k + n_mu), extra_eq=[simplex], extra_eq_rhs=[np.array([1.0])])
        return bool(res.status == 0)

    # otherwise probe every coordinate direction inside the box |x_i| ≤ 1
    box = pad(Gc)
    for i in range(C.ambient):
        for s in (1.0, -1.0):
            res = lp(-s * box[i], extra_ub=[box, -box],
                     extra_ub_rhs=[np.ones(C.ambient), np.ones(C.ambient)])
            if res.status == 0 and -res.fun > tol:
                return True
    return False
