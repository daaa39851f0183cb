"""
Cones
=====
Closed convex cones: exact projections, polar duality, membership, capped
angles, and the one-line text grammar used by the CLI.

Every cone is immutable after construction. Polyhedral cones expose
generators (V side) and/or inward normals (H side) when they are known in
closed form; the LP oracles and the face-dimension sampler rely on these.
"""

import math
import os
import re
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy import linalg, optimize

from utils_conic import (logger, read_matrix, DimensionMismatch, UnsupportedProjection,
                         ConeParseError, DomainError, ZeroConeError)

_ORTHO_TOL = 1e-10


class Cone:
    """A closed convex cone in ℝ^ambient."""

    kind = "cone"

    def __init__(self, ambient: int):
        if ambient < 1:
            raise DimensionMismatch(f"ambient dimension must be >= 1, got {ambient}")
        self.ambient = int(ambient)

    def project(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def project_many(self, X: np.ndarray) -> np.ndarray:
        """Project each row of X."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.vstack([self.project(x) for x in X]) if len(X) else X.copy()

    def polar(self) -> "Cone":
        return Polar(self)

    def generators(self) -> Optional[np.ndarray]:
        """Columns g_i with C = cone(g_i), or None when no finite list is known."""
        return None

    def normals(self) -> Optional[np.ndarray]:
        """Rows n_i with C = {x : n_i·x ≥ 0}, or None when no finite list is known."""
        return None

    @property
    def is_zero(self) -> bool:
        return False

    @property
    def is_subspace(self) -> bool:
        return False

    @property
    def is_polyhedral(self) -> bool:
        return self.generators() is not None or self.normals() is not None

    def describe(self) -> str:
        return self.kind

    def __repr__(self):
        return f"<{self.__class__.__name__} {self.describe()}>"

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        if x.shape[0] != self.ambient:
            raise DimensionMismatch(f"vector of length {x.shape[0]} for a cone in R^{self.ambient}")
        return x


class Full(Cone):
    kind = "full"

    def project(self, x):
        return self._check(x).copy()

    def project_many(self, X):
        return np.array(X, dtype=float, copy=True)

    def polar(self):
        return Subspace(self.ambient, np.zeros((self.ambient, 0)))

    def generators(self):
        eye = np.eye(self.ambient)
        return np.hstack([eye, -eye])

    def normals(self):
        return np.zeros((0, self.ambient))

    @property
    def is_subspace(self):
        return True

    def describe(self):
        return f"full {self.ambient}"


class Subspace(Cone):
    """Linear subspace spanned by orthonormal basis columns; zero columns give the zero cone."""

    kind = "subspace"

    def __init__(self, ambient: int, basis: np.ndarray):
        super().__init__(ambient)
        B = np.asarray(basis, dtype=float).reshape(ambient, -1)
        if B.shape[1] and not np.allclose(B.T @ B, np.eye(B.shape[1]), atol=_ORTHO_TOL):
            B = linalg.orth(B)
        self.basis = B
        self.dim = B.shape[1]

    @classmethod
    def coordinate(cls, ambient: int, dim: int) -> "Subspace":
        if not 0 <= dim <= ambient:
            raise DimensionMismatch(f"subspace dimension {dim} outside [0, {ambient}]")
        return cls(ambient, np.eye(ambient)[:, :dim])

    def project(self, x):
        x = self._check(x)
        return self.basis @ (self.basis.T @ x)

    def project_many(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return (X @ self.basis) @ self.basis.T

    def polar(self):
        if self.dim == 0:
            return Full(self.ambient)
        return Subspace(self.ambient, linalg.null_space(self.basis.T))

    def generators(self):
        return np.hstack([self.basis, -self.basis])

    def normals(self):
        perp = linalg.null_space(self.basis.T) if self.dim else np.eye(self.ambient)
        return np.vstack([perp.T, -perp.T])

    @property
    def is_zero(self):
        return self.dim == 0

    @property
    def is_subspace(self):
        return True

    def describe(self):
        if np.allclose(self.basis, np.eye(self.ambient)[:, :self.dim]):
            return f"subspace {self.ambient} {self.dim}"
        return f"subspace {self.ambient} <{self.dim}-dim>"


class Orthant(Cone):
    kind = "orthant"

    def project(self, x):
        return np.maximum(self._check(x), 0.0)

    def project_many(self, X):
        return np.maximum(np.asarray(X, dtype=float), 0.0)

    def polar(self):
        return PolyhedralH(self.ambient, -np.eye(self.ambient))

    def generators(self):
        return np.eye(self.ambient)

    def normals(self):
        return np.eye(self.ambient)

    def describe(self):
        return f"orthant {self.ambient}"


class Circular(Cone):
    """
    C_m(t) = {x : ‖x̃‖ ≤ t·s·x₁}, the circular cone of half-angle arctan t
    around the axis s·e₁ (s = ±1).
    """

    kind = "circ"

    def __init__(self, ambient: int, t: float, axis_sign: int = 1):
        super().__init__(ambient)
        if ambient < 2:
            raise DimensionMismatch(f"circular cones need m >= 2, got {ambient}")
        if not t > 0 or not math.isfinite(t):
            raise DomainError(f"circular slope must be a positive real, got {t}")
        if axis_sign not in (1, -1):
            raise DomainError(f"axis_sign must be +1 or -1, got {axis_sign}")
        self.t = float(t)
        self.axis_sign = int(axis_sign)
        self.cos_a = 1.0 / math.sqrt(1.0 + self.t * self.t)
        self.sin_a = self.t * self.cos_a

    def project_many(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        s = self.axis_sign
        x1 = s * X[:, 0]
        rest = X[:, 1:]
        r = np.linalg.norm(rest, axis=1)

        inside = r <= self.t * x1
        in_polar = self.t * r <= -x1
        coef = x1 * self.cos_a + r * self.sin_a
        safe_r = np.where(r > 0, r, 1.0)

        out = np.empty_like(X)
        out[:, 0] = s * coef * self.cos_a
        out[:, 1:] = (coef * self.sin_a / safe_r)[:, None] * rest
        out[inside] = X[inside]
        out[in_polar & ~inside] = 0.0
        return out

    def project(self, x):
        return self.project_many(self._check(x)[None, :])[0]

    def polar(self):
        return Circular(self.ambient, 1.0 / self.t, -self.axis_sign)

    def describe(self):
        if self.axis_sign < 0:
            return f"polar (circ {self.ambient} {_fmt(1.0 / self.t)})"
        return f"circ {self.ambient} {_fmt(self.t)}"


class PolyhedralV(Cone):
    """cone(G) for a generator matrix G with nonzero columns (normalized here)."""

    kind = "polyv"

    def __init__(self, ambient: int, G: np.ndarray):
        super().__init__(ambient)
        G = np.asarray(G, dtype=float).reshape(ambient, -1)
        norms = np.linalg.norm(G, axis=0)
        if G.shape[1] == 0 or np.any(norms == 0):
            raise DomainError("polyhedral generators must be nonzero columns")
        self.G = G / norms

    def project(self, x):
        x = self._check(x)
        lam, _ = optimize.nnls(self.G, x, maxiter=50 * max(self.G.shape))
        return self.G @ lam

    def polar(self):
        return PolyhedralH(self.ambient, -self.G.T)

    def generators(self):
        return self.G

    def normals(self):
        if self.G.shape[1] == self.ambient and np.linalg.matrix_rank(self.G) == self.ambient:
            return np.linalg.inv(self.G)
        return None

    def describe(self):
        return f"polyv <{self.ambient}x{self.G.shape[1]}>"


class PolyhedralH(Cone):
    """{x : N x ≥ 0} for a matrix N of inward normals (rows)."""

    kind = "polyh"

    def __init__(self, ambient: int, N: np.ndarray):
        super().__init__(ambient)
        self.N = np.asarray(N, dtype=float).reshape(-1, ambient)
        nonzero = np.linalg.norm(self.N, axis=1) > 0
        self.N = self.N[nonzero]
        self._dual = PolyhedralV(ambient, -self.N.T) if len(self.N) else None

    def project(self, x):
        x = self._check(x)
        if self._dual is None:
            return x.copy()
        # Moreau: the polar is cone(-Nᵀ)
        return x - self._dual.project(x)

    def polar(self):
        if self._dual is None:
            return Subspace(self.ambient, np.zeros((self.ambient, 0)))
        return self._dual

    def generators(self):
        if len(self.N) == 0:
            return Full(self.ambient).generators()
        if self.N.shape[0] == self.ambient and np.linalg.matrix_rank(self.N) == self.ambient:
            return np.linalg.inv(self.N)
        return None

    def normals(self):
        return self.N

    def describe(self):
        if self.N.shape == (self.ambient, self.ambient) and np.allclose(self.N, -np.eye(self.ambient)):
            return f"polar (orthant {self.ambient})"
        return f"polyh <{self.N.shape[0]}x{self.ambient}>"


class Polar(Cone):
    """Polar of a cone without a structural polar; projection by Moreau."""

    kind = "polar"

    def __init__(self, inner: Cone):
        super().__init__(inner.ambient)
        self.inner = inner

    def project(self, x):
        x = self._check(x)
        return x - self.inner.project(x)

    def project_many(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return X - self.inner.project_many(X)

    def polar(self):
        return self.inner

    def generators(self):
        N = self.inner.normals()
        return None if N is None else _nonzero_columns(-N.T, self.ambient)

    def normals(self):
        G = self.inner.generators()
        return None if G is None else -G.T

    @property
    def is_zero(self):
        return isinstance(self.inner, Full)

    @property
    def is_subspace(self):
        return self.inner.is_subspace

    def describe(self):
        return f"polar ({self.inner.describe()})"


class Product(Cone):
    kind = "product"

    def __init__(self, parts: Sequence[Cone]):
        parts = list(parts)
        if len(parts) < 1:
            raise DomainError("product needs at least one factor")
        super().__init__(sum(p.ambient for p in parts))
        self.parts = parts
        self.offsets = np.cumsum([0] + [p.ambient for p in parts])

    def _split(self, X):
        return [X[:, a:b] for a, b in zip(self.offsets[:-1], self.offsets[1:])]

    def project(self, x):
        x = self._check(x)
        return self.project_many(x[None, :])[0]

    def project_many(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.hstack([p.project_many(blk) for p, blk in zip(self.parts, self._split(X))])

    def polar(self):
        return Product([polar(p) for p in self.parts])

    def generators(self):
        blocks = [p.generators() for p in self.parts]
        if any(b is None for b in blocks):
            return None
        return linalg.block_diag(*blocks)

    def normals(self):
        blocks = [p.normals() for p in self.parts]
        if any(b is None for b in blocks):
            return None
        rows = []
        for p, b, lo in zip(self.parts, blocks, self.offsets[:-1]):
            pad = np.zeros((b.shape[0], self.ambient))
            pad[:, lo:lo + p.ambient] = b
            rows.append(pad)
        return np.vstack(rows)

    @property
    def is_zero(self):
        return all(p.is_zero for p in self.parts)

    @property
    def is_subspace(self):
        return all(p.is_subspace for p in self.parts)

    def describe(self):
        return "product " + " ".join(f"({p.describe()})" for p in self.parts)


class LinearImage(Cone):
    """
    T·C for an ℓ×m matrix T. Projection is available when the image resolves
    to a concrete cone: generator-bearing inner cones, subspaces, and
    circular cones under T = diag(a, b, ..., b).
    """

    kind = "image"

    def __init__(self, T: np.ndarray, inner: Cone, label: str = "T"):
        T = np.atleast_2d(np.asarray(T, dtype=float))
        if T.shape[1] != inner.ambient:
            raise DimensionMismatch(f"image matrix has {T.shape[1]} columns, cone lives in R^{inner.ambient}")
        super().__init__(T.shape[0])
        self.T = T
        self.inner = inner
        self.label = label
        self.resolved = self._resolve()

    def _resolve(self) -> Optional[Cone]:
        T, inner = self.T, self.inner
        ell, m = T.shape
        if isinstance(inner, Circular) and ell == m:
            d = np.diag(T)
            rest = d[1:]
            if (np.allclose(T, np.diag(d)) and d[0] != 0 and np.all(rest != 0)
                    and np.allclose(np.abs(rest), abs(rest[0]))):
                sign = inner.axis_sign * int(np.sign(d[0]))
                return Circular(m, inner.t * abs(rest[0]) / abs(d[0]), sign)
            return None
        if isinstance(inner, Subspace):
            if inner.dim == 0:
                return Subspace(ell, np.zeros((ell, 0)))
            img = T @ inner.basis
            return Subspace(ell, linalg.orth(img) if np.linalg.norm(img) > 0 else np.zeros((ell, 0)))
        if isinstance(inner, Full):
            if np.linalg.matrix_rank(T) == ell:
                return Full(ell)
            return Subspace(ell, linalg.orth(T))
        G = inner.generators()
        if G is not None:
            TG = _nonzero_columns(T @ G, ell)
            if TG is None:
                return Subspace(ell, np.zeros((ell, 0)))
            return PolyhedralV(ell, TG)
        return None

    def _require(self) -> Cone:
        if self.resolved is None:
            raise UnsupportedProjection(f"no projection for the linear image {self.describe()}")
        return self.resolved

    def project(self, x):
        return self._require().project(self._check(x))

    def project_many(self, X):
        return self._require().project_many(X)

    def polar(self):
        return self.resolved.polar() if self.resolved is not None else Polar(self)

    def generators(self):
        return None if self.resolved is None else self.resolved.generators()

    def normals(self):
        return None if self.resolved is None else self.resolved.normals()

    @property
    def is_zero(self):
        return self.resolved is not None and self.resolved.is_zero

    @property
    def is_subspace(self):
        return self.resolved is not None and self.resolved.is_subspace

    def describe(self):
        return f"image {self.label} ({self.inner.describe()})"


def _nonzero_columns(G: np.ndarray, ambient: int) -> Optional[np.ndarray]:
    keep = np.linalg.norm(G, axis=0) > 1e-12
    return G[:, keep] if np.any(keep) else None


def _fmt(v: float) -> str:
    return f"{v:.10g}"


# --- Module-level operations ---

def project(C: Cone, x: np.ndarray) -> np.ndarray:
    return C.project(x)


def polar(C: Cone) -> Cone:
    if isinstance(C, Polar):
        return C.inner
    return C.polar()


def member(C: Cone, x: np.ndarray, tol: float = 1e-9) -> bool:
    x = C._check(x)
    return bool(np.linalg.norm(x - C.project(x)) <= tol)


def diag_image(inner: Cone, s: float) -> LinearImage:
    """Image under T = diag(1, s, ..., s); maps C_m(t) onto C_m(st)."""
    T = np.diag([1.0] + [float(s)] * (inner.ambient - 1))
    return LinearImage(T, inner, label=f"diag1s{_fmt(s)}")


def sample_stub_points(C: Cone, count: int, rng: np.random.Generator) -> np.ndarray:
    """Rows are unit vectors of C, normalized projections of Gaussian draws."""
    if C.is_zero:
        raise ZeroConeError("the zero cone has no unit vectors")
    out = []
    while len(out) < count:
        P = C.project_many(rng.standard_normal((count, C.ambient)))
        norms = np.linalg.norm(P, axis=1)
        out.extend(p / r for p, r in zip(P, norms) if r > 1e-12)
    return np.array(out[:count])


@dataclass
class AngleResult:
    cos_capped_angle: float
    x: np.ndarray
    y: np.ndarray
    converged_fraction: float = 1.0


def capped_angle(C: Cone, D: Cone, cfg=None) -> AngleResult:
    """
    cos d̄(C, D) = ‖I‖_{C→D}, the largest ⟨x, y⟩ over unit x ∈ C, y ∈ D,
    clamped to [0, 1].
    """
    import restricted

    if C.ambient != D.ambient:
        raise DimensionMismatch(f"cones live in R^{C.ambient} and R^{D.ambient}")
    res = restricted.restricted_norm(np.eye(C.ambient), C, D, cfg)
    value = min(max(res.value, 0.0), 1.0)
    y = res.y_cert
    ny = np.linalg.norm(y)
    y = y / ny if ny > 1e-12 else np.zeros_like(y)
    if res.converged_fraction < 0.5:
        logger.warning(f"capped_angle: only {res.converged_fraction:.0%} of starts converged")
    return AngleResult(value, res.x_cert, y, res.converged_fraction)


def angle_sine(C: Cone, D: Cone, cfg=None) -> float:
    """σ_{C→D}(I), which equals sin d̄(C, D°)."""
    import restricted

    return restricted.restricted_sv(np.eye(C.ambient), C, D, cfg).value


# --- Text grammar ---
#
#   cone    := '(' cone ')' | atom
#   atom    := 'full' M | 'zero' M | 'orthant' M | 'subspace' M J | 'circ' M T
#            | 'polyv' FILE | 'polyh' FILE | 'polar' cone
#            | 'product' cone cone ... | 'image' FILE cone
#
# polyv files hold generators as columns (m x k), polyh files hold normals as rows (k x m).

_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def parse_cone(text: str, base_dir: str = ".") -> Cone:
    tokens = _TOKEN.findall(text)
    if not tokens:
        raise ConeParseError("empty cone text")
    cone, pos = _parse(tokens, 0, base_dir)
    if pos != len(tokens):
        raise ConeParseError(f"trailing tokens in cone text: {' '.join(tokens[pos:])}")
    return cone


def _int(tok: str, what: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ConeParseError(f"expected integer {what}, got '{tok}'")


def _float(tok: str, what: str) -> float:
    try:
        return float(tok)
    except ValueError:
        raise ConeParseError(f"expected number {what}, got '{tok}'")


def _take(tokens: List[str], pos: int, what: str) -> str:
    if pos >= len(tokens):
        raise ConeParseError(f"unexpected end of cone text, expected {what}")
    return tokens[pos]


def _matrix(tok: str, base_dir: str) -> np.ndarray:
    path = tok if os.path.isabs(tok) else os.path.join(base_dir, tok)
    return read_matrix(path)


def _parse(tokens: List[str], pos: int, base_dir: str):
    tok = _take(tokens, pos, "cone")
    if tok == "(":
        cone, pos = _parse(tokens, pos + 1, base_dir)
        if _take(tokens, pos, "')'") != ")":
            raise ConeParseError(f"expected ')' at token {pos}, got '{tokens[pos]}'")
        return cone, pos + 1

    head = tok.lower()
    pos += 1
    try:
        if head in ("full", "zero", "orthant"):
            m = _int(_take(tokens, pos, "dimension"), "dimension")
            cone = {"full": lambda: Full(m),
                    "zero": lambda: Subspace(m, np.zeros((m, 0))),
                    "orthant": lambda: Orthant(m)}[head]()
            return cone, pos + 1
        if head == "subspace":
            m = _int(_take(tokens, pos, "ambient dimension"), "ambient dimension")
            j = _int(_take(tokens, pos + 1, "subspace dimension"), "subspace dimension")
            return Subspace.coordinate(m, j), pos + 2
        if head == "circ":
            m = _int(_take(tokens, pos, "dimension"), "dimension")
            t = _float(_take(tokens, pos + 1, "slope"), "slope")
            return Circular(m, t), pos + 2
        if head == "polyv":
            G = _matrix(_take(tokens, pos, "matrix file"), base_dir)
            return PolyhedralV(G.shape[0], G), pos + 1
        if head == "polyh":
            N = _matrix(_take(tokens, pos, "matrix file"), base_dir)
            return PolyhedralH(N.shape[1], N), pos + 1
        if head == "polar":
            inner, pos = _parse(tokens, pos, base_dir)
            return polar(inner), pos
        if head == "image":
            fname = _take(tokens, pos, "matrix file")
            T = _matrix(fname, base_dir)
            inner, pos = _parse(tokens, pos + 1, base_dir)
            return LinearImage(T, inner, label=os.path.splitext(os.path.basename(fname))[0]), pos
        if head == "product":
            parts = []
            while pos < len(tokens) and tokens[pos] == "(":
                part, pos = _parse(tokens, pos, base_dir)
                parts.append(part)
            if len(parts) < 2:
                raise ConeParseError("product needs at least two parenthesized factors")
            return Product(parts), pos
    except (ValueError, DimensionMismatch) as e:
        if isinstance(e, ConeParseError):
            raise
        raise ConeParseError(f"invalid '{head}' cone: {e}")
    raise ConeParseError(f"unknown cone kind '{tok}'")


def cone_slug(C: Cone) -> str:
    """File-name friendly rendering of describe()."""
    slug = re.sub(r"[()<>]", "", C.describe())
    return re.sub(r"\s+", "-", slug.strip())
