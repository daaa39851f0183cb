import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from cones import (Circular, Full, LinearImage, Orthant, Polar, PolyhedralH, PolyhedralV, Product, Subspace,
                   angle_sine, capped_angle, cone_slug, diag_image, member, parse_cone, polar, project,
                   sample_stub_points)
from restricted import SolverConfig
from utils_conic import ConeParseError, DimensionMismatch, DomainError, UnsupportedProjection, ZeroConeError

vectors3 = arrays(np.float64, 3, elements=st.floats(min_value=-10, max_value=10, allow_nan=False))

CONES3 = [
    Full(3),
    Orthant(3),
    Subspace.coordinate(3, 2),
    Circular(3, 0.7),
    Circular(3, 2.0).polar(),
    PolyhedralV(3, np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0], [0.0, 0.0, 1.0]])),
    PolyhedralH(3, np.array([[1.0, -1.0, 0.0], [0.0, 1.0, 0.0]])),
    Product([Orthant(1), Circular(2, 1.0)]),
]


@pytest.mark.parametrize("C", CONES3, ids=lambda C: C.describe())
@given(x=vectors3)
@settings(max_examples=40, deadline=None)
def test_moreau_decomposition(C, x):
    p = C.project(x)
    q = polar(C).project(x)
    scale = max(1.0, np.linalg.norm(x))
    np.testing.assert_allclose(p + q, x, atol=1e-6 * scale)
    assert abs(np.dot(p, q)) <= 1e-6 * scale * scale
    assert member(C, p, 1e-6 * scale)


@pytest.mark.parametrize("C", CONES3, ids=lambda C: C.describe())
@given(x=vectors3)
@settings(max_examples=25, deadline=None)
def test_projection_is_idempotent(C, x):
    p = C.project(x)
    np.testing.assert_allclose(C.project(p), p, atol=1e-7 * max(1.0, np.linalg.norm(x)))


def test_circular_projection_closed_form():
    C = Circular(2, 1.0)
    np.testing.assert_allclose(C.project([0.0, 1.0]), [0.5, 0.5])
    np.testing.assert_allclose(C.project([1.0, 0.5]), [1.0, 0.5])
    np.testing.assert_allclose(C.project([-1.0, 0.0]), [0.0, 0.0])
    np.testing.assert_allclose(C.project_many([[0.0, 1.0], [2.0, 0.0]]), [[0.5, 0.5], [2.0, 0.0]])


def test_polar_of_circular_flips_axis_and_slope():
    P = Circular(4, 2.0).polar()
    assert isinstance(P, Circular)
    assert P.t == pytest.approx(0.5)
    assert P.axis_sign == -1
    assert P.describe() == "polar (circ 4 2)"
    assert polar(P).describe() == "circ 4 2"


def test_polar_of_special_cones():
    assert polar(Full(3)).is_zero
    assert isinstance(polar(Subspace.coordinate(3, 0)), Full)
    assert polar(Subspace.coordinate(3, 1)).dim == 2
    assert polar(Orthant(3)).describe() == "polar (orthant 3)"
    inner = Circular(3, 1.0)
    assert polar(Polar(inner)) is inner


def test_orthant_polar_projection():
    Q = polar(Orthant(3))
    np.testing.assert_allclose(Q.project([1.0, -2.0, 0.5]), [0.0, -2.0, 0.0], atol=1e-9)


def test_product_projects_blockwise():
    C = Product([Orthant(2), Subspace.coordinate(2, 1)])
    np.testing.assert_allclose(C.project([-1.0, 2.0, 3.0, 4.0]), [0.0, 2.0, 3.0, 0.0])
    assert C.ambient == 4


def test_linear_image_of_circular_resolves():
    img = diag_image(Circular(5, 0.5), 2.0)
    assert isinstance(img.resolved, Circular)
    assert img.resolved.t == pytest.approx(1.0)
    # T maps the boundary ray (1, t, 0, ...) onto the boundary of the image
    x = np.array([1.0, 0.5, 0.0, 0.0, 0.0])
    assert member(img, img.T @ x, 1e-9)


def test_linear_image_of_generators():
    img = LinearImage(np.array([[1.0, 1.0], [0.0, 1.0]]), Orthant(2))
    assert isinstance(img.resolved, PolyhedralV)
    assert member(img, [2.0, 1.0])
    assert not member(img, [0.0, 1.0], 1e-6)


def test_unresolved_image_refuses_projection():
    T = np.array([[1.0, 0.3, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]])
    img = LinearImage(T, Circular(3, 1.0))
    assert img.resolved is None
    with pytest.raises(UnsupportedProjection):
        img.project(np.ones(3))


def test_dimension_checks():
    with pytest.raises(DimensionMismatch):
        Orthant(3).project(np.ones(2))
    with pytest.raises(DimensionMismatch):
        Circular(1, 1.0)
    with pytest.raises(DimensionMismatch):
        Subspace.coordinate(3, 4)


def test_sample_stub_points_are_unit_members():
    rng = np.random.default_rng(0)
    C = Circular(4, 0.3)
    pts = sample_stub_points(C, 20, rng)
    assert pts.shape == (20, 4)
    np.testing.assert_allclose(np.linalg.norm(pts, axis=1), 1.0)
    assert all(member(C, p, 1e-9) for p in pts)
    with pytest.raises(ZeroConeError):
        sample_stub_points(Subspace.coordinate(3, 0), 1, rng)


def test_capped_angle_and_sine():
    cfg = SolverConfig(multistarts=8, max_iters=2000, seed=1)
    res = capped_angle(Orthant(2), Circular(2, 1.0), cfg)
    assert res.cos_capped_angle == pytest.approx(1.0, abs=1e-8)
    res = capped_angle(Orthant(2), polar(Orthant(2)), cfg)
    assert res.cos_capped_angle == pytest.approx(0.0, abs=1e-8)
    assert angle_sine(Orthant(2), Circular(2, 1.0), cfg) == pytest.approx(math.sqrt(0.5), abs=1e-6)


# --- Text grammar ---

@pytest.mark.parametrize("text,expected", [
    ("full 3", "full 3"),
    ("orthant 4", "orthant 4"),
    ("subspace 5 2", "subspace 5 2"),
    ("circ 10 1.5", "circ 10 1.5"),
    ("polar (orthant 2)", "polar (orthant 2)"),
    ("polar circ 3 2", "polar (circ 3 2)"),
    ("product (orthant 1) (circ 2 1)", "product (orthant 1) (circ 2 1)"),
    ("(circ 3 1)", "circ 3 1"),
])
def test_parse_cone_describe(text, expected):
    assert parse_cone(text).describe() == expected


def test_parse_zero_cone():
    C = parse_cone("zero 3")
    assert C.is_zero and C.ambient == 3


def test_parse_polyhedral_files(tmp_path, matrix_file):
    matrix_file("gens.txt", [[1.0, 1.0], [0.0, 1.0]])
    matrix_file("norms.txt", [[1.0, 0.0], [-1.0, 1.0]])
    matrix_file("T.txt", np.diag([1.0, 3.0]))
    V = parse_cone("polyv gens.txt", str(tmp_path))
    H = parse_cone("polyh norms.txt", str(tmp_path))
    img = parse_cone("image T.txt (circ 2 1)", str(tmp_path))
    assert isinstance(V, PolyhedralV) and V.G.shape == (2, 2)
    assert isinstance(H, PolyhedralH) and H.ambient == 2
    assert img.describe() == "image T (circ 2 1)"
    assert img.resolved.t == pytest.approx(3.0)


@pytest.mark.parametrize("text", [
    "", "cube 3", "circ 3", "circ 3 abc", "circ 3 -1", "subspace 3 5",
    "product (orthant 2)", "(orthant 2", "orthant 2 extra", "polyv missing.txt",
])
def test_parse_errors(text, tmp_path):
    with pytest.raises(ConeParseError):
        parse_cone(text, str(tmp_path))


def test_cone_slug_is_file_friendly():
    slug = cone_slug(parse_cone("polar (circ 3 2)"))
    assert slug == "polar-circ-3-2"
    assert "(" not in cone_slug(Product([Orthant(1), Orthant(1)]))


def test_module_level_project():
    np.testing.assert_allclose(project(Orthant(2), [-1.0, 1.0]), [0.0, 1.0])


def test_describe_non_square_normal_cone(matrix_file):
    C = PolyhedralH(3, np.array([[1.0, -1.0, 0.0], [0.0, 1.0, 0.0]]))
    assert C.describe() == "polyh <2x3>"
    assert cone_slug(C) == "polyh-2x3"
    assert "polyh" in repr(C)
    parsed = parse_cone(f"polyh {matrix_file('N.txt', C.N)}")
    assert cone_slug(parsed) == "polyh-2x3"
    assert PolyhedralH(2, -np.eye(2)).describe() == "polar (orthant 2)"


@pytest.mark.parametrize("build", [
    lambda: Circular(3, -1.0),
    lambda: Circular(3, 1.0, axis_sign=0),
    lambda: PolyhedralV(2, np.zeros((2, 1))),
    lambda: Product([]),
], ids=["negative-slope", "axis-sign", "zero-generator", "empty-product"])
def test_invalid_cones_raise_domain_error(build):
    with pytest.raises(DomainError):
        build()


def test_invalid_cone_text_is_a_parse_error():
    with pytest.raises(ConeParseError):
        parse_cone("circ 3 -1")
