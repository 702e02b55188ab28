import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lrom.errors import ConfigError, DomainViolationError
from lrom.fom import build_mesh
from lrom.geometry import (Affine, ElementClass, GeometrySpec, ParameterDomain, ResolvedHoles,
                           circle_hausdorff, classify_boxes, classify_element, hole_boundary_distance,
                           point_in_domain, points_in_domain, resolve_holes)


def one_hole(c, r):
    return ResolvedHoles(np.array([c], dtype=float), np.array([r], dtype=float))


def test_resolve_1d_benchmark(spec1d):
    h = resolve_holes(spec1d, [0.5])
    np.testing.assert_allclose(h.centers, [[0.5, 0.5]])
    np.testing.assert_allclose(h.radii, [0.3])


def test_resolve_2d_benchmark(spec2d):
    h = resolve_holes(spec2d, [1.0, 0.25])
    np.testing.assert_allclose(h.centers, [[1.0, 1.0]])
    np.testing.assert_allclose(h.radii, [0.25])


def test_resolve_no_holes():
    spec = GeometrySpec((0, 0, 1, 1), ParameterDomain((0,), (1,)))
    assert len(resolve_holes(spec, [0.3])) == 0


def test_resolve_out_of_domain(spec1d):
    with pytest.raises(DomainViolationError):
        resolve_holes(spec1d, [1.6])
    with pytest.raises(DomainViolationError):
        resolve_holes(spec1d, [1.0, 1.0])


def test_hole_leaving_box_rejected():
    d = {"box": [0, 0, 2, 2], "parameter_domain": {"lower": [0.1], "upper": [1.0]},
         "holes": [{"center": ["mu1", 1.0], "radius": 0.3}]}
    with pytest.raises(ConfigError):
        GeometrySpec.from_dict(d)


def test_affine_parse():
    a = Affine.parse("0.5 + 2*mu1 - mu2/4", 2)
    assert a.const == 0.5 and a.coeffs == (2.0, -0.25)
    assert a([1.0, 2.0]) == pytest.approx(2.0)
    assert Affine.parse(0.3, 1)([0.7]) == 0.3
    with pytest.raises(ConfigError):
        Affine.parse("mu1*mu1", 1)
    with pytest.raises(ConfigError):
        Affine.parse("mu3", 2)


def test_spec_dict_round_trip(spec2d):
    assert GeometrySpec.from_dict(spec2d.to_dict()) == spec2d


@pytest.fixture(scope="module")
def grid_setup():
    mesh = build_mesh((0, 0, 2, 2), 32, 32)
    return mesh.element_boxes, one_hole((1.0, 1.0), 0.3)


def test_center_element_outside(grid_setup):
    boxes, holes = grid_setup
    e = np.flatnonzero((boxes[:, 0] <= 1) & (boxes[:, 2] > 1) & (boxes[:, 1] <= 1) & (boxes[:, 3] > 1))[0]
    assert classify_element(boxes[e], holes) is ElementClass.FULLY_OUTSIDE


def test_corner_element_inside(grid_setup):
    boxes, holes = grid_setup
    assert classify_element(boxes[0], holes) is ElementClass.FULLY_INSIDE


def test_cut_elements_verified_by_sampling(grid_setup, rng):
    # oracle: 10^4 uniform samples per element see both sides of the circle
    boxes, holes = grid_setup
    cls = classify_boxes(boxes, holes)
    cut = np.flatnonzero(cls == ElementClass.CUT.value)
    assert len(cut) > 0
    for e in cut[:: max(1, len(cut) // 12)]:
        x0, y0, x1, y1 = boxes[e]
        pts = np.column_stack([rng.uniform(x0, x1, 10_000), rng.uniform(y0, y1, 10_000)])
        inside = points_in_domain(pts, holes)
        assert inside.any() and not inside.all()


def test_classification_consistency(grid_setup, rng):
    boxes, holes = grid_setup
    cls = classify_boxes(boxes, holes)
    for code, want in ((ElementClass.FULLY_INSIDE.value, True), (ElementClass.FULLY_OUTSIDE.value, False)):
        for e in np.flatnonzero(cls == code)[::40]:
            x0, y0, x1, y1 = boxes[e]
            pts = np.column_stack([rng.uniform(x0, x1, 1000), rng.uniform(y0, y1, 1000)])
            assert np.all(points_in_domain(pts, holes) == want)


def test_point_in_domain_examples():
    h = one_hole((1.0, 1.0), 0.3)
    assert not point_in_domain((1.0, 1.0), h)
    assert point_in_domain((0.0, 0.0), h)
    # a point exactly on the circle belongs to the domain
    assert point_in_domain((1.5, 1.0), one_hole((1.0, 1.0), 0.5))


def test_hausdorff_examples(spec1d):
    assert circle_hausdorff((0, 0), 0.3, (0, 0), 0.2) == pytest.approx(0.1)
    assert hole_boundary_distance([0.7], [0.7], spec1d) == 0.0


def _brute_hausdorff(c1, r1, c2, r2, n=4096):
    t = np.linspace(0, 2 * np.pi, n, endpoint=False)
    a = np.column_stack([c1[0] + r1 * np.cos(t), c1[1] + r1 * np.sin(t)])
    b = np.column_stack([c2[0] + r2 * np.cos(t), c2[1] + r2 * np.sin(t)])
    d = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2))
    return max(d.min(axis=1).max(), d.min(axis=0).max())


def test_hausdorff_shifted_equal_radii():
    want = _brute_hausdorff((0, 0), 0.3, (0.4, 0), 0.3)
    assert want == pytest.approx(0.4, abs=1e-3)
    assert circle_hausdorff((0, 0), 0.3, (0.4, 0), 0.3) == pytest.approx(want, abs=1e-3)


@settings(max_examples=30, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(0.05, 1), st.floats(-1, 1), st.floats(-1, 1),
       st.floats(0.05, 1))
def test_hausdorff_matches_sampling(x1, y1, r1, x2, y2, r2):
    got = circle_hausdorff((x1, y1), r1, (x2, y2), r2)
    assert got == pytest.approx(_brute_hausdorff((x1, y1), r1, (x2, y2), r2, 1500), abs=5e-3)


def test_distance_pseudometric(spec2d, rng):
    lo, hi = np.array(spec2d.domain.lower), np.array(spec2d.domain.upper)
    for _ in range(100):
        a, b, c = (lo + rng.random(2) * (hi - lo) for _ in range(3))
        dab = hole_boundary_distance(a, b, spec2d)
        assert dab == pytest.approx(hole_boundary_distance(b, a, spec2d), abs=1e-15)
        assert dab <= hole_boundary_distance(a, c, spec2d) + hole_boundary_distance(c, b, spec2d) + 1e-12


def test_distance_bounded_by_parameter_distance(spec1d, rng):
    mu = rng.uniform(0.5, 1.5, size=(500, 2))
    ratios = [hole_boundary_distance([a], [b], spec1d) / abs(a - b) for a, b in mu]
    C = max(ratios)
    # centre moves along the diagonal: distance sqrt(2)|a - b|
    assert np.isfinite(C)
    assert C == pytest.approx(np.sqrt(2.0), rel=1e-9)
