"""Domains, polar frames, and collocation sampling."""
import numpy as np
import pytest

from sepinn import geometry as geo


def test_polar_frame_roundtrip():
    frame = geo.PolarFrame((0.0, 0.0), 0.0, 1.5 * np.pi)
    rng = np.random.default_rng(0)
    r = rng.uniform(0.01, 2.0, 200)
    theta = rng.uniform(0.0, frame.omega, 200)
    pts = np.array([geo.from_local_polar(frame, ri, ti) for ri, ti in zip(r, theta)])
    r2, t2 = geo.to_local_polar_batch(frame, pts)
    assert np.allclose(r2, r, atol=1e-12)
    assert np.allclose(t2, theta, atol=1e-12)


def test_polar_frame_clockwise_orientation():
    # the cube's v1 frame runs clockwise; angles must still land in [0, omega]
    frame = geo.PolarFrame((0.0, -np.pi), np.pi, np.pi, counterclockwise=False)
    r, t = geo.to_local_polar(frame, (-1.0, -np.pi + 1e-9))
    assert abs(r - 1.0) < 1e-9
    assert abs(t) < 1e-6
    r, t = geo.to_local_polar(frame, (1.0, -np.pi + 1e-9))
    assert abs(t - np.pi) < 1e-6


def test_areas_and_volumes():
    assert geo.lshape2d().volume == pytest.approx(3.0, abs=1e-12)
    assert geo.square_mixed().volume == pytest.approx(1.0, abs=1e-12)
    assert geo.lshape_prism().volume == pytest.approx(6.0, abs=1e-12)
    assert geo.cube_mixed_edges().volume == pytest.approx((2 * np.pi) ** 3, rel=1e-12)


def test_boundary_measures():
    sq = geo.square_mixed()
    assert sq.boundary_measure("dirichlet") == pytest.approx(3.5)
    assert sq.boundary_measure("neumann") == pytest.approx(0.5)
    prism = geo.lshape_prism()
    # lateral 8 x 2 plus two caps of area 3
    assert prism.boundary_measure("dirichlet") == pytest.approx(8.0 * 2.0 + 6.0)
    assert prism.boundary_measure("neumann") == 0.0


def test_contains_lshape():
    dom = geo.lshape2d()
    assert dom.contains((-0.5, 0.5))
    assert dom.contains((-0.5, -0.5))
    assert dom.contains((0.5, 0.5))
    assert not dom.contains((0.5, -0.5))   # removed quadrant
    assert not dom.contains((1.5, 0.0))


def test_interior_samples_inside_and_deterministic():
    for dom in (geo.lshape2d(), geo.square_mixed(), geo.lshape_prism(),
                geo.cube_mixed_edges()):
        pts = geo.sample_interior(dom, 500, seed=4)
        assert pts.shape == (500, dom.dim)
        assert geo.contains(dom, pts[0])
        assert dom.contains_batch(pts).all()
        again = geo.sample_interior(dom, 500, seed=4)
        assert np.array_equal(pts, again)
        other = geo.sample_interior(dom, 500, seed=5)
        assert not np.array_equal(pts, other)


def _distance_to_segments(dom, pts2):
    """Min distance from 2D points to the polygon boundary segments."""
    best = np.full(len(pts2), np.inf)
    for seg in dom.segments:
        a = np.asarray(seg.start, float)
        b = np.asarray(seg.end, float)
        ab = b - a
        t = np.clip((pts2 - a) @ ab / (ab @ ab), 0.0, 1.0)
        proj = a + t[:, None] * ab
        best = np.minimum(best, np.linalg.norm(pts2 - proj, axis=1))
    return best


def test_boundary_samples_on_segments():
    dom = geo.square_mixed()
    (d_pts, d_nrm), (n_pts, n_nrm) = geo.sample_boundary(dom, 300, 60, seed=8)
    assert d_pts.shape == (300, 2) and n_pts.shape == (60, 2)
    assert _distance_to_segments(dom, d_pts).max() < 1e-12
    assert _distance_to_segments(dom, n_pts).max() < 1e-12
    # normals are unit outward; Neumann part is the bottom half edge, normal (0,-1)
    assert np.allclose(np.linalg.norm(d_nrm, axis=1), 1.0, atol=1e-12)
    assert np.allclose(n_nrm, [0.0, -1.0], atol=1e-12)
    assert (n_pts[:, 0] < 0.5).all() and np.allclose(n_pts[:, 1], 0.0)


def test_boundary_samples_prism_faces():
    dom = geo.lshape_prism()
    (d_pts, d_nrm), _ = geo.sample_boundary(dom, 400, 0, seed=9)
    assert d_pts.shape == (400, 3)
    assert np.allclose(np.linalg.norm(d_nrm, axis=1), 1.0, atol=1e-12)
    on_caps = np.isclose(np.abs(d_pts[:, 2]), 1.0)
    # cap points have vertical normals, lateral points sit on the polygon edges
    assert np.allclose(np.abs(d_nrm[on_caps, 2]), 1.0)
    lateral = d_pts[~on_caps]
    assert _distance_to_segments(dom, lateral[:, :2]).max() < 1e-12


def test_neumann_request_on_dirichlet_domain_errors():
    with pytest.raises(ValueError):
        geo.sample_boundary(geo.lshape2d(), 100, 10, seed=0)
    with pytest.raises(ValueError):
        geo.build_samples(geo.lshape_prism(), 100, 50, 10, seed=0)


def test_build_samples_measures_and_counts():
    dom = geo.square_mixed()
    ss = geo.build_samples(dom, 250, 70, 30, seed=3)
    assert (ss.n_interior, ss.n_dirichlet, ss.n_neumann) == (250, 70, 30)
    assert ss.measures == (1.0, pytest.approx(3.5), pytest.approx(0.5))
    assert ss.seed == 3
    # category streams: boundary draws do not perturb interior draws
    direct = geo.sample_interior(dom, 250, seed=3)
    assert np.array_equal(ss.interior, direct)


def test_split_boundary_counts():
    assert geo.split_boundary_counts(geo.square_mixed(), 800) == (700, 100)
    assert geo.split_boundary_counts(geo.lshape2d(), 800) == (800, 0)


def test_validation_points_distinct_stream():
    dom = geo.lshape2d()
    val = geo.validation_points(dom, 300, seed=3)
    tr = geo.sample_interior(dom, 300, seed=3)
    assert dom.contains_batch(val).all()
    assert not np.array_equal(val, tr)


def test_domain_validation_errors():
    tri = [(0.0, 0.0), (1.0, 0.0), (0.5, 1.0)]
    segs = geo._segments_all(np.asarray(tri, float), "dirichlet")
    with pytest.raises(ValueError):
        geo.DomainSpec("cw", list(reversed(tri)), segs)  # clockwise
    bow = [(0.0, 0.0), (1.0, 1.0), (1.0, 0.0), (0.0, 1.0)]
    with pytest.raises(ValueError):
        geo.DomainSpec("bow", bow, geo._segments_all(np.asarray(bow, float), "dirichlet"))
    with pytest.raises(ValueError):
        geo.DomainSpec("neumann-only", tri,
                       geo._segments_all(np.asarray(tri, float), "neumann"))


def test_smooth_corner_rejected_as_singular_vertex():
    # a square corner (omega = pi/2, Dirichlet/Dirichlet) admits no singular index
    poly = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
    segs = geo._segments_all(np.asarray(poly, float), "dirichlet")
    frame = geo.PolarFrame((0.0, 0.0), 0.0, 0.5 * np.pi)
    sv = geo.SingularVertex(frame, ("dirichlet", "dirichlet"))
    with pytest.raises(ValueError):
        geo.DomainSpec("square", poly, segs, [sv])
