"""Registered benchmark problems: exact data consistency, residual oracles,
boundary traces, and registry behavior."""
import numpy as np
import pytest

from sepinn import enrichment as en
from sepinn import geometry as geo
from sepinn import problems as pr

from helpers import safe_points

ALL_NAMES = ["cube-four-edges", "eigen-lshape", "helmholtz2d", "helmholtz3d",
             "lshape-prism", "lshape2d", "square-mixed"]


def test_registry_lists_all_problems():
    assert pr.problem_names() == ALL_NAMES


def test_unknown_problem_rejected():
    with pytest.raises(KeyError):
        pr.get_problem("lshape3d")


def test_truncation_only_for_series_problems():
    assert pr.get_problem("lshape-prism", truncation=7).terms[0].coeff.truncation == 7
    assert pr.get_problem("helmholtz3d", truncation=3).terms[0].coeff.truncation == 3
    with pytest.raises(ValueError):
        pr.get_problem("lshape2d", truncation=5)


@pytest.mark.parametrize("name", [n for n in ALL_NAMES if n != "eigen-lshape"])
def test_finite_difference_residual_small(name):
    """The registered source and exact solution satisfy the PDE: the
    Richardson-extrapolated residual stays at rounding level away from
    boundaries, cutoff knots, and data interfaces."""
    problem = pr.get_problem(name)
    pts = safe_points(problem, 500, seed=42)
    assert len(pts) > 200
    res = pr.finite_difference_residual(problem, pts)
    assert np.max(np.abs(res)) < 1e-6


def test_residual_requires_exact_solution():
    with pytest.raises(ValueError):
        pr.finite_difference_residual(pr.get_problem("eigen-lshape"),
                                      np.zeros((4, 2)))


@pytest.mark.parametrize("name", [n for n in ALL_NAMES if n != "eigen-lshape"])
def test_dirichlet_trace_vanishes(name):
    problem = pr.get_problem(name)
    (d_pts, _), _ = geo.sample_boundary(problem.domain, 300, 0, seed=7)
    assert np.max(np.abs(problem.exact_u(d_pts))) < 1e-12


@pytest.mark.parametrize("name", ["square-mixed", "cube-four-edges"])
def test_neumann_trace_vanishes(name):
    """One-sided interior stencil for the normal derivative: the enrichment
    angle has its branch cut in the boundary face, so only interior
    evaluations are trustworthy."""
    problem = pr.get_problem(name)
    (_, _), (n_pts, n_nrm) = geo.sample_boundary(problem.domain, 1, 200, seed=8)
    keep = np.ones(len(n_pts), dtype=bool)
    for t in problem.terms:
        r, _ = geo.to_local_polar_batch(t.frame, n_pts[:, :2])
        keep &= r > 0.05
    p, nrm = n_pts[keep], n_nrm[keep]
    assert len(p) > 100
    h = 1e-5
    dn = (3.0 * problem.exact_u(p) - 4.0 * problem.exact_u(p - h * nrm)
          + problem.exact_u(p - 2.0 * h * nrm)) / (2.0 * h)
    assert np.max(np.abs(dn)) < 1e-4


@pytest.mark.parametrize("name", [n for n in ALL_NAMES if n != "eigen-lshape"])
def test_solution_splits_into_regular_and_singular(name):
    problem = pr.get_problem(name)
    pts = geo.sample_interior(problem.domain, 500, seed=3)
    u = problem.exact_u(pts)
    w = problem.exact_w(pts)
    s = problem.exact_singular(pts)
    assert np.allclose(u, w + s, rtol=0.0, atol=1e-14)


def test_prism_series_coefficients():
    problem = pr.get_problem("lshape-prism", truncation=6)
    n = np.arange(7)
    expect = np.concatenate([[0.0], 2.0 * (-1.0) ** n[1:] / n[1:]])
    assert np.allclose(problem.series_gammas(n), expect, rtol=0.0, atol=0.0)
    assert np.array_equal(problem.exact_coeffs, expect)
    assert problem.references["gamma_1"] == -2.0
    assert problem.references["gamma_2"] == 1.0


def test_cube_series_coefficients():
    problem = pr.get_problem("cube-four-edges", truncation=5)
    n = np.arange(6)
    expect = np.concatenate([[0.0], 2.0 / n[1:]])
    assert np.allclose(problem.series_gammas(n), expect, rtol=0.0, atol=0.0)
    # four edges share the same coefficient profile
    assert np.array_equal(problem.exact_coeffs, np.tile(expect, 4))
    assert len(problem.terms) == 4


def test_helmholtz3d_single_mode():
    problem = pr.get_problem("helmholtz3d")
    n = np.arange(problem.terms[0].coeff.truncation + 1)
    gam = problem.series_gammas(n)
    assert gam[1] == 1.0
    assert np.all(gam[n != 1] == 0.0)
    assert problem.damping > 0.0
    assert problem.terms[0].damping == problem.damping


def test_scalar_problem_references():
    for name in ("lshape2d", "square-mixed", "helmholtz2d"):
        problem = pr.get_problem(name)
        assert problem.references["gamma"] == 1.0
        assert np.array_equal(problem.exact_coeffs, [1.0])


def test_eigen_problem_shape():
    problem = pr.get_problem("eigen-lshape")
    assert problem.kind == "eigen"
    assert problem.exact_u is None
    assert problem.references["mu_1"] == 9.6397
    assert problem.references["mu_2"] == 15.1973
    assert np.allclose(problem.source(np.zeros((5, 2))), 0.0)


def test_problem_kinds_and_dims():
    expect = {
        "lshape2d": ("poisson", 2), "square-mixed": ("poisson", 2),
        "lshape-prism": ("poisson", 3), "cube-four-edges": ("poisson", 3),
        "eigen-lshape": ("eigen", 2), "helmholtz2d": ("helmholtz", 2),
        "helmholtz3d": ("helmholtz", 3),
    }
    for name, (kind, dim) in expect.items():
        problem = pr.get_problem(name)
        assert problem.kind == kind, name
        assert problem.dim == dim, name
        if kind != "helmholtz":
            assert problem.damping == 0.0, name


def test_with_aux_terms_swaps_coefficients():
    base = pr.get_problem("lshape-prism", truncation=4)
    aux = pr.with_aux_terms(base, hidden=(8, 8), input_mode="rz")
    assert isinstance(aux.terms[0].coeff, en.AuxNetCoeff)
    assert aux.terms[0].coeff.widths == (2, 8, 8, 1)
    assert aux.exact_u is base.exact_u
    assert aux.source is base.source
    # damping moves into the auxiliary net, which models the decay itself
    damped = pr.get_problem("helmholtz3d")
    assert damped.terms[0].damping > 0.0
    assert pr.with_aux_terms(damped).terms[0].damping == 0.0

    xyz = pr.with_aux_terms(pr.get_problem("cube-four-edges"), input_mode="xyz")
    assert all(t.coeff.widths[0] == 3 for t in xyz.terms)
    assert len(xyz.terms) == 4


def test_cutoff_supports_inside_domains():
    """Every enrichment ball stays clear of unrelated boundary parts: points
    just outside the domain near the support carry zero enrichment."""
    for name in ALL_NAMES:
        problem = pr.get_problem(name)
        if len(problem.terms) > 1:
            en.check_disjoint_supports(problem.terms)
        for term in problem.terms:
            assert term.support_radius <= 0.5


def test_sources_are_finite_and_vectorized():
    for name in ALL_NAMES:
        problem = pr.get_problem(name)
        pts = geo.sample_interior(problem.domain, 257, seed=1)
        f = problem.source(pts)
        assert f.shape == (257,)
        assert np.all(np.isfinite(f))
