"""Shared test utilities: interior points safe for finite-difference stencils."""
import numpy as np

from sepinn import geometry as geo


def safe_points(problem, n, seed, margin=0.01):
    """Interior samples clear of boundaries, cutoff knots, and interfaces.

    Finite-difference residual stencils need the exact solution smooth in a
    neighbourhood, so points are kept away from the vertex, both cutoff
    knots, the domain boundary, and (for the piecewise L-shape data) y=0.
    """
    dom = problem.domain
    pts = geo.sample_interior(dom, 8 * n, seed)
    keep = np.ones(len(pts), dtype=bool)
    for term in problem.terms:
        r, _ = geo.to_local_polar_batch(term.frame, pts[:, :2])
        rr = term.rho * term.radius
        keep &= r > 0.05
        keep &= np.abs(r - rr / 2.0) > margin
        keep &= np.abs(r - rr) > margin
    if problem.name in ("lshape2d", "helmholtz2d"):
        keep &= np.abs(pts[:, 1]) > margin
    lo = dom.polygon.min(axis=0)
    hi = dom.polygon.max(axis=0)
    for d in range(2):
        keep &= (pts[:, d] > lo[d] + margin) & (pts[:, d] < hi[d] - margin)
    if dom.dim == 3:
        keep &= (pts[:, 2] > dom.extrusion.z_min + margin)
        keep &= (pts[:, 2] < dom.extrusion.z_max - margin)
    sub = pts[keep][:n]
    h = 5e-4
    inside = np.ones(len(sub), dtype=bool)
    for d in range(sub.shape[1]):
        for sgn in (+1.0, -1.0):
            q = sub.copy()
            q[:, d] += sgn * h
            inside &= dom.contains_batch(q)
    return sub[inside]


def exact_loss_ratio(problem, sigma=100.0):
    """Empirical loss of the exact solution over the zero-function baseline.

    Interior residuals come from Richardson-extrapolated differences on the
    exact solution at points clear of boundaries, cutoff knots, and data
    interfaces.  Neumann traces use a one-sided interior stencil: the
    enrichment's angular branch cut lies in the boundary face, so points
    outside the domain are off limits; points near the singular edge are
    skipped because the one-sided truncation error degrades there.
    """
    from sepinn import problems as pr

    pts = safe_points(problem, 400, seed=21)
    assert len(pts) > 100, problem.name
    res = pr.finite_difference_residual(problem, pts)
    dom = problem.domain
    total = dom.volume * float(np.mean(res**2))
    f_scale = dom.volume * float(np.mean(problem.source(pts) ** 2))

    n_n = 120 if dom.boundary_measure("neumann") > 0 else 0
    (d_pts, _), (n_pts, n_nrm) = geo.sample_boundary(dom, 200, n_n, seed=22)
    total += sigma * dom.boundary_measure("dirichlet") * float(
        np.mean(problem.exact_u(d_pts) ** 2))
    if n_n:
        keep = np.ones(len(n_pts), dtype=bool)
        for t in problem.terms:
            r, _ = geo.to_local_polar_batch(t.frame, n_pts[:, :2])
            keep &= r > 0.05
        p, nrm = n_pts[keep], n_nrm[keep]
        assert len(p) > 50, problem.name
        h = 1e-5
        dn = (3.0 * problem.exact_u(p) - 4.0 * problem.exact_u(p - h * nrm)
              + problem.exact_u(p - 2.0 * h * nrm)) / (2 * h)
        total += sigma * dom.boundary_measure("neumann") * float(np.mean(dn**2))
    return total / f_scale
