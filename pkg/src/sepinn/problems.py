"""Registry of manufactured benchmark problems with exact solutions.

Each problem packages a domain, its enrichment terms, a source assembled
from the closed-form regular part plus enrichment-module Laplacians, and
the exact fields needed for error reporting.  Singular-part Laplacians are
never transcribed by hand: scalar and damped terms go through
eval_singular, and z-dependent edge coefficients go through an exact
product rule with closed-form partial derivatives of the edge function.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import enrichment as en
from . import geometry as geo


@dataclass(frozen=True)
class ProblemSpec:
    """One benchmark problem: geometry, equation, enrichment, exact data."""

    name: str
    domain: geo.DomainSpec
    kind: str                       # "poisson" | "helmholtz" | "eigen"
    terms: tuple
    source: Callable                # f(points) -> (n,)
    damping: float = 0.0            # screening constant A (helmholtz only)
    exact_u: Optional[Callable] = None
    exact_w: Optional[Callable] = None
    exact_singular: Optional[Callable] = None   # S(points), the enriched part
    exact_coeffs: Optional[np.ndarray] = None   # per-coefficient exact values
    series_gammas: Optional[Callable] = None    # n -> exact gamma_n (series problems)
    references: dict = None

    @property
    def dim(self) -> int:
        return self.domain.dim


def _poly_lshape_w(pts):
    x, y = pts[:, 0], pts[:, 1]
    upper = np.sin(2.0 * np.pi * x) * (-0.5 * y**2 + y) * (y**2 - 1.0)
    lower = np.sin(2.0 * np.pi * x) * (0.5 * y**2 + y) * (y**2 - 1.0)
    return np.where(y >= 0.0, upper, lower)


def _poly_lshape_neg_lap_w(pts):
    # -Delta of the piecewise regular part; the y >= 0 branch is used on the
    # interface, where the two one-sided Laplacians genuinely differ.
    x, y = pts[:, 0], pts[:, 1]
    s = np.sin(2.0 * np.pi * x)
    upper = s * (2.0 * np.pi**2 * (-(y**2) + 2.0 * y) * (y**2 - 1.0) - (-6.0 * y**2 + 6.0 * y + 1.0))
    lower = s * (2.0 * np.pi**2 * (y**2 + 2.0 * y) * (y**2 - 1.0) - (6.0 * y**2 + 6.0 * y - 1.0))
    return np.where(y >= 0.0, upper, lower)


def lshape_poisson_2d() -> ProblemSpec:
    """Poisson problem on the L-shaped domain with one reentrant corner.

    The exact solution is a piecewise-polynomial regular part plus the full
    corner singularity r^(2/3) sin(2 theta / 3) under a cutoff of radius 1/2,
    with unit intensity.
    """
    domain = geo.lshape2d()
    sv = domain.singular_vertices[0]
    iset = en.singular_index_set(sv.bc_pair, sv.frame.omega)
    term = en.SingularTerm(sv.frame, iset.lambdas(sv.frame.omega)[0], iset.trig,
                           rho=1.0, radius=0.5, index=1)

    def source(pts):
        return _poly_lshape_neg_lap_w(pts) - en.eval_singular(term, pts).laplacian

    def singular(pts):
        return en.eval_singular(term, pts).value

    def exact_u(pts):
        return _poly_lshape_w(pts) + singular(pts)

    return ProblemSpec(
        name="lshape2d", domain=domain, kind="poisson", terms=(term,),
        source=source, exact_u=exact_u, exact_w=_poly_lshape_w,
        exact_singular=singular, exact_coeffs=np.array([1.0]),
        references={"gamma": 1.0},
    )


def mixed_bc_square() -> ProblemSpec:
    """Poisson problem on the unit square with a Dirichlet-Neumann change.

    The boundary condition switches type at (1/2, 0), giving a half-power
    singularity r^(1/2) sin(theta/2) under a cutoff of radius 1/4.
    """
    domain = geo.square_mixed()
    sv = domain.singular_vertices[0]
    iset = en.singular_index_set(sv.bc_pair, sv.frame.omega)
    term = en.SingularTerm(sv.frame, iset.lambdas(sv.frame.omega)[0], iset.trig,
                           rho=1.0, radius=0.25, index=1)

    def exact_w(pts):
        x, y = pts[:, 0], pts[:, 1]
        return np.sin(np.pi * x) * y**2 * (y - 1.0)

    def neg_lap_w(pts):
        x, y = pts[:, 0], pts[:, 1]
        return -np.sin(np.pi * x) * (-np.pi**2 * y**2 * (y - 1.0) + 6.0 * y - 2.0)

    def source(pts):
        return neg_lap_w(pts) - en.eval_singular(term, pts).laplacian

    def singular(pts):
        return en.eval_singular(term, pts).value

    def exact_u(pts):
        return exact_w(pts) + singular(pts)

    return ProblemSpec(
        name="square-mixed", domain=domain, kind="poisson", terms=(term,),
        source=source, exact_u=exact_u, exact_w=exact_w,
        exact_singular=singular, exact_coeffs=np.array([1.0]),
        references={"gamma": 1.0},
    )


def _edge_product_neg_helmholtz(term, phi_partials, pts, a2=0.0):
    """-Delta(Phi eta s) + A^2 Phi eta s with closed-form Phi(r, z) partials.

    phi_partials(r, z) returns (phi, phi_r, phi_rz_lap) where phi_rz_lap is
    phi_rr + phi_zz.  The (x, y)-plane pieces of eta s come from the
    enrichment evaluation, so the full 3D Laplacian is
    eta s (phi_rr + phi_r / r + phi_zz) + 2 phi_r d(eta s)/dr + Phi Delta2(eta s).
    Phi carries the entire (r, z) dependence, so the planar factor is
    evaluated without the term's own damping.
    """
    ev = en.eval_singular(replace(term, damping=0.0), pts)
    r = np.maximum(ev.r, en.R_CLAMP)
    phi, phi_r, phi_lap_rz = phi_partials(ev.r, pts[:, 2])
    lap3 = ev.value * (phi_lap_rz + phi_r / r) + 2.0 * phi_r * ev.radial + phi * ev.laplacian
    value = phi * ev.value
    return -lap3 + a2 * value, value


def _prism_edge_phi(rr, zz):
    """Edge coefficient of the prism problem and its exact partials.

    Phi(r, z) = -2 Im log(1 + zeta) with zeta = exp(pi(-r + i z)), equal to
    the alternating series sum 2 (-1)^n exp(-n pi r) sin(n pi z) / n.
    """
    zeta = np.exp(np.pi * (-rr + 1j * zz))
    g = zeta / (1.0 + zeta)
    phi = -2.0 * np.imag(np.log(1.0 + zeta))
    phi_r = 2.0 * np.pi * np.imag(g)
    # phi_rr + phi_zz = 0: each series mode is harmonic in the (r, z) strip
    return phi, phi_r, np.zeros_like(phi)


def prism_edge_poisson(truncation: int = 20) -> ProblemSpec:
    """Poisson problem on the L-shaped prism with one singular edge.

    The edge coefficient is a closed-form arctangent whose sine series has
    gamma_n = 2 (-1)^n / n; the series term carries `truncation` + 1
    trainable coefficients on the sine basis in z.
    """
    domain = geo.lshape_prism()
    sv = domain.singular_vertices[0]
    iset = en.singular_index_set(sv.bc_pair, sv.frame.omega)
    zbasis = en.ZBasis(("dirichlet", "dirichlet"), length=1.0)
    coeff = en.SeriesCoeff(np.zeros(truncation + 1), zbasis)
    term = en.SingularTerm(sv.frame, iset.lambdas(sv.frame.omega)[0], iset.trig,
                           rho=1.0, radius=0.5, index=1, coeff=coeff)

    def exact_w(pts):
        x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
        return (x - x**3) * (y - y**3) * (1.0 - z**2)

    def neg_lap_w(pts):
        x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
        return (6.0 * x * (y - y**3) * (1.0 - z**2)
                + 6.0 * y * (x - x**3) * (1.0 - z**2)
                + 2.0 * (y - y**3) * (x - x**3))

    def source(pts):
        neg_lap_s, _ = _edge_product_neg_helmholtz(term, _prism_edge_phi, pts)
        return neg_lap_w(pts) + neg_lap_s

    def singular(pts):
        ev = en.eval_singular(term, pts)
        phi, _, _ = _prism_edge_phi(ev.r, pts[:, 2])
        return phi * ev.value

    def exact_u(pts):
        return exact_w(pts) + singular(pts)

    def gamma_n(n):
        n = np.asarray(n)
        return np.where(n == 0, 0.0, 2.0 * (-1.0) ** n / np.maximum(n, 1))

    return ProblemSpec(
        name="lshape-prism", domain=domain, kind="poisson", terms=(term,),
        source=source, exact_u=exact_u, exact_w=exact_w,
        exact_singular=singular,
        exact_coeffs=gamma_n(np.arange(truncation + 1)),
        series_gammas=gamma_n,
        references={"gamma_1": -2.0, "gamma_2": 1.0},
    )


def _cube_edge_phi(rr, zz):
    """Edge coefficient r - log(2 cosh r - 2 cos z) and its exact partials.

    Equal to -2 Re log(1 - zeta) with zeta = exp(-r + i z), whose cosine
    series has gamma_n = 2 / n.
    """
    zeta = np.exp(-rr + 1j * zz)
    g = zeta / (1.0 - zeta)
    phi = -2.0 * np.real(np.log(1.0 - zeta))
    phi_r = -2.0 * np.real(g)
    return phi, phi_r, np.zeros_like(phi)


def four_edge_cube(truncation: int = 15) -> ProblemSpec:
    """Poisson problem on a cube with four singular vertical edges.

    Each edge sees a Dirichlet-Neumann change (half-power singularity) and
    carries the same closed-form edge coefficient with cosine series
    gamma_n = 2 / n on disjoint cutoff supports of radius 1/2.
    """
    domain = geo.cube_mixed_edges()
    zbasis = en.ZBasis(("neumann", "neumann"), length=np.pi)
    terms = []
    for sv in domain.singular_vertices:
        iset = en.singular_index_set(sv.bc_pair, sv.frame.omega)
        coeff = en.SeriesCoeff(np.zeros(truncation + 1), zbasis)
        terms.append(en.SingularTerm(sv.frame, iset.lambdas(sv.frame.omega)[0],
                                     iset.trig, rho=1.0, radius=0.5, index=1,
                                     coeff=coeff))
    en.check_disjoint_supports(terms)

    def exact_w(pts):
        x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
        return (1.0 - x**2 / np.pi**2) ** 2 * (1.0 - y**2 / np.pi**2) ** 2 * np.cos(z)

    def neg_lap_w(pts):
        x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
        px = (1.0 - x**2 / np.pi**2) ** 2
        py = (1.0 - y**2 / np.pi**2) ** 2
        ddx = 12.0 * x**2 / np.pi**4 - 4.0 / np.pi**2
        ddy = 12.0 * y**2 / np.pi**4 - 4.0 / np.pi**2
        return (-ddx * py - px * ddy + px * py) * np.cos(z)

    def singular(pts):
        out = np.zeros(len(pts))
        for term in terms:
            ev = en.eval_singular(term, pts)
            phi, _, _ = _cube_edge_phi(ev.r, pts[:, 2])
            out += phi * ev.value
        return out

    def source(pts):
        out = neg_lap_w(pts)
        for term in terms:
            neg_lap_s, _ = _edge_product_neg_helmholtz(term, _cube_edge_phi, pts)
            out += neg_lap_s
        return out

    def exact_u(pts):
        return exact_w(pts) + singular(pts)

    def gamma_n(n):
        n = np.asarray(n)
        return np.where(n == 0, 0.0, 2.0 / np.maximum(n, 1))

    per_term = gamma_n(np.arange(truncation + 1))
    return ProblemSpec(
        name="cube-four-edges", domain=domain, kind="poisson", terms=tuple(terms),
        source=source, exact_u=exact_u, exact_w=exact_w,
        exact_singular=singular,
        exact_coeffs=np.tile(per_term, 4),
        series_gammas=gamma_n,
        references={"gamma_1": 2.0},
    )


def lshape_eigen() -> ProblemSpec:
    """Dirichlet Laplace eigenvalue problem on the L-shaped domain.

    Both leading eigenfunctions are enriched with the corner function
    r^(2/3) sin(2 theta / 3); reference eigenvalues are tabulated benchmark
    values, and the third eigenfunction sin(pi x) sin(pi y) is analytic.
    """
    domain = geo.lshape2d()
    sv = domain.singular_vertices[0]
    iset = en.singular_index_set(sv.bc_pair, sv.frame.omega)
    term = en.SingularTerm(sv.frame, iset.lambdas(sv.frame.omega)[0], iset.trig,
                           rho=1.0, radius=0.5, index=1)

    def source(pts):
        return np.zeros(len(pts))

    return ProblemSpec(
        name="eigen-lshape", domain=domain, kind="eigen", terms=(term,),
        source=source,
        references={"mu_1": 9.6397, "mu_2": 15.1973, "mu_3": 2.0 * np.pi**2},
    )


def _screened_lshape_w(pts):
    x, y = pts[:, 0], pts[:, 1]
    return x * y * (np.exp(x**2 - 1.0) - 1.0) * (np.exp(y**2 - 1.0) - 1.0)


def _screened_lshape_helmholtz_w(pts, a2):
    # -Delta w + A^2 w for w = x y (e^(x^2-1) - 1)(e^(y^2-1) - 1)
    x, y = pts[:, 0], pts[:, 1]
    ex = np.exp(x**2 - 1.0)
    ey = np.exp(y**2 - 1.0)
    lap = ((4.0 * x**3 + 6.0 * x) * ex * y * (ey - 1.0)
           + (4.0 * y**3 + 6.0 * y) * ey * x * (ex - 1.0))
    return -lap + a2 * x * y * (ex - 1.0) * (ey - 1.0)


def helmholtz_lshape_2d(screening: float = np.pi) -> ProblemSpec:
    """Screened Poisson (modified Helmholtz) problem on the L-shaped domain.

    The enrichment carries the exponential damping exp(-A r), which keeps
    the modified singular term in the operator's kernel structure; the
    exact intensity is 1.
    """
    domain = geo.lshape2d()
    sv = domain.singular_vertices[0]
    iset = en.singular_index_set(sv.bc_pair, sv.frame.omega)
    term = en.SingularTerm(sv.frame, iset.lambdas(sv.frame.omega)[0], iset.trig,
                           rho=1.0, radius=0.5, index=1, damping=screening)
    a2 = screening**2

    def source(pts):
        ev = en.eval_singular(term, pts)
        return _screened_lshape_helmholtz_w(pts, a2) - ev.laplacian + a2 * ev.value

    def singular(pts):
        return en.eval_singular(term, pts).value

    def exact_u(pts):
        return _screened_lshape_w(pts) + singular(pts)

    return ProblemSpec(
        name="helmholtz2d", domain=domain, kind="helmholtz", terms=(term,),
        source=source, damping=screening,
        exact_u=exact_u, exact_w=_screened_lshape_w, exact_singular=singular,
        exact_coeffs=np.array([1.0]),
        references={"gamma": 1.0},
    )


def helmholtz_prism_3d(truncation: int = 10, screening: float = np.pi) -> ProblemSpec:
    """Screened Poisson problem on the L-shaped prism with one singular edge.

    The exact edge coefficient is the single mode exp(-sqrt(A^2 + pi^2) r)
    sin(pi z): gamma_1 = 1 and every other series coefficient vanishes.
    """
    domain = geo.lshape_prism()
    sv = domain.singular_vertices[0]
    iset = en.singular_index_set(sv.bc_pair, sv.frame.omega)
    zbasis = en.ZBasis(("dirichlet", "dirichlet"), length=1.0)
    coeff = en.SeriesCoeff(np.zeros(truncation + 1), zbasis)
    term = en.SingularTerm(sv.frame, iset.lambdas(sv.frame.omega)[0], iset.trig,
                           rho=1.0, radius=0.5, index=1, coeff=coeff,
                           damping=screening)
    a2 = screening**2
    xi = np.sqrt(np.pi**2 + a2)

    def phi_partials(rr, zz):
        phi = np.exp(-xi * rr) * np.sin(np.pi * zz)
        phi_r = -xi * phi
        # phi_rr + phi_zz = (xi^2 - pi^2) phi = A^2 phi
        return phi, phi_r, a2 * phi

    def exact_w(pts):
        return _screened_lshape_w(pts[:, :2]) * np.sin(np.pi * pts[:, 2])

    def neg_helmholtz_w(pts):
        xy = pts[:, :2]
        z = pts[:, 2]
        # w = w2(x, y) sin(pi z): the z part adds pi^2 w to -Delta w
        return (_screened_lshape_helmholtz_w(xy, a2) + np.pi**2 * _screened_lshape_w(xy)) \
            * np.sin(np.pi * z)

    def source(pts):
        neg_op_s, _ = _edge_product_neg_helmholtz(term, phi_partials, pts, a2=a2)
        return neg_helmholtz_w(pts) + neg_op_s

    def singular(pts):
        ev = en.eval_singular(replace(term, damping=0.0), pts)
        phi, _, _ = phi_partials(ev.r, pts[:, 2])
        return phi * ev.value

    def exact_u(pts):
        return exact_w(pts) + singular(pts)

    gammas = np.zeros(truncation + 1)
    gammas[1] = 1.0

    def gamma_n(n):
        n = np.asarray(n)
        return np.where(n == 1, 1.0, 0.0)

    return ProblemSpec(
        name="helmholtz3d", domain=domain, kind="helmholtz", terms=(term,),
        source=source, damping=screening,
        exact_u=exact_u, exact_w=exact_w, exact_singular=singular,
        exact_coeffs=gammas, series_gammas=gamma_n,
        references={"gamma_1": 1.0},
    )


def with_aux_terms(problem: ProblemSpec, hidden: Sequence[int] = (10, 10, 10),
                   input_mode: str = "rz") -> ProblemSpec:
    """Swap series/scalar coefficients for auxiliary-network edge functions.

    The source and exact fields are untouched; only the trainable
    representation changes.  Damping moves into the network (the auxiliary
    net can represent any decay itself), so the term's own damping resets
    to zero.
    """
    n_in = 2 if input_mode == "rz" else 3
    widths = (n_in, *hidden, 1)
    terms = tuple(
        replace(t, coeff=en.AuxNetCoeff(widths, input_mode=input_mode), damping=0.0)
        for t in problem.terms
    )
    return replace(problem, terms=terms)


_REGISTRY = {
    "lshape2d": lshape_poisson_2d,
    "square-mixed": mixed_bc_square,
    "lshape-prism": prism_edge_poisson,
    "cube-four-edges": four_edge_cube,
    "eigen-lshape": lshape_eigen,
    "helmholtz2d": helmholtz_lshape_2d,
    "helmholtz3d": helmholtz_prism_3d,
}


def problem_names() -> list[str]:
    return sorted(_REGISTRY)


def get_problem(name: str, truncation: Optional[int] = None) -> ProblemSpec:
    """Look up a registered problem; series problems accept a truncation."""
    if name not in _REGISTRY:
        raise KeyError(f"unknown problem {name!r}; available: {', '.join(problem_names())}")
    factory = _REGISTRY[name]
    if truncation is not None:
        if name not in ("lshape-prism", "cube-four-edges", "helmholtz3d"):
            raise ValueError(f"problem {name!r} has no series truncation")
        return factory(truncation=truncation)
    return factory()


def finite_difference_residual(problem: ProblemSpec, points, h: float = 5e-4) -> np.ndarray:
    """-Delta u (+ A^2 u) - f at the given points, Laplacian by differences.

    Richardson-extrapolated central second differences (steps h and h/2) on
    the exact solution give an O(h^4) Laplacian, so the returned residual
    measures the consistency of the registered exact data and source.
    Callers should keep points a few steps away from the boundary and from
    any interface where the exact solution loses smoothness.
    """
    if problem.exact_u is None:
        raise ValueError(f"problem {problem.name} has no exact solution")
    pts = np.asarray(points, dtype=float)

    def lap(step):
        total = -2.0 * problem.dim * problem.exact_u(pts)
        for d in range(problem.dim):
            shift = np.zeros(pts.shape[1])
            shift[d] = step
            total = total + problem.exact_u(pts + shift) + problem.exact_u(pts - shift)
        return total / step**2

    lap_u = (4.0 * lap(h / 2.0) - lap(h)) / 3.0
    res = -lap_u - np.asarray(problem.source(pts), dtype=float)
    if problem.damping > 0.0:
        res = res + problem.damping**2 * problem.exact_u(pts)
    return res
