"""Closed-form singular function machinery.

Near a corner with interior angle omega the solution behaves like
r^lambda * trig(lambda*theta) with lambda = i*pi/omega; this module knows
which (lambda, trig) occur for each boundary-condition pair, evaluates the
singular functions, their duals r^{-lambda} trig(lambda*theta), the C^2
cutoff that localises them, the z-direction bases for edge (3D) problems,
and exact gradients / Laplacians of all enriched products.  Everything here
is a pure function of its arguments.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import PolarFrame, radial_unit_vectors, to_local_polar_batch

R_CLAMP = 1e-12  # guards r^(lambda-1) factors at the vertex itself

_BC = ("dirichlet", "neumann")


def _check_bc_pair(bc_pair):
    if len(bc_pair) != 2 or bc_pair[0] not in _BC or bc_pair[1] not in _BC:
        raise ValueError(f"boundary pair must name dirichlet/neumann kinds, got {bc_pair!r}")


def _trig_values(trig: str, x: np.ndarray, order: int) -> np.ndarray:
    """d^order/dx^order of sin(x) or cos(x)."""
    shift = order * 0.5 * np.pi
    if trig == "sin":
        return np.sin(x + shift)
    if trig == "cos":
        return np.cos(x + shift)
    raise ValueError(f"trig must be sin or cos, got {trig!r}")


# -- angular eigenpairs and singular exponents ------------------------------


@dataclass(frozen=True)
class EigenPair:
    """k-th eigenpair of -d^2/dtheta^2 on (0, omega) with the edge conditions."""

    k: int
    lam: float
    trig: str


def eigen_pairs(bc_pair, omega: float, k_max: int) -> list[EigenPair]:
    """First k_max angular eigenpairs for the given (theta=0, theta=omega) pair.

    The trig kind follows the condition on the theta=0 edge: a Dirichlet
    edge forces sine (vanishing value), a Neumann edge cosine (vanishing
    angular derivative).  Mixed pairs have exponents (k-1/2)*pi/omega, equal
    pairs k*pi/omega (Neumann/Neumann starts at the constant, lambda=0).
    """
    _check_bc_pair(bc_pair)
    if not 0.0 < omega <= 2.0 * np.pi:
        raise ValueError(f"need omega in (0, 2*pi], got {omega}")
    if k_max < 1:
        raise ValueError("need k_max >= 1")
    b0, b1 = bc_pair
    trig = "sin" if b0 == "dirichlet" else "cos"
    pairs = []
    for k in range(1, k_max + 1):
        if b0 == b1:
            i = float(k) if b0 == "dirichlet" else float(k - 1)
        else:
            i = k - 0.5
        pairs.append(EigenPair(k, i * np.pi / omega, trig))
    return pairs


@dataclass(frozen=True)
class SingularIndexSet:
    """Indices i with exponent lambda = i*pi/omega in (0, 1)."""

    indices: tuple[float, ...]
    trig: str

    def lambdas(self, omega: float) -> tuple[float, ...]:
        return tuple(i * np.pi / omega for i in self.indices)


def singular_index_set(bc_pair, omega: float) -> SingularIndexSet:
    """Indices of the singular corner modes (exponent strictly below one).

    Empty for corners that are not singular: same-type conditions need
    omega > pi, mixed conditions omega > pi/2.  Mixed corners with
    omega > 3*pi/2 carry two terms (i = 1/2 and 3/2).
    """
    _check_bc_pair(bc_pair)
    if not 0.0 < omega <= 2.0 * np.pi:
        raise ValueError(f"need omega in (0, 2*pi], got {omega}")
    b0, b1 = bc_pair
    trig = "sin" if b0 == "dirichlet" else "cos"
    first = 0.5 if b0 != b1 else 1.0
    indices = []
    i = first
    while i * np.pi / omega < 1.0:
        indices.append(i)
        i += 1.0
    return SingularIndexSet(tuple(indices), trig)


# -- cutoff ------------------------------------------------------------------


def _check_cutoff(rho: float, radius: float):
    if not 0.0 < rho <= 2.0:
        raise ValueError(f"cutoff shape parameter rho must lie in (0, 2], got {rho}")
    if radius <= 0.0:
        raise ValueError(f"cutoff reference radius must be positive, got {radius}")


def cutoff_profile(rho: float, radius: float, r: np.ndarray):
    """Cutoff value and its first two radial derivatives, vectorised in r.

    The profile is 1 for r < rho*R/2, a quintic in t = 4r/(rho*R) - 3 on
    [rho*R/2, rho*R), and 0 beyond; it is C^2 at both knots.
    """
    _check_cutoff(rho, radius)
    r = np.asarray(r, dtype=float)
    rr = rho * radius
    t = 4.0 * r / rr - 3.0
    mid = (r >= 0.5 * rr) & (r < rr)
    tm = np.where(mid, t, 0.0)
    eta = np.where(
        r < 0.5 * rr,
        1.0,
        np.where(
            mid,
            (15.0 / 16.0) * (8.0 / 15.0 - tm + (2.0 / 3.0) * tm**3 - 0.2 * tm**5),
            0.0,
        ),
    )
    scale = 4.0 / rr
    d1 = np.where(mid, -(15.0 / 16.0) * (1.0 - tm**2) ** 2 * scale, 0.0)
    d2 = np.where(mid, (15.0 / 16.0) * (4.0 * tm - 4.0 * tm**3) * scale**2, 0.0)
    return eta, d1, d2


def eval_cutoff(cutoff: tuple[float, float], r, order: int = 0):
    """Cutoff (order=0) or its first/second radial derivative at radius r."""
    if order not in (0, 1, 2):
        raise ValueError(f"order must be 0, 1 or 2, got {order}")
    scalar = np.isscalar(r)
    out = cutoff_profile(cutoff[0], cutoff[1], np.atleast_1d(r))[order]
    return float(out[0]) if scalar else out


# -- z-direction bases for edge problems -------------------------------------


@dataclass(frozen=True)
class ZBasis:
    """Eigenbasis of -d^2/dz^2 on (offset, offset + length) with cap conditions.

    Z_n and frequencies xi_n follow the cap pair: equal pairs use
    xi_n = n*pi/length (sines for Dirichlet caps with Z_0 = 0, cosines for
    Neumann caps with Z_0 = 1), mixed pairs xi_n = (n-1/2)*pi/length with
    Z_0 = 0.  The trig kind follows the condition at the offset end.
    """

    bc_pair: tuple[str, str]
    length: float
    offset: float = 0.0

    def __post_init__(self):
        _check_bc_pair(self.bc_pair)
        if self.length <= 0.0:
            raise ValueError("basis interval length must be positive")

    @property
    def trig(self) -> str:
        return "sin" if self.bc_pair[0] == "dirichlet" else "cos"

    def frequency(self, n: int) -> float:
        if n < 0:
            raise ValueError("mode index must be nonnegative")
        if n == 0:
            return 0.0
        if self.bc_pair[0] == self.bc_pair[1]:
            return n * np.pi / self.length
        return (n - 0.5) * np.pi / self.length

    def eval(self, n: int, z, order: int = 0):
        """d^order/dz^order of Z_n at z (vectorised)."""
        if order not in (0, 1, 2):
            raise ValueError(f"order must be 0, 1 or 2, got {order}")
        z = np.asarray(z, dtype=float)
        if n == 0:
            if self.bc_pair == ("neumann", "neumann") and order == 0:
                return np.ones_like(z)
            return np.zeros_like(z)
        xi = self.frequency(n)
        return xi**order * _trig_values(self.trig, xi * (z - self.offset), order)


# -- enrichment terms ---------------------------------------------------------


@dataclass
class ScalarCoeff:
    """A single trainable stress intensity factor."""

    value: float = 1.0


@dataclass
class SeriesCoeff:
    """Truncated edge expansion gamma_0..gamma_N over a z-basis."""

    values: np.ndarray
    zbasis: ZBasis

    def __post_init__(self):
        self.values = np.atleast_1d(np.asarray(self.values, dtype=float))

    @property
    def truncation(self) -> int:
        return len(self.values) - 1


@dataclass
class AuxNetCoeff:
    """Edge flux function represented by an auxiliary network.

    input_mode "rz" feeds the net (r, z) relative to the term's own edge;
    "xyz" feeds global coordinates.
    """

    widths: tuple[int, ...]
    input_mode: str = "rz"

    def __post_init__(self):
        if self.input_mode not in ("rz", "xyz"):
            raise ValueError(f"input_mode must be rz or xyz, got {self.input_mode!r}")
        if self.widths[0] != (2 if self.input_mode == "rz" else 3) or self.widths[-1] != 1:
            raise ValueError("auxiliary net widths must map its input dimension to one output")


@dataclass
class SingularTerm:
    """One enrichment term eta_rho(r) * r^lambda * trig(lambda*theta).

    damping A > 0 multiplies the term by exp(-A r) (screened problems);
    coeff carries the current coefficient(s): a scalar gamma, a truncated
    series over a ZBasis, or an auxiliary-network reference.
    """

    frame: PolarFrame
    lam: float
    trig: str
    rho: float
    radius: float
    index: float
    coeff: object = field(default_factory=ScalarCoeff)
    damping: float = 0.0

    def __post_init__(self):
        _check_cutoff(self.rho, self.radius)
        if self.trig not in ("sin", "cos"):
            raise ValueError(f"trig must be sin or cos, got {self.trig!r}")
        if not 0.0 < self.lam < 1.0:
            raise ValueError(f"singular exponent must lie in (0, 1), got {self.lam}")
        if self.damping < 0.0:
            raise ValueError("damping must be nonnegative")

    @property
    def cutoff(self) -> tuple[float, float]:
        return (self.rho, self.radius)

    @property
    def support_radius(self) -> float:
        return self.rho * self.radius


def check_disjoint_supports(terms: Sequence[SingularTerm]):
    """Reject cutoff balls of distinct vertices that touch or overlap."""
    for a in range(len(terms)):
        for b in range(a + 1, len(terms)):
            va = np.asarray(terms[a].frame.vertex)
            vb = np.asarray(terms[b].frame.vertex)
            dist = float(np.linalg.norm(va - vb))
            if dist == 0.0:
                continue  # two singular modes of the same corner share a ball
            if dist < terms[a].support_radius + terms[b].support_radius:
                raise ValueError(
                    f"cutoff supports at {terms[a].frame.vertex} and "
                    f"{terms[b].frame.vertex} overlap; shrink rho or R"
                )


# -- evaluation ---------------------------------------------------------------


@dataclass(frozen=True)
class SingularEval:
    """Pointwise data of one enriched product g(r) * r^lambda * trig(lambda*theta).

    g = eta (Poisson) or exp(-A r) * eta (damped).  laplacian is the plain
    2D Laplacian of the product; radial is its d/dr (used for products with
    r-dependent edge functions); r and theta are the local coordinates.
    """

    value: np.ndarray
    gradient: np.ndarray
    laplacian: np.ndarray
    radial: np.ndarray
    r: np.ndarray
    theta: np.ndarray


def _damped_profile(term: SingularTerm, r: np.ndarray, decay: Optional[float] = None):
    """g = exp(-a r) * eta and its first two radial derivatives."""
    eta, d1, d2 = cutoff_profile(term.rho, term.radius, r)
    a = term.damping if decay is None else decay
    if a == 0.0:
        return eta, d1, d2
    e = np.exp(-a * r)
    return e * eta, e * (d1 - a * eta), e * (d2 - 2.0 * a * d1 + a * a * eta)


def eval_singular(term: SingularTerm, points) -> SingularEval:
    """Value, spatial gradient, and Laplacian of the (damped) enriched product.

    Everything vanishes outside the cutoff support; with no damping the
    Laplacian also vanishes identically inside r < rho*R/2 where the cutoff
    is constant and the singular function harmonic.
    """
    pts = np.asarray(points, dtype=float)
    r, theta = to_local_polar_batch(term.frame, pts)
    g, g1, g2 = _damped_profile(term, r)
    lam = term.lam
    rs = np.maximum(r, R_CLAMP)
    rl = rs**lam
    rlm1 = rs ** (lam - 1.0)
    tv = _trig_values(term.trig, lam * theta, 0)
    td = _trig_values(term.trig, lam * theta, 1)
    value = g * rl * tv
    radial = (g1 * rl + lam * g * rlm1) * tv
    angular = lam * g * rlm1 * td
    er, et = radial_unit_vectors(term.frame, pts)
    gradient = radial[:, None] * er + angular[:, None] * et
    laplacian = (g2 * rl + (2.0 * lam + 1.0) * g1 * rlm1) * tv
    return SingularEval(value, gradient, laplacian, radial, r, theta)


def eval_dual_singular(term: SingularTerm, points) -> np.ndarray:
    """Dual singular function r^{-lambda} * trig(lambda*theta)."""
    pts = np.asarray(points, dtype=float)
    r, theta = to_local_polar_batch(term.frame, pts)
    if np.any(r < R_CLAMP):
        raise ValueError("dual singular function evaluated at the vertex")
    return r ** (-term.lam) * _trig_values(term.trig, term.lam * theta, 0)


def dual_product_laplacian(term: SingularTerm, points) -> np.ndarray:
    """Plain Laplacian of eta_rho * r^{-lambda} * trig, supported on the annulus.

    The dual function is harmonic away from the vertex, so only cutoff
    derivatives contribute: trig * (eta'' r^{-lambda} + (1-2 lambda) eta' r^{-lambda-1}).
    """
    pts = np.asarray(points, dtype=float)
    r, theta = to_local_polar_batch(term.frame, pts)
    eta, d1, d2 = cutoff_profile(term.rho, term.radius, r)
    rs = np.maximum(r, R_CLAMP)
    lam = term.lam
    tv = _trig_values(term.trig, lam * theta, 0)
    return (d2 * rs ** (-lam) + (1.0 - 2.0 * lam) * d1 * rs ** (-lam - 1.0)) * tv


def mode_decay(zbasis: ZBasis, n: int, damping: float = 0.0) -> float:
    """Radial decay rate of mode n: sqrt(xi_n^2 + A^2)."""
    return float(np.hypot(zbasis.frequency(n), damping))


def edge_mode_tables(
    term: SingularTerm, zbasis: ZBasis, truncation: int, points
) -> tuple[np.ndarray, np.ndarray]:
    """Per-mode values and 3D Laplacians of the truncated edge enrichment.

    Column n holds the mode multiplying gamma_n: (1/2) Z_0(z) eta s for
    n = 0 and exp(-decay_n r) Z_n(z) eta s for n >= 1, where decay_n is
    sqrt(xi_n^2 + A^2).  Returns (values, laplacians), each of shape
    (len(points), truncation + 1); the residual contribution is then the
    matrix product laplacians @ gamma.
    """
    pts = np.asarray(points, dtype=float)
    if pts.shape[1] != 3:
        raise ValueError("edge enrichment needs 3D points")
    r, theta = to_local_polar_batch(term.frame, pts)
    z = pts[:, 2]
    eta, d1, d2 = cutoff_profile(term.rho, term.radius, r)
    lam = term.lam
    rs = np.maximum(r, R_CLAMP)
    rl = rs**lam
    rlm1 = rs ** (lam - 1.0)
    tv = _trig_values(term.trig, lam * theta, 0)
    n_pts = len(pts)
    values = np.zeros((n_pts, truncation + 1))
    laps = np.zeros((n_pts, truncation + 1))
    # n = 0: no radial factor; Z_0 is constant (1 or 0), so only the 2D
    # Laplacian of eta*s survives.
    z0 = zbasis.eval(0, z)
    values[:, 0] = 0.5 * z0 * eta * rl * tv
    laps[:, 0] = 0.5 * z0 * (d2 * rl + (2.0 * lam + 1.0) * d1 * rlm1) * tv
    for n in range(1, truncation + 1):
        xi = zbasis.frequency(n)
        dec = mode_decay(zbasis, n, term.damping)
        g, g1, g2 = _damped_profile(term, r, decay=dec)
        zn = zbasis.eval(n, z)
        col = g * rl * tv * zn
        values[:, n] = col
        laps[:, n] = zn * (g2 * rl + (2.0 * lam + 1.0) * g1 * rlm1) * tv - xi * xi * col
    return values, laps


@dataclass(frozen=True)
class PhiEval:
    """Truncated edge function and its (r, z) partials up to second order."""

    value: np.ndarray
    dr: np.ndarray
    dz: np.ndarray
    drr: np.ndarray
    dzz: np.ndarray
    drz: np.ndarray


def truncated_phi(
    gammas, zbasis: ZBasis, r, z, damping: float = 0.0, truncation: Optional[int] = None
) -> PhiEval:
    """Evaluate (1/2) g_0 Z_0(z) + sum_n g_n exp(-decay_n r) Z_n(z) and partials.

    decay_n = sqrt(xi_n^2 + A^2); the n = 0 term carries no radial factor.
    """
    gam = np.atleast_1d(np.asarray(gammas, dtype=float))
    n_top = len(gam) - 1 if truncation is None else min(truncation, len(gam) - 1)
    r = np.asarray(r, dtype=float)
    z = np.asarray(z, dtype=float)
    shape = np.broadcast_shapes(r.shape, z.shape)
    out = [np.zeros(shape) for _ in range(6)]
    out[0] += 0.5 * gam[0] * zbasis.eval(0, z)
    for n in range(1, n_top + 1):
        dec = mode_decay(zbasis, n, damping)
        e = gam[n] * np.exp(-dec * r)
        z0, z1, z2 = (zbasis.eval(n, z, order=k) for k in (0, 1, 2))
        out[0] += e * z0
        out[1] += -dec * e * z0
        out[2] += e * z1
        out[3] += dec * dec * e * z0
        out[4] += e * z2
        out[5] += -dec * e * z1
    return PhiEval(*out)


def enriched_source(source, terms: Sequence[SingularTerm], points) -> np.ndarray:
    """Modified source: f plus every term's Laplacian contribution.

    source may be a callable on points or a precomputed array.  Scalar terms
    add gamma * Lap(product); series terms add the mode table contracted
    with their coefficients.  Terms with auxiliary-network coefficients are
    rejected: their contribution depends on network parameters and is
    assembled inside the loss instead.
    """
    pts = np.asarray(points, dtype=float)
    f = np.array(source(pts) if callable(source) else source, dtype=float)
    for term in terms:
        coeff = term.coeff
        if isinstance(coeff, ScalarCoeff):
            f = f + coeff.value * eval_singular(term, pts).laplacian
        elif isinstance(coeff, SeriesCoeff):
            _, laps = edge_mode_tables(term, coeff.zbasis, coeff.truncation, pts)
            f = f + laps @ coeff.values
        else:
            raise ValueError(
                "auxiliary-network coefficients have no closed-form source contribution"
            )
    return f
