"""Domains, boundary decomposition, local polar frames and seeded samplers.

A domain is a simple polygon (optionally extruded to a prism) whose boundary
is split into Dirichlet and Neumann segments.  Each singular vertex carries a
local polar frame (r, theta) with theta = 0 along one boundary edge and
theta = omega along the other; frames may be oriented clockwise when the
domain lies on that side of the base edge.

Random sampling is reproducible: every sample category (interior, Dirichlet
boundary, Neumann boundary) draws from its own PCG64 stream derived from the
set seed via numpy's SeedSequence spawning, so changing one count never
perturbs the other streams.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

TWO_PI = 2.0 * np.pi

# Stream indices for per-category generators.
_STREAM_INTERIOR = 0
_STREAM_DIRICHLET = 1
_STREAM_NEUMANN = 2
_STREAM_VALIDATION = 3


def category_rng(seed: int, stream: int) -> np.random.Generator:
    """PCG64 generator for one sample category of one run seed."""
    root = np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.PCG64(root.spawn(stream + 1)[stream]))


@dataclass(frozen=True)
class PolarFrame:
    """Local polar coordinates at a (singular) vertex.

    theta is measured from the boundary edge at ``base_angle``; when
    ``counterclockwise`` is False the angle grows clockwise instead, which is
    how frames whose interior lies clockwise of the base edge are expressed.
    """

    vertex: tuple[float, float]
    base_angle: float
    omega: float
    counterclockwise: bool = True

    def __post_init__(self):
        if not 0.0 < self.omega <= TWO_PI:
            raise ValueError(f"interior angle must lie in (0, 2*pi], got {self.omega}")

    @property
    def orient(self) -> float:
        return 1.0 if self.counterclockwise else -1.0


def to_local_polar(frame: PolarFrame, point) -> tuple[float, float]:
    """Map a point to the frame's (r, theta); theta reported in [0, 2*pi).

    At the vertex itself (r = 0) theta is 0 by convention.
    """
    r, theta = to_local_polar_batch(frame, np.asarray(point, dtype=float).reshape(1, -1))
    return float(r[0]), float(theta[0])


def to_local_polar_batch(frame: PolarFrame, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised ``to_local_polar`` over an (n, 2) or (n, 3) array (z ignored)."""
    pts = np.asarray(points, dtype=float)
    dx = pts[:, 0] - frame.vertex[0]
    dy = pts[:, 1] - frame.vertex[1]
    r = np.hypot(dx, dy)
    phi = np.arctan2(dy, dx)
    theta = np.mod(frame.orient * (phi - frame.base_angle), TWO_PI)
    theta = np.where(r == 0.0, 0.0, theta)
    return r, theta


def from_local_polar(frame: PolarFrame, r, theta) -> np.ndarray:
    """Inverse of ``to_local_polar_batch``; returns (n, 2) global points."""
    r = np.asarray(r, dtype=float)
    phi = frame.base_angle + frame.orient * np.asarray(theta, dtype=float)
    return np.stack(
        [frame.vertex[0] + r * np.cos(phi), frame.vertex[1] + r * np.sin(phi)], axis=-1
    )


def radial_unit_vectors(frame: PolarFrame, points: np.ndarray):
    """Unit vectors e_r and e_theta (direction of increasing local theta)."""
    pts = np.asarray(points, dtype=float)
    dx = pts[:, 0] - frame.vertex[0]
    dy = pts[:, 1] - frame.vertex[1]
    r = np.hypot(dx, dy)
    safe = np.maximum(r, 1e-300)
    er = np.stack([dx / safe, dy / safe], axis=-1)
    et = frame.orient * np.stack([-dy / safe, dx / safe], axis=-1)
    return er, et


@dataclass(frozen=True)
class BoundarySegment:
    start: tuple[float, float]
    end: tuple[float, float]
    bc_kind: str  # "dirichlet" | "neumann"
    outward_normal: tuple[float, float] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.bc_kind not in ("dirichlet", "neumann"):
            raise ValueError(f"bc_kind must be dirichlet or neumann, got {self.bc_kind!r}")
        tangent = np.asarray(self.end, float) - np.asarray(self.start, float)
        length = np.linalg.norm(tangent)
        if length == 0.0:
            raise ValueError("degenerate boundary segment")
        if self.outward_normal is None:
            # Counterclockwise polygon: outward normal is the tangent rotated -90 deg.
            t = tangent / length
            object.__setattr__(self, "outward_normal", (float(t[1]), float(-t[0])))
        n = np.asarray(self.outward_normal, float)
        if abs(np.linalg.norm(n) - 1.0) > 1e-12 or abs(np.dot(n, tangent)) > 1e-12 * length:
            raise ValueError("outward normal must be unit and orthogonal to the segment")

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.asarray(self.end, float) - np.asarray(self.start, float)))


def polygon_area(vertices: np.ndarray) -> float:
    """Signed shoelace area (positive for counterclockwise order)."""
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


@dataclass(frozen=True)
class SingularVertex:
    """A flagged corner: local frame plus the boundary-condition pair.

    ``bc_pair`` names the condition on the theta=0 edge and on the
    theta=omega edge, in that order ("dirichlet"/"neumann").
    """

    frame: PolarFrame
    bc_pair: tuple[str, str]

    def __post_init__(self):
        for kind in self.bc_pair:
            if kind not in ("dirichlet", "neumann"):
                raise ValueError(f"unknown boundary kind {kind!r}")


@dataclass(frozen=True)
class Extrusion:
    z_min: float
    z_max: float
    bc_pair: tuple[str, str]  # condition at z_min, condition at z_max

    def __post_init__(self):
        if not self.z_max > self.z_min:
            raise ValueError("extrusion needs z_max > z_min")
        for kind in self.bc_pair:
            if kind not in ("dirichlet", "neumann"):
                raise ValueError(f"unknown boundary kind {kind!r}")

    @property
    def length(self) -> float:
        return self.z_max - self.z_min


class DomainSpec:
    """Polygonal domain (or polygon x interval prism) with labelled boundary."""

    def __init__(
        self,
        name: str,
        polygon: Sequence[tuple[float, float]],
        segments: Sequence[BoundarySegment],
        singular_vertices: Sequence[SingularVertex] = (),
        extrusion: Optional[Extrusion] = None,
        area: Optional[float] = None,
    ):
        self.name = name
        self.polygon = np.asarray(polygon, dtype=float)
        if self.polygon.shape[0] < 3:
            raise ValueError("polygon needs at least 3 vertices")
        signed = polygon_area(self.polygon)
        if signed <= 0.0:
            raise ValueError("polygon vertices must be in counterclockwise order")
        if _polygon_self_intersects(self.polygon):
            raise ValueError("polygon must be simple (non-self-intersecting)")
        self.segments = list(segments)
        if not any(s.bc_kind == "dirichlet" for s in self.segments):
            raise ValueError("Dirichlet part of the boundary must be nonempty")
        self.singular_vertices = list(singular_vertices)
        self.extrusion = extrusion
        self._base_area = float(area) if area is not None else signed
        lengths = [s.length for s in self.segments]
        perimeter = sum(lengths)
        poly_perimeter = float(
            np.sum(np.linalg.norm(self.polygon - np.roll(self.polygon, -1, axis=0), axis=1))
        )
        if abs(perimeter - poly_perimeter) > 1e-9 * max(1.0, poly_perimeter):
            raise ValueError("boundary segments do not cover the polygon boundary")
        from .enrichment import singular_index_set  # local import to avoid a cycle

        for sv in self.singular_vertices:
            if not singular_index_set(sv.bc_pair, sv.frame.omega).indices:
                raise ValueError(
                    f"vertex {sv.frame.vertex} with angle {sv.frame.omega:.4f} and "
                    f"conditions {sv.bc_pair} is not a singular corner"
                )

    # -- measures ---------------------------------------------------------

    @property
    def dim(self) -> int:
        return 3 if self.extrusion is not None else 2

    @property
    def volume(self) -> float:
        if self.extrusion is None:
            return self._base_area
        return self._base_area * self.extrusion.length

    def _lateral_faces(self):
        """(segment, bc, measure) triples for all 2D/3D boundary pieces."""
        faces = []
        lz = self.extrusion.length if self.extrusion is not None else 1.0
        for seg in self.segments:
            faces.append(("lateral", seg, seg.bc_kind, seg.length * lz))
        if self.extrusion is not None:
            faces.append(("cap_lo", None, self.extrusion.bc_pair[0], self._base_area))
            faces.append(("cap_hi", None, self.extrusion.bc_pair[1], self._base_area))
        return faces

    def boundary_measure(self, bc_kind: str) -> float:
        return sum(m for _, _, kind, m in self._lateral_faces() if kind == bc_kind)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        lo = self.polygon.min(axis=0)
        hi = self.polygon.max(axis=0)
        if self.extrusion is not None:
            lo = np.append(lo, self.extrusion.z_min)
            hi = np.append(hi, self.extrusion.z_max)
        return lo, hi

    # -- membership -------------------------------------------------------

    def contains(self, point) -> bool:
        pts = np.asarray(point, dtype=float).reshape(1, -1)
        return bool(self.contains_batch(pts)[0])

    def contains_batch(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        inside = _points_in_polygon(self.polygon, pts[:, :2])
        if self.extrusion is not None:
            if pts.shape[1] < 3:
                raise ValueError("prism membership needs 3D points")
            inside &= (pts[:, 2] > self.extrusion.z_min) & (pts[:, 2] < self.extrusion.z_max)
        return inside


def contains(domain: DomainSpec, point) -> bool:
    """True iff the point lies strictly inside the domain."""
    return domain.contains(point)


def _points_in_polygon(polygon: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Strict interior test by even-odd ray crossing (boundary counts as outside)."""
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    on_edge = np.zeros(len(pts), dtype=bool)
    n = len(polygon)
    for i in range(n):
        x1, y1 = polygon[i]
        x2, y2 = polygon[(i + 1) % n]
        # Points exactly on the closed edge are not interior.
        cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
        within = (
            (np.minimum(x1, x2) - 1e-14 <= x)
            & (x <= np.maximum(x1, x2) + 1e-14)
            & (np.minimum(y1, y2) - 1e-14 <= y)
            & (y <= np.maximum(y1, y2) + 1e-14)
        )
        on_edge |= within & (np.abs(cross) <= 1e-14 * max(1.0, abs(x2 - x1) + abs(y2 - y1)))
        if y1 != y2:  # horizontal edges never cross a horizontal ray
            crosses = ((y1 > y) != (y2 > y)) & (x < x1 + (y - y1) * (x2 - x1) / (y2 - y1))
            inside ^= crosses
    return inside & ~on_edge


def _polygon_self_intersects(polygon: np.ndarray) -> bool:
    n = len(polygon)
    segs = [(polygon[i], polygon[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue  # shared endpoint with a neighbour
            if _segments_cross(*segs[i], *segs[j]):
                return True
    return False


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


# -- sampling --------------------------------------------------------------


def sample_interior(domain: DomainSpec, n: int, seed: int) -> np.ndarray:
    rng = category_rng(seed, _STREAM_INTERIOR)
    return sample_interior_rng(domain, n, rng)


def sample_interior_rng(domain: DomainSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. uniform points by rejection from the bounding box."""
    if n < 1:
        raise ValueError("need n >= 1")
    lo, hi = domain.bounding_box()
    dim = len(lo)
    out = np.empty((n, dim))
    got = 0
    drawn = 0
    while got < n:
        batch = max(2 * (n - got), 256)
        cand = rng.uniform(lo, hi, size=(batch, dim))
        keep = cand[domain.contains_batch(cand)]
        drawn += batch
        if drawn > 1000 * n and got < drawn * 1e-3:
            raise RuntimeError("rejection acceptance ratio below 1e-3; degenerate domain")
        take = min(len(keep), n - got)
        out[got : got + take] = keep[:take]
        got += take
    return out


def sample_boundary(
    domain: DomainSpec, n_d: int, n_n: int, seed: int
) -> tuple[tuple[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]:
    """Uniform samples on the Dirichlet / Neumann boundary parts.

    Returns ((dirichlet points, normals), (neumann points, normals)).
    Points are chosen by measure-weighted face selection, then uniformly on
    the face; each point carries its face's outward unit normal.
    """
    if n_d < 1:
        raise ValueError("need n_d >= 1 (Dirichlet part is nonempty)")
    if n_n < 0:
        raise ValueError("need n_n >= 0")
    if n_n > 0 and domain.boundary_measure("neumann") == 0.0:
        raise ValueError("Neumann samples requested but the Neumann part is empty")
    d_pts = _sample_on_faces(domain, "dirichlet", n_d, category_rng(seed, _STREAM_DIRICHLET))
    if n_n > 0:
        n_pts = _sample_on_faces(domain, "neumann", n_n, category_rng(seed, _STREAM_NEUMANN))
    else:
        dim = domain.dim
        n_pts = (np.zeros((0, dim)), np.zeros((0, dim)))
    return d_pts, n_pts


def _sample_on_faces(domain, bc_kind, n, rng):
    faces = [f for f in domain._lateral_faces() if f[2] == bc_kind]
    measures = np.array([f[3] for f in faces])
    cum = np.cumsum(measures)
    picks = np.searchsorted(cum, rng.random(n) * cum[-1], side="right")
    picks = np.minimum(picks, len(faces) - 1)
    dim = domain.dim
    pts = np.empty((n, dim))
    normals = np.empty((n, dim))
    for idx, (kind, seg, _, _) in enumerate(faces):
        mask = picks == idx
        m = int(mask.sum())
        if m == 0:
            continue
        if kind == "lateral":
            t = rng.random(m)
            a = np.asarray(seg.start)
            b = np.asarray(seg.end)
            xy = a[None, :] + t[:, None] * (b - a)[None, :]
            nrm2 = np.asarray(seg.outward_normal)
            if dim == 2:
                pts[mask] = xy
                normals[mask] = nrm2
            else:
                z = rng.uniform(domain.extrusion.z_min, domain.extrusion.z_max, m)
                pts[mask] = np.column_stack([xy, z])
                normals[mask] = np.concatenate([nrm2, [0.0]])
        else:
            xy = sample_interior_rng(_base_of(domain), m, rng)
            z = domain.extrusion.z_min if kind == "cap_lo" else domain.extrusion.z_max
            sign = -1.0 if kind == "cap_lo" else 1.0
            pts[mask] = np.column_stack([xy, np.full(m, z)])
            normals[mask] = np.array([0.0, 0.0, sign])
    return pts, normals


def _base_of(domain: DomainSpec) -> DomainSpec:
    if domain.extrusion is None:
        return domain
    base = DomainSpec.__new__(DomainSpec)
    base.name = domain.name + "_base"
    base.polygon = domain.polygon
    base.segments = domain.segments
    base.singular_vertices = domain.singular_vertices
    base.extrusion = None
    base._base_area = domain._base_area
    return base


@dataclass(frozen=True)
class SampleSet:
    """One run's fixed collocation points and the measures weighting them."""

    interior: np.ndarray
    dirichlet: np.ndarray
    dirichlet_normals: np.ndarray
    neumann: np.ndarray
    neumann_normals: np.ndarray
    measures: tuple[float, float, float]  # (|Omega|, |Gamma_D|, |Gamma_N|)
    seed: int

    @property
    def n_interior(self) -> int:
        return len(self.interior)

    @property
    def n_dirichlet(self) -> int:
        return len(self.dirichlet)

    @property
    def n_neumann(self) -> int:
        return len(self.neumann)


def build_samples(domain: DomainSpec, n_interior: int, n_d: int, n_n: int, seed: int) -> SampleSet:
    interior = sample_interior(domain, n_interior, seed)
    (d_pts, d_nrm), (n_pts, n_nrm) = sample_boundary(domain, n_d, n_n, seed)
    measures = (
        domain.volume,
        domain.boundary_measure("dirichlet"),
        domain.boundary_measure("neumann"),
    )
    return SampleSet(interior, d_pts, d_nrm, n_pts, n_nrm, measures, int(seed))


def split_boundary_counts(domain: DomainSpec, n_boundary: int) -> tuple[int, int]:
    """Split a total boundary budget proportionally to |Gamma_D| vs |Gamma_N|."""
    gd = domain.boundary_measure("dirichlet")
    gn = domain.boundary_measure("neumann")
    if gn == 0.0:
        return n_boundary, 0
    n_n = int(round(n_boundary * gn / (gd + gn)))
    n_n = min(max(n_n, 1), n_boundary - 1)
    return n_boundary - n_n, n_n


def validation_points(domain: DomainSpec, n: int, seed: int) -> np.ndarray:
    """Held-out interior points drawn from a stream distinct from training ones."""
    rng = category_rng(seed, _STREAM_VALIDATION)
    return sample_interior_rng(domain, n, rng)


# -- built-in domains -------------------------------------------------------


def _segments_all(polygon, kind):
    n = len(polygon)
    return [BoundarySegment(tuple(polygon[i]), tuple(polygon[(i + 1) % n]), kind) for i in range(n)]


def lshape2d() -> DomainSpec:
    """(-1,1)^2 minus the closed quadrant [0,1) x (-1,0]; Dirichlet everywhere.

    The reentrant corner sits at the origin with the theta=0 edge along the
    positive x axis and interior angle 3*pi/2.
    """
    polygon = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (0.0, -1.0)]
    frame = PolarFrame((0.0, 0.0), 0.0, 1.5 * np.pi)
    sv = SingularVertex(frame, ("dirichlet", "dirichlet"))
    return DomainSpec("lshape2d", polygon, _segments_all(polygon, "dirichlet"), [sv], area=3.0)


def square_mixed() -> DomainSpec:
    """Unit square with a Neumann half edge {(x,0): 0<x<1/2}, Dirichlet rest.

    The boundary condition changes type at (1/2, 0); with theta measured from
    the edge running towards (1, 0), the theta=0 edge is Dirichlet and the
    theta=pi edge is Neumann.
    """
    segments = [
        BoundarySegment((0.0, 0.0), (0.5, 0.0), "neumann"),
        BoundarySegment((0.5, 0.0), (1.0, 0.0), "dirichlet"),
        BoundarySegment((1.0, 0.0), (1.0, 1.0), "dirichlet"),
        BoundarySegment((1.0, 1.0), (0.0, 1.0), "dirichlet"),
        BoundarySegment((0.0, 1.0), (0.0, 0.0), "dirichlet"),
    ]
    polygon = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
    frame = PolarFrame((0.5, 0.0), 0.0, np.pi)
    sv = SingularVertex(frame, ("dirichlet", "neumann"))
    return DomainSpec("square_mixed", polygon, segments, [sv], area=1.0)


def lshape_prism() -> DomainSpec:
    """The L-shape extruded to z in (-1, 1) with Dirichlet conditions all over."""
    base = lshape2d()
    return DomainSpec(
        "lshape_prism",
        base.polygon,
        base.segments,
        base.singular_vertices,
        extrusion=Extrusion(-1.0, 1.0, ("dirichlet", "dirichlet")),
        area=3.0,
    )


def cube_mixed_edges() -> DomainSpec:
    """(-pi,pi)^3 with four singular vertical edges where the condition flips.

    Side faces are split at the edge midpoints v1=(0,-pi), v2=(pi,0),
    v3=(0,pi), v4=(-pi,0); the half faces
    {y=-pi, x<0}, {x=-pi, y<0}, {y=pi, x>0}, {x=pi, y>0} are Neumann and the
    other four halves Dirichlet, so the condition changes type across every
    v_j.  Both z caps are Neumann.  Frames are oriented clockwise so that the
    theta=0 edge of v1, v3 is its Neumann half (cosine-type singular
    functions) and of v2, v4 its Dirichlet half (sine-type).
    """
    pi = np.pi
    polygon = [(-pi, -pi), (pi, -pi), (pi, pi), (-pi, pi)]
    segments = [
        BoundarySegment((-pi, -pi), (0.0, -pi), "neumann"),
        BoundarySegment((0.0, -pi), (pi, -pi), "dirichlet"),
        BoundarySegment((pi, -pi), (pi, 0.0), "dirichlet"),
        BoundarySegment((pi, 0.0), (pi, pi), "neumann"),
        BoundarySegment((pi, pi), (0.0, pi), "neumann"),
        BoundarySegment((0.0, pi), (-pi, pi), "dirichlet"),
        BoundarySegment((-pi, pi), (-pi, 0.0), "dirichlet"),
        BoundarySegment((-pi, 0.0), (-pi, -pi), "neumann"),
    ]
    frames = [
        # (vertex, base angle): theta grows clockwise from the base edge.
        SingularVertex(PolarFrame((0.0, -pi), pi, pi, counterclockwise=False),
                       ("neumann", "dirichlet")),
        SingularVertex(PolarFrame((pi, 0.0), -0.5 * pi, pi, counterclockwise=False),
                       ("dirichlet", "neumann")),
        SingularVertex(PolarFrame((0.0, pi), 0.0, pi, counterclockwise=False),
                       ("neumann", "dirichlet")),
        SingularVertex(PolarFrame((-pi, 0.0), 0.5 * pi, pi, counterclockwise=False),
                       ("dirichlet", "neumann")),
    ]
    return DomainSpec(
        "cube_mixed_edges",
        polygon,
        segments,
        frames,
        extrusion=Extrusion(-pi, pi, ("neumann", "neumann")),
        area=4.0 * pi * pi,
    )


BUILTIN_DOMAINS: dict[str, Callable[[], DomainSpec]] = {
    "lshape2d": lshape2d,
    "square_mixed": square_mixed,
    "lshape_prism": lshape_prism,
    "cube_mixed_edges": cube_mixed_edges,
}
