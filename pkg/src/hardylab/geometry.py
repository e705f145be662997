"""Axis-aligned cubes, lattice tilings, and smooth partitions of unity."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_THETA = 0.125


@dataclass(frozen=True)
class Cube:
    """Open axis-aligned cube given by center and radius (half side-length)."""

    center: tuple
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("cube radius must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self):
        return len(self.center)

    @property
    def diameter(self):
        return 2.0 * math.sqrt(self.dim) * self.radius

    @property
    def volume(self):
        return (2.0 * self.radius) ** self.dim

    def contains(self, pts):
        """Open membership test; `pts` has shape (..., d)."""
        pts = np.asarray(pts, dtype=float)
        c = np.asarray(self.center)
        return np.abs(pts - c).max(axis=-1) < self.radius

    def contains_closed(self, pts):
        pts = np.asarray(pts, dtype=float)
        c = np.asarray(self.center)
        return np.abs(pts - c).max(axis=-1) <= self.radius + 1e-12 * self.radius

    def corners(self):
        offs = itertools.product((-self.radius, self.radius), repeat=self.dim)
        c = np.asarray(self.center)
        return np.array([c + np.asarray(o) for o in offs])

    def overlap_volume(self, other):
        """Lebesgue measure of the intersection (interval arithmetic, exact)."""
        v = 1.0
        for ci, cj in zip(self.center, other.center):
            lo = max(ci - self.radius, cj - other.radius)
            hi = min(ci + self.radius, cj + other.radius)
            if hi <= lo:
                return 0.0
            v *= hi - lo
        return v

    def intersects_closed(self, other):
        return all(
            abs(ci - cj) <= self.radius + other.radius
            for ci, cj in zip(self.center, other.center)
        )

    def translate(self, vec):
        return Cube(tuple(c + v for c, v in zip(self.center, vec)), self.radius)

    def to_json(self):
        return {"center": list(self.center), "radius": self.radius}

    @staticmethod
    def from_json(obj):
        return Cube(tuple(obj["center"]), obj["radius"])


def dilate(Q: Cube, k: int = 1, theta: float = DEFAULT_THETA) -> Cube:
    """k-fold dilation Q -> Q(c, (1+theta)^k r); dilate(Q, 0) is Q itself."""
    if theta <= 0:
        raise ValueError("dilation parameter theta must be positive")
    if k < 0:
        raise ValueError("dilation order must be nonnegative")
    if k == 0:
        return Q
    return Cube(Q.center, (1.0 + theta) ** k * Q.radius)


@dataclass(frozen=True)
class CubeFamily:
    """Finite cube cover of a bounding box with a dilation parameter."""

    cubes: tuple
    theta: float = DEFAULT_THETA
    bbox: Cube | None = None
    scale_bound: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "cubes", tuple(self.cubes))
        if not self.cubes:
            raise ValueError("family must contain at least one cube")
        if self.theta <= 0:
            raise ValueError("theta must be positive")

    @property
    def dim(self):
        return self.cubes[0].dim

    def __len__(self):
        return len(self.cubes)

    def __iter__(self):
        return iter(self.cubes)

    def index_of(self, Q: Cube):
        try:
            return self.cubes.index(Q)
        except ValueError:
            raise KeyError("cube is not a member of the family") from None

    def to_json(self):
        return {
            "theta": self.theta,
            "scale_bound": self.scale_bound,  # may be null: no asserted bound
            "bbox": self.bbox.to_json() if self.bbox is not None else None,
            "cubes": [Q.to_json() for Q in self.cubes],
        }

    @staticmethod
    def from_json(obj):
        return CubeFamily(
            cubes=tuple(Cube.from_json(q) for q in obj["cubes"]),
            theta=obj.get("theta", DEFAULT_THETA),
            bbox=Cube.from_json(obj["bbox"]) if obj.get("bbox") else None,
            scale_bound=obj.get("scale_bound"),
        )


def make_uniform_family(t: float, bbox: Cube, theta: float = DEFAULT_THETA) -> CubeFamily:
    """Lattice tiling of `bbox` by cubes of radius t (bbox snapped outward)."""
    if t <= 0:
        raise ValueError("cube radius t must be positive")
    d = bbox.dim
    m = max(1, math.ceil(bbox.radius / t - 1e-12))
    snapped = Cube(bbox.center, m * t)
    axes = []
    for i in range(d):
        lo = bbox.center[i] - m * t
        axes.append([lo + t + 2.0 * t * j for j in range(m)])
    cubes = [Cube(tuple(c), t) for c in itertools.product(*axes)]
    return CubeFamily(cubes=tuple(cubes), theta=theta, bbox=snapped, scale_bound=1.0)


@dataclass
class GReport:
    g1_ok: bool
    g2_ok: bool
    g3_ok: bool
    empirical_C: float
    max_overlap: float
    uncovered: int

    @property
    def all_ok(self):
        return self.g1_ok and self.g2_ok and self.g3_ok


def check_G(family: CubeFamily, grid_per_axis: int = 24, C: float | None = None) -> GReport:
    """Verify the covering, disjointness, and neighbor-scale conditions.

    Covering is sampled on a grid inside the bounding box; disjointness uses
    exact interval arithmetic; the scale condition is tested exactly on all
    pairs whose fourfold dilations intersect.
    """
    theta = family.theta
    bbox = family.bbox
    if bbox is None:
        los = np.min([np.asarray(Q.center) - Q.radius for Q in family], axis=0)
        his = np.max([np.asarray(Q.center) + Q.radius for Q in family], axis=0)
        bbox = Cube(tuple((los + his) / 2.0), float(np.max(his - los) / 2.0))

    d = family.dim
    axes = [
        np.linspace(bbox.center[i] - bbox.radius, bbox.center[i] + bbox.radius,
                    grid_per_axis + 2)[1:-1]
        for i in range(d)
    ]
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    covered = np.zeros(len(pts), dtype=bool)
    for Q in family:
        covered |= Q.contains_closed(pts)
    uncovered = int((~covered).sum())

    max_overlap = 0.0
    cubes = family.cubes
    for i in range(len(cubes)):
        for j in range(i + 1, len(cubes)):
            max_overlap = max(max_overlap, cubes[i].overlap_volume(cubes[j]))

    empirical_C = 1.0
    bound = C if C is not None else family.scale_bound
    dilated = [dilate(Qc, 4, theta) for Qc in cubes]
    for i in range(len(cubes)):
        for j in range(i + 1, len(cubes)):
            if dilated[i].intersects_closed(dilated[j]):
                ratio = cubes[i].diameter / cubes[j].diameter
                ratio = max(ratio, 1.0 / ratio)
                empirical_C = max(empirical_C, ratio)
    # A finite family always admits some scale constant; an asserted bound is
    # checked when supplied.
    g3_ok = bound is None or empirical_C <= bound * (1.0 + 1e-12)

    return GReport(
        g1_ok=uncovered == 0,
        g2_ok=max_overlap <= 1e-12,
        g3_ok=g3_ok,
        empirical_C=empirical_C,
        max_overlap=max_overlap,
        uncovered=uncovered,
    )


def loc_glob_split(family: CubeFamily, Q: Cube):
    """Split the family into threefold-dilation neighbors of Q and the rest."""
    family.index_of(Q)
    Q3 = dilate(Q, 3, family.theta)
    loc, glob = [], []
    for Qp in family:
        if Q3.intersects_closed(dilate(Qp, 3, family.theta)):
            loc.append(Qp)
        else:
            glob.append(Qp)
    return loc, glob


def _profile(s):
    """C^2 one-sided mollifier profile: 1 for s<=0, 0 for s>=1."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    out[s <= 0.0] = 1.0
    mid = (s > 0.0) & (s < 1.0)
    sm = s[mid]
    out[mid] = 1.0 - sm**3 * (10.0 - 15.0 * sm + 6.0 * sm**2)
    return out


@dataclass
class PartitionOfUnity:
    """Shepard-normalized tensor bumps phi_Q subordinate to {Q*}."""

    family: CubeFamily

    def raw_bump(self, i, pts):
        Q = self.family.cubes[i]
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        c = np.asarray(Q.center)
        s = (np.abs(pts - c) - Q.radius) / (self.family.theta * Q.radius)
        return _profile(s).prod(axis=-1)

    def raw_sum(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        total = np.zeros(len(pts))
        for i in range(len(self.family)):
            total += self.raw_bump(i, pts)
        return total

    def phi(self, i, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        raw = self.raw_bump(i, pts)
        out = np.zeros(len(pts))
        nz = raw > 0.0
        if nz.any():
            out[nz] = raw[nz] / self.raw_sum(pts[nz])
        return out

    def sum_at(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        total = np.zeros(len(pts))
        for i in range(len(self.family)):
            total += self.phi(i, pts)
        return total

    def gradient_bound(self, i, samples_per_axis: int = 24, h: float = 1e-6):
        """Empirical sup of |grad phi_Q| times d_Q, by central differences.

        Samples are restricted to the covered bounding box: outside it the
        normalized sum is not a partition of unity and phi_Q drops to zero
        at the edge of its own support.
        """
        Q = self.family.cubes[i]
        Qs = dilate(Q, 1, self.family.theta)
        d = Q.dim
        axes = [
            np.linspace(Qs.center[k] - Qs.radius, Qs.center[k] + Qs.radius,
                        samples_per_axis)
            for k in range(d)
        ]
        grids = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=-1)
        bbox = self.family.bbox
        if bbox is not None:
            margin = 2.0 * h * Q.radius
            inside = np.abs(pts - np.asarray(bbox.center)).max(axis=-1) \
                < bbox.radius - margin
            pts = pts[inside]
        step = h * Q.radius
        sq_sum = np.zeros(len(pts))
        for k in range(d):
            e = np.zeros(d)
            e[k] = step
            sq_sum += ((self.phi(i, pts + e) - self.phi(i, pts - e)) / (2 * step)) ** 2
        return float(np.sqrt(sq_sum).max()) * Q.diameter


def build_partition(family: CubeFamily) -> PartitionOfUnity:
    """Partition of unity for a family passing the covering conditions.

    Shepard normalization gives an exact unit sum on the covered box; each
    bump vanishes identically outside the dilated cube by construction.
    """
    if family.theta <= 0:
        raise ValueError("theta must be positive for the mollifier width")
    return PartitionOfUnity(family=family)
