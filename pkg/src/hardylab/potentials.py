"""Cube-supported potentials and the Newton-kernel smallness functional."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Cube


@dataclass(frozen=True)
class Potential:
    """Non-negative potential b + sum_k w_k * indicator(C_k)."""

    terms: tuple = ()
    background: float = 0.0

    def __post_init__(self):
        if self.background < 0:
            raise ValueError("background must be nonnegative")
        cleaned = []
        for w, C in self.terms:
            if w < 0:
                raise ValueError("term weights must be nonnegative")
            if w > 0:
                cleaned.append((float(w), C))
        object.__setattr__(self, "terms", tuple(cleaned))

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        out = np.full(pts.shape[:-1], self.background)
        for w, C in self.terms:
            out += w * C.contains(pts)
        return out

    def __add__(self, other):
        return Potential(self.terms + other.terms, self.background + other.background)

    def to_json(self):
        return {
            "background": self.background,
            "terms": [
                {"weight": w, "center": list(C.center), "radius": C.radius}
                for w, C in self.terms
            ],
        }

    @staticmethod
    def from_json(obj):
        terms = tuple(
            (t["weight"], Cube(tuple(t["center"]), t["radius"]))
            for t in obj.get("terms", [])
        )
        return Potential(terms=terms, background=obj.get("background", 0.0))


def constant_potential(value: float) -> Potential:
    """Spatially constant potential, e.g. the uniform-lattice companion t^-2."""
    return Potential(background=value)


@dataclass(frozen=True)
class ExamplePotential:
    potential: Potential
    k_max: int
    tail_bound: float


def example_cube(k: int, d: int = 3) -> Cube:
    center = (float(2**k),) + (0.0,) * (d - 1)
    return Cube(center, 1.0 / (2 * k))


def example_potential(k_max: int, d: int = 3) -> ExamplePotential:
    """Sparse lacunary potential: weight k^2 on Q(2^k e1, 1/(2k)), k=2..k_max.

    The reported tail bound majorizes the dropped terms of the Newton-kernel
    functional by sum_{k>k_max} (k 2^k)^(2-d).
    """
    if k_max < 2:
        raise ValueError("k_max must be at least 2")
    terms = tuple((float(k * k), example_cube(k, d)) for k in range(2, k_max + 1))
    tail = 0.0
    k = k_max + 1
    while True:
        term = (k * 2.0**k) ** (2 - d)
        tail += term
        k += 1
        if term < 1e-18 * max(tail, 1e-300) or k > k_max + 200:
            break
    return ExamplePotential(Potential(terms=terms), k_max, tail)


def _gl_panels(lo, hi, proj, scale, nodes=12):
    """Gauss-Legendre nodes/weights on [lo, hi], panels graded toward proj."""
    breaks = {lo, hi}
    p = min(max(proj, lo), hi)
    step = max(scale, 1e-9 * (hi - lo))
    while step < (hi - lo):
        for b in (p - step, p + step):
            if lo < b < hi:
                breaks.add(b)
        step *= 2.0
    if lo < p < hi:
        breaks.add(p)
    breaks = sorted(breaks)
    xs, ws = np.polynomial.legendre.leggauss(nodes)
    all_x, all_w = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        mid, half = (a + b) / 2.0, (b - a) / 2.0
        all_x.append(mid + half * xs)
        all_w.append(half * ws)
    return np.concatenate(all_x), np.concatenate(all_w)


def newton_cube_integral(x, Q: Cube, d: int | None = None) -> float:
    """Integral of |x-y|^(2-d) over the cube Q, to ~1e-8 relative accuracy.

    Uses the flux identity div_y[(y-x)|y-x|^(2-d)/2] = |y-x|^(2-d), which
    turns the (possibly singular) volume integral into smooth face integrals;
    faces through x itself contribute zero.
    """
    x = np.asarray(x, dtype=float)
    if d is None:
        d = Q.dim
    if d < 3:
        raise ValueError("the Newton-kernel functional requires dimension >= 3")
    c = np.asarray(Q.center)
    r = Q.radius
    total = 0.0
    for axis in range(d):
        for sign in (-1.0, 1.0):
            h = (c[axis] + sign * r) - x[axis]
            hf = sign * h  # signed height (y - x) . n on this face
            if h == 0.0:
                continue
            node_axes, weight_axes = [], []
            for i in range(d):
                if i == axis:
                    continue
                nodes, weights = _gl_panels(
                    c[i] - r, c[i] + r, x[i], abs(h), nodes=12
                )
                node_axes.append(nodes)
                weight_axes.append(weights)
            grids = np.meshgrid(*node_axes, indexing="ij")
            wgrids = np.meshgrid(*weight_axes, indexing="ij")
            rho_sq = np.full(grids[0].shape, h * h)
            k = 0
            for i in range(d):
                if i == axis:
                    continue
                rho_sq = rho_sq + (grids[k] - x[i]) ** 2
                k += 1
            integrand = rho_sq ** ((2.0 - d) / 2.0)
            w = np.ones_like(grids[0])
            for wg in wgrids:
                w = w * wg
            total += 0.5 * hf * float((integrand * w).sum())
    return total


def kato_functional(V: Potential, x, d: int | None = None) -> float:
    """Newton-kernel smallness functional int V(y)|x-y|^(2-d) dy at x.

    A nonzero constant background makes the integral diverge; infinity is
    returned in that case.
    """
    x = np.asarray(x, dtype=float)
    if d is None:
        d = len(x)
    if d < 3:
        raise ValueError("dimension must be at least 3")
    if V.background > 0:
        return math.inf
    return sum(w * newton_cube_integral(x, C, d) for w, C in V.terms)


@dataclass
class KatoReport:
    probes: list
    values: list
    sup: float
    finite: bool
    tail_bound: float = 0.0


def default_probes(V: Potential, d: int = 3):
    """Probe points near the potential cubes: centers, corners, midpoints."""
    probes = [np.zeros(d)]
    centers = [np.asarray(C.center) for _, C in V.terms]
    for (_, C), c in zip(V.terms, centers):
        probes.append(c)
        probes.extend(C.corners())
    for c1, c2 in zip(centers[:-1], centers[1:]):
        probes.append((c1 + c2) / 2.0)
    return probes


def kato_sup_estimate(V: Potential, probes=None, d: int = 3,
                      tail_bound: float = 0.0) -> KatoReport:
    if probes is None:
        probes = default_probes(V, d)
    if not len(probes):
        raise ValueError("probe list must be nonempty")
    values = [kato_functional(V, p, d) for p in probes]
    sup = max(values)
    return KatoReport(
        probes=[np.asarray(p) for p in probes],
        values=values,
        sup=sup,
        finite=math.isfinite(sup),
        tail_bound=tail_bound,
    )
