"""Piecewise-constant atoms, their validators, and cube decompositions."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Cube, CubeFamily, dilate
from .harmonic import cube_sample_points

KIND_OMEGA = "omega-atom"
KIND_Q = "q-atom"
KIND_OMEGA_Q = "omega-q-atom"
KIND_CUBE_AVERAGE = "cube-average"


@dataclass(frozen=True)
class Atom:
    """Tagged finite combination of cube indicators.

    `support` is a cube containing the support; `host` is the family cube the
    atom is attached to (for local kinds). A cube-average atom is exactly
    |Q|^-1 on its host cube.
    """

    support: Cube
    kind: str
    pieces: tuple
    host: Cube | None = None

    def __post_init__(self):
        object.__setattr__(
            self, "pieces",
            tuple((float(c), C) for c, C in self.pieces if c != 0.0),
        )

    @property
    def dim(self):
        return self.support.dim

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        out = np.zeros(pts.shape[:-1])
        for coef, C in self.pieces:
            out = out + coef * C.contains(pts)
        return out

    def integral(self):
        """Lebesgue integral; exact for indicator combinations."""
        return sum(coef * C.volume for coef, C in self.pieces)

    def sup_norm(self):
        """Exact sup norm via midpoints of the face arrangement."""
        if not self.pieces:
            return 0.0
        d = self.dim
        axes = []
        for i in range(d):
            cuts = set()
            for _, C in self.pieces:
                cuts.add(C.center[i] - C.radius)
                cuts.add(C.center[i] + C.radius)
            cuts = sorted(cuts)
            axes.append([(a + b) / 2.0 for a, b in zip(cuts[:-1], cuts[1:])])
        grids = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=-1)
        return float(np.abs(self(pts)).max())

    def scaled(self, factor):
        return Atom(self.support, self.kind,
                    tuple((factor * c, C) for c, C in self.pieces), self.host)

    def to_json(self):
        return {
            "kind": self.kind,
            "support": self.support.to_json(),
            "host": self.host.to_json() if self.host else None,
            "pieces": [{"coef": c, "cube": C.to_json()} for c, C in self.pieces],
        }

    @staticmethod
    def from_json(obj):
        return Atom(
            support=Cube.from_json(obj["support"]),
            kind=obj["kind"],
            pieces=tuple(
                (p["coef"], Cube.from_json(p["cube"])) for p in obj["pieces"]
            ),
            host=Cube.from_json(obj["host"]) if obj.get("host") else None,
        )


def cube_average_atom(Q: Cube) -> Atom:
    return Atom(Q, KIND_CUBE_AVERAGE, ((1.0 / Q.volume, Q),), host=Q)


@dataclass
class AtomicDecomposition:
    """List of (coefficient, atom) pairs with exact reconstruction."""

    terms: list

    @property
    def total(self):
        return sum(abs(lam) for lam, _ in self.terms)

    def reconstruct(self, pts):
        pts = np.asarray(pts, dtype=float)
        out = np.zeros(pts.shape[:-1])
        for lam, a in self.terms:
            out = out + lam * a(pts)
        return out

    def max_reconstruction_error(self, target: Atom, pts):
        return float(np.abs(self.reconstruct(pts) - target(pts)).max())

    def to_json(self):
        return {"terms": [{"coef": lam, "atom": a.to_json()} for lam, a in self.terms]}


def integrate_against(atom_or_pieces, weight_fn, nodes_per_axis: int = 5):
    """Integral of a cube-indicator combination against a weight function.

    Tensor Gauss-Legendre per indicator cube; exact for weights that are
    polynomial (or constant) on each cube.
    """
    pieces = atom_or_pieces.pieces if isinstance(atom_or_pieces, Atom) \
        else atom_or_pieces
    xs, ws = np.polynomial.legendre.leggauss(nodes_per_axis)
    total = 0.0
    for coef, C in pieces:
        axes_x, axes_w = [], []
        for c in C.center:
            axes_x.append(c + C.radius * xs)
            axes_w.append(C.radius * ws)
        grids = np.meshgrid(*axes_x, indexing="ij")
        wgrids = np.meshgrid(*axes_w, indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=-1)
        w = np.ones(len(pts))
        for wg in wgrids:
            w *= wg.ravel()
        total += coef * float((w * weight_fn(pts)).sum())
    return total


@dataclass
class ValidationReport:
    size_ok: bool
    support_ok: bool
    cancel_required: bool
    cancel_ok: bool
    measured_cancellation: float
    sup_norm: float


def _support_contains(outer: Cube, inner_pieces):
    for _, C in inner_pieces:
        for ci, co in zip(C.center, outer.center):
            if ci - C.radius < co - outer.radius - 1e-12 or \
               ci + C.radius > co + outer.radius + 1e-12:
                return False
    return True


def validate(a: Atom, family: CubeFamily | None, omega_fn=None,
             tol: float = 1e-9) -> ValidationReport:
    """Check the size, localization, and cancellation rules for `a.kind`."""
    if a.host is not None and family is not None:
        family.index_of(a.host)
    sup = a.sup_norm()
    if a.kind == KIND_CUBE_AVERAGE:
        size_ok = abs(sup - 1.0 / a.support.volume) <= tol / a.support.volume
        support_ok = _support_contains(a.support, a.pieces)
        return ValidationReport(size_ok, support_ok, False, True, 0.0, sup)

    size_ok = sup <= (1.0 + 1e-9) / a.support.volume
    support_ok = _support_contains(a.support, a.pieces)
    if a.kind in (KIND_OMEGA, KIND_OMEGA_Q):
        if omega_fn is None:
            raise ValueError("weight evaluator required for weighted cancellation")
        cancel = integrate_against(a, omega_fn)
    else:
        cancel = a.integral()
    if a.host is not None and a.kind == KIND_OMEGA_Q:
        host2 = dilate(a.host, 2, family.theta if family else 0.125)
        support_ok = support_ok and _support_contains(host2, a.pieces)
    scale = max(1.0, sup * a.support.volume)
    cancel_ok = abs(cancel) <= tol * scale
    return ValidationReport(size_ok, support_ok, True, cancel_ok, cancel, sup)


def split_omega_q_atom(a: Atom, Q: Cube, theta: float = 0.125) -> AtomicDecomposition:
    """Split a weighted-cancellation atom into two plain local atoms.

    The plain mean kappa of `a` is peeled onto the cube average of Q; the
    remainder is mean-zero and supported in the double dilation of Q.
    """
    kappa = a.integral()
    if abs(kappa) > 1.0 + 1e-12:
        raise ValueError("plain mean exceeds 1; input is not a unit-size atom")
    Q2 = dilate(Q, 2, theta)
    b1 = Atom(Q2, KIND_Q, a.pieces + ((-kappa / Q.volume, Q),), host=Q)
    terms = []
    s1 = b1.sup_norm()
    if s1 > 0:
        lam1 = s1 * Q2.volume
        terms.append((lam1, b1.scaled(1.0 / lam1)))
    if kappa != 0.0:
        terms.append((kappa, cube_average_atom(Q)))
    if not terms:
        terms.append((1.0, a))
    return AtomicDecomposition(terms)


@dataclass
class TelescopeResult:
    decomposition: AtomicDecomposition
    chain: list
    t_values: list
    sup_norms: list
    N: int
    t0: float


def _chain_cube(radius, c_K, Q2: Cube):
    """Cube of given radius centered at c_K, shifted minimally into Q2."""
    center = []
    for ck, cq in zip(c_K, Q2.center):
        lo = cq - Q2.radius + radius
        hi = cq + Q2.radius - radius
        if lo > hi + 1e-12:
            raise ValueError("chain cube exceeds the doubled host cube")
        center.append(min(max(ck, lo), hi))
    return Cube(tuple(center), radius)


def telescope(a: Atom, Q: Cube, omega_fn=None, lambda_hint=None,
              theta: float = 0.125) -> TelescopeResult:
    """Expand a weighted-cancellation atom over a doubling chain of cubes.

    Builds K = G_0 c G_1 c ... c G_N inside the doubled host cube with
    doubling diameters until d_Q <= 2 d_{G_N}, then peels cube averages so
    that every intermediate piece is mean-zero and the final piece is a
    multiple of the host cube average. Reconstruction is exact.
    """
    K = a.support
    Q2 = dilate(Q, 2, theta)
    if not _support_contains(Q2, ((1.0, K),)):
        raise ValueError("atom support exceeds the doubled host cube")
    d = K.dim

    radii = [K.radius]
    while radii[-1] < Q.radius / 2.0 - 1e-12:
        radii.append(min(2.0 * radii[-1], Q2.radius))
    chain = [K] + [_chain_cube(r, K.center, Q2) for r in radii[1:]]
    N = len(chain) - 1

    t0 = a.integral() / K.volume
    t_values = [t0]
    for _ in range(N):
        t_values.append(t_values[-1] / 2.0**d)
    t_final = t_values[-1] * chain[-1].volume  # total mass carried to Q

    pieces = []
    b0 = Atom(K, KIND_Q, a.pieces + ((-t0, K),), host=Q)
    pieces.append(b0)
    for n in range(1, N + 1):
        bn = Atom(chain[n], KIND_Q,
                  ((t_values[n - 1], chain[n - 1]), (-t_values[n], chain[n])),
                  host=Q)
        pieces.append(bn)
    b_pen = Atom(Q2, KIND_Q,
                 ((t_values[N], chain[N]), (-t_final / Q.volume, Q)), host=Q)
    pieces.append(b_pen)
    b_last = Atom(Q, KIND_CUBE_AVERAGE, ((t_final / Q.volume, Q),), host=Q)
    pieces.append(b_last)

    sup_norms = [b.sup_norm() for b in pieces]
    terms = []
    if t0 == 0.0:
        # Plain cancellation already holds: the chain carries no mass and the
        # decomposition collapses to the atom itself.
        terms.append((1.0, Atom(K, KIND_Q, a.pieces, host=Q)))
    else:
        for b, s in zip(pieces, sup_norms):
            if s == 0.0:
                continue
            if b.kind == KIND_CUBE_AVERAGE:
                terms.append((t_final, cube_average_atom(Q)))
            else:
                lam = s * b.support.volume
                terms.append((lam, b.scaled(1.0 / lam)))
    return TelescopeResult(
        decomposition=AtomicDecomposition(terms),
        chain=chain,
        t_values=t_values + [t_final],
        sup_norms=sup_norms,
        N=N,
        t0=t0,
    )


def build_example_atom(n: int, tau: float, omega_fn, zeta: float | None = None,
                       d: int = 3, relative: bool = True,
                       delta_hat: float | None = None,
                       quad_nodes: int = 5):
    """Counterexample atom: zeta n^d (mu_n 1_{C_n} - 1_{D_n}).

    The ratio mu_n of weighted cube masses enforces weighted cancellation by
    construction. In the relative frame the well cube sits at the origin and
    the shifted cube at (tau/n) e_1, which keeps large-offset arithmetic out
    of the kernel evaluations. Returns (atom, mu_n).
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if relative:
        base = np.zeros(d)
    else:
        base = np.zeros(d)
        base[0] = 2.0**n
    C_n = Cube(tuple(base), 1.0 / (2 * n))
    D_n = C_n.translate([tau / n] + [0.0] * (d - 1))
    K_n = Cube(tuple(base), (tau + 1.0) / n)

    mass_C = integrate_against(((1.0, C_n),), omega_fn, quad_nodes)
    mass_D = integrate_against(((1.0, D_n),), omega_fn, quad_nodes)
    if mass_C <= 0:
        raise ValueError("weight mass on the well cube must be positive")
    mu_n = mass_D / mass_C

    if zeta is None:
        if delta_hat is None:
            pts = np.concatenate([
                cube_sample_points(C_n, 3), cube_sample_points(D_n, 3)
            ])
            delta_hat = float(np.min(omega_fn(pts)))
        zeta = delta_hat * (tau + 1.0) ** (-d) * 2.0 ** (-d)
    atom = Atom(
        K_n, KIND_OMEGA_Q,
        ((zeta * n**d * mu_n, C_n), (-zeta * n**d, D_n)),
    )
    return atom, mu_n
