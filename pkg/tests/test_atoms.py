import math

import numpy as np
import pytest

from hardylab.atoms import (
    Atom,
    AtomicDecomposition,
    KIND_CUBE_AVERAGE,
    KIND_OMEGA_Q,
    KIND_Q,
    build_example_atom,
    cube_average_atom,
    integrate_against,
    split_omega_q_atom,
    telescope,
    validate,
)
from hardylab.geometry import Cube, make_uniform_family


def two_piece_atom(K, inner, weight_fn):
    """Unit-size atom with exact weighted cancellation against weight_fn."""
    mass_K = integrate_against(((1.0, K),), weight_fn)
    mass_inner = integrate_against(((1.0, inner),), weight_fn)
    ratio = mass_K / mass_inner
    beta = 1.0 / (K.volume * (ratio - 1.0))
    return Atom(K, KIND_OMEGA_Q, ((ratio * beta, inner), (-beta, K)))


def test_atom_integral_and_call():
    K = Cube((0.0, 0.0, 0.0), 1.0)
    inner = Cube((0.0, 0.0, 0.0), 0.5)
    a = Atom(K, KIND_Q, ((2.0, inner), (-0.25, K)))
    assert a.integral() == pytest.approx(2.0 * inner.volume - 0.25 * K.volume)
    assert a([0.0, 0.0, 0.0]) == pytest.approx(1.75)
    assert a([0.75, 0.0, 0.0]) == pytest.approx(-0.25)
    assert a([5.0, 0.0, 0.0]) == 0.0


def test_atom_sup_norm_exact_on_overlaps():
    A = Cube((0.0, 0.0), 1.0)
    B = Cube((1.0, 0.0), 1.0)
    a = Atom(Cube((0.5, 0.0), 1.5), KIND_Q, ((1.0, A), (1.5, B)))
    # overlap strip carries 2.5, the B-only strip 1.5
    assert a.sup_norm() == pytest.approx(2.5)


def test_atom_drops_zero_pieces_and_json():
    K = Cube((0.0, 0.0, 0.0), 1.0)
    a = Atom(K, KIND_Q, ((0.0, K), (1.0, K)), host=K)
    assert len(a.pieces) == 1
    assert Atom.from_json(a.to_json()) == a


def test_cube_average_atom_validates():
    Q = Cube((1.0, 2.0, 3.0), 0.5)
    a = cube_average_atom(Q)
    assert a.integral() == pytest.approx(1.0)
    rep = validate(a, None)
    assert rep.size_ok and rep.support_ok and rep.cancel_ok


def test_validate_plain_atom_cancellation():
    K = Cube((0.0, 0.0, 0.0), 1.0)
    half_pos = Cube((0.5, 0.0, 0.0), 0.5)
    half_neg = Cube((-0.5, 0.0, 0.0), 0.5)
    coef = 1.0 / K.volume
    a = Atom(K, KIND_Q, ((coef, half_pos), (-coef, half_neg)))
    rep = validate(a, None)
    assert rep.size_ok and rep.cancel_required and rep.cancel_ok
    # breaking the balance must be caught
    bad = Atom(K, KIND_Q, ((coef, half_pos), (-0.5 * coef, half_neg)))
    assert not validate(bad, None).cancel_ok


def test_validate_weighted_cancellation():
    K = Cube((0.0, 0.0, 0.0), 0.5)
    inner = Cube((0.0, 0.0, 0.0), 0.25)

    def w(pts):
        pts = np.asarray(pts)
        return 1.0 - 0.1 * np.linalg.norm(pts, axis=-1) ** 2

    a = two_piece_atom(K, inner, w)
    rep = validate(a, None, omega_fn=w)
    assert rep.size_ok
    assert rep.cancel_ok
    assert abs(rep.sup_norm - 1.0 / K.volume) < 1e-12
    with pytest.raises(ValueError):
        validate(a, None)  # weighted kinds need the weight evaluator


def test_integrate_against_polynomial_exact():
    C = Cube((1.0, -1.0, 0.5), 0.75)

    def w(pts):
        pts = np.asarray(pts)
        return 2.0 + pts[..., 0] + pts[..., 1] ** 2

    val = integrate_against(((3.0, C),), w)
    # reference via brute midpoint quadrature
    r = C.radius
    n = 64
    offs = (np.arange(n) + 0.5) / n * 2.0 - 1.0
    grids = np.meshgrid(*[C.center[i] + r * offs for i in range(3)],
                        indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    brute = 3.0 * (2.0 * r / n) ** 3 * float(w(pts).sum())
    assert val == pytest.approx(brute, rel=1e-4)


def test_split_omega_q_atom_reconstructs():
    Q = Cube((0.0, 0.0, 0.0), 1.0)
    K = Cube((0.2, -0.1, 0.0), 0.5)
    inner = Cube((0.2, -0.1, 0.0), 0.25)

    def w(pts):
        pts = np.asarray(pts)
        return 1.0 - 0.05 * np.linalg.norm(pts, axis=-1)

    a = two_piece_atom(K, inner, w)
    dec = split_omega_q_atom(a, Q)
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1.5, 1.5, (20000, 3))
    assert dec.max_reconstruction_error(a, pts) < 1e-12
    # first piece is mean-zero, second is the cube average
    lam1, b1 = dec.terms[0]
    assert abs(b1.integral()) < 1e-14
    _, b2 = dec.terms[1]
    assert b2.kind == KIND_CUBE_AVERAGE


def test_split_rejects_oversized_mean():
    Q = Cube((0.0, 0.0, 0.0), 1.0)
    K = Cube((0.0, 0.0, 0.0), 0.5)
    a = Atom(K, KIND_OMEGA_Q, ((10.0, K),))
    with pytest.raises(ValueError):
        split_omega_q_atom(a, Q)


def test_telescope_chain_and_schedule():
    Q = Cube((0.0, 0.0, 0.0), 1.0)
    K = Cube((0.3, 0.0, 0.0), 1.0 / 16.0)
    inner = Cube((0.3, 0.0, 0.0), 1.0 / 32.0)

    def w(pts):
        pts = np.asarray(pts)
        return 1.0 - 0.05 * np.linalg.norm(pts, axis=-1)

    a = two_piece_atom(K, inner, w)
    res = telescope(a, Q, omega_fn=w)
    # radii double until at least half the host radius
    radii = [G.radius for G in res.chain]
    for r0, r1 in zip(radii[:-1], radii[1:]):
        assert r1 == pytest.approx(2.0 * r0)
    assert radii[-1] >= Q.radius / 2.0 - 1e-12
    # geometric mass schedule t_n = t_{n-1} / 2^d
    for t0, t1 in zip(res.t_values[:-2], res.t_values[1:-1]):
        assert t1 == pytest.approx(t0 / 8.0)
    # exact reconstruction and mean-zero intermediate pieces
    rng = np.random.default_rng(3)
    pts = rng.uniform(-1.3, 1.3, (50000, 3))
    assert res.decomposition.max_reconstruction_error(a, pts) < 1e-12
    for lam, b in res.decomposition.terms[:-1]:
        assert abs(b.integral()) < 1e-12
    final_lam, final_atom = res.decomposition.terms[-1]
    assert final_atom.kind == KIND_CUBE_AVERAGE


def test_telescope_collapses_for_plain_mean_zero():
    Q = Cube((0.0, 0.0, 0.0), 1.0)
    K = Cube((0.0, 0.0, 0.0), 0.25)
    half_pos = Cube((0.125, 0.0, 0.0), 0.125)
    half_neg = Cube((-0.125, 0.0, 0.0), 0.125)
    coef = 1.0 / K.volume
    a = Atom(K, KIND_OMEGA_Q, ((coef, half_pos), (-coef, half_neg)))
    res = telescope(a, Q)
    assert res.t0 == 0.0
    assert len(res.decomposition.terms) == 1
    lam, b = res.decomposition.terms[0]
    assert lam == 1.0 and b.kind == KIND_Q


def test_telescope_rejects_support_outside_host():
    Q = Cube((0.0, 0.0, 0.0), 0.25)
    K = Cube((5.0, 0.0, 0.0), 0.1)
    a = Atom(K, KIND_OMEGA_Q, ((1.0 / K.volume, K),))
    with pytest.raises(ValueError):
        telescope(a, Q)


def test_atomic_decomposition_total():
    Q = Cube((0.0, 0.0, 0.0), 1.0)
    dec = AtomicDecomposition([(0.5, cube_average_atom(Q)),
                               (-0.25, cube_average_atom(Q))])
    assert dec.total == pytest.approx(0.75)


def test_build_example_atom_cancellation_and_scale():
    def w(pts):
        pts = np.asarray(pts)
        return 0.9 + 0.05 * np.tanh(pts[..., 0])

    atom, mu = build_example_atom(6, 4.0, w, zeta=1.0)
    assert mu > 0.0
    # weighted cancellation holds by construction of the mass ratio
    assert abs(integrate_against(atom, w)) < 1e-12
    # support cube has radius (tau+1)/n around the well
    assert atom.support.radius == pytest.approx(5.0 / 6.0)
    assert atom.kind == KIND_OMEGA_Q
    coefs = sorted(c for c, _ in atom.pieces)
    assert coefs[0] == pytest.approx(-(6.0**3))
    assert coefs[1] == pytest.approx(mu * 6.0**3)
    with pytest.raises(ValueError):
        build_example_atom(1, 4.0, w)


def test_build_example_atom_default_normalization():
    def w(pts):
        pts = np.asarray(pts)
        return np.full(pts.shape[:-1], 0.5)

    atom, mu = build_example_atom(4, 4.0, w)
    assert mu == pytest.approx(1.0)
    # default zeta = delta_hat (tau+1)^-d 2^-d keeps the atom unit-size
    rep = validate(atom, None, omega_fn=w)
    assert rep.size_ok and rep.cancel_ok
