from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lorentzgas import _kernels as K
from lorentzgas.dynamics import (
    PhasePoint, TableParams, TangentVector, billiard_map, expansion_ratio, next_collision,
    reverse, tangent_jacobian, to_cartesian,
)
from lorentzgas.errors import FlightCapExceeded, GrazingLaunch, InvalidConfig, SingularityStraddle
from lorentzgas.rng import StreamFactory

SIG = 0.1
TABLE = TableParams(SIG)


def brute_force_hit(point, direction, sigma, bound=50):
    """Nearest disk hit by scanning every lattice disk with |m| <= bound."""
    px, py = point
    vx, vy = direction
    best = (math.inf, None)
    for i in range(-bound, bound + 1):
        for j in range(-bound, bound + 1):
            cx, cy = i - px, j - py
            b = cx * vx + cy * vy
            disc = b * b - (cx * cx + cy * cy - sigma * sigma)
            if disc <= 0:
                continue
            t = b - math.sqrt(disc)
            if t > 1e-9 and t < best[0]:
                best = (t, (i, j))
    return best


def test_vertical_shot():
    hit = next_collision(PhasePoint(0.0, 0.0), TABLE)
    assert hit.cell == (0, 1)
    assert hit.tau == pytest.approx(0.8, abs=1e-14)
    res = billiard_map(PhasePoint(0.0, 0.0), TABLE)
    assert res.kappa == (0, 1)
    assert res.next.theta == pytest.approx(math.pi, abs=1e-14)
    assert res.next.phi == pytest.approx(0.0, abs=1e-14)
    assert res.next.cell == (0, 1)


def test_diagonal_shot_from_side_point():
    # point (0.1, 0) is theta = pi/2; direction (1, 1)/sqrt 2 is phi = -pi/4 here
    p = PhasePoint(0.5 * math.pi, -0.25 * math.pi)
    q, v = to_cartesian(p, TABLE)
    np.testing.assert_allclose(q, [0.1, 0.0], atol=1e-15)
    np.testing.assert_allclose(v, [2**-0.5, 2**-0.5], atol=1e-15)
    hit = next_collision(p, TABLE)
    tau, cell = brute_force_hit(q, v, SIG)
    assert hit.cell == cell == (1, 1)
    assert hit.tau == pytest.approx(tau, rel=1e-12)


@pytest.mark.parametrize("alpha", [0.05, 0.02, 0.011, 0.003])
def test_shallow_corridor_launch(alpha):
    p = PhasePoint(0.0, 0.5 * math.pi - alpha)
    q, v = to_cartesian(p, TABLE)
    hit = next_collision(p, TABLE)
    tau, cell = brute_force_hit(q, v, SIG, bound=max(50, int(1.2 / alpha)))
    assert hit.cell == cell
    assert hit.cell[1] in (-1, 0, 1)
    d = 1 - 2 * SIG
    assert abs(hit.cell[0] - d / math.tan(alpha)) <= 1 + 2 * SIG / math.tan(alpha)


def test_random_hits_match_brute_force():
    s = StreamFactory(3, "bf")
    for trial in range(200):
        u = s.uniforms(trial, 2)
        p = PhasePoint(2 * math.pi * u[0], math.asin(2 * u[1] - 1))
        q, v = to_cartesian(p, TABLE)
        tau, cell = brute_force_hit(q, v, SIG, bound=30)
        if cell is None:
            continue
        hit = next_collision(p, TABLE)
        assert hit.cell == cell
        assert hit.tau == pytest.approx(tau, rel=1e-9, abs=1e-12)


def test_grazing_and_cap():
    with pytest.raises(GrazingLaunch):
        next_collision(PhasePoint(0.0, 0.5 * math.pi), TABLE)
    with pytest.raises(FlightCapExceeded):
        billiard_map(PhasePoint(0.0, 0.5 * math.pi - 0.01), TABLE, lmax=5.0)


def test_table_and_point_validation():
    for bad in (0.0, 0.5, 0.6, -0.1):
        with pytest.raises(InvalidConfig):
            TableParams(bad)
    with pytest.raises(ValueError):
        PhasePoint(0.0, 2.0)
    assert PhasePoint(-0.5, 0.0).theta == pytest.approx(2 * math.pi - 0.5)
    assert TABLE.tau_min == pytest.approx(0.8)


def _mu_batch(n, seed=11):
    s = StreamFactory(seed, "dyn-test")
    th = np.empty(n)
    ph = np.empty(n)
    for k in range(n):
        th[k], ph[k] = K.sample_mu_point(*s.key, k)
    return th, ph


def test_reversibility_and_displacement_cancel():
    th, ph = _mu_batch(100_000)
    st1, kx, ky, tau, th1, ph1 = K.flights_from(th, ph, SIG, 1e6)
    assert np.all(st1 == K.OK)
    st2, kx2, ky2, tau2, th2, ph2 = K.flights_from(th1, -ph1, SIG, 1e6)
    assert np.all(st2 == K.OK)
    np.testing.assert_array_equal(kx + kx2, 0)
    np.testing.assert_array_equal(ky + ky2, 0)
    dth = np.abs(np.angle(np.exp(1j * (th2 - th))))
    assert dth.max() < 1e-8
    assert np.abs(-ph2 - ph).max() < 1e-8
    np.testing.assert_allclose(tau2, tau, rtol=1e-9)


def test_flight_floor_and_proximity():
    th, ph = _mu_batch(50_000, seed=5)
    for k in range(0, 50_000, 97):
        r = billiard_map(PhasePoint(th[k], ph[k]), TABLE)
        assert r.tau >= TABLE.tau_min - 1e-12
        assert np.hypot(*(r.q - np.array(r.kappa))) <= 1.0
    _, _, _, tau, _, _ = K.flights_from(th, ph, SIG, 1e6)
    assert tau.min() >= TABLE.tau_min - 1e-12


def test_mean_displacement_is_zero():
    s = StreamFactory(17, "mean-zero")
    kx, ky = [], []
    for start in range(0, 10**7, 1 << 20):
        out = K.one_step_batch(*s.key, start, min(1 << 20, 10**7 - start), SIG, 1e6, 0.0, 0.0)
        kx.append(out[3])
        ky.append(out[4])
    kx = np.concatenate(kx).astype(float)
    ky = np.concatenate(ky).astype(float)
    for v in (kx, ky):
        assert abs(v.mean()) < 3 * v.std() / math.sqrt(v.size)


@given(st.floats(0, 2 * math.pi, exclude_max=True), st.floats(-1.5, 1.5))
def test_reverse_involution(theta, phi):
    p = PhasePoint(theta, phi, (3, -2))
    assert reverse(reverse(p)) == p
    assert reverse(PhasePoint(theta, 0.0)) == PhasePoint(theta, 0.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 2 * math.pi, exclude_max=True), st.floats(-1.55, 1.55),
       st.sampled_from([0.05, 0.1, 0.2, 0.3, 0.45]))
def test_time_reversal_property(theta, phi, sigma):
    table = TableParams(sigma)
    r = billiard_map(PhasePoint(theta, phi), table)
    back = billiard_map(reverse(r.next), table)
    assert back.kappa == (-r.kappa[0], -r.kappa[1])
    assert back.next.cell == (0, 0)
    assert math.remainder(back.next.theta - theta, 2 * math.pi) == pytest.approx(0.0, abs=1e-7)
    assert -back.next.phi == pytest.approx(phi, abs=1e-7)


def _nonsingular_points(count, seed=23):
    s = StreamFactory(seed, "cone")
    out = []
    trial = 0
    while len(out) < count:
        u = s.uniforms(trial, 2)
        trial += 1
        p = PhasePoint(2 * math.pi * u[0], math.asin(2 * u[1] - 1))
        if abs(p.phi) > 1.5:
            continue
        try:
            J = tangent_jacobian(p, TABLE)
        except SingularityStraddle:
            continue
        out.append((p, J))
    return out


@pytest.fixture(scope="module")
def jac_points():
    return _nonsingular_points(10_000)


def test_unstable_cone_is_invariant(jac_points):
    for p, J in jac_points:
        for s in (1.0, 1.0 + SIG / TABLE.tau_min):
            w = J @ np.array([1.0, s])
            image = TangentVector(w[0], w[1])
            assert image.in_unstable_cone(TABLE) or abs(image.slope - 1.0) < 1e-5


def test_p_norm_expansion(jac_points):
    bound = 1 + 2 * TABLE.tau_min / SIG
    for p, J in jac_points[:2000]:
        r = billiard_map(p, TABLE)
        v = TangentVector(1.0, 1.0)
        w = J @ np.array([1.0, 1.0])
        ratio = TangentVector(*w).p_norm(r.next, TABLE) / v.p_norm(p, TABLE)
        assert ratio >= bound * (1 - 1e-5)


def test_euclidean_expansion_formula(jac_points):
    worst = 0.0
    for p, J in jac_points[:2000]:
        r = billiard_map(p, TABLE)
        s = 1.0 + 0.5 * SIG / r.tau
        w = J @ np.array([1.0, s])
        fd = TangentVector(*w).euclidean_norm(TABLE) / TangentVector(1.0, s).euclidean_norm(TABLE)
        closed = expansion_ratio(p, r.next, r.tau, s, w[1] / w[0], TABLE)
        worst = max(worst, abs(fd / closed - 1))
    assert worst < 0.01


def test_jacobian_straddle_detected():
    # a launch exactly tangent to the disk at (1, 1) splits under perturbation
    q = np.array([0.0, SIG])
    c = np.array([1.0, 1.0]) - q
    dist = float(np.hypot(*c))
    ang = math.atan2(c[1], c[0]) - math.asin(SIG / dist)
    v = np.array([math.cos(ang), math.sin(ang)])
    phi = math.atan2(v[0], v[1])  # normal (0, 1), tangent (1, 0) at theta = 0
    with pytest.raises(SingularityStraddle):
        tangent_jacobian(PhasePoint(0.0, phi), TABLE, h=1e-6)
