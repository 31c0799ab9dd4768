import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modet import genus2 as g2
from modet.config import CALIBRATED, TruncationPolicy
from modet.elliptic import TWO_PI_I, fermion_partition, p_deformed, theta_char, twist_from_angles
from modet.classical import eta
from modet.linalg import det_c

from oracles import eta_ref, theta_brute, twisted_eisenstein_ref

TAU = 2j
W = TWO_PI_I * (0.3 + 0.4 * TAU)
POL = TruncationPolicy()


def two_tori(eps=0.01, **kw):
    return g2.TwoTorusSewing(TAU, TAU, eps, 0.3, 0.2, 0.1, 0.4, **kw)


def self_sew(rho=1e-3, kappa=0.25, B=1):
    return g2.SelfSewing(TAU, W, rho, kappa, B)


def e2_deformed_limit(tau, order=40):
    # -B_2/2! times 1 - 24 sum sigma_1(r) q^r, summed directly
    q = cmath.exp(TWO_PI_I * tau)
    s = sum(sum(d for d in range(1, r + 1) if r % d == 0) * q ** r for r in range(1, order))
    return -(1 - 24 * s) / 12


# -- configuration types -----------------------------------------------------------


def test_configuration_validation():
    with pytest.raises(ValueError, match="sewing domain"):
        g2.TwoTorusSewing(1j, 1j, 0.2)
    with pytest.raises(ValueError):
        g2.TwoTorusSewing(-1j, 1j, 0.01)
    with pytest.raises(ValueError, match="kappa"):
        g2.SelfSewing(TAU, W, 1e-3, 0.5)
    with pytest.raises(ValueError, match="odd"):
        g2.SelfSewing(TAU, W, 1e-3, 0.25, B=2)
    with pytest.raises(ValueError, match="xi"):
        g2.SelfSewing(TAU, W, 1e-3, 0.25, xi=1)
    with pytest.raises(ValueError, match="sewing domain"):
        g2.SelfSewing(TAU, W, 0.5, 0.25)


# -- sewing matrices ---------------------------------------------------------------


def test_first_entries():
    cfg = two_tori()
    F = g2.build_sewing_matrix("F", cfg, POL, 1, CALIBRATED)
    tw = twist_from_angles(0.3, 0.2, CALIBRATED)
    a, b = tw.characteristics
    e1 = twisted_eisenstein_ref(1, a, b, TAU)[0]
    assert abs(F[0, 0] - (-cmath.sqrt(0.01) * e1)) < 1e-14
    A = g2.build_sewing_matrix("A", cfg, POL, 2)
    assert abs(A[0, 0] - 0.01 * e2_deformed_limit(TAU)) < 1e-15
    assert A[0, 1] == 0  # odd-weight Eisenstein entries vanish


def test_r_matrix_against_factorial_formula():
    cfg = self_sew()
    R = g2.build_sewing_matrix("R", cfg, TruncationPolicy(M=3))
    tw0 = twist_from_angles(0, 0)
    E = {n: (e2_deformed_limit(TAU) if n == 2 else g2._e_plain(6, TAU)[n - 1]) for n in range(2, 7)}
    for k in range(1, 4):
        for l in range(1, 4):
            c = (-1) ** (k + 1) * math.factorial(k + l - 1) / (math.factorial(k - 1) * math.factorial(l - 1))
            w = -(1e-3) ** ((k + l) / 2) / math.sqrt(k * l)
            d_kl = c * p_deformed(k + l, tw0, W, TAU, "lattice-sum")
            cl = (-1) ** (l + 1) * math.factorial(k + l - 1) / (math.factorial(k - 1) * math.factorial(l - 1))
            d_lk = cl * p_deformed(k + l, tw0, W, TAU, "lattice-sum")
            blocks = [[w * d_kl, w * c * E.get(k + l, 0)], [w * c * E.get(k + l, 0), w * d_lk]]
            for a in range(2):
                for b in range(2):
                    got = R[a * 3 + k - 1, b * 3 + l - 1]
                    assert abs(got - blocks[a][b]) <= 1e-12 * max(1e-12, abs(blocks[a][b]))


def test_q1_block_layout_and_dtheta():
    cfg = two_tori()
    pol = TruncationPolicy(M=4)
    Q = g2.build_sewing_matrix("Q1", cfg, pol)
    F1 = g2.build_sewing_matrix("F", cfg, pol, 1)
    F2 = g2.build_sewing_matrix("F", cfg, pol, 2)
    assert np.all(Q[:4, :4] == 0) and np.all(Q[4:, 4:] == 0)
    assert np.allclose(Q[:4, 4:], 1j * F1) and np.allclose(Q[4:, :4], -1j * F2)
    D = g2.build_sewing_matrix("Dθ", self_sew(), pol)
    t2 = cmath.exp(-TWO_PI_I * 0.4 * 0 - TWO_PI_I * 0.1)
    assert np.allclose(np.diag(D), [1 / t2] * 4 + [-t2] * 4)


def test_zero_sewing_parameter_degenerations():
    cfg = two_tori(0)
    for kind in ("F", "A", "Q1"):
        assert not np.any(g2.build_sewing_matrix(kind, cfg, POL))
    assert g2.sewing_det("Q1", cfg).value == 1
    assert g2.sewing_det("AA", cfg, root=True).value == 1
    s0 = self_sew(0)
    assert not np.any(g2.build_sewing_matrix("R", s0, POL))
    assert not np.any(g2.build_sewing_matrix("G2", s0, POL))
    assert not np.any(g2.build_sewing_matrix("T2", s0, POL))


def test_wrong_configuration_type():
    with pytest.raises(TypeError):
        g2.build_sewing_matrix("R", two_tori(), POL)
    with pytest.raises(ValueError):
        g2.build_sewing_matrix("X", two_tori(), POL)


def test_fredholm_convergence_two_tori():
    cfg = two_tori(0.01)
    for kind, root in (("Q1", False), ("AA", True)):
        d16 = g2.sewing_det(kind, cfg, TruncationPolicy(M=16), root).value
        d32 = g2.sewing_det(kind, cfg, TruncationPolicy(M=32), root).value
        assert abs(d16 - d32) <= 1e-10


def test_truncation_estimates_decrease():
    cfg = two_tori(0.04)
    est = [g2.sewing_det("Q1", cfg, TruncationPolicy(M=m)).estimate for m in (4, 8, 16)]
    floor = 1e-14
    assert all(b < a or b <= floor for a, b in zip(est, est[1:]))
    est = [g2.sewing_det("R", self_sew(), TruncationPolicy(M=m), True).estimate for m in (4, 8, 16)]
    assert all(b < a or b <= floor for a, b in zip(est, est[1:]))


# -- partition functions and genus-two theta ---------------------------------------


def test_z2_at_zero_eps():
    cfg = two_tori(0)
    z, _ = g2.z2_partition(cfg, "fermion")
    prod = fermion_partition(0.3, 0.2, TAU) * fermion_partition(0.1, 0.4, TAU)
    assert abs(z - prod) < 1e-15
    omega = np.diag([TAU, TAU])
    zb, _ = g2.z2_partition(cfg, "boson", omega)
    a1, b1 = g2.twist_characteristics(0.3, 0.2)
    a2, b2 = g2.twist_characteristics(0.1, 0.4)
    ref = theta_brute(a1, b1, 0, TAU) * theta_brute(a2, b2, 0, TAU) / eta_ref(TAU) ** 2
    assert abs(zb - ref) < 1e-13
    with pytest.raises(ValueError):
        g2.z2_partition(cfg, "boson")


def test_factorization_and_eta6_report():
    assert g2.check_factorization(two_tori(0.01)).rel_err <= 1e-9
    rep = g2.check_eta6(two_tori(0.01))
    assert rep.passed and rep.rel_err <= 1e-9
    assert len(rep.notes["z_scan"]) == 4
    assert rep.notes["ratio_M_stability"] <= 1e-8
    with pytest.raises(ValueError):
        g2.check_eta6(g2.TwoTorusSewing(TAU, 1j, 0.01))


@settings(max_examples=15)
@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_theta2_factorises_on_diagonal_omega(a1, a2, b1, b2):
    t1, t2 = 0.1 + 1.3j, -0.2 + 0.9j
    v = g2.theta_genus2((a1, a2), (b1, b2), np.diag([t1, t2]))
    ref = theta_char(a1, b1, 0, t1) * theta_char(a2, b2, 0, t2)
    assert abs(v - ref) <= 1e-13 * max(1, abs(ref))


def test_theta2_odd_characteristic_and_brute_force():
    omega = np.array([[1.1j + 0.1, 0.2 + 0.1j], [0.2 + 0.1j, 0.9j - 0.3]])
    assert abs(g2.theta_genus2((0.5, 0.5), (0.5, 0.5), np.diag([1j, 2j]))) < 1e-15
    a, b, z = (0.3, -0.1), (0.2, 0.45), (0.4 - 0.2j, 0.1j)
    n = np.arange(-30, 31)
    N0, N1 = np.meshgrid(n + a[0], n + a[1], indexing="ij")
    quad = omega[0, 0] * N0 ** 2 + 2 * omega[0, 1] * N0 * N1 + omega[1, 1] * N1 ** 2
    ref = np.exp(1j * np.pi * quad + N0 * (z[0] + TWO_PI_I * b[0]) + N1 * (z[1] + TWO_PI_I * b[1])).sum()
    assert abs(g2.theta_genus2(a, b, omega, z) - ref) <= 1e-12 * abs(ref)


def test_theta2_domain():
    with pytest.raises(ValueError, match="positive definite"):
        g2.theta_genus2((0, 0), (0, 0), np.array([[1j, 2j], [2j, 1j]]))


# -- the kappa kernel, moments and the full kernel ---------------------------------


def test_szego_kappa_zero_kappa_is_theta_ratio():
    cfg = self_sew(kappa=0.0)
    x, y = 0.3 + 0.2j, -0.5 + 1.1j
    a, b = cfg.alpha1, cfg.beta1
    ref = theta_brute(a, b, x - y, TAU) / (theta_brute(a, b, 0, TAU) * -1j * theta_brute(0.5, 0.5, x - y, TAU)
                                           / eta_ref(TAU) ** 3)
    assert abs(g2.szego_kappa(x, y, cfg) - ref) <= 1e-12 * abs(ref)


def test_szego_kappa_independent_reevaluation():
    cfg = self_sew()
    x, y = 0.3 + 0.2j, -0.5 + 1.1j
    k, a, b = cfg.kappa, cfg.alpha1, cfg.beta1
    th = lambda z: theta_brute(0.5, 0.5, z, TAU)  # noqa: E731
    bx = cmath.exp(k * cmath.log(th(x - W) / th(x)))
    by = cmath.exp(k * cmath.log(th(y) / th(y - W)))
    K = -1j * th(x - y) / eta_ref(TAU) ** 3
    ref = bx * by * theta_brute(a, b, x - y + k * W, TAU) / (theta_brute(a, b, k * W, TAU) * K)
    assert abs(g2.szego_kappa(x, y, cfg) - ref) <= 1e-12 * abs(ref)


def test_szego_kernel_pole_normalisation():
    cfg = self_sew()
    x = 0.7 + 0.9j
    for h in (1e-4, 1e-5):
        assert abs(h * g2.szego_kappa(x + h, x, cfg) - 1) < 10 * h
        assert abs(h * g2.szego_full(x + h, x, cfg)[0] - 1) < 10 * h


def test_zero_rho_kernel_is_kappa_kernel():
    cfg = self_sew(0)
    x, y = [0.5 + 0.2j, 1.0 - 0.3j], [-0.4 + 0.8j, 0.2 + 1.5j]
    bl = g2.build_selfsew_blocks(cfg, x, y)
    assert not np.any(bl.H) and not np.any(bl.Hbar) and not np.any(bl.T2)
    S = g2.szego_matrix(cfg, x, y)
    assert np.array_equal(S, bl.Skn)


def test_moments_stable_under_node_doubling():
    cfg = self_sew()
    G64 = g2.selfsew_moments(cfg, 16, TruncationPolicy(n_quad=64), CALIBRATED).G
    G128 = g2.selfsew_moments(cfg, 16, TruncationPolicy(n_quad=128), CALIBRATED).G
    assert np.max(np.abs(G64 - G128)) < 1e-12


def test_full_kernel_stable_in_truncation():
    v, est = g2.szego_full(W / 2 + 0.4, W / 2 - 0.3j, self_sew())
    assert est <= 1e-8 and np.isfinite(v)


def test_moments_at_zero_rho_reduce_to_genus_one():
    cfg = self_sew(0, kappa=0.0)
    E = twisted_eisenstein_ref(8, cfg.alpha1, cfg.beta1, TAU)
    for k in range(4):
        for l in range(4):
            expect = -E[k + l] * math.comb(k + l, k) * (-1) ** l
            assert abs(g2.szego_moment(k, l, cfg) - expect) <= 1e-10 * max(1, abs(expect))


def test_moment_quadrature_stability():
    cfg = self_sew()
    a = g2.szego_moment(1, 1, cfg, TruncationPolicy(n_quad=64))
    b = g2.szego_moment(1, 1, cfg, TruncationPolicy(n_quad=128))
    assert abs(a - b) < 1e-12


def test_moments_by_least_squares_agree():
    cfg = self_sew()
    p = TWO_PI_I * (0.75 + 0.5 * TAU)
    rng = np.random.default_rng(5)
    K = 24
    s = 0.8 * np.sqrt(rng.random(40)) * np.exp(2j * np.pi * rng.random(40))
    t = 0.8 * np.sqrt(rng.random(40)) * np.exp(2j * np.pi * rng.random(40))
    vals = g2.szego_matrix(cfg, p + s, p + t) - 1 / (s[:, None] - t[None, :])
    S, T = np.meshgrid(s, t, indexing="ij")
    keep = np.abs(S - T).ravel() > 0.05
    mons = [(k, l) for k in range(K) for l in range(K - k)]
    A = np.stack([(S ** k * T ** l).ravel()[keep] for k, l in mons], axis=1)
    coef, *_ = np.linalg.lstsq(A, vals.ravel()[keep], rcond=None)
    for k in range(1, 5):
        for l in range(1, 5):
            direct = g2.szego_moment(k, l, cfg)
            assert abs(coef[mons.index((k, l))] - direct) <= 1e-8 * max(1, abs(direct))


def test_resolvent_conditioning_guard():
    with pytest.raises(g2.IllConditioned, match="cond"):
        g2._resolvent(np.eye(3))


# -- block determinant and the self-sewing consistency check -----------------------


def test_block_det_zero_rho():
    cfg = self_sew(0)
    xs, ys = [0.5 + 0.2j], [-0.4 + 0.8j]
    lhs, rhs = g2.block_det_sides(cfg, xs, ys)
    ref = det_c(g2.skappa_grid(xs, ys, cfg, CALIBRATED))
    assert abs(lhs - ref) < 1e-15 * abs(ref) + 1e-300 and abs(rhs - ref) <= 1e-15 * abs(ref)


@pytest.mark.parametrize("n", [1, 2])
def test_block_det_identity_improves_with_M(n):
    cfg = self_sew()
    for seed in range(2):
        pts = g2.sample_near_punctures(n, cfg, seed)
        r16 = g2.check_block_det(n, cfg, TruncationPolicy(M=16), points=pts)
        r32 = g2.check_block_det(n, cfg, TruncationPolicy(M=32), points=pts)
        assert r16.passed and r16.rel_err <= 1e-6
        assert r32.rel_err < r16.rel_err


def test_near_puncture_samples():
    cfg = self_sew()
    xs, ys = g2.sample_near_punctures(2, cfg, 4)
    d = 2 * math.sqrt(1e-3)
    for z in xs + ys:
        assert min(abs(abs(z - W) - d), abs(abs(z) - d)) < 1e-12


def test_prop3_trivial_kappa_and_fit():
    r0 = g2.check_prop3(self_sew(kappa=0.0))
    assert r0.mode == "as-printed" and r0.passed
    r = g2.check_prop3(self_sew(), n_samples=5)
    assert r.mode == "fit-constant" and r.dispersion <= 1e-5
    assert abs(abs(r.fitted_constant) - 1) < 1e-6


def test_prop3_branch_parameter_phase():
    k = 0.25
    c1 = g2.check_prop3(self_sew(B=1)).fitted_constant
    c3 = g2.check_prop3(self_sew(B=3)).fitted_constant
    assert abs(c3 / c1 - cmath.exp(1j * math.pi * k * k)) < 1e-8


def test_puncture_order_scan_is_a_tie():
    res = g2.calibrate_puncture_order(self_sew())
    assert res["winner"] == "w0"
    assert all(v <= 1e-5 for v in res["scores"].values())
