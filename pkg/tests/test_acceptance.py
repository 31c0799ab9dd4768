"""Acceptance criteria AC1-AC12, each at its stated tolerance, one PASS/FAIL line per criterion."""

import cmath
import itertools
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from modet import genus2 as g2
from modet.classical import discriminant_series, eisenstein_series
from modet.config import CALIBRATED, NOMINAL, TruncationPolicy
from modet.elliptic import TWO_PI_I, TorusPoint, p1_derivatives, theta_char, twist_from_angles
from modet.identities import AS_PRINTED, FIT_CONSTANT, DEFAULT_GRID, calibrate_convention, check_identity
from modet.linalg import det_c, schur_det
from modet.quadrature import laurent_1d, laurent_2d

from oracles import delta_coeffs_convolution

TAU2 = 2j
W = TWO_PI_I * (0.3 + 0.4 * TAU2)


@pytest.fixture
def report(capsys):
    def emit(ac, ok, text):
        with capsys.disabled():
            print(f"\n{ac:<5} {'PASS' if ok else 'FAIL'}  {text}")
        assert ok, f"{ac}: {text}"
    return emit


def test_ac1_ramanujan(report):
    t = time.perf_counter()
    reps = [check_identity(i, {"order": 60}) for i in ("ramanujan_e8", "ramanujan_e10", "ramanujan_e12")]
    dt = time.perf_counter() - t
    ok = all(r.passed and r.abs_err == 0 for r in reps) and dt < 5
    report("AC1", ok, f"E8, E10, E12 relations zero through q^60; {dt:.2f} s (limit 5 s)")


def test_ac2_discriminant(report):
    r = check_identity("delta_classical", {"order": 60})
    d = discriminant_series(60)
    head = [int(d[k]) for k in range(1, 5)]
    conv = delta_coeffs_convolution(60)
    ok = r.passed and head == [1, -24, 252, -1472] and [d[k] for k in range(1, 61)] == conv[1:]
    report("AC2", ok, f"Delta = (E4^3 - E6^2)/1728 exact to q^60; head {head}; convolution oracle agrees")


def test_ac3_garvan(report):
    t = time.perf_counter()
    r = check_identity("garvan3", {"order": 40})
    dt = time.perf_counter() - t
    report("AC3", r.passed and r.abs_err == 0 and dt < 10,
           f"3x3 determinant form of Delta^2 zero through q^40; {dt:.2f} s (limit 10 s)")


def test_ac4_delta_det2(report):
    printed = [check_identity("delta_det2", {"norm": n, "reading": "printed"}) for n in ("standard",
                                                                                         "deformed-limit")]
    cal = calibrate_convention(["delta_det2"], base=NOMINAL)
    restated = check_identity("delta_det2", {"norm": "deformed-limit", "reading": "restated", "order": 60})
    E4 = eisenstein_series(4, 60, "deformed-limit")
    E8 = eisenstein_series(8, 60, "deformed-limit")
    e8_rel = E8 - E4 * E4 * Fraction(3, 7)
    ok = (not any(r.passed for r in printed) and cal.params == {"norm": "deformed-limit", "reading": "restated"}
          and restated.passed and e8_rel.is_zero())
    report("AC4", ok, f"printed form fails (rel {printed[0].rel_err:.2g}, {printed[1].rel_err:.2g}); calibration "
                      f"picks {cal.params}; restated relation exact to q^60; deformed E8 = (3/7) E4^2")


def test_ac5_jacobi(report):
    grid = [(a, b, t) for a in (0.1, 0.3, 0.5) for b in (0.1, 0.3, 0.5) for t in ([0.0, 1.0], [0.2, 2.0])]
    worst = max(check_identity("jacobi_triple", {"alpha": a, "beta": b, "tau": t}).rel_err for a, b, t in grid)
    axes = ("kappa_sign", "kappa_shift", "boson_phase", "global_phase", "theta")
    passing = None
    for a, b, t in grid:
        ok_here = set()
        for combo in itertools.product(*(DEFAULT_GRID[x] for x in axes)):
            conv = NOMINAL.with_(**dict(zip(axes, combo)))
            with np.errstate(over="ignore", invalid="ignore"):
                r = check_identity("jacobi_triple", {"alpha": a, "beta": b, "tau": t}, conventions=conv)
            if r.rel_err <= 1e-10:
                ok_here.add(combo)
        passing = ok_here if passing is None else passing & ok_here
    winner = tuple(getattr(CALIBRATED, x) for x in axes)
    ok = worst <= 1e-10 and winner in passing
    report("AC5", ok, f"Jacobi triple product worst rel_err {worst:.2g} over 18 grid points; calibrated winner "
                      f"passes at every point ({len(passing)} convention(s) stable across grid)")


def test_ac6_fay(report):
    t = time.perf_counter()
    worst = 0.0
    for ident in ("fay_det", "fay_det_degenerate"):
        for n in (1, 2, 3):
            for seed in range(10):
                worst = max(worst, check_identity(ident, {"n": n, "seed": seed}).rel_err)
    dt = time.perf_counter() - t
    report("AC6", worst <= 1e-8 and dt < 30,
           f"Fay determinant identities n=1..3, 10 seeds each: worst rel_err {worst:.2g}; {dt:.2f} s (limit 30 s)")


def test_ac7_generalised_garvan(report):
    pol = TruncationPolicy(n_samples=10)
    r1 = check_identity("gen_garvan_1", {"n": 1, "repair": True}, FIT_CONSTANT, pol)
    r2 = check_identity("gen_garvan_2", {"n": 1}, FIT_CONSTANT, pol)
    ok = all(r.passed and abs(abs(r.fitted_constant) - 1) <= 1e-6 and r.dispersion <= 1e-6
             and r.notes["n_samples"] >= 10 for r in (r1, r2)) and r1.notes["literal_degenerate"] is True
    report("AC7", ok, f"8x8 constant {r1.fitted_constant:.6g} (disp {r1.dispersion:.2g}), 9x9 constant "
                      f"{r2.fitted_constant:.6g} (disp {r2.dispersion:.2g}); literal form degenerate: "
                      f"{r1.notes['literal_degenerate']}")


def test_ac8_higher_power(report):
    cases = [([1], [1]), ([1, 1], [2]), ([1, 1], [1, 1])]
    choices = []
    disps = []
    for m, n in cases:
        scores = {}
        for rule in ("8phi", "phi/8"):
            r = check_identity("higher_power", {"m_weights": m, "n_weights": n}, FIT_CONSTANT,
                               conventions=CALIBRATED.with_(zeta_rule=rule))
            scores[rule] = r.dispersion
        choices.append(min(scores, key=scores.get))
        disps.append(scores["phi/8"])
    ok = set(choices) == {"phi/8"} and max(disps) <= 1e-5
    report("AC8", ok, f"zeta rule chosen per case {choices}; worst dispersion {max(disps):.2g} (limit 1e-5)")


def test_ac9_block_det(report):
    cfg = g2.SelfSewing(TAU2, W, 1e-3, 0.25)
    lines, ok = [], True
    for n in (1, 2):
        pts = g2.sample_near_punctures(n, cfg, 0)
        r16 = g2.check_block_det(n, cfg, TruncationPolicy(M=16), points=pts)
        r32 = g2.check_block_det(n, cfg, TruncationPolicy(M=32), points=pts)
        ok &= r16.rel_err <= 1e-6 and r32.rel_err < r16.rel_err
        lines.append(f"n={n}: M=16 {r16.rel_err:.2g}, M=32 {r32.rel_err:.2g}")
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(100):
        n, m = rng.integers(1, 4), rng.integers(2, 8)
        A, B, C = (rng.normal(size=s) + 1j * rng.normal(size=s) for s in ((n, n), (n, m), (m, n)))
        D = np.eye(m) - 0.3 * (rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m)))
        full = det_c(np.block([[A, B], [C, D]]))
        worst = max(worst, abs(schur_det(A, B, C, D) - full) / max(1, abs(full)))
    ok &= worst <= 1e-12
    report("AC9", ok, "block determinant " + "; ".join(lines) + f"; Schur oracle worst {worst:.2g} on 100 cases")


def test_ac10_two_tori(report):
    cfg = g2.TwoTorusSewing(TAU2, TAU2, 0.01, 0.3, 0.2, 0.1, 0.4)
    fac = g2.check_factorization(cfg)
    dets = []
    for kind, root in (("Q1", False), ("AA", True)):
        d16 = g2.sewing_det(kind, cfg, TruncationPolicy(M=16), root).value
        d32 = g2.sewing_det(kind, cfg, TruncationPolicy(M=32), root).value
        dets.append(abs(d16 - d32))
    eta6 = g2.check_eta6(cfg)
    ok = fac.rel_err <= 1e-9 and max(dets) <= 1e-10 and len(eta6.notes["z_scan"]) > 0
    report("AC10", ok, f"eps=0 factorisation residual {fac.rel_err:.2g}; |det16 - det32| {max(dets):.2g}; "
                       f"eta^6 z-scan reported ({len(eta6.notes['z_scan'])} points, not asserted)")


def test_ac11_prop3(report):
    r0 = g2.check_prop3(g2.SelfSewing(TAU2, W, 1e-3, 0.0), policy=TruncationPolicy(M=16))
    r = g2.check_prop3(g2.SelfSewing(TAU2, W, 1e-3, 0.25), policy=TruncationPolicy(M=16), n_samples=5)
    ok = r0.passed and r0.mode == AS_PRINTED and r.mode == FIT_CONSTANT and r.dispersion <= 1e-5
    report("AC11", ok, f"kappa=0 rel_err {r0.rel_err:.2g}; kappa=1/4 constant {r.fitted_constant:.6g}, "
                       f"dispersion {r.dispersion:.2g} over 5 samples (limit 1e-5)")


def test_ac12_cross_method(report):
    rng = np.random.default_rng(12)
    p1_worst = 0.0
    for _ in range(20):
        tw = twist_from_angles(*rng.uniform(0.05, 0.95, 2))
        z = TorusPoint(rng.uniform(-0.5, 0.5), rng.uniform(0.1, 0.3)).z(2j)
        a = p1_derivatives(z, tw, 2j, 3, "lattice-sum")
        b = p1_derivatives(z, tw, 2j, 3, "expansion")
        p1_worst = max(p1_worst, float(np.max(np.abs(a - b)) / max(1, np.max(np.abs(a)))))
    th_worst = 0.0
    tau = 0.2 + 1.1j
    for _ in range(20):
        a, b = rng.uniform(-1, 1, 2)
        z = complex(*rng.uniform(-2, 2, 2))
        t = theta_char(a, b, z, tau)
        s1 = theta_char(a, b, z + TWO_PI_I, tau) - cmath.exp(TWO_PI_I * a) * t
        s2 = theta_char(a, b, z + TWO_PI_I * tau, tau) - cmath.exp(-1j * math.pi * tau - z - TWO_PI_I * b) * t
        th_worst = max(th_worst, abs(s1) / max(1, abs(t)), abs(s2) / max(1, abs(t)))
    y = 0.1 + 0.05j
    q1 = laurent_1d(lambda x: 1 / (x - y), 0, 0.4, 6, n_quad=64, lo=-6)
    q1_err = np.max(np.abs(q1 - np.array([y ** (-j - 1) for j in range(-6, 0)])))
    q2 = laurent_2d(lambda xs, ys: 1 / (xs[:, None] - ys[None, :]), 1.0, 0.2, 0.0, 0.15, 5, 5, n_quad=64)
    q2_err = np.max(np.abs(q2 - np.array([[(-1) ** j * math.comb(j + k, j) for k in range(5)] for j in range(5)])))
    quad = max(q1_err, q2_err)
    ok = p1_worst <= 1e-9 and th_worst <= 1e-10 and quad <= 1e-12
    report("AC12", ok, f"P1 lattice vs expansion {p1_worst:.2g}; theta quasi-periodicity {th_worst:.2g}; "
                       f"contour residue tests {quad:.2g}; full-suite runtime is checked at session end")
