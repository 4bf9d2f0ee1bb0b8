"""Acceptance criteria, one test (and one PASS/FAIL line) per criterion.

Run directly with ``python tests/test_acceptance.py`` to print the lines
without pytest, or under pytest, where they are repeated in the summary.
"""

import math
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from conftest import ACCEPTANCE_LINES  # noqa: E402

from projfinsler import classification as cl  # noqa: E402
from projfinsler.cli import ODE_INSTANCES  # noqa: E402
from projfinsler.geometry import invariants_from, sample_domain  # noqa: E402
from projfinsler.metrics import all_variants, custom_family, family  # noqa: E402
from projfinsler.pde import curvature_system_residuals, rapcsak_residual  # noqa: E402
from projfinsler.report import flag_sample  # noqa: E402
from projfinsler.spray import (constant_curvature_tensor_residual, flag_curvature_xyv,  # noqa: E402
                               geodesic_bundle, geodesic_integrate, speed_drift,
                               straightness_deviation)
from projfinsler.tensor import fundamental_tensor_closed, min_eigenvalues  # noqa: E402

VARIANTS = all_variants(3)
SEED = 2024
PROBE = invariants_from(np.array([0.31, 0.17, -0.12]),
                        np.array([0.4, -0.7, 0.59]) / np.linalg.norm([0.4, -0.7, 0.59]))


def report(tag: str, ok: bool, detail: str):
    line = f"{'PASS' if ok else 'FAIL'}  criterion {tag}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


def test_criterion_1_projectivity():
    t0 = time.perf_counter()
    worst, where = 0.0, ""
    for desc in VARIANTS:
        for n in (2, 3, 5):
            d = desc.with_dim(n)
            pts = sample_domain(d, 500, seed=SEED + n, z1_floor=1e-3, margin=0.05)
            val = float(np.max(rapcsak_residual(d, pts)))
            if val >= worst:
                worst, where = val, f"{d.label()} n={n}"
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-8 and elapsed < 30
    assert report("1", ok, f"max Rapcsak residual {worst:.2e} < 1e-8 ({where}); "
                           f"{len(VARIANTS)} variants x n in (2,3,5) x 500 in {elapsed:.1f}s < 30s")


def test_criterion_2_curvature_pde():
    worst, weakest = 0.0, math.inf
    for desc in VARIANTS:
        pts = sample_domain(desc, 500, seed=SEED)
        a, b = curvature_system_residuals(desc, pts, desc.lam)
        worst = max(worst, float(a.max()), float(b.max()))
        pa, pb = curvature_system_residuals(desc, PROBE, desc.lam + 1.0)
        weakest = min(weakest, max(pa, pb))
    ok = worst < 1e-8 and weakest > 1e-4
    assert report("2", ok, f"max eq3a/eq3b at lambda {worst:.2e} < 1e-8; "
                           f"min wrong-lambda probe {weakest:.2e} > 1e-4")


def test_criterion_3_flag_curvature_oracle():
    worst_k, worst_t, disagree = 0.0, 0.0, 0
    for desc in VARIANTS:
        pts = sample_domain(desc, 32, seed=SEED)
        x, y, V = flag_sample(pts, 32, SEED)
        K = flag_curvature_xyv(desc, x, y, V)
        worst_k = max(worst_k, float(np.max(np.abs(K - desc.lam))))
        worst_t = max(worst_t, float(np.max(constant_curvature_tensor_residual(desc, x, y, desc.lam))))
        a, b = curvature_system_residuals(desc, pts, desc.lam)
        pde_ok = np.maximum(a, b) < 1e-8
        disagree += int(np.sum(pde_ok & (np.abs(K - desc.lam) >= 1e-6)))
    ok = worst_k < 1e-6 and worst_t < 1e-6 and disagree == 0
    assert report("3", ok, f"max |K - lambda| {worst_k:.2e} < 1e-6 on 32 flags/family; "
                           f"tensor identity {worst_t:.2e} < 1e-6; PDE/oracle disagreements {disagree}")


def test_criterion_4_geodesics():
    worst_dev, worst_drift, short, where = 0.0, 0.0, 0, ""
    for desc in VARIANTS:
        pts = sample_domain(desc, 8, seed=SEED)
        x0 = np.array([p.x for p in pts])
        y0 = np.array([p.y for p in pts])
        for tr in geodesic_bundle(desc, x0, y0, steps=1000, step_size=1e-3):
            worst_dev = max(worst_dev, straightness_deviation(tr))
            if speed_drift(tr) >= worst_drift:
                worst_drift, where = speed_drift(tr), desc.label()
            short += int(len(tr.t) < 11)
    ok = worst_dev < 1e-8 and worst_drift < 1e-8 and short == 0
    assert report("4", ok, f"max straightness deviation {worst_dev:.2e} < 1e-8; "
                           f"max F drift {worst_drift:.2e} < 1e-8 ({where}); 8 geodesics x 1000 RK4 steps")


def test_criterion_5_convexity():
    worst_det, min_eig = 0.0, math.inf
    for desc in VARIANTS:
        for n in (2, 3, 5):
            d = desc.with_dim(n)
            ft = fundamental_tensor_closed(d, sample_domain(d, 500, seed=SEED + 10 * n))
            rel = np.abs(ft.det_closed - ft.det_numeric) / np.abs(ft.det_numeric)
            worst_det = max(worst_det, float(rel.max()))
            min_eig = min(min_eig, float(np.min(min_eigenvalues(ft.g))))
    ok = worst_det < 1e-8 and min_eig > 0
    assert report("5", ok, f"det closed vs matrix max rel {worst_det:.2e} < 1e-8; "
                           f"min eigenvalue of g {min_eig:.3e} > 0")


def test_criterion_6_classification():
    grid = np.linspace(0.0, 2.0, 200)
    ode = max(max(cl.ode_lemma_residual(cl.QuadraticReciprocal.solve_c3(c1, c2, lam), grid))
              for lam, pairs in ODE_INSTANCES.items() for c1, c2 in pairs)
    z3 = np.linspace(0.0, 3.0, 200)
    z09 = np.linspace(0.0, 0.9, 200)
    systems = [cl.k1_system_residual(*cl.spherical_coeffs(1.0), z3).max,
               cl.k_neg1_system_residual(*cl.klein_coeffs(1.0), z09).max]
    for s in (1, -1):
        systems.append(cl.k1_system_residual(*cl.bryant_type_coeffs(1.0, 0.3, s), z3).max)
        systems.append(cl.k_neg1_system_residual(*cl.neg_pair_coeffs(0.1, 0.6, s), z09).max)
    sysmax = max(systems)
    zb = cl.safe_grid(0.0, 1.0)
    drift = max(cl.conserved_quantities("bryant_type", {"d1": 1.0, "d2": 0.0, "sign": s},
                                        np.linspace(0, 2, 200)).max_drift for s in (1, -1))
    drift = max(drift, cl.conserved_quantities("neg_pair", {"d1": 0.1, "d2": 0.6}, zb).max_drift,
                cl.conserved_quantities("berwald", {"c": 1.0}, zb).max_drift,
                cl.conserved_quantities("berwald", {"c": 1.0, "sign": -1}, zb).max_drift)
    ok = ode < 1e-12 and sysmax < 1e-10 and drift < 1e-10
    assert report("6", ok, f"ODE lemma max {ode:.2e} < 1e-12 (9 instances); "
                           f"coefficient systems max {sysmax:.2e} < 1e-10; "
                           f"conserved drift {drift:.2e} < 1e-10")


def test_criterion_7i_bryant_remark():
    chk = cl.bryant_remark_check()
    assert report("7(i)", chk.passed,
                  f"bryant_type(sin^2(2a)/4, cos(2a)/2) vs bryant_classic(a), "
                  f"a in (pi/12, pi/6, pi/5) x 100 points, best sign: max |dF| "
                  f"{chk.max_residual:.2e} < 1e-10")


def test_criterion_7ii_berwald_remark():
    chk = cl.berwald_remark_check()
    assert report("7(ii)", chk.passed, f"berwald(c=1) vs closed Berwald example max rel "
                                       f"{chk.max_residual:.2e} < 1e-12")


def test_criterion_7iii_randers_funk():
    ratio, curv = cl.randers_funk_check()
    ok = ratio.passed and curv.passed
    assert report("7(iii)", ok, f"|Funk/randers - 2| {ratio.max_residual:.2e} < 1e-9; "
                                f"randers curvature residual at K=-1 {curv.max_residual:.2e} < 1e-9")


def test_criterion_8_negative_controls():
    vals = {}
    bad = custom_family(lambda inv: inv.u + 0.1 * inv.r * inv.u)
    vals["rapcsak(u + 0.1 r u)"] = float(np.min(rapcsak_residual(bad, sample_domain(bad, 100, SEED))))
    klein = family("klein", 3, c=1.0)
    kp = sample_domain(klein, 100, SEED)
    vals["klein eq3a at lambda=0"] = float(np.min(curvature_system_residuals(klein, kp, 0.0)[0]))
    for lam in (-2, -1.5, -0.5, 0, 1):
        vals[f"klein probe lambda={lam}"] = curvature_system_residuals(klein, PROBE, lam)[0]
    for desc in VARIANTS:
        vals[f"{desc.label()} probe lambda+1"] = max(curvature_system_residuals(desc, PROBE, desc.lam + 1.0))
    x = np.array([p.x for p in kp[:16]])
    y = np.array([p.y for p in kp[:16]])
    vals["klein tensor identity at lambda=0"] = float(np.min(constant_curvature_tensor_residual(klein, x, y, 0.0)))
    bend = custom_family(lambda inv: inv.u * (1 + 0.1 * inv.w))
    tr = geodesic_integrate(bend, np.array([0.3, 0.1, 0]), np.array([0.2, 1.0, 0.1]), 1000, 1e-3)
    vals["geodesic of u(1 + 0.1 z1^2)"] = straightness_deviation(tr)
    vals["ode lemma (1,0,2) lam=1"] = max(cl.ode_lemma_residual(
        cl.QuadraticReciprocal(1, 0, 2, 1, validate=False), [0.0]))
    z3 = np.linspace(0.0, 3.0, 200)
    vals["K=1 system (z1+1, 1)"] = cl.k1_system_residual(lambda t: t + 1.0, lambda t: 1.0 + 0 * t, z3).max
    c1, _ = cl.neg_pair_coeffs(0.1, 0.6)
    vals["K=-1 system mismatched branch"] = cl.k_neg1_system_residual(c1, c1, np.linspace(0, 0.9, 200)).max
    name, weakest = min(vals.items(), key=lambda kv: kv[1])
    ok = weakest > 1e-4
    assert report("8", ok, f"{len(vals)} controls, weakest '{name}' = {weakest:.2e} > 1e-4")


if __name__ == "__main__":
    failed = 0
    for name, fn in list(globals().items()):
        if name.startswith("test_criterion"):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
