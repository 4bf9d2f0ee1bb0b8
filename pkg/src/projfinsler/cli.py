"""Command-line interface: ``projfinsler verify|grid|geodesic|classify-lab``.

Exit codes: 0 pass, 1 verification failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import io
import math
import sys

import numpy as np

from . import classification as cl
from .geometry import batch_from_xy
from .metrics import DomainError, ParameterError, family, metric_value
from .report import Tolerances, dumps, fmt_float, run_verify
from .spray import LeftDomainError, flag_curvature_xyv, geodesic_integrate, straightness_deviation
from .tensor import fundamental_tensor_closed, min_eigenvalues

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

CLI_FAMILIES = ("euclidean", "berwald", "projective_spherical", "bryant_classic", "klein",
                "funk", "randers_k_neg1", "bryant_type", "neg_pair")
SUITES = ("ode-lemma", "k1-system", "kneg1-system", "conserved", "remarks")


class UsageError(Exception):
    pass


def _range(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'lo,hi', got {text!r}") from None
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo:
        raise argparse.ArgumentTypeError(f"malformed range {text!r}")
    return lo, hi


def _vector(text: str) -> np.ndarray:
    try:
        vals = np.array([float(t) for t in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from None
    if not np.all(np.isfinite(vals)):
        raise argparse.ArgumentTypeError(f"non-finite component in {text!r}")
    return vals


def _family_id(text: str) -> str:
    fid = text.replace("-", "_")
    if fid not in CLI_FAMILIES:
        raise argparse.ArgumentTypeError(
            f"unknown family {text!r}; choose from {', '.join(CLI_FAMILIES)}")
    return fid


def _add_family_args(p: argparse.ArgumentParser):
    p.add_argument("--family", type=_family_id, required=True)
    p.add_argument("--c", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--d1", type=float)
    p.add_argument("--d2", type=float)
    p.add_argument("--sign", choices=("plus", "minus"))
    p.add_argument("--dim", type=int, default=3)


def _descriptor(args, n=None):
    params = {k: getattr(args, k) for k in ("c", "alpha", "d1", "d2", "sign")
              if getattr(args, k) is not None}
    try:
        return family(args.family, args.dim if n is None else n, **params)
    except ParameterError as exc:
        raise UsageError(str(exc)) from None


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- verify ----------------------------------------------------------------

def cmd_verify(args) -> int:
    desc = _descriptor(args)
    if args.samples < 1:
        raise UsageError("--samples must be at least 1")
    tol = Tolerances()
    if args.tol is not None:
        tol.pde = args.tol
    for name in ("pde", "flag", "geodesic", "det"):
        val = getattr(args, f"tol_{name}")
        if val is not None:
            setattr(tol, name, val)
    rep = run_verify(desc, args.samples, args.seed, tol, args.z1_floor)
    _emit(rep.to_json() + "\n", args.out)
    if not rep.passed:
        print(f"verification failed for {desc.label()}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


# -- grid ------------------------------------------------------------------

GRID_HEADER = "z1,z2,phi_tilde,K_numeric,det_g,min_eigen_g"


def grid_rows(desc, z1_range, z2_range, resolution):
    """Cells at x = z2 e1 + z1 e2, y = e1, in row-major (z1, z2) order."""
    n = desc.n
    z1s = np.linspace(*z1_range, resolution)
    z2s = np.linspace(*z2_range, resolution)
    Z1, Z2 = np.meshgrid(z1s, z2s, indexing="ij")
    Z1, Z2 = Z1.ravel(), Z2.ravel()
    x = np.zeros((Z1.size, n))
    x[:, 0], x[:, 1] = Z2, Z1
    y = np.zeros_like(x)
    y[:, 0] = 1.0
    inside = desc.contains(x)
    idx = np.flatnonzero(inside)
    cols = np.full((Z1.size, 4), np.nan)
    if idx.size:
        try:
            cols[idx] = _grid_cells(desc, x[idx], y[idx])
        except (ValueError, ArithmeticError):
            # a cell on the boundary up to rounding; evaluate one by one
            for i in idx:
                try:
                    cols[i] = _grid_cells(desc, x[i:i + 1], y[i:i + 1])[0]
                except (ValueError, ArithmeticError):
                    pass
    rows = []
    for i in range(Z1.size):
        cells = [fmt_float(Z1[i]), fmt_float(Z2[i])] + [fmt_float(v) for v in cols[i]]
        rows.append(",".join(cells))
    return rows


def _grid_cells(desc, x, y):
    batch = batch_from_xy(x, y)
    V = np.zeros_like(x)
    V[:, 1] = 1.0
    ft = fundamental_tensor_closed(desc, batch)
    return np.column_stack([np.asarray(metric_value(desc, batch)),
                            flag_curvature_xyv(desc, x, y, V),
                            ft.det_closed, min_eigenvalues(ft.g)])


def cmd_grid(args) -> int:
    desc = _descriptor(args)
    if args.resolution < 1:
        raise UsageError("--resolution must be at least 1")
    if args.z1_range[0] < 0:
        raise UsageError("z1 is a length; --z1-range must be non-negative")
    rows = grid_rows(desc, args.z1_range, args.z2_range, args.resolution)
    _emit("\n".join([GRID_HEADER, *rows]) + "\n", args.out)
    return EXIT_OK


# -- geodesic --------------------------------------------------------------

def cmd_geodesic(args) -> int:
    n = args.x0.size
    if args.y0.size != n:
        raise UsageError("--x0 and --y0 must have the same length")
    desc = _descriptor(args, n)
    if not desc.contains(args.x0[None])[0]:
        raise UsageError("initial point lies outside the domain")
    if args.steps < 1 or not args.dt > 0:
        raise UsageError("--steps must be positive and --dt > 0")
    try:
        traj = geodesic_integrate(desc, args.x0, args.y0, args.steps, args.dt)
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    except LeftDomainError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_FAIL
    buf = io.StringIO()
    buf.write(",".join(["t", *(f"x_{i + 1}" for i in range(n)), "speed", "F_along"]) + "\n")
    speed = np.linalg.norm(traj.xdot, axis=1)
    for t, x, s, F in zip(traj.t, traj.x, speed, traj.F):
        buf.write(",".join(fmt_float(v) for v in (t, *x, s, F)) + "\n")
    buf.write(f"# straightness_deviation,{fmt_float(straightness_deviation(traj))}\n")
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


# -- classify-lab ----------------------------------------------------------

ODE_INSTANCES = {0.0: ((1.0, 2.0), (2.0, 4.0), (0.5, 3.0)),
                 1.0: ((1.0, 0.0), (1.0, 2.0), (2.0, 1.0)),
                 -1.0: ((1.0, 4.0), (1.0, 3.0), (2.0, 6.0))}
ODE_TOL = 1e-12
SYSTEM_TOL = 1e-10


def _scaled(fn, k):
    return fn if k == 1.0 else (lambda z: k * fn(z))


def suite_checks(name: str, perturb: float = 0.0) -> list[cl.Check]:
    k = 1.0 + perturb
    checks = []
    if name == "ode-lemma":
        grid = np.linspace(0.0, 2.0, 200)
        for lam, pairs in ODE_INSTANCES.items():
            for c1, c2 in pairs:
                q = cl.QuadraticReciprocal.solve_c3(c1, c2, lam)
                if perturb:
                    q = cl.QuadraticReciprocal(q.c1, q.c2, q.c3 * k, lam, validate=False)
                res = max(cl.ode_lemma_residual(q, grid))
                checks.append(cl.Check(f"ode lemma lam={lam:g} c=({q.c1:g},{q.c2:g},{q.c3:g})",
                                       res, ODE_TOL))
    elif name == "k1-system":
        z = np.linspace(0.0, 3.0, 200)
        c1, c2 = cl.spherical_coeffs(1.0)
        checks.append(cl.Check("K=1 system, projective spherical c=1",
                               cl.k1_system_residual(_scaled(c1, k), c2, z).max, SYSTEM_TOL))
        for s, tag in ((1, "plus"), (-1, "minus")):
            c1, c2 = cl.bryant_type_coeffs(1.0, 0.3, s)
            checks.append(cl.Check(f"K=1 system, bryant_type d1=1 d2=0.3 {tag}",
                                   cl.k1_system_residual(_scaled(c1, k), c2, z).max, SYSTEM_TOL))
    elif name == "kneg1-system":
        z = cl.safe_grid(0.0, 0.9)
        c1, c2 = cl.klein_coeffs(1.0)
        checks.append(cl.Check("K=-1 system, klein c=1",
                               cl.k_neg1_system_residual(_scaled(c1, k), c2, z).max, SYSTEM_TOL))
        for s, tag in ((1, "plus"), (-1, "minus")):
            c1, c2 = cl.neg_pair_coeffs(0.1, 0.6, s)
            checks.append(cl.Check(f"K=-1 system, neg_pair d1=0.1 d2=0.6 {tag}",
                                   cl.k_neg1_system_residual(_scaled(c1, k), c2, z).max,
                                   SYSTEM_TOL))
    elif name == "conserved":
        cases = (("bryant_type", {"d1": 1.0, "d2": 0.0}, np.linspace(0.0, 2.0, 200)),
                 ("neg_pair", {"d1": 0.1, "d2": 0.6}, cl.safe_grid(0.0, 1.0)),
                 ("berwald", {"c": 1.0}, cl.safe_grid(0.0, 1.0)))
        for fid, params, z in cases:
            for label, drift in cl.conserved_quantities(fid, params, z, c1_scale=k).checks.items():
                checks.append(cl.Check(f"{fid}: {label}", drift, SYSTEM_TOL))
        c1, c2 = cl.berwald_coeffs(1.0)
        # scaling c1 only rescales the metric, so the control perturbs c2
        checks.append(cl.Check("K=0 system, berwald c=1 d=1",
                               cl.k0_system_residual(c1, _scaled(c2, k), cl.safe_grid(0.0, 1.0)).max,
                               SYSTEM_TOL))
    elif name == "remarks":
        if perturb:
            raise UsageError("--perturb is not supported by the remarks suite")
        checks = cl.remark_cross_checks()
    else:
        raise UsageError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    return checks


def cmd_classify_lab(args) -> int:
    checks = suite_checks(args.suite, args.perturb)
    payload = [{"check": c.check, "max_residual": float(c.max_residual),
                "tolerance": float(c.tolerance), "pass": c.passed} for c in checks]
    _emit(dumps(payload) + "\n", args.out)
    failed = [c.check for c in checks if not c.passed]
    if failed:
        print("failed: " + "; ".join(failed), file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


# -- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="projfinsler",
                                     description="Verify projective spherically symmetric Finsler metrics.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="full residual suite, JSON report")
    _add_family_args(p)
    p.add_argument("--samples", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, help="PDE residual tolerance")
    p.add_argument("--tol-pde", type=float)
    p.add_argument("--tol-flag", type=float)
    p.add_argument("--tol-geodesic", type=float)
    p.add_argument("--tol-det", type=float)
    p.add_argument("--z1-floor", type=float, default=1e-3)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("grid", help="phi~, K, det g and min eigenvalue on a (z1, z2) grid")
    _add_family_args(p)
    p.add_argument("--z1-range", type=_range, default=(0.0, 0.9))
    p.add_argument("--z2-range", type=_range, default=(0.0, 0.9))
    p.add_argument("--resolution", type=int, default=21)
    p.add_argument("--out")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("geodesic", help="RK4 trajectory as CSV")
    _add_family_args(p)
    p.add_argument("--x0", type=_vector, required=True)
    p.add_argument("--y0", type=_vector, required=True)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--out")
    p.set_defaults(func=cmd_geodesic)

    p = sub.add_parser("classify-lab", help="coefficient-system and remark checks")
    p.add_argument("--suite", required=True)
    p.add_argument("--perturb", type=float, default=0.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_classify_lab)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
