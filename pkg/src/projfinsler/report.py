"""Full verification run for one family and its flat JSON report."""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .geometry import DEFAULT_Z1_FLOOR, as_batch, sample_domain
from .metrics import FamilyDescriptor
from .pde import branch_residuals, curvature_system_residuals, rapcsak_residual
from .spray import flag_curvature_xyv, geodesic_bundle, speed_drift, straightness_deviation
from .tensor import fundamental_tensor_closed, hessian_tensor, min_eigenvalues

FLAG_COUNT = 32
GEODESIC_COUNT = 8
GEODESIC_STEPS = 1000
GEODESIC_DT = 1e-3


@dataclass
class Tolerances:
    pde: float = 1e-8
    flag: float = 1e-6
    geodesic: float = 1e-8
    det: float = 1e-8


@dataclass
class ResidualReport:
    family: str
    params: dict
    lam: float
    n: int
    seed: int
    sample_count: int
    max_rapcsak: float = math.nan
    max_eq3a: float = math.nan
    max_eq3b: float = math.nan
    max_eq6: float = math.nan
    min_eigen_g: float = math.nan
    max_flag_dev: float = math.nan
    max_geodesic_dev: float = math.nan
    det_crosscheck_max_rel: float = math.nan
    passed: bool = False
    tool_version: str = __version__
    tolerances: Tolerances = field(default_factory=Tolerances, repr=False)

    def evaluate_pass(self) -> bool:
        t = self.tolerances
        limits = [(self.max_rapcsak, t.pde), (self.max_eq3a, t.pde), (self.max_eq3b, t.pde),
                  (self.max_eq6, t.pde), (self.max_flag_dev, t.flag),
                  (self.max_geodesic_dev, t.geodesic), (self.det_crosscheck_max_rel, t.det)]
        # NaN compares False, so a missing value fails
        ok = all(val < tol for val, tol in limits) and self.min_eigen_g > 0
        self.passed = bool(ok)
        return self.passed

    def as_dict(self) -> dict:
        return {
            "family": self.family,
            "params": dict(sorted(self.params.items())),
            "lambda": self.lam,
            "n": self.n,
            "seed": self.seed,
            "sample_count": self.sample_count,
            "max_rapcsak": self.max_rapcsak,
            "max_eq3a": self.max_eq3a,
            "max_eq3b": self.max_eq3b,
            "max_eq6": self.max_eq6,
            "min_eigen_g": self.min_eigen_g,
            "max_flag_dev": self.max_flag_dev,
            "max_geodesic_dev": self.max_geodesic_dev,
            "det_crosscheck_max_rel": self.det_crosscheck_max_rel,
            "pass": self.passed,
            "tool_version": self.tool_version,
        }

    def to_json(self) -> str:
        return dumps(self.as_dict())


def fmt_float(value) -> str:
    """17 significant digits, always with a decimal mark; empty for non-finite."""
    value = float(value)
    if not math.isfinite(value):
        return ""
    text = format(value, ".17g")
    return text if any(ch in text for ch in ".e") else text + ".0"


def _encode(obj) -> str:
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj) or "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_encode(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj) -> str:
    """JSON with 17 significant digits, insertion key order, null for non-finite."""
    return _encode(obj)


def thread_count() -> int:
    raw = os.environ.get("FINSLER_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _chunks(n_items: int, parts: int):
    bounds = np.linspace(0, n_items, parts + 1).astype(int)
    return [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _fan_out(fn, items, workers):
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _pde_block(desc, batch, lam):
    rap = np.asarray(rapcsak_residual(desc, batch))
    a, b = curvature_system_residuals(desc, batch, lam)
    eq6 = branch_residuals(desc, batch, lam).eq6
    ft = fundamental_tensor_closed(desc, batch)
    g_oracle = hessian_tensor(desc, batch)
    det_o = np.linalg.det(g_oracle)
    det_rel = np.abs(ft.det_closed - det_o) / np.abs(det_o)
    return (float(rap.max()), float(np.max(a)), float(np.max(b)), float(np.max(eq6)),
            float(np.min(min_eigenvalues(ft.g))), float(np.max(det_rel)))


def flag_sample(points, count: int, seed: int):
    """``count`` flags on the first sample points with random transverse edges."""
    rng = np.random.default_rng(seed + 1)
    pts = [points[i % len(points)] for i in range(count)]
    x = np.array([p.x for p in pts])
    y = np.array([p.y for p in pts])
    V = rng.standard_normal(x.shape)
    return x, y, V


def run_verify(desc: FamilyDescriptor, samples: int = 500, seed: int = 0,
               tolerances: Tolerances | None = None, z1_floor: float = DEFAULT_Z1_FLOOR,
               workers: int | None = None, geodesics: int = GEODESIC_COUNT,
               flags: int = FLAG_COUNT) -> ResidualReport:
    if desc.lam is None:
        raise ValueError(f"{desc.family_id} has no fixed curvature constant")
    workers = thread_count() if workers is None else workers
    tol = tolerances or Tolerances()
    lam = desc.lam
    rep = ResidualReport(desc.family_id, desc.scalar_params(), lam, desc.n, seed, samples,
                         tolerances=tol)
    points = sample_domain(desc, samples, seed, z1_floor=z1_floor)
    batch, _ = as_batch(points)

    blocks = _fan_out(lambda s: _pde_block(desc, batch.subset(s), lam),
                      _chunks(len(batch), workers), workers)
    cols = list(zip(*blocks))
    rep.max_rapcsak, rep.max_eq3a, rep.max_eq3b, rep.max_eq6 = (max(c) for c in cols[:4])
    rep.min_eigen_g = min(cols[4])
    rep.det_crosscheck_max_rel = max(cols[5])

    x, y, V = flag_sample(points, flags, seed)
    K = np.concatenate(_fan_out(lambda s: flag_curvature_xyv(desc, x[s], y[s], V[s]),
                                _chunks(flags, workers), workers))
    rep.max_flag_dev = float(np.max(np.abs(K - lam)))

    gx = np.array([p.x for p in points[:geodesics]])
    gy = np.array([p.y for p in points[:geodesics]])
    trajs = sum(_fan_out(lambda s: geodesic_bundle(desc, gx[s], gy[s], GEODESIC_STEPS, GEODESIC_DT),
                         _chunks(len(gx), workers), workers), [])
    rep.max_geodesic_dev = max(max(straightness_deviation(t), speed_drift(t)) for t in trajs)
    rep.evaluate_pass()
    return rep
