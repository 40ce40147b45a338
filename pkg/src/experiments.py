"""
Experiment harness: R sweeps over the constructions and measurements,
result caching and acceptance checks.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import threading
import time
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from .boundary import BoundaryKind, BoundaryMap, analytic_K, boundary_directions, estimate_K, theta_constants
from .config import Config, get_cache_size, get_seed, get_workers
from .embeddings import (
    build_sqrt_tree_embedding,
    build_tree_to_h2,
    candidate_pairs,
    measure_distortion,
    radial_extension,
    verify_qie,
)
from .errors import AcceptanceFailure, ExperimentError, QILabError, UsageError
from .export import _json_default
from .growth import _fit_power, fit_growth, rsquare
from .logging_config import get_logger, log_timing
from .poincare import (
    continuum_grad_integral,
    cover_test_function,
    make_ball_kernel,
    normalized_grad_energy,
    poincare_exact_p2,
    poincare_lower_ascent,
    testfunction_lower_bound,
)
from .sepvol import (
    EXACT_C1_LIMIT,
    connectivity_bound_check,
    family_kernel,
    sep_lower_poincare,
    sep_upper,
    vol_a,
    volume_growth_lower_bound,
)
from .spaces import (
    SpaceParams,
    build_h2_net,
    build_ray_net,
    build_zmu_net,
    h2_distance_array,
    h2_visual_distance,
    radial_distance_formula,
    ray_deviation,
    _neg_log,
)

logger = get_logger(__name__)

# Top-circle size of the sector nets behind the sqrt(R) tree runs
SECTOR_TOP_POINTS = 1500


class Experiment(str, Enum):
    TREE_EMBED = "tree_embed"
    TREE_TO_H2 = "tree_to_h2"
    RADIAL_IDENTITY = "radial_identity"
    RADIAL_ZMU = "radial_zmu"
    RADIAL_UNIPOTENT = "radial_unipotent"
    POINCARE_SCALING = "poincare_scaling"
    KR_CURVE = "kr_curve"
    SEP_SCALING = "sep_scaling"
    VOL_GROWTH = "vol_growth"
    DISTANCE_APPROX = "distance_approx"
    TESTFN = "testfn"


DEFAULT_R = {
    Experiment.TREE_EMBED: (9, 16, 25, 36, 49),
    Experiment.TREE_TO_H2: (4, 5, 6, 7, 8, 9, 10),
    Experiment.RADIAL_IDENTITY: (5, 10, 15, 20, 25, 30),
    Experiment.RADIAL_ZMU: (5, 10, 15),
    Experiment.RADIAL_UNIPOTENT: (5, 10, 20),
    Experiment.POINCARE_SCALING: tuple(range(4, 13)),
    Experiment.KR_CURVE: (5, 10, 20, 40),
    Experiment.SEP_SCALING: (4, 5, 6, 7, 8),
    Experiment.VOL_GROWTH: tuple(range(4, 11)),
    Experiment.DISTANCE_APPROX: (10, 20, 30),
    Experiment.TESTFN: (3,),
}


@dataclass(frozen=True)
class ExperimentSpec:
    experiment: Experiment
    R_list: Tuple[float, ...] = ()
    mu: Tuple[float, ...] = (1.0, 2.0)
    mu_prime: Tuple[float, ...] = (1.0, 1.0)
    mesh: float = 1.0
    delta: float = Config.DEFAULT_DELTA
    seed: int = Config.DEFAULT_SEED
    theta: str = "unipotent"
    alpha: float = 0.8
    beta: float = 1.5
    d: int = 3
    p: float = 2.0
    a: float = 1.0
    width: float = 2.0
    grid_n: int = 1024
    level_cap: Optional[int] = Config.DEFAULT_LEVEL_CAP
    n_pairs: int = 10_000
    growth_alpha: float = 2.0
    growth_lambda: float = 2.0
    output: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "experiment", Experiment(self.experiment))
        R = tuple(float(r) for r in (self.R_list or DEFAULT_R[self.experiment]))
        object.__setattr__(self, "R_list", R)
        if any(b <= a for a, b in zip(R, R[1:])):
            raise UsageError(f"R values must be strictly ascending, got {list(R)}")
        if any(r <= 0 for r in R):
            raise UsageError("R values must be positive")
        object.__setattr__(self, "mu", tuple(float(m) for m in self.mu))
        object.__setattr__(self, "mu_prime", tuple(float(m) for m in self.mu_prime))
        if self.mesh <= 0 or self.width <= 0 or self.a < 0:
            raise UsageError("mesh and width must be positive, a non-negative")
        if self.p < 1:
            raise UsageError(f"p must be >= 1, got {self.p}")
        if self.grid_n < 2:
            raise UsageError(f"grid_n must be >= 2, got {self.grid_n}")

    @classmethod
    def for_experiment(cls, experiment, **overrides) -> "ExperimentSpec":
        """Spec with the experiment's usual parameters, then the overrides"""
        experiment = Experiment(experiment)
        base: Dict[str, Any] = {"seed": get_seed()}
        if experiment == Experiment.TESTFN:
            base.update(mu=(1.0, 1.0), p=3.0, mesh=0.125, level_cap=None)
        elif experiment == Experiment.RADIAL_IDENTITY:
            base.update(mu=(1.0, 2.0), mu_prime=(1.0, 2.0))
        elif experiment == Experiment.KR_CURVE:
            base.update(theta="unipotent")
        base.update({k: v for k, v in overrides.items() if v is not None})
        return cls(experiment, **base)

    def key(self) -> str:
        """Stable hash of everything that affects the rows"""
        payload = asdict(self)
        payload.pop("output", None)
        payload["experiment"] = self.experiment.value
        text = json.dumps(payload, sort_keys=True, default=str)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


class NetCache:
    """Thread-safe LRU of constructed nets, with optional persistence of experiment rows"""

    def __init__(self, maxsize: Optional[int] = None, rows_file: Optional[str] = None,
                 ttl_seconds: int = 7 * 86400):
        self.maxsize = maxsize if maxsize is not None else get_cache_size()
        self.rows_file = rows_file
        self.ttl_seconds = ttl_seconds
        self._cache: OrderedDict = OrderedDict()
        self._rows: Dict[str, dict] = {}
        self._lock = threading.Lock()
        self._build_locks: Dict[Tuple, threading.Lock] = {}
        self.hits = 0
        self.misses = 0
        self._load_from_disk()

    def _load_from_disk(self) -> None:
        if not self.rows_file or not os.path.exists(self.rows_file):
            return
        try:
            with open(self.rows_file, "r", encoding="utf-8") as f:
                content = f.read().strip()
            if not content:
                return
            data = json.loads(content)
            now = time.time()
            for key, entry in data.items():
                if isinstance(entry, dict) and "rows" in entry and now - entry.get("timestamp", 0) < self.ttl_seconds:
                    self._rows[key] = entry
        except (json.JSONDecodeError, ValueError, OSError) as e:
            logger.warning(f"Ignoring unreadable row cache {self.rows_file}: {e}")

    def _save_to_disk(self) -> None:
        if not self.rows_file:
            return

        try:
            with self._lock:
                data = dict(self._rows)
            with open(self.rows_file, "w", encoding="utf-8") as f:
                json.dump(data, f, indent=2, default=_json_default)
        except OSError as e:
            logger.warning(f"Failed to save row cache: {e}")

    def get(self, key: Tuple) -> Any:
        with self._lock:
            if key in self._cache:
                self._cache.move_to_end(key)
                self.hits += 1
                return self._cache[key]
            self.misses += 1
            return None

    def set(self, key: Tuple, value: Any) -> None:
        with self._lock:
            if key in self._cache:
                self._cache.move_to_end(key)
            elif len(self._cache) >= self.maxsize > 0:
                self._cache.popitem(last=False)
            if self.maxsize > 0:
                self._cache[key] = value

    def get_or_build(self, key: Tuple, builder: Callable[[], Any]) -> Any:
        """Cached value for key; concurrent callers of one key share a single build"""
        value = self.get(key)
        if value is not None:
            return value
        with self._lock:
            build_lock = self._build_locks.setdefault(key, threading.Lock())
        with build_lock:
            with self._lock:
                value = self._cache.get(key)
                if value is not None:
                    self._cache.move_to_end(key)
            if value is None:
                value = builder()
                self.set(key, value)
        with self._lock:
            self._build_locks.pop(key, None)
        return value

    def load_rows(self, spec_key: str) -> Optional[List[dict]]:
        with self._lock:
            entry = self._rows.get(spec_key)
        return None if entry is None else list(entry["rows"])

    def save_rows(self, spec_key: str, rows: List[dict]) -> None:
        with self._lock:
            self._rows[spec_key] = {"rows": rows, "timestamp": time.time()}
        self._save_to_disk()

    def clear(self) -> None:
        with self._lock:
            self._cache.clear()
            self._rows.clear()
            self._build_locks.clear()
        if self.rows_file and os.path.exists(self.rows_file):
            os.remove(self.rows_file)


# ---------------------------------------------------------------------------
# Per-R rows
# ---------------------------------------------------------------------------

def _distortion_columns(fmap, spec: ExperimentSpec, pairs=None) -> dict:
    if pairs is None:
        pairs = candidate_pairs(fmap, Config.MAX_PAIR_POINTS, spec.seed)
    I, J, _ = pairs
    report = measure_distortion(fmap, pairs=(I, J))
    cols = {k: v for k, v in report.as_dict().items() if k != "witnesses"}
    cols["pairs"] = report.n_pairs
    cols["witness_upper"] = list(report.witness_pairs["upper"])
    cols["witness_lower"] = list(report.witness_pairs["lower"])
    return cols


def _theta(spec: ExperimentSpec, kind: Optional[str] = None) -> BoundaryMap:
    kind = BoundaryKind(kind or spec.theta)
    if kind == BoundaryKind.IDENTITY:
        return BoundaryMap.identity(mu=spec.mu)
    if kind == BoundaryKind.ZMU_IDENTITY:
        return BoundaryMap.zmu_identity(spec.mu, spec.mu_prime)
    if kind == BoundaryKind.BIHOLDER:
        return BoundaryMap.biholder(spec.alpha, spec.beta, dim=len(spec.mu))
    return BoundaryMap.unipotent()


def _row_tree_embed(spec: ExperimentSpec, R: float, cache: NetCache) -> dict:
    eps = math.sqrt(R)
    sector = min(2 * math.pi, SECTOR_TOP_POINTS * 2 * math.sinh(eps / 2) / math.sinh(R))
    net = cache.get_or_build(("h2", R, eps, sector), lambda: build_h2_net(R, eps, sector=sector, delta=spec.delta))
    tree, fmap = build_sqrt_tree_embedding(net, R)
    row = {"points": len(net), "tree_nodes": len(tree), "sector": sector,
           "max_jump": fmap.meta["max_jump"]}
    row.update(_distortion_columns(fmap, spec))
    return row


def _row_tree_to_h2(spec: ExperimentSpec, R: float, cache: NetCache) -> dict:
    fmap, _ = build_tree_to_h2(spec.d, int(R))
    radii = fmap.meta["radii"]
    ratios = [radii[k] / (k * math.log(spec.d)) for k in range(5, len(radii))]
    row = {"tree_nodes": len(fmap.domain), "outer_radius": radii[-1],
           "radius_ratio_min": min(ratios) if ratios else None,
           "radius_ratio_max": max(ratios) if ratios else None}
    row.update(_distortion_columns(fmap, spec))
    return row


def _radial_row(spec: ExperimentSpec, R: float, cache: NetCache, theta: BoundaryMap) -> dict:
    params = SpaceParams(theta.source_mu, R, spec.mesh, spec.delta)
    directions = boundary_directions(theta, R, seed=spec.seed)
    domain = cache.get_or_build(("rays", theta.source_mu, R, spec.mesh, theta.kind.value, spec.seed),
                                lambda: build_ray_net(params, directions, visual="zmu"))
    fmap = radial_extension(theta, domain)
    K = estimate_K(theta, R, spec.grid_n, spec.seed)
    D = ray_deviation(domain)
    c = spec.delta + D
    lam, Cq = theta_constants(K, c)
    pairs = candidate_pairs(fmap, Config.MAX_PAIR_POINTS, spec.seed)
    ok, worst = verify_qie(fmap, lam, lam, Cq + 16.0, Cq + 16.0, pairs=pairs[:2])
    row = {"points": len(domain), "codomain_points": len(fmap.codomain), "K": K, "D": D,
           "lambda": lam, "C_q": Cq, "certificate_ok": ok,
           "certificate_worst": list(worst) if worst else None}
    row.update(_distortion_columns(fmap, spec, pairs))
    return row


def _row_radial_identity(spec, R, cache):
    return _radial_row(spec, R, cache, BoundaryMap.identity(mu=spec.mu))


def _row_radial_zmu(spec, R, cache):
    return _radial_row(spec, R, cache, BoundaryMap.zmu_identity(spec.mu, spec.mu_prime))


def _row_radial_unipotent(spec, R, cache):
    return _radial_row(spec, R, cache, BoundaryMap.unipotent())


def _row_poincare_scaling(spec: ExperimentSpec, R: float, cache: NetCache) -> dict:
    params = SpaceParams(spec.mu, R, spec.mesh, spec.delta)
    net = build_zmu_net(params, level_cap=spec.level_cap)
    kernel = make_ball_kernel(net, spec.width)
    row = {"points": len(net), "thinned_levels": len(net.meta["thinned_levels"]), "p": spec.p}
    if spec.p == 2:
        est = poincare_exact_p2(net, kernel, seed=spec.seed)
        row.update({"C": est.lower, "lambda2": est.meta["lambda2"], "method": est.method.value})
    else:
        est = poincare_lower_ascent(net, kernel, spec.p, seed=spec.seed)
        row.update({"C": est.lower, "method": est.method.value})
    row["log_C"] = math.log(est.lower)
    return row


def _row_kr_curve(spec: ExperimentSpec, R: float, cache: NetCache) -> dict:
    theta = _theta(spec)
    K = estimate_K(theta, R, spec.grid_n, spec.seed)
    exact = analytic_K(theta, R)
    return {"K": K, "method": "grid", "grid_n": spec.grid_n, "theta": theta.kind.value,
            "analytic": exact.value if exact else None,
            "upper_bound_only": exact.upper_bound_only if exact else None,
            "ratio": K / exact.value if exact and exact.value > 0 else None,
            "K_over_logR": K / math.log(R) if R > 1 else None}


def _row_sep_scaling(spec: ExperimentSpec, R: float, cache: NetCache) -> dict:
    net = cache.get_or_build(("h2", R, spec.mesh, 2 * math.pi), lambda: build_h2_net(R, spec.mesh, delta=spec.delta))
    report = sep_upper(net, spec.a)
    notes = list(report.notes)
    c1 = None
    if len(net) > EXACT_C1_LIMIT:
        kernel, _ = family_kernel(net, spec.a)
        c1 = poincare_lower_ascent(kernel.net, kernel, 1.0, restarts=4, iters=100, seed=spec.seed).lower
    lower = sep_lower_poincare(net, spec.a, c1=c1, notes=notes)
    if c1 is not None:
        notes[-1] = "C1 from ascent (estimate)"
    return {"points": len(net), "vol_a": report.vol_a, "sep_upper": report.upper,
            "sep_lower": lower, "notes": "; ".join(notes)}


def _row_vol_growth(spec: ExperimentSpec, R: float, cache: NetCache) -> dict:
    net = cache.get_or_build(("h2", R, spec.mesh, 2 * math.pi), lambda: build_h2_net(R, spec.mesh, delta=spec.delta))
    rep = vol_a(net, spec.a)
    row = {"points": len(net)}
    row.update(rep.as_dict())
    row["c_min"] = volume_growth_lower_bound(spec.growth_alpha, spec.growth_lambda, R)
    return row


def _row_distance_approx(spec: ExperimentSpec, R: float, cache: NetCache) -> dict:
    rng = np.random.default_rng([spec.seed, int(R * 1000)])
    r = rng.uniform(0.0, R, size=(2, spec.n_pairs))
    th = rng.uniform(0.0, 2 * math.pi, size=(2, spec.n_pairs))
    exact = h2_distance_array(r[0], th[0], r[1], th[1])
    formula = radial_distance_formula(r[0], r[1], _neg_log(h2_visual_distance(th[0], th[1])))
    err = np.abs(formula - exact)
    return {"pairs": spec.n_pairs, "max_error": float(err.max()), "mean_error": float(err.mean())}


def _row_testfn(spec: ExperimentSpec, R: float, cache: NetCache) -> dict:
    params = SpaceParams(spec.mu, R, spec.mesh, spec.delta)
    net = build_zmu_net(params, cover=True, level_cap=spec.level_cap)
    u = cover_test_function(net)
    m = net.measure
    energy = normalized_grad_energy(net, spec.p)
    continuum = continuum_grad_integral(spec.mu, spec.p)
    est = testfunction_lower_bound(net, spec.p)
    return {"points": len(net), "mean_abs": float(abs(np.sum(u.values * m)) / m.sum()),
            "modulus_error": float(np.abs(np.abs(u.values) - 1.0).max()),
            "energy": energy, "continuum": continuum, "rel_error": abs(energy - continuum) / continuum,
            "lower": est.lower, "p": spec.p}


ROWS: Dict[Experiment, Callable[[ExperimentSpec, float, NetCache], dict]] = {
    Experiment.TREE_EMBED: _row_tree_embed,
    Experiment.TREE_TO_H2: _row_tree_to_h2,
    Experiment.RADIAL_IDENTITY: _row_radial_identity,
    Experiment.RADIAL_ZMU: _row_radial_zmu,
    Experiment.RADIAL_UNIPOTENT: _row_radial_unipotent,
    Experiment.POINCARE_SCALING: _row_poincare_scaling,
    Experiment.KR_CURVE: _row_kr_curve,
    Experiment.SEP_SCALING: _row_sep_scaling,
    Experiment.VOL_GROWTH: _row_vol_growth,
    Experiment.DISTANCE_APPROX: _row_distance_approx,
    Experiment.TESTFN: _row_testfn,
}


def _finalize(spec: ExperimentSpec, rows: List[dict]) -> List[dict]:
    if spec.experiment == Experiment.KR_CURVE:
        # every R samples a superset of the previous R's pairs
        running = 0.0
        for row in rows:
            running = max(running, row["K"])
            row["K"] = running
    return rows


def run(spec: ExperimentSpec, cache: Optional[NetCache] = None, workers: Optional[int] = None) -> List[dict]:
    """
    One row per R, in R order, each tagged with the experiment and seed.
    Module errors come back as ExperimentError carrying the failing R.
    """
    cache = cache if cache is not None else NetCache()
    key = spec.key()
    cached = cache.load_rows(key)
    if cached is not None:
        logger.info(f"{spec.experiment.value}: reusing {len(cached)} cached rows ({key})")
        return cached
    row_fn = ROWS[spec.experiment]
    workers = workers or get_workers()

    def one(R: float) -> dict:
        try:
            with log_timing(logger, f"{spec.experiment.value}: R={R:g}"):
                row = row_fn(spec, R, cache)
        except QILabError as e:
            raise ExperimentError(spec.experiment.value, R, e) from e
        return {"experiment": spec.experiment.value, "R": R, "seed": spec.seed, **row}

    logger.info(f"Running {spec.experiment.value} over R={list(spec.R_list)} with {workers} workers")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(one, R) for R in spec.R_list]
        rows = [f.result() for f in futures]
    rows = _finalize(spec, rows)
    cache.save_rows(key, rows)
    return rows


# ---------------------------------------------------------------------------
# Acceptance
# ---------------------------------------------------------------------------

def _col(rows, name) -> np.ndarray:
    return np.array([float(r[name]) for r in rows])


def _slope(R: np.ndarray, y: np.ndarray) -> Tuple[float, float]:
    slope, intercept = np.polyfit(R, y, 1)
    return float(slope), rsquare(y, slope * R + intercept)


def _check_power(rows, failures, lo=0.35, hi=0.65):
    R, total = _col(rows, "R"), _col(rows, "total")
    fit = fit_growth(R, total)
    coeffs, fitted = _fit_power(R, total)
    beta = coeffs["beta"]
    r2 = rsquare(total, fitted)
    if not lo <= beta <= hi:
        failures.append(f"power exponent {beta:.3f} outside [{lo}, {hi}]")
    if r2 < 0.9:
        failures.append(f"power fit R^2 {r2:.3f} < 0.9")
    return {"beta": beta, "r2": r2, "selected": fit.model}


def check_acceptance(spec: ExperimentSpec, rows: List[dict]) -> Tuple[List[str], dict]:
    """Failed thresholds for the experiment (empty when all pass) and the fitted numbers"""
    failures: List[str] = []
    detail: dict = {}
    R = _col(rows, "R")
    exp = spec.experiment
    if exp == Experiment.TREE_EMBED:
        detail = _check_power(rows, failures)
    elif exp == Experiment.TREE_TO_H2:
        detail = _check_power(rows, failures)
        for row in rows:
            lo, hi = row["radius_ratio_min"], row["radius_ratio_max"]
            if lo is not None and not (0.8 <= lo and hi <= 1.2):
                failures.append(f"R={row['R']:g}: R_k/(k ln d) in [{lo:.3f}, {hi:.3f}] leaves [0.8, 1.2]")
    elif exp == Experiment.DISTANCE_APPROX:
        err = _col(rows, "max_error")
        if err.max() > 8:
            failures.append(f"max formula error {err.max():.3f} > 8")
        if len(err) > 1 and err[-1] - err[0] >= 1:
            failures.append(f"error grows with R by {err[-1] - err[0]:.3f}")
        detail = {"max_error": float(err.max())}
    elif exp == Experiment.KR_CURVE:
        theta = _theta(spec)
        if theta.kind == BoundaryKind.ZMU_IDENTITY:
            for row in rows:
                if row["R"] in (10.0, 20.0) and not 0.85 <= row["ratio"] <= 1.0 + 1e-9:
                    failures.append(f"R={row['R']:g}: K/analytic = {row['ratio']:.3f} outside [0.85, 1]")
        elif theta.kind == BoundaryKind.UNIPOTENT:
            fit = fit_growth(R, np.maximum(_col(rows, "K"), 1e-12))
            if not (fit.model == "log" or (fit.model == "power" and fit.beta <= 0.25)):
                failures.append(f"K(R) fit selected {fit.model} (beta {fit.beta:.3f})")
            for row in rows:
                if row["K_over_logR"] is not None and row["K_over_logR"] > 3:
                    failures.append(f"R={row['R']:g}: K/log R = {row['K_over_logR']:.3f} > 3")
            detail = fit.as_dict()
    elif exp in (Experiment.RADIAL_ZMU, Experiment.RADIAL_UNIPOTENT):
        for row in rows:
            if not row["certificate_ok"]:
                failures.append(f"R={row['R']:g}: certificate fails at pair {row['certificate_worst']}")
    elif exp == Experiment.RADIAL_IDENTITY:
        slope = _slope(R, _col(rows, "total"))[0] if len(R) > 1 else 0.0
        if abs(slope) >= 0.05:
            failures.append(f"identity distortion slope {slope:.4f} not below 0.05 in size")
        detail = {"slope": slope}
    elif exp == Experiment.POINCARE_SCALING:
        slope, r2 = _slope(R, _col(rows, "log_C"))
        lo = 0.7 * sum(spec.mu) / 2.0
        hi = 1.3 * spec.mu[-1]
        if not lo <= slope <= hi:
            failures.append(f"log C slope {slope:.3f} outside [{lo:.3f}, {hi:.3f}]")
        if r2 < 0.9:
            failures.append(f"log C fit R^2 {r2:.3f} < 0.9")
        detail = {"slope": slope, "r2": r2}
    elif exp == Experiment.SEP_SCALING:
        slope, _ = _slope(R, np.log(np.maximum(_col(rows, "sep_upper"), 1.0)))
        if abs(slope) > 0.3:
            failures.append(f"separation slope {slope:.3f} exceeds 0.3 in size")
        detail = {"slope": slope}
    elif exp == Experiment.VOL_GROWTH:
        slope, _ = _slope(R, np.log(_col(rows, "covering_count")))
        if not 0.8 <= slope <= 1.2:
            failures.append(f"covering exponent {slope:.3f} outside [0.8, 1.2]")
        ratio = volume_growth_lower_bound(2.0, 2.0, 1000.0) / 1000.0
        if not 0.4 <= ratio <= 0.5:
            failures.append(f"c_min/R at R=1000 is {ratio:.4f}, outside [0.4, 0.5]")
        if connectivity_bound_check(100.0, 1.0, 1.0, 1.0):
            failures.append("connectivity bound accepts R=100 with unit constants")
        detail = {"slope": slope, "c_min_ratio": ratio}
    elif exp == Experiment.TESTFN:
        for row in rows:
            if row["mean_abs"] > 1e-9:
                failures.append(f"R={row['R']:g}: test function mean {row['mean_abs']:.2e}")
            if row["modulus_error"] > 1e-12:
                failures.append(f"R={row['R']:g}: |u| deviates from 1 by {row['modulus_error']:.2e}")
            if row["rel_error"] > 0.1:
                failures.append(f"R={row['R']:g}: gradient energy off by {100 * row['rel_error']:.1f}%")
    return failures, detail


def run_and_check(spec: ExperimentSpec, cache: Optional[NetCache] = None, workers: Optional[int] = None) -> List[dict]:
    rows = run(spec, cache, workers)
    failures, detail = check_acceptance(spec, rows)
    if failures:
        raise AcceptanceFailure(spec.experiment.value, failures, detail)
    logger.info(f"{spec.experiment.value}: acceptance passed {detail}")
    return rows
