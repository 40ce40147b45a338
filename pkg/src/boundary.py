"""Boundary maps, visual log-ratios and the distortion functional K(R)"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import CoincidentPointsError, NonpositiveCError, UsageError
from .logging_config import get_logger
from .spaces import centered, unipotent_visual_from_diff, zmu_visual_from_diff

logger = get_logger(__name__)

# Exponent range of the random pair offsets e^(-RANDOM_SCALE * v), v uniform
RANDOM_SCALE = 64.0


class BoundaryKind(str, Enum):
    IDENTITY = "identity"
    BIHOLDER = "biholder"
    ZMU_IDENTITY = "zmu_identity"
    UNIPOTENT = "unipotent"


@dataclass(frozen=True)
class BoundaryMap:
    """
    Homeomorphism of a boundary torus, with the visual metrics on both sides.

    Points are arrays whose last axis has length `dim`; coordinates are
    taken modulo 1 by the metrics, so callers may pass small negative
    offsets without wrapping them.
    """
    kind: BoundaryKind
    dim: int = 1
    mu: Optional[Tuple[float, ...]] = None
    mu_prime: Optional[Tuple[float, ...]] = None
    alpha: float = 1.0
    beta: float = 1.0
    c: float = 1.0

    @classmethod
    def identity(cls, dim: int = 1, mu: Optional[Sequence[float]] = None) -> "BoundaryMap":
        mu = tuple(mu) if mu is not None else None
        return cls(BoundaryKind.IDENTITY, len(mu) if mu else dim, mu=mu)

    @classmethod
    def biholder(cls, alpha: float, beta: float, c: float = 1.0, dim: int = 1) -> "BoundaryMap":
        if not (0 < alpha <= 1 <= beta) or c <= 0:
            raise UsageError(f"bi-Holder map needs 0 < alpha <= 1 <= beta and c > 0, got {alpha}, {beta}, {c}")
        return cls(BoundaryKind.BIHOLDER, dim, alpha=alpha, beta=beta, c=c)

    @classmethod
    def zmu_identity(cls, mu: Sequence[float], mu_prime: Sequence[float]) -> "BoundaryMap":
        mu, mu_prime = tuple(float(m) for m in mu), tuple(float(m) for m in mu_prime)
        if len(mu) != len(mu_prime):
            raise UsageError(f"mu and mu' differ in length: {mu} vs {mu_prime}")
        if min(mu + mu_prime) <= 0:
            raise UsageError("exponents must be positive")
        return cls(BoundaryKind.ZMU_IDENTITY, len(mu), mu=mu, mu_prime=mu_prime)

    @classmethod
    def unipotent(cls) -> "BoundaryMap":
        return cls(BoundaryKind.UNIPOTENT, 2, mu=(1.0, 1.0))

    # -- evaluation ----------------------------------------------------------
    @property
    def exponents(self) -> np.ndarray:
        gam = np.full(self.dim, self.beta)
        gam[0] = self.alpha
        return gam

    def _check(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        if xi.shape[-1] != self.dim:
            raise ValueError(f"expected points of dimension {self.dim}, got shape {xi.shape}")
        return xi

    def _power(self, xi, gam):
        c = centered(xi)
        return np.sign(c) * np.power(2.0 * np.abs(c), gam) / 2.0

    def forward(self, xi) -> np.ndarray:
        xi = self._check(xi)
        if self.kind == BoundaryKind.BIHOLDER:
            return self._power(xi, self.exponents)
        return xi.copy()

    def inverse(self, eta) -> np.ndarray:
        eta = self._check(eta)
        if self.kind == BoundaryKind.BIHOLDER:
            return self._power(eta, 1.0 / self.exponents)
        return eta.copy()

    @property
    def source_mu(self) -> Tuple[float, ...]:
        return self.mu if self.mu is not None else (1.0,) * self.dim

    @property
    def target_mu(self) -> Tuple[float, ...]:
        return self.mu_prime if self.mu_prime is not None else self.source_mu

    @property
    def target_visual(self) -> str:
        return "unipotent" if self.kind == BoundaryKind.UNIPOTENT else "zmu"

    def domain_distance(self, a, b) -> np.ndarray:
        return zmu_visual_from_diff(self._check(a) - self._check(b), self.source_mu)

    def target_distance(self, a, b) -> np.ndarray:
        diff = self._check(a) - self._check(b)
        if self.kind == BoundaryKind.UNIPOTENT:
            return unipotent_visual_from_diff(diff)
        return zmu_visual_from_diff(diff, self.target_mu)


@dataclass
class DistortionCurve:
    R: List[float]
    K: List[float]
    grid_n: int
    seed: int
    resolution: float
    theta: str = ""

    def rows(self) -> List[dict]:
        return [{"R": r, "K": k, "method": "grid", "grid_n": self.grid_n, "seed": self.seed}
                for r, k in zip(self.R, self.K)]


@dataclass(frozen=True)
class AnalyticK:
    value: float
    upper_bound_only: bool = False


def unipotent_visual_distance(x: float, y: float) -> float:
    """max(|y|, |x - y log|y||), continuous at y = 0"""
    if y == 0:
        return abs(x)
    return max(abs(y), abs(x - y * math.log(abs(y))))


def unipotent_case(x: float, y: float) -> int:
    """
    Regime of a coordinate difference for the shear map:
    1: |x| < |y| and |x - y log|y|| < |y|
    2: |x - y log|y|| < |y| < |x|
    3: |x| < |y| < |x - y log|y||
    4: |y| < |x| and |y| < |x - y log|y||
    0 on ties.
    """
    ax, ay = abs(x), abs(y)
    sheared = abs(x - y * math.log(ay)) if ay > 0 else ax
    if ax < ay and sheared < ay:
        return 1
    if sheared < ay < ax:
        return 2
    if ax < ay < sheared:
        return 3
    if ay < ax and ay < sheared:
        return 4
    return 0


def visual_log_ratio(theta: BoundaryMap, xi1, xi2) -> float:
    """|log(d'(theta xi1, theta xi2) / d(xi1, xi2))|"""
    xi1 = np.atleast_1d(np.asarray(xi1, dtype=float))
    xi2 = np.atleast_1d(np.asarray(xi2, dtype=float))
    d = float(theta.domain_distance(xi1, xi2))
    d_img = float(theta.target_distance(theta.forward(xi1), theta.forward(xi2)))
    if d == 0 or d_img == 0:
        raise CoincidentPointsError("visual log-ratio needs distinct points")
    return abs(math.log(d_img / d))


# ---------------------------------------------------------------------------
# K(R)
# ---------------------------------------------------------------------------

def _lattice_extent(theta: BoundaryMap, R: float) -> float:
    """
    Largest lattice exponent u (offsets e^-u). Pairs at visual distance
    u e^-u still clear the e^-R floor, so u reaches past R by log R.
    """
    scale = max([1.0] + list(theta.source_mu) + list(theta.target_mu))
    top = math.ceil(R) * scale
    return top + math.log(top + 2.0) + 1.0


def _structured_offsets(theta: BoundaryMap, U: float, grid_n: int) -> np.ndarray:
    """Axis, diagonal, 2-D and shear-family offsets on a logarithmic lattice"""
    dim = theta.dim
    step = 8.0 / grid_n
    u = np.arange(0.0, U + step / 2, step)
    mag = np.exp(-u)
    parts = []
    for sign in (1.0, -1.0):
        for i in range(dim):
            off = np.zeros((len(u), dim))
            off[:, i] = sign * mag
            parts.append(off)
        parts.append(sign * mag[:, None] * np.ones((1, dim)))
    if dim == 2:
        coarse = np.exp(-np.arange(0.0, U + 32.0 / grid_n, 64.0 / grid_n))
        g1, g2 = np.meshgrid(coarse, coarse, indexing="ij")
        for s1 in (1.0, -1.0):
            for s2 in (1.0, -1.0):
                parts.append(np.stack([s1 * g1.ravel(), s2 * g2.ravel()], axis=1))
        if theta.kind == BoundaryKind.UNIPOTENT:
            # x = y log|y| shifted by -y or 0 shrinks the image to |y|; x = y inflates it
            for sign in (1.0, -1.0):
                y = sign * mag
                shear = y * np.log(mag)
                for x in (shear, shear - y, y):
                    parts.append(np.stack([x, y], axis=1))
    return np.concatenate(parts, axis=0)


def _base_points(theta: BoundaryMap) -> np.ndarray:
    if theta.kind == BoundaryKind.BIHOLDER:
        return np.array([[b] * theta.dim for b in (0.0, 0.125, 0.25, 0.375)])
    return np.zeros((1, theta.dim))


def _log_ratios(theta: BoundaryMap, xi1: np.ndarray, xi2: np.ndarray, R: float) -> np.ndarray:
    d = theta.domain_distance(xi1, xi2)
    d_img = theta.target_distance(theta.forward(xi1), theta.forward(xi2))
    floor = math.exp(-R) * (1 - 1e-12)
    ok = (d > 0) & (d_img > 0) & (np.maximum(d, d_img) >= floor)
    if not np.any(ok):
        return np.zeros(0)
    return np.abs(np.log(d_img[ok]) - np.log(d[ok]))


def estimate_K(theta: BoundaryMap, R: float, grid_n: int = 1024, seed: int = 0) -> float:
    """
    Lower estimate of K(R): the largest visual log-ratio over structured
    lattice pairs and seeded random pairs separated by at least e^-R on
    either side. Nondecreasing in R, and in grid_n along powers of two.
    """
    if grid_n < 2:
        raise UsageError(f"grid_n must be >= 2, got {grid_n}")
    if theta.kind == BoundaryKind.IDENTITY:
        return 0.0
    U = _lattice_extent(theta, R)
    offsets = _structured_offsets(theta, U, grid_n)
    best = 0.0
    for base in _base_points(theta):
        xi1 = np.broadcast_to(base, offsets.shape)
        ratios = _log_ratios(theta, xi1, xi1 + offsets, R)
        if len(ratios):
            best = max(best, float(ratios.max()))

    rng = np.random.default_rng(seed)
    M = 16 * grid_n
    draws = rng.random((M, 3 * theta.dim))
    base = draws[:, :theta.dim] - 0.5
    mag = np.exp(-RANDOM_SCALE * draws[:, theta.dim:2 * theta.dim])
    sign = np.where(draws[:, 2 * theta.dim:] < 0.5, -1.0, 1.0)
    ratios = _log_ratios(theta, base, base + sign * mag, R)
    if len(ratios):
        best = max(best, float(ratios.max()))
    logger.debug(f"K({R:g}) for {theta.kind.value}: {best:.6g} from {len(offsets)} lattice offsets + {M} random pairs")
    return best


def k_curve(theta: BoundaryMap, R_list: Sequence[float], grid_n: int = 1024, seed: int = 0) -> DistortionCurve:
    R_sorted = sorted(float(r) for r in R_list)
    if list(R_sorted) != [float(r) for r in R_list]:
        raise UsageError("R values must be ascending")
    K = [estimate_K(theta, R, grid_n, seed) for R in R_sorted]
    # each R samples a superset of the previous one's pairs
    K = list(np.maximum.accumulate(K)) if K else []
    return DistortionCurve(R_sorted, [float(k) for k in K], grid_n, seed, 8.0 / grid_n, theta.kind.value)


def analytic_K(theta: BoundaryMap, R: float) -> Optional[AnalyticK]:
    if theta.kind == BoundaryKind.IDENTITY:
        return AnalyticK(0.0)
    if theta.kind == BoundaryKind.ZMU_IDENTITY:
        mu = np.asarray(theta.mu)
        mu_p = np.asarray(theta.mu_prime)
        spread = np.maximum(np.abs(mu / mu_p - 1.0), np.abs(mu_p / mu - 1.0))
        return AnalyticK(float(spread.max()) * R)
    if theta.kind == BoundaryKind.BIHOLDER:
        return AnalyticK(max(abs(1 - theta.alpha), abs(1 - theta.beta)) * R, upper_bound_only=True)
    return None


def theta_constants(K: float, c: float) -> Tuple[float, float]:
    """(lambda, C_q) = (1 + 2K/c, 2K + c) for the radial extension"""
    if c <= 0:
        raise NonpositiveCError(f"c must be positive, got {c}")
    if K < 0:
        raise UsageError(f"K must be non-negative, got {K}")
    return 1.0 + 2.0 * K / c, 2.0 * K + c


def boundary_directions(theta: BoundaryMap, R: float, per_axis: int = 48, n_random: int = 16,
                        seed: int = 0) -> np.ndarray:
    """
    Direction set for ray nets: the origin of the torus plus offsets e^-u
    along each axis and the diagonal for u spread over [0, U], the shear
    family for the unipotent map, and a few seeded random directions.
    Coordinates stay unwrapped so tiny offsets keep full precision.
    """
    U = _lattice_extent(theta, R)
    u = np.linspace(0.0, U, per_axis)
    mag = np.exp(-u)
    parts = [np.zeros((1, theta.dim))]
    for i in range(theta.dim):
        off = np.zeros((per_axis, theta.dim))
        off[:, i] = mag
        parts.append(off)
    if theta.dim > 1:
        parts.append(mag[:, None] * np.ones((1, theta.dim)))
    if theta.kind == BoundaryKind.UNIPOTENT:
        parts.append(np.stack([mag * np.log(mag), mag], axis=1))
    if n_random:
        rng = np.random.default_rng(seed)
        parts.append(rng.random((n_random, theta.dim)) - 0.5)
    directions = np.concatenate(parts, axis=0)
    _, first = np.unique(directions, axis=0, return_index=True)
    return directions[np.sort(first)]
