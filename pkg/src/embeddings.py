"""Explicit embeddings between nets and exact measurement of their QI constants"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.optimize import brentq

from .boundary import BoundaryMap
from .config import Config
from .errors import (
    BoundaryMapUndefinedError,
    DegenerateDomainError,
    EmptyGenerationError,
    EmptyMapError,
    UsageError,
)
from .logging_config import get_logger
from .spaces import (
    Net,
    SpaceKind,
    SpaceParams,
    build_ray_net,
    build_tree_ball,
    h2_points_net,
    tree_from_parents,
)

logger = get_logger(__name__)


@dataclass
class PointMap:
    """A total map from the points of `domain` to points of `codomain`"""
    domain: Net
    codomain: Net
    assignment: np.ndarray
    meta: Dict = field(default_factory=dict)

    def __post_init__(self):
        self.assignment = np.asarray(self.assignment, dtype=np.int64)
        if len(self.domain) == 0:
            raise EmptyMapError("map has an empty domain")
        if len(self.assignment) != len(self.domain):
            raise UsageError(f"assignment has {len(self.assignment)} entries for {len(self.domain)} domain points")
        if self.assignment.min() < 0 or self.assignment.max() >= len(self.codomain):
            raise UsageError("assignment index out of codomain range")

    def __len__(self) -> int:
        return len(self.assignment)

    def domain_ids(self, local) -> np.ndarray:
        """Ids in the unrestricted domain for positions in this map's domain"""
        local = np.asarray(local, dtype=np.int64)
        ids = self.meta.get("domain_ids")
        return local if ids is None else np.asarray(ids, dtype=np.int64)[local]

    def restrict(self, indices) -> "PointMap":
        idx = np.asarray(indices, dtype=np.int64)
        meta = dict(self.meta)
        meta.setdefault("restricted_from", len(self.domain))
        meta["domain_ids"] = self.domain_ids(idx)
        return PointMap(self.domain.subnet(idx), self.codomain, self.assignment[idx], meta)

    def sample(self, max_points: int, seed: int) -> "PointMap":
        """Seeded restriction to at most max_points domain points, stratified by level"""
        n = len(self.domain)
        if n <= max_points:
            return self
        logger.info(f"Sampling {max_points} of {n} domain points for the pair scatter")
        return self.restrict(stratified_sample(self.domain, max_points, seed))


def stratified_sample(net: Net, max_points: int, seed: int) -> np.ndarray:
    """
    Sorted indices of at most max_points + 1 points: whole levels from the
    basepoint outwards while they fit in half the budget, then an equal
    seeded share of every remaining level. Index 0 is always kept.
    """
    n = len(net)
    if n <= max_points:
        return np.arange(n)
    level = net.meta.get("level")
    if level is None:
        level = np.floor(net.heights()).astype(np.int64)
    level = np.asarray(level, dtype=np.int64)
    levels, counts = np.unique(level, return_counts=True)
    whole = levels[np.cumsum(counts) <= max_points // 2]
    parts = [np.nonzero(np.isin(level, whole))[0], np.zeros(1, dtype=np.int64)]
    rest = levels[len(whole):]
    if len(rest):
        rng = np.random.default_rng(seed)
        share = max(1, (max_points - len(parts[0])) // len(rest))
        for lv in rest:
            members = np.nonzero(level == lv)[0]
            parts.append(members if len(members) <= share else rng.choice(members, size=share, replace=False))
    return np.unique(np.concatenate(parts))


def _windowed(net: Net) -> bool:
    """pairs_within runs without an all-pairs scan"""
    return net.has_window or len(net) <= Config.DENSE_DISTANCE_LIMIT


def _two_hop_pairs(net: Net) -> Tuple[np.ndarray, np.ndarray]:
    """Pairs joined by a path of at most two edges"""
    n = len(net)
    if not (net.edges_built or _windowed(net)) or len(net.edges) == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    e = net.edges
    A = sparse.coo_matrix((np.ones(2 * len(e)), (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])),
                          shape=(n, n)).tocsr()
    near = sparse.triu(A + A @ A, k=1).tocoo()
    return near.row.astype(np.int64), near.col.astype(np.int64)


def _close_image_pairs(fmap: PointMap, radius: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Domain pairs whose images are within radius: the first preimages of
    close codomain pairs, plus every point sharing an image with another.
    """
    image_ids, first = np.unique(fmap.assignment, return_index=True)
    rep = np.full(len(fmap.codomain), -1, dtype=np.int64)
    rep[image_ids] = first
    own = rep[fmap.assignment]
    shared = np.nonzero(own != np.arange(len(fmap.assignment)))[0]
    parts_i, parts_j = [own[shared]], [shared]
    if radius > 0 and _windowed(fmap.codomain):
        P, Q, _ = fmap.codomain.pairs_within(radius)
        keep = (rep[P] >= 0) & (rep[Q] >= 0)
        parts_i.append(rep[P[keep]])
        parts_j.append(rep[Q[keep]])
    return np.concatenate(parts_i), np.concatenate(parts_j)


def candidate_pairs(fmap: PointMap, max_points: Optional[int] = None, seed: int = 0
                    ) -> Tuple[np.ndarray, np.ndarray, bool]:
    """
    Domain pairs (i < j) to scan for distortion, and whether they are all of them.

    Small domains get every pair. Larger ones get all pairs of a stratified
    sample, the pairs at most two edges apart (where d' / d peaks) and the
    pairs whose images are close (where d / d' peaks). The close radius is
    one more than twice the longest edge image.
    """
    n = len(fmap.domain)
    max_points = Config.MAX_PAIR_POINTS if max_points is None else max_points
    if n <= max_points:
        I, J = np.triu_indices(n, k=1)
        return I, J, True
    S = stratified_sample(fmap.domain, max_points, seed)
    a, b = np.triu_indices(len(S), k=1)
    near_i, near_j = _two_hop_pairs(fmap.domain)
    radius = 0.0
    if len(near_i):
        e = fmap.domain.edges
        images = fmap.codomain.pair_distances(fmap.assignment[e[:, 0]], fmap.assignment[e[:, 1]])
        radius = 2.0 * float(images.max()) + 1.0 if len(images) else 0.0
    close_i, close_j = _close_image_pairs(fmap, radius)
    I = np.concatenate([S[a], near_i, close_i])
    J = np.concatenate([S[b], near_j, close_j])
    lo, hi = np.minimum(I, J), np.maximum(I, J)
    key = np.unique(lo[lo != hi] * n + hi[lo != hi])
    logger.info(f"Scanning {len(key)} candidate pairs of {n} domain points "
                f"({len(S)} sampled, {len(near_i)} two-hop, {len(close_i)} close-image)")
    return key // n, key % n, False


@dataclass
class DistortionReport:
    """
    (lambda, c) constants over the scanned pairs. When `exhaustive` is
    False only a subset of pairs was seen and the constants are lower
    bounds for the full map. Witness ids refer to the unrestricted domain.
    """
    lambda1: float
    lambda2: float
    c1: float
    c2: float
    total: float
    witness_pairs: Dict[str, Tuple[int, int]]
    objective: str = "sum"
    n_pairs: int = 0
    exhaustive: bool = True

    def as_dict(self) -> dict:
        return {
            "lambda1": self.lambda1, "lambda2": self.lambda2, "c1": self.c1, "c2": self.c2,
            "total": self.total, "objective": self.objective, "exhaustive": self.exhaustive,
            "witnesses": {k: [int(v[0]), int(v[1])] for k, v in self.witness_pairs.items()},
        }


def pair_scatter(fmap: PointMap, pairs: Optional[Tuple[np.ndarray, np.ndarray]] = None
                 ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Domain pairs (all unordered ones by default) with their domain and image distances"""
    n = len(fmap.domain)
    if pairs is None:
        I, J = np.triu_indices(n, k=1)
    else:
        I, J = (np.asarray(p, dtype=np.int64) for p in pairs)
    if pairs is None and n <= Config.DENSE_DISTANCE_LIMIT:
        a = fmap.domain.distance_matrix()[I, J]
    else:
        a = fmap.domain.pair_distances(I, J)
    b = fmap.codomain.pair_distances(fmap.assignment[I], fmap.assignment[J])
    return I, J, a, b


def _upper_hull(x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Vertices of the scatter that can attain max(y - lam * x) for some lam >= 0"""
    order = np.lexsort((-y, x))
    xs, ys = x[order], y[order]
    running = np.maximum.accumulate(ys)
    keep = np.r_[True, ys[1:] > running[:-1]]
    xs, ys = xs[keep], ys[keep]
    hull_x, hull_y = [], []
    for px, py in zip(xs, ys):
        while len(hull_x) >= 2:
            x1, y1 = hull_x[-2], hull_y[-2]
            x2, y2 = hull_x[-1], hull_y[-1]
            if (y2 - y1) * (px - x1) <= (py - y1) * (x2 - x1):
                hull_x.pop()
                hull_y.pop()
            else:
                break
        hull_x.append(px)
        hull_y.append(py)
    return np.asarray(hull_x), np.asarray(hull_y)


def _best_affine_bound(x: np.ndarray, y: np.ndarray, objective: str) -> Tuple[float, float]:
    """
    Smallest (lam, c) with lam >= 1, c >= 0 and y <= lam * x + c on every pair,
    optimal for lam + c (objective "sum") or max(lam, c) ("max").
    """
    hx, hy = _upper_hull(x, y)
    logger.debug(f"Pareto hull: {len(hx)} vertices from {len(x)} pairs")
    candidates = [1.0]
    if len(hx) > 1:
        slopes = np.diff(hy) / np.diff(hx)
        candidates.extend(slopes[slopes >= 1.0].tolist())
    positive = hx > 0
    floor = hy[~positive].max() if np.any(~positive) else -np.inf
    if np.any(positive) and floor <= 0:
        candidates.append(float(np.max(hy[positive] / hx[positive])))
    if objective == "max":
        candidates.extend((hy / (1.0 + hx)).tolist())
    lam = np.maximum(np.unique(np.asarray(candidates, dtype=float)), 1.0)
    lam = np.unique(lam)

    c = np.maximum(0.0, (hy[None, :] - lam[:, None] * hx[None, :]).max(axis=1))
    score = lam + c if objective == "sum" else np.maximum(lam, c)
    best = score.min()
    tie = np.nonzero(score <= best + 1e-12 * max(1.0, abs(best)))[0]
    k = tie[np.argmin(lam[tie])]
    return float(lam[k]), float(c[k])


def measure_distortion(fmap: PointMap, objective: str = "sum",
                       pairs: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> DistortionReport:
    """
    Optimal (lambda1, c1, lambda2, c2) of a finite map:
    (1/lambda2)(d - c2) <= d' <= lambda1 d + c1 on every pair, or on the
    given domain pairs only.
    """
    if objective not in ("sum", "max"):
        raise UsageError(f"objective must be 'sum' or 'max', got {objective!r}")
    if len(fmap.domain) < 2:
        raise DegenerateDomainError("need at least two domain points")
    I, J, a, b = pair_scatter(fmap, pairs)
    if not np.any(a > 0):
        raise DegenerateDomainError("all domain distances are zero")

    lam1, c1 = _best_affine_bound(a, b, objective)
    lam2, c2 = _best_affine_bound(b, a, objective)
    up = int(np.argmax(b - lam1 * a))
    low = int(np.argmax(a - lam2 * b))
    ends = fmap.domain_ids([I[up], J[up], I[low], J[low]])
    n = len(fmap.domain)
    exhaustive = "domain_ids" not in fmap.meta and len(a) == n * (n - 1) // 2
    report = DistortionReport(
        lambda1=lam1, lambda2=lam2, c1=c1, c2=c2, total=lam1 + lam2 + c1 + c2,
        witness_pairs={"upper": (int(ends[0]), int(ends[1])), "lower": (int(ends[2]), int(ends[3]))},
        objective=objective, n_pairs=len(a), exhaustive=exhaustive,
    )
    logger.debug(f"Distortion over {len(a)} pairs: lambda=({lam1:.4g}, {lam2:.4g}) c=({c1:.4g}, {c2:.4g})")
    return report


def verify_qie(fmap: PointMap, lambda1: float, lambda2: float, c1: float, c2: float,
               tol: float = 1e-9, pairs: Optional[Tuple[np.ndarray, np.ndarray]] = None
               ) -> Tuple[bool, Optional[Tuple[int, int]]]:
    """Check both QI inequalities on every pair (or the given ones); returns the worst pair on failure"""
    if lambda1 < 1 or lambda2 < 1 or c1 < 0 or c2 < 0:
        raise UsageError("need lambda >= 1 and c >= 0")
    if len(fmap.domain) < 2:
        return True, None
    I, J, a, b = pair_scatter(fmap, pairs)
    if len(a) == 0:
        return True, None
    scale = max(1.0, float(a.max()), float(b.max()))
    violation = np.maximum(b - (lambda1 * a + c1), (a - c2) / lambda2 - b)
    worst = int(np.argmax(violation))
    if violation[worst] <= tol * scale:
        return True, None
    i, j = fmap.domain_ids([I[worst], J[worst]])
    return False, (int(i), int(j))


# ---------------------------------------------------------------------------
# Tree constructions
# ---------------------------------------------------------------------------

def _greedy_separated(net: Net, candidates: np.ndarray, sep: float) -> np.ndarray:
    """Greedy maximal sep-separated subset in the given scan order"""
    blocked = np.zeros(len(candidates), dtype=bool)
    kept = []
    for pos in range(len(candidates)):
        if blocked[pos]:
            continue
        kept.append(candidates[pos])
        d = net.block(np.array([candidates[pos]]), candidates)[0]
        blocked |= d < sep * (1 - 1e-9)
    return np.asarray(kept, dtype=np.int64)


def build_sqrt_tree_embedding(net: Net, R: float) -> Tuple[Net, PointMap]:
    """
    Tree with one generation per sphere of radius k*sqrt(R).

    Generation k is a maximal sqrt(R)-separated set (angular scan order) of
    the net points within one mesh of that sphere; each point is joined to a
    closest point of the previous generation, ties to the smallest index.
    """
    if net.kind != SpaceKind.H2:
        raise UsageError("the sqrt(R) tree construction needs an H2 net")
    s = math.sqrt(R)
    mesh = net.params.mesh
    r = net.coords[:, 0]
    theta = net.coords[:, 1]
    n_gen = int(math.floor(R / s + 1e-9)) if R > 0 else 0

    # the band never reaches the neighbouring spheres
    band = min(mesh, 0.49 * s)
    origin = np.nonzero(r == 0)[0]
    if len(origin) == 0:
        raise EmptyGenerationError("net has no point at the origin")
    generations = [origin[:1]]
    for k in range(1, n_gen + 1):
        near = np.nonzero(np.abs(r - k * s) <= band + 1e-9)[0]
        near = near[np.lexsort((r[near], theta[near]))]
        gen = _greedy_separated(net, near, s)
        if len(gen) == 0:
            raise EmptyGenerationError(f"no net points within {mesh:g} of the sphere of radius {k * s:g}")
        generations.append(np.sort(gen))

    selected = np.concatenate(generations)
    parent = np.full(len(selected), -1, dtype=np.int64)
    gen_start = np.r_[0, np.cumsum([len(g) for g in generations])]
    max_jump = 0.0
    for k in range(1, len(generations)):
        D = net.block(generations[k], generations[k - 1])
        closest = np.argmin(D, axis=1)
        parent[gen_start[k]:gen_start[k + 1]] = gen_start[k - 1] + closest
        max_jump = max(max_jump, float(D[np.arange(len(closest)), closest].max()))

    tree = tree_from_parents(parent, meta={"construction": "sqrt_tree"})
    domain = net.subnet(selected)
    fmap = PointMap(domain, tree, np.arange(len(selected)),
                    meta={"construction": "sqrt_tree", "R": R, "generations": [len(g) for g in generations],
                          "max_jump": max_jump})
    logger.info(f"sqrt tree at R={R:g}: {len(generations)} generations, {len(selected)} nodes, max jump {max_jump:.3f}")
    return tree, fmap


def generation_radius(n_points: int, d: int, k: int, rule: str = "packing") -> float:
    """
    Radius of the circle carrying generation k.

    "packing" solves n*sqrt(r) = 2*pi*sinh(r), i.e. neighbours sqrt(r) apart
    along the circle; "exponential" solves e^sqrt(r) (d+1) d^k = e^r.
    """
    if k == 0:
        return 0.0
    if rule == "packing":
        def f(x):
            return 2 * math.pi * math.sinh(x) - n_points * math.sqrt(x)
        lo = 1e-12
        hi = math.log(max(n_points, 2)) + 10.0
        return brentq(f, lo, hi, xtol=1e-13)
    if rule == "exponential":
        target = math.log(d + 1) + k * math.log(d)

        def g(x):
            return x - math.sqrt(x) - target
        return brentq(g, 0.0, target + math.sqrt(target) + 10.0, xtol=1e-13)
    raise UsageError(f"unknown radius rule {rule!r}")


def build_tree_to_h2(d: int, R: int, rule: str = "packing") -> Tuple[PointMap, Net]:
    """
    Place the tree ball with branching d (root degree d+1) in H^2.

    Generation k, with (d+1) d^(k-1) points, goes in breadth-first order on
    the circle of radius R_k at equal angles.
    """
    if d < 2:
        raise UsageError(f"branching number must be >= 2, got {d}")
    tree = build_tree_ball(d + 1, R)
    level = tree.meta["level"]
    r = np.zeros(len(tree))
    theta = np.zeros(len(tree))
    radii = [0.0]
    for k in range(1, int(R) + 1):
        members = np.nonzero(level == k)[0]
        n_k = len(members)
        R_k = generation_radius(n_k, d, k, rule)
        radii.append(R_k)
        r[members] = R_k
        theta[members] = 2 * math.pi * (np.arange(n_k) + 0.5) / n_k
    image = h2_points_net(r, theta)
    fmap = PointMap(tree, image, np.arange(len(tree)),
                    meta={"construction": "tree_to_h2", "d": d, "R": R, "radii": radii, "rule": rule})
    logger.info(f"tree-to-H2 d={d} R={R}: {len(tree)} nodes, outer radius {radii[-1]:.3f}")
    return fmap, image


# ---------------------------------------------------------------------------
# Radial extension
# ---------------------------------------------------------------------------

def _images(theta: BoundaryMap, directions: np.ndarray) -> np.ndarray:
    try:
        images = theta.forward(directions)
    except (ValueError, IndexError) as e:
        raise BoundaryMapUndefinedError(f"{theta.kind.value} map undefined on these directions: {e}")
    if not np.all(np.isfinite(images)):
        raise BoundaryMapUndefinedError(f"{theta.kind.value} map undefined on some directions")
    return images


def radial_extension(theta: BoundaryMap, domain: Net, codomain_params: Optional[SpaceParams] = None) -> PointMap:
    """
    Extend a boundary map radially: a point at height t in direction xi goes
    to the codomain point at height nearest t on the ray towards theta(xi).
    """
    if domain.kind == SpaceKind.H2:
        xi = (domain.coords[:, 1] / (2 * math.pi))[:, None]
        if theta.dim != 1:
            raise BoundaryMapUndefinedError(f"{theta.kind.value} map has dimension {theta.dim}, H2 boundary is a circle")
        images = _images(theta, xi)[:, 0]
        codomain = h2_points_net(domain.coords[:, 0], 2 * math.pi * images)
        return PointMap(domain, codomain, np.arange(len(domain)), meta={"construction": "radial", "theta": theta.kind.value})

    if domain.kind not in (SpaceKind.RAYS, SpaceKind.ZMU, SpaceKind.ZMU_COVER):
        raise BoundaryMapUndefinedError(f"no radial structure on {domain.kind.value} nets")
    if theta.dim != domain.params.base_dim:
        raise BoundaryMapUndefinedError(
            f"{theta.kind.value} map has dimension {theta.dim}, boundary torus has {domain.params.base_dim}")

    t = domain.coords[:, 0]
    if domain.kind == SpaceKind.RAYS:
        directions = domain.meta["directions"]
        dir_of = domain.meta["direction"]
    else:
        directions, dir_of = np.unique(domain.coords[:, 1:], axis=0, return_inverse=True)
        dir_of = dir_of.ravel()
    images = _images(theta, directions)

    base = domain.params
    if codomain_params is None:
        mu_target = theta.mu_prime if theta.mu_prime is not None else base.mu
        codomain_params = SpaceParams(mu_target, base.R, base.mesh, base.delta)
    cover = bool(domain.meta.get("cover", False))
    codomain = build_ray_net(codomain_params, images, visual=theta.target_visual, cover=cover)
    rep = codomain.meta["representative"]
    n_levels = rep.shape[0]
    level = np.clip(np.rint(t / codomain_params.mesh).astype(np.int64), 0, n_levels - 1)
    assignment = np.where(
        (level == 0) | (dir_of < 0), 0, rep[level, np.maximum(dir_of, 0)])
    fmap = PointMap(domain, codomain, assignment, meta={"construction": "radial", "theta": theta.kind.value})
    logger.debug(f"radial extension of {theta.kind.value}: {len(domain)} points onto {len(codomain)}")
    return fmap
