"""Finite net models of H^2, regular-tree balls and Z_mu, with their distance oracles"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .config import Config, get_level_cap, get_point_cap
from .errors import DisconnectedError, SizeCapError, UsageError
from .logging_config import get_logger

logger = get_logger(__name__)

# Axis labels carried by edges
AXIS_VERTICAL = 0
AXIS_LINK = -1


class SpaceKind(str, Enum):
    H2 = "h2"
    TREE = "tree"
    ZMU = "zmu"
    ZMU_COVER = "zmu_cover"
    RAYS = "rays"
    GRAPH = "graph"


class Oracle(str, Enum):
    CLOSED_FORM = "closed-form"
    GRAPH = "graph-shortest-path"
    RADIAL = "radial-formula"


@dataclass(frozen=True)
class SpaceParams:
    """Exponents, radius, mesh and hyperbolicity slack of one model space"""
    mu: Tuple[float, ...] = (1.0,)
    R: float = 1.0
    mesh: float = 1.0
    delta: float = 1.0
    base_dim: Optional[int] = None

    def __post_init__(self):
        mu = tuple(float(m) for m in np.atleast_1d(self.mu))
        object.__setattr__(self, "mu", mu)
        if not mu or any(not m > 0 for m in mu):
            raise UsageError(f"mu must be a non-empty vector of positive reals, got {mu}")
        if any(b < a for a, b in zip(mu, mu[1:])):
            raise UsageError(f"mu must be sorted ascending, got {mu}")
        if not self.mesh > 0:
            raise UsageError(f"mesh must be positive, got {self.mesh}")
        if self.R < 0:
            raise UsageError(f"R must be non-negative, got {self.R}")
        if self.delta < 0:
            raise UsageError(f"delta must be non-negative, got {self.delta}")
        if self.base_dim is None:
            object.__setattr__(self, "base_dim", len(mu))
        elif self.base_dim != len(mu):
            raise UsageError(f"base_dim {self.base_dim} does not match len(mu) = {len(mu)}")

    @property
    def mu_sum(self) -> float:
        return float(sum(self.mu))

    @property
    def mu_top(self) -> float:
        return self.mu[-1]

    def with_R(self, R: float) -> "SpaceParams":
        return SpaceParams(self.mu, R, self.mesh, self.delta, self.base_dim)


@dataclass(frozen=True)
class H2Point:
    r: float
    theta: float


@dataclass(frozen=True)
class TreeNode:
    path: Tuple[int, ...] = ()


@dataclass(frozen=True)
class ZPoint:
    t: float
    x: Tuple[float, ...]


@dataclass(frozen=True)
class ZCoverPoint:
    t: float
    x: Tuple[float, ...]


Point = Union[H2Point, TreeNode, ZPoint, ZCoverPoint]


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------

def h2_distance_array(r1, theta1, r2, theta2) -> np.ndarray:
    """
    Vectorised hyperbolic law of cosines.

    Evaluated as 2*asinh(sqrt(sinh^2(dr/2) + sinh r1 sinh r2 sin^2(dtheta/2))),
    which is the same quantity without the cancellation of arccosh near 1.
    """
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    half = 0.5 * (np.asarray(theta1, dtype=float) - np.asarray(theta2, dtype=float))
    inner = np.sinh(0.5 * (r1 - r2)) ** 2 + np.sinh(r1) * np.sinh(r2) * np.sin(half) ** 2
    return 2.0 * np.arcsinh(np.sqrt(np.maximum(inner, 0.0)))


def h2_distance(p: H2Point, q: H2Point) -> float:
    return float(h2_distance_array(p.r, p.theta, q.r, q.theta))


def h2_visual_distance(theta1, theta2):
    """Visual distance seen from the origin between ideal points of H^2"""
    return np.abs(np.sin(0.5 * (np.asarray(theta1, dtype=float) - np.asarray(theta2, dtype=float))))


def radial_distance_formula(t1, t2, t_inf):
    """t1 + t2 - 2 min(t1, t2, t_inf); t_inf may be +inf"""
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    out = t1 + t2 - 2.0 * np.minimum(np.minimum(t1, t2), np.asarray(t_inf, dtype=float))
    return float(out) if out.ndim == 0 else out


def _neg_log(vis):
    vis = np.asarray(vis, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(vis > 0, -np.log(np.where(vis > 0, vis, 1.0)), np.inf)


def h2_formula_distance(p: H2Point, q: H2Point) -> float:
    """Radial-formula approximation of the H^2 distance"""
    return radial_distance_formula(p.r, q.r, _neg_log(h2_visual_distance(p.theta, q.theta)))


def circle_gap(delta, period=1.0):
    """Circle distance min(|d|, P - |d|) on R / P Z"""
    d = np.mod(np.abs(np.asarray(delta, dtype=float)), period)
    return np.minimum(d, period - d)


def zmu_visual_from_diff(diff, mu, periods=None) -> np.ndarray:
    """max_i gap_i^(1/mu_i) over the last axis of an array of coordinate differences"""
    diff = np.asarray(diff, dtype=float)
    mu = np.asarray(mu, dtype=float)
    periods = np.ones_like(mu) if periods is None else np.asarray(periods, dtype=float)
    gap = circle_gap(diff, periods)
    with np.errstate(divide="ignore"):
        powered = np.where(gap > 0, np.power(np.where(gap > 0, gap, 1.0), 1.0 / mu), 0.0)
    return powered.max(axis=-1)


def zmu_visual_distance(a, b, mu, periods=None) -> float:
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    return float(zmu_visual_from_diff(a - b, mu, periods))


def centered(delta):
    """Representative of a torus difference in (-1/2, 1/2]"""
    delta = np.asarray(delta, dtype=float)
    return delta - np.ceil(delta - 0.5)


def _shear_visual(x, y):
    y_abs = np.abs(y)
    with np.errstate(divide="ignore", invalid="ignore"):
        shear = np.where(y_abs > 0, y * np.log(np.where(y_abs > 0, y_abs, 1.0)), 0.0)
    return np.maximum(y_abs, np.abs(x - shear))


def unipotent_visual_from_diff(diff) -> np.ndarray:
    """Shear visual distance on torus differences (last axis = (x, y))"""
    diff = np.asarray(diff, dtype=float)
    c = centered(diff)
    c_flip = -centered(-diff)
    return np.minimum(_shear_visual(c[..., 0], c[..., 1]), _shear_visual(c_flip[..., 0], c_flip[..., 1]))


def _periods(params: SpaceParams, cover: bool) -> np.ndarray:
    periods = np.ones(params.base_dim)
    if cover:
        periods[-1] = 2.0
    return periods


def zmu_distance(p: Union[ZPoint, ZCoverPoint], q: Union[ZPoint, ZCoverPoint], params: SpaceParams) -> float:
    cover = isinstance(p, ZCoverPoint) or isinstance(q, ZCoverPoint)
    vis = zmu_visual_distance(p.x, q.x, params.mu, _periods(params, cover))
    return radial_distance_formula(p.t, q.t, _neg_log(vis))


# ---------------------------------------------------------------------------
# Metric strategies
# ---------------------------------------------------------------------------

class _Metric:
    """Elementwise pair distances over a net's own point arrays"""

    def pairwise(self, I: np.ndarray, J: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def subset(self, idx: np.ndarray) -> "_Metric":
        raise NotImplementedError


class H2Metric(_Metric):
    def __init__(self, r: np.ndarray, theta: np.ndarray):
        self.r = r
        self.theta = theta

    def pairwise(self, I, J):
        return h2_distance_array(self.r[I], self.theta[I], self.r[J], self.theta[J])

    def subset(self, idx):
        return H2Metric(self.r[idx], self.theta[idx])


class TreeMetric(_Metric):
    """Unique-path distance from an ancestor table (-1 past a node's depth)"""

    def __init__(self, depth: np.ndarray, anc: np.ndarray):
        self.depth = depth
        self.anc = anc

    def pairwise(self, I, J):
        a = self.anc[I]
        b = self.anc[J]
        common = ((a == b) & (a >= 0)).sum(axis=-1) - 1
        return (self.depth[I] + self.depth[J] - 2 * common).astype(float)

    def subset(self, idx):
        return TreeMetric(self.depth[idx], self.anc[idx])


class RadialMetric(_Metric):
    """Heights plus boundary coordinates, glued by the radial formula"""

    def __init__(self, t: np.ndarray, x: np.ndarray, mu, periods, visual: str = "zmu"):
        self.t = t
        self.x = x
        self.mu = np.asarray(mu, dtype=float)
        self.periods = np.asarray(periods, dtype=float)
        self.visual = visual

    def visual_of(self, diff):
        if self.visual == "unipotent":
            return unipotent_visual_from_diff(diff)
        return zmu_visual_from_diff(diff, self.mu, self.periods)

    def pairwise(self, I, J):
        vis = self.visual_of(self.x[I] - self.x[J])
        return radial_distance_formula(self.t[I], self.t[J], _neg_log(vis))

    def subset(self, idx):
        return RadialMetric(self.t[idx], self.x[idx], self.mu, self.periods, self.visual)


class GraphMetric(_Metric):
    def __init__(self, dist: np.ndarray):
        self.dist = dist

    def pairwise(self, I, J):
        return self.dist[I, J]

    def subset(self, idx):
        return GraphMetric(self.dist[np.ix_(idx, idx)])


def _expand_ranges(owners: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Pairs (owner, v) for every v in [lo, hi) of each owner"""
    counts = np.maximum(hi - lo, 0)
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    starts = np.cumsum(counts) - counts
    values = np.arange(total, dtype=np.int64) + np.repeat(lo - starts, counts)
    return np.repeat(owners, counts), values


# ---------------------------------------------------------------------------
# Net
# ---------------------------------------------------------------------------

class Net:
    """
    Finite metric space: coordinates, measure weights, a distance oracle
    and an edge list with lengths and axis labels.

    Nets are treated as immutable; cached products (edges built on demand,
    the dense distance matrix, neighbour lists) are filled lazily.
    """

    def __init__(
        self,
        kind: SpaceKind,
        params: Optional[SpaceParams],
        coords: np.ndarray,
        measure: np.ndarray,
        oracle: Oracle,
        metric: _Metric,
        edges: Optional[np.ndarray] = None,
        edge_lengths: Optional[np.ndarray] = None,
        edge_axes: Optional[np.ndarray] = None,
        meta: Optional[dict] = None,
        edge_builder: Optional[Callable[["Net"], Tuple[np.ndarray, np.ndarray, np.ndarray]]] = None,
        window: Optional[Callable[[float], Tuple[np.ndarray, np.ndarray, np.ndarray]]] = None,
    ):
        self.kind = SpaceKind(kind)
        self.params = params
        self.coords = np.asarray(coords, dtype=float)
        if self.coords.ndim == 1:
            self.coords = self.coords[:, None]
        self.measure = np.asarray(measure, dtype=float)
        self.oracle = Oracle(oracle)
        self.metric = metric
        self.meta = dict(meta or {})
        self._edges = None if edges is None else np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        self._edge_lengths = None if edge_lengths is None else np.asarray(edge_lengths, dtype=float)
        self._edge_axes = None if edge_axes is None else np.asarray(edge_axes, dtype=np.int64)
        self._edge_builder = edge_builder
        self._window = window
        self._dense: Optional[np.ndarray] = None
        self._pair_cache: dict = {}

        if len(self.measure) != len(self.coords):
            raise UsageError("measure and coords lengths differ")
        if np.any(~(self.measure > 0)):
            raise UsageError("measure weights must be positive")
        if self._edge_lengths is not None and np.any(~(self._edge_lengths > 0)):
            raise UsageError("edge lengths must be positive")

    def __len__(self) -> int:
        return len(self.coords)

    def __repr__(self) -> str:
        R = self.params.R if self.params is not None else None
        return f"Net(kind={self.kind.value}, points={len(self)}, R={R}, oracle={self.oracle.value})"

    @property
    def n_points(self) -> int:
        return len(self.coords)

    @property
    def total_measure(self) -> float:
        return float(self.measure.sum())

    @property
    def has_window(self) -> bool:
        return self._window is not None and self._dense is None

    @property
    def edges_built(self) -> bool:
        return self._edges is not None

    # -- edges ---------------------------------------------------------------
    def _ensure_edges(self):
        if self._edges is not None:
            return
        if self._edge_builder is not None:
            e, lengths, axes = self._edge_builder(self)
        else:
            e = np.empty((0, 2), dtype=np.int64)
            lengths = np.empty(0)
            axes = np.empty(0, dtype=np.int64)
        self._edges = np.asarray(e, dtype=np.int64).reshape(-1, 2)
        self._edge_lengths = np.asarray(lengths, dtype=float)
        self._edge_axes = np.asarray(axes, dtype=np.int64) if axes is not None else np.zeros(len(lengths), dtype=np.int64)

    @property
    def edges(self) -> np.ndarray:
        self._ensure_edges()
        return self._edges

    @property
    def edge_lengths(self) -> np.ndarray:
        self._ensure_edges()
        return self._edge_lengths

    @property
    def edge_axes(self) -> np.ndarray:
        self._ensure_edges()
        if self._edge_axes is None:
            self._edge_axes = np.zeros(len(self._edges), dtype=np.int64)
        return self._edge_axes

    def adjacency(self) -> sparse.csr_matrix:
        n = len(self)
        e = self.edges
        w = self.edge_lengths
        A = sparse.coo_matrix((np.r_[w, w], (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])), shape=(n, n))
        return A.tocsr()

    # -- distances -----------------------------------------------------------
    def pair_distances(self, I, J) -> np.ndarray:
        """Elementwise d(I[k], J[k])"""
        I = np.asarray(I, dtype=np.int64)
        J = np.asarray(J, dtype=np.int64)
        if len(I) == 0:
            return np.empty(0)
        if self._dense is not None:
            return self._dense[I, J]
        out = np.asarray(self.metric.pairwise(I, J), dtype=float)
        out[I == J] = 0.0
        return out

    def distance(self, i: int, j: int) -> float:
        return float(self.pair_distances(np.array([i]), np.array([j]))[0])

    def block(self, rows, cols) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if self._dense is not None:
            return self._dense[np.ix_(rows, cols)]
        I = np.repeat(rows, len(cols))
        J = np.tile(cols, len(rows))
        return self.pair_distances(I, J).reshape(len(rows), len(cols))

    def distances_from(self, i: int) -> np.ndarray:
        cols = np.arange(len(self))
        return self.block(np.array([i]), cols)[0]

    def distance_matrix(self, limit: Optional[int] = None) -> np.ndarray:
        """Dense all-pairs matrix (cached); refuses nets above `limit` points"""
        if self._dense is not None:
            return self._dense
        n = len(self)
        limit = Config.DENSE_DISTANCE_LIMIT if limit is None else limit
        if n > limit:
            raise SizeCapError(n, limit, what="dense distance matrix")
        D = np.empty((n, n))
        cols = np.arange(n)
        chunk = max(1, (1 << 21) // max(n, 1))
        for start in range(0, n, chunk):
            rows = np.arange(start, min(n, start + chunk))
            D[rows] = self.block(rows, cols)
        D = 0.5 * (D + D.T)
        np.fill_diagonal(D, 0.0)
        self._dense = D
        return D

    def pairs_within(self, radius: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Unordered pairs (i < j) with d(i, j) <= radius, sorted by (i, j).

        Uses the construction's window search when one exists, otherwise
        a chunked scan over all pairs.
        """
        key = round(float(radius), 12)
        if key in self._pair_cache:
            return self._pair_cache[key]
        tol = 1e-12 * max(1.0, abs(radius))
        if self._window is not None and self._dense is None:
            I, J, D = self._window(radius + tol)
        else:
            I, J, D = self._scan_pairs(radius + tol)
        keep = D <= radius + tol
        I, J, D = I[keep], J[keep], D[keep]
        order = np.lexsort((J, I))
        result = (I[order], J[order], D[order])
        self._pair_cache[key] = result
        logger.debug(f"pairs_within({radius:g}) on {self!r}: {len(order)} pairs")
        return result

    def _scan_pairs(self, radius):
        n = len(self)
        out_i, out_j, out_d = [], [], []
        cols = np.arange(n)
        chunk = max(1, (1 << 21) // max(n, 1))
        for start in range(0, n, chunk):
            rows = np.arange(start, min(n, start + chunk))
            B = self.block(rows, cols)
            r_idx, c_idx = np.nonzero((B <= radius) & (cols[None, :] > rows[:, None]))
            out_i.append(rows[r_idx])
            out_j.append(c_idx)
            out_d.append(B[r_idx, c_idx])
        if not out_i:
            return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64), np.empty(0)
        return np.concatenate(out_i), np.concatenate(out_j).astype(np.int64), np.concatenate(out_d)

    def neighbor_lists(self, radius: float) -> sparse.csr_matrix:
        """Symmetric CSR pattern of pairs within radius, diagonal included"""
        n = len(self)
        I, J, _ = self.pairs_within(radius)
        rows = np.r_[I, J, np.arange(n)]
        cols = np.r_[J, I, np.arange(n)]
        A = sparse.csr_matrix((np.ones(len(rows), dtype=bool), (rows, cols)), shape=(n, n))
        A.sort_indices()
        return A

    # -- structure -----------------------------------------------------------
    def heights(self) -> np.ndarray:
        """Distance-to-basepoint coordinate (r, t or depth)"""
        if self.kind == SpaceKind.GRAPH:
            return self.distances_from(0)
        return self.coords[:, 0].copy()

    def subnet(self, indices: Sequence[int]) -> "Net":
        idx = np.asarray(indices, dtype=np.int64)
        n = len(self)
        remap = -np.ones(n, dtype=np.int64)
        remap[idx] = np.arange(len(idx))
        lazy_edges = self._edges is None and self._edge_builder is not None
        meta = {k: v for k, v in self.meta.items() if not isinstance(v, np.ndarray)}
        for k, v in self.meta.items():
            if isinstance(v, np.ndarray) and v.shape[:1] == (n,):
                meta[k] = v[idx]
        meta["parent_indices"] = idx
        if lazy_edges:
            edge_kw = {"edge_builder": self._edge_builder}
        else:
            e = self.edges
            keep = (remap[e[:, 0]] >= 0) & (remap[e[:, 1]] >= 0)
            edge_kw = {"edges": remap[e[keep]], "edge_lengths": self.edge_lengths[keep],
                       "edge_axes": self.edge_axes[keep]}
        sub = Net(
            self.kind, self.params, self.coords[idx], self.measure[idx], self.oracle,
            self.metric.subset(idx), meta=meta, **edge_kw,
        )
        if self._dense is not None:
            sub._dense = self._dense[np.ix_(idx, idx)]
        return sub

    def point(self, i: int) -> Point:
        c = self.coords[i]
        if self.kind == SpaceKind.H2:
            return H2Point(float(c[0]), float(c[1]))
        if self.kind == SpaceKind.TREE:
            parent = self.meta["parent"]
            child = self.meta["child_index"]
            path = []
            node = i
            while parent[node] >= 0:
                path.append(int(child[node]))
                node = parent[node]
            return TreeNode(tuple(reversed(path)))
        if self.kind == SpaceKind.ZMU_COVER:
            return ZCoverPoint(float(c[0]), tuple(float(v) for v in c[1:]))
        if self.kind in (SpaceKind.ZMU, SpaceKind.RAYS):
            return ZPoint(float(c[0]), tuple(float(v) for v in c[1:]))
        raise UsageError(f"{self.kind.value} nets have no point type")

    def check_connected(self, what: str = "net") -> None:
        n_comp, _ = csgraph.connected_components(self.adjacency(), directed=False)
        if n_comp > 1:
            raise DisconnectedError(n_comp, what)


# ---------------------------------------------------------------------------
# H^2
# ---------------------------------------------------------------------------

def _circle_count(r: float, eps: float, sector: float) -> int:
    if r <= 0:
        return 1
    ratio = math.sinh(eps / 2.0) / math.sinh(r)
    if ratio >= 1.0:
        return 1
    alpha = 2.0 * math.asin(ratio)
    if sector >= 2 * math.pi - 1e-12:
        return max(1, int(math.floor(2 * math.pi / alpha + 1e-9)))
    return max(1, int(math.floor(sector / alpha + 1e-9)) + 1)


def build_h2_net(R: float, eps: float, sector: float = 2 * math.pi, measure: str = "volume",
                 point_cap: Optional[int] = None, delta: float = 1.0) -> Net:
    """
    Net of the H^2 ball on circles of radius k*eps.

    Each circle carries evenly spaced points whose hyperbolic spacing is at
    least eps; `sector` < 2*pi restricts the construction to a wedge
    [0, sector]. Volume weights split each annulus area over its circle.
    """
    if not eps > 0 or R < 0:
        raise UsageError(f"need eps > 0 and R >= 0, got R={R}, eps={eps}")
    if not 0 < sector <= 2 * math.pi + 1e-12:
        raise UsageError(f"sector must lie in (0, 2*pi], got {sector}")
    cap = get_point_cap() if point_cap is None else point_cap
    full = sector >= 2 * math.pi - 1e-12

    n_circles = int(math.floor(R / eps + 1e-9)) + 1
    radii = np.arange(n_circles) * eps
    counts = [_circle_count(r, eps, sector) for r in radii]
    total = float(sum(counts))
    if total > cap:
        raise SizeCapError(total, cap, what=f"H2 net R={R} eps={eps}")

    r_list, th_list, w_list, lvl_list = [], [], [], []
    starts = []
    for k, (r, n) in enumerate(zip(radii, counts)):
        starts.append(sum(len(a) for a in r_list))
        if r == 0:
            theta = np.zeros(1)
        elif full:
            theta = 2 * math.pi * np.arange(n) / n
        elif n == 1:
            theta = np.array([sector / 2.0])
        else:
            theta = sector * np.arange(n) / (n - 1)
        inner = max(0.0, r - eps / 2.0)
        outer = R if k == n_circles - 1 else r + eps / 2.0
        area = sector * (math.cosh(outer) - math.cosh(inner))
        if measure == "counting" or area <= 0:
            w = np.ones(n)
        else:
            w = np.full(n, area / n)
        r_list.append(np.full(n, r))
        th_list.append(theta)
        w_list.append(w)
        lvl_list.append(np.full(n, k, dtype=np.int64))
    starts.append(int(total))

    r_arr = np.concatenate(r_list)
    th_arr = np.concatenate(th_list)
    level = np.concatenate(lvl_list)
    starts = np.asarray(starts, dtype=np.int64)
    metric = H2Metric(r_arr, th_arr)

    def window(radius):
        return _h2_window(metric, radii, starts, full, radius)

    def edge_builder(net):
        I, J, D = net.pairs_within(3.0 * eps)
        return np.stack([I, J], axis=1), np.maximum(D, 1e-300), np.zeros(len(I), dtype=np.int64)

    params = SpaceParams((1.0,), R, eps, delta, 1)
    net = Net(
        SpaceKind.H2, params, np.stack([r_arr, th_arr], axis=1), np.concatenate(w_list),
        Oracle.CLOSED_FORM, metric, meta={"level": level, "radii": radii, "sector": sector},
        edge_builder=edge_builder, window=window,
    )
    logger.debug(f"Built {net!r} over {n_circles} circles (sector {sector:.3g})")
    return net


def _h2_window(metric: H2Metric, radii, starts, full: bool, radius: float):
    out_i, out_j = [], []
    L = len(radii)
    for a in range(L):
        ia = np.arange(starts[a], starts[a + 1])
        for b in range(a, L):
            dr = radii[b] - radii[a]
            if dr > radius:
                break
            ib = np.arange(starts[b], starts[b + 1])
            if radii[a] == 0 or radii[b] == 0:
                I = np.repeat(ia, len(ib))
                J = np.tile(ib, len(ia))
            else:
                num = math.sinh(radius / 2.0) ** 2 - math.sinh(dr / 2.0) ** 2
                if num < 0:
                    continue
                s = num / (math.sinh(radii[a]) * math.sinh(radii[b]))
                half = math.pi if s >= 1 else 2.0 * math.asin(math.sqrt(s))
                half += 1e-12
                if half >= math.pi:
                    I = np.repeat(ia, len(ib))
                    J = np.tile(ib, len(ia))
                else:
                    tb = metric.theta[ib]
                    ta = metric.theta[ia]
                    shifts = (-2 * math.pi, 0.0, 2 * math.pi) if full else (0.0,)
                    parts_i, parts_j = [], []
                    for shift in shifts:
                        lo = np.searchsorted(tb, ta - half + shift, side="left")
                        hi = np.searchsorted(tb, ta + half + shift, side="right")
                        own, vals = _expand_ranges(ia, lo, hi)
                        parts_i.append(own)
                        parts_j.append(ib[vals] if len(vals) else vals)
                    I = np.concatenate(parts_i)
                    J = np.concatenate(parts_j)
            if a == b:
                keep = I < J
                I, J = I[keep], J[keep]
            out_i.append(I)
            out_j.append(J)
    if not out_i:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64), np.empty(0)
    I = np.concatenate(out_i)
    J = np.concatenate(out_j)
    lo_ij = np.minimum(I, J)
    hi_ij = np.maximum(I, J)
    key = np.unique(lo_ij * (int(starts[-1]) + 1) + hi_ij)
    I = key // (int(starts[-1]) + 1)
    J = key % (int(starts[-1]) + 1)
    return I, J, metric.pairwise(I, J)


def _circle_starts(r: np.ndarray, theta: np.ndarray) -> Optional[np.ndarray]:
    """Group offsets when points lie on circles of increasing radius in angular order"""
    if len(r) < 2 or np.any(np.diff(r) < 0):
        return None
    starts = np.r_[0, np.nonzero(np.diff(r) > 0)[0] + 1, len(r)]
    same = np.diff(r) == 0
    if np.any(np.diff(theta)[same] < 0):
        return None
    return starts


def h2_points_net(r, theta, measure=None, R: Optional[float] = None) -> Net:
    """
    Net on arbitrary H^2 points with the exact oracle and counting measure.
    Points grouped on circles by increasing radius, each in angular order,
    get the circle window search.
    """
    r = np.asarray(r, dtype=float)
    theta = np.mod(np.asarray(theta, dtype=float), 2 * math.pi)
    w = np.ones(len(r)) if measure is None else np.asarray(measure, dtype=float)
    R = float(r.max()) if R is None and len(r) else (R or 0.0)
    params = SpaceParams((1.0,), R, 1.0, 1.0, 1)
    metric = H2Metric(r, theta)
    starts = _circle_starts(r, theta)
    window = None
    if starts is not None:
        radii = r[starts[:-1]]

        def window(radius):
            return _h2_window(metric, radii, starts, True, radius)
    return Net(SpaceKind.H2, params, np.stack([r, theta], axis=1), w, Oracle.CLOSED_FORM, metric, window=window)


# ---------------------------------------------------------------------------
# Trees
# ---------------------------------------------------------------------------

def tree_ball_size(d: int, R: int) -> int:
    if R == 0:
        return 1
    if d == 2:
        return 1 + 2 * R
    return 1 + d * ((d - 1) ** R - 1) // (d - 2)


def build_tree_ball(d: int, R: int, point_cap: Optional[int] = None) -> Net:
    """Ball of radius R in the d-regular tree, unit edges, breadth-first order"""
    if d < 3 or R < 0 or int(R) != R:
        raise UsageError(f"need degree d >= 3 and integer R >= 0, got d={d}, R={R}")
    R = int(R)
    cap = get_point_cap() if point_cap is None else point_cap
    total = tree_ball_size(d, R)
    if total > cap:
        raise SizeCapError(total, cap, what=f"tree ball d={d} R={R}")

    parent = np.full(total, -1, dtype=np.int64)
    child = np.zeros(total, dtype=np.int64)
    depth = np.zeros(total, dtype=np.int64)
    anc = np.full((total, R + 1), -1, dtype=np.int64)
    anc[0, 0] = 0
    level_start = [0, 1]
    for k in range(1, R + 1):
        prev = np.arange(level_start[k - 1], level_start[k])
        fan = d if k == 1 else d - 1
        new = np.arange(level_start[k], level_start[k] + len(prev) * fan)
        parent[new] = np.repeat(prev, fan)
        child[new] = np.tile(np.arange(fan), len(prev))
        depth[new] = k
        anc[new] = anc[parent[new]]
        anc[new, k] = new
        level_start.append(int(new[-1]) + 1)

    nodes = np.arange(1, total)
    edges = np.stack([parent[nodes], nodes], axis=1)
    params = SpaceParams((1.0,), float(R), 1.0, 0.0, 1)
    net = Net(
        SpaceKind.TREE, params, np.stack([depth, parent], axis=1).astype(float), np.ones(total),
        Oracle.CLOSED_FORM, TreeMetric(depth, anc),
        edges=edges, edge_lengths=np.ones(len(nodes)), edge_axes=np.zeros(len(nodes), dtype=np.int64),
        meta={"parent": parent, "child_index": child, "degree": d, "level": depth},
    )
    logger.debug(f"Built {net!r} with degree {d}")
    return net


def tree_from_parents(parent: np.ndarray, meta: Optional[dict] = None) -> Net:
    """Unit-edge tree net from a parent array (root has parent -1, parents precede children)"""
    parent = np.asarray(parent, dtype=np.int64)
    n = len(parent)
    depth = np.zeros(n, dtype=np.int64)
    for i in range(1, n):
        if parent[i] < 0 or parent[i] >= i:
            raise UsageError("tree parents must precede their children")
        depth[i] = depth[parent[i]] + 1
    H = int(depth.max()) if n else 0
    anc = np.full((n, H + 1), -1, dtype=np.int64)
    child = np.zeros(n, dtype=np.int64)
    counter = np.zeros(n, dtype=np.int64)
    anc[0, 0] = 0
    for i in range(1, n):
        anc[i] = anc[parent[i]]
        anc[i, depth[i]] = i
        child[i] = counter[parent[i]]
        counter[parent[i]] += 1
    nodes = np.arange(1, n)
    params = SpaceParams((1.0,), float(H), 1.0, 0.0, 1)
    info = {"parent": parent, "child_index": child, "level": depth}
    info.update(meta or {})
    return Net(
        SpaceKind.TREE, params, np.stack([depth, parent], axis=1).astype(float), np.ones(n),
        Oracle.CLOSED_FORM, TreeMetric(depth, anc),
        edges=np.stack([parent[nodes], nodes], axis=1), edge_lengths=np.ones(n - 1),
        edge_axes=np.zeros(n - 1, dtype=np.int64), meta=info,
    )


# ---------------------------------------------------------------------------
# Z_mu and its double cover
# ---------------------------------------------------------------------------

@dataclass
class _ZLevels:
    t: np.ndarray
    counts: np.ndarray          # (levels, n) grid points per coordinate
    start: np.ndarray           # offsets, len levels + 1
    thinned: list = field(default_factory=list)


def _dyadic_counts(params: SpaceParams, t: float, periods: np.ndarray) -> np.ndarray:
    mu = np.asarray(params.mu)
    per_unit = np.exp(mu * t) / params.mesh
    exps = np.floor(np.log2(np.maximum(per_unit, 1.0)) + 1e-12)
    return (np.power(2.0, exps) * periods).astype(np.int64)


def _plan_levels(params: SpaceParams, periods: np.ndarray, level_cap: Optional[int]) -> _ZLevels:
    n_levels = int(math.floor(params.R / params.mesh + 1e-9)) + 1
    t = np.arange(n_levels) * params.mesh
    counts = np.zeros((n_levels, params.base_dim), dtype=np.int64)
    thinned = []
    for k in range(n_levels):
        full = _dyadic_counts(params, t[k], periods)
        if k > 0 and level_cap is not None and float(np.prod(full.astype(float))) > level_cap:
            counts[k] = counts[k - 1]
            thinned.append(k)
        else:
            counts[k] = full
    sizes = counts.astype(float).prod(axis=1)
    start = np.r_[0, np.cumsum(sizes)].astype(np.int64)
    return _ZLevels(t, counts, start, thinned)


def _strides(counts: np.ndarray) -> np.ndarray:
    n = len(counts)
    s = np.ones(n, dtype=np.int64)
    for i in range(n - 2, -1, -1):
        s[i] = s[i + 1] * counts[i + 1]
    return s


def _level_indices(counts: np.ndarray) -> np.ndarray:
    """Grid multi-indices of one level in row-major order"""
    grids = np.meshgrid(*[np.arange(c) for c in counts], indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _slab_volume(a: float, b: float, mu_sum: float) -> float:
    if b <= a:
        return 0.0
    return (math.exp(mu_sum * b) - math.exp(mu_sum * a)) / mu_sum


def build_zmu_net(params: SpaceParams, cover: bool = False, level_cap: Optional[int] = -1,
                  measure: str = "volume", point_cap: Optional[int] = None) -> Net:
    """
    Hierarchical net of the Z_mu ball (or its double cover in x_n).

    Level k sits at height t = k*mesh and carries a nested dyadic grid with
    spacing in [mesh, 2*mesh) for the level metric e^(mu_i t) dx_i. When a
    level's full grid exceeds `level_cap` points it keeps the grid of the
    level below (recorded in meta["thinned_levels"]); pass level_cap=None to
    disable, -1 for the configured default.
    """
    if level_cap == -1:
        level_cap = get_level_cap()
    cap = get_point_cap() if point_cap is None else point_cap
    periods = _periods(params, cover)
    plan = _plan_levels(params, periods, level_cap)
    total = int(plan.start[-1])
    if total > cap:
        raise SizeCapError(total, cap, what=f"Z_mu net mu={params.mu} R={params.R} mesh={params.mesh}")
    if plan.thinned:
        logger.warning(f"Z_mu levels {plan.thinned[0]}..{plan.thinned[-1]} reuse a coarser grid (level cap {level_cap})")

    mu = np.asarray(params.mu)
    sheets = 2.0 if cover else 1.0
    n_levels = len(plan.t)
    h = params.mesh
    t_parts, x_parts, w_parts, lvl_parts, j_parts = [], [], [], [], []
    for k in range(n_levels):
        idx = _level_indices(plan.counts[k])
        x = idx * (periods / plan.counts[k])
        size = len(idx)
        if params.R == 0:
            vol = sheets
        else:
            lo = max(0.0, plan.t[k] - h / 2.0)
            hi = params.R if k == n_levels - 1 else min(params.R, plan.t[k] + h / 2.0)
            vol = sheets * _slab_volume(lo, hi, params.mu_sum)
        w = np.ones(size) if measure == "counting" else np.full(size, max(vol, 1e-300) / size)
        t_parts.append(np.full(size, plan.t[k]))
        x_parts.append(x)
        w_parts.append(w)
        lvl_parts.append(np.full(size, k, dtype=np.int64))
        j_parts.append(idx)
    t_arr = np.concatenate(t_parts)
    x_arr = np.concatenate(x_parts, axis=0)
    grid_idx = np.concatenate(j_parts, axis=0)
    level = np.concatenate(lvl_parts)

    edges, lengths, axes = _zmu_edges(params, plan, periods, grid_idx, level)
    metric = RadialMetric(t_arr, x_arr, mu, periods, "zmu")

    def window(radius):
        return _zmu_window(metric, plan, periods, mu, radius)

    kind = SpaceKind.ZMU_COVER if cover else SpaceKind.ZMU
    net = Net(
        kind, params, np.concatenate([t_arr[:, None], x_arr], axis=1), np.concatenate(w_parts),
        Oracle.RADIAL, metric, edges=edges, edge_lengths=lengths, edge_axes=axes,
        meta={
            "level": level, "grid_index": grid_idx, "level_counts": plan.counts,
            "level_start": plan.start, "heights": plan.t, "periods": periods,
            "thinned_levels": list(plan.thinned), "cover": cover,
        },
        window=window,
    )
    logger.debug(f"Built {net!r} with level counts {[int(np.prod(c)) for c in plan.counts]}")
    return net


def _zmu_edges(params, plan: _ZLevels, periods, grid_idx, level):
    mu = np.asarray(params.mu)
    e_parts, l_parts, a_parts = [], [], []
    for k in range(len(plan.t)):
        counts = plan.counts[k]
        strides = _strides(counts)
        base = plan.start[k]
        idx = grid_idx[plan.start[k]:plan.start[k + 1]]
        flat = base + idx @ strides
        # horizontal: j -> j + 1 around each circle factor
        for i in range(params.base_dim):
            c = counts[i]
            if c < 2:
                continue
            nxt = idx.copy()
            nxt[:, i] = (nxt[:, i] + 1) % c
            src = flat
            dst = base + nxt @ strides
            if c == 2:
                keep = idx[:, i] == 0
                src, dst = src[keep], dst[keep]
            e_parts.append(np.stack([src, dst], axis=1))
            l_parts.append(np.full(len(src), math.exp(mu[i] * plan.t[k]) * periods[i] / c))
            a_parts.append(np.full(len(src), i + 1, dtype=np.int64))
        if k == 0:
            continue
        # vertical: to the floor-parent on the level below
        pc = plan.counts[k - 1]
        shift = counts // pc
        parent_idx = idx // shift
        aligned = np.all(idx % shift == 0, axis=1)
        dst = plan.start[k - 1] + parent_idx @ _strides(pc)
        offset = (idx / counts - parent_idx / pc) * periods
        stretch = np.sqrt(params.mesh ** 2 + ((np.exp(mu * plan.t[k]) * offset) ** 2).sum(axis=1))
        e_parts.append(np.stack([flat, dst], axis=1))
        l_parts.append(np.where(aligned, params.mesh, stretch))
        a_parts.append(np.where(aligned, AXIS_VERTICAL, AXIS_LINK).astype(np.int64))
    if not e_parts:
        return np.empty((0, 2), dtype=np.int64), np.empty(0), np.empty(0, dtype=np.int64)
    return np.concatenate(e_parts), np.concatenate(l_parts), np.concatenate(a_parts)


def _axis_pairs(c: int, c2: int, period: float, half: float):
    """Index pairs (j, j2) of two circle grids within circle distance `half`"""
    if half >= period / 2.0 or c2 == 1:
        return np.repeat(np.arange(c), c2), np.tile(np.arange(c2), c)
    x = np.arange(c) * period / c
    lo = np.ceil((x - half) * c2 / period - 1e-9).astype(np.int64)
    hi = np.floor((x + half) * c2 / period + 1e-9).astype(np.int64) + 1
    if np.any(hi - lo >= c2):
        return np.repeat(np.arange(c), c2), np.tile(np.arange(c2), c)
    own, vals = _expand_ranges(np.arange(c), lo, hi)
    return own, np.mod(vals, c2)


def _zmu_window(metric: RadialMetric, plan: _ZLevels, periods, mu, radius: float):
    out_i, out_j = [], []
    L = len(plan.t)
    for a in range(L):
        sa = _strides(plan.counts[a])
        for b in range(a, L):
            if plan.t[b] - plan.t[a] > radius:
                break
            bound = math.exp((radius - plan.t[a] - plan.t[b]) / 2.0)
            sb = _strides(plan.counts[b])
            fa = np.zeros(1, dtype=np.int64)
            fb = np.zeros(1, dtype=np.int64)
            for i in range(len(mu)):
                half = bound ** mu[i]
                ja, jb = _axis_pairs(int(plan.counts[a][i]), int(plan.counts[b][i]), periods[i], half)
                fa = (fa[:, None] + (ja * sa[i])[None, :]).ravel()
                fb = (fb[:, None] + (jb * sb[i])[None, :]).ravel()
            I = plan.start[a] + fa
            J = plan.start[b] + fb
            if a == b:
                keep = I < J
                I, J = I[keep], J[keep]
            out_i.append(I)
            out_j.append(J)
    if not out_i:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64), np.empty(0)
    I = np.concatenate(out_i)
    J = np.concatenate(out_j)
    return I, J, metric.pairwise(I, J)


# ---------------------------------------------------------------------------
# Ray nets
# ---------------------------------------------------------------------------

def build_ray_net(params: SpaceParams, directions: np.ndarray, visual: str = "zmu", cover: bool = False) -> Net:
    """
    Points at heights k*mesh along a finite set of boundary directions.

    Index 0 is the basepoint. At each level a direction is kept only when
    it is visually farther than e^-t from the directions already kept there,
    so distinct points are at positive distance; meta["representative"][k, m]
    is the point standing for direction m at level k.
    """
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    if directions.shape[1] != params.base_dim:
        raise UsageError(f"directions have dimension {directions.shape[1]}, expected {params.base_dim}")
    if visual == "unipotent" and params.base_dim != 2:
        raise UsageError("the shear visual metric needs a 2-dimensional boundary")
    periods = _periods(params, cover)
    metric_all = RadialMetric(np.zeros(len(directions)), directions, params.mu, periods, visual)

    n_levels = int(math.floor(params.R / params.mesh + 1e-9)) + 1
    M = len(directions)
    rep = np.zeros((n_levels, M), dtype=np.int64)
    t_parts = [np.zeros(1)]
    x_parts = [np.zeros((1, params.base_dim))]
    dir_parts = [np.array([-1], dtype=np.int64)]
    lvl_parts = [np.zeros(1, dtype=np.int64)]
    count = 1
    for k in range(1, n_levels):
        t = k * params.mesh
        threshold = math.exp(-t)
        kept = []
        for m in range(M):
            if kept:
                vis = metric_all.visual_of(directions[kept] - directions[m])
                close = np.nonzero(vis <= threshold)[0]
                if len(close):
                    rep[k, m] = count + close[0]
                    continue
            rep[k, m] = count + len(kept)
            kept.append(m)
        kept = np.asarray(kept, dtype=np.int64)
        t_parts.append(np.full(len(kept), t))
        x_parts.append(directions[kept])
        dir_parts.append(kept)
        lvl_parts.append(np.full(len(kept), k, dtype=np.int64))
        count += len(kept)

    t_arr = np.concatenate(t_parts)
    x_arr = np.concatenate(x_parts, axis=0)
    direction = np.concatenate(dir_parts)
    level = np.concatenate(lvl_parts)

    # each point hangs from the representative of its direction one level down
    src = np.arange(1, count)
    below = level[src] - 1
    dst = np.where(below == 0, 0, rep[np.maximum(below, 0), direction[src]])
    lengths = t_arr[src] - t_arr[dst]
    metric = RadialMetric(t_arr, x_arr, params.mu, periods, visual)
    return Net(
        SpaceKind.RAYS, params, np.concatenate([t_arr[:, None], x_arr], axis=1), np.ones(count),
        Oracle.RADIAL, metric, edges=np.stack([src, dst], axis=1), edge_lengths=lengths,
        edge_axes=np.zeros(len(src), dtype=np.int64),
        meta={"level": level, "direction": direction, "representative": rep,
              "directions": directions, "visual": visual, "cover": cover},
    )


# ---------------------------------------------------------------------------
# General graphs
# ---------------------------------------------------------------------------

def graph_net(n: int, edges, lengths=None, measure=None) -> Net:
    """Weighted graph with the shortest-path oracle"""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    lengths = np.ones(len(edges)) if lengths is None else np.asarray(lengths, dtype=float)
    w = np.ones(n) if measure is None else np.asarray(measure, dtype=float)
    A = sparse.coo_matrix((lengths, (edges[:, 0], edges[:, 1])), shape=(n, n)).tocsr()
    dist = csgraph.shortest_path(A, directed=False)
    params = SpaceParams((1.0,), float(np.max(dist[np.isfinite(dist)])) if n else 0.0,
                         float(lengths.min()) if len(lengths) else 1.0, 0.0, 1)
    heights = dist[0] if n else np.zeros(0)
    net = Net(
        SpaceKind.GRAPH, params, np.where(np.isfinite(heights), heights, -1.0)[:, None], w, Oracle.GRAPH,
        GraphMetric(dist), edges=edges, edge_lengths=lengths, edge_axes=np.zeros(len(edges), dtype=np.int64),
    )
    net._dense = dist
    return net


# ---------------------------------------------------------------------------
# Ray deviation constant D
# ---------------------------------------------------------------------------

def ray_deviation(net: Net) -> float:
    """
    Largest excess d(p, q) - |t_p - t_q| between a point and its nearest
    point one level down along its own direction. Cached in net.meta.
    """
    if "ray_deviation" in net.meta:
        return net.meta["ray_deviation"]
    if net.kind in (SpaceKind.TREE, SpaceKind.RAYS, SpaceKind.GRAPH) or len(net) < 2:
        D = 0.0
    elif net.kind in (SpaceKind.ZMU, SpaceKind.ZMU_COVER):
        vertical = net.edges[net.edge_axes <= AXIS_VERTICAL]
        heights = net.coords[:, 0]
        excess = net.pair_distances(vertical[:, 0], vertical[:, 1]) - np.abs(
            heights[vertical[:, 0]] - heights[vertical[:, 1]])
        D = float(max(0.0, excess.max())) if len(excess) else 0.0
    elif net.kind == SpaceKind.H2:
        level = net.meta["level"]
        r = net.coords[:, 0]
        theta = net.coords[:, 1]
        D = 0.0
        for k in range(1, int(level.max()) + 1):
            upper = np.nonzero(level == k)[0]
            lower = np.nonzero(level == k - 1)[0]
            tl = theta[lower]
            pos = np.clip(np.searchsorted(tl, theta[upper]), 0, len(lower) - 1)
            cand = np.stack([pos, np.maximum(pos - 1, 0), (pos + 1) % len(lower)], axis=1)
            gaps = circle_gap(theta[upper][:, None] - tl[cand], 2 * math.pi)
            best = lower[cand[np.arange(len(upper)), gaps.argmin(axis=1)]]
            excess = net.pair_distances(upper, best) - (r[upper] - r[best])
            D = max(D, float(excess.max()))
    else:
        D = 0.0
    net.meta["ray_deviation"] = D
    return D
