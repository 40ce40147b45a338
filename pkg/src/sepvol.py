"""Coarse volume, separation and the obstruction inequalities built on them"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.optimize import brentq, minimize_scalar

from .errors import DegenerateDomainError, NoC1EstimateError, SizeCapError, UsageError
from .logging_config import get_logger
from .poincare import Kernel, make_ball_kernel, poincare_exact_p2, poincare_lower_ascent
from .spaces import Net

logger = get_logger(__name__)

EXHAUSTIVE_LIMIT = 12
EXACT_C1_LIMIT = 16
SWEEP_CANDIDATES = 400


@dataclass
class CoverReport:
    a: float
    covering_count: int
    packing_count: int
    packing_2a: int
    centres: np.ndarray = field(repr=False, default=None)

    def as_dict(self) -> dict:
        return {"a": self.a, "covering_count": self.covering_count,
                "packing_count": self.packing_count, "packing_2a": self.packing_2a}


@dataclass
class SeparationReport:
    a: float
    upper: int
    partition: np.ndarray = field(repr=False, default=None)
    crossing: np.ndarray = field(repr=False, default=None)
    lower: Optional[float] = None
    vol_a: int = 0
    notes: List[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"a": self.a, "upper": self.upper, "lower": self.lower, "vol_a": self.vol_a,
                "crossing_balls": len(self.crossing) if self.crossing is not None else None,
                "notes": list(self.notes)}


# ---------------------------------------------------------------------------
# Coarse volume
# ---------------------------------------------------------------------------

def _greedy(adj: sparse.csr_matrix, members: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Scan points in index order and keep each one not yet within reach of a
    kept point. The kept points cover `members` and are pairwise out of reach.
    """
    n = adj.shape[0]
    inside = np.ones(n, dtype=bool) if members is None else members
    covered = ~inside
    kept = []
    indptr, indices = adj.indptr, adj.indices
    for i in np.nonzero(inside)[0]:
        if covered[i]:
            continue
        kept.append(i)
        covered[indices[indptr[i]:indptr[i + 1]]] = True
    return np.asarray(kept, dtype=np.int64)


def cover_count(net: Net, a: float, members: Optional[np.ndarray] = None) -> int:
    """Vol_a of a subset (boolean mask), by the greedy cover"""
    return len(_greedy(net.neighbor_lists(a), members))


def vol_a(net: Net, a: float) -> CoverReport:
    """
    Greedy covering by closed a-balls and greedy maximal packings.

    The covering centres are exactly the greedy maximal set with gaps > a,
    so covering_count == packing_count; packing_2a uses gaps > 2a and
    bounds every a-cover from below.
    """
    if a < 0:
        raise UsageError(f"a must be non-negative, got {a}")
    mesh = net.params.mesh if net.params is not None else 0.0
    if 0 < a < mesh:
        logger.warning(f"a = {a:g} is below the net mesh {mesh:g}")
    centres = _greedy(net.neighbor_lists(a))
    wide = _greedy(net.neighbor_lists(2 * a))
    logger.debug(f"Vol_{a:g}({net!r}) = {len(centres)}; 2a-packing {len(wide)}")
    return CoverReport(float(a), len(centres), len(centres), len(wide), centres)


# ---------------------------------------------------------------------------
# Separation
# ---------------------------------------------------------------------------

def _family(net: Net, a: float) -> Tuple[np.ndarray, sparse.csr_matrix]:
    """Greedy family of a-balls and its (balls x points) incidence matrix"""
    adj = net.neighbor_lists(a)
    centres = _greedy(adj)
    return centres, adj[centres].astype(float).tocsr()


def _crossing_balls(incidence: sparse.csr_matrix, side: np.ndarray) -> np.ndarray:
    hits = np.asarray(incidence @ side.astype(float)).ravel()
    sizes = np.diff(incidence.indptr)
    return np.nonzero((hits > 0) & (hits < sizes))[0]


def _balanced(adj: sparse.csr_matrix, side: np.ndarray, total: int) -> bool:
    if not side.any() or side.all():
        return False
    need = total / 3.0
    return len(_greedy(adj, side)) >= need and len(_greedy(adj, ~side)) >= need


def exhaustive_separation(net: Net, a: float) -> Tuple[int, np.ndarray]:
    """Minimum crossing count over all balanced bipartitions (small nets only)"""
    n = len(net)
    if n > 20:
        raise SizeCapError(n, 20, what="exhaustive separation")
    if n < 2:
        raise DegenerateDomainError("separation needs at least two points")
    adj = net.neighbor_lists(a)
    total = len(_greedy(adj))
    _, inc = _family(net, a)
    best, best_side = None, None
    for bits in range(1, 1 << (n - 1)):
        side = np.array([(bits >> i) & 1 for i in range(n)], dtype=bool)
        if not _balanced(adj, side, total):
            continue
        count = len(_crossing_balls(inc, side))
        if best is None or count < best:
            best, best_side = count, side
    if best is None:
        raise DegenerateDomainError("no balanced bipartition exists")
    return best, best_side


def _sweep_width(net: Net, a: float) -> float:
    lengths = net.edge_lengths
    return max(a, float(lengths.max())) if len(lengths) else a


def sep_upper(net: Net, a: float, exhaustive_limit: int = EXHAUSTIVE_LIMIT) -> SeparationReport:
    """
    Upper bound on sep_a from one balanced partition: exact search on
    small nets, otherwise a threshold sweep of the second eigenfunction.
    """
    n = len(net)
    if n < 2:
        raise DegenerateDomainError("separation needs at least two points")
    net.check_connected()
    adj = net.neighbor_lists(a)
    total = len(_greedy(adj))
    centres, inc = _family(net, a)
    if n <= exhaustive_limit:
        count, side = exhaustive_separation(net, a)
        crossing = centres[_crossing_balls(inc, side)]
        return SeparationReport(float(a), count, side, crossing, vol_a=total, notes=["exhaustive"])

    kernel = make_ball_kernel(net, _sweep_width(net, a))
    witness = np.real(poincare_exact_p2(net, kernel).witness)
    order = np.argsort(witness, kind="stable")
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n)

    # ball j crosses the cut "first k points" iff min rank < k <= max rank
    lo = np.minimum.reduceat(rank[inc.indices], inc.indptr[:-1])
    hi = np.maximum.reduceat(rank[inc.indices], inc.indptr[:-1])
    delta = np.zeros(n + 1, dtype=np.int64)
    np.add.at(delta, lo + 1, 1)
    np.add.at(delta, hi + 1, -1)
    crossings = np.cumsum(delta)[1:n]          # k = 1..n-1
    ks = np.arange(1, n)
    candidates = ks[np.lexsort((np.abs(ks - n / 2), crossings))]
    checked = 0
    for k in candidates:
        side = np.zeros(n, dtype=bool)
        side[order[:k]] = True
        checked += 1
        if _balanced(adj, side, total):
            crossing = centres[_crossing_balls(inc, side)]
            logger.debug(f"sweep cut at {k}/{n} after {checked} balance checks: {len(crossing)} crossing balls")
            return SeparationReport(float(a), len(crossing), side, crossing, vol_a=total, notes=["spectral sweep"])
        if checked >= SWEEP_CANDIDATES and checked % SWEEP_CANDIDATES == 0:
            logger.debug(f"{checked} sweep thresholds unbalanced so far")
    raise DegenerateDomainError(f"no balanced sweep cut found on {net!r}")


def _counting_copy(net: Net) -> Net:
    sub = net.subnet(np.arange(len(net)))
    sub.measure = np.ones(len(net))
    return sub


def family_kernel(net: Net, a: float) -> Tuple[Kernel, float]:
    """
    Ball-incidence kernel psi_F(x, y) = sum_j 1[x, y in B_j] / (n(x) |B_j|)
    of the greedy a-family on counting measure, and s(a) = max |B_j|.
    """
    counted = _counting_copy(net)
    _, inc = _family(net, a)
    sizes = np.diff(inc.indptr).astype(float)
    multiplicity = np.asarray(inc.sum(axis=0)).ravel()
    W = sparse.diags(1.0 / multiplicity) @ inc.T @ sparse.diags(1.0 / sizes) @ inc
    W = W.tocsr()
    W.eliminate_zeros()
    kernel = Kernel(counted, W, 2.0 * a, 0.0, float(W.data.min()), float(W.data.max()), raw=W)
    return kernel, float(sizes.max())


def _exact_c1(kernel: Kernel) -> float:
    """Sup over indicator functions, where the p = 1 quotient is attained"""
    n = len(kernel.net)
    if n > EXACT_C1_LIMIT:
        raise SizeCapError(n, EXACT_C1_LIMIT, what="exact C_1 enumeration")
    W = kernel.weights.toarray()
    W = W + W.T
    masks = ((np.arange(1, 1 << (n - 1))[:, None] >> np.arange(n)[None, :]) & 1).astype(float)
    cut = np.einsum("si,ij,sj->s", masks, W, 1.0 - masks)
    mass = masks.sum(axis=1)
    small = np.minimum(mass, n - mass)
    if np.any(cut <= 0):
        return math.inf
    return float(np.max(small / cut))


def sep_lower_poincare(net: Net, a: float, c1: Optional[float] = None, use_ascent: bool = True,
                       notes: Optional[List[str]] = None) -> float:
    """
    Vol_a(X) / (3 C_1 s(a)) for the family kernel.

    Any balanced partition has min(|U1|, |U2|) >= Vol_a(X)/3 points while
    each crossing ball adds at most s(a) to N_1 of the indicator. Exact C_1
    keeps this a certified bound; an ascent estimate of C_1 is flagged.
    """
    notes = notes if notes is not None else []
    total = cover_count(net, a)
    kernel, s = family_kernel(net, a)
    if c1 is None:
        if len(net) <= EXACT_C1_LIMIT:
            c1 = _exact_c1(kernel)
            notes.append("C1 exact")
        elif use_ascent:
            c1 = poincare_lower_ascent(kernel.net, kernel, 1.0).lower
            notes.append("C1 from ascent (estimate)")
        else:
            raise NoC1EstimateError("no C_1 estimate supplied and ascent disabled")
    else:
        notes.append("C1 supplied")
    if not math.isfinite(c1):
        notes.append("family kernel disconnected")
        return 0.0
    if c1 <= 0:
        raise NoC1EstimateError(f"C_1 estimate must be positive, got {c1}")
    return total / (3.0 * c1 * s)


def separation(net: Net, a: float, c1: Optional[float] = None) -> SeparationReport:
    report = sep_upper(net, a)
    report.lower = sep_lower_poincare(net, a, c1=c1, notes=report.notes)
    if report.lower > report.upper + 1e-9 and "C1 exact" in report.notes:
        logger.warning(f"certified lower bound {report.lower:.4g} exceeds upper {report.upper}")
    return report


# ---------------------------------------------------------------------------
# Obstruction inequalities
# ---------------------------------------------------------------------------

def tree_bound_check(S: float, V_c: float, d: int, a: float, lam: float, c: float) -> Tuple[bool, float]:
    """lambda*2a + c >= log_d(S / V_c); returns (holds, lhs - rhs)"""
    if d < 2:
        raise UsageError(f"d must be >= 2, got {d}")
    if S <= 0 or V_c <= 0:
        raise UsageError("volumes must be positive")
    lhs = lam * 2.0 * a + c
    rhs = math.log(S / V_c) / math.log(d)
    return lhs >= rhs - 1e-12, lhs - rhs


def volume_growth_lower_bound(alpha: float, lam: float, R: float) -> float:
    """
    Smallest c >= 0 beyond which (c/lam)^alpha e^(R - 2c) <= (2 lam R + c)^alpha
    holds, compared in logs.
    """
    if alpha <= 0 or lam < 1 or R <= 0:
        raise UsageError("need alpha > 0, lambda >= 1, R > 0")

    def excess(c):
        return alpha * math.log(c / lam) + R - 2.0 * c - alpha * math.log(2.0 * lam * R + c)

    # excess rises then falls; its maximum lies below alpha / 2
    peak = minimize_scalar(lambda c: -excess(c), bounds=(1e-12, alpha / 2.0), method="bounded",
                           options={"xatol": 1e-12})
    c_peak = float(peak.x)
    if excess(c_peak) <= 0:
        return 0.0
    hi = max(alpha, R)
    while excess(hi) > 0:
        hi *= 2.0
    return float(brentq(excess, c_peak, hi, xtol=1e-12))


def connectivity_bound_check(R: float, lambda2: float, c1: float, c2: float) -> bool:
    """R <= 12 lambda2 c1 + 4 c2"""
    if min(R, lambda2, c1, c2) < 0:
        raise UsageError("inputs must be non-negative")
    return R <= 12.0 * lambda2 * c1 + 4.0 * c2
