"""
Kernels, cocycles and seminorms on nets, their transport along maps,
and estimation of Poincare constants.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from scipy import linalg, sparse
from scipy.optimize import minimize, minimize_scalar
from scipy.sparse import csgraph
from scipy.sparse.linalg import LinearOperator, eigsh, splu

from .config import Config, get_seed, get_workers
from .embeddings import DistortionReport, PointMap
from .errors import (
    DisconnectedError,
    NetMismatchError,
    NoEdgesError,
    PoleOrBelowError,
    SizeCapError,
    UsageError,
    WrongNetError,
)
from .logging_config import get_logger
from .spaces import Net, SpaceKind

logger = get_logger(__name__)


class Method(str, Enum):
    SPECTRAL_P2 = "spectral_p2"
    ASCENT = "ascent"
    TEST_FUNCTION = "test_function"


@dataclass
class Kernel:
    """
    Non-negative pair weights psi(x, x') against the net measure, with
    sum_x' psi(x, x') m(x') = 1 for every x.
    """
    net: Net
    weights: sparse.csr_matrix
    width: float
    positivity_radius: float
    margin: float
    sup: float
    raw: Optional[sparse.csr_matrix] = None
    isolated: int = 0

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.weights @ self.net.measure).ravel()

    def triplets(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        W = self.weights.tocoo()
        return W.row.astype(np.int64), W.col.astype(np.int64), W.data


@dataclass
class FunctionOnNet:
    net: Net
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if len(self.values) != len(self.net):
            raise UsageError(f"function has {len(self.values)} values for {len(self.net)} points")
        if not np.all(np.isfinite(self.values)):
            raise UsageError("function values must be finite")


@dataclass
class Cocycle:
    """Pair function a(x, y); exact cocycles are stored as a potential g with a = g(x) - g(y)"""
    net: Net
    potential: Optional[np.ndarray] = None
    matrix: Optional[np.ndarray] = None

    @classmethod
    def exact(cls, g: FunctionOnNet) -> "Cocycle":
        return cls(g.net, potential=np.asarray(g.values))

    def values(self, I, J) -> np.ndarray:
        if self.potential is not None:
            return self.potential[I] - self.potential[J]
        return self.matrix[I, J]

    def identity_defect(self, n_triples: int = 1000, seed: int = 0) -> float:
        """Largest |a(y1,y2) - a(y1,y3) - a(y3,y2)| over random triples"""
        rng = np.random.default_rng(seed)
        y1, y2, y3 = rng.integers(0, len(self.net), size=(3, n_triples))
        defect = self.values(y1, y2) - self.values(y1, y3) - self.values(y3, y2)
        return float(np.abs(defect).max()) if n_triples else 0.0


@dataclass
class PoincareEstimate:
    p: float
    lower: float
    upper: Optional[float]
    method: Method
    kernel: Optional[Kernel] = None
    witness: Optional[np.ndarray] = None
    meta: Dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"p": self.p, "lower": self.lower, "upper": self.upper, "method": self.method.value}


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------

def _balance(W: sparse.csr_matrix, m: np.ndarray) -> Tuple[sparse.csr_matrix, float, int]:
    """Symmetric scaling diag(d) W diag(d) with unit rows against m"""
    d = np.ones(W.shape[0])
    residual = np.inf
    sweeps = 0
    for sweeps in range(1, Config.KERNEL_MAX_SWEEPS + 1):
        rows = d * (W @ (d * m))
        residual = float(np.abs(rows - 1.0).max())
        if residual <= Config.KERNEL_ROW_TOL:
            break
        d = np.sqrt(d / (W @ (d * m)))
    D = sparse.diags(d)
    return (D @ W @ D).tocsr(), residual, sweeps


def make_ball_kernel(net: Net, width: float) -> Kernel:
    """
    Normalized ball indicator of the given width, symmetrized and then
    rebalanced so every row integrates to 1 again.
    """
    if width < 0:
        raise UsageError(f"kernel width must be non-negative, got {width}")
    mesh = net.params.mesh if net.params is not None else 0.0
    if width < mesh:
        logger.warning(f"kernel width {width:g} is below the net mesh {mesh:g}")
    m = net.measure
    A = net.neighbor_lists(width).astype(float)
    vol = np.asarray(A @ m).ravel()
    raw = sparse.diags(1.0 / vol) @ A
    raw = raw.tocsr()
    sym = (0.5 * (raw + raw.T)).tocsr()
    W, residual, sweeps = _balance(sym, m)
    if residual > 1e-9:
        logger.warning(f"kernel balancing stopped at row error {residual:.2e} after {sweeps} sweeps")
    else:
        logger.debug(f"kernel balanced in {sweeps} sweeps (row error {residual:.1e})")
    isolated = int(np.sum(np.diff(A.indptr) == 1))
    if isolated:
        logger.warning(f"{isolated} points have no neighbour within {width:g}; their kernel is a self-loop")
    W.eliminate_zeros()
    return Kernel(net, W, float(width), float(width), float(W.data.min()), float(W.data.max()),
                  raw=raw, isolated=isolated)


def identity_kernel(net: Net) -> Kernel:
    w = 1.0 / net.measure
    W = sparse.diags(w).tocsr()
    return Kernel(net, W, 0.0, 0.0, float(w.min()), float(w.max()), raw=W, isolated=len(net))


def positivity_radius(kernel: Kernel) -> float:
    """
    Largest attained distance r such that psi > 0 on every pair at
    distance <= r; the kernel width when no pair inside it is missed.
    """
    I, J, D = kernel.net.pairs_within(kernel.width)
    if len(I) == 0:
        return kernel.width
    vals = np.asarray(kernel.weights[I, J]).ravel()
    missed = vals <= 0
    if not np.any(missed):
        return kernel.width
    first = D[missed].min()
    inside = D[D < first]
    return float(inside.max()) if len(inside) else 0.0


def convolve_kernels(k1: Kernel, k2: Kernel) -> Kernel:
    """(psi1 * psi2)(x, y) = sum_z psi1(x, z) psi2(z, y) m(z)"""
    if k1.net is not k2.net:
        raise NetMismatchError("kernels live on different nets")
    W = (k1.weights @ sparse.diags(k1.net.measure) @ k2.weights).tocsr()
    W.eliminate_zeros()
    out = Kernel(k1.net, W, k1.width + k2.width, 0.0, float(W.data.min()), float(W.data.max()), raw=W)
    out.positivity_radius = positivity_radius(out)
    return out


# ---------------------------------------------------------------------------
# Seminorms
# ---------------------------------------------------------------------------

def seminorm(obj: Union[FunctionOnNet, Cocycle, np.ndarray], kernel: Kernel, p: float) -> float:
    """(sum_{x1,x2} |a(x1, x2)|^p psi(x1, x2) m(x1) m(x2))^(1/p)"""
    if p < 1:
        raise UsageError(f"p must be >= 1, got {p}")
    I, J, w = kernel.triplets()
    m = kernel.net.measure
    if isinstance(obj, Cocycle):
        diff = obj.values(I, J)
    else:
        f = obj.values if isinstance(obj, FunctionOnNet) else np.asarray(obj)
        diff = f[I] - f[J]
    total = float(np.sum(np.abs(diff) ** p * w * m[I] * m[J]))
    return total ** (1.0 / p)


def _weighted_median(f: np.ndarray, w: np.ndarray) -> float:
    order = np.argsort(f, kind="stable")
    cum = np.cumsum(w[order])
    k = int(np.searchsorted(cum, 0.5 * cum[-1] * (1 - 1e-12)))
    return float(f[order][k])


def lp_mean_deviation(f, p: float, measure) -> Tuple[Union[float, complex], float]:
    """Optimal centering m_f = argmin_m ||f - m||_p and the minimal norm"""
    if p < 1:
        raise UsageError(f"p must be >= 1, got {p}")
    f = np.asarray(f)
    w = np.asarray(measure, dtype=float)

    def norm(center):
        return float(np.sum(np.abs(f - center) ** p * w)) ** (1.0 / p)

    mean = np.sum(f * w) / np.sum(w)
    if np.all(f == f[0]):
        center = f[0]
    elif p == 2:
        center = mean
    elif np.iscomplexobj(f):
        res = minimize(lambda z: norm(z[0] + 1j * z[1]), x0=[mean.real, mean.imag], method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000})
        center = complex(res.x[0], res.x[1])
    elif p == 1:
        center = _weighted_median(f, w)
    else:
        res = minimize_scalar(norm, bounds=(float(f.min()), float(f.max())), method="bounded",
                              options={"xatol": 1e-12 * max(1.0, float(np.ptp(f)))})
        center = float(res.x)
    if not np.iscomplexobj(f):
        center = float(np.real(center))
    return center, norm(center)


def poincare_quotient(f, kernel: Kernel, p: float) -> float:
    """||f - m_f||_p / N_{p,psi}(f); infinite when the seminorm vanishes"""
    _, dev = lp_mean_deviation(f, p, kernel.net.measure)
    n = seminorm(np.asarray(f), kernel, p)
    if n == 0:
        return math.inf if dev > 0 else 0.0
    return dev / n


# ---------------------------------------------------------------------------
# Poincare constants
# ---------------------------------------------------------------------------

def _check_kernel_connected(kernel: Kernel) -> None:
    n_comp, _ = csgraph.connected_components(kernel.weights, directed=False)
    if n_comp > 1:
        raise DisconnectedError(n_comp, what="kernel support")


def _kernel_laplacian(kernel: Kernel) -> sparse.csr_matrix:
    """Q with f^T Q f = N_{2,psi}(f)^2"""
    m = kernel.net.measure
    Ws = 0.5 * (kernel.weights + kernel.weights.T)
    Wm = (sparse.diags(m) @ Ws @ sparse.diags(m)).tocsr()
    deg = np.asarray(Wm.sum(axis=1)).ravel()
    return (2.0 * (sparse.diags(deg) - Wm)).tocsr()


def poincare_exact_p2(net: Net, kernel: Kernel, solver: str = "auto", seed: Optional[int] = None) -> PoincareEstimate:
    """
    C_2 = 1/sqrt(lambda_2) for the kernel quadratic form against the
    measure on mean-zero functions.

    The top eigenvalue 1/lambda_2 of the grounded pseudo-inverse is
    computed instead of lambda_2 itself, so constants of size e^20 and
    beyond keep their relative precision.
    """
    if kernel.net is not net:
        raise NetMismatchError("kernel belongs to another net")
    n = len(net)
    if n < 2:
        raise UsageError("Poincare constant needs at least two points")
    _check_kernel_connected(kernel)
    m = net.measure
    sqm = np.sqrt(m)
    u = sqm / np.linalg.norm(sqm)
    Q = _kernel_laplacian(kernel)
    Qr = Q[1:, 1:]
    if solver == "auto":
        solver = "dense" if n <= Config.DENSE_EIGEN_LIMIT else "sparse"

    def project(g):
        return g - u * (u @ g)

    if solver == "dense":
        c, low = linalg.cho_factor(Qr.toarray())
        G = np.zeros((n, n))
        G[1:, 1:] = linalg.cho_solve((c, low), np.eye(n - 1))
        A = sqm[:, None] * G * sqm[None, :]
        P = np.eye(n) - np.outer(u, u)
        A = P @ A @ P
        A = 0.5 * (A + A.T)
        vals, vecs = linalg.eigh(A)
        theta, g = float(vals[-1]), vecs[:, -1]
    elif solver == "sparse":
        lu = splu(Qr.tocsc())

        def matvec(g):
            g = project(np.ravel(g))
            x = np.zeros(n)
            x[1:] = lu.solve((sqm * g)[1:])
            return project(sqm * x)

        op = LinearOperator((n, n), matvec=matvec, dtype=float)
        rng = np.random.default_rng(get_seed() if seed is None else seed)
        v0 = project(rng.standard_normal(n))
        vals, vecs = eigsh(op, k=1, which="LA", v0=v0, tol=1e-12, maxiter=max(1000, 20 * n))
        theta, g = float(vals[0]), vecs[:, 0]
    else:
        raise UsageError(f"unknown solver {solver!r}")
    if theta <= 0:
        raise DisconnectedError(2, what="kernel support")
    C = math.sqrt(theta)
    witness = g / sqm
    logger.debug(f"C_2 = {C:.6g} on {net!r} ({solver} solver)")
    return PoincareEstimate(2.0, C, C, Method.SPECTRAL_P2, kernel, witness, {"lambda2": 1.0 / theta, "solver": solver})


def _grad_log_quotient(f, I, J, wmm, m, p):
    """Value and gradient of log(||f - m_f||_p / N_p(f)) for real f"""
    center, dev = lp_mean_deviation(f, p, m)
    r = f - center
    phi_r = np.sign(r) * np.abs(r) ** (p - 1)
    A = dev ** p
    diff = f[I] - f[J]
    B = float(np.sum(np.abs(diff) ** p * wmm))
    if A <= 0 or B <= 0:
        return -math.inf, np.zeros_like(f)
    gA = p * m * phi_r
    phi_d = np.sign(diff) * np.abs(diff) ** (p - 1) * wmm
    gB = p * (np.bincount(I, weights=phi_d, minlength=len(f)) - np.bincount(J, weights=phi_d, minlength=len(f)))
    value = (math.log(A) - math.log(B)) / p
    return value, (gA / A - gB / B) / p


def _ascend(f0, I, J, wmm, m, p, iters):
    f = np.asarray(f0, dtype=float).copy()
    value, grad = _grad_log_quotient(f, I, J, wmm, m, p)
    step = 0.1
    for _ in range(iters):
        gnorm = np.linalg.norm(grad)
        if not math.isfinite(value) or gnorm == 0:
            break
        scale = np.linalg.norm(f - f.mean()) or 1.0
        accepted = False
        while step > 1e-10:
            trial = f + step * scale * grad / gnorm
            t_value, t_grad = _grad_log_quotient(trial, I, J, wmm, m, p)
            if t_value > value:
                f, value, grad = trial, t_value, t_grad
                step *= 1.2
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
    return f, value


def _ascent_seeds(net: Net, kernel: Kernel, restarts: int, seed: int) -> List[np.ndarray]:
    n = len(net)
    seeds: List[np.ndarray] = []
    if n <= Config.DENSE_EIGEN_LIMIT * 8:
        try:
            seeds.append(np.real(poincare_exact_p2(net, kernel, seed=seed).witness))
        except (DisconnectedError, RuntimeError) as e:
            logger.debug(f"no spectral seed: {e}")
    coords = net.coords
    if coords.shape[1] > 1:
        seeds.append(np.sign(np.cos(2 * math.pi * coords[:, -1])) + 0.0)
    seeds.append(coords[:, 0] - coords[:, 0].mean())
    rng = np.random.default_rng(seed)
    while len(seeds) < max(restarts, 1):
        centre = int(rng.integers(0, n))
        seeds.append(np.exp(-net.distances_from(centre)))
    return seeds[:max(restarts, 1)]


def poincare_lower_ascent(net: Net, kernel: Kernel, p: float, restarts: int = 8, iters: int = 500,
                          seed: Optional[int] = None) -> PoincareEstimate:
    """
    Certified lower bound on C_p: the best quotient reached by normalized
    ascent from deterministic starts, re-evaluated from its witness.
    """
    if p < 1:
        raise UsageError(f"p must be >= 1, got {p}")
    if kernel.net is not net:
        raise NetMismatchError("kernel belongs to another net")
    seed = get_seed() if seed is None else seed
    I, J, w = kernel.triplets()
    m = net.measure
    wmm = w * m[I] * m[J]
    starts = _ascent_seeds(net, kernel, restarts, seed)
    with ThreadPoolExecutor(max_workers=get_workers()) as pool:
        results = list(pool.map(lambda f0: _ascend(f0, I, J, wmm, m, p, iters), starts))
    best_f = None
    best = 0.0
    for f, _ in results:
        q = poincare_quotient(f, kernel, p)
        if math.isfinite(q) and q > best:
            best, best_f = q, f
    logger.debug(f"ascent p={p:g}: best quotient {best:.6g} over {len(starts)} starts")
    return PoincareEstimate(float(p), best, None, Method.ASCENT, kernel, best_f, {"restarts": len(starts)})


# ---------------------------------------------------------------------------
# Gradient energy and the double-cover test function
# ---------------------------------------------------------------------------

def gradient_seminorm_discrete(f, p: float, net: Optional[Net] = None) -> float:
    """
    (sum_x G(x)^p m(x))^(1/p) where G(x) is the largest difference
    quotient |f(x) - f(y)| / len(x, y) over the edges at x.
    """
    if isinstance(f, FunctionOnNet):
        net, values = f.net, f.values
    else:
        values = np.asarray(f)
    if net is None:
        raise UsageError("gradient needs the net of the function")
    e = net.edges
    if len(e) == 0:
        raise NoEdgesError(f"{net!r} has no edges")
    q = np.abs(values[e[:, 0]] - values[e[:, 1]]) / net.edge_lengths
    G = np.zeros(len(net))
    np.maximum.at(G, e[:, 0], q)
    np.maximum.at(G, e[:, 1], q)
    return float(np.sum(G ** p * net.measure)) ** (1.0 / p)


def _exponent_gap(mu, p: float) -> float:
    mu = np.asarray(mu, dtype=float)
    return p * mu[-1] - mu.sum()


def continuum_grad_integral(mu, p: float) -> float:
    """pi * mu_n / (p - sum(mu) / mu_n)"""
    mu = np.asarray(mu, dtype=float)
    ratio = mu.sum() / mu[-1]
    if p <= ratio:
        raise PoleOrBelowError(f"p = {p:g} is at or below sum(mu)/mu_n = {ratio:g}")
    return math.pi * mu[-1] / (p - ratio)


def continuum_grad_energy(mu, p: float, R: float) -> float:
    """Integral of |grad e^(i pi x_n)|^p over the double cover of the ball of radius R"""
    k = _exponent_gap(mu, p)
    if abs(k) < 1e-14:
        return 2.0 * math.pi ** p * R
    return 2.0 * math.pi ** p * (1.0 - math.exp(-k * R)) / k


def normalized_grad_energy(net: Net, p: float) -> float:
    """Discrete energy of e^(i pi x_n) rescaled to the units of continuum_grad_integral"""
    mu = np.asarray(net.params.mu, dtype=float)
    k = _exponent_gap(mu, p)
    if k <= 0:
        raise PoleOrBelowError(f"p = {p:g} is at or below sum(mu)/mu_n = {mu.sum() / mu[-1]:g}")
    u = cover_test_function(net)
    energy = gradient_seminorm_discrete(u, p) ** p
    return energy * mu[-1] ** 2 / (2.0 * math.pi ** (p - 1) * (1.0 - math.exp(-k * net.params.R)))


def cover_test_function(net: Net) -> FunctionOnNet:
    """u = exp(i pi x_n), odd under the deck transformation x_n -> x_n + 1"""
    if net.kind != SpaceKind.ZMU_COVER:
        raise WrongNetError(f"test function needs a double-cover Z_mu net, got {net.kind.value}")
    return FunctionOnNet(net, np.exp(1j * math.pi * net.coords[:, -1]))


def testfunction_lower_bound(cover_net: Net, p: float) -> PoincareEstimate:
    u = cover_test_function(cover_net)
    m = cover_net.measure
    drift = abs(np.sum(u.values * m))
    if drift > 1e-9 * m.sum():
        logger.warning(f"test function is not mean-zero on this net (|mean| = {drift / m.sum():.2e})")
    norm = float(np.sum(np.abs(u.values) ** p * m)) ** (1.0 / p)
    grad = gradient_seminorm_discrete(u, p)
    lower = norm / grad if grad > 0 else math.inf
    logger.debug(f"test function: ||u||_p = {norm:.6g}, gradient {grad:.6g}")
    return PoincareEstimate(float(p), lower, None, Method.TEST_FUNCTION, None, u.values,
                            {"norm": norm, "gradient": grad})


# ---------------------------------------------------------------------------
# Transport along maps
# ---------------------------------------------------------------------------

def _pullback(kernel: Kernel, fmap: PointMap) -> sparse.csr_matrix:
    if kernel.net is not fmap.codomain:
        raise NetMismatchError("kernel is not on the codomain of the map")
    return (kernel.weights[fmap.assignment] @ sparse.diags(kernel.net.measure)).tocsr()


def transport_function(g: FunctionOnNet, kernel: Kernel, fmap: PointMap) -> FunctionOnNet:
    """h(x) = sum_z g(z) psi(f(x), z) m(z)"""
    if g.net is not fmap.codomain:
        raise NetMismatchError("function is not on the codomain of the map")
    P = _pullback(kernel, fmap)
    return FunctionOnNet(fmap.domain, P @ g.values)


def transport_cocycle(a: Cocycle, phi: Kernel, fmap: PointMap) -> Cocycle:
    """(a *_t phi)(x, x') = sum_{y,y'} a(y, y') phi(f(x), y) phi(f(x'), y') m(y) m(y')"""
    if a.net is not fmap.codomain:
        raise NetMismatchError("cocycle is not on the codomain of the map")
    P = _pullback(phi, fmap)
    if a.potential is not None:
        return Cocycle(fmap.domain, potential=P @ a.potential)
    dense = P.toarray()
    return Cocycle(fmap.domain, matrix=dense @ a.matrix @ dense.T)


def transported_cocycle_constant(psi: Kernel, phi: Kernel, fmap: PointMap, report: DistortionReport,
                                 p: float) -> Tuple[float, Kernel]:
    """
    C and the comparison kernel psi~ on the codomain with
    N_psi(a *_t phi) <= C N_psi~(a) for every cocycle a.

    C^p = sup(psi) sup(phi)^2 V^2 / margin(psi~), where V is the largest
    mass of domain points mapped within width(phi) of a codomain point.
    """
    if psi.net is not fmap.domain:
        raise NetMismatchError("psi must live on the domain of the map")
    if phi.net is not fmap.codomain:
        raise NetMismatchError("phi must live on the codomain of the map")
    Y = fmap.codomain
    width = 2.0 * phi.width + report.lambda1 * psi.width + report.c1
    psi_tilde = make_ball_kernel(Y, width)
    image_mass = np.bincount(fmap.assignment, weights=fmap.domain.measure, minlength=len(Y))
    V = float(np.max(Y.neighbor_lists(phi.width).astype(float) @ image_mass))
    Cp = psi.sup * phi.sup ** 2 * V ** 2 / psi_tilde.margin
    return Cp ** (1.0 / p), psi_tilde


def seminorm_equivalence_constant(k1: Kernel, k2: Kernel, p: float) -> float:
    """
    C with N_{p,k2} <= C N_{p,k1}: each k2 pair is routed along a
    shortest hop path of the k1 support and the worst edge load is taken.
    """
    if k1.net is not k2.net:
        raise NetMismatchError("kernels live on different nets")
    net = k1.net
    n = len(net)
    if n > Config.MAX_PAIR_POINTS:
        raise SizeCapError(n, Config.MAX_PAIR_POINTS, what="seminorm routing")
    m = net.measure
    S1 = k1.weights + k1.weights.T
    S1 = S1 - sparse.diags(S1.diagonal())
    S1.eliminate_zeros()
    S1 = S1.tocsr()
    I2, J2, w2 = k2.triplets()
    off = I2 != J2
    I2, J2, w2 = I2[off], J2[off], w2[off]
    if len(I2) == 0:
        return 0.0
    sources = np.unique(I2)
    hops, pred = csgraph.shortest_path(S1, unweighted=True, directed=False, indices=sources,
                                       return_predecessors=True)
    row_of = {int(s): k for k, s in enumerate(sources)}
    load: Dict[Tuple[int, int], float] = {}
    for x, y, w in zip(I2.tolist(), J2.tolist(), w2.tolist()):
        r = row_of[x]
        L = hops[r, y]
        if not math.isfinite(L):
            raise DisconnectedError(2, what="first kernel support")
        mass = w * m[x] * m[y] * L ** (p - 1)
        node = y
        while node != x:
            prev = int(pred[r, node])
            key = (prev, node) if prev < node else (node, prev)
            load[key] = load.get(key, 0.0) + mass
            node = prev
    worst = 0.0
    for (a, b), mass in load.items():
        capacity = S1[a, b] * m[a] * m[b]
        worst = max(worst, mass / capacity)
    return worst ** (1.0 / p)
