"""CSV and JSON-lines readers and writers for nets, maps, kernels and result rows"""
from __future__ import annotations

import csv
import json
import os
import sys
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .embeddings import PointMap
from .errors import UsageError
from .logging_config import get_logger
from .spaces import GraphMetric, H2Metric, Net, Oracle, RadialMetric, SpaceKind, SpaceParams, _periods

logger = get_logger(__name__)

PathLike = Union[str, os.PathLike]

# RFC-4180 line ending; readers accept either
CSV_EOL = "\r\n"

_COORD_NAMES = {
    SpaceKind.H2: ["r", "theta"],
    SpaceKind.TREE: ["depth", "parent"],
    SpaceKind.GRAPH: ["height"],
}


def _coord_names(net: Net) -> List[str]:
    if net.kind in _COORD_NAMES:
        return _COORD_NAMES[net.kind]
    return ["t"] + [f"x{i + 1}" for i in range(net.coords.shape[1] - 1)]


def edges_path_for(path: PathLike) -> Path:
    p = Path(path)
    return p.with_name(p.stem + ".edges" + (p.suffix or ".csv"))


def _open_out(target):
    if target is None or target == "-":
        return sys.stdout, False
    return open(target, "w", newline="", encoding="utf-8"), True


def write_rows_csv(rows: Sequence[dict], target=None, columns: Optional[Sequence[str]] = None) -> None:
    """Rows as RFC-4180 CSV; columns default to the union of keys in first-seen order"""
    if columns is None:
        columns = []
        for row in rows:
            columns.extend(k for k in row if k not in columns)
    out, close = _open_out(target)
    try:
        writer = csv.DictWriter(out, fieldnames=list(columns), extrasaction="ignore", lineterminator=CSV_EOL)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _cell(row.get(k)) for k in columns})
    finally:
        if close:
            out.close()


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (list, tuple, dict)):
        return json.dumps(value)
    return value


def read_rows_csv(path: PathLike) -> List[dict]:
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def write_jsonl(records: Iterable[dict], target=None) -> None:
    out, close = _open_out(target)
    try:
        for rec in records:
            out.write(json.dumps(rec, default=_json_default, sort_keys=False) + "\n")
    finally:
        if close:
            out.close()


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def read_jsonl(path: PathLike) -> List[dict]:
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


# ---------------------------------------------------------------------------
# Nets
# ---------------------------------------------------------------------------

def write_net_csv(net: Net, path: PathLike, edges_path: Optional[PathLike] = None) -> Path:
    """`id,kind[,visual],coords...,weight` plus the sidecar `src,dst,length` edge file"""
    names = _coord_names(net)
    # ray nets name their visual metric in an extra column
    extra = [net.meta.get("visual", "zmu")] if net.kind == SpaceKind.RAYS else []
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator=CSV_EOL)
        writer.writerow(["id", "kind", *(["visual"] if extra else []), *names, "weight"])
        for i in range(len(net)):
            writer.writerow([i, net.kind.value, *extra,
                             *(repr(float(v)) for v in net.coords[i]), repr(float(net.measure[i]))])
    edges_path = Path(edges_path) if edges_path is not None else edges_path_for(path)
    with open(edges_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator=CSV_EOL)
        writer.writerow(["src", "dst", "length"])
        for (a, b), length in zip(net.edges, net.edge_lengths):
            writer.writerow([int(a), int(b), repr(float(length))])
    logger.info(f"Wrote {len(net)} points to {path} and {len(net.edges)} edges to {edges_path}")
    return edges_path


def read_net_csv(path: PathLike, edges_path: Optional[PathLike] = None,
                 params: Optional[SpaceParams] = None, cover: bool = False) -> Net:
    """
    Rebuild a net from its CSV pair. H^2 nets get the closed form back;
    Z_mu and ray nets get the radial formula when `params` gives the
    exponents; everything else uses shortest paths over the edges.
    """
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        rows = list(reader)
    if header is None or header[:2] != ["id", "kind"] or header[-1] != "weight":
        raise UsageError(f"{path}: expected header id,kind,...,weight")
    if not rows:
        raise UsageError(f"{path}: no points")
    kinds = {r[1] for r in rows}
    if len(kinds) != 1:
        raise UsageError(f"{path}: mixed kinds {sorted(kinds)}")
    kind = SpaceKind(kinds.pop())
    ids = np.array([int(r[0]) for r in rows])
    if not np.array_equal(ids, np.arange(len(rows))):
        raise UsageError(f"{path}: ids must run 0..n-1 in order")
    start = 3 if len(header) > 3 and header[2] == "visual" else 2
    visual = rows[0][2] if start == 3 else "zmu"
    if visual not in ("zmu", "unipotent"):
        raise UsageError(f"{path}: unknown visual metric {visual!r}")
    coords = np.array([[float(v) for v in r[start:-1]] for r in rows])
    weights = np.array([float(r[-1]) for r in rows])

    edges_path = Path(edges_path) if edges_path is not None else edges_path_for(path)
    edges = np.empty((0, 2), dtype=np.int64)
    lengths = np.empty(0)
    if edges_path.exists():
        with open(edges_path, newline="", encoding="utf-8") as f:
            reader = csv.reader(f)
            next(reader, None)
            erows = list(reader)
        if erows:
            edges = np.array([[int(r[0]), int(r[1])] for r in erows], dtype=np.int64)
            lengths = np.array([float(r[2]) for r in erows])

    n = len(rows)
    if kind == SpaceKind.H2:
        metric, oracle = H2Metric(coords[:, 0], coords[:, 1]), Oracle.CLOSED_FORM
    elif kind in (SpaceKind.ZMU, SpaceKind.ZMU_COVER, SpaceKind.RAYS) and params is not None:
        periods = _periods(params, cover or kind == SpaceKind.ZMU_COVER)
        metric, oracle = RadialMetric(coords[:, 0], coords[:, 1:], params.mu, periods, visual), Oracle.RADIAL
    else:
        A = sparse.coo_matrix((lengths, (edges[:, 0], edges[:, 1])), shape=(n, n)).tocsr()
        metric, oracle = GraphMetric(csgraph.shortest_path(A, directed=False)), Oracle.GRAPH
    meta = {}
    if kind == SpaceKind.RAYS:
        meta["visual"] = visual
    elif kind == SpaceKind.TREE:
        meta.update(_tree_meta(coords))
    net = Net(kind, params, coords, weights, oracle, metric, edges=edges, edge_lengths=lengths, meta=meta)
    if oracle == Oracle.GRAPH:
        net._dense = metric.dist
    logger.info(f"Read {net!r} from {path}")
    return net


def _tree_meta(coords: np.ndarray) -> dict:
    parent = coords[:, 1].astype(np.int64)
    # siblings are numbered by id order
    order = np.argsort(parent, kind="stable")
    sorted_parent = parent[order]
    child = np.empty(len(parent), dtype=np.int64)
    child[order] = np.arange(len(parent)) - np.searchsorted(sorted_parent, sorted_parent, side="left")
    degree = int(np.sum(parent == 0)) if len(parent) > 1 else 0
    return {"parent": parent, "child_index": child, "degree": degree, "level": coords[:, 0].astype(np.int64)}


# ---------------------------------------------------------------------------
# Maps, sparse triplets
# ---------------------------------------------------------------------------

def write_map_csv(fmap: PointMap, path: PathLike) -> None:
    write_rows_csv([{"domain_id": i, "codomain_id": int(j)} for i, j in enumerate(fmap.assignment)],
                   path, ["domain_id", "codomain_id"])


def read_map_csv(path: PathLike, domain: Net, codomain: Net) -> PointMap:
    rows = read_rows_csv(path)
    assignment = np.full(len(domain), -1, dtype=np.int64)
    for row in rows:
        i = int(row["domain_id"])
        if not 0 <= i < len(domain):
            raise UsageError(f"{path}: domain id {i} out of range")
        assignment[i] = int(row["codomain_id"])
    if np.any(assignment < 0):
        raise UsageError(f"{path}: map is not total ({int(np.sum(assignment < 0))} unmapped points)")
    return PointMap(domain, codomain, assignment)


def write_triplets_csv(I, J, V, target=None) -> None:
    """Sparse `i,j,value` dump of a kernel or cocycle"""
    out, close = _open_out(target)
    try:
        writer = csv.writer(out, lineterminator=CSV_EOL)
        writer.writerow(["i", "j", "value"])
        for i, j, v in zip(I, J, V):
            writer.writerow([int(i), int(j), repr(float(v))])
    finally:
        if close:
            out.close()


def read_triplets_csv(path: PathLike) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    rows = read_rows_csv(path)
    I = np.array([int(r["i"]) for r in rows], dtype=np.int64)
    J = np.array([int(r["j"]) for r in rows], dtype=np.int64)
    V = np.array([float(r["value"]) for r in rows])
    return I, J, V
