"""Directed graphs, synthetic generators, edge-list I/O and chain builders."""
import gzip
import io
import json
import logging
import os
import re
import tempfile
import urllib.error
import urllib.request
import zipfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .exceptions import (
    CacheCorrupt,
    DanglingNode,
    EmptyGraph,
    InvalidSpec,
    NetworkError,
    ParseError,
)
from .markov import TransitionMatrix, mixture_chain

logger = logging.getLogger(__name__)

PAGERANK_DAMPING = 0.85


class DirectedGraph:
    """Immutable directed graph stored as sorted, deduplicated out-adjacency."""

    def __init__(self, n, src, dst):
        n = int(n)
        src = np.asarray(src, dtype=np.int64).ravel()
        dst = np.asarray(dst, dtype=np.int64).ravel()
        if n <= 0:
            raise EmptyGraph("graph has no nodes")
        if src.shape != dst.shape:
            raise ValueError("src and dst must have equal length")
        if src.size and (min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= n):
            raise ValueError(f"edge endpoint outside [0, {n})")
        adj = sp.csr_matrix(
            (np.ones(src.size, dtype=np.int8), (src, dst)), shape=(n, n)
        )
        adj.sum_duplicates()
        adj.sort_indices()
        adj.data[:] = 1
        self._adj = adj
        self.n = n

    @classmethod
    def from_csr(cls, adj):
        coo = sp.coo_matrix(adj)
        return cls(adj.shape[0], coo.row, coo.col)

    @property
    def adjacency(self):
        return self._adj

    @property
    def indptr(self):
        return self._adj.indptr

    @property
    def indices(self):
        return self._adj.indices

    @property
    def m(self):
        return int(self._adj.nnz)

    @property
    def out_degree(self):
        return np.diff(self._adj.indptr)

    def edges(self):
        coo = self._adj.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return coo.row[order].astype(np.int64), coo.col[order].astype(np.int64)

    def edge_set(self):
        return set(zip(*(a.tolist() for a in self.edges())))

    def successors(self, i):
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def subgraph(self, nodes):
        """Induced subgraph on ``nodes`` (sorted), relabeled to ``[0, k)``."""
        nodes = np.sort(np.asarray(nodes, dtype=np.int64))
        sub = self._adj[nodes][:, nodes]
        return DirectedGraph.from_csr(sub)

    def __eq__(self, other):
        if not isinstance(other, DirectedGraph):
            return NotImplemented
        return self.n == other.n and (self._adj != other._adj).nnz == 0

    def __repr__(self):
        return f"DirectedGraph(n={self.n}, m={self.m})"


# -- generator specifications ---------------------------------------------


@dataclass(frozen=True)
class SBM:
    """Directed stochastic block model.

    The defaults (two blocks of 400, ``p_in=0.077``, ``p_out=0.01``) give
    about 27.8k expected directed edges.
    """

    block_sizes: tuple = (400, 400)
    p_in: float = 0.077
    p_out: float = 0.01
    seed: int = 0
    kind: str = field(default="sbm", init=False)


@dataclass(frozen=True)
class PreferentialAttachment:
    """Directed preferential attachment.

    Each arriving node links to ``m`` distinct earlier nodes chosen with
    probability proportional to in-degree + 1, and each such edge is
    mirrored with probability ``reverse_prob``.
    """

    n: int = 1000
    m: int = 3
    seed: int = 0
    reverse_prob: float = 0.5
    kind: str = field(default="pa", init=False)


@dataclass(frozen=True)
class DirectedCycle:
    n: int
    kind: str = field(default="cycle", init=False)


@dataclass(frozen=True)
class UniformComplete:
    n: int
    kind: str = field(default="complete", init=False)


_SPEC_KINDS = {
    "sbm": SBM,
    "pa": PreferentialAttachment,
    "cycle": DirectedCycle,
    "complete": UniformComplete,
}


def spec_from_dict(d):
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in _SPEC_KINDS:
        raise InvalidSpec(f"unknown generator kind {kind!r}")
    if "block_sizes" in d:
        d["block_sizes"] = tuple(d["block_sizes"])
    try:
        return _SPEC_KINDS[kind](**d)
    except TypeError as exc:
        raise InvalidSpec(str(exc)) from exc


def spec_to_dict(spec):
    d = asdict(spec)
    if "block_sizes" in d:
        d["block_sizes"] = list(d["block_sizes"])
    return d


def spec_name(spec):
    if isinstance(spec, SBM):
        return f"sbm-{'x'.join(map(str, spec.block_sizes))}-s{spec.seed}"
    if isinstance(spec, PreferentialAttachment):
        return f"pa-{spec.n}-m{spec.m}-s{spec.seed}"
    if isinstance(spec, DirectedCycle):
        return f"cycle-{spec.n}"
    return f"complete-{spec.n}"


def _check_prob(p, name):
    if not 0.0 <= p <= 1.0:
        raise InvalidSpec(f"{name} must lie in [0, 1], got {p}")


def validate_spec(spec):
    if isinstance(spec, SBM):
        if len(spec.block_sizes) == 0 or min(spec.block_sizes) < 1:
            raise InvalidSpec("block sizes must be positive")
        if sum(spec.block_sizes) < 2:
            raise InvalidSpec("SBM needs at least 2 nodes")
        _check_prob(spec.p_in, "p_in")
        _check_prob(spec.p_out, "p_out")
        if spec.seed is None:
            raise InvalidSpec("SBM requires a seed")
    elif isinstance(spec, PreferentialAttachment):
        if spec.m < 1 or spec.n < spec.m + 2:
            raise InvalidSpec("preferential attachment needs m >= 1 and n >= m + 2")
        _check_prob(spec.reverse_prob, "reverse_prob")
        if spec.seed is None:
            raise InvalidSpec("preferential attachment requires a seed")
    elif isinstance(spec, (DirectedCycle, UniformComplete)):
        if spec.n < 2:
            raise InvalidSpec("n must be at least 2")
    else:
        raise InvalidSpec(f"unsupported generator spec {spec!r}")


def generate(spec):
    """Build the graph described by a generator spec (deterministic per seed)."""
    validate_spec(spec)
    if isinstance(spec, DirectedCycle):
        i = np.arange(spec.n)
        return DirectedGraph(spec.n, i, (i + 1) % spec.n)
    if isinstance(spec, UniformComplete):
        i, j = np.divmod(np.arange(spec.n * spec.n), spec.n)
        return DirectedGraph(spec.n, i, j)
    if isinstance(spec, SBM):
        return _sbm(spec)
    return _preferential_attachment(spec)


def _sbm(spec):
    rng = np.random.default_rng(spec.seed)
    sizes = np.asarray(spec.block_sizes)
    n = int(sizes.sum())
    starts = np.concatenate([[0], np.cumsum(sizes)])
    src, dst = [], []
    for a in range(len(sizes)):
        for b in range(len(sizes)):
            p = spec.p_in if a == b else spec.p_out
            mask = rng.random((sizes[a], sizes[b])) < p
            if a == b:
                np.fill_diagonal(mask, False)
            i, j = np.nonzero(mask)
            src.append(i + starts[a])
            dst.append(j + starts[b])
    return DirectedGraph(n, np.concatenate(src), np.concatenate(dst))


def _preferential_attachment(spec):
    rng = np.random.default_rng(spec.seed)
    m = spec.m
    core = m + 1
    # strongly connected seed: directed cycle on the first m + 1 nodes
    src = list(range(core))
    dst = [(i + 1) % core for i in range(core)]
    indeg = np.zeros(spec.n)
    for j in dst:
        indeg[j] += 1
    for new in range(core, spec.n):
        w = indeg[:new] + 1.0
        targets = rng.choice(new, size=m, replace=False, p=w / w.sum())
        back = rng.random(m) < spec.reverse_prob
        for t, mirror in zip(targets.tolist(), back.tolist()):
            src.append(new)
            dst.append(t)
            indeg[t] += 1
            if mirror:
                src.append(t)
                dst.append(new)
                indeg[new] += 1
    return DirectedGraph(spec.n, src, dst)


# -- edge-list I/O --------------------------------------------------------


def _open_text(path):
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic[:2] == b"\x1f\x8b":
        return gzip.open(path, "rt")
    if magic == b"PK\x03\x04":
        zf = zipfile.ZipFile(path)
        names = [n for n in zf.namelist() if not n.endswith("/")]
        if not names:
            raise ParseError("zip archive is empty")
        return io.TextIOWrapper(zf.open(max(names, key=lambda n: zf.getinfo(n).file_size)))
    return open(path, "r")


_HEADER = re.compile(r"#\s*n=(\d+)")


def load_edge_list(path, dialect="auto"):
    """Parse a whitespace-separated edge list into a :class:`DirectedGraph`.

    Parameters
    ----------
    path : str or Path
        Plain, gzip or single-file zip archive.
    dialect : {"auto", "zero", "one", "mtx"}
        ``"one"`` marks 1-indexed ids.  ``"auto"`` reads ids as given and
        relies on compaction.  ``"mtx"`` is a Matrix Market coordinate
        pattern file: 1-indexed, with the size line skipped.

    Lines starting with ``#`` or ``%`` are comments; columns past the second
    are ignored.  Node ids are compacted to ``[0, n)`` preserving order and
    duplicate edges are collapsed.  A ``# n=N`` comment (written for graphs
    with isolated nodes) fixes the node count and disables compaction.
    """
    if dialect not in ("auto", "zero", "one", "mtx"):
        raise ValueError(f"unknown dialect {dialect!r}")
    offset = 1 if dialect in ("one", "mtx") else 0
    skip_size_line = dialect == "mtx"
    src, dst = [], []
    declared_n = None
    with _open_text(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s[0] in "#%":
                m = _HEADER.match(s)
                if m and declared_n is None:
                    declared_n = int(m.group(1))
                continue
            if skip_size_line:
                skip_size_line = False
                continue
            parts = s.split()
            if len(parts) < 2:
                raise ParseError(f"expected 'src dst', got {s!r}", lineno)
            try:
                u, v = int(parts[0]) - offset, int(parts[1]) - offset
            except ValueError:
                raise ParseError(f"non-integer node id in {s!r}", lineno) from None
            if u < 0 or v < 0:
                raise ParseError(f"negative node id in {s!r}", lineno)
            src.append(u)
            dst.append(v)
    if not src:
        raise EmptyGraph(f"no edges in {path}")
    if declared_n is not None and offset == 0 and max(max(src), max(dst)) < declared_n:
        return DirectedGraph(declared_n, np.array(src), np.array(dst))
    ids, inv = np.unique(np.concatenate([src, dst]), return_inverse=True)
    k = len(src)
    return DirectedGraph(len(ids), inv[:k], inv[k:])


def write_edge_list(graph, path):
    """Write ``src dst`` lines (0-indexed, sorted) atomically.

    A ``# n= m=`` header is added only when some node has no edge, since
    compaction on load would otherwise drop it.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    s, d = graph.edges()
    body = "".join(f"{a} {b}\n" for a, b in zip(s.tolist(), d.tolist()))
    touched = np.zeros(graph.n, dtype=bool)
    touched[s] = touched[d] = True
    header = "" if touched.all() else f"# n={graph.n} m={graph.m}\n"
    _atomic_write(path, (header + body).encode())
    return path


def _atomic_write(path, payload):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- components and chains ------------------------------------------------


def largest_scc_nodes(graph):
    """Sorted node ids of the largest strongly connected component.

    Ties go to the component containing the smallest node id.
    """
    _, labels = connected_components(graph.adjacency, directed=True, connection="strong")
    sizes = np.bincount(labels)
    first = np.full(sizes.size, graph.n)
    np.minimum.at(first, labels, np.arange(graph.n))
    best = min(range(sizes.size), key=lambda c: (-sizes[c], first[c]))
    return np.flatnonzero(labels == best)


def largest_scc(graph):
    """Induced subgraph on the largest strongly connected component.

    Nodes keep their relative order when relabeled.
    """
    return graph.subgraph(largest_scc_nodes(graph))


def scc_count(graph):
    return int(connected_components(graph.adjacency, directed=True, connection="strong")[0])


def random_walk_chain(graph):
    """Simple random walk: ``P_ij = 1 / outdeg(i)`` for each edge ``i -> j``."""
    deg = graph.out_degree
    dangling = np.flatnonzero(deg == 0)
    if dangling.size:
        raise DanglingNode(int(dangling[0]))
    data = np.repeat(1.0 / deg, deg)
    csr = sp.csr_matrix((data, graph.indices.copy(), graph.indptr.copy()), shape=(graph.n, graph.n))
    return TransitionMatrix(csr)


def uniform_chain(n):
    return TransitionMatrix(np.full((n, n), 1.0 / n))


def pagerank_chain(graph, eps=PAGERANK_DAMPING, patch_dangling=False):
    """PageRank chain ``(1 - eps) U + eps Q`` with uniform teleportation ``U``.

    With ``patch_dangling`` rows of nodes without out-edges are replaced by
    uniform rows in ``Q`` before mixing; otherwise they raise
    :class:`DanglingNode`.
    """
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"damping factor must lie in [0, 1), got {eps}")
    if patch_dangling and np.any(graph.out_degree == 0):
        dangling = np.flatnonzero(graph.out_degree == 0)
        s, d = graph.edges()
        extra_s = np.repeat(dangling, graph.n)
        extra_d = np.tile(np.arange(graph.n), dangling.size)
        graph = DirectedGraph(graph.n, np.concatenate([s, extra_s]), np.concatenate([d, extra_d]))
    Q = random_walk_chain(graph)
    return mixture_chain(uniform_chain(graph.n), Q, eps)


# -- datasets -------------------------------------------------------------


@dataclass(frozen=True)
class DatasetDescriptor:
    name: str
    url: str
    format: str = "auto"
    cache_path: str = ""

    def __post_init__(self):
        if not self.name:
            raise InvalidSpec("dataset name must be nonempty")
        if self.format not in ("auto", "zero", "one", "mtx"):
            raise InvalidSpec(f"unknown edge-list format {self.format!r}")


def default_cache_dir():
    return Path(os.environ.get("RLGL_CACHE", Path.home() / ".cache" / "rlgl"))


def dataset_cache_file(d, cache_dir=None):
    if d.cache_path:
        return Path(d.cache_path)
    return Path(cache_dir or default_cache_dir()) / d.name / "raw.edges"


def fetch_dataset(d, cache_dir=None, timeout=30.0):
    """Return a local path for the dataset, downloading it on a cache miss.

    Raises
    ------
    CacheCorrupt
        If the cached or downloaded file is empty.
    NetworkError
        If the download fails.
    """
    target = dataset_cache_file(d, cache_dir)
    if target.exists():
        if target.stat().st_size == 0:
            raise CacheCorrupt(f"cached file {target} is empty")
        return target
    if not d.url:
        raise NetworkError(f"dataset {d.name!r} has no download URL; place it at {target}")
    logger.info("downloading %s from %s", d.name, d.url)
    try:
        with urllib.request.urlopen(d.url, timeout=timeout) as resp:
            payload = resp.read()
    except (urllib.error.URLError, OSError, ValueError) as exc:
        raise NetworkError(f"could not fetch {d.url}: {exc}") from exc
    if not payload:
        raise CacheCorrupt(f"download of {d.url} is empty")
    target.parent.mkdir(parents=True, exist_ok=True)
    _atomic_write(target, payload)
    return target


def load_manifest(path):
    """Read ``datasets.json``: ``{name: {"url": ..., "format": ...}}``."""
    with open(path) as fh:
        raw = json.load(fh)
    return {
        name: DatasetDescriptor(name=name, url=entry.get("url") or "", format=entry.get("format", "auto"))
        for name, entry in raw.items()
    }
