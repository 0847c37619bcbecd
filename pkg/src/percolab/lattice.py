"""Finite boxes of Z^d with seeded Bernoulli bond configurations.

Vertices are the integer points of ``origin_offset + [-L, L]^d``. Edges join
nearest neighbours inside the box; edges that would leave the box do not
exist (free boundary). Edge states are a pure function of
``(box, p, seed)``: every edge index is hashed together with the seed into a
uniform in [0, 1) and the edge is open iff that uniform is below ``p``. The
same uniforms are reused for every ``p``, which yields the monotone coupling
``open(p) subset-of open(p')`` for ``p < p'`` under a shared seed.

Canonical edge indexing (also the serialized order) is axis-major: all edges
parallel to axis 0 first, then axis 1, and so on. Within one axis family the
edges are ordered by the C-order (row-major) position of their lower
endpoint, whose coordinate along the edge axis ranges over [-L, L-1].
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import GeometryError, ResourceLimitError

SUPPORTED_DIMENSIONS = (2, 3, 4, 5, 6)
MAX_VERTICES = 100_000_000

_MAGIC = b"PLB1"
_FORMAT_VERSION = 1

_SPLIT_INC = np.uint64(0x9E3779B97F4A7C15)
_SPLIT_M1 = np.uint64(0xBF58476D1CE4E5B9)
_SPLIT_M2 = np.uint64(0x94D049BB133111EB)


def _mix64(x):
    """SplitMix64 finalizer, vectorized over uint64."""
    with np.errstate(over="ignore"):
        z = x + _SPLIT_INC
        z = (z ^ (z >> np.uint64(30))) * _SPLIT_M1
        z = (z ^ (z >> np.uint64(27))) * _SPLIT_M2
        return z ^ (z >> np.uint64(31))


def edge_uniforms(seed: int, n_edges: int) -> np.ndarray:
    """Per-edge uniforms in [0, 1), a pure function of (seed, edge index)."""
    idx = np.arange(n_edges, dtype=np.uint64)
    key = _mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
    z = _mix64(idx ^ key)
    return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53


@dataclass(frozen=True)
class BoxSpec:
    """Axis-aligned box of Z^d: integer points of offset + [-L, L]^d."""

    dimension: int
    radius: int
    origin_offset: tuple[int, ...] = ()

    def __post_init__(self):
        if self.dimension not in SUPPORTED_DIMENSIONS:
            raise ResourceLimitError(
                f"dimension {self.dimension} outside supported range "
                f"{SUPPORTED_DIMENSIONS[0]}..{SUPPORTED_DIMENSIONS[-1]}"
            )
        if self.radius < 1:
            raise ResourceLimitError("radius must be >= 1")
        off = self.origin_offset or (0,) * self.dimension
        if len(off) != self.dimension:
            raise GeometryError("origin_offset length must equal dimension")
        object.__setattr__(self, "origin_offset", tuple(int(c) for c in off))
        if self.side**self.dimension > MAX_VERTICES:
            raise ResourceLimitError(
                f"box would hold {self.side ** self.dimension} vertices "
                f"(cap {MAX_VERTICES})"
            )

    @property
    def side(self) -> int:
        return 2 * self.radius + 1

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.side,) * self.dimension

    @property
    def n_vertices(self) -> int:
        return self.side**self.dimension

    @property
    def edges_per_axis(self) -> int:
        return 2 * self.radius * self.side ** (self.dimension - 1)

    @property
    def n_edges(self) -> int:
        return self.dimension * self.edges_per_axis

    @property
    def strides(self) -> tuple[int, ...]:
        # C-order strides in units of elements
        s = [1] * self.dimension
        for k in range(self.dimension - 2, -1, -1):
            s[k] = s[k + 1] * self.side
        return tuple(s)

    @property
    def low_corner(self) -> tuple[int, ...]:
        return tuple(o - self.radius for o in self.origin_offset)

    @property
    def high_corner(self) -> tuple[int, ...]:
        return tuple(o + self.radius for o in self.origin_offset)

    def contains(self, coord) -> bool:
        lo, hi = self.low_corner, self.high_corner
        return all(lo[k] <= coord[k] <= hi[k] for k in range(self.dimension))

    def grid_index(self, coord) -> tuple[int, ...]:
        if not self.contains(coord):
            raise GeometryError(f"vertex {tuple(coord)} outside box")
        lo = self.low_corner
        return tuple(int(coord[k]) - lo[k] for k in range(self.dimension))

    def flat_index(self, coord) -> int:
        gi = self.grid_index(coord)
        return int(sum(g * s for g, s in zip(gi, self.strides)))

    def vertex_coord(self, flat: int) -> tuple[int, ...]:
        gi = np.unravel_index(int(flat), self.shape)
        lo = self.low_corner
        return tuple(int(g) + lo[k] for k, g in enumerate(gi))

    def coords_of_flats(self, flats: np.ndarray) -> np.ndarray:
        """(m, d) lattice coordinates for an array of flat indices."""
        gi = np.unravel_index(np.asarray(flats, dtype=np.int64), self.shape)
        out = np.stack(gi, axis=-1).astype(np.int64)
        return out + np.asarray(self.low_corner, dtype=np.int64)

    def flats_of_coords(self, coords: np.ndarray) -> np.ndarray:
        arr = np.asarray(coords, dtype=np.int64)
        gi = arr - np.asarray(self.low_corner, dtype=np.int64)
        if (gi < 0).any() or (gi >= self.side).any():
            raise GeometryError("some vertices fall outside the box")
        return np.ravel_multi_index(tuple(gi.T), self.shape).astype(np.int64)

    @property
    def face_flat(self) -> np.ndarray:
        """Boolean mask (len n_vertices) of vertices on any box face."""
        return _face_flat(self.dimension, self.radius)

    def axis_base_flats(self, axis: int) -> np.ndarray:
        """Flat indices of lower endpoints of axis edges, in canonical order."""
        return _axis_base_flats(self.dimension, self.radius, axis)

    def edge_index(self, coord, axis: int) -> int:
        """Canonical index of the edge from coord to coord + e_axis."""
        gi = list(self.grid_index(coord))
        if gi[axis] >= self.side - 1:
            raise GeometryError("edge leaves the box")
        rshape = list(self.shape)
        rshape[axis] = self.side - 1
        inner = int(np.ravel_multi_index(tuple(gi), tuple(rshape)))
        return axis * self.edges_per_axis + inner

    def edge_endpoints(self, edge_index: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
        axis, inner = divmod(int(edge_index), self.edges_per_axis)
        rshape = list(self.shape)
        rshape[axis] = self.side - 1
        gi = list(np.unravel_index(inner, tuple(rshape)))
        lo = self.low_corner
        a = tuple(int(g) + lo[k] for k, g in enumerate(gi))
        b = tuple(c + (1 if k == axis else 0) for k, c in enumerate(a))
        return a, b

    def incident_edges(self, coord):
        """(edge_index, neighbour_coord) pairs for all box edges at coord."""
        gi = self.grid_index(coord)
        out = []
        for axis in range(self.dimension):
            if gi[axis] < self.side - 1:
                nb = tuple(c + (1 if k == axis else 0) for k, c in enumerate(coord))
                out.append((self.edge_index(coord, axis), nb))
            if gi[axis] > 0:
                nb = tuple(c - (1 if k == axis else 0) for k, c in enumerate(coord))
                out.append((self.edge_index(nb, axis), nb))
        return out


@lru_cache(maxsize=32)
def _face_flat(dimension: int, radius: int) -> np.ndarray:
    side = 2 * radius + 1
    shape = (side,) * dimension
    mask = np.zeros(shape, dtype=bool)
    for axis in range(dimension):
        sl_lo = [slice(None)] * dimension
        sl_lo[axis] = 0
        mask[tuple(sl_lo)] = True
        sl_hi = [slice(None)] * dimension
        sl_hi[axis] = side - 1
        mask[tuple(sl_hi)] = True
    mask.flags.writeable = False
    return mask.reshape(-1)


@lru_cache(maxsize=64)
def _axis_base_flats(dimension: int, radius: int, axis: int) -> np.ndarray:
    side = 2 * radius + 1
    shape = (side,) * dimension
    idx = np.arange(side**dimension, dtype=np.int64).reshape(shape)
    sl = [slice(None)] * dimension
    sl[axis] = slice(0, side - 1)
    out = idx[tuple(sl)].reshape(-1)
    out.flags.writeable = False
    return out


@dataclass
class PercolationSample:
    """One bond configuration on a box. Immutable by convention.

    ``open_edges`` is indexed by the canonical edge index. Samples produced
    by :func:`sample_configuration` are a pure function of (box, p, seed);
    surgered samples carry the parent's p and seed but modified edges.
    """

    box: BoxSpec
    p: float
    seed: int
    open_edges: np.ndarray
    _axis_open: list = field(default=None, repr=False, compare=False)
    _enclosed: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.open_edges = np.asarray(self.open_edges, dtype=bool)
        if self.open_edges.shape != (self.box.n_edges,):
            raise GeometryError("open_edges length must equal box.n_edges")

    def __eq__(self, other):
        if not isinstance(other, PercolationSample):
            return NotImplemented
        return (
            self.box == other.box
            and self.p == other.p
            and self.seed == other.seed
            and np.array_equal(self.open_edges, other.open_edges)
        )

    @property
    def open_fraction(self) -> float:
        return float(self.open_edges.mean())

    def axis_view(self, axis: int) -> np.ndarray:
        """Edge states of one axis family, shaped like the base-vertex grid."""
        epa = self.box.edges_per_axis
        shape = list(self.box.shape)
        shape[axis] = self.box.side - 1
        return self.open_edges[axis * epa : (axis + 1) * epa].reshape(shape)

    def axis_open_flats(self) -> list[np.ndarray]:
        """Per-axis full-grid masks: entry at v says edge (v, v+e_k) is open.

        Slots whose edge would leave the box are False, which lets BFS index
        by flat vertex id without bound checks.
        """
        if self._axis_open is None:
            d = self.box.dimension
            side = self.box.side
            masks = []
            for axis in range(d):
                full = np.zeros(self.box.shape, dtype=bool)
                sl = [slice(None)] * d
                sl[axis] = slice(0, side - 1)
                full[tuple(sl)] = self.axis_view(axis)
                masks.append(full.reshape(-1))
            self._axis_open = masks
        return self._axis_open

    def is_edge_open(self, edge_index: int) -> bool:
        return bool(self.open_edges[int(edge_index)])

    def enclosed_mask(self) -> np.ndarray:
        """Per-vertex mask: the open cluster of the vertex avoids every box
        face, so it equals the full Z^d cluster (nothing reaches it from
        outside). Computed once per sample."""
        if self._enclosed is None:
            labeling = label_clusters(self)
            self._enclosed = ~labeling.touches_boundary[labeling.labels]
        return self._enclosed

    def with_edges(self, close_idx=(), open_idx=()) -> "PercolationSample":
        """Copy with the given canonical edge indexes forced closed/open."""
        edges = self.open_edges.copy()
        if len(close_idx):
            edges[np.asarray(close_idx, dtype=np.int64)] = False
        if len(open_idx):
            edges[np.asarray(open_idx, dtype=np.int64)] = True
        return PercolationSample(self.box, self.p, self.seed, edges)

    # -- serialization -----------------------------------------------------

    def to_bytes(self) -> bytes:
        b = self.box
        head = _MAGIC + struct.pack("<HHI", _FORMAT_VERSION, b.dimension, b.radius)
        head += struct.pack(f"<{b.dimension}q", *b.origin_offset)
        head += struct.pack("<dQ", self.p, self.seed & 0xFFFFFFFFFFFFFFFF)
        bits = np.packbits(self.open_edges.view(np.uint8), bitorder="little")
        return head + bits.tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "PercolationSample":
        if blob[:4] != _MAGIC:
            raise GeometryError("not a percolab sample (bad magic)")
        ver, d, radius = struct.unpack_from("<HHI", blob, 4)
        if ver != _FORMAT_VERSION:
            raise GeometryError(f"unsupported sample format version {ver}")
        off = struct.unpack_from(f"<{d}q", blob, 12)
        p, seed = struct.unpack_from("<dQ", blob, 12 + 8 * d)
        box = BoxSpec(d, radius, off)
        payload = np.frombuffer(blob, dtype=np.uint8, offset=12 + 8 * d + 16)
        bits = np.unpackbits(payload, bitorder="little")[: box.n_edges]
        return cls(box, p, int(seed), bits.astype(bool))

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "PercolationSample":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def sample_configuration(box: BoxSpec, p: float, seed: int) -> PercolationSample:
    """Draw a bond configuration, deterministically in (box, p, seed)."""
    if not 0.0 < p < 1.0:
        raise ResourceLimitError("p must lie strictly inside (0, 1)")
    u = edge_uniforms(seed, box.n_edges)
    return PercolationSample(box, float(p), int(seed), u < p)


@dataclass
class ClusterLabeling:
    """Connected components of the open subgraph of one sample."""

    box: BoxSpec
    labels: np.ndarray  # component id per vertex (flat order)
    sizes: np.ndarray  # size per component id
    largest: int  # id of a largest component (smallest id on ties)
    faces_touched: np.ndarray  # (n_components, 2d) bool
    touches_boundary: np.ndarray  # (n_components,) bool

    @property
    def n_components(self) -> int:
        return len(self.sizes)

    def component_of(self, coord) -> int:
        return int(self.labels[self.box.flat_index(coord)])

    def component_flats(self, comp_id: int) -> np.ndarray:
        return np.flatnonzero(self.labels == comp_id)


def label_clusters(sample: PercolationSample) -> ClusterLabeling:
    """Label open clusters (connected components of open edges)."""
    box = sample.box
    d, side, n = box.dimension, box.side, box.n_vertices
    rows, cols = [], []
    epa = box.edges_per_axis
    for axis in range(d):
        base = box.axis_base_flats(axis)
        mask = sample.open_edges[axis * epa : (axis + 1) * epa]
        lo = base[mask]
        rows.append(lo)
        cols.append(lo + box.strides[axis])
    rows = np.concatenate(rows) if rows else np.empty(0, dtype=np.int64)
    cols = np.concatenate(cols) if cols else np.empty(0, dtype=np.int64)
    graph = csr_matrix(
        (np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n)
    )
    n_comp, labels = connected_components(graph, directed=False)
    sizes = np.bincount(labels, minlength=n_comp)

    faces = np.zeros((n_comp, 2 * d), dtype=bool)
    idx = np.arange(n, dtype=np.int64).reshape(box.shape)
    for axis in range(d):
        for j, pos in enumerate((0, side - 1)):
            sl = [slice(None)] * d
            sl[axis] = pos
            face_labels = np.unique(labels[idx[tuple(sl)].reshape(-1)])
            faces[face_labels, 2 * axis + j] = True

    largest = int(np.argmax(sizes))  # argmax takes the smallest id on ties
    return ClusterLabeling(
        box=box,
        labels=labels,
        sizes=sizes,
        largest=largest,
        faces_touched=faces,
        touches_boundary=faces.any(axis=1),
    )


def infinite_cluster_proxy(labeling: ClusterLabeling):
    """Largest component touching all 2d faces; None when there is none.

    Finite-box stand-in for the unique unbounded cluster. Ties are broken
    toward the smallest component id.
    """
    spanning = np.flatnonzero(labeling.faces_touched.all(axis=1))
    if spanning.size == 0:
        return None
    return int(spanning[np.argmax(labeling.sizes[spanning])])
