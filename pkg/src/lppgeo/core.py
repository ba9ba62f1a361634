"""Passage times, surfaces, geodesics and constrained variants.

Conventions
-----------
Path weights are endpoint-exclusive: the weight of an up/right path is the sum
of its vertex weights *excluding the final vertex*.  (Most references include
the final vertex; the exclusive convention makes weights exactly additive
under concatenation, which the constrained decompositions here rely on.)

A forward surface anchored at ``u`` holds T(v) = best weight from u to v; a
backward surface anchored at ``v`` holds T(u) = best weight from u to v.  On
ties between the two predecessors (probability zero in the continuous model,
but floats can collide), tracebacks prefer the horizontal move; the rule is a
convention and only matters for determinism.

Surfaces above the dense cell budget are stored as checkpoints (every B-th
row of the inclusive DP state) and tracebacks recompute blocks on demand from
the field's random-access weights.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field as dc_field
from typing import Iterable, NamedTuple

import numpy as np

from . import _kernels
from .errors import CapacityError, DomainError, NoPathError, OrderError
from .field import Rect, WeightField

NEG_INF = -np.inf

DEFAULT_SURFACE_CELL_BUDGET = 2 ** 28
DEFAULT_CHECKPOINT_BLOCK = 1024
BRUTE_FORCE_PATH_CAP = 10 ** 6
_BRUTE_CHUNK = 1 << 15


class Vertex(NamedTuple):
    x: int
    y: int

    def shifted(self, dx, dy):
        return Vertex(self.x + dx, self.y + dy)


def as_vertex(v) -> Vertex:
    return Vertex(int(v[0]), int(v[1]))


def precedes(u, v) -> bool:
    """Coordinatewise partial order u <= v."""
    return u[0] <= v[0] and u[1] <= v[1]


def l1_dist(u, v) -> int:
    return (v[0] - u[0]) + (v[1] - u[1])


@dataclass
class Path:
    """An up/right lattice path and its (endpoint-exclusive) weight."""

    vertices: np.ndarray  # (n, 2) int64, consecutive steps +e1 or +e2
    weight: float

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.int64).reshape(-1, 2)

    def __len__(self) -> int:
        return self.vertices.shape[0]

    @property
    def source(self) -> Vertex:
        return Vertex(int(self.vertices[0, 0]), int(self.vertices[0, 1]))

    @property
    def sink(self) -> Vertex:
        return Vertex(int(self.vertices[-1, 0]), int(self.vertices[-1, 1]))

    @property
    def xs(self) -> np.ndarray:
        return self.vertices[:, 0]

    @property
    def ys(self) -> np.ndarray:
        return self.vertices[:, 1]

    def steps(self) -> str:
        """Run-length step string, R = +x, U = +y."""
        d = np.diff(self.vertices, axis=0)
        return "".join("R" if dx else "U" for dx, dy in d)

    def recompute_weight(self, field: WeightField) -> float:
        return float(_kernels.path_weight(field._h, self.vertices[:, 0], self.vertices[:, 1]))

    def to_record(self, replicate: int | None = None) -> dict:
        rec = {
            "source": [int(self.vertices[0, 0]), int(self.vertices[0, 1])],
            "sink": [int(self.vertices[-1, 0]), int(self.vertices[-1, 1])],
            "weight": float(self.weight),
            "vertices": self.vertices.tolist(),
        }
        if replicate is not None:
            rec["replicate"] = int(replicate)
        return rec

    def validate(self) -> None:
        d = np.diff(self.vertices, axis=0)
        ok = ((d == (1, 0)) | (d == (0, 1))).all(axis=1) & (d.sum(axis=1) == 1)
        if len(self) > 1 and not ok.all():
            raise DomainError("vertices are not consecutive up/right steps")


def path_from_steps(source, steps: str, field: WeightField | None = None) -> Path:
    """Rebuild a Path from a source vertex and an 'RRU...' step string."""
    sx, sy = int(source[0]), int(source[1])
    verts = np.empty((len(steps) + 1, 2), np.int64)
    verts[0] = (sx, sy)
    x, y = sx, sy
    for i, c in enumerate(steps):
        if c == "R":
            x += 1
        elif c == "U":
            y += 1
        else:
            raise DomainError(f"bad step char {c!r}")
        verts[i + 1] = (x, y)
    w = float(_kernels.path_weight(field._h, verts[:, 0], verts[:, 1])) if field else float("nan")
    return Path(verts, w)


# ---------------------------------------------------------------------------
# passage surfaces
# ---------------------------------------------------------------------------


class PassageSurface:
    """Grid of passage times relative to a fixed anchor.

    orientation 'forward': values[iy, ix] = T(anchor -> (x, y));
    orientation 'backward': values[iy, ix] = T((x, y) -> anchor).
    Storage is 'dense' (value grid plus traceback bits) or 'checkpoint'
    (every block-th row of the internal DP state; values and tracebacks are
    recomputed blockwise on demand).
    """

    def __init__(self, field, anchor, orientation, rect, storage, *, values=None,
                 bits=None, ckpt=None, block=0):
        self.field = field
        self.anchor = as_vertex(anchor)
        self.orientation = orientation
        self.rect = rect
        self.storage = storage
        self.values = values
        self._bits = bits
        self._ckpt = ckpt
        self.block = block

    @property
    def shape(self):
        return (self.rect.height, self.rect.width)

    def _index(self, v):
        x, y = int(v[0]), int(v[1])
        if not self.rect.contains(x, y):
            raise DomainError(f"vertex ({x}, {y}) outside surface rect {self.rect}")
        return x - self.rect.x_min, y - self.rect.y_min

    def value_at(self, v) -> float:
        ix, iy = self._index(v)
        if self.values is not None:
            return float(self.values[iy, ix])
        # checkpointed forward storage: recompute the S rows around (ix, iy)
        h = self.field._h
        x0, y0 = self.rect.x_min, self.rect.y_min
        nx = self.rect.width
        if iy == 0:
            if ix == 0:
                return 0.0
            s = self._ckpt[0]
            return float(s[ix - 1])
        kb = (iy - 1) // self.block
        base = kb * self.block
        nrows = iy - base
        width = ix + 1
        scratch = np.empty((max(nrows, 1), width), np.float64)
        if nrows > 0:
            _kernels._fwd_block(h, x0, y0, width, base, nrows,
                                self._ckpt[kb, :width], scratch)
        s_row_y = scratch[nrows - 1] if nrows > 0 else self._ckpt[kb, :width]
        s_row_dn = self._ckpt[kb, :width] if iy - 1 == base else scratch[nrows - 2]
        s_left = s_row_y[ix - 1] if ix > 0 else NEG_INF
        s_down = s_row_dn[ix]
        return float(max(s_left, s_down))


def _hull_forward(source, rect: Rect) -> Rect:
    sx, sy = int(source[0]), int(source[1])
    if sx > rect.x_max or sy > rect.y_max:
        raise OrderError(f"source {source} not below-left of rect {rect}")
    return Rect(min(sx, rect.x_min), rect.x_max, min(sy, rect.y_min), rect.y_max)


def _hull_backward(sink, rect: Rect) -> Rect:
    sx, sy = int(sink[0]), int(sink[1])
    if sx < rect.x_min or sy < rect.y_min:
        raise OrderError(f"sink {sink} not above-right of rect {rect}")
    return Rect(rect.x_min, max(sx, rect.x_max), rect.y_min, max(sy, rect.y_max))


def _check_budget(area, storage, budget):
    if storage == "dense" and area > budget:
        raise CapacityError(
            f"surface of {area} cells exceeds the dense budget of {budget} "
            f"cells; pass storage='checkpoint'")


def forward_surface(field: WeightField, source, rect: Rect, *, storage="auto",
                    checkpoint_block=DEFAULT_CHECKPOINT_BLOCK,
                    max_dense_cells=DEFAULT_SURFACE_CELL_BUDGET,
                    dtype=np.float64) -> PassageSurface:
    """Passage times from `source` to every vertex of hull(source, rect).

    Cells not >= source hold -inf.  The returned surface's rect is the hull
    (it may extend the requested rect down-left to the anchor).
    """
    source = as_vertex(source)
    hull = _hull_forward(source, rect)
    area = hull.area
    if storage == "auto":
        storage = "dense" if area <= max_dense_cells else "checkpoint"
    _check_budget(area, storage, max_dense_cells)
    nx, ny = hull.width, hull.height
    sx, sy = source.x - hull.x_min, source.y - hull.y_min
    cnx, cny = nx - sx, ny - sy  # cone part, anchored at the source
    if storage == "dense":
        values = np.full((ny, nx), NEG_INF, dtype=dtype)
        words = (cnx + 63) >> 6
        bits = np.empty(cny * words, np.uint64)
        sub = values[sy:, sx:]
        _kernels.fwd_sweep(field._h, source.x, source.y, cnx, cny, sub, bits, True)
        return PassageSurface(field, source, "forward", hull, "dense",
                              values=values, bits=bits)
    if (sx, sy) != (0, 0):
        raise DomainError("checkpointed forward surfaces require the source "
                          "at the rect corner")
    nck = 1 + (ny - 1) // checkpoint_block
    ck = np.empty((nck, nx), np.float64)
    _kernels.fwd_sweep_ckpt(field._h, source.x, source.y, nx, ny,
                            checkpoint_block, ck)
    return PassageSurface(field, source, "forward", hull, "checkpoint",
                          ckpt=ck, block=checkpoint_block)


def backward_surface(field: WeightField, sink, rect: Rect, *, storage="auto",
                     max_dense_cells=DEFAULT_SURFACE_CELL_BUDGET,
                     dtype=np.float64) -> PassageSurface:
    """Passage times T(v -> sink) for every v in hull(rect, sink).

    Cells not <= sink hold -inf.  Only dense storage is supported here; the
    semi-infinite engine in `geometry` has its own checkpointed form for the
    very large rectangles.
    """
    sink = as_vertex(sink)
    hull = _hull_backward(sink, rect)
    area = hull.area
    if storage == "auto":
        storage = "dense"
    if storage != "dense":
        raise DomainError("backward surfaces support dense storage only")
    _check_budget(area, "dense", max_dense_cells)
    nx, ny = hull.width, hull.height
    kx, ky = sink.x - hull.x_min, sink.y - hull.y_min
    values = np.full((ny, nx), NEG_INF, dtype=dtype)
    words = (kx + 1 + 63) >> 6
    bits = np.empty((ky + 1) * words, np.uint64)
    sub = values[:ky + 1, :kx + 1]
    _kernels.bwd_sweep(field._h, hull.x_min, hull.y_min, kx + 1, ky + 1, sub, bits, True)
    return PassageSurface(field, sink, "backward", hull, "dense",
                          values=values, bits=bits)


def passage_time(field: WeightField, u, v) -> float:
    """T(u -> v), computed with O(width) rolling memory."""
    u, v = as_vertex(u), as_vertex(v)
    if not precedes(u, v):
        raise OrderError(f"{u} does not precede {v}")
    return float(_kernels.fwd_scalar(field._h, u.x, u.y, v.x - u.x, v.y - u.y))


def _vertices_from_rev_steps(end, steps, n) -> np.ndarray:
    """Backward walk (end -> start); steps[k] = 1 means came-from-left."""
    verts = np.empty((n + 1, 2), np.int64)
    x, y = int(end[0]), int(end[1])
    verts[n] = (x, y)
    for k in range(n):
        if steps[k]:
            x -= 1
        else:
            y -= 1
        verts[n - 1 - k] = (x, y)
    return verts


def _vertices_from_fwd_steps(start, steps, n) -> np.ndarray:
    """Forward walk (start -> end); steps[k] = 1 means move right."""
    verts = np.empty((n + 1, 2), np.int64)
    x, y = int(start[0]), int(start[1])
    verts[0] = (x, y)
    for k in range(n):
        if steps[k]:
            x += 1
        else:
            y += 1
        verts[k + 1] = (x, y)
    return verts


def trace_geodesic(field: WeightField, surface: PassageSurface, endpoint) -> Path:
    """Argmax path between the surface anchor and `endpoint`.

    Forward surfaces yield the path anchor -> endpoint; backward surfaces
    endpoint -> anchor.  Ties step horizontally.
    """
    endpoint = as_vertex(endpoint)
    ix, iy = surface._index(endpoint)
    val = surface.value_at(endpoint)
    if val == NEG_INF or math.isnan(val):
        raise NoPathError(f"endpoint {endpoint} unreachable from {surface.anchor}")
    a = surface.anchor
    if surface.orientation == "forward":
        ex, ey = endpoint.x - a.x, endpoint.y - a.y
        if ex < 0 or ey < 0:
            raise NoPathError(f"endpoint {endpoint} unreachable from {surface.anchor}")
        steps = np.empty(ex + ey, np.uint8) if ex + ey else np.empty(0, np.uint8)
        if surface.storage == "dense":
            cnx = surface.rect.x_max - a.x + 1
            cny = surface.rect.y_max - a.y + 1
            n = _kernels.trace_bits_fwd(surface._bits, cnx, cny, ex, ey, steps)
        else:
            n = _kernels.trace_ckpt_fwd(field._h, a.x, a.y, surface.rect.width,
                                        surface.rect.height, surface.block,
                                        surface._ckpt, ex, ey, steps)
        verts = _vertices_from_rev_steps(endpoint, steps, n)
        return Path(verts, float(val))
    # backward
    sxg = endpoint.x - surface.rect.x_min
    syg = endpoint.y - surface.rect.y_min
    kx = a.x - surface.rect.x_min
    ky = a.y - surface.rect.y_min
    if sxg > kx or syg > ky:
        raise NoPathError(f"endpoint {endpoint} unreachable from {surface.anchor}")
    nsteps = (kx - sxg) + (ky - syg)
    steps = np.empty(max(nsteps, 1), np.uint8)
    n = _kernels.trace_bits_bwd(surface._bits, kx + 1, ky + 1, sxg, syg, steps)
    verts = _vertices_from_fwd_steps(endpoint, steps, n)
    return Path(verts, float(val))


def geodesic(field: WeightField, u, v, *,
             checkpoint_block=DEFAULT_CHECKPOINT_BLOCK,
             max_dense_cells=DEFAULT_SURFACE_CELL_BUDGET) -> Path:
    """The geodesic from u to v (forward surface + traceback).

    Checkpointing engages automatically above the dense cell budget; dense
    mode keeps only direction bits, not the value grid.
    """
    u, v = as_vertex(u), as_vertex(v)
    if not precedes(u, v):
        raise OrderError(f"{u} does not precede {v}")
    nx, ny = v.x - u.x + 1, v.y - u.y + 1
    ex, ey = nx - 1, ny - 1
    steps = np.empty(max(ex + ey, 1), np.uint8)
    if nx * ny <= max_dense_cells:
        words = (nx + 63) >> 6
        bits = np.empty(ny * words, np.uint64)
        t = _kernels.fwd_sweep(field._h, u.x, u.y, nx, ny,
                               np.empty((1, 1), np.float64), bits, False)
        n = _kernels.trace_bits_fwd(bits, nx, ny, ex, ey, steps)
    else:
        nck = 1 + (ny - 1) // checkpoint_block
        ck = np.empty((nck, nx), np.float64)
        t = _kernels.fwd_sweep_ckpt(field._h, u.x, u.y, nx, ny, checkpoint_block, ck)
        n = _kernels.trace_ckpt_fwd(field._h, u.x, u.y, nx, ny, checkpoint_block,
                                    ck, ex, ey, steps)
    verts = _vertices_from_rev_steps(v, steps, n)
    return Path(verts, float(t))


# ---------------------------------------------------------------------------
# constraints
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Parallelogram:
    """Parallelogram with sides parallel to the diagonal and the y-axis.

    Endpoints (w, w-h), (w+length, w+length-h), (w, w+s), (w+length,
    w+length+s); a lattice point (x, y) is inside iff w <= x <= w+length and
    -h <= y-x <= s.
    """

    w: int
    length: int
    h: int
    s: int

    def contains(self, x, y) -> bool:
        return self.w <= x <= self.w + self.length and -self.h <= y - x <= self.s

    def mask_on(self, rect: Rect) -> np.ndarray:
        xs = np.arange(rect.x_min, rect.x_max + 1)
        ys = np.arange(rect.y_min, rect.y_max + 1)
        inx = (xs >= self.w) & (xs <= self.w + self.length)
        diag = ys[:, None] - xs[None, :]
        return inx[None, :] & (diag >= -self.h) & (diag <= self.s)


@dataclass(frozen=True)
class Region:
    """Finite union of parallelograms and rectangles."""

    parallelograms: tuple = ()
    rects: tuple = ()

    def contains(self, x, y) -> bool:
        return any(p.contains(x, y) for p in self.parallelograms) or any(
            r.contains(x, y) for r in self.rects)

    def mask_on(self, rect: Rect) -> np.ndarray:
        m = np.zeros((rect.height, rect.width), bool)
        for p in self.parallelograms:
            m |= p.mask_on(rect)
        for r in self.rects:
            x0 = max(r.x_min, rect.x_min) - rect.x_min
            x1 = min(r.x_max, rect.x_max) - rect.x_min
            y0 = max(r.y_min, rect.y_min) - rect.y_min
            y1 = min(r.y_max, rect.y_max) - rect.y_min
            if x0 <= x1 and y0 <= y1:
                m[y0:y1 + 1, x0:x1 + 1] = True
        return m


@dataclass(frozen=True)
class Constraint:
    """A path constraint; see the factory classmethods.

    kinds: none, avoid-region, through-region, avoid-vertex-set,
    stay-weakly-above-path, stay-strictly-above-path, height-at-column.
    """

    kind: str
    region: Region | None = None
    vertices: tuple = ()
    path_cols: np.ndarray | None = None  # columns of the reference path span
    path_tops: np.ndarray | None = None  # gamma(x) on those columns
    column: int | None = None
    min_height: int | None = None
    max_height: int | None = None

    @classmethod
    def none(cls):
        return cls("none")

    @classmethod
    def avoid_region(cls, region: Region):
        return cls("avoid-region", region=region)

    @classmethod
    def through_region(cls, region: Region):
        return cls("through-region", region=region)

    @classmethod
    def avoid_vertices(cls, vertices: Iterable):
        return cls("avoid-vertex-set", vertices=tuple((int(x), int(y)) for x, y in vertices))

    @classmethod
    def stay_above_path(cls, path: Path, x_from=None, x_to=None, strict=True):
        """Keep candidate paths (strictly) above `path` on its column span.

        Column x in the span forbids cells with y <= gamma(x) (strict) or
        y < gamma(x) (weak), where gamma is the top profile of `path`.
        """
        xs = path.vertices[:, 0]
        ys = path.vertices[:, 1]
        lo = int(xs.min()) if x_from is None else int(x_from)
        hi = int(xs.max()) if x_to is None else int(x_to)
        cols = np.arange(lo, hi + 1, dtype=np.int64)
        tops = np.full(cols.size, np.iinfo(np.int64).min, np.int64)
        np.maximum.at(tops, xs[(xs >= lo) & (xs <= hi)] - lo, ys[(xs >= lo) & (xs <= hi)])
        if (tops == np.iinfo(np.int64).min).any():
            raise DomainError("reference path does not cover the requested column range")
        kind = "stay-strictly-above-path" if strict else "stay-weakly-above-path"
        return cls(kind, path_cols=cols, path_tops=tops)

    @classmethod
    def height_at_column(cls, column: int, min_height=None, max_height=None):
        if min_height is None and max_height is None:
            raise DomainError("height_at_column needs min_height or max_height")
        return cls("height-at-column", column=int(column),
                   min_height=None if min_height is None else int(min_height),
                   max_height=None if max_height is None else int(max_height))


def _normalize_constraints(constraint) -> list[Constraint]:
    if constraint is None:
        return []
    if isinstance(constraint, Constraint):
        cs = [constraint]
    else:
        cs = list(constraint)
    return [c for c in cs if c.kind != "none"]


def constraint_mask(constraints: list[Constraint], rect: Rect) -> np.ndarray:
    """uint8 grid over rect: 1 = forbidden cell."""
    m = np.zeros((rect.height, rect.width), bool)
    ys = np.arange(rect.y_min, rect.y_max + 1)
    for c in constraints:
        if c.kind == "avoid-region":
            m |= c.region.mask_on(rect)
        elif c.kind == "avoid-vertex-set":
            for (x, y) in c.vertices:
                if rect.contains(x, y):
                    m[y - rect.y_min, x - rect.x_min] = True
        elif c.kind in ("stay-strictly-above-path", "stay-weakly-above-path"):
            strict = c.kind == "stay-strictly-above-path"
            for col, top in zip(c.path_cols, c.path_tops):
                if rect.x_min <= col <= rect.x_max:
                    bound = top + 1 if strict else top
                    m[ys < bound, col - rect.x_min] = True
        elif c.kind == "height-at-column":
            if rect.x_min <= c.column <= rect.x_max:
                ix = c.column - rect.x_min
                if c.min_height is not None:
                    m[ys < c.min_height, ix] = True
                if c.max_height is not None:
                    m[ys > c.max_height, ix] = True
        elif c.kind == "through-region":
            raise DomainError("through-region cannot be combined into a mask")
        else:
            raise DomainError(f"unknown constraint kind {c.kind}")
    return m.astype(np.uint8)


def constrained_passage_time(field: WeightField, u, v, constraint):
    """Best admissible path u -> v, or None when no admissible path exists.

    `constraint` is a Constraint or an iterable of them (conjunction).  A
    through-region constraint must stand alone; avoid-type constraints
    combine freely.
    """
    u, v = as_vertex(u), as_vertex(v)
    if not precedes(u, v):
        raise OrderError(f"{u} does not precede {v}")
    cs = _normalize_constraints(constraint)
    hull = Rect(u.x, v.x, u.y, v.y)
    through = [c for c in cs if c.kind == "through-region"]
    if through:
        if len(cs) > 1:
            raise DomainError("through-region must be the sole constraint")
        return _through_region(field, u, v, hull, through[0].region)
    if not cs:
        p = geodesic(field, u, v)
        return p.weight, p
    mask = constraint_mask(cs, hull)
    nx, ny = hull.width, hull.height
    values = np.empty((ny, nx), np.float64)
    words = (nx + 63) >> 6
    bits = np.empty(ny * words, np.uint64)
    t = _kernels.fwd_sweep_masked(field._h, u.x, u.y, nx, ny, mask, values, bits)
    if t == NEG_INF:
        return None
    steps = np.empty(max(nx + ny - 2, 1), np.uint8)
    n = _kernels.trace_bits_fwd(bits, nx, ny, nx - 1, ny - 1, steps)
    verts = _vertices_from_rev_steps(v, steps, n)
    return float(t), Path(verts, float(t))


def _through_region(field, u, v, hull, region):
    """Best path u -> v that visits the region: max over region vertices w of
    T(u -> w) + T(w -> v) (exact under the endpoint-exclusive convention)."""
    fwd = forward_surface(field, u, hull)
    bwd = backward_surface(field, v, hull)
    m = region.mask_on(hull)
    if not m.any():
        return None
    total = np.where(m, fwd.values + bwd.values, NEG_INF)
    best = total.max()
    if best == NEG_INF:
        return None
    iy, ix = np.unravel_index(int(np.argmax(total)), total.shape)
    w = Vertex(hull.x_min + int(ix), hull.y_min + int(iy))
    p1 = trace_geodesic(field, fwd, w)
    p2 = trace_geodesic(field, bwd, w)
    verts = np.vstack([p1.vertices, p2.vertices[1:]])
    return float(best), Path(verts, float(best))


# ---------------------------------------------------------------------------
# brute-force oracle
# ---------------------------------------------------------------------------


def count_paths(dx: int, dy: int) -> int:
    return math.comb(dx + dy, dx)


def brute_force_passage(field: WeightField, u, v, constraint=None):
    """Exhaustive maximum over all up/right paths (the test oracle).

    Returns (time, Path); with constraints, returns None when no admissible
    path exists.  Refuses instances with more than 10^6 paths.
    """
    u, v = as_vertex(u), as_vertex(v)
    if not precedes(u, v):
        raise OrderError(f"{u} does not precede {v}")
    dx, dy = v.x - u.x, v.y - u.y
    n_paths = count_paths(dx, dy)
    if n_paths > BRUTE_FORCE_PATH_CAP:
        raise CapacityError(
            f"{n_paths} paths exceed the enumeration cap of {BRUTE_FORCE_PATH_CAP}")
    hull = Rect(u.x, v.x, u.y, v.y)
    w = field.materialize_block(hull)
    wflat = w.ravel()
    cs = _normalize_constraints(constraint)
    avoid = [c for c in cs if c.kind != "through-region"]
    through = [c for c in cs if c.kind == "through-region"]
    forbidden = constraint_mask(avoid, hull).ravel().astype(bool) if avoid else None
    wanted = None
    if through:
        wanted = np.zeros((hull.height, hull.width), bool)
        for c in through:
            wanted |= c.region.mask_on(hull)
        wanted = wanted.ravel()
    nsteps = dx + dy
    nx = hull.width
    best_val = NEG_INF
    best_cells = None
    it = itertools.combinations(range(nsteps), dx) if dx <= dy else None
    if it is None:
        it = itertools.combinations(range(nsteps), dy)
    while True:
        chunk = list(itertools.islice(it, _BRUTE_CHUNK))
        if not chunk:
            break
        pos = np.asarray(chunk, np.int64)  # positions of the minority step
        steps = np.zeros((pos.shape[0], nsteps), np.int64)
        np.put_along_axis(steps, pos, 1, axis=1)
        if dx <= dy:
            xsteps = steps
        else:
            xsteps = 1 - steps
        xs = np.zeros((pos.shape[0], nsteps + 1), np.int64)
        xs[:, 1:] = np.cumsum(xsteps, axis=1)
        ks = np.arange(nsteps + 1)
        ysv = ks[None, :] - xs
        cells = ysv * nx + xs  # flat indices into the hull grid
        vals = wflat[cells[:, :-1]].sum(axis=1)
        ok = np.ones(pos.shape[0], bool)
        if forbidden is not None:
            ok &= ~forbidden[cells].any(axis=1)
        if wanted is not None:
            ok &= wanted[cells].any(axis=1)
        if not ok.any():
            continue
        vals = np.where(ok, vals, NEG_INF)
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val = float(vals[i])
            best_cells = cells[i]
    if best_cells is None:
        if cs:
            return None
        raise NoPathError("no path found")  # unreachable for sane inputs
    verts = np.empty((nsteps + 1, 2), np.int64)
    verts[:, 0] = u.x + (best_cells % nx)
    verts[:, 1] = u.y + (best_cells // nx)
    return best_val, Path(verts, best_val)
