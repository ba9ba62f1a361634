"""Geometric statistics of geodesics.

Covers path-profile queries (height at a column, transversal fluctuation,
dyadic fluctuation events), coalescence points of finite geodesics, and a
finite-target approximation of semi-infinite geodesics in direction (1,1):
geodesics are traced to targets (N, N) with N doubling until the prefix up to
the horizon line x+y = m stabilizes between two successive targets.

The backward surfaces for the far targets are computed on a widening diagonal
strip (half-width = margin + factor * t^(2/3) at distance t from the nearer
end).  The strip is an approximation control, not part of the model: traces
that ever touch the strip boundary are flagged and reported as non-converged.
With the default factor the contact probability is negligible at all scales
used here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import Path, Vertex, as_vertex
from .errors import DomainError, ParameterError
from .field import WeightField

_XS_SENTINEL = np.int64(-(2 ** 62))


# ---------------------------------------------------------------------------
# path-profile queries
# ---------------------------------------------------------------------------


def gamma_at(path: Path, col: int) -> int:
    """Largest y with (col, y) on the path (its height at that column)."""
    xs = path.vertices[:, 0]
    if col < xs[0] or col > xs[-1]:
        raise DomainError(f"column {col} outside path span [{xs[0]}, {xs[-1]}]")
    sel = xs == col
    return int(path.vertices[sel, 1].max())


def gamma_inv(path: Path, row: int) -> int:
    """Largest x with (x, row) on the path."""
    ys = path.vertices[:, 1]
    if row < ys[0] or row > ys[-1]:
        raise DomainError(f"row {row} outside path span [{ys[0]}, {ys[-1]}]")
    sel = ys == row
    return int(path.vertices[sel, 0].max())


def gamma_profile(path: Path, col_from: int, col_to: int) -> np.ndarray:
    """gamma_at over an inclusive column range, vectorized."""
    xs = path.vertices[:, 0]
    if col_from < xs[0] or col_to > xs[-1]:
        raise DomainError("column range outside path span")
    tops = np.full(col_to - col_from + 1, np.iinfo(np.int64).min, np.int64)
    sel = (xs >= col_from) & (xs <= col_to)
    np.maximum.at(tops, xs[sel] - col_from, path.vertices[sel, 1])
    return tops


def transversal_fluctuation(path: Path) -> int:
    """max |x - y| over the path's vertices."""
    d = path.vertices[:, 0] - path.vertices[:, 1]
    return int(np.abs(d).max())


def dyadic_tf_events(path: Path, k: int, big_m: int, s: float, levels: int) -> np.ndarray:
    """Events A_i, i = 1..levels: |gamma(M^i k) - M^i k| >= s (M^i k)^(2/3).

    Returns a boolean vector indexed by i-1.  Columns M^i k must lie in the
    path's column span.
    """
    out = np.zeros(levels, bool)
    for i in range(1, levels + 1):
        col = (big_m ** i) * k
        dev = abs(gamma_at(path, col) - col)
        out[i - 1] = dev >= s * icbrt23(col)
    return out


def icbrt23(n: int) -> int:
    """floor(n^(2/3)) computed exactly in integers."""
    if n < 0:
        raise DomainError("negative argument")
    m = n * n
    x = int(round(m ** (1.0 / 3.0))) if m else 0
    while x > 0 and x * x * x > m:
        x -= 1
    while (x + 1) ** 3 <= m:
        x += 1
    return x


def _icbrt23_vec(t: np.ndarray) -> np.ndarray:
    """Vectorized exact floor(t^(2/3)) for nonnegative int64 t."""
    m = t.astype(np.int64) ** 2
    c = np.floor(np.cbrt(m.astype(np.float64))).astype(np.int64)
    c = np.maximum(c, 0)
    for _ in range(3):  # fix float rounding; converges in <= 2 passes
        over = c > 0
        over &= c ** 3 > m
        c[over] -= 1
        under = (c + 1) ** 3 <= m
        c[under] += 1
    return c


# ---------------------------------------------------------------------------
# coalescence of finite paths
# ---------------------------------------------------------------------------


def common_vertices(p1: Path, p2: Path) -> np.ndarray:
    """Vertices shared by both paths, sorted by (x+y, x)."""
    a = p1.vertices
    b = p2.vertices
    sa = set(map(tuple, a.tolist()))
    common = [v for v in map(tuple, b.tolist()) if v in sa]
    if not common:
        return np.empty((0, 2), np.int64)
    arr = np.array(sorted(common, key=lambda v: (v[0] + v[1], v[0])), np.int64)
    return arr


def coalescence_point(p1: Path, p2: Path) -> Vertex | None:
    """Common vertex minimizing x+y (ties: smaller x); None when disjoint."""
    c = common_vertices(p1, p2)
    if c.shape[0] == 0:
        return None
    return Vertex(int(c[0, 0]), int(c[0, 1]))


def leftmost_common_abscissa(p1: Path, p2: Path) -> int | None:
    """min{x : (x, y) in p1 and p2} (well-defined even without a unique
    leftmost common vertex)."""
    c = common_vertices(p1, p2)
    if c.shape[0] == 0:
        return None
    return int(c[:, 0].min())


# ---------------------------------------------------------------------------
# semi-infinite geodesics via doubling finite targets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SemiInfiniteScheme:
    """Finite-target approximation scheme for direction-(1,1) geodesics.

    horizon: prefixes are produced (and compared) up to the line x+y=horizon;
    the first target is (N, N) with N = c0 * horizon, doubling at most
    max_doublings times until two successive targets yield identical
    prefixes.  strip_factor / strip_margin control the diagonal strip the
    backward surface is restricted to (see module docstring).
    """

    horizon: int
    c0: int = 8
    max_doublings: int = 6
    strip_factor: float = 6.0
    strip_margin: int = 64
    checkpoint_block: int = 64

    def __post_init__(self):
        if self.c0 < 2:
            raise ParameterError("c0 must be at least 2")
        if self.horizon < 1:
            raise ParameterError("horizon must be positive")

    def targets(self):
        n0 = self.c0 * self.horizon
        return [n0 * (2 ** j) for j in range(self.max_doublings + 1)]


@dataclass
class TraceFamily:
    """Traced prefixes of the geodesics from `sources` toward one target."""

    sources: list
    xs: np.ndarray            # (ns, horizon+1); xs[s, d] = x at x+y = d
    weights: np.ndarray       # prefix weights (final vertex excluded)
    horizon: int
    target: int               # the (N, N) used
    converged: bool
    flagged: bool             # any trace touched the strip boundary


def _strip_plan(n_target: int, sources, margin: int, factor: float):
    """Per-row windows of the strip |x - y| <= W(x + y).

    W(t) = margin + factor * floor(min(t, 2N - t)^(2/3)) measures the allowed
    deviation from the diagonal at anti-diagonal distance t from the nearer of
    the source line and the sink.  Row bounds solve the implicit inequality by
    a monotone fixed-point iteration plus exact integer correction.
    """
    src_x = np.array([s[0] for s in sources], np.int64)
    src_y = np.array([s[1] for s in sources], np.int64)
    y_min = int(src_y.min())
    x_hard_lo = int(src_x.min())
    margin_eff = int(max(margin, int(np.abs(src_x - src_y).max()) + 8))
    two_n = 2 * n_target

    def w_of(t):
        tc = np.minimum(np.maximum(t, 0), np.maximum(two_n - t, 0))
        return margin_eff + (factor * _icbrt23_vec(tc)).astype(np.int64)

    ys = np.arange(y_min, n_target + 1, dtype=np.int64)
    w_max = margin_eff + int(factor * icbrt23(n_target))
    # largest x with x - y <= W(x + y): iterate down from an upper bound
    xh = np.minimum(ys + w_max, n_target)
    for _ in range(16):
        xh_new = np.minimum(ys + w_of(xh + ys), n_target)
        if np.array_equal(xh_new, xh):
            break
        xh = np.maximum(xh_new, ys)  # never drop below the diagonal
    viol = (xh - ys) > w_of(xh + ys)
    while viol.any():
        xh[viol] -= 1
        viol = (xh - ys) > w_of(xh + ys)
    # smallest x >= hard bound with y - x <= W(x + y): iterate up from below
    xl = np.maximum(ys - w_max, x_hard_lo)
    for _ in range(16):
        xl_new = np.maximum(ys - w_of(xl + ys), x_hard_lo)
        if np.array_equal(xl_new, xl):
            break
        xl = np.minimum(xl_new, np.maximum(ys, x_hard_lo))
    viol = (ys - xl) > w_of(xl + ys)
    while viol.any():
        xl[viol] += 1
        viol = (ys - xl) > w_of(xl + ys)
    xl = np.minimum(xl, xh)  # never empty
    return src_x, src_y, y_min, xl, xh


def _trace_family_once(field: WeightField, sources, horizon: int, n_target: int,
                       margin: int, factor: float, block: int):
    src_x, src_y, y_min, xl, xh = _strip_plan(n_target, sources, margin, factor)
    widths = (xh - xl + 1)
    blk = max(block, (n_target - y_min) // 1024, 1)
    stored = np.arange(0, (n_target - y_min) // blk + 1)
    stored_iy = n_target - y_min - stored * blk  # row indices of stored rows
    ck_off = np.zeros(stored.size + 1, np.int64)
    np.cumsum(widths[stored_iy], out=ck_off[1:])
    ck_vals = np.empty(int(ck_off[-1]), np.float64)
    _kernels.bwd_strip_sweep(field._h, y_min, n_target, xl, xh, blk,
                             ck_vals, ck_off[:-1].copy())
    ns = len(sources)
    xs = np.full((ns, horizon + 1), _XS_SENTINEL, np.int64)
    wsum = np.zeros(ns, np.float64)
    flags = np.zeros(ns, np.uint8)
    _kernels.bwd_strip_trace(field._h, y_min, n_target, xl, xh,
                             int(src_x.min()), blk, ck_vals, ck_off[:-1].copy(),
                             src_x, src_y, horizon, xs, wsum, flags)
    if (flags & 2).any():
        raise ParameterError("internal -inf during strip trace; widen the strip")
    return xs, wsum, bool((flags & 1).any())


def trace_family(field: WeightField, sources, scheme: SemiInfiniteScheme) -> TraceFamily:
    """Run the doubling scheme for a family of sources sharing each target."""
    sources = [as_vertex(s) for s in sources]
    for s in sources:
        if s.x + s.y > scheme.horizon:
            raise DomainError(f"source {s} beyond the horizon {scheme.horizon}")
    prev = None
    prev_w = None
    prev_flg = True
    target = 0
    for n_target in scheme.targets():
        xs, wsum, flg = _trace_family_once(
            field, sources, scheme.horizon, n_target,
            scheme.strip_margin, scheme.strip_factor, scheme.checkpoint_block)
        target = n_target
        if prev is not None and not flg and not prev_flg and np.array_equal(prev, xs):
            return TraceFamily(sources, xs, wsum, scheme.horizon, n_target, True, False)
        prev, prev_w, prev_flg = xs, wsum, flg
    return TraceFamily(sources, prev, prev_w, scheme.horizon, target, False, prev_flg)


def family_path(fam: TraceFamily, idx: int) -> Path:
    """Materialize the prefix of one family member as a Path."""
    s = fam.sources[idx]
    d0 = s.x + s.y
    xs = fam.xs[idx, d0:fam.horizon + 1]
    ds = np.arange(d0, fam.horizon + 1, dtype=np.int64)
    verts = np.stack([xs, ds - xs], axis=1)
    return Path(verts, float(fam.weights[idx]))


def semi_infinite_prefix(field: WeightField, v, scheme: SemiInfiniteScheme):
    """Approximate the direction-(1,1) semi-infinite geodesic from v.

    Returns (prefix path up to x+y = scheme.horizon, converged flag).
    Non-convergence is reported, never raised.
    """
    fam = trace_family(field, [v], scheme)
    return family_path(fam, 0), fam.converged


def hit_point(field: WeightField, v, k: int, scheme: SemiInfiniteScheme):
    """First vertex of the approximated geodesic from v with x+y >= k.

    v must lie on x+y = 0 and the scheme horizon must cover k.
    Returns (vertex, converged flag).
    """
    v = as_vertex(v)
    if v.x + v.y != 0:
        raise DomainError(f"{v} is not on the line x+y=0")
    if scheme.horizon < k:
        raise DomainError(f"scheme horizon {scheme.horizon} below k={k}")
    fam = trace_family(field, [v], scheme)
    x = int(fam.xs[0, k])
    return Vertex(x, k - x), fam.converged


@dataclass
class CoalescenceRecord:
    """Where two (approximated) semi-infinite geodesics first meet.

    v_star/d are None when the traces stay disjoint up to the horizon.
    """

    v_star: Vertex | None
    d: int | None
    converged: bool
    target_used: Vertex

    def to_record(self, **extra) -> dict:
        rec = {
            "v_star": None if self.v_star is None else [self.v_star.x, self.v_star.y],
            "d": self.d,
            "converged": bool(self.converged),
            "target_N": int(self.target_used.x),
        }
        rec.update(extra)
        return rec


def _first_meet(xs: np.ndarray, i: int, j: int, d_lo: int, d_hi: int) -> int | None:
    eq = xs[i, d_lo:d_hi + 1] == xs[j, d_lo:d_hi + 1]
    valid = xs[i, d_lo:d_hi + 1] != _XS_SENTINEL
    hit = np.flatnonzero(eq & valid)
    if hit.size == 0:
        return None
    return d_lo + int(hit[0])


def coalescence_distance(field: WeightField, v, v2,
                         scheme: SemiInfiniteScheme) -> CoalescenceRecord:
    """Coalescence point / distance of the geodesics from v and v2.

    Both sources must lie on x+y = 0.  Once two traces to the same target
    meet, they coincide afterward (the argmax continuation from a shared
    vertex is unique), so the first shared anti-diagonal is the coalescence
    point.  Meets beyond the horizon are reported as absent.
    """
    v, v2 = as_vertex(v), as_vertex(v2)
    for s in (v, v2):
        if s.x + s.y != 0:
            raise DomainError(f"{s} is not on the line x+y=0")
    fam = trace_family(field, [v, v2], scheme)
    d = _first_meet(fam.xs, 0, 1, 0, scheme.horizon)
    tgt = Vertex(fam.target, fam.target)
    if d is None:
        return CoalescenceRecord(None, None, fam.converged, tgt)
    x = int(fam.xs[0, d])
    return CoalescenceRecord(Vertex(x, d - x), d, fam.converged, tgt)


def boundary_indicators(field: WeightField, k: int, i_range,
                        scheme: SemiInfiniteScheme):
    """k-boundary indicators X_i for u_i = (-i, i), i in the inclusive range.

    X_i = 1 iff the geodesics from u_i and u_{i+1} share no vertex with
    x+y <= k.  All geodesics are traced against one shared backward surface
    per target.  Returns (bool vector, converged flag).
    """
    i_lo, i_hi = int(i_range[0]), int(i_range[1])
    if i_hi < i_lo:
        raise DomainError("empty i range")
    if scheme.horizon < k:
        raise DomainError(f"scheme horizon {scheme.horizon} below k={k}")
    sources = [Vertex(-i, i) for i in range(i_lo, i_hi + 2)]
    fam = trace_family(field, sources, scheme)
    n = i_hi - i_lo + 1
    bits = np.zeros(n, bool)
    for j in range(n):
        d = _first_meet(fam.xs, j, j + 1, 0, min(k, scheme.horizon))
        bits[j] = d is None
    return bits, fam.converged
