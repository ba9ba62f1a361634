"""Barrier geometry and the favourable events for forcing geodesic merging.

A trial is parametrized by a scale z: two geodesics run from the column zr
(points a1 above / b1 below the diagonal) to the column z^2 r.  A barrier
parallelogram B of width x/10 and height (4M+S)x^(2/3) is placed at
x = z^(3/2) r.  Four events are evaluated on each sampled field:

* wing condition G: passage times from a1 to the left wall, and from the
  right wall to the auxiliary segment L3, are centered-typical;
* typical path: the lower geodesic crosses the barrier with typical weight
  and geometry (six sub-conditions);
* path condition A_gamma: detours that enter the barrier region above its
  walls (at x, at mx, or above L3 at x') lose against following gamma;
* barrier condition R_gamma: every wall-to-wall crossing avoiding gamma is
  heavily penalized.

Centered times use mu(u, v) = (sqrt(dx) + sqrt(dy))^2 for the mean (the
asymptotic formula without its lower-order correction), or 2*d(u, v) for the
l1 centering.  Fractional powers of integers are floored once (x^(2/3) first,
then parameter products), mirroring the usual integrality conventions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import (Constraint, Path, Vertex, as_vertex, constrained_passage_time,
                   forward_surface, geodesic, passage_time, precedes)
from .core import Parallelogram
from .errors import DomainError, OrderError, ParameterError
from .field import Rect, WeightField
from .geometry import coalescence_point, gamma_at, icbrt23

SLOPE_PSI = 10.0


@dataclass(frozen=True)
class BarrierSpec:
    """All geometry derived from (z, r, M, S, H, u0, v0); see build_spec."""

    z: int
    r: int
    big_m: float
    big_s: float
    big_h: float
    u0: float
    v0: float
    strict_above: bool
    # derived quantities (integer lattice geometry)
    x: int
    width: int      # barrier width floor(x/10)
    mx: int         # x + width (the barrier's right column)
    x_prime: int
    x23: int
    mx23: int
    xp23: int
    h_wall: int     # 2M x^(2/3), lower wall extent
    s_wall: int     # (2M+S) x^(2/3), upper wall extent
    h3: int         # 2M x'^(2/3)
    s3: int         # (2M+S) x'^(2/3)
    a1: Vertex
    b1: Vertex
    a2: Vertex
    b2: Vertex

    @property
    def x13(self) -> float:
        return float(self.x) ** (1.0 / 3.0)

    @property
    def barrier(self) -> Parallelogram:
        """B = P(x, x/10, 2M x^(2/3), (2M+S) x^(2/3))."""
        return Parallelogram(self.x, self.width, self.h_wall, self.s_wall)

    @property
    def barrier_core(self) -> Parallelogram:
        """B0 = P(x, x/10, 2M x^(2/3), 2M x^(2/3))."""
        return Parallelogram(self.x, self.width, self.h_wall, self.h_wall)

    def wall_left_ys(self):
        return self.x - self.h_wall, self.x + self.s_wall

    def wall_right_ys(self):
        return self.mx - self.h_wall, self.mx + self.s_wall

    def l3_ys(self):
        return self.x_prime - self.h3, self.x_prime + self.s3


def build_spec(z: int, big_m: float = 2.0, big_s: float = 32.0, big_h: float = 12.0,
               u0: float = 1.0, v0: float = 1.0, r: int = 1,
               strict_above: bool = True) -> BarrierSpec:
    """Derive the full barrier geometry; rejects degenerate configurations."""
    if z < 8:
        raise ParameterError(f"z must be at least 8, got {z}")
    if r < 1:
        raise ParameterError("r must be a positive integer")
    for name, val in (("M", big_m), ("S", big_s), ("H", big_h)):
        if val <= 0:
            raise ParameterError(f"{name} must be positive")
    if not (0 <= u0 <= math.log(math.log(z))):
        raise ParameterError(f"u0={u0} outside [0, loglog z]")
    if not (0 <= v0 <= math.log(math.log(z * z))):
        raise ParameterError(f"v0={v0} outside [0, loglog z^2]")
    x = int(math.floor(z ** 1.5)) * r
    width = x // 10
    if width < 1:
        raise ParameterError(f"degenerate barrier: width {width}")
    mx = x + width
    x_prime = 2 * x + width
    x23 = icbrt23(x)
    mx23 = icbrt23(mx)
    xp23 = icbrt23(x_prime)
    h_wall = int(math.floor(2.0 * big_m * x23))
    s_wall = int(math.floor((2.0 * big_m + big_s) * x23))
    h3 = int(math.floor(2.0 * big_m * xp23))
    s3 = int(math.floor((2.0 * big_m + big_s) * xp23))
    if h_wall < 1 or s_wall < 1:
        raise ParameterError("degenerate barrier: walls of zero height")
    zr23 = icbrt23(z * r)
    z2r23 = icbrt23(z * z * r)
    ou = int(math.floor(u0 * zr23))
    ov = int(math.floor(v0 * z2r23))
    a1 = Vertex(z * r, z * r + ou)
    b1 = Vertex(z * r, z * r - ou)
    a2 = Vertex(z * z * r, z * z * r + ov)
    b2 = Vertex(z * z * r, z * z * r - ov)
    return BarrierSpec(z=z, r=r, big_m=big_m, big_s=big_s, big_h=big_h,
                       u0=u0, v0=v0, strict_above=strict_above,
                       x=x, width=width, mx=mx, x_prime=x_prime,
                       x23=x23, mx23=mx23, xp23=xp23,
                       h_wall=h_wall, s_wall=s_wall, h3=h3, s3=s3,
                       a1=a1, b1=b1, a2=a2, b2=b2)


def expected_time(u, v) -> float:
    """Asymptotic mean (sqrt(dx) + sqrt(dy))^2, lower-order term dropped."""
    dx = v[0] - u[0]
    dy = v[1] - u[1]
    return (math.sqrt(dx) + math.sqrt(dy)) ** 2


def centered_time(field: WeightField, u, v, mode: str = "mean") -> float:
    """T(u, v) centered by the asymptotic mean ('mean') or 2*d(u,v) ('l1').

    'mean' requires slope(u -> v) within [1/10, 10]; on the diagonal both
    centerings coincide exactly ((sqrt r + sqrt r)^2 = 4r = 2*d).
    """
    u, v = as_vertex(u), as_vertex(v)
    if not precedes(u, v):
        raise OrderError(f"{u} does not precede {v}")
    t = passage_time(field, u, v)
    dx = v.x - u.x
    dy = v.y - u.y
    if mode == "l1":
        return t - 2.0 * (dx + dy)
    if mode != "mean":
        raise DomainError(f"unknown centering mode {mode!r}")
    if dx == 0 or dy == 0 or not (1.0 / SLOPE_PSI <= dy / dx <= SLOPE_PSI):
        raise DomainError(f"slope of {u}->{v} outside [1/{SLOPE_PSI:g}, {SLOPE_PSI:g}]")
    return t - expected_time(u, v)


# ---------------------------------------------------------------------------
# wing condition
# ---------------------------------------------------------------------------


def _sq_table(n: int) -> np.ndarray:
    return np.sqrt(np.arange(n + 1, dtype=np.float64))


def wing_extrema(field: WeightField, spec: BarrierSpec):
    """(min, max) of the centered times of both wing clauses.

    Clause 1: a1 -> u over lattice points u of the left wall with a1 <= u;
    clause 2: u' -> v over u' on the right wall, v on L3, u' <= v.
    """
    a1 = spec.a1
    lo1, hi1 = spec.wall_left_ys()
    lo1 = max(lo1, a1.y)
    if lo1 > hi1 or a1.x > spec.x:
        c1 = (np.inf, -np.inf)
    else:
        surf = forward_surface(field, a1, Rect(a1.x, spec.x, a1.y, hi1))
        col = surf.values[lo1 - surf.rect.y_min: hi1 - surf.rect.y_min + 1,
                          spec.x - surf.rect.x_min].astype(np.float64)
        ys = np.arange(lo1, hi1 + 1, dtype=np.float64)
        mu = (math.sqrt(spec.x - a1.x) + np.sqrt(ys - a1.y)) ** 2
        cen = col - mu
        c1 = (float(cen.min()), float(cen.max()))
    lo2, hi2 = spec.wall_right_ys()
    lo3, hi3 = spec.l3_ys()
    y_base = min(lo2, lo3)
    y_top = max(hi2, hi3)
    nyw = y_top - y_base + 1
    nc = spec.x_prime - spec.mx + 1
    blk = field.materialize_block(Rect(spec.mx, spec.x_prime, y_base, y_top))
    wblk = np.ascontiguousarray(blk.T)
    src_js = np.arange(lo2 - y_base, hi2 - y_base + 1, dtype=np.int64)
    cnt = np.clip(np.arange(nyw, dtype=np.int64) - int(src_js[0]) + 1,
                  0, src_js.size)
    sqdy = _sq_table(nyw)
    vmin, vmax, pairs = _kernels.line_to_line_extrema(
        wblk, src_js, cnt, lo3 - y_base, hi3 - y_base,
        math.sqrt(nc - 1), nc - 1, sqdy, True)
    return c1, (float(vmin), float(vmax)), int(pairs)


def check_wing(field: WeightField, spec: BarrierSpec) -> bool:
    """G: centered wing passage times all within H sqrt(S) x^(1/3)."""
    thr = spec.big_h * math.sqrt(spec.big_s) * spec.x13
    (l1_min, l1_max), (l2_min, l2_max), _ = wing_extrema(field, spec)
    ok1 = (l1_min == np.inf) or (-thr <= l1_min and l1_max <= thr)
    ok2 = (l2_min == np.inf) or (-thr <= l2_min and l2_max <= thr)
    return bool(ok1 and ok2)


# ---------------------------------------------------------------------------
# typical path
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TypicalFlags:
    ltilde_ok: bool
    lhat_ok: bool
    dev_x_ok: bool
    dev_mx_ok: bool
    dev_xp_ok: bool
    contained_ok: bool

    @property
    def typical(self) -> bool:
        return (self.ltilde_ok and self.lhat_ok and self.dev_x_ok
                and self.dev_mx_ok and self.dev_xp_ok and self.contained_ok)


def _segment_between_columns(path: Path, c_from: int, c_to: int):
    """Slice of the path from (c_from, gamma(c_from)) to (c_to, gamma(c_to))."""
    xs = path.vertices[:, 0]
    ys = path.vertices[:, 1]
    i0 = int(np.flatnonzero((xs == c_from) & (ys == gamma_at(path, c_from)))[0])
    i1 = int(np.flatnonzero((xs == c_to) & (ys == gamma_at(path, c_to)))[0])
    return path.vertices[i0:i1 + 1]


def check_typical(field: WeightField, spec: BarrierSpec, path: Path) -> TypicalFlags:
    """The six typicality sub-conditions of a path from b1 to b2."""
    xs = path.vertices[:, 0]
    if xs[0] > spec.x or xs[-1] < spec.x_prime:
        raise DomainError("path does not span the columns x..x'")
    gx = gamma_at(path, spec.x)
    gmx = gamma_at(path, spec.mx)
    gxp = gamma_at(path, spec.x_prime)
    dev_x = abs(gx - spec.x) <= math.floor(spec.big_m * spec.x23)
    dev_mx = abs(gmx - spec.mx) <= math.floor(spec.big_m * spec.mx23)
    dev_xp = abs(gxp - spec.x_prime) <= math.floor(spec.big_m * spec.xp23)
    seg = _segment_between_columns(path, spec.x, spec.mx)
    in_cols = (path.vertices[:, 0] >= spec.x) & (path.vertices[:, 0] <= spec.mx)
    diag = path.vertices[in_cols, 1] - path.vertices[in_cols, 0]
    contained = bool((diag >= -spec.h_wall).all() and (diag <= spec.h_wall).all())
    lseg = float(_kernels.path_weight(field._h, seg[:, 0], seg[:, 1]))
    u = (spec.x, gx)
    v = (spec.mx, gmx)
    thr = spec.big_h * math.sqrt(spec.big_m) * spec.x13
    ltilde = lseg - expected_time(u, v)
    lhat = lseg - 2.0 * ((v[0] - u[0]) + (v[1] - u[1]))
    return TypicalFlags(
        ltilde_ok=bool(abs(ltilde) <= thr),
        lhat_ok=bool(abs(lhat) <= thr),
        dev_x_ok=bool(dev_x),
        dev_mx_ok=bool(dev_mx),
        dev_xp_ok=bool(dev_xp),
        contained_ok=contained,
    )


# ---------------------------------------------------------------------------
# path condition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PathConditionFlags:
    a1: bool
    a2: bool
    a3: bool
    reliable: bool

    @property
    def a_gamma(self) -> bool:
        return self.a1 and self.a2 and self.a3


def check_path_condition(field: WeightField, spec: BarrierSpec,
                         path: Path) -> PathConditionFlags:
    """A_gamma: high detours around the barrier lose to following gamma.

    F1/F2/F3 are the best a1 -> a2 paths forced above the barrier walls at
    x, mx, and above L3 at x', all staying (strictly, by default) above
    gamma on [x, mx]; A_i compares them against the best path that follows
    gamma through the barrier.  An infeasible detour makes its A_i vacuously
    true.  `reliable` records whether gamma met the geometric typicality
    conditions (the comparison is still reported otherwise).
    """
    gx = gamma_at(path, spec.x)
    gmx = gamma_at(path, spec.mx)
    seg = _segment_between_columns(path, spec.x, spec.mx)
    lseg = float(_kernels.path_weight(field._h, seg[:, 0], seg[:, 1]))
    t_follow = (passage_time(field, spec.a1, (spec.x, gx)) + lseg
                + passage_time(field, (spec.mx, gmx), spec.a2))
    cut = t_follow - math.sqrt(spec.big_s) * spec.x13
    above = Constraint.stay_above_path(path, spec.x, spec.mx,
                                       strict=spec.strict_above)
    heights = (
        (spec.x, spec.x + spec.s_wall + 1),
        (spec.mx, spec.mx + int(math.floor((2 * spec.big_m + spec.big_s) * spec.mx23)) + 1),
        (spec.x_prime, spec.x_prime + spec.s3 + 1),
    )
    flags = []
    for col, min_h in heights:
        res = constrained_passage_time(
            field, spec.a1, spec.a2,
            [Constraint.height_at_column(col, min_height=min_h), above])
        flags.append(True if res is None else bool(res[0] < cut))
    geo = check_typical(field, spec, path)
    reliable = geo.dev_x_ok and geo.dev_mx_ok and geo.dev_xp_ok and geo.contained_ok
    return PathConditionFlags(a1=flags[0], a2=flags[1], a3=flags[2],
                              reliable=bool(reliable))


# ---------------------------------------------------------------------------
# barrier condition
# ---------------------------------------------------------------------------


def barrier_condition_margin(field: WeightField, spec: BarrierSpec, path: Path):
    """(max of centered wall-to-wall avoid-gamma times, admissible pairs).

    Pairs are u on the left wall with (x, gamma(x)) <= u and u' on the right
    wall with (mx, gamma(mx)) <= u'; paths avoid gamma's vertices.
    """
    gx = gamma_at(path, spec.x)
    gmx = gamma_at(path, spec.mx)
    llo, lhi = spec.wall_left_ys()
    rlo, rhi = spec.wall_right_ys()
    llo = max(llo, gx)
    rlo = max(rlo, gmx)
    if llo > lhi or rlo > rhi:
        return -np.inf, 0
    y_base = min(llo, rlo)
    y_top = max(lhi, rhi)
    nyw = y_top - y_base + 1
    nc = spec.width + 1
    blk = field.materialize_block(Rect(spec.x, spec.mx, y_base, y_top))
    wblk = np.ascontiguousarray(blk.T)
    mask = np.zeros_like(wblk, dtype=np.uint8)
    pv = path.vertices
    sel = (pv[:, 0] >= spec.x) & (pv[:, 0] <= spec.mx) & \
          (pv[:, 1] >= y_base) & (pv[:, 1] <= y_top)
    mask[pv[sel, 0] - spec.x, pv[sel, 1] - y_base] = 1
    src_js = np.arange(llo - y_base, lhi - y_base + 1, dtype=np.int64)
    cnt = np.clip(np.arange(nyw, dtype=np.int64) - int(src_js[0]) + 1,
                  0, src_js.size)
    sqdy = _sq_table(nyw)
    vmax, pairs = _kernels.masked_line_to_line_max(
        wblk, mask, src_js, cnt, rlo - y_base, rhi - y_base,
        math.sqrt(nc - 1), nc - 1, sqdy)
    return float(vmax), int(pairs)


def check_barrier_condition(field: WeightField, spec: BarrierSpec,
                            path: Path) -> bool:
    """R_gamma: every admissible avoid-gamma wall crossing is below
    -S^4 x^(1/3) after centering (vacuously true with no admissible pair)."""
    vmax, _ = barrier_condition_margin(field, spec, path)
    return bool(vmax <= -(spec.big_s ** 4) * spec.x13)


# ---------------------------------------------------------------------------
# full trial
# ---------------------------------------------------------------------------


@dataclass
class TrialResult:
    flags_g: bool
    typical: TypicalFlags
    path_cond: PathConditionFlags
    flags_r: bool
    f_meet: bool
    meet_point: Vertex | None
    gamma0: Path
    gamma0_prime: Path

    @property
    def favourable(self) -> bool:
        """All four events hold (implies F_meet by the merging lemma)."""
        return (self.flags_g and self.typical.typical
                and self.path_cond.a_gamma and self.flags_r)

    def to_record(self, **extra) -> dict:
        rec = {
            "G": bool(self.flags_g),
            "typical": bool(self.typical.typical),
            "A1": bool(self.path_cond.a1),
            "A2": bool(self.path_cond.a2),
            "A3": bool(self.path_cond.a3),
            "A_gamma": bool(self.path_cond.a_gamma),
            "R": bool(self.flags_r),
            "F_meet": bool(self.f_meet),
            "favourable": bool(self.favourable),
            "meet": None if self.meet_point is None else [self.meet_point.x,
                                                          self.meet_point.y],
            "sub_flags": {
                "ltilde": self.typical.ltilde_ok,
                "lhat": self.typical.lhat_ok,
                "dev_x": self.typical.dev_x_ok,
                "dev_mx": self.typical.dev_mx_ok,
                "dev_xp": self.typical.dev_xp_ok,
                "contained": self.typical.contained_ok,
                "A_reliable": self.path_cond.reliable,
            },
        }
        rec.update(extra)
        return rec


def run_coalescence_trial(field: WeightField, spec: BarrierSpec) -> TrialResult:
    """Evaluate all favourable events and the meeting event on one field."""
    g0 = geodesic(field, spec.a1, spec.a2)
    g0p = geodesic(field, spec.b1, spec.b2)
    meet = coalescence_point(g0, g0p)
    typ = check_typical(field, spec, g0p)
    pc = check_path_condition(field, spec, g0p)
    rg = check_barrier_condition(field, spec, g0p)
    wg = check_wing(field, spec)
    return TrialResult(flags_g=wg, typical=typ, path_cond=pc, flags_r=rg,
                       f_meet=meet is not None, meet_point=meet,
                       gamma0=g0, gamma0_prime=g0p)
