"""Numba kernels: counter-based weights and the dynamic-programming sweeps.

Everything here is deterministic and single-threaded.  Each cell weight is a
pure function of (seed, replicate, x, y): a SplitMix64-style mixer produces 64
random bits per lattice cell, the top 53 bits (low bit forced to 1 so that
U is strictly inside (0,1) and 1-U is exact) give a uniform U, and the weight
is -ln(1-U), i.e. Exp(1) by inverse CDF.

The logarithm is evaluated by a fixed branch-free polynomial (exponent/mantissa
split plus a degree-16 Chebyshev fit of ln(1+f)/f on [0,1], with a separate
small-u path that keeps full relative accuracy as U -> 0).  A hand-rolled log
is used instead of libm so that bulk sweeps auto-vectorize; scalar queries run
the same code path, so per-cell values are bit-identical everywhere they are
produced.  Agreement with libm is ~1e-13 relative (checked in the test suite).

Forward sweeps propagate the inclusive sum S(v) = xi_v + max over predecessors
of S, and store the exclusive passage time T(v) = max(S(v-e1), S(v-e2)), which
is exactly the path-ordered sum of the argmax path.  Backward sweeps store
T(v) = xi_v + max(T(v+e1), T(v+e2)) directly (T at the sink is 0).  Direction
bits (1 = horizontal move wins, ties horizontal) are recorded so geodesics can
be traced without keeping value grids.
"""

import numpy as np
from llvmlite import ir
from numba import int64, njit, types, uint64
from numba.extending import intrinsic

NEG_INF = -np.inf

# SplitMix64 constants
_GOLD = uint64(0x9E3779B97F4A7C15)
_MIX_A = uint64(0xBF58476D1CE4E5B9)
_MIX_B = uint64(0x94D049BB133111EB)
# odd multipliers decorrelating the two counter words
_MX = uint64(0xD6E8FEB86659FD93)
_MY = uint64(0xCA5A826395121157)

_LN2_HI = 6.93147180369123816490e-01
_LN2_LO = 1.90821492927058770002e-10
_INV_2_53 = 1.0 / 9007199254740992.0
_W_FLOOR = 2.0 ** -70  # defensive; unreachable for valid inputs

# Chebyshev fit of ln(1+f)/f on [0,1], degree 16 (max rel err 1.5e-14)
_C = (
    0.99999999999998538584, -0.49999999999153941467, 0.33333333251454840025,
    -0.24999996842330872277, 0.19999935431561236255, -0.16665858790762875786,
    0.14278979964022669454, -0.12460465372909532315, 0.10941231693176749553,
    -0.094503698734114305268, 0.0772169490247565974, -0.056539701347161546139,
    0.034836716935024871125, -0.01685108185767947649, 0.0058808557302412989355,
    -0.0013000593119805038712, 0.00013560677029783149874,
)
# Chebyshev fit of -ln(1-u)/u on [0, 1/32], degree 7 (max rel err 4e-18)
_D = (
    0.99999999999999999654, 0.50000000000001415103, 0.33333333332383450207,
    0.25000000242640627938, 0.19999969607632108859, 0.16668728994145312475,
    0.1420854323413293255, 0.13986746737391234125,
)
_SMALL_U = 0.03125


@intrinsic
def _f64_bits(typingctx, val):
    sig = types.uint64(types.float64)

    def codegen(context, builder, signature, args):
        return builder.bitcast(args[0], ir.IntType(64))

    return sig, codegen


@intrinsic
def _bits_f64(typingctx, val):
    sig = types.float64(types.uint64)

    def codegen(context, builder, signature, args):
        return builder.bitcast(args[0], ir.DoubleType())

    return sig, codegen


@njit(inline="always")
def _mix(z):
    z = (z ^ (z >> uint64(30))) * _MIX_A
    z = (z ^ (z >> uint64(27))) * _MIX_B
    return z ^ (z >> uint64(31))


@njit(cache=True)
def field_hash(seed, replicate):
    """64-bit stream key for one (seed, replicate) pair."""
    return _mix(_mix(uint64(seed) + _GOLD) + uint64(replicate))


@njit(inline="always")
def _cell_bits(h, x, y):
    return _mix(h + uint64(x) * _MX + uint64(y) * _MY)


@njit(inline="always")
def _ln_w(u):
    """-ln(1-u) for exact multiples of 2^-53 in (0,1)."""
    w = 1.0 - u  # exact: both operands are multiples of 2^-53 in (0,1)
    b = _f64_bits(w)
    e = np.float64(int64(b >> uint64(52)) - 1023)
    m = _bits_f64((b & uint64(0x000FFFFFFFFFFFFF)) | uint64(0x3FF0000000000000))
    f = m - 1.0
    f2 = f * f
    pe = _C[16]
    pe = pe * f2 + _C[14]
    pe = pe * f2 + _C[12]
    pe = pe * f2 + _C[10]
    pe = pe * f2 + _C[8]
    pe = pe * f2 + _C[6]
    pe = pe * f2 + _C[4]
    pe = pe * f2 + _C[2]
    pe = pe * f2 + _C[0]
    po = _C[15]
    po = po * f2 + _C[13]
    po = po * f2 + _C[11]
    po = po * f2 + _C[9]
    po = po * f2 + _C[7]
    po = po * f2 + _C[5]
    po = po * f2 + _C[3]
    po = po * f2 + _C[1]
    lnm = f * (pe + f * po)
    r = -(e * _LN2_HI + (lnm + e * _LN2_LO))
    # near u -> 0 the exponent path cancels; a short series in u is exact there
    q = _D[7]
    q = q * u + _D[6]
    q = q * u + _D[5]
    q = q * u + _D[4]
    q = q * u + _D[3]
    q = q * u + _D[2]
    q = q * u + _D[1]
    q = q * u + _D[0]
    if u < _SMALL_U:
        r = u * q
    return max(r, _W_FLOOR)


@njit(inline="always")
def _expw(z):
    # uniform on the odd multiples of 2^-53 in (0,1)
    u = np.float64((z >> uint64(11)) | uint64(1)) * _INV_2_53
    return _ln_w(u)


@njit(cache=True)
def cell_weight(h, x, y):
    """Exp(1) weight of cell (x, y) under stream key h."""
    return _expw(_cell_bits(h, int64(x), int64(y)))


@njit(cache=True)
def uniform_at(h, x, y):
    """The uniform U behind cell_weight (diagnostics/tests)."""
    z = _cell_bits(h, int64(x), int64(y))
    return np.float64((z >> uint64(11)) | uint64(1)) * _INV_2_53


@njit(cache=True)
def uniform_to_weight(u):
    """Inverse-CDF map U -> -ln(1-U), same code path as the bulk kernels."""
    return _ln_w(u)


@njit(inline="always")
def _weights_row(h, x0, y, nx, out):
    hy = uint64(y) * _MY
    for i in range(nx):
        z = _mix(h + uint64(x0 + i) * _MX + hy)
        out[i] = _expw(z)


@njit(cache=True)
def fill_weights(h, x0, y0, out):
    """Dense weight block; out[iy, ix] = weight at (x0+ix, y0+iy)."""
    ny, nx = out.shape
    for iy in range(ny):
        _weights_row(h, x0, y0 + iy, nx, out[iy])


@njit(cache=True)
def weights_at(h, xs, ys, out):
    for i in range(xs.size):
        out[i] = cell_weight(h, xs[i], ys[i])


@njit(cache=True)
def path_weight(h, xs, ys):
    """Sum of weights over vertices except the last one."""
    s = 0.0
    for i in range(xs.size - 1):
        s += cell_weight(h, xs[i], ys[i])
    return s


# ---------------------------------------------------------------------------
# forward sweeps (source at the lower-left corner of the rectangle)
# ---------------------------------------------------------------------------


@njit(cache=True)
def fwd_sweep(h, x0, y0, nx, ny, out, bits, store_vals):
    """Forward surface from (x0, y0) over [x0, x0+nx) x [y0, y0+ny).

    out[iy, ix] = exclusive passage time T when store_vals is true; bits are
    always filled (bit = 1 when the left predecessor wins).  Returns T at the
    far corner.
    """
    words = (nx + 63) >> 6
    w = np.empty(nx, np.float64)
    prev = np.empty(nx, np.float64)
    cur = np.empty(nx, np.float64)
    _weights_row(h, x0, y0, nx, w)
    s = 0.0
    t_corner = 0.0
    for i in range(nx):
        if store_vals:
            out[0, i] = s
        t_corner = s
        s += w[i]
        prev[i] = s
    for k in range(words):
        bits[k] = uint64(0xFFFFFFFFFFFFFFFF)
    for iy in range(1, ny):
        _weights_row(h, x0, y0 + iy, nx, w)
        base = iy * words
        left = NEG_INF
        acc = uint64(0)
        nb = 0
        kw = base
        for i in range(nx):
            m = prev[i]
            g = left >= m
            if g:
                m = left
            if store_vals:
                out[iy, i] = m
            left = m + w[i]
            cur[i] = left
            acc |= uint64(g) << uint64(nb)
            nb += 1
            if nb == 64:
                bits[kw] = acc
                kw += 1
                acc = uint64(0)
                nb = 0
            if i == nx - 1:
                t_corner = m
        if nb > 0:
            bits[kw] = acc
        t = prev
        prev = cur
        cur = t
    return t_corner


@njit(cache=True)
def fwd_sweep_masked(h, x0, y0, nx, ny, mask, out, bits):
    """Forward surface with forbidden cells (mask != 0 -> -inf).

    out[iy, ix] = exclusive T (-inf where unreachable or forbidden).
    Returns T at the far corner.
    """
    words = (nx + 63) >> 6
    w = np.empty(nx, np.float64)
    prev = np.empty(nx, np.float64)
    cur = np.empty(nx, np.float64)
    _weights_row(h, x0, y0, nx, w)
    s = NEG_INF  # inclusive S of the cell to the left
    for i in range(nx):
        t_here = s if i > 0 else 0.0
        if mask[0, i] != 0 or t_here == NEG_INF:
            out[0, i] = NEG_INF
            s = NEG_INF
        else:
            out[0, i] = t_here
            s = t_here + w[i]
        prev[i] = s
    for k in range(words):
        bits[k] = uint64(0xFFFFFFFFFFFFFFFF)
    for iy in range(1, ny):
        _weights_row(h, x0, y0 + iy, nx, w)
        base = iy * words
        left = NEG_INF
        acc = uint64(0)
        nb = 0
        kw = base
        for i in range(nx):
            m = prev[i]
            g = left >= m
            if g:
                m = left
            if mask[iy, i] != 0 or m == NEG_INF:
                out[iy, i] = NEG_INF
                left = NEG_INF
            else:
                out[iy, i] = m
                left = m + w[i]
            cur[i] = left
            acc |= uint64(g) << uint64(nb)
            nb += 1
            if nb == 64:
                bits[kw] = acc
                kw += 1
                acc = uint64(0)
                nb = 0
        if nb > 0:
            bits[kw] = acc
        t = prev
        prev = cur
        cur = t
    return out[ny - 1, nx - 1]


@njit(cache=True)
def fwd_scalar(h, x0, y0, dx, dy):
    """T from (x0, y0) to (x0+dx, y0+dy) with O(dx) memory."""
    nx = dx + 1
    w = np.empty(nx, np.float64)
    row = np.empty(nx, np.float64)
    _weights_row(h, x0, y0, nx, w)
    s = 0.0
    t_last = 0.0
    for i in range(nx):
        t_last = s
        s += w[i]
        row[i] = s
    for iy in range(1, dy + 1):
        _weights_row(h, x0, y0 + iy, nx, w)
        left = NEG_INF
        for i in range(nx):
            m = row[i]
            if left >= m:
                m = left
            left = m + w[i]
            row[i] = left
            if i == nx - 1:
                t_last = m
    return t_last


@njit(cache=True)
def fwd_sweep_ckpt(h, x0, y0, nx, ny, block, ck):
    """Forward sweep retaining inclusive-S rows iy = 0, block, 2*block, ...

    ck has shape (1 + (ny-1)//block, nx).  Returns T at the far corner.
    """
    w = np.empty(nx, np.float64)
    prev = np.empty(nx, np.float64)
    cur = np.empty(nx, np.float64)
    _weights_row(h, x0, y0, nx, w)
    s = 0.0
    t_corner = 0.0
    for i in range(nx):
        t_corner = s
        s += w[i]
        prev[i] = s
    ck[0] = prev
    for iy in range(1, ny):
        _weights_row(h, x0, y0 + iy, nx, w)
        left = NEG_INF
        for i in range(nx):
            m = prev[i]
            if left >= m:
                m = left
            left = m + w[i]
            cur[i] = left
            if i == nx - 1:
                t_corner = m
        t = prev
        prev = cur
        cur = t
        if iy % block == 0:
            ck[iy // block] = prev
    return t_corner


@njit(cache=True)
def _fwd_block(h, x0, y0, width, iy_from, nrows, init, out):
    """Recompute inclusive-S rows iy_from+1 .. iy_from+nrows from row iy_from.

    Only the first `width` columns are computed (column truncation is exact:
    S(x, y) never depends on cells to the right).
    """
    w = np.empty(width, np.float64)
    for r in range(nrows):
        iy = iy_from + 1 + r
        _weights_row(h, x0, y0 + iy, width, w)
        left = NEG_INF
        if r == 0:
            for i in range(width):
                m = init[i]
                if left >= m:
                    m = left
                left = m + w[i]
                out[0, i] = left
        else:
            for i in range(width):
                m = out[r - 1, i]
                if left >= m:
                    m = left
                left = m + w[i]
                out[r, i] = left
    return


@njit(cache=True)
def trace_ckpt_fwd(h, x0, y0, nx, ny, block, ck, ex, ey, steps):
    """Traceback on a checkpointed forward surface.

    steps[k] = 1 if the k-th backward move (from (ex, ey) toward (0, 0)) is
    horizontal.  Returns the number of steps.
    """
    scratch = np.empty((block, nx), np.float64)
    x = ex
    y = ey
    n = 0
    while y > 0:
        # decisions at height y need S rows y and y-1; recompute the block
        # of rows (base, y] from checkpoint row base = floor((y-1)/block)*block
        kb = (y - 1) // block
        base = kb * block
        nrows = y - base
        width = x + 1
        _fwd_block(h, x0, y0, width, base, nrows, ck[kb, :width], scratch[:, :width])
        while y > base:
            if x == 0:
                g = False
            else:
                # S(x-1, y) on row y, S(x, y-1) on row y-1
                s_left = scratch[y - base - 1, x - 1]
                if y - 1 == base:
                    s_down = ck[kb, x]
                else:
                    s_down = scratch[y - 1 - base - 1, x]
                g = s_left >= s_down
            if g:
                x -= 1
            else:
                y -= 1
            steps[n] = 1 if g else 0
            n += 1
            if y == 0:
                break
    while x > 0:
        steps[n] = 1
        n += 1
        x -= 1
    return n


@njit(cache=True)
def trace_bits_fwd(bits, nx, ny, ex, ey, steps):
    """Walk predecessor bits from grid index (ex, ey) back to (0, 0).

    steps[k] = 1 if the k-th backward move is horizontal. Returns step count.
    """
    words = (nx + 63) >> 6
    x = ex
    y = ey
    n = 0
    while x > 0 or y > 0:
        if y == 0:
            g = True
        elif x == 0:
            g = False
        else:
            g = (bits[y * words + (x >> 6)] >> uint64(x & 63)) & uint64(1) != uint64(0)
        if g:
            x -= 1
        else:
            y -= 1
        steps[n] = 1 if g else 0
        n += 1
    return n


# ---------------------------------------------------------------------------
# backward sweeps (sink at the upper-right corner of the rectangle)
# ---------------------------------------------------------------------------


@njit(cache=True)
def bwd_sweep(h, x0, y0, nx, ny, out, bits, store_vals):
    """Backward surface: out[iy, ix] = T from (x0+ix, y0+iy) to the corner.

    T(v) = xi_v + max(T(v+e1), T(v+e2)), T(corner) = 0.  bits get 1 where the
    horizontal successor wins (ties horizontal).  Returns T at (x0, y0).
    """
    words = (nx + 63) >> 6
    w = np.empty(nx, np.float64)
    prev = np.empty(nx, np.float64)
    cur = np.empty(nx, np.float64)
    top = ny - 1
    _weights_row(h, x0, y0 + top, nx, w)
    prev[nx - 1] = 0.0
    if store_vals:
        out[top, nx - 1] = 0.0
    for i in range(nx - 2, -1, -1):
        prev[i] = w[i] + prev[i + 1]
        if store_vals:
            out[top, i] = prev[i]
    base = top * words
    for k in range(words):
        bits[base + k] = uint64(0xFFFFFFFFFFFFFFFF)
    for iy in range(top - 1, -1, -1):
        _weights_row(h, x0, y0 + iy, nx, w)
        base = iy * words
        for k in range(words):
            bits[base + k] = uint64(0)
        right = NEG_INF
        for i in range(nx - 1, -1, -1):
            m = prev[i]
            g = right >= m
            if g:
                m = right
                bits[base + (i >> 6)] |= uint64(1) << uint64(i & 63)
            right = m + w[i]
            cur[i] = right
        if store_vals:
            for i in range(nx):
                out[iy, i] = cur[i]
        t = prev
        prev = cur
        cur = t
    return prev[0]


@njit(cache=True)
def bwd_sweep_masked(h, x0, y0, nx, ny, mask, out, bits):
    """Backward surface with forbidden cells (mask != 0 -> -inf)."""
    words = (nx + 63) >> 6
    w = np.empty(nx, np.float64)
    prev = np.empty(nx, np.float64)
    cur = np.empty(nx, np.float64)
    top = ny - 1
    _weights_row(h, x0, y0 + top, nx, w)
    prev[nx - 1] = NEG_INF if mask[top, nx - 1] != 0 else 0.0
    out[top, nx - 1] = prev[nx - 1]
    for i in range(nx - 2, -1, -1):
        if mask[top, i] != 0 or prev[i + 1] == NEG_INF:
            prev[i] = NEG_INF
        else:
            prev[i] = w[i] + prev[i + 1]
        out[top, i] = prev[i]
    base = top * words
    for k in range(words):
        bits[base + k] = uint64(0xFFFFFFFFFFFFFFFF)
    for iy in range(top - 1, -1, -1):
        _weights_row(h, x0, y0 + iy, nx, w)
        base = iy * words
        for k in range(words):
            bits[base + k] = uint64(0)
        right = NEG_INF
        for i in range(nx - 1, -1, -1):
            m = prev[i]
            g = right >= m
            if g:
                m = right
                bits[base + (i >> 6)] |= uint64(1) << uint64(i & 63)
            if mask[iy, i] != 0 or m == NEG_INF:
                right = NEG_INF
            else:
                right = m + w[i]
            cur[i] = right
            out[iy, i] = right
        t = prev
        prev = cur
        cur = t
    return prev[0]


@njit(cache=True)
def trace_bits_bwd(bits, nx, ny, sx, sy, steps):
    """Walk successor bits from grid index (sx, sy) to the sink corner.

    steps[k] = 1 for a horizontal (+x) move. Returns step count.
    """
    words = (nx + 63) >> 6
    x = sx
    y = sy
    n = 0
    while x < nx - 1 or y < ny - 1:
        if y == ny - 1:
            g = True
        elif x == nx - 1:
            g = False
        else:
            g = (bits[y * words + (x >> 6)] >> uint64(x & 63)) & uint64(1) != uint64(0)
        if g:
            x += 1
        else:
            y += 1
        steps[n] = 1 if g else 0
        n += 1
    return n


# ---------------------------------------------------------------------------
# strip-restricted backward engine for semi-infinite approximations
# ---------------------------------------------------------------------------


@njit(cache=True)
def bwd_strip_sweep(h, y_min, n_target, xl, xh, block, ck_vals, ck_off):
    """Backward sweep from (n_target, n_target) on a widening diagonal strip.

    Row y (y_min <= y <= n_target, index iy = y - y_min) spans columns
    [xl[iy], xh[iy]]; cells outside the window act as -inf.  Rows with
    (n_target - y) % block == 0 are stored in ck_vals at ck_off[(n-y)/block].
    """
    iy = n_target - y_min
    lo = xl[iy]
    hi = xh[iy]
    nw = hi - lo + 1
    wmax = 0
    for j in range(n_target - y_min + 1):
        ww = xh[j] - xl[j] + 1
        if ww > wmax:
            wmax = ww
    w = np.empty(wmax, np.float64)
    prev = np.empty(wmax, np.float64)
    cur = np.empty(wmax, np.float64)
    _weights_row(h, lo, n_target, nw, w)
    prev[nw - 1] = 0.0
    for i in range(nw - 2, -1, -1):
        prev[i] = w[i] + prev[i + 1]
    ck = ck_off[0]
    for i in range(nw):
        ck_vals[ck + i] = prev[i]
    for y in range(n_target - 1, y_min - 1, -1):
        iy = y - y_min
        lo = xl[iy]
        hi = xh[iy]
        nw = hi - lo + 1
        up_lo = xl[iy + 1]
        up_hi = xh[iy + 1]
        _weights_row(h, lo, y, nw, w)
        right = NEG_INF
        for i in range(nw - 1, -1, -1):
            x = lo + i
            m = NEG_INF
            if up_lo <= x <= up_hi:
                m = prev[x - up_lo]
            if right >= m:
                m = right
            if m == NEG_INF:
                right = NEG_INF
            else:
                right = m + w[i]
            cur[i] = right
        d = n_target - y
        if d % block == 0:
            ck = ck_off[d // block]
            for i in range(nw):
                ck_vals[ck + i] = cur[i]
        t = prev
        prev = cur
        cur = t
    return


@njit(cache=True)
def _bwd_strip_block(h, y_min, xl, xh, y_top, nrows, top_vals, scratch):
    """Recompute backward rows y_top-1 .. y_top-nrows below a stored row.

    scratch[r] holds row y_top-1-r over that row's own window.
    """
    wmax = scratch.shape[1]
    w = np.empty(wmax, np.float64)
    for r in range(nrows):
        y = y_top - 1 - r
        iy = y - y_min
        lo = xl[iy]
        hi = xh[iy]
        nw = hi - lo + 1
        up_lo = xl[iy + 1]
        up_hi = xh[iy + 1]
        _weights_row(h, lo, y, nw, w)
        right = NEG_INF
        for i in range(nw - 1, -1, -1):
            x = lo + i
            m = NEG_INF
            if up_lo <= x <= up_hi:
                if r == 0:
                    m = top_vals[x - up_lo]
                else:
                    m = scratch[r - 1, x - up_lo]
            if right >= m:
                m = right
            if m == NEG_INF:
                right = NEG_INF
            else:
                right = m + w[i]
            scratch[r, i] = right
    return


@njit(cache=True)
def bwd_strip_trace(h, y_min, n_target, xl, xh, x_hard_lo, block, ck_vals, ck_off,
                    src_x, src_y, horizon, xs_out, wsum_out, flags_out):
    """Trace geodesics from the sources up to the line x+y = horizon.

    xs_out[s, d] = x-coordinate of the path of source s on the anti-diagonal
    x+y = d, for src_x[s]+src_y[s] <= d <= horizon (earlier entries untouched).
    wsum_out[s] = weight of the prefix excluding its final vertex.
    flags_out[s]: bit 1 = trace touched the soft strip boundary (window edges
    other than the exact cone clamps at x_hard_lo and n_target; unreliable),
    bit 2 = internal -inf (fatal; should not happen).
    """
    ns = src_x.size
    ny = n_target - y_min + 1
    wmax = 0
    for j in range(ny):
        ww = xh[j] - xl[j] + 1
        if ww > wmax:
            wmax = ww
    scratch = np.empty((block, wmax), np.float64)
    cx = np.empty(ns, np.int64)
    cy = np.empty(ns, np.int64)
    alive = np.zeros(ns, np.uint8)
    n_alive = 0
    for s in range(ns):
        cx[s] = src_x[s]
        cy[s] = src_y[s]
        wsum_out[s] = 0.0
        flags_out[s] = 0
        d0 = src_x[s] + src_y[s]
        xs_out[s, d0] = src_x[s]
        if d0 < horizon:
            alive[s] = 1
            n_alive += 1
    if n_alive == 0:
        return
    n_stored = (n_target - y_min) // block  # stored rows: n_target - k*block
    # walk regions upward; each region [y_lo, y_top] has a stored top row
    y_lo = y_min
    k = n_stored
    while k >= 0 and n_alive > 0:
        y_top = n_target - k * block
        if y_top <= y_lo:
            k -= 1
            continue
        any_here = False
        for s in range(ns):
            if alive[s] and y_lo <= cy[s] < y_top:
                any_here = True
                break
        if not any_here:
            y_lo = y_top
            k -= 1
            continue
        off = ck_off[(n_target - y_top) // block]
        iy_top = y_top - y_min
        top_vals = ck_vals[off:off + (xh[iy_top] - xl[iy_top] + 1)]
        nrows = y_top - y_lo
        _bwd_strip_block(h, y_min, xl, xh, y_top, nrows, top_vals, scratch)
        for s in range(ns):
            if not alive[s]:
                continue
            x = cx[s]
            y = cy[s]
            if not (y_lo <= y < y_top):
                continue
            while True:
                d = x + y
                if d >= horizon:
                    alive[s] = 0
                    n_alive -= 1
                    break
                iy = y - y_min
                lo = xl[iy]
                hi = xh[iy]
                if (x <= lo + 1 and lo > x_hard_lo) or (x >= hi - 1 and hi < n_target):
                    flags_out[s] |= 1
                # candidate values at (x+1, y) and (x, y+1)
                t_right = NEG_INF
                if x + 1 <= hi:
                    t_right = scratch[y_top - 1 - y, x + 1 - lo]
                t_up = NEG_INF
                iyu = iy + 1
                lou = xl[iyu]
                hiu = xh[iyu]
                if lou <= x <= hiu:
                    if y + 1 == y_top:
                        t_up = top_vals[x - lou]
                    else:
                        t_up = scratch[y_top - 1 - (y + 1), x - lou]
                if t_right == NEG_INF and t_up == NEG_INF:
                    flags_out[s] |= 2
                    alive[s] = 0
                    n_alive -= 1
                    break
                wsum_out[s] += cell_weight(h, x, y)
                if t_right >= t_up:
                    x += 1
                else:
                    y += 1
                xs_out[s, x + y] = x
                if y >= y_top:
                    break
            cx[s] = x
            cy[s] = y
        y_lo = y_top
        k -= 1
    return


# ---------------------------------------------------------------------------
# line-to-line passage tensors for the barrier events
# ---------------------------------------------------------------------------


@njit(cache=True)
def line_to_line_extrema(wblk, src_js, cnt, snk_lo, snk_hi, sqdx, dx_total,
                         sqdy, need_min):
    """Extrema of T - mu over source/sink pairs on two vertical walls.

    wblk[c, j] = weight at column c, row j of the working window; sources sit
    on column 0 at rows src_js (ascending), sinks on the last column at rows
    snk_lo..snk_hi.  cnt[j] = number of sources with row <= j.  For each pair
    with sink row >= source row, T is the endpoint-exclusive passage time and
    mu = dx + dy + 2*sqrt(dx)*sqrt(dy) (sqdy[dy] precomputed).  Returns
    (min, max, pairs) over pairs; min is skipped when need_min is false.
    """
    nc, nyw = wblk.shape
    ns = src_js.size
    M = np.full((nyw, ns), NEG_INF, np.float64)
    p = 0.0
    psum = np.empty(nyw + 1, np.float64)
    psum[0] = 0.0
    for j in range(nyw):
        p += wblk[0, j]
        psum[j + 1] = p
    for s in range(ns):
        j0 = src_js[s]
        for j in range(j0, nyw):
            M[j, s] = psum[j + 1] - psum[j0]
    ty = 64
    rowbuf = np.full((nc, ns), NEG_INF, np.float64)
    for jt in range(0, nyw, ty):
        jend = min(jt + ty, nyw)
        for c in range(1, nc):
            wc = wblk[c]
            for j in range(jt, jend):
                na = cnt[j]
                w = wc[j]
                if j == jt:
                    below = rowbuf[c]
                    for s in range(na):
                        m = M[j, s]
                        b = below[s]
                        if b > m:
                            m = b
                        if m > NEG_INF:
                            M[j, s] = m + w
                        else:
                            M[j, s] = NEG_INF
                else:
                    for s in range(na):
                        m = M[j, s]
                        b = M[j - 1, s]
                        if b > m:
                            m = b
                        if m > NEG_INF:
                            M[j, s] = m + w
                        else:
                            M[j, s] = NEG_INF
            for s in range(ns):
                rowbuf[c, s] = M[jend - 1, s]
    vmin = np.inf
    vmax = NEG_INF
    pairs = 0
    fdx = np.float64(dx_total)
    for j in range(snk_lo, snk_hi + 1):
        wlast = wblk[nc - 1, j]
        na = cnt[j]
        for s in range(na):
            t = M[j, s] - wlast
            dy = j - src_js[s]
            mu = fdx + np.float64(dy) + 2.0 * sqdx * sqdy[dy]
            v = t - mu
            pairs += 1
            if v > vmax:
                vmax = v
            if need_min and v < vmin:
                vmin = v
    return vmin, vmax, pairs


@njit(cache=True)
def masked_line_to_line_max(wblk, mask, src_js, cnt, snk_lo, snk_hi, sqdx,
                            dx_total, sqdy):
    """Max of T - mu over wall pairs when paths must avoid masked cells.

    Same geometry as line_to_line_extrema; mask[c, j] != 0 makes a cell
    unusable.  Pairs with no admissible path contribute nothing.  Returns
    (max, admissible pairs with finite T).
    """
    nc, nyw = wblk.shape
    ns = src_js.size
    M = np.full((nyw, ns), NEG_INF, np.float64)
    for s in range(ns):
        j0 = src_js[s]
        run = 0.0
        alive = True
        for j in range(j0, nyw):
            if mask[0, j] != 0:
                alive = False
            if not alive:
                M[j, s] = NEG_INF
            else:
                run += wblk[0, j]
                M[j, s] = run
    for c in range(1, nc):
        wc = wblk[c]
        for j in range(nyw):
            na = cnt[j]
            w = wc[j]
            bad = mask[c, j] != 0
            if j == 0:
                for s in range(na):
                    m = M[j, s]
                    if bad or m == NEG_INF:
                        M[j, s] = NEG_INF
                    else:
                        M[j, s] = m + w
            else:
                for s in range(na):
                    m = M[j, s]
                    b = M[j - 1, s]
                    if b > m:
                        m = b
                    if bad or m == NEG_INF:
                        M[j, s] = NEG_INF
                    else:
                        M[j, s] = m + w
    vmax = NEG_INF
    pairs = 0
    fdx = np.float64(dx_total)
    for j in range(snk_lo, snk_hi + 1):
        wlast = wblk[nc - 1, j]
        na = cnt[j]
        for s in range(na):
            mv = M[j, s]
            if mv == NEG_INF:
                continue
            t = mv - wlast
            dy = j - src_js[s]
            mu = fdx + np.float64(dy) + 2.0 * sqdx * sqdy[dy]
            v = t - mu
            pairs += 1
            if v > vmax:
                vmax = v
    return vmax, pairs
