"""Jitted inner loops: walk sampling, loop erasure, slit-map zipping, ODE."""

from __future__ import annotations

import numpy as np
from numba import njit

# walk kernels use numba's internal RNG; each call seeds it explicitly so
# results are a pure function of (arrays, seed).


@njit(cache=True)
def absorb_batch(indptr, targets, cdf, absorbing, edge_absorbing, starts, seed, max_steps):
    """Run one walk per start until it traverses an absorbing edge or lands
    on an absorbing vertex.  Returns (exit_slot, steps); exit_slot is the CSR
    slot of the final edge, -1 when max_steps was exhausted."""
    np.random.seed(seed)
    n = len(starts)
    exit_slot = np.full(n, -1, dtype=np.int64)
    steps = np.zeros(n, dtype=np.int64)
    for i in range(n):
        u = starts[i]
        k = 0
        while k < max_steps:
            r = np.random.random()
            slot = indptr[u]
            while cdf[slot] < r:
                slot += 1
            v = targets[slot]
            k += 1
            if edge_absorbing[slot] or absorbing[v]:
                exit_slot[i] = slot
                break
            u = v
        steps[i] = k
    return exit_slot, steps


@njit(cache=True)
def sample_path(indptr, targets, cdf, absorbing, start, seed, buf):
    """Record one walk from start until absorption into buf.  Returns the
    number of vertices written, or -1 if buf was too small."""
    np.random.seed(seed)
    buf[0] = start
    m = 1
    u = start
    while True:
        if m >= len(buf):
            return -1
        r = np.random.random()
        slot = indptr[u]
        while cdf[slot] < r:
            slot += 1
        v = targets[slot]
        buf[m] = v
        m += 1
        if absorbing[v]:
            return m
        u = v


@njit(cache=True)
def loop_erase_inplace(path, m, pos, out):
    """Chronological loop erasure of path[:m] into out; pos is a scratch
    array (all -1, size >= max vertex id + 1) restored before returning.
    Returns the erased length."""
    t = 0
    for i in range(m):
        v = path[i]
        j = pos[v]
        if j >= 0:
            for k in range(j + 1, t):
                pos[out[k]] = -1
            t = j + 1
        else:
            out[t] = v
            pos[v] = t
            t += 1
    for k in range(t):
        pos[out[k]] = -1
    return t


@njit(cache=True)
def lerw_batch(indptr, targets, cdf, absorbing, starts, seed, n_samples,
               reverse_before_erase, pos, out_flat, out_offsets, raw_buf, erase_buf):
    """Sample n_samples conditioned walks (start vertices pre-drawn in
    `starts`), loop-erase each (optionally after time reversal), and pack
    the erased paths into out_flat/out_offsets.  Returns total length used,
    or -1 on buffer overflow."""
    np.random.seed(seed)
    total = 0
    for i in range(n_samples):
        u = starts[i]
        raw_buf[0] = u
        m = 1
        while True:
            if m >= len(raw_buf):
                return -1
            r = np.random.random()
            slot = indptr[u]
            while cdf[slot] < r:
                slot += 1
            v = targets[slot]
            raw_buf[m] = v
            m += 1
            if absorbing[v]:
                break
            u = v
        if reverse_before_erase:
            for k in range(m // 2):
                tmp = raw_buf[k]
                raw_buf[k] = raw_buf[m - 1 - k]
                raw_buf[m - 1 - k] = tmp
        t = loop_erase_inplace(raw_buf, m, pos, erase_buf)
        if total + t > len(out_flat):
            return -1
        for k in range(t):
            out_flat[total + k] = erase_buf[k]
        total += t
        out_offsets[i + 1] = total
    return total


@njit(cache=True, inline="always")
def _sqrt_up(z):
    s = np.sqrt(z)
    if s.imag < 0.0:
        s = -s
    return s


@njit(cache=True)
def zip_extract(pts, stop_time, y_tol, neg_tol):
    """Chordal driving extraction by vertical-slit maps.

    pts[0] must be (snapped) real; each subsequent point contributes a slit
    at its mapped tip x+iy with driving value x and capacity increment
    y^2/4.  Returns (times, values, count, flag): flag 0 ok, 1 if a point
    left the closed upper half-plane (not simple / outside H).
    """
    n = len(pts)
    w = pts.copy()
    times = np.empty(n, dtype=np.float64)
    vals = np.empty(n, dtype=np.float64)
    t = 0.0
    m = 0
    for k in range(1, n):
        x = w[k].real
        y = w[k].imag
        if y < -neg_tol:
            return times, vals, m, 1
        if y <= y_tol:
            continue  # degenerate zero-height step: skip
        t += 0.25 * y * y
        times[m] = t
        vals[m] = x
        m += 1
        c2 = y * y
        for j in range(k + 1, n):
            z = w[j] - x
            w[j] = x + _sqrt_up(z * z + c2)
        if stop_time > 0.0 and t >= stop_time:
            break
    return times, vals, m, 0


@njit(cache=True)
def zip_trace(times, vals):
    """Tip positions of the hull driven by sampled (times, vals), by
    backward composition of inverse vertical-slit maps."""
    n = len(times)
    out = np.empty(n, dtype=np.complex128)
    out[0] = complex(vals[0], 0.0)
    for j in range(1, n):
        dt = times[j] - times[j - 1]
        w = complex(vals[j], 2.0 * np.sqrt(dt))
        for k in range(j - 1, 0, -1):
            dtk = times[k] - times[k - 1]
            zz = w - vals[k]
            w = vals[k] + _sqrt_up(zz * zz - 4.0 * dtk)
        out[j] = w
    return out


@njit(cache=True)
def invert_chain(times, vals, w):
    """g_t^{-1}(w) for the vertical-slit chain sampled by (times, vals),
    where t = times[-1]."""
    for k in range(len(times) - 1, 0, -1):
        dtk = times[k] - times[k - 1]
        zz = w - vals[k]
        w = vals[k] + _sqrt_up(zz * zz - 4.0 * dtk)
    return w


@njit(cache=True)
def forward_chain(times, vals, z):
    """g_t(z) for the vertical-slit chain sampled by (times, vals)."""
    for k in range(1, len(times)):
        dtk = times[k] - times[k - 1]
        zz = z - vals[k]
        z = vals[k] + _sqrt_up(zz * zz + 4.0 * dtk)
    return z


@njit(cache=True)
def loewner_forward(times, vals, z, t_end, swallow_tol, step_factor):
    """Integrate dg/dt = 2/(g - U(t)) from g(0)=z to t_end with RK4.

    U is linearly interpolated between samples; steps never cross a sample
    breakpoint and shrink like step_factor*|g-U|^2 near the singularity.
    Returns (g, swallowed, T): if swallowed, T is the swallowing time and g
    the last value before |g-U| < swallow_tol.
    """
    t = 0.0
    g = z
    seg = 0
    nseg = len(times) - 1
    tol2 = swallow_tol * swallow_tol
    while t < t_end - 1e-18:
        while seg < nseg - 1 and times[seg + 1] <= t:
            seg += 1
        if nseg >= 1:
            t0, t1 = times[seg], times[min(seg + 1, nseg)]
            u0, u1 = vals[seg], vals[min(seg + 1, nseg)]
            slope = 0.0 if t1 <= t0 else (u1 - u0) / (t1 - t0)
        else:
            t0, t1, u0, slope = 0.0, t_end, vals[0], 0.0

        def _u(tt):
            return u0 + slope * (tt - t0)

        du = g - _u(t)
        d2 = du.real * du.real + du.imag * du.imag
        if d2 < tol2:
            return g, True, t
        h = step_factor * d2
        brk = t1 if t1 > t else t_end
        if t + h > brk:
            h = brk - t
        if t + h > t_end:
            h = t_end - t
        if h < 1e-18:
            h = 1e-18
        k1 = 2.0 / (g - _u(t))
        k2 = 2.0 / (g + 0.5 * h * k1 - _u(t + 0.5 * h))
        k3 = 2.0 / (g + 0.5 * h * k2 - _u(t + 0.5 * h))
        k4 = 2.0 / (g + h * k3 - _u(t + h))
        g = g + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = t + h
    return g, False, t


@njit(cache=True)
def frechet_dp(P, Q):
    """Discrete Frechet distance between point sequences (complex)."""
    n, m = len(P), len(Q)
    prev = np.empty(m, dtype=np.float64)
    cur = np.empty(m, dtype=np.float64)
    prev[0] = abs(P[0] - Q[0])
    for j in range(1, m):
        d = abs(P[0] - Q[j])
        prev[j] = d if d > prev[j - 1] else prev[j - 1]
    for i in range(1, n):
        d = abs(P[i] - Q[0])
        cur[0] = d if d > prev[0] else prev[0]
        for j in range(1, m):
            best = prev[j]
            if prev[j - 1] < best:
                best = prev[j - 1]
            if cur[j - 1] < best:
                best = cur[j - 1]
            d = abs(P[i] - Q[j])
            cur[j] = d if d > best else best
        prev, cur = cur, prev
    return prev[m - 1]


@njit(cache=True, inline="always")
def _seg_dist(a0, a1, b0, b1):
    """Distance between segments [a0,a1] and [b0,b1]."""
    d1 = a1 - a0
    d2 = b1 - b0
    best = 1e300
    for p, e0, e1 in ((a0, b0, b1), (a1, b0, b1), (b0, a0, a1), (b1, a0, a1)):
        e = e1 - e0
        den = e.real * e.real + e.imag * e.imag
        if den == 0.0:
            d = abs(p - e0)
        else:
            tt = ((p - e0).real * e.real + (p - e0).imag * e.imag) / den
            if tt < 0.0:
                tt = 0.0
            elif tt > 1.0:
                tt = 1.0
            d = abs(p - (e0 + tt * e))
        if d < best:
            best = d
    # proper crossing => distance zero
    o1 = (d2.real * (a0 - b0).imag - d2.imag * (a0 - b0).real)
    o2 = (d2.real * (a1 - b0).imag - d2.imag * (a1 - b0).real)
    o3 = (d1.real * (b0 - a0).imag - d1.imag * (b0 - a0).real)
    o4 = (d1.real * (b1 - a0).imag - d1.imag * (b1 - a0).real)
    if ((o1 > 0 and o2 < 0) or (o1 < 0 and o2 > 0)) and \
       ((o3 > 0 and o4 < 0) or (o3 < 0 and o4 > 0)):
        best = 0.0
    return best


@njit(cache=True)
def min_nonadjacent_segment_gap(pts):
    """Minimum distance between non-adjacent segments of a polyline."""
    n = len(pts) - 1
    best = 1e300
    for i in range(n):
        for j in range(i + 2, n):
            d = _seg_dist(pts[i], pts[i + 1], pts[j], pts[j + 1])
            if d < best:
                best = d
                if best == 0.0:
                    return 0.0
    return best
