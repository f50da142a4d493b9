"""Hot loops, each in a numba flavour (``*_nb``) and a numpy flavour (``*_np``).

The public names dispatch on :data:`geonarrow._accel.HAVE_NUMBA`. Both flavours
return identical results; ``tests/test_kernels.py`` checks that and
``benchmarks/bench_kernels.py`` times them against each other.
"""

import numpy as np

from ._accel import HAVE_NUMBA, njit

# ---------------------------------------------------------------------------
# set diameter between one reference box and many boxes (l-inf)
# ---------------------------------------------------------------------------


def box_diameters_np(lo, hi, ref_lo, ref_hi):
    gap = np.maximum(np.abs(hi - ref_lo), np.abs(ref_hi - lo))
    return gap.max(axis=1)


@njit(cache=True)
def box_diameters_nb(lo, hi, ref_lo, ref_hi):
    n, d = lo.shape
    out = np.empty(n)
    for i in range(n):
        best = 0.0
        for k in range(d):
            a = abs(hi[i, k] - ref_lo[k])
            b = abs(ref_hi[k] - lo[i, k])
            g = a if a > b else b
            if g > best:
                best = g
        out[i] = best
    return out


# ---------------------------------------------------------------------------
# piecewise "bitten apple" functions
#
# pieces are tried in order; piece k applies when ||x - c_k|| <= r_k and
# ||x|| > inner_k, giving ||x - c_k||^q - ||c_k||^q. Otherwise ||x||^q.
# ---------------------------------------------------------------------------


def bitten_eval_np(points, q, centers, radii, inner):
    norm_x = np.abs(points).max(axis=1)
    out = norm_x**q
    if centers.shape[0] == 0:
        return out
    done = np.zeros(points.shape[0], dtype=bool)
    for k in range(centers.shape[0]):
        dist = np.abs(points - centers[k]).max(axis=1)
        hit = (~done) & (dist <= radii[k]) & (norm_x > inner[k])
        cnorm = np.abs(centers[k]).max()
        out[hit] = dist[hit] ** q - cnorm**q
        done |= hit
    return out


@njit(cache=True)
def bitten_eval_nb(points, q, centers, radii, inner):
    n, d = points.shape
    npieces = centers.shape[0]
    cnorm = np.empty(npieces)
    for k in range(npieces):
        m = 0.0
        for i in range(d):
            v = abs(centers[k, i])
            if v > m:
                m = v
        cnorm[k] = m
    out = np.empty(n)
    for p in range(n):
        nx = 0.0
        for i in range(d):
            v = abs(points[p, i])
            if v > nx:
                nx = v
        val = nx**q
        for k in range(npieces):
            if nx <= inner[k]:
                continue
            dist = 0.0
            for i in range(d):
                v = abs(points[p, i] - centers[k, i])
                if v > dist:
                    dist = v
            if dist <= radii[k]:
                val = dist**q - cnorm[k] ** q
                break
        out[p] = val
    return out


# ---------------------------------------------------------------------------
# greedy covering / packing of a point cloud in l-inf
# points must be sorted lexicographically by the caller
# ---------------------------------------------------------------------------


def greedy_cover_np(points, delta):
    n = points.shape[0]
    covered = np.zeros(n, dtype=bool)
    centers = []
    i = 0
    while i < n:
        if covered[i]:
            i += 1
            continue
        c = points[i] + delta
        centers.append(c)
        covered |= np.abs(points - c).max(axis=1) <= delta * (1.0 + 1e-12)
        i += 1
    if not centers:
        return np.empty((0, points.shape[1]))
    return np.array(centers)


@njit(cache=True)
def greedy_cover_nb(points, delta):
    n, d = points.shape
    covered = np.zeros(n, dtype=np.bool_)
    centers = np.empty((n, d))
    count = 0
    tol = delta * (1.0 + 1e-12)
    for i in range(n):
        if covered[i]:
            continue
        for k in range(d):
            centers[count, k] = points[i, k] + delta
        for j in range(i, n):
            if covered[j]:
                continue
            inside = True
            for k in range(d):
                if abs(points[j, k] - centers[count, k]) > tol:
                    inside = False
                    break
            if inside:
                covered[j] = True
        count += 1
    return centers[:count].copy()


def greedy_packing_np(points, sep):
    picked = []
    for i in range(points.shape[0]):
        p = points[i]
        if picked:
            arr = np.asarray(picked)
            if (np.abs(arr - p).max(axis=1) <= sep).any():
                continue
        picked.append(p)
    return len(picked)


@njit(cache=True)
def greedy_packing_nb(points, sep):
    n, d = points.shape
    picked = np.empty((n, d))
    count = 0
    for i in range(n):
        ok = True
        for j in range(count):
            dist = 0.0
            for k in range(d):
                v = abs(points[i, k] - picked[j, k])
                if v > dist:
                    dist = v
            if dist <= sep:
                ok = False
                break
        if ok:
            for k in range(d):
                picked[count, k] = points[i, k]
            count += 1
    return count


if HAVE_NUMBA:
    box_diameters = box_diameters_nb
    bitten_eval = bitten_eval_nb
    greedy_cover = greedy_cover_nb
    greedy_packing = greedy_packing_nb
else:
    box_diameters = box_diameters_np
    bitten_eval = bitten_eval_np
    greedy_cover = greedy_cover_np
    greedy_packing = greedy_packing_np
