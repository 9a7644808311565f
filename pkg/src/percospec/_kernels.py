"""Numba kernels: union-find, tridiagonal reduction, implicit QL, skyline LDL^T.

All kernels release the GIL and are deterministic; no BLAS is involved, so
results do not depend on thread count or platform BLAS.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

EPS = np.finfo(np.float64).eps


# --- union-find -------------------------------------------------------------

@njit(cache=True, nogil=True)
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@njit(cache=True, nogil=True)
def component_labels(n, rows, cols):
    """Connected components of the graph on ``n`` vertices.

    Labels are canonical: components are numbered in order of their minimal
    vertex index, independent of edge order.
    """
    parent = np.arange(n)
    for k in range(rows.shape[0]):
        ra = _find(parent, rows[k])
        rb = _find(parent, cols[k])
        if ra != rb:
            # keep the smaller index as root
            if ra < rb:
                parent[rb] = ra
            else:
                parent[ra] = rb
    labels = np.empty(n, dtype=np.int64)
    root_label = np.full(n, -1, dtype=np.int64)
    count = 0
    for i in range(n):
        r = _find(parent, i)
        if root_label[r] < 0:
            root_label[r] = count
            count += 1
        labels[i] = root_label[r]
    return labels, count


# --- dense Householder tridiagonalization ------------------------------------

@njit(cache=True, nogil=True)
def householder_tridiag(a, want_q):
    """Reduce symmetric ``a`` (overwritten) to tridiagonal form.

    Returns ``(diag, offdiag, q)`` with ``q.T @ a0 @ q`` tridiagonal.  ``q`` is
    an empty array when ``want_q`` is false.
    """
    n = a.shape[0]
    vs = np.zeros((n, n))
    taus = np.zeros(n)
    p = np.zeros(n)
    w = np.zeros(n)
    e = np.zeros(max(n - 1, 0))
    for k in range(n - 2):
        alpha = a[k + 1, k]
        xnorm2 = 0.0
        for i in range(k + 2, n):
            xnorm2 += a[i, k] * a[i, k]
        if xnorm2 == 0.0:
            e[k] = alpha
            continue
        norm = math.sqrt(alpha * alpha + xnorm2)
        beta = -norm if alpha >= 0 else norm
        tau = (beta - alpha) / beta
        scale = 1.0 / (alpha - beta)
        v = vs[k]
        v[k + 1] = 1.0
        for i in range(k + 2, n):
            v[i] = a[i, k] * scale
        taus[k] = tau
        e[k] = beta
        # A22 <- H A22 H with H = I - tau v v^T
        for i in range(k + 1, n):
            s = 0.0
            for j in range(k + 1, n):
                s += a[i, j] * v[j]
            p[i] = tau * s
        kk = 0.0
        for i in range(k + 1, n):
            kk += p[i] * v[i]
        kk *= 0.5 * tau
        for i in range(k + 1, n):
            w[i] = p[i] - kk * v[i]
        for i in range(k + 1, n):
            vi = v[i]
            wi = w[i]
            for j in range(k + 1, n):
                a[i, j] -= vi * w[j] + wi * v[j]
    d = np.empty(n)
    for i in range(n):
        d[i] = a[i, i]
    if n >= 2:
        e[n - 2] = a[n - 1, n - 2]
    if not want_q:
        return d, e, np.zeros((0, 0))
    q = np.eye(n)
    for k in range(n - 3, -1, -1):
        tau = taus[k]
        if tau == 0.0:
            continue
        v = vs[k]
        # Q[k+1:, k+1:] <- (I - tau v v^T) Q[k+1:, k+1:]
        for j in range(k + 1, n):
            s = 0.0
            for i in range(k + 1, n):
                s += v[i] * q[i, j]
            s *= tau
            for i in range(k + 1, n):
                q[i, j] -= s * v[i]
    return d, e, q


# --- band reduction by Givens rotations (eigenvalues only) -------------------
# Packed lower storage: ab[k, j] = A[j + k, j] for k = 0..b+1; row b+1 holds
# the single bulge created by each rotation.

@njit(cache=True, nogil=True, inline="always")
def _bget(ab, i, j):
    if i < j:
        i, j = j, i
    k = i - j
    if k >= ab.shape[0]:
        return 0.0
    return ab[k, j]


@njit(cache=True, nogil=True, inline="always")
def _bset(ab, i, j, v):
    if i < j:
        i, j = j, i
    ab[i - j, j] = v


@njit(cache=True, nogil=True)
def _brotate(ab, r1, c, s, b):
    """``A <- G^T A G`` for a rotation in the plane (r1, r1 + 1)."""
    n = ab.shape[1]
    r2 = r1 + 1
    lo = max(0, r1 - b - 1)
    hi = min(n, r2 + b + 2)
    for col in range(lo, hi):
        if col == r1 or col == r2:
            continue
        x = _bget(ab, r1, col)
        y = _bget(ab, r2, col)
        if x == 0.0 and y == 0.0:
            continue
        _bset(ab, r1, col, c * x + s * y)
        _bset(ab, r2, col, -s * x + c * y)
    a11 = ab[0, r1]
    a22 = ab[0, r2]
    a12 = ab[1, r1]
    ab[0, r1] = c * c * a11 + 2.0 * c * s * a12 + s * s * a22
    ab[0, r2] = s * s * a11 - 2.0 * c * s * a12 + c * c * a22
    ab[1, r1] = c * s * (a22 - a11) + (c * c - s * s) * a12


@njit(cache=True, nogil=True)
def _bannihilate(ab, row, col, b):
    """Zero ``A[row, col]`` against ``A[row - 1, col]`` by a rotation in (row-1, row)."""
    x = _bget(ab, row - 1, col)
    y = _bget(ab, row, col)
    r = math.hypot(x, y)
    _brotate(ab, row - 1, x / r, y / r, b)
    _bset(ab, row, col, 0.0)


@njit(cache=True, nogil=True)
def pack_band(a, b):
    n = a.shape[0]
    ab = np.zeros((b + 2, n))
    for k in range(b + 1):
        for j in range(n - k):
            ab[k, j] = a[j + k, j]
    return ab


@njit(cache=True, nogil=True)
def band_tridiag(ab, b):
    """Reduce a packed symmetric band matrix of half-bandwidth ``b`` to tridiagonal form.

    Rutishauser-style: each entry outside the tridiagonal is annihilated and
    the resulting bulge is chased off the band.  O(n^2 b) work, O(n b)
    memory; ``ab`` is overwritten.
    """
    n = ab.shape[1]
    if b > 1:
        for j in range(n - 2):
            kmax = min(b, n - 1 - j)
            for k in range(kmax, 1, -1):
                i = j + k
                if ab[k, j] == 0.0:
                    continue
                _bannihilate(ab, i, j, b)
                p = i
                while True:
                    q = p + b
                    if q >= n or _bget(ab, q, p - 1) == 0.0:
                        break
                    _bannihilate(ab, q, p - 1, b)
                    p = q
    d = np.empty(n)
    e = np.zeros(max(n - 1, 0))
    for i in range(n):
        d[i] = ab[0, i]
    for i in range(n - 1):
        e[i] = ab[1, i]
    return d, e


@njit(cache=True, nogil=True)
def sturm_counts(d, e, shifts):
    """``#{lambda < s}`` of the symmetric tridiagonal (d, e) for each shift.

    The LDL^T recurrence on a tridiagonal matrix is backward stable
    regardless of pivot growth (each count is exact for a matrix with
    relatively perturbed off-diagonals).
    """
    n = d.shape[0]
    out = np.zeros(shifts.shape[0], dtype=np.int64)
    pivmin = 1e-300
    for t in range(shifts.shape[0]):
        s = shifts[t]
        c = 0
        q = d[0] - s
        for i in range(n):
            if i > 0:
                q = d[i] - s - e[i - 1] * e[i - 1] / q
            if abs(q) < pivmin:
                q = -pivmin
            if q < 0.0:
                c += 1
        out[t] = c
    return out


# --- implicit QL on a tridiagonal matrix -------------------------------------

@njit(cache=True, nogil=True)
def tridiag_ql(d, e_in, zt, want):
    """Eigenvalues (in ``d``) of the tridiagonal (d, e) by implicit-shift QL.

    ``e_in[i]`` couples ``i`` and ``i + 1``.  When ``want`` is true the rows
    of ``zt`` are rotated alongside, so on entry ``zt`` holds the transposed
    reduction basis and on exit its rows are eigenvectors.  Returns 0 on
    success, otherwise the index that failed to converge plus one.
    """
    n = d.shape[0]
    e = np.zeros(n)
    for i in range(n - 1):
        e[i] = e_in[i]
    nz = zt.shape[1] if want else 0
    # normwise deflation: a local test relative to |d_m| + |d_m+1| stalls on
    # clusters of near-zero diagonals (highly degenerate eigenvalue 0)
    anorm = 0.0
    for i in range(n):
        t = abs(d[i]) + abs(e[i]) + (abs(e[i - 1]) if i > 0 else 0.0)
        if t > anorm:
            anorm = t
    small = EPS * anorm
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= small or abs(e[m]) + dd == dd:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > 60:
                return l + 1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + (r if g >= 0 else -r))
            s = 1.0
            c = 1.0
            p = 0.0
            i = m - 1
            underflow = False
            while i >= l:
                f = s * e[i]
                bb = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * bb
                p = s * r
                d[i + 1] = g + p
                g = c * r - bb
                if want:
                    for k in range(nz):
                        f = zt[i + 1, k]
                        zt[i + 1, k] = s * zt[i, k] + c * f
                        zt[i, k] = c * zt[i, k] - s * f
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return 0


# --- skyline LDL^T inertia --------------------------------------------------

@njit(cache=True, nogil=True)
def _ldl_inertia(first, ptr, env, shift, work, piv, block_of, neg, growth):
    """Per-block negative-pivot counts and growth of LDL^T(A - shift I).

    ``growth[b]`` is the largest row sum ``|d_i| + sum_j l_ij^2 |d_j|`` in
    block ``b``; it bounds ``|L||D||L^T|`` and hence the backward error of the
    computed factorization.  Exact zero pivots are replaced by ``-tiny``.
    """
    n = first.shape[0]
    for t in range(env.shape[0]):
        work[t] = env[t]
    neg[:] = 0
    growth[:] = 0.0
    tiny = 1e-300
    for i in range(n):
        fi = first[i]
        pi = ptr[i]
        for j in range(fi, i):
            fj = first[j]
            pj = ptr[j]
            s = work[pi + j - fi]
            k0 = fi if fi > fj else fj
            for k in range(k0, j):
                s -= work[pi + k - fi] * work[pj + k - fj]
            work[pi + j - fi] = s
        dii = work[pi + i - fi] - shift
        g = 0.0
        for j in range(fi, i):
            t = work[pi + j - fi]
            if t != 0.0:
                lij = t / piv[j]
                work[pi + j - fi] = lij
                dii -= t * lij
                g += abs(t * lij)
            else:
                work[pi + j - fi] = 0.0
        if dii == 0.0:
            dii = -tiny
        piv[i] = dii
        b = block_of[i]
        g += abs(dii)
        if g > growth[b]:
            growth[b] = g
        if dii < 0.0:
            neg[b] += 1


@njit(cache=True, nogil=True)
def skyline_count_leq(first, ptr, env, block_of, n_blocks, shifts, growth_limit):
    """Eigenvalue counts below each shift via Sylvester inertia, block by block.

    Returns ``(counts, flags)``: ``counts[t]`` sums the negative pivots of the
    blocks whose growth stayed within their ``growth_limit[b]`` (inertia
    certified); ``flags[t, b] = 1`` marks blocks the caller must recount.
    """
    n = first.shape[0]
    work = np.empty(env.shape[0])
    piv = np.empty(n)
    neg = np.zeros(n_blocks, dtype=np.int64)
    growth = np.zeros(n_blocks)
    counts = np.zeros(shifts.shape[0], dtype=np.int64)
    flags = np.zeros((shifts.shape[0], n_blocks), dtype=np.uint8)
    for t in range(shifts.shape[0]):
        _ldl_inertia(first, ptr, env, shifts[t], work, piv, block_of, neg, growth)
        c = 0
        for b in range(n_blocks):
            if growth[b] <= growth_limit[b]:
                c += neg[b]
            else:
                flags[t, b] = 1
        counts[t] = c
    return counts, flags
