"""Eigenvalues, inertia counting, counting functions, exact characteristic polynomials.

Everything runs per connected block of the matrix: the spectrum of a
block-diagonal operator is the union of its blocks' spectra, and percolation
Hamiltonians split into one block per cluster.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from ._kernels import band_tridiag, householder_tridiag, pack_band, skyline_count_leq, sturm_counts, tridiag_ql
from .errors import PreconditionError, ResourceError
from .hamiltonian import SparseHamiltonian
from .lattice import Box

DENSE_THRESHOLD = 4096
NUDGE_REL = 1e-10
EPS = np.finfo(float).eps
# banded reduction pays off once the block is much wider than its bandwidth
_BAND_MIN_N = 64
_BAND_RATIO = 4


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None = None
    residuals: np.ndarray | None = None


def _scale(H: SparseHamiltonian) -> float:
    return max(H.scale, 1.0)


def _dense_blocks(H: SparseHamiltonian):
    """Yield ``(local_indices, dense_block)`` for each block of size > 1."""
    labels, _ = H.block_labels
    pos = np.empty(H.n, dtype=np.int64)
    blocks = H.blocks
    for b in blocks:
        pos[b] = np.arange(len(b))
    elab = labels[H.rows]
    order = np.argsort(elab, kind="stable")
    counts = np.bincount(elab, minlength=len(blocks))
    starts = np.concatenate([[0], np.cumsum(counts)])
    for k, b in enumerate(blocks):
        if len(b) == 1:
            continue
        sel = order[starts[k]:starts[k + 1]]
        a = np.diag(H.diag[b].astype(float))
        r, c = pos[H.rows[sel]], pos[H.cols[sel]]
        a[r, c] = H.weights[sel]
        a[c, r] = H.weights[sel]
        yield b, a


def _bandwidth(a: np.ndarray) -> int:
    r, c = np.nonzero(a)
    return int(np.abs(r - c).max()) if len(r) else 0


def dense_eigvals(a: np.ndarray) -> np.ndarray:
    """Eigenvalues of a dense symmetric matrix (copied), ascending."""
    a = np.array(a, dtype=float, order="C")
    n = a.shape[0]
    if n == 0:
        return np.zeros(0)
    b = _bandwidth(a)
    if n >= _BAND_MIN_N and b * _BAND_RATIO < n:
        d, e = band_tridiag(pack_band(a, b), b)
    else:
        d, e, _ = householder_tridiag(a, False)
    status = tridiag_ql(d, e, np.zeros((0, 0)), False)
    if status:
        raise RuntimeError(f"implicit QL failed to converge at index {status - 1}")
    return np.sort(d)


def dense_eigh(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of a dense symmetric matrix; vectors are columns."""
    a = np.array(a, dtype=float, order="C")
    if a.shape[0] == 0:
        return np.zeros(0), np.zeros((0, 0))
    d, e, q = householder_tridiag(a, True)
    zt = np.ascontiguousarray(q.T)
    status = tridiag_ql(d, e, zt, True)
    if status:
        raise RuntimeError(f"implicit QL failed to converge at index {status - 1}")
    order = np.argsort(d, kind="stable")
    return d[order], zt[order].T


def eigen_sym(H: SparseHamiltonian, want_vectors: bool = False,
              dense_threshold: int = DENSE_THRESHOLD) -> SpectrumResult:
    """All eigenvalues (ascending) and optionally orthonormal eigenvectors.

    Householder tridiagonalization (or banded Givens reduction for narrow
    eigenvalue-only blocks) followed by implicit-shift QL, block by block.
    """
    n = H.n
    biggest = max((len(b) for b in H.blocks), default=0)
    if biggest > dense_threshold:
        raise ResourceError(
            f"eigen_sym: block of dimension {biggest} exceeds dense threshold {dense_threshold}; "
            "use count_leq / counting_function instead"
        )
    vals = np.empty(n)
    vecs = np.zeros((n, n)) if want_vectors else None
    singles = np.array([b[0] for b in H.blocks if len(b) == 1], dtype=np.int64)
    vals[singles] = H.diag[singles]
    if want_vectors:
        vecs[singles, singles] = 1.0
    # eigenvalue slots: singletons keep their own index, bigger blocks fill theirs
    for b, a in _dense_blocks(H):
        if want_vectors:
            w, v = dense_eigh(a)
            vecs[np.ix_(b, b)] = v
        else:
            w = dense_eigvals(a)
        vals[b] = w
    order = np.argsort(vals, kind="stable")
    vals = vals[order]
    if not want_vectors:
        return SpectrumResult(vals)
    vecs = vecs[:, order]
    res = np.linalg.norm(H.matvec(vecs) - vecs * vals, axis=0) if n else np.zeros(0)
    return SpectrumResult(vals, vecs, res)


def _growth_limit(nudge: float, bandwidth: int) -> float:
    """Largest pivot growth for which the inertia at a shift is accepted.

    The LDL^T backward error is of order ``eps * G`` with ``G`` the largest row
    growth ``|d_i| + sum_j l_ij^2 |d_j|``; the count is accepted while that stays
    below the nudge.  The worst-case bound carries an extra ``b^2`` factor that
    never materialises on lattice matrices (wrong counts were only observed at
    ``G > 1e20``), so it is not applied.  Tridiagonal blocks are backward stable
    for any growth (Kahan), so their limit is infinite.
    """
    if bandwidth <= 1:
        return np.inf
    return nudge / EPS


def _block_band(H: SparseHamiltonian, block: np.ndarray) -> tuple[np.ndarray, int]:
    """Packed lower band of one block (in block order) and its half-bandwidth."""
    sub = H.submatrix(np.sort(block))
    b = int(np.max(np.abs(sub.rows - sub.cols))) if len(sub.rows) else 0
    ab = np.zeros((b + 2, sub.n))
    ab[0] = sub.diag
    ab[sub.cols - sub.rows, sub.rows] = sub.weights  # rows < cols: store A[col, row]
    return ab, b


def count_leq_many(H: SparseHamiltonian, energies) -> np.ndarray:
    """``#{lambda <= E}`` for every E, by Sylvester inertia of ``H - (E + nudge)``.

    ``nudge = NUDGE_REL * scale``: an eigenvalue exactly at E is counted, and
    eigenvalues within about 1.5 nudge above E may be.  Each block's skyline
    LDL^T inertia is certified by its pivot growth.  Blocks that fail are
    recounted by Sturm sequences on an orthogonal tridiagonal reduction of the
    block, which is backward stable.
    """
    energies = np.atleast_1d(np.asarray(energies, dtype=float))
    if H.n == 0:
        return np.zeros(len(energies), dtype=np.int64)
    first, ptr, env = H.envelope
    blocks = H.blocks
    sizes = np.array([len(b) for b in blocks])
    block_of = np.repeat(np.arange(len(blocks)), sizes)
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    # per-block skyline width (block order keeps each block contiguous)
    width = np.maximum.reduceat(np.arange(H.n) - first, starts)
    nudge = NUDGE_REL * _scale(H)
    limits = np.array([_growth_limit(nudge, int(w)) for w in width])
    counts, flags = skyline_count_leq(first, ptr, env, block_of, len(blocks), energies + nudge, limits)
    bad_t, bad_b = np.nonzero(flags)
    reduced: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for b in np.unique(bad_b):
        ab, bw = _block_band(H, blocks[b])
        reduced[b] = band_tridiag(ab, bw)
    for t, b in zip(bad_t, bad_b):
        d, e = reduced[b]
        counts[t] += int(sturm_counts(d, e, np.array([energies[t] + nudge]))[0])
    return counts


def count_leq(H: SparseHamiltonian, E: float) -> int:
    return int(count_leq_many(H, [E])[0])


def count_interval(H: SparseHamiltonian, lo: float, hi: float) -> int:
    """Eigenvalues in the closed interval ``[lo, hi]``."""
    up, below = count_leq_many(H, [hi, lo - 2 * NUDGE_REL * _scale(H)])
    return int(up - below)


def normalization_volume(box: Box, normalization: str = "volume") -> int:
    """``L^d`` ('volume') or the number of box sites ('per_site')."""
    if normalization == "volume":
        return box.volume
    if normalization == "per_site":
        return box.n_sites
    raise PreconditionError(f"normalization must be 'volume' or 'per_site', got {normalization!r}")


def counting_function(H: SparseHamiltonian, box: Box, grid, normalization: str = "volume") -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) < 0):
        raise PreconditionError("counting_function: grid must be sorted")
    return count_leq_many(H, grid) / normalization_volume(box, normalization)


def _faddeev_leverrier(a: np.ndarray, dtype) -> list[int]:
    n = a.shape[0]
    a = a.astype(dtype)
    coeffs = [1]
    m = np.zeros((n, n), dtype=dtype)
    ident = np.eye(n, dtype=dtype)
    c = 1
    for k in range(1, n + 1):
        m = a.dot(m) + ident * c
        tr = int(np.trace(a.dot(m)))
        if tr % k:
            raise ArithmeticError("char_poly_exact: inexact division (overflow?)")
        c = -tr // k
        coeffs.append(c)
    return [int(x) for x in coeffs]


def char_poly_exact(H, max_n: int = 12) -> list[int]:
    """Characteristic polynomial ``det(x I - H)``, coefficients highest first.

    Faddeev-LeVerrier recursion in exact integers: every division is exact,
    so integer matrices give integer coefficients.
    """
    a = H.to_dense() if isinstance(H, SparseHamiltonian) else np.asarray(H)
    n = a.shape[0]
    if n > max_n:
        raise PreconditionError(f"char_poly_exact: n={n} exceeds {max_n}")
    af = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(af)) or np.any(af != np.round(af)):
        raise PreconditionError("char_poly_exact: matrix entries must be integers")
    ai = np.vectorize(int, otypes=[object])(np.round(af)) if n else np.zeros((0, 0), dtype=object)
    r = max(max((sum(abs(x) for x in row) for row in ai), default=0), 1)
    # entries of the recursion stay below n * (2r)^n
    dtype = np.int64 if n * (2 * r) ** n < 2 ** 62 else object
    return _faddeev_leverrier(ai, dtype)


@dataclass
class LocalizationRecord:
    eigenvalue: float
    ipr: float
    center: tuple[int, ...]
    radial: np.ndarray  # weight sum |v_x|^2 at each distance from the center


def _hop_distances(H: SparseHamiltonian, src: int) -> np.ndarray:
    nbrs = [[] for _ in range(H.n)]
    for r, c in zip(H.rows, H.cols):
        nbrs[r].append(c)
        nbrs[c].append(r)
    dist = np.full(H.n, -1, dtype=np.int64)
    dist[src] = 0
    queue = deque([src])
    while queue:
        u = queue.popleft()
        for v in nbrs[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def localization_profile(H: SparseHamiltonian, E_window: tuple[float, float]) -> list[LocalizationRecord]:
    """IPR and radial weight profile of each eigenvector with eigenvalue in the window.

    Distances are l1 distances in the box (hop distance for matrices without a
    box); sites unreachable from the centre are binned at distance -1 and dropped.
    """
    spec = eigen_sym(H, want_vectors=True)
    lo, hi = E_window
    out = []
    for k in np.flatnonzero((spec.eigenvalues >= lo) & (spec.eigenvalues <= hi)):
        v = spec.eigenvectors[:, k]
        w = v * v
        ipr = float(np.sum(w * w))
        c = int(np.argmax(np.abs(v)))
        if H.box is not None:
            coords = H.box.coords[H.sites]
            dist = np.abs(coords - coords[c]).sum(axis=1)
            center = tuple(int(x) for x in coords[c])
        else:
            dist = _hop_distances(H, c)
            center = (c,)
        ok = dist >= 0
        radial = np.bincount(dist[ok], weights=w[ok])
        out.append(LocalizationRecord(float(spec.eigenvalues[k]), ipr, center, radial))
    return out
