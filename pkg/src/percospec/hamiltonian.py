"""Finite-volume operators ``A + q`` and ``A +/- V`` over the active sites of a box."""
from __future__ import annotations

import io
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ._kernels import component_labels
from .errors import ValidationError
from .lattice import Box, PercolationConfig, vertex_deficiency

VARIANTS = ("anderson", "adjacency", "neumann_like", "dirichlet_like")


@dataclass(frozen=True, eq=False)
class SparseHamiltonian:
    """Symmetric matrix stored as its diagonal plus the upper-triangle edges.

    ``rows[k] < cols[k]`` index local rows; ``sites`` maps local rows back to
    box indices (or is ``arange(n)`` for matrices not built from a box).
    """

    diag: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray
    variant: str
    sites: np.ndarray
    box: Box | None = None

    @property
    def n(self) -> int:
        return len(self.diag)

    @classmethod
    def from_dense(cls, a, variant: str = "custom") -> "SparseHamiltonian":
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValidationError("hamiltonian: matrix must be square")
        if not np.array_equal(a, a.T):
            raise ValidationError("hamiltonian: matrix must be symmetric")
        r, c = np.nonzero(np.triu(a, 1))
        return cls(np.diag(a).copy(), r.astype(np.int64), c.astype(np.int64), a[r, c].copy(),
                   variant, np.arange(a.shape[0]))

    def to_dense(self) -> np.ndarray:
        a = np.diag(self.diag.astype(float))
        a[self.rows, self.cols] = self.weights
        a[self.cols, self.rows] = self.weights
        return a

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """``H @ x`` for a vector or a matrix of column vectors."""
        x = np.asarray(x, dtype=float)
        y = self.diag.reshape((-1,) + (1,) * (x.ndim - 1)) * x
        w = self.weights.reshape((-1,) + (1,) * (x.ndim - 1))
        np.add.at(y, self.rows, w * x[self.cols])
        np.add.at(y, self.cols, w * x[self.rows])
        return y

    @cached_property
    def scale(self) -> float:
        """Max absolute row sum (infinity norm)."""
        s = np.abs(self.diag).astype(float)
        np.add.at(s, self.rows, np.abs(self.weights))
        np.add.at(s, self.cols, np.abs(self.weights))
        return float(s.max()) if self.n else 0.0

    @cached_property
    def block_labels(self) -> tuple[np.ndarray, int]:
        """Connected components of the off-diagonal pattern."""
        return component_labels(self.n, self.rows, self.cols)

    @cached_property
    def blocks(self) -> list[np.ndarray]:
        """Local indices of each connected block, blocks ordered by minimal index."""
        labels, count = self.block_labels
        order = np.argsort(labels, kind="stable")
        bounds = np.cumsum(np.bincount(labels, minlength=count))[:-1]
        return np.split(order, bounds) if count else []

    @cached_property
    def envelope(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Skyline storage ``(first, ptr, env)`` of the block-ordered matrix.

        Rows are permuted so blocks are contiguous; row ``i`` stores columns
        ``first[i]..i`` at ``env[ptr[i]:ptr[i] + i - first[i] + 1]``.
        """
        n = self.n
        order = np.concatenate(self.blocks) if n else np.zeros(0, dtype=np.int64)
        new = np.empty(n, dtype=np.int64)
        new[order] = np.arange(n)
        a, b = new[self.rows], new[self.cols]
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        first = np.arange(n, dtype=np.int64)
        np.minimum.at(first, hi, lo)
        width = np.arange(n) - first + 1
        ptr = np.zeros(n, dtype=np.int64)
        ptr[1:] = np.cumsum(width)[:-1]
        env = np.zeros(int(width.sum()))
        env[ptr + np.arange(n) - first] = self.diag[order]
        env[ptr[hi] + lo - first[hi]] = self.weights
        return first, ptr, env

    def submatrix(self, local: np.ndarray) -> "SparseHamiltonian":
        """Principal submatrix on the (sorted) local indices ``local``."""
        local = np.asarray(local, dtype=np.int64)
        pos = np.full(self.n, -1, dtype=np.int64)
        pos[local] = np.arange(len(local))
        keep = (pos[self.rows] >= 0) & (pos[self.cols] >= 0)
        return SparseHamiltonian(self.diag[local], pos[self.rows[keep]], pos[self.cols[keep]],
                                 self.weights[keep], self.variant, self.sites[local], self.box)

    def to_coordinate_text(self) -> str:
        """MatrixMarket symmetric coordinate text (1-based, lower triangle)."""
        buf = io.StringIO()
        buf.write("%%MatrixMarket matrix coordinate real symmetric\n")
        buf.write(f"% variant={self.variant}\n")
        nnz = self.n + len(self.rows)
        buf.write(f"{self.n} {self.n} {nnz}\n")
        entries = [(i, i, self.diag[i]) for i in range(self.n)]
        entries += [(int(c), int(r), w) for r, c, w in zip(self.rows, self.cols, self.weights)]
        entries.sort()
        for i, j, v in entries:
            buf.write(f"{i + 1} {j + 1} {float(v)!r}\n")
        return buf.getvalue()


def assemble(cfg: PercolationConfig, variant: str = "anderson",
             site_subset: np.ndarray | None = None) -> SparseHamiltonian:
    """Assemble the operator over active sites, optionally restricted.

    ``site_subset`` is a boolean mask over box sites (e.g. one cluster); the
    result is then the principal submatrix of the full assembly, with ``V``
    still computed from degrees in the whole active subgraph.
    """
    if variant not in VARIANTS:
        raise ValidationError(f"variant must be one of {', '.join(VARIANTS)}; got {variant!r}")
    box = cfg.box
    keep = cfg.active.copy()
    if site_subset is not None:
        keep &= np.asarray(site_subset, dtype=bool)
    sites = np.flatnonzero(keep)
    pos = np.full(box.n_sites, -1, dtype=np.int64)
    pos[sites] = np.arange(len(sites))
    e = box.edges
    e = e[keep[e[:, 0]] & keep[e[:, 1]]]
    rows, cols = pos[e[:, 0]], pos[e[:, 1]]
    swap = rows > cols  # periodic wrap edges can invert the order
    rows, cols = np.where(swap, cols, rows), np.where(swap, rows, cols)
    if variant == "anderson":
        diag = cfg.q[sites].astype(float)
    elif variant == "adjacency":
        diag = np.zeros(len(sites))
    else:
        v = vertex_deficiency(cfg)[sites].astype(float)
        diag = v if variant == "neumann_like" else -v
    return SparseHamiltonian(diag, rows, cols, np.ones(len(rows)), variant, sites, box)
