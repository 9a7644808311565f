"""Boxes in Z^d, sampled configurations, and cluster labeling."""
from __future__ import annotations

import io
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._kernels import component_labels
from .errors import ValidationError
from .measure import MeasureSpec, RandomStream, sample_many


@dataclass(frozen=True)
class Box:
    """``Z^d`` intersected with ``[-L/2, L/2]^d``.

    Sites are indexed in C order over the coordinate grid, last axis fastest.
    ``periodic`` wraps each axis into a ring (diagnostics only).
    """

    d: int
    L: int
    periodic: bool = False
    allow_odd: bool = False

    def __post_init__(self):
        if self.d < 1:
            raise ValidationError(f"box: d must be >= 1, got {self.d}")
        if self.L < 1:
            raise ValidationError(f"box: L must be >= 1, got {self.L}")
        if self.L % 2:
            if not self.allow_odd:
                raise ValidationError(f"box: L must be even, got {self.L}")
            warnings.warn(f"odd L={self.L}: box has {self.side} sites per axis", stacklevel=3)
        if self.periodic and self.side < 3:
            raise ValidationError("box: periodic boundary needs at least 3 sites per axis")

    @property
    def side(self) -> int:
        return 2 * (self.L // 2) + 1

    @property
    def half(self) -> int:
        return self.L // 2

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.side,) * self.d

    @property
    def n_sites(self) -> int:
        return self.side ** self.d

    @property
    def volume(self) -> int:
        """``L^d``, the normalization of the counting function."""
        return self.L ** self.d

    def index(self, coord) -> int:
        shifted = tuple(int(c) + self.half for c in coord)
        if len(shifted) != self.d or any(not 0 <= c < self.side for c in shifted):
            raise ValidationError(f"box: coordinate {tuple(coord)} outside the box")
        return int(np.ravel_multi_index(shifted, self.shape))

    def coord(self, index: int) -> tuple[int, ...]:
        return tuple(int(c) - self.half for c in np.unravel_index(int(index), self.shape))

    @cached_property
    def coords(self) -> np.ndarray:
        """``(n_sites, d)`` array of centred coordinates."""
        grid = np.indices(self.shape).reshape(self.d, -1).T
        return grid - self.half

    @cached_property
    def edges(self) -> np.ndarray:
        """``(n_edges, 2)`` array of nearest-neighbour pairs ``i < j``."""
        idx = np.arange(self.n_sites).reshape(self.shape)
        pairs = []
        for axis in range(self.d):
            a = np.moveaxis(idx, axis, 0)
            pairs.append(np.stack([a[:-1].ravel(), a[1:].ravel()], axis=1))
            if self.periodic:
                pairs.append(np.stack([a[-1].ravel(), a[0].ravel()], axis=1))
        e = np.concatenate(pairs)
        e.sort(axis=1)
        order = np.lexsort((e[:, 1], e[:, 0]))
        return e[order]

    @cached_property
    def on_boundary(self) -> np.ndarray:
        if self.periodic:
            return np.zeros(self.n_sites, dtype=bool)
        return (np.abs(self.coords) == self.half).any(axis=1)


@dataclass(frozen=True)
class PercolationConfig:
    """Potential values on a box; ``inf`` marks a deleted vertex."""

    box: Box
    q: np.ndarray
    seed: int
    realization: int
    measure: MeasureSpec | None = None

    @property
    def active(self) -> np.ndarray:
        return np.isfinite(self.q)

    @property
    def n_active(self) -> int:
        return int(self.active.sum())

    @cached_property
    def active_edges(self) -> np.ndarray:
        e = self.box.edges
        act = self.active
        return e[act[e[:, 0]] & act[e[:, 1]]]


@dataclass(frozen=True)
class ClusterLabeling:
    labels: np.ndarray  # per box site, -1 for deleted sites
    sizes: np.ndarray
    touches_boundary: np.ndarray
    spans: np.ndarray
    largest: int  # -1 when there are no active sites

    @property
    def n_clusters(self) -> int:
        return len(self.sizes)

    def members(self, label: int) -> np.ndarray:
        return np.flatnonzero(self.labels == label)

    def mask(self, scope: str) -> np.ndarray:
        """Box-site mask for ``scope`` in {all, largest, spanning}."""
        if scope == "all":
            return self.labels >= 0
        if scope == "largest":
            return (self.labels == self.largest) & (self.largest >= 0)
        if scope == "spanning":
            keep = np.flatnonzero(self.spans)
            return np.isin(self.labels, keep) & (self.labels >= 0)
        raise ValidationError(f"cluster_scope must be one of all, largest, spanning; got {scope!r}")


def generate_config(box: Box, m: MeasureSpec, seed: int, realization: int) -> PercolationConfig:
    q = sample_many(m, RandomStream(seed, realization), box.n_sites)
    q.setflags(write=False)
    return PercolationConfig(box=box, q=q, seed=seed, realization=realization, measure=m)


def config_from_active(box: Box, active: np.ndarray, q: np.ndarray | float = 0.0) -> PercolationConfig:
    """Build a configuration from an explicit activity mask (tests, cross-checks)."""
    vals = np.broadcast_to(np.asarray(q, dtype=float), (box.n_sites,)).copy()
    vals[~np.asarray(active, dtype=bool).reshape(-1)] = np.inf
    vals.setflags(write=False)
    return PercolationConfig(box=box, q=vals, seed=-1, realization=-1)


def label_clusters(cfg: PercolationConfig) -> ClusterLabeling:
    box = cfg.box
    act_idx = np.flatnonzero(cfg.active)
    local = np.full(box.n_sites, -1, dtype=np.int64)
    local[act_idx] = np.arange(len(act_idx))
    e = cfg.active_edges
    lab, count = component_labels(len(act_idx), local[e[:, 0]], local[e[:, 1]])
    labels = np.full(box.n_sites, -1, dtype=np.int64)
    labels[act_idx] = lab
    sizes = np.bincount(lab, minlength=count).astype(np.int64)
    touches = np.zeros(count, dtype=bool)
    spans = np.zeros(count, dtype=bool)
    if count and not box.periodic:
        bnd = box.on_boundary[act_idx]
        touches[np.unique(lab[bnd])] = True
        coords = box.coords[act_idx]
        for axis in range(box.d):
            lo = np.zeros(count, dtype=bool)
            hi = np.zeros(count, dtype=bool)
            lo[np.unique(lab[coords[:, axis] == -box.half])] = True
            hi[np.unique(lab[coords[:, axis] == box.half])] = True
            spans |= lo & hi
    largest = int(np.argmax(sizes)) if count else -1
    return ClusterLabeling(labels, sizes, touches, spans, largest)


def vertex_deficiency(cfg: PercolationConfig, labeling: ClusterLabeling | None = None) -> np.ndarray:
    """``V(x) = 2d - deg(x)`` in the active subgraph of the box.

    Sites outside the box count as absent.  Entries for deleted sites are 0.
    ``labeling`` is accepted for interface symmetry; degrees do not need it.
    """
    deg = np.bincount(cfg.active_edges.ravel(), minlength=cfg.box.n_sites)
    v = 2 * cfg.box.d - deg
    v[~cfg.active] = 0
    return v.astype(np.int64)


def config_to_csv(cfg: PercolationConfig, labeling: ClusterLabeling | None = None,
                  omit_deleted: bool = False) -> str:
    """CSV dump with columns ``x_1..x_d, q, cluster_label``; deleted sites spell ``inf``."""
    labeling = labeling or label_clusters(cfg)
    buf = io.StringIO()
    header = [f"x_{k + 1}" for k in range(cfg.box.d)] + ["q", "cluster_label"]
    buf.write(",".join(header) + "\n")
    for i, c in enumerate(cfg.box.coords):
        qi = cfg.q[i]
        if omit_deleted and not np.isfinite(qi):
            continue
        qs = "inf" if not np.isfinite(qi) else repr(float(qi))
        buf.write(",".join(str(int(x)) for x in c) + f",{qs},{int(labeling.labels[i])}\n")
    return buf.getvalue()
