"""Heat-kernel extraction from the discrete semigroup and bound verification.

A kernel column is the evolution of a discrete delta (mass 1/cell-volume at
one node and component), so the column converges to the kernel itself under
refinement.  Verification compares node magnitudes against the closed-form
upper bound, restricted to nodes away from the boundary where the Dirichlet
truncation only depresses the kernel.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .coefficients import BoxDomain
from .discrete import DiscreteForm
from .evolution import Stepper, evolve, evolve_adjoint
from .metric import DistanceMap, MetricField, distance_map
from .pinterval import ConstantsBundle, gaussian_bound_rhs


@dataclass(frozen=True)
class KernelBlock:
    """Sampled kernel matrices k(t, x, y) for one source node y."""

    t: float
    y: int
    values: np.ndarray  # (N, m, m): values[x, i, j] ~ k_ij(t, x, y)
    dist: DistanceMap | None = None


def delta_data(F: DiscreteForm, y: int, j: int) -> np.ndarray:
    u0 = np.zeros(F.ndof)
    u0[y * F.m + j] = 1.0 / F.mass
    return u0


def kernel_column(F: DiscreteForm, y: int, j: int, t: float,
                  stepper: Stepper) -> np.ndarray:
    """Approximate column x -> k(t, x, y) e_j, shape (N, m)."""
    if t <= 0:
        raise ValueError("t must be positive")
    u = evolve(F, delta_data(F, y, j), t, stepper)
    return u.reshape(F.grid.node_count, F.m)


def kernel_block(F: DiscreteForm, y: int, t: float, stepper: Stepper,
                 dist: DistanceMap | None = None) -> KernelBlock:
    m = F.m
    cols = [kernel_column(F, y, j, t, stepper) for j in range(m)]
    values = np.stack(cols, axis=-1)  # (N, m_i, m_j)
    return KernelBlock(t=t, y=y, values=values, dist=dist)


def interior_mask(grid: BoxDomain, layers: int = 5) -> np.ndarray:
    """Mask of nodes at least ``layers`` grid cells away from the boundary."""
    dims = grid.interior_shape
    mask = np.ones(dims, dtype=bool)
    for ax, nk in enumerate(dims):
        sel = [slice(None)] * grid.d
        edge = min(layers, nk // 2)
        sel[ax] = slice(0, edge)
        mask[tuple(sel)] = False
        sel[ax] = slice(nk - edge, nk)
        mask[tuple(sel)] = False
    return mask.ravel()


def verify_gaussian(block: KernelBlock, bundle: ConstantsBundle,
                    field: MetricField, grid: BoxDomain,
                    mask: np.ndarray | None = None) -> dict:
    """Margins bound_rhs - |k_ij| at the checked nodes; negatives are findings."""
    dmap = block.dist
    if dmap is None:
        dmap = distance_map(field, grid, block.y)
    if mask is None:
        mask = interior_mask(grid)
    rhs = gaussian_bound_rhs(bundle, block.t, dmap.dist)
    mags = np.abs(block.values).max(axis=(1, 2))
    margins = rhs[mask] - mags[mask]
    idx = np.flatnonzero(mask)
    worst = int(idx[np.argmin(margins)])
    return {
        "t": block.t,
        "source": block.y,
        "checked_nodes": int(mask.sum()),
        "min_margin": float(margins.min()),
        "violations": int(np.sum(margins < 0)),
        "worst_node": list(map(float, grid.node_coords()[worst])),
        "pass": bool(np.all(margins >= 0)),
    }


def symmetry_check(F: DiscreteForm, t: float, y1: int, y2: int,
                   stepper: Stepper) -> float:
    """Entrywise gap between k(t, y1, y2) and the transposed adjoint kernel.

    The adjoint kernel is sampled by evolving deltas through the transposed
    solves, so the gap reflects only solver roundoff.
    """
    m = F.m
    K = np.empty((m, m))
    Kadj = np.empty((m, m))
    for j in range(m):
        col = evolve(F, delta_data(F, y2, j), t, stepper)
        K[:, j] = col.reshape(-1, m)[y1].real
        colA = evolve_adjoint(F, delta_data(F, y1, j), t, stepper)
        Kadj[:, j] = colA.reshape(-1, m)[y2].real
    # adjoint kernel k*(t, y2, y1) equals k(t, y1, y2)^T
    return float(np.max(np.abs(K - Kadj.T)))


def block_to_csv(block: KernelBlock, grid: BoxDomain, path,
                 rhs: np.ndarray | None = None) -> None:
    coords = grid.node_coords()
    dist = block.dist.dist if block.dist is not None else np.full(len(coords), np.nan)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow([f"x{k + 1}" for k in range(grid.d)]
                    + ["source", "i", "j", "value", "distance", "bound", "margin"])
        m = block.values.shape[-1]
        for n in range(len(coords)):
            for i in range(m):
                for j in range(m):
                    v = block.values[n, i, j]
                    b = rhs[n] if rhs is not None else ""
                    marg = (rhs[n] - abs(v)) if rhs is not None else ""
                    wr.writerow(list(coords[n]) + [block.y, i, j, v, dist[n], b, marg])
