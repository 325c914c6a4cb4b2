"""Positional cost function for flocking and its analytical gradient.

The cost of an agent at position p given its observed neighborhood H and a
set of cylindrical obstacles K is a weighted sum of four terms:

  cohesion:    w_coh / |H| * sum_j ||p - p_j||^2
  separation:  w_sep / |H| * sum_j 1 / max(||p - p_j|| - 2 r_drone, zero_hat)^2
  target:      w_tar * ||p_tar - centroid({p} u H)||^2
  obstacle:    w_obs / |K| * sum_k 1 / max(||P(p) - p_k|| - r_k - r_drone, zero_hat)^2

where P projects to the xy-plane (obstacles are infinitely tall cylinders)
and zero_hat is a small positive length that keeps the reciprocal terms
finite under sensor noise.  The module also provides a central-difference
oracle for the gradient and the two-drone equilibrium-distance solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Vec3",
    "Obstacle",
    "CostParams",
    "CostBreakdown",
    "CostGradient",
    "evaluate_cost",
    "evaluate_gradient",
    "finite_difference_gradient",
    "equilibrium_distance",
]


@dataclass(frozen=True)
class Vec3:
    """A 3D point or vector in metres."""

    x: float
    y: float
    z: float

    def __add__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def __mul__(self, scale: float) -> "Vec3":
        return Vec3(self.x * scale, self.y * scale, self.z * scale)

    __rmul__ = __mul__

    def __iter__(self):
        yield self.x
        yield self.y
        yield self.z

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def is_finite(self) -> bool:
        return math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)

    @classmethod
    def from_array(cls, a: Sequence[float]) -> "Vec3":
        return cls(float(a[0]), float(a[1]), float(a[2]))


@dataclass(frozen=True)
class Obstacle:
    """Infinitely tall cylinder: center (x, y) on the ground plane, radius in metres."""

    x: float
    y: float
    radius: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("Obstacle center must be finite")
        if not (self.radius > 0.0 and math.isfinite(self.radius)):
            raise ValueError(f"Obstacle radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class CostParams:
    """Weights and geometry of the positional cost.

    Weights are in 1/m so every term comes out dimensionless.  ``target`` may
    be None (no target term) and ``obstacles`` may be empty (no obstacle
    term).  ``zero_hat`` is the clamp floor for the reciprocal denominators.
    """

    w_coh: float
    w_sep: float
    w_tar: float
    w_obs: float
    r_drone: float = 0.0
    zero_hat: float = 1e-6
    target: Vec3 | None = None
    obstacles: tuple[Obstacle, ...] = ()

    def __post_init__(self) -> None:
        for name in ("w_coh", "w_sep", "w_tar", "w_obs"):
            w = getattr(self, name)
            if not (w >= 0.0 and math.isfinite(w)):
                raise ValueError(f"{name} must be a finite non-negative weight, got {w}")
        if not (self.r_drone >= 0.0 and math.isfinite(self.r_drone)):
            raise ValueError(f"r_drone must be non-negative, got {self.r_drone}")
        if not (self.zero_hat > 0.0 and math.isfinite(self.zero_hat)):
            raise ValueError(f"zero_hat must be positive, got {self.zero_hat}")
        if self.target is not None and not self.target.is_finite():
            raise ValueError("target must be finite")
        object.__setattr__(self, "obstacles", tuple(self.obstacles))

    @cached_property
    def _obstacle_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        # (k, 2) centers and (k,) radii, cached because params are reused
        # across every candidate evaluation of a control tick.
        centers = np.array([(o.x, o.y) for o in self.obstacles], dtype=float)
        radii = np.array([o.radius for o in self.obstacles], dtype=float)
        return centers, radii


@dataclass(frozen=True)
class CostBreakdown:
    """Per-term cost values; total is the plain sum."""

    coh: float
    sep: float
    tar: float
    obs: float
    total: float


@dataclass(frozen=True)
class CostGradient:
    """Per-term gradients; total is the vector sum of the four terms."""

    coh: Vec3
    sep: Vec3
    tar: Vec3
    obs: Vec3
    total: Vec3


_ZERO = Vec3(0.0, 0.0, 0.0)


def _position_array(p: Vec3 | Sequence[float]) -> np.ndarray:
    a = np.asarray(tuple(p) if isinstance(p, Vec3) else p, dtype=float)
    if a.shape != (3,):
        raise ValueError(f"position must have 3 components, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError(f"position must be finite, got {a}")
    return a


def _neighbor_array(neighbors: Iterable[Vec3] | np.ndarray) -> np.ndarray:
    if isinstance(neighbors, np.ndarray):
        a = neighbors.astype(float, copy=False)
    else:
        a = np.array([tuple(n) for n in neighbors], dtype=float)
    if a.size == 0:
        return a.reshape(0, 3)
    if a.ndim != 2 or a.shape[1] != 3:
        raise ValueError(f"neighbors must be an (n, 3) array, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError("neighbor positions must be finite")
    return a


def evaluate_cost(
    p_i: Vec3 | Sequence[float],
    neighbors: Iterable[Vec3] | np.ndarray,
    params: CostParams,
) -> CostBreakdown:
    """Evaluate the four cost terms at position p_i against a frozen neighborhood.

    Terms with zero weight, an empty neighborhood, no target, or no obstacles
    contribute exactly 0.  Raises ValueError on non-finite inputs.
    """
    p = _position_array(p_i)
    nbr = _neighbor_array(neighbors)
    h = nbr.shape[0]

    coh = sep = tar = obs = 0.0

    if h > 0:
        diff = p - nbr
        d2 = diff[:, 0] ** 2 + diff[:, 1] ** 2 + diff[:, 2] ** 2
        if params.w_coh > 0.0:
            coh = params.w_coh * float(d2.sum()) / h
        if params.w_sep > 0.0:
            gap = np.maximum(np.sqrt(d2) - 2.0 * params.r_drone, params.zero_hat)
            sep = params.w_sep * float((1.0 / gap**2).sum()) / h

    if params.w_tar > 0.0 and params.target is not None:
        centroid = (p + nbr.sum(axis=0)) / (h + 1) if h > 0 else p
        t = np.array(tuple(params.target), dtype=float)
        tar = params.w_tar * float(((t - centroid) ** 2).sum())

    k = len(params.obstacles)
    if params.w_obs > 0.0 and k > 0:
        centers, radii = params._obstacle_arrays
        dxy = np.hypot(p[0] - centers[:, 0], p[1] - centers[:, 1])
        clearance = np.maximum(dxy - radii - params.r_drone, params.zero_hat)
        obs = params.w_obs * float((1.0 / clearance**2).sum()) / k

    return CostBreakdown(coh=coh, sep=sep, tar=tar, obs=obs, total=coh + sep + tar + obs)


def evaluate_gradient(
    p_i: Vec3 | Sequence[float],
    neighbors: Iterable[Vec3] | np.ndarray,
    params: CostParams,
) -> CostGradient:
    """Analytical gradient of evaluate_cost with respect to p_i.

    Closed forms per term (u denotes the unit vector from the neighbor or
    obstacle center toward p_i, d the corresponding distance):

      grad coh = 2 w_coh (p - mean_j p_j)
      grad sep = -(2 w_sep / |H|) sum_j u_j / max(d_j - 2 r_drone, zero_hat)^3
      grad tar = (2 w_tar / (|H|+1)) (centroid - p_tar)
      grad obs = -(2 w_obs / |K|) sum_k u_k / max(d_k - r_k - r_drone, zero_hat)^3

    The obstacle term acts in the xy-plane only (z component 0).  Inside the
    clamp region the shifted distance is replaced by zero_hat, mirroring the
    cost clamp; at exactly coincident points the direction is undefined and a
    deterministic repulsion along +x is emitted (gradient along -x).
    """
    p = _position_array(p_i)
    nbr = _neighbor_array(neighbors)
    h = nbr.shape[0]

    g_coh = g_sep = g_tar = g_obs = _ZERO

    if h > 0:
        diff = p - nbr  # rows point from each neighbor toward p_i
        d = np.sqrt(diff[:, 0] ** 2 + diff[:, 1] ** 2 + diff[:, 2] ** 2)
        if params.w_coh > 0.0:
            g_coh = Vec3.from_array(2.0 * params.w_coh * (p - nbr.mean(axis=0)))
        if params.w_sep > 0.0:
            unit = np.empty_like(diff)
            safe = d > 0.0
            unit[safe] = diff[safe] / d[safe, None]
            unit[~safe] = (1.0, 0.0, 0.0)
            gap3 = np.maximum(d - 2.0 * params.r_drone, params.zero_hat) ** 3
            g_sep = Vec3.from_array(
                -(2.0 * params.w_sep / h) * (unit / gap3[:, None]).sum(axis=0)
            )

    if params.w_tar > 0.0 and params.target is not None:
        centroid = (p + nbr.sum(axis=0)) / (h + 1) if h > 0 else p
        t = np.array(tuple(params.target), dtype=float)
        g_tar = Vec3.from_array((2.0 * params.w_tar / (h + 1)) * (centroid - t))

    k = len(params.obstacles)
    if params.w_obs > 0.0 and k > 0:
        centers, radii = params._obstacle_arrays
        dvec = np.stack([p[0] - centers[:, 0], p[1] - centers[:, 1]], axis=1)
        dxy = np.hypot(dvec[:, 0], dvec[:, 1])
        unit2 = np.empty_like(dvec)
        safe = dxy > 0.0
        unit2[safe] = dvec[safe] / dxy[safe, None]
        unit2[~safe] = (1.0, 0.0)
        gap3 = np.maximum(dxy - radii - params.r_drone, params.zero_hat) ** 3
        gxy = -(2.0 * params.w_obs / k) * (unit2 / gap3[:, None]).sum(axis=0)
        g_obs = Vec3(float(gxy[0]), float(gxy[1]), 0.0)

    total = g_coh + g_sep + g_tar + g_obs
    return CostGradient(coh=g_coh, sep=g_sep, tar=g_tar, obs=g_obs, total=total)


def finite_difference_gradient(
    p_i: Vec3 | Sequence[float],
    neighbors: Iterable[Vec3] | np.ndarray,
    params: CostParams,
    h: float = 1e-6,
) -> Vec3:
    """Central-difference gradient of the total cost, the numerical oracle
    for evaluate_gradient.  Accurate only when p_i is well clear (>> h) of
    the clamp boundaries, where the cost is smooth.
    """
    if not h > 0.0:
        raise ValueError(f"step h must be positive, got {h}")
    p = _position_array(p_i)
    out = np.empty(3)
    for axis in range(3):
        hi = p.copy()
        lo = p.copy()
        hi[axis] += h
        lo[axis] -= h
        c_hi = evaluate_cost(hi, neighbors, params).total
        c_lo = evaluate_cost(lo, neighbors, params).total
        out[axis] = (c_hi - c_lo) / (2.0 * h)
    return Vec3.from_array(out)


def equilibrium_distance(w_coh: float, w_sep: float, r_drone: float = 0.0) -> float:
    """Separation at which a two-drone flock is stationary.

    With r_drone = 0 the cohesion and separation gradients balance at
    (w_sep / w_coh)^(1/4) exactly.  With r_drone > 0 the balance condition is
    w_coh * d * (d - 2 r_drone)^3 = w_sep with d > 2 r_drone, solved by
    bisection to machine precision (well past the 1e-9 m the callers need;
    the extra digits keep the residual gradient below 1e-9 too).
    """
    if not w_coh > 0.0:
        raise ValueError(f"w_coh must be positive for an equilibrium to exist, got {w_coh}")
    if not w_sep > 0.0:
        raise ValueError(f"w_sep must be positive, got {w_sep}")
    if r_drone < 0.0:
        raise ValueError(f"r_drone must be non-negative, got {r_drone}")
    if r_drone == 0.0:
        return (w_sep / w_coh) ** 0.25

    def excess(d: float) -> float:
        return w_coh * d * (d - 2.0 * r_drone) ** 3 - w_sep

    lo = 2.0 * r_drone  # excess(lo) = -w_sep < 0
    span = 1.0
    while excess(lo + span) < 0.0:
        span *= 2.0
    hi = lo + span
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break  # interval no longer representable
        if excess(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
