"""Billiard map of the periodic Lorentz gas with disks of radius sigma on Z^2.

Coordinates: ``theta`` runs clockwise around the disk starting at the top, so
the collision point is ``cell + sigma * (sin theta, cos theta)``; ``phi`` is
the outgoing angle to the outward normal, positive towards increasing theta.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import FlightCapExceeded, GrazingLaunch, InvalidConfig, SingularityStraddle

DEFAULT_LMAX = 1e6
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class TableParams:
    sigma: float

    def __post_init__(self):
        if not (0.0 < self.sigma < 0.5):
            raise InvalidConfig("sigma", f"{self.sigma!r} is not in (0, 1/2)")

    @property
    def tau_min(self) -> float:
        return 1.0 - 2.0 * self.sigma

    @property
    def curvature(self) -> float:
        return 1.0 / self.sigma


@dataclass(frozen=True)
class PhasePoint:
    theta: float
    phi: float
    cell: tuple[int, int] = (0, 0)

    def __post_init__(self):
        th = math.fmod(self.theta, TWO_PI)
        if th < 0.0:
            th += TWO_PI
        if th >= TWO_PI:
            th = 0.0
        object.__setattr__(self, "theta", th)
        if not (-0.5 * math.pi <= self.phi <= 0.5 * math.pi):
            raise ValueError(f"phi={self.phi} outside [-pi/2, pi/2]")
        object.__setattr__(self, "cell", (int(self.cell[0]), int(self.cell[1])))


@dataclass(frozen=True)
class HitRecord:
    cell: tuple[int, int]
    point: np.ndarray
    direction: np.ndarray
    tau: float


@dataclass(frozen=True)
class FlightResult:
    next: PhasePoint
    kappa: tuple[int, int]
    tau: float
    q: np.ndarray


@dataclass(frozen=True)
class TangentVector:
    dtheta: float
    dphi: float

    @property
    def slope(self) -> float:
        return self.dphi / self.dtheta

    def in_unstable_cone(self, table: TableParams, tau: float | None = None) -> bool:
        """Unstable cone 1 <= dphi/dtheta <= 1 + sigma/tau (tau defaults to tau_min)."""
        t = table.tau_min if tau is None else tau
        if self.dtheta == 0.0:
            return False
        s = self.slope
        return 1.0 <= s <= 1.0 + table.sigma / t

    def p_norm(self, p: PhasePoint, table: TableParams) -> float:
        return table.sigma * math.cos(p.phi) * abs(self.dtheta)

    def euclidean_norm(self, table: TableParams) -> float:
        # arclength r = sigma * theta
        return math.hypot(table.sigma * self.dtheta, self.dphi)


def to_cartesian(p: PhasePoint, table: TableParams) -> tuple[np.ndarray, np.ndarray]:
    px, py, vx, vy = K.launch(p.theta, p.phi, table.sigma)
    return np.array([p.cell[0] + px, p.cell[1] + py]), np.array([vx, vy])


def reverse(p: PhasePoint) -> PhasePoint:
    return PhasePoint(p.theta, -p.phi, p.cell)


def _check_launch(p: PhasePoint):
    if not abs(p.phi) < 0.5 * math.pi - K.GRAZE_TOL:
        raise GrazingLaunch(f"tangential launch at phi={p.phi}")


def next_collision(p: PhasePoint, table: TableParams, lmax: float = DEFAULT_LMAX) -> HitRecord:
    _check_launch(p)
    px, py, vx, vy = K.launch(p.theta, p.phi, table.sigma)
    status, i, j, tau, hx, hy = K.cast(px, py, vx, vy, table.sigma, lmax)
    if status == K.CAPPED:
        raise FlightCapExceeded(f"no scatterer within {lmax} lattice units")
    cell = (p.cell[0] + i, p.cell[1] + j)
    point = np.array([cell[0] + hx, cell[1] + hy])
    return HitRecord(cell, point, np.array([vx, vy]), tau)


def billiard_map(p: PhasePoint, table: TableParams, lmax: float = DEFAULT_LMAX) -> FlightResult:
    _check_launch(p)
    status, i, j, tau, th1, ph1, hx, hy, vx, vy = K.flight(p.theta, p.phi, table.sigma, lmax)
    if status == K.CAPPED:
        raise FlightCapExceeded(f"no scatterer within {lmax} lattice units")
    px, py, _, _ = K.launch(p.theta, p.phi, table.sigma)
    q = np.array([i + hx - px, j + hy - py])
    nxt = PhasePoint(th1, ph1, (p.cell[0] + i, p.cell[1] + j))
    return FlightResult(nxt, (i, j), tau, q)


def tangent_jacobian(p: PhasePoint, table: TableParams, h: float = 1e-7) -> np.ndarray:
    """Central-difference derivative of the billiard map in (theta, phi)."""
    if h <= 0.0:
        raise ValueError("h must be positive")
    base = billiard_map(p, table)
    cols = []
    for dth, dph in ((h, 0.0), (0.0, h)):
        plus = billiard_map(PhasePoint(p.theta + dth, p.phi + dph, p.cell), table)
        minus = billiard_map(PhasePoint(p.theta - dth, p.phi - dph, p.cell), table)
        if plus.kappa != base.kappa or minus.kappa != base.kappa:
            raise SingularityStraddle("perturbed points reach different scatterers")
        dtheta = math.remainder(plus.next.theta - minus.next.theta, TWO_PI)
        cols.append((dtheta / (2 * h), (plus.next.phi - minus.next.phi) / (2 * h)))
    return np.array(cols).T


def expansion_ratio(p: PhasePoint, image: PhasePoint, tau: float, slope: float,
                    image_slope: float, table: TableParams) -> float:
    """Closed-form Euclidean expansion of an unstable vector, in (r, phi) metric."""
    s = table.sigma
    geom = math.sqrt((s * s + image_slope**2) / (s * s + slope**2))
    return geom * tau / (s * math.cos(image.phi)) * (1.0 + slope + s * math.cos(p.phi) / tau)
