"""Displacement cells along corridors and the quantities attached to them.

A cell is the set of phase points whose next collision is ``xi' + N xi``
cells away: a long flight down the ``xi``-corridor that lands on the far
wall.  Geometric helpers work in the corridor frame, where ``xi`` points
along the positive x-axis and the opposite wall (through ``xi'``) lies above
the scatterer at the origin; for ``xi = (1, 0)`` this frame is the table's
own.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import _kernels as K
from .corridors import CorridorKey, convergent_pair, corridor_width, cross, enumerate_corridors, abar
from .dynamics import PhasePoint, TableParams, billiard_map
from .errors import (
    ChartViolation, ClosedCorridor, ExponentOutOfRange, InvalidConfig, NoTangentIntersection,
)
from .parallel import check_status, fsum, map_chunks
from .rng import StreamFactory

MIN_SAMPLES = 10_000


@dataclass(frozen=True)
class CellId:
    corridor: CorridorKey
    N: int

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be a positive integer")

    @property
    def kappa(self) -> tuple[int, int]:
        (p, q), (a, b) = self.corridor.xi, self.corridor.xi_prime
        return a + self.N * p, b + self.N * q

    @classmethod
    def along(cls, xi, N: int, sigma: float, side: int = 0) -> "CellId":
        """Cell N of the xi-corridor on side 0 (xi') or 1 (xi'')."""
        pair = convergent_pair(xi)
        key = CorridorKey((int(xi[0]), int(xi[1])), pair[side], corridor_width(xi, sigma))
        return cls(key, int(N))


@dataclass(frozen=True)
class CellMeasure:
    value: float
    regime: str  # "far": N^-3 branch (d/N < 2 sigma), "near": N^-1 branch


@dataclass(frozen=True)
class McEstimate:
    estimate: float
    se: float
    samples: int
    hits: int


@dataclass(frozen=True)
class SingularityAngles:
    theta_minus_xi: float
    theta_kappa: float
    theta_prime: float
    phi_prime_kappa: float
    predicted_theta_gap: float
    predicted_phi_gap: float

    @property
    def theta_gap(self) -> float:
        return abs(self.theta_minus_xi - self.theta_kappa)

    @property
    def phi_gap(self) -> float:
        return 0.5 * math.pi - self.phi_prime_kappa

    @property
    def theta_rel_error(self) -> float:
        return abs(self.theta_gap / self.predicted_theta_gap - 1.0)

    @property
    def phi_rel_error(self) -> float:
        return abs(self.phi_gap / self.predicted_phi_gap - 1.0)


@dataclass(frozen=True)
class LpEstimate:
    p: float
    value: float
    se: float
    fitted_constant: float
    samples: int


@dataclass(frozen=True)
class CharIncrement:
    t: tuple[float, float]
    real: float
    real_se: float
    imag: float
    imag_se: float
    prediction_4pi: float
    prediction_8pi: float
    samples: int

    @property
    def ratio_4pi(self) -> float:
        return self.real / self.prediction_4pi if self.prediction_4pi else math.nan

    @property
    def ratio_8pi(self) -> float:
        return self.real / self.prediction_8pi if self.prediction_8pi else math.nan

    @property
    def better_constant(self) -> str:
        if not self.prediction_4pi:
            return "undetermined"
        return "4pi" if abs(math.log(self.ratio_4pi)) <= abs(math.log(self.ratio_8pi)) else "8pi"


def cell_measure_leading(cell: CellId, sigma: float) -> CellMeasure:
    TableParams(sigma)
    xi = cell.corridor.xi
    d = corridor_width(xi, sigma)
    if d <= 0.0:
        raise ClosedCorridor(f"corridor {xi} is closed at sigma={sigma}")
    N = cell.N
    norm = math.hypot(*xi)
    near, far = 4.0 * sigma * sigma, d * d / (N * N)
    regime = "far" if far <= near else "near"
    return CellMeasure(min(near, far) / (4.0 * math.pi * N * norm * sigma), regime)


def tail_leading(H: float, sigma: float, nmax: int = 100_000) -> float:
    """Sum of leading cell measures over all cells with |kappa| > H."""
    total = []
    cs = enumerate_corridors(sigma)
    for key in cs.entries:
        d = key.width
        p, q = key.xi
        a, b = key.xi_prime
        norm = math.hypot(p, q)
        n = np.arange(1, nmax + 1, dtype=float)
        kn = np.hypot(a + n * p, b + n * q)
        vals = np.minimum(4 * sigma * sigma, d * d / n**2) / (4 * math.pi * n * norm * sigma)
        total.append(math.fsum(vals[kn > H]))
        if math.hypot(a + nmax * p, b + nmax * q) <= H or 2 * sigma * nmax < d:
            raise ValueError("nmax too small for this H")
        # analytic remainder: every cell past nmax is in the N^-3 branch
        total.append(d * d / (4 * math.pi * norm * sigma) * float(special.zeta(3, nmax + 1)))
    return math.fsum(total)


def _check_samples(samples):
    if samples < MIN_SAMPLES:
        raise InvalidConfig("samples", f"need at least {MIN_SAMPLES}, got {samples}")


def _one_step(stream: StreamFactory, sigma, start, count, psi_lo=0.0, psi_w=0.0):
    out = K.one_step_batch(*stream.key, start, count, sigma, K_LMAX, psi_lo, psi_w)
    check_status(out[2], start)
    return out


K_LMAX = 1e6


def direction_window(kappa, sigma: float) -> tuple[float, float]:
    """(lower edge, width) of flight directions that can join disk 0 to disk kappa."""
    r = math.hypot(*kappa)
    if r <= 2 * sigma:
        raise ValueError("kappa too short for a direction window")
    half = math.asin(2 * sigma / r)
    return math.atan2(kappa[1], kappa[0]) - half, 2 * half


def cell_measure_mc(cell: CellId, sigma: float, samples: int, stream: StreamFactory,
                    stratified: bool = False, workers: int | None = None) -> McEstimate:
    """Monte Carlo mu(kappa = xi' + N xi) with a binomial standard error.

    With ``stratified`` the samples are drawn from mu conditioned on the
    flight direction lying in the cone that can reach the target disk, and
    the hit fraction is rescaled by that cone's mu-mass.
    """
    TableParams(sigma)
    _check_samples(samples)
    a, b = cell.kappa
    lo, w = direction_window((a, b), sigma) if stratified else (0.0, 0.0)

    def chunk(start, count):
        _, _, _, kx, ky, _, _, _ = _one_step(stream, sigma, start, count, lo, w)
        return int(np.count_nonzero((kx == a) & (ky == b)))

    hits = sum(map_chunks(chunk, samples, workers))
    frac = hits / samples
    scale = w / (2 * math.pi) if stratified else 1.0
    se = scale * math.sqrt(frac * (1 - frac) / samples)
    return McEstimate(scale * frac, se, samples, hits)


def _tangent_psi(X, H, sigma):
    """Direction of the line below a disk at (X, H) and above a disk at the origin."""
    R = math.hypot(X, H)
    if 2 * sigma >= R:
        raise NoTangentIntersection("disks overlap the tangent configuration")
    return -math.acos(2 * sigma / R) - math.atan2(X, H)


def singularity_angles(xi, M: int, sigma: float) -> SingularityAngles:
    """Exact tangent geometry near cell M of the xi-corridor, against its asymptotics.

    Angles are in the corridor frame.  ``theta_minus_xi`` and ``theta_kappa``
    are the tangency points on the origin disk of its common tangents with
    the disks at -xi and at kappa = xi' - M xi; ``(theta_prime,
    phi_prime_kappa)`` is the outgoing state where the common tangent of the
    disks at -xi and kappa meets the origin disk.
    """
    TableParams(sigma)
    if M < 2:
        raise ValueError("M must be at least 2")
    d = corridor_width(xi, sigma)
    if d <= 0.0:
        raise ClosedCorridor(f"corridor {tuple(xi)} is closed at sigma={sigma}")
    L = math.hypot(*xi)
    xp = convergent_pair(xi)[0]
    ux, uy = xi[0] / L, xi[1] / L
    X = xp[0] * ux + xp[1] * uy - M * L
    H = abs(cross(xi, xp)) / L

    theta_minus_xi = 0.0  # the wall line is tangent at the top of the origin disk
    theta_kappa = -_tangent_psi(X, H, sigma)

    psi2 = _tangent_psi(X + L, H, sigma)
    nx, ny = -math.sin(psi2), math.cos(psi2)
    c2 = -L * nx + sigma  # offset of the line n . x = c2 through the -xi tangency
    if abs(c2) >= sigma:
        raise NoTangentIntersection(f"tangent misses the origin disk at M={M}")
    vx, vy = math.cos(psi2), math.sin(psi2)
    s = math.sqrt(sigma * sigma - c2 * c2)
    hx, hy = c2 * nx - s * vx, c2 * ny - s * vy
    theta_prime, phi_prime = K.reflect_to_coords(hx, hy, vx, vy)
    theta_prime = math.remainder(theta_prime, 2 * math.pi)

    return SingularityAngles(
        theta_minus_xi, theta_kappa, theta_prime, phi_prime,
        d / (L * M), math.sqrt(2 * d / (sigma * M)),
    )


def _frame(xi):
    """Corridor frame: unit xi, upward normal towards xi', and its handedness."""
    L = math.hypot(*xi)
    xp = convergent_pair(xi)[0]
    side = 1 if cross(xi, xp) > 0 else -1
    u = (xi[0] / L, xi[1] / L)
    nu = (-side * u[1], side * u[0])
    return L, xp, nu, side


def to_table_coords(theta: float, phi: float, xi) -> tuple[float, float]:
    """Corridor-frame (theta, phi) as coordinates on the table."""
    _, _, nu, side = _frame(xi)
    top = math.atan2(nu[0], nu[1])
    return (top + side * theta) % (2 * math.pi), side * phi


def chart_map(theta: float, phi: float, xi, sigma: float) -> tuple[float, float]:
    """(alpha, z): angle to the wall line and its crossing point in units of |xi|."""
    L = math.hypot(*xi)
    alpha = 0.5 * math.pi - theta - phi
    z = sigma / L * ((1.0 - math.cos(theta)) / math.tan(alpha) + math.sin(theta))
    return alpha, z


def volume_form_check(theta: float, phi: float, xi, sigma: float, h: float) -> float:
    """Relative gap between the two sides of the chart volume identity.

    Forward differences, so the discrepancy is O(h).
    """
    TableParams(sigma)
    if not h > 0.0:
        raise ValueError("h must be positive")
    L, xp, _, _ = _frame(xi)
    gth, gph = to_table_coords(theta, phi, xi)
    res = billiard_map(PhasePoint(gth, gph), TableParams(sigma))
    if cross(xi, res.kappa) != cross(xi, xp):
        raise ChartViolation(f"next collision {res.kappa} is not on the opposite wall")
    a0, z0 = chart_map(theta, phi, xi, sigma)
    a1, z1 = chart_map(theta + h, phi, xi, sigma)
    a2, z2 = chart_map(theta, phi + h, xi, sigma)
    det = ((a1 - a0) * (z2 - z0) - (a2 - a0) * (z1 - z0)) / (h * h)
    lhs = L / (4 * math.pi * sigma) * math.sin(a0) * abs(det)
    rhs = math.cos(phi) / (4 * math.pi)
    return abs(lhs - rhs) / rhs


def sample_chart_points(xi, sigma: float, count: int, stream: StreamFactory,
                        theta_max: float = 0.5 * math.pi - 1e-3) -> np.ndarray:
    """Corridor-frame (theta, phi) points in the chart, by rejection from mu."""
    out = []
    trial = 0
    L, xp, _, _ = _frame(xi)
    while len(out) < count:
        u1, u2 = stream.uniforms(trial, 2)
        trial += 1
        theta = theta_max * (2 * u1 - 1)
        phi = math.asin(2 * u2 - 1)
        alpha = 0.5 * math.pi - theta - phi
        if not 0.0 < alpha < math.pi or abs(phi) > 0.5 * math.pi - 1e-3:
            continue
        gth, gph = to_table_coords(theta, phi, xi)
        res = billiard_map(PhasePoint(gth, gph), TableParams(sigma))
        if cross(xi, res.kappa) == cross(xi, xp):
            out.append((theta, phi))
    return np.array(out)


def kappa_lp_norm_mc(p: float, sigma: float, samples: int, stream: StreamFactory,
                     bootstrap: int = 200, workers: int | None = None) -> LpEstimate:
    """(E|kappa|^p)^(1/p) with a bootstrap standard error over sample chunks."""
    if not 1.0 <= p < 2.0:
        raise ExponentOutOfRange(f"p={p} outside [1, 2)")
    TableParams(sigma)
    _check_samples(samples)

    def chunk(start, count):
        _, _, _, kx, ky, _, _, _ = _one_step(stream, sigma, start, count)
        return float(np.sum(np.hypot(kx, ky) ** p)), count

    parts = map_chunks(chunk, samples, workers)
    sums = np.array([s for s, _ in parts])
    counts = np.array([c for _, c in parts], dtype=float)
    value = (fsum(sums) / samples) ** (1.0 / p)
    rng = np.random.Generator(np.random.Philox(key=np.array(stream.key)))
    idx = rng.integers(0, len(parts), size=(bootstrap, len(parts)))
    boot = (sums[idx].sum(axis=1) / counts[idx].sum(axis=1)) ** (1.0 / p)
    se = float(np.std(boot, ddof=1)) if len(parts) > 1 else math.nan
    const = value * sigma * (p * (2.0 - p)) ** (1.0 / p)
    return LpEstimate(p, value, se, const, samples)


def tail_prob(H: float, sigma: float, samples: int, stream: StreamFactory,
              workers: int | None = None) -> McEstimate:
    """mu(|kappa| > H) with a binomial standard error."""
    if H < 2:
        raise InvalidConfig("H", "must be at least 2")
    TableParams(sigma)
    _check_samples(samples)
    h2 = float(H) * float(H)

    def chunk(start, count):
        _, _, _, kx, ky, _, _, _ = _one_step(stream, sigma, start, count)
        return int(np.count_nonzero(kx * kx + ky * ky > h2))

    hits = sum(map_chunks(chunk, samples, workers))
    frac = hits / samples
    return McEstimate(frac, math.sqrt(frac * (1 - frac) / samples), samples, hits)


def tail_probs(Hs, sigma: float, samples: int, stream: StreamFactory,
               workers: int | None = None) -> list[McEstimate]:
    """tail_prob for several levels from one shared sample."""
    Hs = [float(h) for h in Hs]
    if min(Hs) < 2:
        raise InvalidConfig("H", "must be at least 2")
    TableParams(sigma)
    _check_samples(samples)
    h2 = np.array(Hs) ** 2

    def chunk(start, count):
        _, _, _, kx, ky, _, _, _ = _one_step(stream, sigma, start, count)
        r2 = (kx * kx + ky * ky).astype(float)
        return [int(np.count_nonzero(r2 > v)) for v in h2]

    rows = map_chunks(chunk, samples, workers)
    out = []
    for i in range(len(Hs)):
        hits = sum(r[i] for r in rows)
        frac = hits / samples
        out.append(McEstimate(frac, math.sqrt(frac * (1 - frac) / samples), samples, hits))
    return out


@dataclass
class TailReport:
    sigma: float
    samples: int
    H: list
    estimate: list
    se: list
    hits: list
    slope: float
    slope_se: float
    leading: list
    kind: str = "tail"


def tail_sweep(Hs, sigma: float, samples: int, stream: StreamFactory,
               workers: int | None = None, with_leading: bool = True) -> TailReport:
    """Tail probabilities over several levels and the fitted log-log slope.

    The slope is a weighted least-squares fit of log tail against log H with
    weights from the binomial standard errors.
    """
    Hs = sorted(float(h) for h in Hs)
    est = tail_probs(Hs, sigma, samples, stream, workers)
    p = np.array([e.estimate for e in est])
    if np.any(p <= 0) or len(Hs) < 2:
        slope = slope_se = math.nan
    else:
        x = np.log(Hs)
        w = p / np.array([e.se for e in est])  # 1 / SE of log p
        if len(Hs) > 3:
            coef, cov = np.polyfit(x, np.log(p), 1, w=w, cov="unscaled")
            slope, slope_se = float(coef[0]), float(math.sqrt(cov[0, 0]))
        else:
            slope, slope_se = float(np.polyfit(x, np.log(p), 1, w=w)[0]), math.nan
    leading = [tail_leading(h, sigma) for h in Hs] if with_leading else []
    return TailReport(sigma, samples, Hs, p.tolist(), [e.se for e in est],
                      [e.hits for e in est], slope, slope_se, leading)


def char_increment(t, sigma: float, samples: int, stream: StreamFactory,
                   workers: int | None = None) -> CharIncrement:
    """Monte Carlo mu(1 - exp(i t.kappa)) with the log-scale predictions.

    Both normalisations of the leading term, with 4 pi sigma and 8 pi sigma
    in the denominator, are returned; the corridor form counts each
    (xi, xi') pair once.
    """
    TableParams(sigma)
    _check_samples(samples)
    tx, ty = float(t[0]), float(t[1])
    norm = math.hypot(tx, ty)
    if norm >= 1.0:
        raise InvalidConfig("t", "|t| must be below 1")

    def chunk(start, count):
        _, _, _, kx, ky, _, _, _ = _one_step(stream, sigma, start, count)
        arg = tx * kx + ty * ky
        re = 1.0 - np.cos(arg)
        im = -np.sin(arg)
        return (float(np.sum(re)), float(np.sum(re * re)),
                float(np.sum(im)), float(np.sum(im * im)))

    parts = map_chunks(chunk, samples, workers)
    cols = list(zip(*parts))
    re_m = fsum(cols[0]) / samples
    im_m = fsum(cols[2]) / samples
    re_se = math.sqrt(max(fsum(cols[1]) / samples - re_m * re_m, 0.0) / samples)
    im_se = math.sqrt(max(fsum(cols[3]) / samples - im_m * im_m, 0.0) / samples)
    if norm == 0.0:
        p4 = p8 = 0.0
    else:
        base = abar((tx, ty), sigma) * math.log(1.0 / norm) / (math.pi * sigma)
        p4, p8 = base / 4.0, base / 8.0
    return CharIncrement((tx, ty), re_m, re_se, im_m, im_se, p4, p8, samples)
