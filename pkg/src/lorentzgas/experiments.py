"""Monte Carlo harness for the limit laws of the displacement walk.

Every experiment draws its trials from a counter-based stream keyed by
``(seed, operation)``, cuts them into fixed-size chunks, reduces each chunk
independently and combines the chunk results in chunk order.  Reports are
therefore bit-identical for any number of worker threads.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import _kernels as K
from .dynamics import DEFAULT_LMAX, PhasePoint, TableParams
from .errors import FlightCapExceeded, GrazingLaunch, InsufficientTrials, InvalidConfig
from .parallel import check_status, fsum, map_chunks
from .rng import MASK64, StreamFactory

log = logging.getLogger(__name__)

LIMIT_VARIANCE = 1.0 / math.pi  # per-coordinate variance of the limit Gaussian
ORIGIN_DENSITY = 0.5  # its density at 0


def b_n_sigma(n: int, sigma: float) -> float:
    """Superdiffusive normalisation sqrt(n log(n / sigma^2)) / (sqrt(4 pi) sigma)."""
    return math.sqrt(n * math.log(n / sigma**2)) / (math.sqrt(4.0 * math.pi) * sigma)


def limit_density(x) -> float:
    """Density of the limit Gaussian N(0, I/pi) at a point of the plane."""
    return ORIGIN_DENSITY * math.exp(-0.5 * math.pi * (x[0] ** 2 + x[1] ** 2))


@dataclass(frozen=True)
class ExperimentConfig:
    sigma: float = 0.1
    n: int = 1000
    trials: int = 10_000
    seed: int = 0
    t_grid: tuple = ((1e-3, 0.0),)
    s_grid: tuple = (0.25, 0.5, 0.75)
    H: float | None = 100.0
    H_hat: float | None = 1000.0
    j_max: int = 10
    threads: int | None = None
    targets: tuple = ((0, 0),)

    def __post_init__(self):
        if not isinstance(self.sigma, (int, float)) or not 0.0 < self.sigma < 0.5:
            raise InvalidConfig("sigma", f"{self.sigma!r} is not in (0, 1/2)")
        for name in ("n", "trials"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise InvalidConfig(name, f"must be a positive integer, got {v!r}")
        if not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed <= MASK64:
            raise InvalidConfig("seed", "must be an integer in [0, 2^64)")
        if self.H is not None and self.H <= 0:
            raise InvalidConfig("H", "must be positive")
        if self.H is not None and self.H_hat is not None and not self.H < self.H_hat:
            raise InvalidConfig("H_hat", f"H={self.H} must be below H_hat={self.H_hat}")
        if not isinstance(self.j_max, (int, np.integer)) or not 1 <= self.j_max <= 50:
            raise InvalidConfig("j_max", "must be an integer in [1, 50]")
        if self.threads is not None and (not isinstance(self.threads, int) or self.threads < 1):
            raise InvalidConfig("threads", "must be a positive integer")
        if any(not 0.0 < s <= 1.0 for s in self.s_grid):
            raise InvalidConfig("s_grid", "entries must lie in (0, 1]")
        object.__setattr__(self, "s_grid", tuple(sorted(float(s) for s in self.s_grid)))
        try:
            tg = tuple((float(a), float(b)) for a, b in self.t_grid)
            tt = tuple((int(a), int(b)) for a, b in self.targets)
        except (TypeError, ValueError):
            raise InvalidConfig("t_grid", "expected a list of 2-vectors") from None
        object.__setattr__(self, "t_grid", tg)
        object.__setattr__(self, "targets", tt)

    def to_dict(self, with_threads: bool = True) -> dict:
        d = asdict(self)
        d["t_grid"] = [list(t) for t in self.t_grid]
        d["s_grid"] = list(self.s_grid)
        d["targets"] = [list(t) for t in self.targets]
        if not with_threads:
            d.pop("threads")
        return d

    def config_hash(self) -> str:
        """SHA-256 of the canonical config, thread count excluded."""
        blob = json.dumps(self.to_dict(with_threads=False), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def stream(self, operation: str) -> StreamFactory:
        return StreamFactory(self.seed, operation)


@dataclass
class CltLevel:
    n: int
    b: float
    ks_x: float
    ks_y: float
    var_x: float
    var_y: float


@dataclass
class CltReport:
    sigma: float
    n: int
    trials: int
    b_n_sigma: float
    covariance: list
    covariance_se: list
    robust_covariance: list
    ks: list
    ks_pvalue: list
    scaled_covariance: list
    limit_variance: float
    levels: list
    histogram_edges: list
    histogram_counts: list
    max_step: int
    mean_flight_time: float
    mean_flight_time_se: float
    config_hash: str = ""
    kind: str = "clt"


@dataclass
class LltTarget:
    cell: list
    hits: int
    estimate: float
    se: float
    target: float


@dataclass
class LltReport:
    sigma: float
    n: int
    trials: int
    b_n_sigma: float
    hits: int
    estimate: float
    se: float
    ci_half_width: float
    target: float
    expected_hits: float
    extra: list = field(default_factory=list)
    config_hash: str = ""
    kind: str = "llt"


@dataclass
class WipLevel:
    s: float
    steps: int
    covariance: list
    covariance_se: list
    ratio_to_linear: list


@dataclass
class WipIncrement:
    s0: float
    s1: float
    covariance: list
    ratio_to_linear: list


@dataclass
class WipReport:
    sigma: float
    n: int
    trials: int
    b_n_sigma: float
    levels: list
    increments: list
    increment_correlations: list
    correlation_se: float
    config_hash: str = ""
    kind: str = "wip"


@dataclass
class CorrReport:
    sigma: float
    trials: int
    H: float
    H_hat: float
    lags: list
    truncated: list
    truncated_se: list
    short_long: list
    short_long_se: list
    long_full: list
    long_full_se: list
    autocovariance: list
    autocovariance_se: list
    fit_lags: list
    fit_slope: float
    fit_slope_ci: list
    fit_intercept: float
    config_hash: str = ""
    kind: str = "correlation"


@dataclass
class InvarianceReport:
    sigma: float
    samples: int
    steps: int
    ks_theta: float
    ks_phi: float
    ks_theta_exact: float
    ks_phi_exact: float
    kind: str = "invariance"


@dataclass(frozen=True)
class BirkhoffResult:
    kappa: tuple[int, int]
    max_step: int
    total_flight_time: float
    checkpoints: dict
    end: PhasePoint


def sample_mu(stream: StreamFactory, trial: int = 0) -> PhasePoint:
    """A mu-distributed phase point on the disk of the origin cell."""
    theta, phi = K.sample_mu_point(*stream.key, trial)
    return PhasePoint(theta, phi)


def birkhoff_kappa(x0: PhasePoint, n: int, table: TableParams, s_grid=(),
                   lmax: float = DEFAULT_LMAX) -> BirkhoffResult:
    """Accumulated displacement over n collisions from x0."""
    if n < 0:
        raise ValueError("n must be non-negative")
    steps = sorted({max(1, math.floor(n * s)) for s in s_grid}) if n else []
    cps = np.array(steps, dtype=np.int64)
    ck = np.zeros((len(steps), 2), np.int64)
    if n and not abs(x0.phi) < 0.5 * math.pi - K.GRAZE_TOL:
        raise GrazingLaunch(f"tangential launch at phi={x0.phi}")
    st, fail, kx, ky, big, ttot, th, ph = K.walk(x0.theta, x0.phi, table.sigma, n, cps, ck, lmax)
    if st != K.OK:
        raise FlightCapExceeded(f"flight {fail} of the trajectory failed (status {st})")
    marks = {s: (int(ck[steps.index(max(1, math.floor(n * s)))][0]),
                 int(ck[steps.index(max(1, math.floor(n * s)))][1])) for s in s_grid} if n else {}
    end = PhasePoint(th, ph, (x0.cell[0] + kx, x0.cell[1] + ky))
    return BirkhoffResult((int(kx), int(ky)), int(big), float(ttot), marks, end)


def _birkhoff_run(config: ExperimentConfig, operation: str, checkpoints: list[int]):
    stream = config.stream(operation)
    cps = np.array(checkpoints, dtype=np.int64)

    def chunk(start, count):
        kx, ky, ck, big, ttot, status, _ = K.birkhoff_batch(
            *stream.key, start, count, config.sigma, config.n, cps, DEFAULT_LMAX)
        check_status(status, start)
        return kx, ky, ck, int(big.max()), float(np.sum(ttot)), float(np.sum(ttot * ttot))

    parts = map_chunks(chunk, config.trials, config.threads)
    kx = np.concatenate([p[0] for p in parts])
    ky = np.concatenate([p[1] for p in parts])
    ck = np.concatenate([p[2] for p in parts])
    big = max(p[3] for p in parts)
    tsum = fsum([p[4] for p in parts])
    tsq = fsum([p[5] for p in parts])
    return kx, ky, ck, big, tsum, tsq


def _cov(x: np.ndarray, y: np.ndarray):
    """Sample covariance matrix of (x, y) and the standard errors of its entries."""
    z = np.stack([x - x.mean(), y - y.mean()])
    T = z.shape[1]
    cov = np.empty((2, 2))
    se = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            prod = z[i] * z[j]
            cov[i, j] = prod.mean()
            se[i, j] = prod.std(ddof=1) / math.sqrt(T)
    return cov, se


IQR_GAUSS = 2.0 * stats.norm.ppf(0.75)  # interquartile range of a standard normal


def _robust_cov(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Covariance of the Gaussian with the same interquartile spreads.

    The displacement has a log-divergent second moment, so the sample
    covariance at finite n is dominated by the longest flights; this
    estimate tracks the bulk of the distribution instead.
    """
    def var(v):
        q1, q3 = np.percentile(v, [25, 75])
        return ((q3 - q1) / IQR_GAUSS) ** 2

    vx, vy = var(x), var(y)
    cxy = 0.25 * (var(x + y) - var(x - y))
    return np.array([[vx, cxy], [cxy, vy]])


def _levels(n: int) -> list[int]:
    out = [10**k for k in range(1, 20) if 10**k < n]
    return out + [n]


def clt_experiment(config: ExperimentConfig) -> CltReport:
    """Covariance and marginal KS distances of kappa_n / b_{n, sigma}."""
    if config.trials < 1000:
        raise InvalidConfig("trials", "the CLT experiment needs at least 1000 trials")
    if config.n < 2:
        raise InvalidConfig("n", "the CLT experiment needs n >= 2")
    levels = _levels(config.n)
    kx, ky, ck, big, tsum, tsq = _birkhoff_run(config, "clt", levels)
    b = b_n_sigma(config.n, config.sigma)
    x, y = kx / b, ky / b
    cov, se = _cov(x, y)
    sd = math.sqrt(LIMIT_VARIANCE)
    ks = [stats.kstest(v, "norm", args=(0.0, sd)) for v in (x, y)]
    rows = []
    for c, m in enumerate(levels):
        bm = b_n_sigma(m, config.sigma)
        xm, ym = ck[:, c, 0] / bm, ck[:, c, 1] / bm
        rows.append(CltLevel(m, bm, float(stats.kstest(xm, "norm", args=(0.0, sd)).statistic),
                             float(stats.kstest(ym, "norm", args=(0.0, sd)).statistic),
                             float(np.var(xm)), float(np.var(ym))))
    raw, _ = _cov(kx.astype(float), ky.astype(float))
    scaled = 4 * math.pi * config.sigma**2 * raw / (config.n * math.log(config.n))
    edges = np.linspace(-4 * sd, 4 * sd, 65)
    counts, _ = np.histogram(x, bins=edges)
    steps = config.trials * config.n
    mean_tau = tsum / steps
    return CltReport(
        sigma=config.sigma, n=config.n, trials=config.trials, b_n_sigma=b,
        covariance=cov.tolist(), covariance_se=se.tolist(),
        robust_covariance=_robust_cov(x, y).tolist(), ks=[float(r.statistic) for r in ks], ks_pvalue=[float(r.pvalue) for r in ks],
        scaled_covariance=scaled.tolist(), limit_variance=LIMIT_VARIANCE, levels=rows,
        histogram_edges=edges.tolist(), histogram_counts=counts.tolist(), max_step=big,
        mean_flight_time=mean_tau,
        # flight times within a trajectory are correlated; this is the naive per-flight SE
        mean_flight_time_se=math.sqrt(max(tsq / steps - mean_tau**2, 0.0) / steps),
        config_hash=config.config_hash(),
    )


def llt_experiment(config: ExperimentConfig) -> LltReport:
    """Return frequency of kappa_n to the origin (and optional extra cells), scaled by b^2."""
    b = b_n_sigma(config.n, config.sigma)
    b2 = b * b
    expected = config.trials * ORIGIN_DENSITY / b2
    if expected < 10:
        raise InsufficientTrials(
            f"expected about {expected:.1f} returns to the origin; at least 10 are needed")
    if expected < 100:
        log.warning("only about %.0f returns expected; the estimate will be noisy", expected)
    targets = [(0, 0)] + [t for t in config.targets if tuple(t) != (0, 0)]
    tarr = np.array(targets, dtype=np.int64)
    stream = config.stream("llt")

    def chunk(start, count):
        hits, bad = K.return_hits_batch(*stream.key, start, count, config.sigma, config.n,
                                        tarr, DEFAULT_LMAX)
        if bad:
            raise FlightCapExceeded(f"{bad} trajectories failed in trials {start}..{start + count - 1}")
        return hits

    hits = np.sum(np.array(map_chunks(chunk, config.trials, config.threads)), axis=0)
    rows = []
    for cell, h in zip(targets, hits.tolist()):
        p = h / config.trials
        se = b2 * math.sqrt(p * (1 - p) / config.trials)
        rows.append(LltTarget(list(cell), int(h), b2 * p, se, limit_density((cell[0] / b, cell[1] / b))))
    origin = rows[0]
    return LltReport(
        sigma=config.sigma, n=config.n, trials=config.trials, b_n_sigma=b, hits=origin.hits,
        estimate=origin.estimate, se=origin.se, ci_half_width=1.959963984540054 * origin.se,
        target=ORIGIN_DENSITY, expected_hits=expected, extra=rows[1:],
        config_hash=config.config_hash(),
    )


def wip_probe(config: ExperimentConfig) -> WipReport:
    """Finite-dimensional covariances of the rescaled walk s -> kappa_{floor(ns)} / b."""
    if not config.s_grid:
        raise InvalidConfig("s_grid", "must not be empty")
    grid = sorted(set(config.s_grid) | {1.0})
    steps = [max(1, math.floor(config.n * s)) for s in grid]
    uniq = sorted(set(steps))
    _, _, ck, _, _, _ = _birkhoff_run(config, "wip", uniq)
    b = b_n_sigma(config.n, config.sigma)
    pos = [ck[:, uniq.index(m), :] / b for m in steps]
    full, _ = _cov(pos[-1][:, 0], pos[-1][:, 1])
    diag = np.diag(full)
    levels = []
    for s, m, z in zip(grid, steps, pos):
        cov, se = _cov(z[:, 0], z[:, 1])
        levels.append(WipLevel(s, m, cov.tolist(), se.tolist(), (np.diag(cov) / (s * diag)).tolist()))
    incs = []
    prev_s, prev = 0.0, np.zeros_like(pos[0])
    deltas = []
    for s, z in zip(grid, pos):
        dz = z - prev
        cov, _ = _cov(dz[:, 0], dz[:, 1])
        incs.append(WipIncrement(prev_s, s, cov.tolist(), (np.diag(cov) / ((s - prev_s) * diag)).tolist()))
        deltas.append(dz)
        prev_s, prev = s, z
    corr = []
    for a, c in zip(deltas, deltas[1:]):
        corr.append([float(np.corrcoef(a[:, k], c[:, k])[0, 1]) for k in range(2)])
    return WipReport(
        sigma=config.sigma, n=config.n, trials=config.trials, b_n_sigma=b,
        levels=levels, increments=incs, increment_correlations=corr,
        correlation_se=1.0 / math.sqrt(config.trials), config_hash=config.config_hash(),
    )


def _lag_sums(seq: np.ndarray, H: float, H_hat: float) -> np.ndarray:
    """Per-lag sums and sums of squares of the correlation integrands for one chunk."""
    k = seq.astype(float)
    r = np.hypot(k[..., 0], k[..., 1])
    short = k * (r <= H)[..., None]
    r_short = r * (r <= H)
    r_long = r * (r > H)
    r_vlong = r * (r > H_hat)
    series = [
        np.sum(short[:, :1] * short, axis=2),  # kappa' . kappa' o T^j
        r_short[:, :1] * r_vlong,  # |kappa'| |kappa''''| o T^j
        r_long[:, :1] * r,  # |kappa''| |kappa| o T^j
        k[:, :1, 0] * k[..., 0], k[:, :1, 0] * k[..., 1],
        k[:, :1, 1] * k[..., 0], k[:, :1, 1] * k[..., 1],
    ]
    out = np.stack(series)  # (7, trials, lags)
    return np.stack([out.sum(axis=1), (out * out).sum(axis=1)])


def correlation_experiment(config: ExperimentConfig) -> CorrReport:
    """Lagged correlation integrands of the displacement, with an exponential fit.

    The fit is a weighted least-squares line through log|E[kappa' . kappa' o T^j]|
    over the lags j >= 1 whose estimate exceeds three standard errors.
    """
    if config.H is None or config.H_hat is None:
        raise InvalidConfig("H", "both truncation levels are required")
    stream = config.stream("correlation")
    steps = config.j_max + 1

    def chunk(start, count):
        seq, status = K.sequence_batch(*stream.key, start, count, config.sigma, steps, DEFAULT_LMAX)
        check_status(status, start)
        return _lag_sums(seq, config.H, config.H_hat)

    parts = np.stack(map_chunks(chunk, config.trials, config.threads))  # (chunks, 2, 7, lags)
    T = config.trials
    mean = np.empty(parts.shape[2:])
    se = np.empty(parts.shape[2:])
    for a in range(parts.shape[2]):
        for j in range(parts.shape[3]):
            m = fsum(parts[:, 0, a, j]) / T
            sq = fsum(parts[:, 1, a, j]) / T
            mean[a, j] = m
            se[a, j] = math.sqrt(max(sq - m * m, 0.0) / T)
    lags = list(range(steps))
    trunc, trunc_se = mean[0], se[0]
    fit = [j for j in range(1, steps) if abs(trunc[j]) > 3 * trunc_se[j]]
    slope = intercept = math.nan
    ci = [math.nan, math.nan]
    if len(fit) >= 3:
        x = np.array(fit, dtype=float)
        y = np.log(np.abs(trunc[fit]))
        w = np.abs(trunc[fit]) / trunc_se[fit]  # 1 / SE of log|C|
        if len(fit) >= 4:
            coef, cov = np.polyfit(x, y, 1, w=w, cov=True)
            half = float(stats.t.ppf(0.975, len(fit) - 2)) * math.sqrt(cov[0, 0])
        else:
            coef = np.polyfit(x, y, 1, w=w)
            half = math.inf
        slope, intercept = float(coef[0]), float(coef[1])
        ci = [float(slope - half), float(slope + half)]
    auto = mean[3:7].T.reshape(steps, 2, 2)
    auto_se = se[3:7].T.reshape(steps, 2, 2)
    return CorrReport(
        sigma=config.sigma, trials=T, H=config.H, H_hat=config.H_hat, lags=lags,
        truncated=trunc.tolist(), truncated_se=trunc_se.tolist(),
        short_long=mean[1].tolist(), short_long_se=se[1].tolist(),
        long_full=mean[2].tolist(), long_full_se=se[2].tolist(),
        autocovariance=auto.tolist(), autocovariance_se=auto_se.tolist(),
        fit_lags=fit, fit_slope=slope, fit_slope_ci=ci, fit_intercept=intercept,
        config_hash=config.config_hash(),
    )


def _phi_cdf(phi):
    return 0.5 * (1.0 + np.sin(phi))


def pushforward(sigma: float, samples: int, steps: int, stream: StreamFactory,
                workers: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(theta, phi) of T^steps applied to mu-samples."""
    def chunk(start, count):
        th, ph, status = K.push_batch(*stream.key, start, count, sigma, steps, DEFAULT_LMAX)
        check_status(status, start)
        return th, ph

    parts = map_chunks(chunk, samples, workers)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def invariance_test(samples: int, steps: int, sigma: float = 0.1, seed: int = 0,
                    workers: int | None = None) -> InvarianceReport:
    """KS distances between the steps-fold pushforward of mu and fresh mu-samples."""
    TableParams(sigma)
    if steps < 0:
        raise InvalidConfig("steps", "must be non-negative")
    if samples < 1:
        raise InvalidConfig("samples", "must be positive")
    th, ph = pushforward(sigma, samples, steps, StreamFactory(seed, "invariance-push"), workers)
    th0, ph0 = pushforward(sigma, samples, 0, StreamFactory(seed, "invariance-fresh"), workers)
    return InvarianceReport(
        sigma=sigma, samples=samples, steps=steps,
        ks_theta=float(stats.ks_2samp(th, th0).statistic),
        ks_phi=float(stats.ks_2samp(ph, ph0).statistic),
        ks_theta_exact=float(stats.kstest(th, stats.uniform(0.0, 2 * math.pi).cdf).statistic),
        ks_phi_exact=float(stats.kstest(ph, _phi_cdf).statistic),
    )
