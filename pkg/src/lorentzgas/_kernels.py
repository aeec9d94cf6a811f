"""Compiled inner loops: single flights, batches of flights and trajectories.

Positions are kept relative to the centre of the departure scatterer, so the
only large numbers are integer cell offsets.  The ray walks the Voronoi cells
of the lattice (unit squares centred on lattice points); since sigma < 1/2
every disk lies strictly inside its own cell, so one disk test per visited
cell finds the first hit.
"""
from __future__ import annotations

import math

import numba as nb
import numpy as np

from .rng import trial_uniforms

OK = 0
GRAZING = 1
CAPPED = 2

GRAZE_TOL = 1e-12
HALF_PI = 0.5 * math.pi
TWO_PI = 2.0 * math.pi


@nb.njit(cache=True, nogil=True)
def launch(theta, phi, sigma):
    """Departure point (relative to the disk centre) and unit direction."""
    nx = math.sin(theta)
    ny = math.cos(theta)
    cp = math.cos(phi)
    sp = math.sin(phi)
    # tangent in the direction of increasing (clockwise) theta is (ny, -nx)
    return sigma * nx, sigma * ny, cp * nx + sp * ny, cp * ny - sp * nx


@nb.njit(cache=True, nogil=True)
def reflect_to_coords(hx, hy, vx, vy):
    """Outgoing (theta, phi) for a hit at offset (hx, hy) from the disk centre."""
    r = math.hypot(hx, hy)
    nx = hx / r
    ny = hy / r
    vn = vx * nx + vy * ny
    wx = vx - 2.0 * vn * nx
    wy = vy - 2.0 * vn * ny
    theta = math.atan2(nx, ny)
    if theta < 0.0:
        theta += TWO_PI
    if theta >= TWO_PI:
        theta -= TWO_PI
    wt = wx * ny - wy * nx
    wn = wx * nx + wy * ny
    if wn < 0.0:
        wn = 0.0
    return theta, math.atan2(wt, wn)


@nb.njit(cache=True, nogil=True)
def cast(px, py, vx, vy, sigma, lmax):
    """First disk hit by the ray (p, v) leaving the disk of cell (0, 0).

    Returns (status, i, j, tau, hx, hy) with (hx, hy) the hit point relative
    to the centre of disk (i, j).
    """
    i = 0
    j = 0
    if vx > 0.0:
        sx = 1
        tmx = (0.5 - px) / vx
        tdx = 1.0 / vx
    elif vx < 0.0:
        sx = -1
        tmx = (-0.5 - px) / vx
        tdx = -1.0 / vx
    else:
        sx = 0
        tmx = np.inf
        tdx = np.inf
    if vy > 0.0:
        sy = 1
        tmy = (0.5 - py) / vy
        tdy = 1.0 / vy
    elif vy < 0.0:
        sy = -1
        tmy = (-0.5 - py) / vy
        tdy = -1.0 / vy
    else:
        sy = 0
        tmy = np.inf
        tdy = np.inf
    s2 = sigma * sigma
    rmax = sigma - GRAZE_TOL
    while True:
        if tmx < tmy:
            i += sx
            tenter = tmx
            tmx += tdx
        else:
            j += sy
            tenter = tmy
            tmy += tdy
        if tenter > lmax:
            return CAPPED, i, j, tenter, 0.0, 0.0
        cx = i - px
        cy = j - py
        perp = cx * vy - cy * vx
        if -rmax < perp < rmax:
            b = cx * vx + cy * vy
            if b > 0.0:
                disc = s2 - perp * perp
                cc = (cx * cx + cy * cy) - s2
                tau = cc / (b + math.sqrt(disc))
                return OK, i, j, tau, tau * vx - cx, tau * vy - cy


@nb.njit(cache=True, nogil=True)
def flight(theta, phi, sigma, lmax):
    """One application of the billiard map from cell (0, 0).

    Returns (status, kx, ky, tau, theta1, phi1, hx, hy, vx, vy).
    """
    if not (-HALF_PI + GRAZE_TOL < phi < HALF_PI - GRAZE_TOL):
        return GRAZING, 0, 0, 0.0, theta, phi, 0.0, 0.0, 0.0, 0.0
    px, py, vx, vy = launch(theta, phi, sigma)
    status, i, j, tau, hx, hy = cast(px, py, vx, vy, sigma, lmax)
    if status != OK:
        return status, i, j, tau, theta, phi, 0.0, 0.0, vx, vy
    th1, ph1 = reflect_to_coords(hx, hy, vx, vy)
    return OK, i, j, tau, th1, ph1, hx, hy, vx, vy


@nb.njit(cache=True, nogil=True)
def sample_mu_point(seed, tag, trial):
    u1, u2, _, _ = trial_uniforms(seed, tag, trial, 0)
    return TWO_PI * u1, math.asin(2.0 * u2 - 1.0)


@nb.njit(cache=True, nogil=True)
def sample_windowed_point(seed, tag, trial, psi_lo, psi_w):
    """mu conditioned on the flight direction lying in [psi_lo, psi_lo + psi_w]."""
    u1, u2, _, _ = trial_uniforms(seed, tag, trial, 0)
    psi = psi_lo + psi_w * u1
    phi = math.asin(2.0 * u2 - 1.0)
    theta = (HALF_PI - psi - phi) % TWO_PI
    return theta, phi


@nb.njit(cache=True, nogil=True)
def flights_from(theta, phi, sigma, lmax):
    """Vectorised billiard map over given coordinates (all start in cell 0)."""
    n = theta.shape[0]
    status = np.empty(n, np.int8)
    kx = np.empty(n, np.int64)
    ky = np.empty(n, np.int64)
    tau = np.empty(n)
    th1 = np.empty(n)
    ph1 = np.empty(n)
    for k in range(n):
        st, i, j, t, a, b, _, _, _, _ = flight(theta[k], phi[k], sigma, lmax)
        status[k] = st
        kx[k] = i
        ky[k] = j
        tau[k] = t
        th1[k] = a
        ph1[k] = b
    return status, kx, ky, tau, th1, ph1


@nb.njit(cache=True, nogil=True)
def one_step_batch(seed, tag, start, count, sigma, lmax, psi_lo, psi_w):
    """Draw starting points for trials start..start+count-1 and fly once.

    psi_w <= 0 means plain mu-sampling, otherwise direction-window sampling.
    """
    theta0 = np.empty(count)
    phi0 = np.empty(count)
    for k in range(count):
        if psi_w > 0.0:
            a, b = sample_windowed_point(seed, tag, start + k, psi_lo, psi_w)
        else:
            a, b = sample_mu_point(seed, tag, start + k)
        theta0[k] = a
        phi0[k] = b
    status, kx, ky, tau, th1, ph1 = flights_from(theta0, phi0, sigma, lmax)
    return theta0, phi0, status, kx, ky, tau, th1, ph1


@nb.njit(cache=True, nogil=True)
def walk(theta, phi, sigma, n, checkpoints, ck, lmax):
    """n steps from (theta, phi) in cell (0, 0); partial sums go into ck[c].

    Returns (status, fail_step, kx, ky, max_step, total_tau, theta_n, phi_n).
    """
    nc = checkpoints.shape[0]
    sx = 0
    sy = 0
    big = 0
    ttot = 0.0
    c = 0
    for m in range(n):
        st, i, j, t, theta, phi, _, _, _, _ = flight(theta, phi, sigma, lmax)
        if st != OK:
            return st, m, sx, sy, big, ttot, theta, phi
        sx += i
        sy += j
        ttot += t
        a = abs(i) if abs(i) > abs(j) else abs(j)
        if a > big:
            big = a
        while c < nc and checkpoints[c] == m + 1:
            ck[c, 0] = sx
            ck[c, 1] = sy
            c += 1
    return OK, -1, sx, sy, big, ttot, theta, phi


@nb.njit(cache=True, nogil=True)
def birkhoff_batch(seed, tag, start, count, sigma, n, checkpoints, lmax):
    """n-step displacement sums for a block of mu-distributed trials.

    checkpoints holds sorted step counts m (0 < m <= n) at which the partial
    sum kappa_m is recorded.  Returns (kx, ky, ck, max_step, total_tau,
    status, fail_step).
    """
    nc = checkpoints.shape[0]
    kx = np.zeros(count, np.int64)
    ky = np.zeros(count, np.int64)
    ck = np.zeros((count, nc, 2), np.int64)
    max_step = np.zeros(count, np.int64)
    total_tau = np.zeros(count)
    status = np.zeros(count, np.int8)
    fail_step = np.full(count, -1, np.int64)
    for k in range(count):
        theta, phi = sample_mu_point(seed, tag, start + k)
        st, fs, sx, sy, big, ttot, _, _ = walk(theta, phi, sigma, n, checkpoints, ck[k], lmax)
        status[k] = st
        fail_step[k] = fs
        kx[k] = sx
        ky[k] = sy
        max_step[k] = big
        total_tau[k] = ttot
    return kx, ky, ck, max_step, total_tau, status, fail_step


@nb.njit(cache=True, nogil=True)
def sequence_batch(seed, tag, start, count, sigma, steps, lmax):
    """Per-step displacements kappa o T^j, j < steps, for a block of trials."""
    seq = np.zeros((count, steps, 2), np.int64)
    status = np.zeros(count, np.int8)
    for k in range(count):
        theta, phi = sample_mu_point(seed, tag, start + k)
        for m in range(steps):
            st, i, j, t, theta, phi, _, _, _, _ = flight(theta, phi, sigma, lmax)
            if st != OK:
                status[k] = st
                break
            seq[k, m, 0] = i
            seq[k, m, 1] = j
    return seq, status


@nb.njit(cache=True, nogil=True)
def return_hits_batch(seed, tag, start, count, sigma, n, targets, lmax):
    """Count trials with kappa_n equal to each target cell."""
    nt = targets.shape[0]
    hits = np.zeros(nt, np.int64)
    bad = 0
    for k in range(count):
        theta, phi = sample_mu_point(seed, tag, start + k)
        sx = 0
        sy = 0
        ok = True
        for m in range(n):
            st, i, j, t, theta, phi, _, _, _, _ = flight(theta, phi, sigma, lmax)
            if st != OK:
                ok = False
                break
            sx += i
            sy += j
        if not ok:
            bad += 1
            continue
        for q in range(nt):
            if sx == targets[q, 0] and sy == targets[q, 1]:
                hits[q] += 1
    return hits, bad


@nb.njit(cache=True, nogil=True)
def push_batch(seed, tag, start, count, sigma, steps, lmax):
    """Coordinates of T^steps applied to a block of mu-distributed trials."""
    theta = np.empty(count)
    phi = np.empty(count)
    status = np.zeros(count, np.int8)
    none = np.zeros(0, np.int64)
    ck = np.zeros((0, 2), np.int64)
    for k in range(count):
        a, b = sample_mu_point(seed, tag, start + k)
        st, _, _, _, _, _, a, b = walk(a, b, sigma, steps, none, ck, lmax)
        status[k] = st
        theta[k] = a
        phi[k] = b
    return theta, phi, status
