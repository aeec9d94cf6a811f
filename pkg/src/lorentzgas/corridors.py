"""Corridor geometry and the lattice sums attached to it."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numba as nb
import numpy as np

from .errors import ExponentOutOfRange, InvalidConfig, NonPrimitive

ZETA2 = math.pi**2 / 6.0

# Lattice symmetries as (a, b, c, d) acting by (p, q) -> (a p + b q, c p + d q).
# The first entry mapping a vector into the octant p >= q >= 0 is its
# canonical transform; enumeration and convergent_pair both rely on that order.
_SYMMETRIES = (
    (1, 0, 0, 1), (0, 1, 1, 0), (0, 1, -1, 0), (-1, 0, 0, 1),
    (-1, 0, 0, -1), (0, -1, -1, 0), (0, -1, 1, 0), (1, 0, 0, -1),
)


@dataclass(frozen=True)
class CorridorKey:
    xi: tuple[int, int]
    xi_prime: tuple[int, int]
    width: float

    @property
    def norm(self) -> float:
        return math.hypot(*self.xi)

    @property
    def determinant(self) -> int:
        return cross(self.xi_prime, self.xi)


@dataclass(frozen=True, eq=False)
class CorridorSet:
    """All open corridors of a table, two rows (xi', xi'' sides) per direction."""

    sigma: float
    xi: np.ndarray
    xi_prime: np.ndarray
    width: np.ndarray

    @property
    def entries(self) -> list[CorridorKey]:
        return [CorridorKey((int(a), int(b)), (int(c), int(d)), float(w))
                for (a, b), (c, d), w in zip(self.xi, self.xi_prime, self.width)]

    @property
    def directions(self) -> list[tuple[int, int]]:
        return list(dict.fromkeys((int(a), int(b)) for a, b in self.xi))

    @property
    def norms(self) -> np.ndarray:
        return np.hypot(self.xi[:, 0], self.xi[:, 1]).astype(float)

    def arrays(self) -> dict[str, np.ndarray]:
        return {"p": self.xi[:, 0], "q": self.xi[:, 1], "p_prime": self.xi_prime[:, 0],
                "q_prime": self.xi_prime[:, 1], "width": self.width}

    def __len__(self):
        return len(self.width)


def cross(u, v) -> int:
    return u[0] * v[1] - u[1] * v[0]


def _check_sigma(sigma):
    if not 0.0 < sigma < 0.5:
        raise InvalidConfig("sigma", f"{sigma!r} is not in (0, 1/2)")


def _check_primitive(xi):
    p, q = int(xi[0]), int(xi[1])
    if (p, q) == (0, 0) or math.gcd(p, q) != 1:
        raise NonPrimitive(f"{xi} is not a primitive lattice vector")
    return p, q


def corridor_width(xi, sigma: float) -> float:
    p, q = _check_primitive(xi)
    return max(0.0, 1.0 / math.hypot(p, q) - 2.0 * sigma)


def width_oracle(xi, sigma: float, bound: int, side: int = 1) -> float:
    """Brute-force corridor width on one side (+1 left, -1 right) of the line 0--xi."""
    p, q = int(xi[0]), int(xi[1])
    if bound < 2 * math.hypot(p, q):
        raise ValueError("bound must be at least 2|xi|")
    b = int(math.ceil(bound))
    m = np.arange(-b, b + 1)
    mx, my = np.meshgrid(m, m, indexing="ij")
    inside = mx * mx + my * my <= bound * bound
    c = (p * my - q * mx)[inside] * side
    nearest = c[c > 0].min()
    return max(0.0, int(nearest) / math.hypot(p, q) - 2.0 * sigma)


def _apply(g, v):
    a, b, c, d = g
    return (a * v[0] + b * v[1], c * v[0] + d * v[1])


def _inverse(g):
    a, b, c, d = g
    det = a * d - b * c
    return (d * det, -b * det, -c * det, a * det)


def _canonical(v):
    for g in _SYMMETRIES:
        w = _apply(g, v)
        if w[0] >= w[1] >= 0 and w[0] > 0:
            return g, w
    raise ValueError(v)


def _octant_convergents(p: int, q: int):
    """(xi', xi'') for p >= q >= 0: previous convergent of q/p and its complement."""
    if q == 0:
        return (0, 1), (0, -1)
    # continued fraction of q/p with last partial quotient >= 2 (or q/p = 1 -> [0; 1])
    quotients = []
    a, b = q, p
    while b:
        quotients.append(a // b)
        a, b = b, a % b
    if len(quotients) > 1 and quotients[-1] == 1:
        quotients.pop()
        quotients[-1] += 1
    num0, den0 = 1, 0  # convergents h/k of q/p
    num1, den1 = quotients[0], 1
    for aq in quotients[1:-1]:
        num0, num1 = num1, aq * num1 + num0
        den0, den1 = den1, aq * den1 + den0
    prev = (den1, num1) if len(quotients) > 1 else (1, 0)
    return prev, (p - prev[0], q - prev[1])


def convergent_pair(xi) -> tuple[tuple[int, int], tuple[int, int]]:
    """Boundary lattice points (xi', xi'') of the two xi-corridors."""
    p, q = _check_primitive(xi)
    g, (a, b) = _canonical((p, q))
    x1, x2 = _octant_convergents(a, b)
    ginv = _inverse(g)
    return _apply(ginv, x1), _apply(ginv, x2)


def _stern_brocot_octant(r2max: float):
    """Primitive (p, q), p >= q >= 0, with 4 sigma^2 |xi|^2 < 1, plus SB parents.

    Yields (xi, older_parent, younger_parent); the older parent is the
    previous convergent.
    """
    yield (1, 0), None, None
    if 2 < r2max:
        yield (1, 1), (1, 0), (0, 1)
    stack = [((1, 0), (1, 1), 0, 1)]  # left, right, depth(left), depth(right)
    while stack:
        left, right, dl, dr = stack.pop()
        m = (left[0] + right[0], left[1] + right[1])
        if m[0] * m[0] + m[1] * m[1] >= r2max:
            continue
        older, younger = (left, right) if dl < dr else (right, left)
        yield m, older, younger
        d = max(dl, dr) + 1
        stack.append((m, right, d, dr))
        stack.append((left, m, dl, d))


def enumerate_corridors(sigma: float) -> CorridorSet:
    _check_sigma(sigma)
    r2max = 1.0 / (4.0 * sigma * sigma)
    rows = []
    for v, older, younger in _stern_brocot_octant(r2max):
        width = corridor_width(v, sigma)
        if width <= 0.0:
            continue
        if older is None:
            x1, x2 = _octant_convergents(*v)
        else:
            x1, x2 = older, younger
        for g in _SYMMETRIES:
            ginv = _inverse(g)
            w = _apply(ginv, v)
            if _canonical(w)[0] != g:
                continue
            a1 = _apply(ginv, x1)
            a2 = _apply(ginv, x2)
            rows.append((w[0], w[1], a1[0], a1[1], width))
            rows.append((w[0], w[1], a2[0], a2[1], width))
    rows.sort(key=lambda r: (r[0] * r[0] + r[1] * r[1], r[0], r[1], r[2], r[3]))
    table = np.array(rows, dtype=float).reshape(-1, 5)
    ints = table[:, :4].astype(np.int64)
    return CorridorSet(sigma, ints[:, :2].copy(), ints[:, 2:].copy(), table[:, 4].copy())


@nb.njit(cache=True)
def totient_table(n):
    """phi(0..n) by the linear sieve."""
    phi = np.zeros(n + 1, np.int64)
    primes = np.empty(n + 1, np.int64)
    npr = 0
    if n >= 1:
        phi[1] = 1
    for i in range(2, n + 1):
        if phi[i] == 0:
            phi[i] = i - 1
            primes[npr] = i
            npr += 1
        for k in range(npr):
            pr = primes[k]
            if i * pr > n:
                break
            if i % pr == 0:
                phi[i * pr] = phi[i] * pr
                break
            phi[i * pr] = phi[i] * (pr - 1)
    return phi


def totient_sum(N: int, a: float = 0) -> tuple[float, float]:
    """(sum_{n<=N} n^a phi(n), N^(a+2) / ((a+2) zeta(2)))."""
    if a <= -2:
        raise ExponentOutOfRange(f"a={a} must exceed -2")
    if N < 1:
        raise ValueError("N must be positive")
    phi = totient_table(int(N))[1:]
    if float(a).is_integer() and a >= 0:
        n = np.arange(1, N + 1, dtype=object)
        exact = int(np.sum(n ** int(a) * phi.astype(object)))
    else:
        exact = math.fsum(np.arange(1, N + 1, dtype=float) ** a * phi)
    return exact, N ** (a + 2) / ((a + 2) * ZETA2)


def corridor_sum(sigma: float, a: float, corridors: CorridorSet | None = None):
    """Sum of |xi|^a over corridor pairs, with the matching asymptotic scale.

    For a > -2 the second value is the asymptotic equivalent, for a = -2 the
    order |log sigma|, for a < -2 the upper bound -4 pi / (a + 2).
    """
    cs = corridors if corridors is not None else enumerate_corridors(sigma)
    exact = math.fsum(cs.norms**a)
    if a > -2:
        asym = 2.0 / (a + 2) * 2.0 * math.pi / ZETA2 * (2.0 * sigma) ** (-(a + 2))
    elif a == -2:
        asym = abs(math.log(sigma))
    else:
        asym = -4.0 * math.pi / (a + 2)
    return exact, asym


def abar(t, sigma: float, corridors: CorridorSet | None = None) -> float:
    """Quadratic form sum d^2 <t, xi>^2 / |xi| over corridor pairs (xi, xi')."""
    cs = corridors if corridors is not None else enumerate_corridors(sigma)
    arr = cs.arrays()
    p = arr["p"].astype(float)
    q = arr["q"].astype(float)
    proj = t[0] * p + t[1] * q
    return math.fsum(arr["width"] ** 2 * proj**2 / np.hypot(p, q))


def abar_matrix(sigma: float, corridors: CorridorSet | None = None) -> np.ndarray:
    """Matrix of (sigma/2) * Abar as a quadratic form."""
    cs = corridors if corridors is not None else enumerate_corridors(sigma)
    arr = cs.arrays()
    p = arr["p"].astype(float)
    q = arr["q"].astype(float)
    w = arr["width"] ** 2 / np.hypot(p, q)
    m = np.array([[math.fsum(w * p * p), math.fsum(w * p * q)],
                  [math.fsum(w * q * p), math.fsum(w * q * q)]])
    return 0.5 * sigma * m


def calkin_wilf(x) -> Fraction:
    x = Fraction(x)
    if x < 0:
        raise ValueError("defined on non-negative rationals")
    return 1 / (1 - x + 2 * math.floor(x))


def calkin_wilf_lattice(p: int, q: int) -> tuple[int, int]:
    """Calkin-Wilf step on the lattice point (p, q) representing q/p."""
    return p - q + 2 * p * (q // p), p
