"""Numerical evaluation of Weierstrass functions and the weight-1/2/3
quasi-modular forms on the lattice Z + Z*tau.

The fast path uses nome-series (expansions in q = e^{2 pi i tau} and
x = e^{2 pi i z}) after reducing the argument to the fundamental cell.
`lattice_oracle` provides an independent brute-force truncated lattice
sum used only for cross-validation.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CollisionError, ConvergenceError, DomainError, PoleError

TWO_PI_I = 2j * math.pi

MAX_TRUNCATION = 4000


@dataclass(frozen=True)
class EllipticContext:
    """Immutable evaluation environment for a fixed modular parameter.

    g1 is the quasi-period of the zeta function across the period 1;
    g2, g3 are the cubic invariants in wp_z^2 = 4 wp^3 - g2 wp - g3.
    ``eta_tau`` is the zeta quasi-period across the period tau
    (g1*tau - 2*pi*i, validated numerically in the test suite).
    """

    tau: complex
    nome_q: complex
    g1: complex
    g2: complex
    g3: complex
    series_truncation: int
    tolerance: float
    pole_guard: float = 1e-6
    tail_bound: float = field(default=0.0)

    @property
    def eta_tau(self) -> complex:
        return self.g1 * self.tau - TWO_PI_I


def make_context(tau: complex, tolerance: float = 1e-10,
                 pole_guard: float = 1e-6) -> EllipticContext:
    """Build an EllipticContext with the series truncation chosen from |q|.

    Raises DomainError for Im(tau) <= 0 or tolerance outside (0, 1e-4],
    ConvergenceError if the geometric tail cannot reach the tolerance
    within the configured maximum truncation.
    """
    tau = complex(tau)
    if tau.imag <= 0:
        raise DomainError(f"modular parameter needs Im(tau) > 0, got {tau}")
    if not (0 < tolerance <= 1e-4):
        raise DomainError(f"tolerance must lie in (0, 1e-4], got {tolerance}")
    q = cmath.exp(TWO_PI_I * tau)
    absq = abs(q)
    # Dropped tail of the q-series is geometric; aim two orders below target.
    target = tolerance * 1e-3
    if absq == 0.0:  # nome underflowed; any truncation is exact
        n = 8
    else:
        n = max(8, int(math.ceil(math.log(target) / math.log(absq))) + 2)
    if n > MAX_TRUNCATION:
        raise ConvergenceError(
            f"need {n} series terms for tolerance {tolerance} at |q|={absq:.3g}, "
            f"max is {MAX_TRUNCATION}")
    tail = absq ** n / (1.0 - absq)
    g1, g2, g3 = _modular_forms(q, n)
    return EllipticContext(tau=tau, nome_q=q, g1=g1, g2=g2, g3=g3,
                           series_truncation=n, tolerance=tolerance,
                           pole_guard=pole_guard, tail_bound=tail)


def _modular_forms(q: complex, n: int) -> tuple[complex, complex, complex]:
    pi2 = math.pi ** 2
    s1 = s3 = s5 = 0.0 + 0.0j
    qm = 1.0 + 0.0j
    for m in range(1, n + 1):
        qm *= q
        w = qm / (1.0 - qm)
        s1 += m * w
        s3 += m ** 3 * w
        s5 += m ** 5 * w
    g1 = pi2 / 3.0 - 8.0 * pi2 * s1
    g2 = 4.0 * pi2 ** 2 / 3.0 + 320.0 * pi2 ** 2 * s3
    g3 = 8.0 * pi2 ** 3 / 27.0 - (448.0 / 3.0) * pi2 ** 3 * s5
    return g1, g2, g3


def reduce_argument(tau: complex, z: complex) -> tuple[complex, int, int]:
    """Reduce z modulo Z + Z*tau to the cell centered at the origin.

    Returns (z_reduced, m, k) with z = z_reduced + m + k*tau.
    """
    z = complex(z)
    k = round(z.imag / tau.imag)
    zr = z - k * tau
    m = round(zr.real)
    zr = zr - m
    return zr, m, k


def _check_pole(tau: complex, zr: complex, guard: float):
    for om in (0, 1, -1, tau, -tau, 1 + tau, -1 - tau, 1 - tau, -1 + tau):
        if abs(zr - om) < guard:
            raise PoleError(f"argument within {guard} of lattice point {om}")


def _qz(z: complex) -> complex:
    return cmath.exp(TWO_PI_I * z)


def wp(ctx: EllipticContext, z: complex) -> complex:
    """Weierstrass elliptic function for the lattice Z + Z*tau."""
    zr, _, _ = reduce_argument(ctx.tau, z)
    _check_pole(ctx.tau, zr, ctx.pole_guard)
    q, x = ctx.nome_q, _qz(zr)
    acc = 1.0 / 12.0 + x / (1.0 - x) ** 2
    qn = 1.0 + 0.0j
    for _ in range(ctx.series_truncation):
        qn *= q
        a = qn * x
        b = qn / x
        acc += a / (1.0 - a) ** 2 + b / (1.0 - b) ** 2 - 2.0 * qn / (1.0 - qn) ** 2
    return TWO_PI_I ** 2 * acc


def wp_z(ctx: EllipticContext, z: complex) -> complex:
    """z-derivative of wp."""
    zr, _, _ = reduce_argument(ctx.tau, z)
    _check_pole(ctx.tau, zr, ctx.pole_guard)
    q, x = ctx.nome_q, _qz(zr)

    def dterm(t):
        return t * (1.0 + t) / (1.0 - t) ** 3

    acc = dterm(x)
    qn = 1.0 + 0.0j
    for _ in range(ctx.series_truncation):
        qn *= q
        acc += dterm(qn * x) - dterm(qn / x)
    return TWO_PI_I ** 3 * acc


def wp_zz(ctx: EllipticContext, z: complex) -> complex:
    """Second z-derivative, through the algebraic rewrite 6 wp^2 - g2/2."""
    w = wp(ctx, z)
    return 6.0 * w * w - ctx.g2 / 2.0


def zeta(ctx: EllipticContext, z: complex) -> complex:
    """Weierstrass zeta function (quasi-periodic; reduction adds the
    quasi-periods m*g1 + k*eta_tau)."""
    zr, m, k = reduce_argument(ctx.tau, z)
    _check_pole(ctx.tau, zr, ctx.pole_guard)
    q, x = ctx.nome_q, _qz(zr)

    def s(t):
        return 1.0 / (1.0 - t) - 0.5

    acc = s(x)
    qn = 1.0 + 0.0j
    for _ in range(ctx.series_truncation):
        qn *= q
        acc += s(qn * x) - s(qn / x)
    val = ctx.g1 * zr - TWO_PI_I * acc
    return val + m * ctx.g1 + k * ctx.eta_tau


def sigma(ctx: EllipticContext, z: complex) -> complex:
    """Weierstrass sigma function on the origin-centered cell.

    No quasi-periodic continuation is attempted: arguments that reduce
    with a nonzero lattice shift raise DomainError.
    """
    z = complex(z)
    _, m, k = reduce_argument(ctx.tau, z)
    if m != 0 or k != 0:
        raise DomainError(
            f"sigma argument {z} outside the supported origin-centered cell")
    q = ctx.nome_q
    x = _qz(z)
    half = cmath.exp(1j * math.pi * z)  # x ** (1/2) without branch trouble
    pref = cmath.exp(ctx.g1 * z * z / 2.0) * (half - 1.0 / half) / TWO_PI_I
    prod = 1.0 + 0.0j
    qn = 1.0 + 0.0j
    for _ in range(ctx.series_truncation):
        qn *= q
        prod *= (1.0 - qn * x) * (1.0 - qn / x) / (1.0 - qn) ** 2
    return pref * prod


def zeta_tau(ctx: EllipticContext, z: complex) -> complex:
    """Closed form for 2*pi*i d(zeta)/d(tau), divided back by 2*pi*i."""
    w = wp(ctx, z)
    zt = zeta(ctx, z)
    dz = wp_z(ctx, z)
    g1, g2 = ctx.g1, ctx.g2
    val = g1 * z * w + g2 * z / 12.0 - g1 * zt - zt * w - dz / 2.0
    return val / TWO_PI_I


def wp_tau(ctx: EllipticContext, z: complex) -> complex:
    """Closed form for d(wp)/d(tau)."""
    w = wp(ctx, z)
    zt = zeta(ctx, z)
    dz = wp_z(ctx, z)
    g1, g2 = ctx.g1, ctx.g2
    val = (zt - z * g1) * dz + 2.0 * w * w - 2.0 * g1 * w - g2 / 3.0
    return val / TWO_PI_I


def log_sigma_tau(ctx: EllipticContext, z: complex) -> complex:
    """Closed form for d(log sigma)/d(tau)."""
    w = wp(ctx, z)
    zt = zeta(ctx, z)
    g1, g2 = ctx.g1, ctx.g2
    val = g1 + g2 * z * z / 24.0 - z * g1 * zt + zt * zt / 2.0 - w / 2.0
    return val / TWO_PI_I


def log_sigma_tau2(ctx: EllipticContext, z: complex) -> complex:
    """Closed form for d^2(log sigma)/d(tau)^2, obtained by applying the
    scaled derivation to the first-derivative closed form."""
    g1, g2, g3 = ctx.g1, ctx.g2, ctx.g3
    zt = zeta(ctx, z)
    d_g1 = g2 / 12.0 - g1 * g1
    d_g2 = 6.0 * g3 - 4.0 * g1 * g2
    zt_th = TWO_PI_I * zeta_tau(ctx, z)
    wp_th = TWO_PI_I * wp_tau(ctx, z)
    val = (d_g1 + d_g2 * z * z / 24.0 - z * d_g1 * zt - z * g1 * zt_th
           + zt * zt_th - wp_th / 2.0)
    return val / TWO_PI_I ** 2


def g_tau_derivatives(ctx: EllipticContext) -> tuple[complex, complex, complex]:
    """(dg1/dtau, dg2/dtau, dg3/dtau) from the closed quasi-modular system."""
    g1, g2, g3 = ctx.g1, ctx.g2, ctx.g3
    return ((g2 / 12.0 - g1 * g1) / TWO_PI_I,
            (6.0 * g3 - 4.0 * g1 * g2) / TWO_PI_I,
            (g2 * g2 / 3.0 - 6.0 * g1 * g3) / TWO_PI_I)


def q_weight(ctx: EllipticContext, u: complex, v: complex,
             method: str = "zeta") -> complex:
    """Two-point weight q(u, v) = zeta(v-u) + zeta(u) - g1*v.

    method="rational" evaluates the equivalent rational-wp form
    (wp_u(u) + wp_v(v)) / (2 (wp(v) - wp(u))) + zeta(v) - g1*v instead;
    both must agree to tolerance wherever defined.
    """
    if method == "zeta":
        return zeta(ctx, v - u) + zeta(ctx, u) - ctx.g1 * v
    if method == "rational":
        wu, wv = wp(ctx, u), wp(ctx, v)
        den = wv - wu
        if abs(den) < 1e-8 * max(1.0, abs(wu), abs(wv)):
            raise CollisionError(f"wp collision at u={u}, v={v}")
        return (wp_z(ctx, u) + wp_z(ctx, v)) / (2.0 * den) + zeta(ctx, v) - ctx.g1 * v
    raise DomainError(f"unknown q_weight method {method!r}")


def q_weight_u(ctx: EllipticContext, u: complex, v: complex) -> complex:
    """Derivative of q(u, v) with respect to its first argument:
    wp(v-u) - wp(u), from zeta' = -wp."""
    return wp(ctx, v - u) - wp(ctx, u)


def basis_p(ctx: EllipticContext, alpha: int, z: complex) -> complex:
    """Basis of elliptic functions with a single pole of order alpha at 0:
    even orders wp^a, odd orders >= 3 are -wp^a wp_z / 2."""
    if alpha == 1 or alpha < 0:
        raise DomainError(f"no basis element of pole order {alpha}")
    if alpha == 0:
        return 1.0 + 0.0j
    if alpha % 2 == 0:
        return wp(ctx, z) ** (alpha // 2)
    a = (alpha - 3) // 2
    return -0.5 * wp(ctx, z) ** a * wp_z(ctx, z)


@dataclass(frozen=True)
class OracleValues:
    wp: complex
    zeta: complex
    sigma: complex


def lattice_oracle(tau: complex, z: complex, radius: int = 200) -> OracleValues:
    """Brute-force truncated lattice sums over |a|,|b| <= radius.

    Slowly convergent (tail ~ 1/radius^2 after the symmetric-box odd-term
    cancellation); meant only as an independent cross-check of the series
    path.
    """
    tau, z = complex(tau), complex(z)
    if radius < 10:
        raise DomainError("oracle radius must be >= 10")
    r = np.arange(-radius, radius + 1)
    a, b = np.meshgrid(r, r)
    om = (a + b * tau).ravel()
    om = om[np.abs(om) > 0]
    if abs(z) < 1e-12 or np.min(np.abs(z - om)) < 1e-9:
        raise PoleError(f"oracle argument {z} too close to a lattice point")
    wp_val = 1.0 / z ** 2 + np.sum(1.0 / (z - om) ** 2 - 1.0 / om ** 2)
    zeta_val = 1.0 / z + np.sum(1.0 / (z - om) + 1.0 / om + z / om ** 2)
    sigma_val = z * np.exp(np.sum(np.log(1.0 - z / om) + z / om
                                  + z ** 2 / (2.0 * om ** 2)))
    return OracleValues(wp=complex(wp_val), zeta=complex(zeta_val),
                        sigma=complex(sigma_val))


def eisenstein_oracle(tau: complex, radius: int = 100) -> tuple[complex, complex]:
    """(g2, g3) via the direct lattice sums 60 sum' 1/om^4, 140 sum' 1/om^6."""
    r = np.arange(-radius, radius + 1)
    a, b = np.meshgrid(r, r)
    om = (a + b * complex(tau)).ravel()
    om = om[np.abs(om) > 0]
    return (complex(60.0 * np.sum(om ** -4.0)),
            complex(140.0 * np.sum(om ** -6.0)))
