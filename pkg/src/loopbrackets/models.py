"""Concrete bracket constructions on loop spaces of C^n and CP^{n-1}.

The central objects are hydrodynamic bracket tables

    {z_a(x), z_b(y)} = P_ab delta'(x-y) + Q_ab delta(x-y)

on fields z_0, z_2, ..., z_n together with the scaled modular field th,
produced two independent ways: by extracting structure constants from
the spectral-parameter bracket on the generating field e(u,x) (the
r-matrix template), and by transcribing closed-form generating
functions.  Exact agreement of the two is the strongest self-check in
the package.

All symbolic work happens over exact rationals in the ring
Q[g1, g2, g3, T]; numerics enter only in verification suites.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field as dc_field

import numpy as np
import sympy as sp

from . import distcalc as dcx
from . import elliptic
from . import symexpr as sx
from .errors import (DivisibilityError, DomainError, ExtractionError,
                     StructureError)
from .symexpr import (T, dwpu, dwpv, g1, g2, g3, jet, u, v, wpu, wpv, zwu,
                      zwv)

TWO_PI_I = elliptic.TWO_PI_I


# ---------------------------------------------------------------------------
# field bookkeeping

def field_indices(n: int) -> list[int]:
    """Generator indices 0, 2, 3, ..., n (no index 1)."""
    if n < 2:
        raise DomainError("need n >= 2")
    return [0] + list(range(2, n + 1))


def field_name(a: int) -> str:
    return f"z{a}"


def spectral_basis(a: int, which: str) -> sp.Expr:
    """Basis function with a pole of order a at the origin, expressed in
    the Weierstrass leaves of the chosen spectral variable."""
    w, dw = (wpu, dwpu) if which == "u" else (wpv, dwpv)
    if a == 0:
        return sp.Integer(1)
    if a == 1 or a < 0:
        raise DomainError(f"no basis element of pole order {a}")
    if a % 2 == 0:
        return w ** (a // 2)
    return -sp.Rational(1, 2) * dw * w ** ((a - 3) // 2)


def generating_field(n: int, which: str) -> sp.Expr:
    """e = sum_a p_a(spectral) z_a over the n generators."""
    return sum(spectral_basis(a, which) * jet(field_name(a))
               for a in field_indices(n))


# ---------------------------------------------------------------------------
# the r-matrix template

def q_weight_sym(first: str, second: str) -> sp.Expr:
    """Two-point weight q(first, second) in the rational spectral form,
    with the shared denominator wpv - wpu so that sums combine exactly."""
    D = wpv - wpu
    half = (dwpu + dwpv) / (2 * D)
    if (first, second) == ("u", "v"):
        return half + zwv - g1 * v
    if (first, second) == ("v", "u"):
        return -half + zwu - g1 * u
    raise DomainError(f"unsupported spectral pair ({first}, {second})")


def rmatrix_delta_prime_coeff(qvu, quv, e_u, e_of_v, e_of_u, e_v, lam):
    """delta'-coefficient of {e(u,x), e(v,y)}; works on Exprs or numbers."""
    return qvu * e_u * e_of_v + quv * e_of_u * e_v + lam * e_u * e_v


def rmatrix_delta_coeff(qvu, quv, qvu_tau_xderiv, qvu_u, e_of_u, e_of_v,
                        e_u, ex_of_u, ex_of_v, evx, lam):
    """delta-coefficient of {e(u,x), e(v,y)}; qvu_tau_xderiv is
    tau'(x) * d/dtau q(v,u), qvu_u is d/du q(v,u)."""
    return (qvu_tau_xderiv * e_u * e_of_v
            + qvu_u * (e_of_u * ex_of_v - e_of_v * ex_of_u)
            + qvu * e_u * ex_of_v + quv * e_of_u * evx + lam * e_u * evx)


# ---------------------------------------------------------------------------
# structure constants

@dataclass
class StructConsts:
    """Structure constants of the homogeneous bracket on n fields:
    P maps (a, b) to the delta'-coefficient (quadratic in z), Q to the
    delta-coefficient (quadratic in z and z' with at most one first jet,
    or T times a z-quadratic)."""

    n: int
    P: dict
    Q: dict
    generator: str = "thm3_extract"

    @property
    def indices(self) -> list[int]:
        return field_indices(self.n)

    @property
    def fields(self) -> tuple[str, ...]:
        return tuple(field_name(a) for a in self.indices)

    def to_bracket_table(self) -> dcx.BracketTable:
        """Full table including the modular row {th(x), z_a(y)} =
        z_a(y) delta'(x-y)."""
        names = ("th",) + self.fields
        given = {("th", "th"): []}
        for a in self.indices:
            za = field_name(a)
            given[("th", za)] = [(jet(za), 1), (jet(za, 1), 0)]
        for a in self.indices:
            for b in self.indices:
                given[(field_name(a), field_name(b))] = [
                    (self.P[(a, b)], 1), (self.Q[(a, b)], 0)]
        return dcx.build_table(names, given)


def _check_homogeneity(sc: StructConsts):
    zs0 = [jet(field_name(a)) for a in sc.indices]
    zs1 = [jet(field_name(a), 1) for a in sc.indices]
    for (a, b), e in sc.P.items():
        p = sp.Poly(e, *zs0) if e != 0 else None
        if p is not None and any(sum(m) != 2 for m in p.monoms()):
            raise ExtractionError(f"P[{a},{b}] not homogeneous quadratic")
        if e != 0 and (e.has(*zs1) or e.has(T)):
            raise ExtractionError(f"P[{a},{b}] contains jets or T")
    for (a, b), e in sc.Q.items():
        if e == 0:
            continue
        p = sp.Poly(e, *(zs0 + zs1 + [T]))
        for m in p.monoms():
            d0, d1, dT = sum(m[:len(zs0)]), sum(m[len(zs0):-1]), m[-1]
            ok = (d0 == 1 and d1 == 1 and dT == 0) or \
                 (d0 == 2 and d1 == 0 and dT == 1)
            if not ok:
                raise ExtractionError(f"Q[{a},{b}] has a monomial outside "
                                      f"the z z' / T z z shape: {m}")


def _ring_square_reduce(R, pe, i_sym, cubic):
    """Replace even powers of the odd leaf at generator index i_sym by
    powers of the cubic, keeping degree <= 1."""
    buckets: dict[int, dict] = {}
    for monom, coeff in pe.iterterms():
        k = monom[i_sym]
        m2 = list(monom)
        m2[i_sym] = k % 2
        bucket = buckets.setdefault(k // 2, {})
        key = tuple(m2)
        bucket[key] = bucket.get(key, R.domain.zero) + coeff
    out = R.zero
    for half, terms in buckets.items():
        part = R({k: c for k, c in terms.items() if c})
        out = out + part * cubic ** half
    return out


def _spectral_clear(expr: sp.Expr, power: int) -> sp.Expr:
    """Multiply by (wpv - wpu)^power, reduce odd-leaf powers, assert the
    spectral-transcendental leaves cancel, divide the clearing factor
    back out exactly.

    The heavy algebra runs in a sparse polynomial ring: the only
    denominators are powers of the shared wpv - wpu, which become a
    polynomial generator Dinv before conversion."""
    D = wpv - wpu
    Dinv = sp.Symbol("_Dinv")
    def _is_inv_of_D(e):
        return (e.is_Pow and e.exp.is_Integer and e.exp < 0 and e.base.is_Add
                and sp.cancel(e.base / D).is_Rational)

    expr2 = expr.replace(
        _is_inv_of_D,
        lambda e: (Dinv / sp.cancel(e.base / D)) ** int(-e.exp))
    syms = sorted(expr2.free_symbols
                  | {wpu, wpv, dwpu, dwpv, u, v, zwu, zwv, g1, g2, g3, Dinv},
                  key=str)
    R, *gens = sp.ring(syms, sp.QQ)
    gmap = dict(zip(syms, gens))
    i_dinv = syms.index(Dinv)
    p = R.from_expr(expr2)

    D_ring = gmap[wpv] - gmap[wpu]
    by_k: dict[int, dict] = {}
    for monom, coeff in p.iterterms():
        k = monom[i_dinv]
        if k > power:
            raise ExtractionError(
                f"spectral denominator power {k} exceeds the clearing "
                f"power {power}")
        m2 = list(monom)
        m2[i_dinv] = 0
        bucket = by_k.setdefault(k, {})
        key = tuple(m2)
        bucket[key] = bucket.get(key, R.domain.zero) + coeff
    num = R.zero
    for k, terms in by_k.items():
        part = R({m: c for m, c in terms.items() if c})
        num = num + part * D_ring ** (power - k)

    cubic_u = 4 * gmap[wpu] ** 3 - gmap[g2] * gmap[wpu] - gmap[g3]
    cubic_v = 4 * gmap[wpv] ** 3 - gmap[g2] * gmap[wpv] - gmap[g3]
    num = _ring_square_reduce(R, num, syms.index(dwpu), cubic_u)
    num = _ring_square_reduce(R, num, syms.index(dwpv), cubic_v)

    for bad in (u, v, zwu, zwv):
        if num.degree(gmap[bad]) > 0:
            raise ExtractionError(
                f"spectral leaf {bad} survives the cancellation step")
    quo, rem = divmod(num, D_ring ** power)
    if rem:
        raise DivisibilityError(
            f"clearing factor does not divide the reduced numerator")
    return quo.as_expr()


def _coeff_split(expr: sp.Expr, n: int) -> dict:
    """Read off entries from a cleared bilinear generating polynomial:
    the {1, dwpu} x {1, dwpv} split times monomials wpu^a wpv^b."""
    out = {(a, b): sp.Integer(0)
           for a in field_indices(n) for b in field_indices(n)}
    if expr == 0:
        return out
    poly = sp.Poly(expr, dwpu, dwpv, wpu, wpv)
    for (i, j, a, b), c in poly.terms():
        if i > 1 or j > 1:
            raise ExtractionError("unreduced odd-leaf power")
        ia = 2 * a if i == 0 else 2 * a + 3
        ib = 2 * b if j == 0 else 2 * b + 3
        if (ia, ib) not in out:
            raise ExtractionError(
                f"stray generating monomial maps outside the field set: "
                f"pole orders ({ia}, {ib}) for n={n}")
        out[(ia, ib)] += (-2) ** (i + j) * c
    return {k: sp.expand(val) for k, val in out.items()}


def thm3_extract(n: int) -> StructConsts:
    """Structure constants obtained by matching the generating-field
    bracket coefficient-by-coefficient in the spectral basis.

    Substituting e = sum p_a z_a into the template and peeling off the
    modular-row contributions leaves

      sum p_a(u) p_b(v) P_ab = A - e(u) eth(v) - eth(u) e(v)
      sum p_a(u) p_b(v) Q_ab = B - sum p_a(u) Dx(p_b(v)) P_ab
                                 - e(u) Dx(eth(v)) - eth(u) Dx(e(v))

    with A, B the template delta' and delta coefficients and
    eth = d/d(th) applied to the spectral basis inside e.  Both right
    sides are rational in the Weierstrass leaves; clearing the shared
    denominator must cancel every bare u, v, zeta leaf exactly.
    """
    lam = sp.Rational(1, n)
    Dx = sx.total_x_derivative
    eu = generating_field(n, "u")
    ev = generating_field(n, "v")
    du_eu = sx.d_dz_spectral(eu, "u")
    dv_ev = sx.d_dz_spectral(ev, "v")
    qvu = q_weight_sym("v", "u")
    quv = q_weight_sym("u", "v")

    A = rmatrix_delta_prime_coeff(qvu, quv, du_eu, ev, eu, dv_ev, lam)
    B = rmatrix_delta_coeff(
        qvu, quv, T * sx.d_dtau_scaled(qvu), sx.d_dz_spectral(qvu, "u"),
        eu, ev, du_eu, Dx(eu), Dx(ev), Dx(dv_ev), lam)

    eth_u = sx.d_dtau_scaled(eu)
    eth_v = sx.d_dtau_scaled(ev)

    P = _coeff_split(_spectral_clear(A - eu * eth_v - eth_u * ev, 3), n)

    sum_p_dxp = sum(
        spectral_basis(a, "u") * Dx(spectral_basis(b, "v")) * P[(a, b)]
        for a in field_indices(n) for b in field_indices(n))
    Q = _coeff_split(_spectral_clear(
        B - sum_p_dxp - eu * Dx(eth_v) - eth_u * Dx(ev), 3), n)

    sc = StructConsts(n=n, P=P, Q=Q, generator="thm3_extract")
    _check_homogeneity(sc)
    return sc


# ---------------------------------------------------------------------------
# closed-form generating functions

def _poly_e(n: int, sector: int, var: sp.Symbol, order: int = 0) -> sp.Expr:
    """Even-sector (0) or odd-sector (1) generating polynomial in `var`
    with jet-order `order` field coefficients."""
    if sector == 0:
        return sum(var ** a * jet(field_name(2 * a), order)
                   for a in range(n // 2 + 1))
    return sum(var ** a * jet(field_name(2 * a + 3), order)
               for a in range((n - 3) // 2 + 1))


def appendix_table(n: int) -> StructConsts:
    """Structure constants transcribed from the closed-form generating
    functions, with the explicit tau'(x) replaced by 2*pi*i*T and every
    (u-v)-denominator divided out exactly."""
    e0u_, e1u_ = _poly_e(n, 0, u), _poly_e(n, 1, u)
    e0v_, e1v_ = _poly_e(n, 0, v), _poly_e(n, 1, v)
    d_e0u = sp.diff(e0u_, u)
    d_e1u = sp.diff(e1u_, u)
    d_e0v = sp.diff(e0v_, v)
    d_e1v = sp.diff(e1v_, v)
    e0x_u, e1x_u = _poly_e(n, 0, u, 1), _poly_e(n, 1, u, 1)
    e0x_v, e1x_v = _poly_e(n, 0, v, 1), _poly_e(n, 1, v, 1)
    d_e0x_v = sp.diff(e0x_v, v)
    d_e1x_v = sp.diff(e1x_v, v)
    tp = sp.Symbol("tau_prime")
    lamn = sp.Rational(1, n)

    gf_P_ee = (
        2 * u * d_e0u * e0v_ * g1
        - sp.Rational(1, 6) * (-12 * u**2 * v + g2 * u + 2 * g2 * v + 3 * g3)
            * d_e0u * e0v_ / (u - v)
        + 2 * v * d_e0v * e0u_ * g1
        + sp.Rational(1, 6) * (-12 * u * v**2 + 2 * g2 * u + g2 * v + 3 * g3)
            * d_e0v * e0u_ / (u - v)
        + sp.Rational(1, 8) * (4 * v**3 - g2 * v - g3) * (4 * u**3 - g2 * u - g3)
            * d_e1u * e1v_ / (u - v)
        - sp.Rational(1, 8) * (4 * v**3 - g2 * v - g3) * (4 * u**3 - g2 * u - g3)
            * d_e1v * e1u_ / (u - v)
        + sp.Rational(1, 4) * lamn * (4 * v**3 - g2 * v - g3)
            * (4 * u**3 - g2 * u - g3) * d_e1u * d_e1v
        - (3 * u**2 * v**2 - sp.Rational(1, 4) * g2 * (u - v)**2
           + sp.Rational(1, 16) * g2**2 + sp.Rational(3, 4) * g3 * u
           + sp.Rational(3, 4) * g3 * v) * e1u_ * e1v_
        + sp.Rational(1, 8) * lamn * (12 * v**2 - g2)
            * (4 * u**3 - g2 * u - g3) * d_e1u * e1v_
        + sp.Rational(1, 8) * lamn * (12 * u**2 - g2)
            * (4 * v**3 - g2 * v - g3) * d_e1v * e1u_
        + sp.Rational(1, 16) * lamn * (12 * v**2 - g2) * (12 * u**2 - g2)
            * e1u_ * e1v_)

    gf_P_eo = (
        2 * u * d_e0u * e1v_ * g1
        + sp.Rational(1, 6) * (12 * u**2 * v - g2 * u - 2 * g2 * v - 3 * g3)
            * d_e0u * e1v_ / (u - v)
        + sp.Rational(1, 2) * (4 * u**3 - g2 * u - g3)
            * (d_e1u * e0v_ - d_e0v * e1u_) / (u - v)
        + 2 * v * d_e1v * e0u_ * g1 + 3 * e0u_ * e1v_ * g1
        - sp.Rational(1, 6) * (12 * u * v**2 - 2 * g2 * u - g2 * v - 3 * g3)
            * d_e1v * e0u_ / (u - v)
        - sp.Rational(1, 4) * (12 * u * v - g2) * e0u_ * e1v_ / (u - v)
        + sp.Rational(1, 4) * (12 * u**2 - g2) * e0v_ * e1u_ / (u - v)
        + lamn * (4 * u**3 - g2 * u - g3) * d_e0v * d_e1u
        + lamn * (6 * u**2 - sp.Rational(1, 2) * g2) * d_e0v * e1u_)

    gf_P_oo = (
        2 * u * d_e1u * e1v_ * g1 + 6 * e1u_ * e1v_ * g1
        + 4 * lamn * d_e0u * d_e0v
        + sp.Rational(1, 6) * (12 * u**2 * v - g2 * u - 2 * g2 * v - 3 * g3)
            * d_e1u * e1v_ / (u - v)
        - sp.Rational(1, 6) * (12 * u * v**2 - 2 * g2 * u - g2 * v - 3 * g3)
            * d_e1v * e1u_ / (u - v)
        + 2 * (e0v_ * d_e0u - e0u_ * d_e0v) / (u - v)
        + 2 * v * d_e1v * e1u_ * g1)

    gf_Q_ee = (
        sp.Rational(1, 6) * (12 * g1 * u * v - 12 * g1 * v**2 - 12 * u * v**2
                             + 2 * g2 * u + g2 * v + 3 * g3)
            * e0u_ * d_e0x_v / (u - v)
        - (4 * v**3 - g2 * v - g3) * (4 * u**3 - g2 * u - g3)
            * e1u_ * d_e1x_v / (8 * (u - v))
        + (12 * g2 * g1 * u - g2**2 + 18 * g1 * g3 - 18 * g3 * u)
            * sp.I * e0u_ * d_e0v * tp / (24 * sp.pi * (u - v))
        + (12 * g1 * u**2 - 12 * g1 * u * v + 12 * u**2 * v - g2 * u
           - 2 * g2 * v - 3 * g3) * d_e0u * e0x_v / (6 * (u - v))
        + (e0v_ * e0x_u - e0u_ * e0x_v) / (4 * (u - v)**2)
            * (4 * g1 * (u - v)**2 + 4 * u**2 * v + 4 * u * v**2
               - g2 * u - g2 * v - 2 * g3)
        - sp.I * e1v_ * d_e1u * tp / (8 * sp.pi) * lamn
            * (2 * g2 * g1 - 3 * g3) * (4 * u**3 - g2 * u - g3)
        + sp.Rational(1, 8) * (4 * v**3 - g2 * v - g3)
            * (4 * u**3 - g2 * u - g3) * d_e1u * e1x_v / (u - v)
        - sp.I * e1v_ * d_e1u * tp / (48 * sp.pi * (u - v))
            * (4 * u**3 - g2 * u - g3)
            * (12 * g2 * g1 * v - g2**2 + 18 * g1 * g3 - 18 * g3 * v)
        + sp.Rational(1, 8) * (4 * v**3 - g2 * v - g3)
            * (4 * u**3 - g2 * u - g3) * e1v_ * e1x_u / (u - v)**2
        - sp.I * e1u_ * e1v_ * tp / (16 * sp.pi) * lamn
            * (2 * g2 * g1 - 3 * g3) * (12 * u**2 - g2)
        - e1u_ * e1x_v / (16 * (u - v)**2)
            * (48 * u**4 * v**2 - 64 * u**3 * v**3 + 48 * u**2 * v**4
               - 4 * g2 * u**4 + 8 * g2 * u**3 * v - 24 * g2 * u**2 * v**2
               + 8 * g2 * u * v**3 - 4 * g2 * v**4 + g2**2 * u**2
               + g2**2 * v**2 + 4 * g3 * u**3 - 12 * g3 * u**2 * v
               - 12 * g3 * u * v**2 + 4 * g3 * v**3 + 2 * g2 * g3 * u
               + 2 * g2 * g3 * v + 2 * g3**2)
        + sp.I * e0v_ * d_e0u * tp / (24 * sp.pi * (u - v))
            * (24 * g1**2 * u**2 - 24 * g1**2 * u * v - 8 * g2 * g1 * u
               - 4 * g2 * g1 * v - 2 * g2 * u**2 + 2 * g2 * u * v + g2**2
               - 18 * g1 * g3 + 12 * g3 * u + 6 * g3 * v)
        + d_e1u * d_e1x_v / 4 * lamn
            * (4 * v**3 - g2 * v - g3) * (4 * u**3 - g2 * u - g3)
        + e1u_ * d_e1x_v / 8 * lamn * (12 * u**2 - g2)
            * (4 * v**3 - g2 * v - g3)
        - sp.I * d_e1u * d_e1v * tp / (24 * sp.pi) * lamn
            * (4 * u**3 - g2 * u - g3)
            * (12 * g2 * g1 * v - g2**2 + 18 * g1 * g3 - 18 * g3 * v)
        + sp.I * e1u_ * d_e1v * tp / (48 * sp.pi * (u - v))
            * (4 * u**3 - g2 * u - g3)
            * (12 * g2 * g1 * v - g2**2 + 18 * g1 * g3 - 18 * g3 * v)
        - sp.I * e1u_ * d_e1v * tp / (48 * sp.pi) * lamn * (12 * u**2 - g2)
            * (12 * g2 * g1 * v - g2**2 + 18 * g1 * g3 - 18 * g3 * v)
        + e1u_ * e1x_v / 16 * lamn * (12 * v**2 - g2) * (12 * u**2 - g2)
        + d_e1u * e1x_v / 8 * lamn * (12 * v**2 - g2)
            * (4 * u**3 - g2 * u - g3)
        + sp.I * e1u_ * e1v_ * tp / (48 * sp.pi)
            * (24 * g2 * g1 * u**2 - 24 * g2 * g1 * u * v - 6 * g1 * g2**2
               + 4 * g2**2 * u + 2 * g2**2 * v - 72 * g1 * g3 * u
               - 36 * g1 * g3 * v - 36 * g3 * u**2 + 36 * g3 * u * v
               + 9 * g2 * g3))

    gf_Q_eo = (
        -sp.Rational(1, 2) * (4 * u**3 - g2 * u - g3)
            * e1u_ * d_e0x_v / (u - v)
        + sp.Rational(1, 6) * (12 * g1 * u * v - 12 * g1 * v**2
                               - 12 * u * v**2 + 2 * g2 * u + g2 * v + 3 * g3)
            * e0u_ * d_e1x_v / (u - v)
        + sp.Rational(1, 6) * (12 * g1 * u**2 - 12 * g1 * u * v
                               + 12 * u**2 * v - g2 * u - 2 * g2 * v - 3 * g3)
            * d_e0u * e1x_v / (u - v)
        + sp.I * e1v_ * d_e0u * tp / (24 * sp.pi * (u - v))
            * (24 * g1**2 * u**2 - 24 * g1**2 * u * v - 8 * g2 * g1 * u
               - 4 * g2 * g1 * v - 2 * g2 * u**2 + 2 * g2 * u * v + g2**2
               - 18 * g1 * g3 + 12 * g3 * u + 6 * g3 * v)
        + e1v_ * e0x_u / (4 * (u - v)**2)
            * (4 * g1 * u**2 - 8 * g1 * u * v + 4 * g1 * v**2 + 4 * u**2 * v
               + 4 * u * v**2 - g2 * u - g2 * v - 2 * g3)
        + sp.Rational(1, 2) * (4 * u**3 - g2 * u - g3)
            * e0x_v * d_e1u / (u - v)
        + sp.Rational(1, 4) * (4 * u**3 - 12 * u**2 * v + g2 * u + g2 * v
                               + 2 * g3) * e0x_v * e1u_ / (u - v)**2
        + sp.Rational(1, 2) * (4 * u**3 - g2 * u - g3)
            * e0v_ * e1x_u / (u - v)**2
        + sp.I * e0u_ * d_e1v * tp / (24 * sp.pi * (u - v))
            * (12 * g2 * g1 * u - g2**2 + 18 * g1 * g3 - 18 * g3 * u)
        + sp.Rational(1, 2) * (4 * g1 * u**2 - 8 * g1 * u * v + 4 * g1 * v**2
                               - 8 * u**2 * v + 4 * u * v**2 + g2 * u + g3)
            * e1x_v * e0u_ / (u - v)**2
        + sp.I * (e0u_ * e1v_ - e1u_ * e0v_) * tp / (24 * sp.pi * (u - v)**2)
            * (12 * g1 * g2 * u - g2**2 + 18 * g1 * g3 - 18 * g3 * u)
        + lamn * (4 * u**3 - g2 * u - g3) * d_e0x_v * d_e1u
        + sp.Rational(1, 2) * lamn * (12 * u**2 - g2) * d_e0x_v * e1u_)

    gf_Q_oo = (
        sp.Rational(1, 6) * (12 * g1 * u * v - 12 * g1 * v**2 - 12 * u * v**2
                             + 2 * g2 * u + g2 * v + 3 * g3)
            * e1u_ * d_e1x_v / (u - v)
        + 2 * (e0v_ * e0x_u - e0u_ * e0x_v) / (u - v)**2
        + sp.Rational(1, 6) * (12 * g1 * u**2 - 12 * g1 * u * v
                               + 12 * u**2 * v - g2 * u - 2 * g2 * v - 3 * g3)
            * d_e1u * e1x_v / (u - v)
        + sp.I * e1v_ * d_e1u * tp / (24 * sp.pi * (u - v))
            * (24 * g1**2 * u**2 - 24 * g1**2 * u * v - 8 * g2 * g1 * u
               - 4 * g2 * g1 * v - 2 * g2 * u**2 + 2 * g2 * u * v + g2**2
               - 18 * g1 * g3 + 12 * g3 * u + 6 * g3 * v)
        + sp.Rational(1, 4) * (4 * g1 * (u - v)**2 + 4 * u**2 * v
                               + 4 * u * v**2 - g2 * u - g2 * v - 2 * g3)
            * e1v_ * e1x_u / (u - v)**2
        + 2 * (d_e0u * e0x_v - e0u_ * d_e0x_v) / (u - v)
        + sp.I * e1u_ * d_e1v * tp / (24 * sp.pi * (u - v))
            * (12 * g2 * g1 * u - g2**2 + 18 * g1 * g3 - 18 * g3 * u)
        + sp.I * e1u_ * e1v_ * tp / (8 * sp.pi) * (12 * g1**2 - g2)
        + sp.Rational(1, 4) * (20 * g1 * (u - v)**2 - 4 * u**2 * v
                               - 4 * u * v**2 + g2 * u + g2 * v + 2 * g3)
            * e1x_v * e1u_ / (u - v)**2
        + 4 * lamn * d_e0x_v * d_e0u)

    def finalize(gf):
        e = gf.subs(tp, 2 * sp.pi * sp.I * T)
        e = sp.cancel(e)
        if e.has(sp.pi) or e.has(sp.I):
            raise ExtractionError("pi or i survive the tau' substitution")
        num, den = sp.fraction(e)
        if den.free_symbols:
            raise DivisibilityError(
                f"(u - v)-denominator does not divide exactly: {den}")
        return sp.expand(e)

    sectors = {
        (0, 0): finalize(gf_P_ee), (0, 1): finalize(gf_P_eo),
        (1, 1): finalize(gf_P_oo),
    }
    sectors_q = {
        (0, 0): finalize(gf_Q_ee), (0, 1): finalize(gf_Q_eo),
        (1, 1): finalize(gf_Q_oo),
    }

    idx = field_indices(n)
    P = {(a, b): sp.Integer(0) for a in idx for b in idx}
    Q = {(a, b): sp.Integer(0) for a in idx for b in idx}

    def harvest(target, table):
        for (su, sv), e in table.items():
            if e == 0:
                continue
            poly = sp.Poly(e, u, v)
            for (a, b), c in poly.terms():
                ia = 2 * a if su == 0 else 2 * a + 3
                ib = 2 * b if sv == 0 else 2 * b + 3
                if ia > n or ib > n:
                    raise ExtractionError(
                        f"generating monomial u^{a} v^{b} out of range")
                target[(ia, ib)] += c

    harvest(P, sectors)
    harvest(Q, sectors_q)

    # The closed-form generating functions cover the even-even, even-odd and
    # odd-odd sectors; the odd-even sector follows from antisymmetry:
    # P is symmetric and Q_ba = Dx(P_ab) - Q_ab.
    for a in idx:
        for b in idx:
            if a % 2 == 1 and b % 2 == 0:
                P[(a, b)] = P[(b, a)]
                Q[(a, b)] = sp.expand(
                    sx.total_x_derivative(P[(b, a)]) - Q[(b, a)])
    sc = StructConsts(n=n, P={k: sp.expand(e) for k, e in P.items()},
                      Q={k: sp.expand(e) for k, e in Q.items()},
                      generator="appendix")
    _check_homogeneity(sc)
    return sc


def match_structconsts(a: StructConsts, b: StructConsts) -> list[str]:
    """Entry-by-entry exact comparison; returns discrepancy descriptions
    (empty = exact match)."""
    if a.n != b.n:
        return [f"different n: {a.n} vs {b.n}"]
    out = []
    for key in sorted(a.P):
        d = sp.expand(a.P[key] - b.P[key])
        if d != 0:
            out.append(f"P{key}: {sx.render(a.P[key])} != {sx.render(b.P[key])}")
    for key in sorted(a.Q):
        d = sp.expand(a.Q[key] - b.Q[key])
        if d != 0:
            out.append(f"Q{key}: {sx.render(a.Q[key])} != {sx.render(b.Q[key])}")
    return out


# ---------------------------------------------------------------------------
# JSON documents

def structconsts_to_document(sc: StructConsts) -> dict:
    zs0 = [jet(f) for f in sc.fields]
    zs1 = [jet(f, 1) for f in sc.fields]

    def p_terms(e):
        terms = []
        if e != 0:
            poly = sp.Poly(e, *zs0)
            for mono, c in sorted(poly.terms()):
                pos = [i for i, m in enumerate(mono) for _ in range(m)]
                terms.append({"c": sc.indices[pos[0]], "d": sc.indices[pos[1]],
                              "coeff": sx.render(c)})
        return terms

    def q_terms(e):
        terms = []
        if e != 0:
            poly = sp.Poly(e, *(zs0 + zs1 + [T]))
            for mono, c in sorted(poly.terms()):
                m = sp.prod(x ** k for x, k in zip(zs0 + zs1 + [T], mono))
                terms.append({"monomial": sx.render(m), "coeff": sx.render(c)})
        return terms

    return {
        "n": sc.n,
        "lambda": "1/n",
        "fields": ["tau"] + list(sc.fields),
        "P": [{"a": a, "b": b, "terms": p_terms(sc.P[(a, b)])}
              for a in sc.indices for b in sc.indices],
        "Q": [{"a": a, "b": b, "terms": q_terms(sc.Q[(a, b)])}
              for a in sc.indices for b in sc.indices],
        "coeff_ring": "Q[g1,g2,g3,T]",
        "generator": sc.generator,
    }


def structconsts_from_document(doc: dict) -> StructConsts:
    n = doc["n"]
    P = {(e["a"], e["b"]): sp.expand(sum(
            sx.parse(t["coeff"]) * jet(field_name(t["c"])) * jet(field_name(t["d"]))
            for t in e["terms"]))
         for e in doc["P"]}
    Q = {(e["a"], e["b"]): sp.expand(sum(
            sx.parse(t["coeff"]) * sx.parse(t["monomial"]) for t in e["terms"]))
         for e in doc["Q"]}
    return StructConsts(n=n, P=P, Q=Q, generator=doc.get("generator", ""))


# ---------------------------------------------------------------------------
# the explicit 3-field table and the projective descent

def prop2_table() -> dcx.BracketTable:
    """The explicit bracket on (th, z1, z2) with the modular-derivative
    factors i tau'/(24 pi) = -T/12 and i tau'/(12 pi) = -T/6."""
    z1, z2 = jet("z1"), jet("z2")
    z1x, z2x = jet("z1", 1), jet("z2", 1)
    given = {
        ("th", "th"): [],
        ("th", "z1"): [(z1, 1), (z1x, 0)],
        ("th", "z2"): [(z2, 1), (z2x, 0)],
        ("z1", "z1"): [
            (-g2 / 6 * z1 * z2 + g3 / 2 * z2**2, 1),
            (-g2 / 12 * z2 * z1x + (g3 / 2 * z2 - g2 / 12 * z1) * z2x
             + ((6 * g3 - 4 * g1 * g2) * z1 * z2
                + (18 * g1 * g3 - g2**2) * z2**2) * (-T / 12), 0)],
        ("z1", "z2"): [
            (2 * g1 * z1 * z2 - g2 / 3 * z2**2, 1),
            (g1 * z2 * z1x + (g1 * z1 - g2 / 3 * z2) * z2x
             - (2 * g1 * g2 - 3 * g3) * z2**2 * (-T / 6), 0)],
        ("z2", "z2"): [
            (-2 * z1 * z2 + 4 * g1 * z2**2, 1),
            (-z2 * z1x + (4 * g1 * z2 - z1) * z2x
             + (12 * g1**2 - g2) * z2**2 * (-T / 6), 0)],
    }
    return dcx.build_table(("th", "z1", "z2"), given)


def lemma1_descend(table: dcx.BracketTable,
                   denominator_field: str) -> dcx.BracketTable:
    """Descend a homogeneous table with a modular row to affine
    coordinates p_a = z_a / z_den; asserts centrality of the modular
    field, then freezes its jets to zero (modular parameter becomes a
    constant of the reduced family)."""
    if denominator_field not in table.fields:
        raise StructureError(f"unknown denominator field {denominator_field}")
    zfields = [f for f in table.fields if f != sx.MODULAR_FIELD]
    others = [f for f in zfields if f != denominator_field]
    if not others:
        raise StructureError("nothing to descend: only one projective field")
    den0 = jet(denominator_field)
    forward = {"p" + f[1:]: jet(f) / den0 for f in others}
    inverse = {f: jet("p" + f[1:]) * den0 for f in others}
    inverse[denominator_field] = den0

    if sx.MODULAR_FIELD in table.fields:
        for f in others:
            dp = dcx.bracket_of_functions(table, jet(sx.MODULAR_FIELD, 0),
                                          forward["p" + f[1:]])
            if not dp.is_zero():
                raise StructureError(
                    f"modular field is not central against p{f[1:]}: "
                    f"{[(sx.render(t.coeff), t.orders) for t in dp.terms]}")

    new = dcx.change_coordinates(table, forward, inverse,
                                 eliminate=(denominator_field,))
    frozen = {}
    kill = {jet(sx.MODULAR_FIELD, k): 0 for k in range(1, table.order() + 6)}
    for key, terms in new.entries.items():
        out = []
        for t in terms:
            c = sp.expand(sp.sympify(t.coeff).subs(kill))
            if c != 0:
                out.append(dcx.DeltaTerm(c, t.orders))
        frozen[key] = tuple(out)
    return dcx.BracketTable(fields=new.fields, entries=frozen,
                            frozen_modular=True)


def linear_identifications(sc: StructConsts,
                           target: dcx.BracketTable) -> list[dict]:
    """Search constant linear field maps sending the n = 2 extracted
    table to an explicit 2-field target table (plus modular row).

    Returns sympy solution dicts for the matrix w_i = sum_j M_ij z_j.
    """
    if sc.n != 2:
        raise DomainError("identification search is for the n = 2 table")
    src = sc.to_bracket_table()
    src_fields = ("z0", "z2")
    tgt_fields = tuple(f for f in target.fields if f != sx.MODULAR_FIELD)
    m11, m12, m21, m22 = sp.symbols("m11 m12 m21 m22")
    M = sp.Matrix([[m11, m12], [m21, m22]])
    det = M.det()
    adj = M.adjugate()
    # old fields in terms of the new ones (prolonged to first jets)
    subs = {}
    for i, zo in enumerate(src_fields):
        for order in (0, 1):
            subs[jet(zo, order)] = sum(
                adj[i, j] * jet(tgt_fields[j], order) for j in range(2)) / det

    def entry_coeff(table, a, b, order):
        return sum((t.coeff for t in table.entry(a, b)
                    if t.orders == (order,)), sp.Integer(0))

    eqs = []
    gens = ([jet(f) for f in tgt_fields] + [jet(f, 1) for f in tgt_fields]
            + [T, g1, g2, g3])
    for i, wa in enumerate(tgt_fields):
        for j, wb in enumerate(tgt_fields):
            for order in (0, 1):
                # {w_i(x), w_j(y)} = sum_ab M_ia M_jb {z_a(x), z_b(y)}
                lhs = sum(M[i, a] * M[j, b]
                          * entry_coeff(src, src_fields[a], src_fields[b],
                                        order)
                          for a in range(2) for b in range(2))
                lhs = sp.together(sp.sympify(lhs).subs(subs,
                                                       simultaneous=True))
                rhs = entry_coeff(target, wa, wb, order)
                diff = sp.expand(sp.numer(sp.together(lhs - rhs)))
                eqs.extend(sp.Poly(diff, *gens).coeffs())
    sols = sp.solve(eqs, [m11, m12, m21, m22], dict=True)
    return [s for s in sols if sp.simplify(det.subs(s)) != 0]


# ---------------------------------------------------------------------------
# flat-coordinate realization of the generating field (numeric)

@dataclass
class SigmaRealization:
    """Numeric generating field built from sigma-function factors over
    flat fields t_1..t_{n-1}, the modular field, and a prefactor f.

    All first and mixed field-derivatives are assembled from closed
    forms for zeta, sigma_tau/sigma, wp_tau, zeta_tau -- no finite
    differences anywhere."""

    ctx: elliptic.EllipticContext
    n: int
    t: list  # complex values t_1..t_{n-1}
    f: complex
    jets: dict  # first jets: {"t1": t1', ..., "tau": tau', "f": f'}

    def __post_init__(self):
        if self.n < 2:
            raise DomainError("need n >= 2")
        if len(self.t) != self.n - 1:
            raise DomainError("wrong number of flat fields")
        self.S = sum(self.t)
        self.Phi = sum(self.t[a] * self.t[b]
                       for a in range(self.n - 1) for b in range(a, self.n - 1))
        self.fields = [f"t{c + 1}" for c in range(self.n - 1)] + ["tau", "f"]

    # -- scalar building blocks -------------------------------------------
    def _zt(self, z):
        """(zeta, zeta_tau / (2 pi i)) at z."""
        return (elliptic.zeta(self.ctx, z),
                elliptic.zeta_tau(self.ctx, z))

    def _lst(self, z):
        """sigma_tau / sigma at z (scaled by 1/(2 pi i) internally)."""
        return elliptic.log_sigma_tau(self.ctx, z)

    def _args(self, spectral):
        return [spectral + self.S] + [spectral - ta for ta in self.t] + \
               [spectral]

    def value(self, spectral) -> complex:
        ctx = self.ctx
        num = elliptic.sigma(ctx, spectral + self.S)
        for ta in self.t:
            num *= elliptic.sigma(ctx, spectral - ta)
        num /= elliptic.sigma(ctx, spectral) ** self.n
        return num * np.exp(-ctx.g1 * self.Phi) * self.f

    # -- logarithmic derivatives ------------------------------------------
    def _M_u(self, z):
        ctx = self.ctx
        return (elliptic.zeta(ctx, z + self.S)
                + sum(elliptic.zeta(ctx, z - ta) for ta in self.t)
                - self.n * elliptic.zeta(ctx, z))

    def _M_field(self, z, F):
        ctx = self.ctx
        if F == "f":
            return 1.0 / self.f
        if F == "tau":
            g1p = (ctx.g2 / 12 - ctx.g1 ** 2) / TWO_PI_I
            val = (self._lst(z + self.S)
                   + sum(self._lst(z - ta) for ta in self.t)
                   - self.n * self._lst(z))
            return val - g1p * self.Phi
        c = int(F[1:]) - 1
        return (elliptic.zeta(ctx, z + self.S)
                - elliptic.zeta(ctx, z - self.t[c])
                - ctx.g1 * (self.S + self.t[c]))

    def _M_uu_like(self, z, F):
        """d/dF of M_u (the spectral log-derivative)."""
        ctx = self.ctx
        if F == "f":
            return 0.0
        if F == "tau":
            return (elliptic.zeta_tau(ctx, z + self.S)
                    + sum(elliptic.zeta_tau(ctx, z - ta) for ta in self.t)
                    - self.n * elliptic.zeta_tau(ctx, z))
        c = int(F[1:]) - 1
        return (-elliptic.wp(ctx, z + self.S)
                + elliptic.wp(ctx, z - self.t[c]))

    def _M_mixed(self, z, F, G):
        """d^2 M / dF dG of the log of the sigma quotient."""
        ctx = self.ctx
        if "f" in (F, G):
            return 0.0
        if F == "tau" and G == "tau":
            g1pp = _g1pp_value(ctx) / TWO_PI_I ** 2
            val = (elliptic.log_sigma_tau2(ctx, z + self.S)
                   + sum(elliptic.log_sigma_tau2(ctx, z - ta) for ta in self.t)
                   - self.n * elliptic.log_sigma_tau2(ctx, z))
            return val - g1pp * self.Phi
        if "tau" in (F, G):
            c = int((G if F == "tau" else F)[1:]) - 1
            g1p = (ctx.g2 / 12 - ctx.g1 ** 2) / TWO_PI_I
            return (elliptic.zeta_tau(ctx, z + self.S)
                    - elliptic.zeta_tau(ctx, z - self.t[c])
                    - g1p * (self.S + self.t[c]))
        c, d = int(F[1:]) - 1, int(G[1:]) - 1
        return (-elliptic.wp(ctx, z + self.S)
                - (elliptic.wp(ctx, z - self.t[c]) if c == d else 0.0)
                - ctx.g1 * (1 + (1 if c == d else 0)))

    # -- assembled quantities ---------------------------------------------
    def partial(self, z, F) -> complex:
        return self.value(z) * self._M_field(z, F)

    def second(self, z, F, G) -> complex:
        e = self.value(z)
        if F == "f" and G == "f":
            return 0.0
        if F == "f":
            return e * self._M_field(z, G) / self.f
        if G == "f":
            return e * self._M_field(z, F) / self.f
        return e * (self._M_field(z, F) * self._M_field(z, G)
                    + self._M_mixed(z, F, G))

    def du(self, z) -> complex:
        return self.value(z) * self._M_u(z)

    def du_partial(self, z, F) -> complex:
        e = self.value(z)
        if F == "f":
            return e * self._M_u(z) / self.f
        return e * (self._M_field(z, F) * self._M_u(z)
                    + self._M_uu_like(z, F))

    def x_derivative(self, z) -> complex:
        return sum(self.partial(z, F) * self.jets[F] for F in self.fields)

    def du_x_derivative(self, z) -> complex:
        return sum(self.du_partial(z, F) * self.jets[F] for F in self.fields)

    def x_derivative_of_partial(self, z, G) -> complex:
        return sum(self.second(z, F, G) * self.jets[F] for F in self.fields)


def _g1pp_value(ctx):
    """(2 pi i)^2 g1'': the scaled derivation applied twice to g1."""
    d_g2 = 6 * ctx.g3 - 4 * ctx.g1 * ctx.g2
    d_g1 = ctx.g2 / 12 - ctx.g1 ** 2
    return d_g2 / 12 - 2 * ctx.g1 * d_g1


def thm2_realization(ctx: elliptic.EllipticContext, n: int, t: list,
                     f: complex, jets: dict) -> SigmaRealization:
    """Numeric generating-field closure over the flat-coordinate table."""
    return SigmaRealization(ctx=ctx, n=n, t=list(t), f=complex(f),
                            jets=dict(jets))


def flat_table_coeffs(n: int, real: SigmaRealization):
    """Canonical (delta', delta) coefficient pairs of the flat table as
    numeric functions C1[F][G], C0[F][G]."""
    fields = real.fields
    C1 = {F: {G: 0.0 for G in fields} for F in fields}
    C0 = {F: {G: 0.0 for G in fields} for F in fields}
    for i in range(n - 1):
        for j in range(n - 1):
            Fi, Fj = f"t{i + 1}", f"t{j + 1}"
            C1[Fi][Fj] = (1.0 / n) if i != j else -(n - 1) / n
    fval = real.f
    fprime = real.jets["f"]
    C1["tau"]["f"] = TWO_PI_I * fval
    C0["tau"]["f"] = TWO_PI_I * fprime
    C1["f"]["tau"] = TWO_PI_I * fval
    return C1, C0


def thm2_bracket_residual(ctx, n, real: SigmaRealization, up, vp,
                          lam: float | None = None) -> float:
    """Relative residual of the generating-field bracket identity for the
    sigma realization at spectral points (up, vp); lambda defaults to the
    matching coupling 1/n (override for negative controls)."""
    if lam is None:
        lam = 1.0 / n
    C1, C0 = flat_table_coeffs(n, real)
    fields = real.fields

    lhs1 = sum(real.partial(up, F) * C1[F][G] * real.partial(vp, G)
               for F in fields for G in fields)
    lhs0 = sum(real.partial(up, F)
               * (C1[F][G] * real.x_derivative_of_partial(vp, G)
                  + C0[F][G] * real.partial(vp, G))
               for F in fields for G in fields)

    tau_val = ctx.tau
    tpr = real.jets["tau"]
    qvu = (elliptic.zeta(ctx, up - vp) + elliptic.zeta(ctx, vp)
           - ctx.g1 * up)
    quv = (elliptic.zeta(ctx, vp - up) + elliptic.zeta(ctx, up)
           - ctx.g1 * vp)
    # tau'(x) * d/dtau q(v,u) = T_value * (2 pi i d/dtau q)
    g1p = ctx.g2 / 12 - ctx.g1 ** 2
    qvu_tau = (elliptic.zeta_tau(ctx, up - vp) + elliptic.zeta_tau(ctx, vp)
               - g1p / TWO_PI_I * up)
    qvu_u = -elliptic.wp(ctx, up - vp) - ctx.g1

    e_u_val = real.du(up)
    e_v_val = real.du(vp)
    eu_val = real.value(up)
    ev_val = real.value(vp)
    ex_u = real.x_derivative(up)
    ex_v = real.x_derivative(vp)
    evx = real.du_x_derivative(vp)

    rhs1 = rmatrix_delta_prime_coeff(qvu, quv, e_u_val, ev_val, eu_val,
                                     e_v_val, lam)
    rhs0 = rmatrix_delta_coeff(qvu, quv, tpr * qvu_tau, qvu_u, eu_val,
                               ev_val, e_u_val, ex_u, ex_v, evx, lam)
    scale = max(1.0, abs(rhs1), abs(rhs0))
    return max(abs(lhs1 - rhs1), abs(lhs0 - rhs0)) / scale


def thm2_modular_row_residual(ctx, real: SigmaRealization, up) -> float:
    """Residual of {tau(x), e(u,y)} = 2 pi i e(u,y) delta'(x-y) computed
    through the flat table."""
    fields = real.fields
    C1, C0 = flat_table_coeffs(real.n, real)
    lhs1 = sum(C1["tau"][G] * real.partial(up, G) for G in fields)
    lhs0 = sum(C1["tau"][G] * real.x_derivative_of_partial(up, G)
               + C0["tau"][G] * real.partial(up, G) for G in fields)
    rhs1 = TWO_PI_I * real.value(up)
    rhs0 = TWO_PI_I * real.x_derivative(up)
    scale = max(1.0, abs(rhs1), abs(rhs0))
    return max(abs(lhs1 - rhs1), abs(lhs0 - rhs0)) / scale


# ---------------------------------------------------------------------------
# no-go system for a modular-free homogeneous lift on two fields

@dataclass
class NoGoSystem:
    """Polynomial constraint system for a constant-coefficient
    homogeneous lift of the projective-line bracket with quartic leading
    coefficient G = p(p-1)(p-s) p... see prop1_system.  Unknowns: the 12
    symmetric delta'-coefficients q[ab][cd] and 16 delta-coefficients
    r[ab][cd]; equations of degree <= 2 in the unknowns."""

    s: complex
    unknowns: list
    equations: list
    groups: dict  # name -> slice of equation indices

    def residual_vector(self, vec):
        return self._fn(vec)

    def __post_init__(self):
        lam = sp.lambdify(self.unknowns, sp.Matrix(self.equations),
                          modules="numpy")
        def _fn(vec):
            vals = lam(*vec)
            return np.asarray(vals, dtype=complex).ravel()
        self._fn = _fn


def _nogo_tables(qsym, rsym):
    """BracketTable on (z1, z2) from symbolic unknown coefficients."""
    z = {1: jet("z1"), 2: jet("z2")}
    zx = {1: jet("z1", 1), 2: jet("z2", 1)}
    given = {}
    for a in (1, 2):
        for b in (1, 2):
            P = sum(qsym[(a, b, c, d)] * z[c] * z[d]
                    for c in (1, 2) for d in (1, 2) if c <= d)
            Q = sum(rsym[(a, b, c, d)] * z[c] * zx[d]
                    for c in (1, 2) for d in (1, 2))
            given[(f"z{a}", f"z{b}")] = [(P, 1), (Q, 0)]
    return dcx.build_table(("z1", "z2"), given)


def _normalize_eq(e, unknowns):
    """Scale an equation by its largest coefficient magnitude so that the
    residual is invariant under trivial rescalings of the system."""
    e = sp.expand(e)
    if e == 0:
        return None
    poly = sp.Poly(e, *unknowns)
    scale = max(abs(complex(c)) for c in poly.coeffs())
    if scale == 0:
        return None
    return e / scale


def prop1_system(s, include_jacobi: bool = True,
                 matching_target=None) -> NoGoSystem:
    """Constraint system for lifting the projective-line hydrodynamic
    bracket with G = p(p-1)(p-s) to a constant homogeneous bracket on
    two fields.

    matching_target overrides the (G, G'/2) pair with arbitrary
    canonical (delta', delta) coefficient expressions in p, p', zr
    (zr = z2'/z2) -- used by the feasible self-test.
    """
    qsym = {}
    rsym = {}
    for a in (1, 2):
        for b in (1, 2):
            for c in (1, 2):
                for d in (1, 2):
                    if c <= d:
                        qsym[(a, b, c, d)] = sp.Symbol(f"q_{a}{b}_{c}{d}")
                        qsym[(a, b, d, c)] = qsym[(a, b, c, d)]
                    rsym[(a, b, c, d)] = sp.Symbol(f"r_{a}{b}_{c}{d}")
    unknowns = sorted({*qsym.values()}, key=str) + \
        sorted(rsym.values(), key=str)
    sx.declare_constants(*unknowns)
    table = _nogo_tables(qsym, rsym)

    eqs = []
    groups = {}

    # antisymmetry: P symmetric in (a,b); Q_ab + Q_ba = Dx P_ab, which in
    # coefficients reads r_ab^{cd} + r_ba^{cd} = 2 q_ab^{cd}
    start = len(eqs)
    for c in (1, 2):
        for d in (1, 2):
            if c <= d:
                eqs.append(qsym[(1, 2, c, d)] - qsym[(2, 1, c, d)])
    for a, b in ((1, 1), (1, 2), (2, 2)):
        for c in (1, 2):
            for d in (1, 2):
                eqs.append(rsym[(a, b, c, d)] + rsym[(b, a, c, d)]
                           - 2 * qsym[(a, b, c, d)])
    groups["antisymmetry"] = (start, len(eqs))

    # matching the projective-line bracket through p = z1/z2
    start = len(eqs)
    p, pp, zr = sp.symbols("p_aff p_aff_x zrel")
    dp = dcx.bracket_of_functions(table, jet("z1") / jet("z2"),
                                  jet("z1") / jet("z2"))
    subs = {jet("z1"): p, jet("z1", 1): pp + p * zr,
            jet("z2"): 1, jet("z2", 1): zr}
    if matching_target is None:
        G = p * (p - 1) * (p - sp.sympify(s))
        target = {(1,): G, (0,): sp.diff(G, p) * pp / 2}
    else:
        target = matching_target
    for order in ((1,), (0,)):
        got = sp.expand(sp.sympify(dp.coeff(order)).subs(subs))
        diff = sp.expand(got - target.get(order, 0))
        poly = sp.Poly(diff, p, pp, zr)
        eqs.extend(poly.coeffs())
    groups["matching"] = (start, len(eqs))

    if include_jacobi:
        start = len(eqs)
        for tri in dcx.jacobi_triples(("z1", "z2")):
            jd = dcx.jacobi_defect(table, *tri)
            for term in jd.terms:
                zjets = [jet("z1"), jet("z2"), jet("z1", 1), jet("z2", 1),
                         jet("z1", 2), jet("z2", 2), jet("z1", 3),
                         jet("z2", 3)]
                poly = sp.Poly(term.coeff, *zjets)
                eqs.extend(poly.coeffs())
        groups["jacobi"] = (start, len(eqs))

    out = []
    for e in eqs:
        ne = _normalize_eq(e, unknowns)
        if ne is not None:
            out.append(ne)
    return NoGoSystem(s=s, unknowns=unknowns, equations=out, groups=groups)


def prop1_certificate(sys: NoGoSystem, restarts: int = 100,
                      seed: int = 0) -> dict:
    """Multi-start least-squares minimization of the squared residual;
    the smallest value found is the no-go evidence."""
    from scipy.optimize import least_squares

    m = len(sys.unknowns)
    rng = np.random.default_rng(seed)

    def resid(xreal):
        vec = xreal[:m] + 1j * xreal[m:]
        r = sys.residual_vector(vec)
        return np.concatenate([r.real, r.imag])

    best = np.inf
    best_x = None
    values = []
    for _ in range(restarts):
        x0 = rng.normal(scale=1.0, size=2 * m)
        res = least_squares(resid, x0, method="lm", max_nfev=400)
        val = float(2 * res.cost)  # sum of squares
        values.append(val)
        if val < best:
            best, best_x = val, res.x
    return {
        "s": str(sys.s),
        "restarts": restarts,
        "seed": seed,
        "min_residual": best,
        "median_residual": float(np.median(values)),
        "best_point_norm": float(np.linalg.norm(best_x)) if best_x is not None
        else None,
        "n_equations": len(sys.equations),
    }


def prop1_feasible_selftest(seed: int = 0) -> dict:
    """Feasible control: match the descent of a random antisymmetric
    coefficient choice against its own image (no Jacobi constraints);
    the optimum must reach ~0 because the chosen coefficients solve the
    system by construction."""
    rng = np.random.default_rng(seed)
    qv = {}
    rv = {}
    for a, b in ((1, 1), (1, 2), (2, 2)):
        for c in (1, 2):
            for d in (1, 2):
                if c <= d:
                    val = complex(rng.normal(), rng.normal())
                    for key in {(a, b, c, d), (a, b, d, c),
                                (b, a, c, d), (b, a, d, c)}:
                        qv[key] = val
    for a, b in ((1, 1), (1, 2), (2, 2)):
        for c in (1, 2):
            for d in (1, 2):
                r1 = complex(rng.normal(), rng.normal())
                rv[(a, b, c, d)] = r1
                if (b, a) != (a, b):
                    rv[(b, a, c, d)] = 2 * qv[(a, b, c, d)] - r1
                else:
                    rv[(a, b, c, d)] = qv[(a, b, c, d)]  # r + r = 2q

    table = _nogo_tables({k: sp.sympify(val) for k, val in qv.items()},
                         {k: sp.sympify(val) for k, val in rv.items()})
    p, pp, zr = sp.symbols("p_aff p_aff_x zrel")
    dp = dcx.bracket_of_functions(table, jet("z1") / jet("z2"),
                                  jet("z1") / jet("z2"))
    ssubs = {jet("z1"): p, jet("z1", 1): pp + p * zr,
             jet("z2"): 1, jet("z2", 1): zr}
    target = {(1,): sp.expand(sp.sympify(dp.coeff((1,))).subs(ssubs)),
              (0,): sp.expand(sp.sympify(dp.coeff((0,))).subs(ssubs))}
    sys2 = prop1_system(s=2, include_jacobi=False, matching_target=target)
    return prop1_certificate(sys2, restarts=8, seed=seed)


# ---------------------------------------------------------------------------
# finite-dimensional warm-up on three homogeneous coordinates

def cp2_check(g2val=None, g3val=None, corrupt: bool = False) -> dict:
    """Gradient bracket of the cubic Qt on (z1, z2, z3): exact descent to
    the affine coordinates and exact finite Jacobi identity.  `corrupt`
    perturbs one coefficient of the cubic for the negative control."""
    z1, z2, z3 = sp.symbols("w1 w2 w3")
    p1, p2 = sp.symbols("q1 q2")
    G2 = g2 if g2val is None else sp.sympify(g2val)
    G3 = g3 if g3val is None else sp.sympify(g3val)
    cube = sp.Integer(5 if corrupt else 4)
    Qt = sp.Rational(1, 3) * (z1**2 * z3 - cube * z2**3 + G2 * z2 * z3**2
                              + G3 * z3**3)
    br = {
        (1, 2): sp.diff(Qt, z3),
        (2, 3): sp.diff(Qt, z1),
        (3, 1): sp.diff(Qt, z2),
    }

    def bracket(i, j):
        if i == j:
            return sp.Integer(0)
        if (i, j) in br:
            return br[(i, j)]
        return -br[(j, i)]

    zs = {1: z1, 2: z2, 3: z3}

    def fbracket(F, G):
        return sp.expand(sum(sp.diff(F, zs[i]) * sp.diff(G, zs[j])
                             * bracket(i, j)
                             for i in (1, 2, 3) for j in (1, 2, 3)))

    descended = sp.simplify(fbracket(z1 / z3, z2 / z3))
    descended = sp.expand(descended.subs({z1: p1 * z3, z2: p2 * z3}))
    target = p1**2 - 4 * p2**3 + G2 * p2 + G3
    descent_exact = sp.expand(descended - target) == 0

    jac = sp.expand(
        fbracket(z1, fbracket(z2, z3)) + fbracket(z2, fbracket(z3, z1))
        + fbracket(z3, fbracket(z1, z2)))
    return {
        "descent_exact": bool(descent_exact),
        "jacobi_exact": bool(jac == 0),
        "descended": sx.render(descended),
        "target": sx.render(target),
    }
