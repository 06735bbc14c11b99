"""Symbolic expression layer for differential polynomials in field jets
and elliptic builtin leaves.

Expressions are sympy objects over an exact rational coefficient field.
The leaf alphabet:

* field jets ``z0, z0_x, z0_x2, ...`` created through :func:`jet`;
* the scaled modular field ``th`` := tau/(2 pi i), whose first jet is the
  symbol ``T`` (so tau'(x) = 2 pi i T) and whose higher jets print as
  ``T_x``, ``T_x2``, ...;
* quasi-modular leaves ``g1, g2, g3`` (functions of th);
* spectral variables ``u, v`` and the elliptic leaves
  ``wpu = wp(u)``, ``dwpu = wp_u(u)``, ``zwu = zeta(u)`` (same with v).

Working with th instead of tau keeps every derivative rewrite exactly
rational: d g2/dx = (6 g3 - 4 g1 g2) * T and so on, with no pi or i in
any coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
import sympy as sp

from . import elliptic
from .errors import ClosureError, DivisibilityError, UnboundSymbolError

# ---------------------------------------------------------------------------
# symbol registry

u, v = sp.symbols("u v")
wpu, wpv = sp.symbols("wpu wpv")
dwpu, dwpv = sp.symbols("dwpu dwpv")
zwu, zwv = sp.symbols("zwu zwv")
g1, g2, g3 = sp.symbols("g1 g2 g3")

MODULAR_FIELD = "th"

_JETS: dict[str, tuple[str, int]] = {}
_CONSTANTS: set[str] = {"u", "v"}


def _jet_name(field: str, order: int) -> str:
    if field == MODULAR_FIELD and order >= 1:
        base = "T"
        order -= 1
        field = None
    else:
        base = field
    if order == 0:
        return base
    if order == 1:
        return base + "_x"
    return f"{base}_x{order}"


def jet(field: str, order: int = 0) -> sp.Symbol:
    """Jet symbol of a field: order 0 is the field value, order k its
    k-th total x-derivative."""
    if order < 0:
        raise ValueError("negative jet order")
    name = _jet_name(field, order)
    _JETS[name] = (field, order)
    return sp.Symbol(name)


T = jet(MODULAR_FIELD, 1)


def declare_constants(*symbols) -> tuple[sp.Symbol, ...]:
    """Register symbols that total_x_derivative treats as constants."""
    out = []
    for s in symbols:
        s = sp.Symbol(s) if isinstance(s, str) else s
        _CONSTANTS.add(s.name)
        out.append(s)
    return tuple(out)


def jet_info(sym: sp.Symbol):
    """(field, order) for a registered jet symbol, else None."""
    return _JETS.get(sym.name)


# ---------------------------------------------------------------------------
# derivations

# 2*pi*i * d/dtau, equivalently d/d(th), on each tau-dependent leaf.
_WPU_TAU = (zwu - u * g1) * dwpu + 2 * wpu**2 - 2 * g1 * wpu - g2 / sp.Integer(3)
_WPV_TAU = (zwv - v * g1) * dwpv + 2 * wpv**2 - 2 * g1 * wpv - g2 / sp.Integer(3)

DTAU_RULES: dict[sp.Symbol, sp.Expr] = {
    g1: g2 / 12 - g1**2,
    g2: 6 * g3 - 4 * g1 * g2,
    g3: g2**2 / 3 - 6 * g1 * g3,
    wpu: _WPU_TAU,
    wpv: _WPV_TAU,
    zwu: g1 * u * wpu + g2 * u / 12 - g1 * zwu - zwu * wpu - dwpu / 2,
    zwv: g1 * v * wpv + g2 * v / 12 - g1 * zwv - zwv * wpv - dwpv / 2,
    dwpu: 3 * (wpu - g1) * dwpu + (zwu - u * g1) * (6 * wpu**2 - g2 / 2),
    dwpv: 3 * (wpv - g1) * dwpv + (zwv - v * g1) * (6 * wpv**2 - g2 / 2),
}

_DU_RULES = {
    "u": {wpu: dwpu, dwpu: 6 * wpu**2 - g2 / 2, zwu: -wpu, u: sp.Integer(1)},
    "v": {wpv: dwpv, dwpv: 6 * wpv**2 - g2 / 2, zwv: -wpv, v: sp.Integer(1)},
}


_RING_THRESHOLD = 150


def _apply_derivation(e: sp.Expr, rules) -> sp.Expr:
    active = {}
    for s in e.free_symbols:
        r = rules(s)
        if r is not None and r != 0:
            active[s] = sp.sympify(r)
    if not active:
        return sp.Integer(0)
    if sp.count_ops(e) > _RING_THRESHOLD:
        # sparse-ring chain rule: orders of magnitude faster than Expr
        # diff on large expanded sums
        syms = sorted(e.free_symbols
                      | {t for r in active.values() for t in r.free_symbols},
                      key=str)
        R, *gens = sp.ring(syms, sp.QQ)
        gmap = dict(zip(syms, gens))
        p = R.from_expr(e)
        out = R.zero
        for s, r in active.items():
            out = out + p.diff(gmap[s]) * R.from_expr(r)
        return out.as_expr()
    out = sp.Integer(0)
    for s, r in active.items():
        out += e.diff(s) * r
    return out


def d_dtau_scaled(e: sp.Expr) -> sp.Expr:
    """Derivation d/d(th) = 2*pi*i*d/dtau on the leaf alphabet."""
    return _apply_derivation(e, lambda s: DTAU_RULES.get(s))


def d_dz_spectral(e: sp.Expr, var: str) -> sp.Expr:
    """Spectral derivative d/du or d/dv with the closed-form leaf rewrites."""
    if var not in ("u", "v"):
        raise ClosureError(f"unknown spectral variable {var!r}")
    rules = _DU_RULES[var]
    return _apply_derivation(e, lambda s: rules.get(s))


_DX_CACHE: dict = {}


def total_x_derivative(e: sp.Expr) -> sp.Expr:
    """Total x-derivative: jets prolong, tau-dependent leaves rewrite
    through T, registered constants drop out.  Results are memoized:
    bracket compositions differentiate the same coefficients many
    times."""
    cached = _DX_CACHE.get(e)
    if cached is not None:
        return cached

    def rule(s: sp.Symbol):
        info = _JETS.get(s.name)
        if info is not None:
            f, k = info
            return jet(f, k + 1)
        if s in DTAU_RULES:
            return T * DTAU_RULES[s]
        if s.name in _CONSTANTS:
            return sp.Integer(0)
        raise ClosureError(f"no x-derivative rewrite for leaf {s}")

    out = _apply_derivation(e, rule)
    if len(_DX_CACHE) > 20000:
        _DX_CACHE.clear()
    _DX_CACHE[e] = out
    return out


# ---------------------------------------------------------------------------
# polynomial plumbing

def _reduce_power(e: sp.Expr, s: sp.Symbol, repl: sp.Expr) -> sp.Expr:
    if not e.has(s):
        return e
    p = sp.Poly(e, s)
    out = sp.Integer(0)
    for (k,), c in p.terms():
        out += c * s ** (k % 2) * repl ** (k // 2)
    return out


def polynomial_reduce(e: sp.Expr) -> sp.Expr:
    """Canonical form with dwpu, dwpv of degree <= 1 (higher powers
    eliminated through the cubic), monomials sorted, exact coefficients."""
    e = sp.expand(e)
    e = _reduce_power(e, dwpu, 4 * wpu**3 - g2 * wpu - g3)
    e = _reduce_power(e, dwpv, 4 * wpv**3 - g2 * wpv - g3)
    return sp.expand(e)


def exact_divide(num: sp.Expr, den: sp.Expr, *gens) -> sp.Expr:
    """Quotient of an exact polynomial division; DivisibilityError if a
    remainder is left."""
    num = sp.expand(num)
    den = sp.expand(den)
    if not gens:
        gens = tuple(sorted(num.free_symbols | den.free_symbols, key=str))
    q, r = sp.div(num, den, *gens)
    if sp.expand(r) != 0:
        raise DivisibilityError(f"division by {den} left remainder {r}")
    return sp.expand(q)


def assert_exact(e: sp.Expr):
    """Reject floating-point coefficients inside the symbolic subring."""
    if any(isinstance(a, sp.Float) for a in sp.preorder_traversal(e)):
        raise ValueError(f"float coefficient in symbolic expression: {e}")


def render(e: sp.Expr) -> str:
    """Deterministic canonical textual form (expanded, lex-ordered)."""
    return sp.sstr(sp.expand(e), order="lex")


def parse(s: str) -> sp.Expr:
    """Inverse of render over the registered alphabet."""
    names = {name: sp.Symbol(name) for name in _JETS}
    for sym in (u, v, wpu, wpv, dwpu, dwpv, zwu, zwv, g1, g2, g3):
        names[sym.name] = sym
    for name in _CONSTANTS:
        names.setdefault(name, sp.Symbol(name))
    return sp.expand(sp.sympify(s, locals=names))


# ---------------------------------------------------------------------------
# numeric evaluation

@dataclass
class JetAssignment:
    """Complex values for jets and leaves, with the elliptic context that
    produced the builtin leaf values."""

    values: dict
    ctx: elliptic.EllipticContext | None = None
    _cache: dict = dc_field(default_factory=dict, repr=False)

    def evaluate(self, e: sp.Expr) -> complex:
        return evaluate(e, self)


def evaluate(e: sp.Expr, jets: JetAssignment) -> complex:
    """Evaluate an expression at a jet assignment; UnboundSymbolError for
    leaves without values."""
    free = tuple(sorted(e.free_symbols, key=str))
    missing = [s for s in free if s not in jets.values]
    if missing:
        raise UnboundSymbolError(f"no value for {missing}")
    key = (e, free)
    fn = jets._cache.get(key)
    if fn is None:
        fn = sp.lambdify(free, e, modules="numpy")
        jets._cache[key] = fn
    return complex(fn(*(complex(jets.values[s]) for s in free)))


def _annulus(rng, lo=0.2, hi=2.0):
    r = rng.uniform(lo, hi)
    phi = rng.uniform(0, 2 * np.pi)
    return complex(r * np.cos(phi), r * np.sin(phi))


def spectral_point(rng, tau: complex) -> complex:
    """Random off-lattice point, comfortably inside the fundamental cell."""
    re = rng.uniform(0.12, 0.42) * rng.choice([-1.0, 1.0])
    im = rng.uniform(0.08, 0.38) * tau.imag * rng.choice([-1.0, 1.0])
    return complex(re, im)


def sample_jets(ctx: elliptic.EllipticContext, fields, max_order: int = 1,
                seed: int = 0, th_jets: bool = True) -> JetAssignment:
    """Deterministic random jet values plus consistent builtin leaf values
    at fresh off-lattice spectral points."""
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    rng = np.random.default_rng(seed)
    vals: dict = {}
    for f in fields:
        if f == MODULAR_FIELD:
            continue
        for k in range(max_order + 1):
            vals[jet(f, k)] = _annulus(rng)
    if th_jets:
        for k in range(1, max_order + 2):
            vals[jet(MODULAR_FIELD, k)] = _annulus(rng, 0.1, 0.8)
    for _ in range(100):
        up = spectral_point(rng, ctx.tau)
        vp = spectral_point(rng, ctx.tau)
        wu_val, wv_val = elliptic.wp(ctx, up), elliptic.wp(ctx, vp)
        if abs(wu_val - wv_val) > 1e-3 * max(1.0, abs(wu_val), abs(wv_val)):
            break
    vals.update({
        u: up, v: vp,
        wpu: wu_val, wpv: wv_val,
        dwpu: elliptic.wp_z(ctx, up), dwpv: elliptic.wp_z(ctx, vp),
        zwu: elliptic.zeta(ctx, up), zwv: elliptic.zeta(ctx, vp),
        g1: ctx.g1, g2: ctx.g2, g3: ctx.g3,
    })
    return JetAssignment(values=vals, ctx=ctx)
