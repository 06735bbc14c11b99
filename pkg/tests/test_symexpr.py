"""Symbolic layer: jet bookkeeping, derivation rules (validated
numerically against the special-function layer), polynomial plumbing,
and the render/parse round trip."""

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from loopbrackets import elliptic
from loopbrackets import symexpr as sx
from loopbrackets.errors import (ClosureError, DivisibilityError,
                                 UnboundSymbolError)

from conftest import random_cell_point


class TestJets:
    def test_names(self):
        assert sx.jet("z1").name == "z1"
        assert sx.jet("z1", 1).name == "z1_x"
        assert sx.jet("z1", 3).name == "z1_x3"

    def test_modular_jets_route_through_T(self):
        assert sx.jet(sx.MODULAR_FIELD, 1) == sx.T
        assert sx.jet(sx.MODULAR_FIELD, 2).name == "T_x"
        assert sx.jet(sx.MODULAR_FIELD, 3).name == "T_x2"

    def test_info_roundtrip(self):
        s = sx.jet("z4", 2)
        assert sx.jet_info(s) == ("z4", 2)
        assert sx.jet_info(sp.Symbol("unrelated")) is None

    def test_negative_order(self):
        with pytest.raises(ValueError):
            sx.jet("z1", -1)


class TestTotalDerivative:
    def test_jet_prolongation(self):
        z = sx.jet("z1")
        assert sx.total_x_derivative(z ** 2) == 2 * z * sx.jet("z1", 1)

    def test_leibniz(self):
        a, b = sx.jet("z1"), sx.jet("z2")
        lhs = sx.total_x_derivative(a * b)
        rhs = (sx.total_x_derivative(a) * b + a * sx.total_x_derivative(b))
        assert sp.expand(lhs - rhs) == 0

    def test_modular_chain(self):
        # x-derivatives of the quasi-modular leaves go through T
        assert sp.expand(sx.total_x_derivative(sx.g2)
                         - (6 * sx.g3 - 4 * sx.g1 * sx.g2) * sx.T) == 0

    def test_constants_drop(self):
        assert sx.total_x_derivative(sx.u) == 0
        assert sx.total_x_derivative(sx.v) == 0

    def test_unknown_leaf(self):
        with pytest.raises(ClosureError):
            sx.total_x_derivative(sp.Symbol("mystery"))

    def test_large_expression_matches_small_path(self):
        # the sparse-ring fast path and the direct path must agree
        z, zx = sx.jet("z1"), sx.jet("z1", 1)
        small = (z + sx.g2) ** 2
        big = sp.expand((z + zx + sx.g1 + sx.g2 + sx.g3) ** 5)
        direct = sum(big.diff(s) * r for s, r in
                     [(z, zx), (zx, sx.jet("z1", 2)),
                      (sx.g1, sx.T * sx.DTAU_RULES[sx.g1]),
                      (sx.g2, sx.T * sx.DTAU_RULES[sx.g2]),
                      (sx.g3, sx.T * sx.DTAU_RULES[sx.g3]),
                      (sx.T, sx.jet(sx.MODULAR_FIELD, 2))])
        assert sp.expand(sx.total_x_derivative(big) - direct) == 0
        assert sp.expand(sx.total_x_derivative(small)
                         - 2 * (z + sx.g2)
                         * (zx + (6 * sx.g3 - 4 * sx.g1 * sx.g2) * sx.T)) == 0


class TestTauDerivationNumerically:
    """DTAU_RULES claim closed forms for 2*pi*i d/dtau of every leaf;
    check them against finite differences of the numeric layer."""

    def _fd(self, fn, tau, h=5e-5):
        return (8 * (fn(tau + h) - fn(tau - h))
                - (fn(tau + 2 * h) - fn(tau - 2 * h))) / (12 * h)

    @pytest.mark.parametrize("leaf,numeric", [
        (sx.g1, lambda c, z: c.g1),
        (sx.g2, lambda c, z: c.g2),
        (sx.g3, lambda c, z: c.g3),
        (sx.wpu, lambda c, z: elliptic.wp(c, z)),
        (sx.zwu, lambda c, z: elliptic.zeta(c, z)),
        (sx.dwpu, lambda c, z: elliptic.wp_z(c, z)),
    ])
    def test_rule(self, ctx, rng, leaf, numeric):
        z = random_cell_point(rng, ctx.tau)
        vals = {
            sx.u: z, sx.wpu: elliptic.wp(ctx, z),
            sx.dwpu: elliptic.wp_z(ctx, z), sx.zwu: elliptic.zeta(ctx, z),
            sx.g1: ctx.g1, sx.g2: ctx.g2, sx.g3: ctx.g3,
        }
        rule = sx.DTAU_RULES[leaf]
        predicted = complex(sp.lambdify(tuple(vals), rule)(*vals.values()))
        fd = self._fd(lambda t: numeric(elliptic.make_context(t), z),
                      ctx.tau) * complex(elliptic.TWO_PI_I)
        assert abs(predicted - fd) < 1e-6 * max(1.0, abs(predicted))


class TestSpectralDerivative:
    def test_closed_rules(self):
        assert sx.d_dz_spectral(sx.wpu, "u") == sx.dwpu
        assert sp.expand(sx.d_dz_spectral(sx.dwpu, "u")
                         - (6 * sx.wpu ** 2 - sx.g2 / 2)) == 0
        assert sx.d_dz_spectral(sx.zwu, "u") == -sx.wpu
        assert sx.d_dz_spectral(sx.wpu, "v") == 0

    def test_unknown_variable(self):
        with pytest.raises(ClosureError):
            sx.d_dz_spectral(sx.wpu, "t")

    def test_numeric(self, ctx, rng):
        z = random_cell_point(rng, ctx.tau)
        h = 4e-5
        expr = sx.wpu ** 2 + sx.zwu
        d = sx.d_dz_spectral(expr, "u")

        def at(zz):
            return (elliptic.wp(ctx, zz) ** 2 + elliptic.zeta(ctx, zz))
        fd = (at(z + h) - at(z - h)) / (2 * h)
        val = complex(sp.lambdify(
            (sx.wpu, sx.dwpu, sx.zwu, sx.g2), d)(
            elliptic.wp(ctx, z), elliptic.wp_z(ctx, z),
            elliptic.zeta(ctx, z), ctx.g2))
        assert abs(fd - val) < 1e-5 * max(1.0, abs(val))


class TestPolynomialPlumbing:
    def test_reduce_odd_powers(self):
        cubic = 4 * sx.wpu ** 3 - sx.g2 * sx.wpu - sx.g3
        assert sp.expand(sx.polynomial_reduce(sx.dwpu ** 2) - cubic) == 0
        assert sp.expand(sx.polynomial_reduce(sx.dwpu ** 3)
                         - sx.dwpu * cubic) == 0

    def test_exact_divide(self):
        a, b = sp.symbols("a b")
        assert sx.exact_divide(a ** 2 - b ** 2, a - b) == a + b
        with pytest.raises(DivisibilityError):
            sx.exact_divide(a ** 2 + 1, a - b)

    def test_assert_exact(self):
        sx.assert_exact(sp.Rational(1, 3) * sx.g2)
        with pytest.raises(ValueError):
            sx.assert_exact(0.5 * sx.g2)


@st.composite
def alphabet_polys(draw):
    gens = [sx.jet("z1"), sx.jet("z1", 1), sx.jet("z2"), sx.g2, sx.wpu, sx.T]
    n_terms = draw(st.integers(1, 4))
    e = sp.Integer(0)
    for _ in range(n_terms):
        c = sp.Rational(draw(st.integers(-9, 9)), draw(st.integers(1, 7)))
        m = sp.Integer(1)
        for g in draw(st.lists(st.sampled_from(gens), max_size=3)):
            m *= g
        e += c * m
    return sp.expand(e)


class TestRenderParse:
    @settings(max_examples=40, deadline=None)
    @given(alphabet_polys())
    def test_roundtrip(self, e):
        assert sp.expand(sx.parse(sx.render(e)) - e) == 0

    def test_deterministic(self):
        e = sx.g2 * sx.jet("z1") + sx.jet("z2") * sx.T
        assert sx.render(e) == sx.render(sp.expand(e + 0))


class TestEvaluation:
    def test_unbound(self):
        ja = sx.JetAssignment(values={})
        with pytest.raises(UnboundSymbolError):
            ja.evaluate(sx.jet("z9"))

    def test_sample_jets_consistency(self, ctx):
        ja = sx.sample_jets(ctx, ("z1", "z2"), max_order=2, seed=3)
        # builtin leaves agree with the context
        assert abs(ja.values[sx.g2] - ctx.g2) == 0
        wu = elliptic.wp(ctx, ja.values[sx.u])
        assert abs(ja.values[sx.wpu] - wu) < 1e-12 * max(1.0, abs(wu))
        # cubic holds at the sampled spectral point
        r = ja.evaluate(sx.dwpu ** 2 - 4 * sx.wpu ** 3 + sx.g2 * sx.wpu
                        + sx.g3)
        assert abs(r) < 1e-8

    def test_seed_determinism(self, ctx):
        a = sx.sample_jets(ctx, ("z1",), seed=7)
        b = sx.sample_jets(ctx, ("z1",), seed=7)
        assert a.values == b.values
