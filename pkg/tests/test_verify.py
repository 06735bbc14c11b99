"""Verification campaigns: every suite passes at default strictness, the
negative controls actually fire, and reports serialize deterministically."""

import json

import pytest
import sympy as sp

from loopbrackets import verify


class TestReportPlumbing:
    def test_residual_check(self):
        c = verify._residual_check("x", [1e-12, 3e-11], 1e-9)
        assert c.passed and c.max_residual == 3e-11
        c = verify._residual_check("x", [1e-2], 1e-9)
        assert not c.passed
        c = verify._residual_check("x", [1e-2], 1e-9,
                                   negative=True, floor=1e-3)
        assert c.passed and c.negative_control

    def test_report_json_shape(self):
        rep = verify.run_cp2_suite()
        doc = json.loads(rep.to_json())
        assert set(doc) == {"suite", "seed", "params", "passed", "checks"}
        assert all({"name", "passed"} <= set(c) for c in doc["checks"])

    def test_duration_excluded_by_default(self):
        rep = verify.run_cp2_suite()
        assert "duration_seconds" not in rep.to_dict()
        assert "duration_seconds" in rep.to_dict(include_duration=True)
        assert rep.duration_seconds >= 0.0

    def test_byte_determinism(self):
        a = verify.run_identity_suite(seed=4, trials=10)
        b = verify.run_identity_suite(seed=4, trials=10)
        assert a.to_json() == b.to_json()


class TestTauSampling:
    def test_box(self, rng):
        for _ in range(50):
            t = verify.sample_tau(rng)
            assert abs(t.real) <= 0.5
            assert 0.8 <= t.imag <= 2.0


class TestIdentitySuite:
    def test_passes(self):
        rep = verify.run_identity_suite(seed=0, trials=30)
        assert rep.passed, [c.name for c in rep.checks if not c.passed]

    def test_has_negative_control(self):
        rep = verify.run_identity_suite(seed=0, trials=10)
        assert any(c.negative_control for c in rep.checks)

    def test_tight_tolerance_fails_honestly(self):
        rep = verify.run_identity_suite(seed=0, trials=10, tol=1e-300)
        assert not rep.passed


class TestOracleSuite:
    def test_passes(self):
        rep = verify.run_oracle_suite(seed=0, points=5)
        assert rep.passed, [c.name for c in rep.checks if not c.passed]


class TestPoissonSuite:
    def test_small_n_passes(self):
        rep = verify.run_poisson_suite(n=2, seed=0)
        assert rep.passed, [c.name for c in rep.checks if not c.passed]
        names = {c.name for c in rep.checks}
        assert "extract_matches_closed_form" in names
        assert "antisymmetry_and_jacobi" in names
        assert "modular_centrality" in names
        assert "control_flipped_sign" in names

    def test_corrupted_table_detected(self):
        rep = verify.run_poisson_suite(n=2, seed=0, corrupt=True)
        assert not rep.passed

    def test_bad_n(self):
        from loopbrackets.errors import DomainError
        with pytest.raises(DomainError):
            verify.run_poisson_suite(n=9)


class TestProp2Suite:
    def test_passes(self):
        rep = verify.run_prop2_suite(seed=0)
        assert rep.passed, [c.name for c in rep.checks if not c.passed]


class TestThm2Suite:
    def test_passes(self):
        rep = verify.run_thm2_suite(n=2, trials=4, seed=0)
        assert rep.passed, [c.name for c in rep.checks if not c.passed]


class TestNoGoSuite:
    def test_passes_fast(self):
        rep = verify.run_nogo_suite(restarts=10, seed=0)
        assert rep.passed, [c.name for c in rep.checks if not c.passed]
        infeasible = next(c for c in rep.checks
                          if c.name == "lifting_system_infeasible")
        assert infeasible.max_residual > 1e-3


class TestCp2Suite:
    def test_passes(self):
        rep = verify.run_cp2_suite()
        assert rep.passed
        assert all(c.exact for c in rep.checks if not c.negative_control)

    def test_other_invariants(self):
        rep = verify.run_cp2_suite(g2val=3, g3val=sp.Rational(-1, 4))
        assert rep.passed
