"""Named, seeded verification campaigns with machine-readable reports.

Each suite bundles module-level checks into a :class:`SuiteReport`:
deterministic for a fixed (suite, seed, parameters) triple, with max and
median residuals recorded per check and at least one negative control
(a deliberately broken variant that must register as broken).
"""

from __future__ import annotations

import json
import statistics
import time
from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from . import distcalc as dc
from . import elliptic
from . import models
from . import symexpr as sx
from .errors import LoopBracketsError
from .symexpr import jet

TAU_BOX = {"re": 0.5, "im_lo": 0.8, "im_hi": 2.0}


def sample_tau(rng) -> complex:
    """Modular parameter from the fixed fundamental-domain box
    |Re tau| <= 1/2, 0.8 <= Im tau <= 2."""
    return complex(rng.uniform(-TAU_BOX["re"], TAU_BOX["re"]),
                   rng.uniform(TAU_BOX["im_lo"], TAU_BOX["im_hi"]))


@dataclass
class CheckRecord:
    """One named check: residual statistics or an exactness flag, and
    whether the check met its contract.  Negative controls pass when the
    broken variant is detected (residual above its floor)."""

    name: str
    passed: bool
    max_residual: float | None = None
    median_residual: float | None = None
    exact: bool | None = None
    negative_control: bool = False
    detail: str = ""

    def to_dict(self) -> dict:
        out = {"name": self.name, "passed": bool(self.passed)}
        if self.max_residual is not None:
            out["max_residual"] = float(self.max_residual)
        if self.median_residual is not None:
            out["median_residual"] = float(self.median_residual)
        if self.exact is not None:
            out["exact"] = bool(self.exact)
        if self.negative_control:
            out["negative_control"] = True
        if self.detail:
            out["detail"] = self.detail
        return out


@dataclass
class SuiteReport:
    """Outcome of one verification campaign."""

    suite: str
    seed: int
    params: dict
    checks: list[CheckRecord] = field(default_factory=list)
    duration_seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self, include_duration: bool = False) -> dict:
        # wall-clock excluded from the canonical payload so identical
        # (suite, seed, params) runs serialize byte-identically
        out = {
            "suite": self.suite,
            "seed": int(self.seed),
            "params": self.params,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
        }
        if include_duration:
            out["duration_seconds"] = self.duration_seconds
        return out

    def to_json(self, include_duration: bool = False) -> str:
        return json.dumps(self.to_dict(include_duration=include_duration),
                          indent=2, sort_keys=True) + "\n"


def _residual_check(name: str, residuals, tol: float,
                    negative: bool = False, floor: float = 0.0) -> CheckRecord:
    residuals = [float(r) for r in residuals]
    mx = max(residuals) if residuals else 0.0
    med = statistics.median(residuals) if residuals else 0.0
    passed = (mx > floor) if negative else (mx < tol)
    return CheckRecord(name=name, passed=passed, max_residual=mx,
                       median_residual=med, negative_control=negative)


# ---------------------------------------------------------------------------
# identity suite

_FD_H = 5e-5


def _fd_tau(fn, tau: complex, h: float | None = None) -> complex:
    """Fourth-order central difference in tau, independent of the closed
    forms under test."""
    if h is None:
        h = _FD_H
    return (8.0 * (fn(tau + h) - fn(tau - h))
            - (fn(tau + 2 * h) - fn(tau - 2 * h))) / (12.0 * h)


def run_identity_suite(seed: int = 0, trials: int = 100,
                       tol: float = 1e-9) -> SuiteReport:
    """Special-function invariants at `trials` random points over >= 3
    random modular parameters: the cubic, derivative, quasi-periodicity,
    addition, and modular-derivative identities."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    t0 = time.time()
    rng = np.random.default_rng(seed)
    taus = [sample_tau(rng) for _ in range(3)]
    ctxs = [elliptic.make_context(t) for t in taus]

    res = {k: [] for k in
           ("cubic", "second_derivative", "zeta_derivative", "log_sigma",
            "quasi_period_1", "quasi_period_tau", "sigma_wp_relation",
            "addition", "q_weight_forms", "g_tau", "wp_tau", "zeta_tau",
            "log_sigma_tau")}
    hz = 1e-5
    for ctx in ctxs:
        for _ in range(trials // 3 + 1):
            z = sx.spectral_point(rng, ctx.tau)
            w = elliptic.wp(ctx, z)
            wz = elliptic.wp_z(ctx, z)
            zt = elliptic.zeta(ctx, z)
            scale = max(1.0, abs(w) ** 3)
            res["cubic"].append(
                abs(wz ** 2 - (4 * w ** 3 - ctx.g2 * w - ctx.g3)) / scale)
            res["second_derivative"].append(
                abs(elliptic.wp_zz(ctx, z) - (6 * w ** 2 - ctx.g2 / 2))
                / max(1.0, abs(w) ** 2))
            # zeta' = -wp via 4th-order finite differences in z
            fd = (8.0 * (elliptic.zeta(ctx, z + hz)
                         - elliptic.zeta(ctx, z - hz))
                  - (elliptic.zeta(ctx, z + 2 * hz)
                     - elliptic.zeta(ctx, z - 2 * hz))) / (12.0 * hz)
            res["zeta_derivative"].append(abs(fd + w) / max(1.0, abs(w)))
            # (log sigma)' = zeta
            fd = (8.0 * (np.log(elliptic.sigma(ctx, z + hz))
                         - np.log(elliptic.sigma(ctx, z - hz)))
                  - (np.log(elliptic.sigma(ctx, z + 2 * hz))
                     - np.log(elliptic.sigma(ctx, z - 2 * hz)))) / (12.0 * hz)
            res["log_sigma"].append(abs(fd - zt) / max(1.0, abs(zt)))
            # quasi-periods of zeta: +g1 across 1, +g1*tau - 2 pi i across tau
            res["quasi_period_1"].append(
                abs(elliptic.zeta(ctx, z + 1) - zt - ctx.g1)
                / max(1.0, abs(zt)))
            res["quasi_period_tau"].append(
                abs(elliptic.zeta(ctx, z + ctx.tau) - zt
                    - (ctx.g1 * ctx.tau - elliptic.TWO_PI_I))
                / max(1.0, abs(zt)))
            # wp(a) - wp(b) = -sigma(a+b) sigma(a-b) / (sigma(a)^2 sigma(b)^2)
            a2, b2 = 0.45 * z, 0.45 * sx.spectral_point(rng, ctx.tau)
            lhs = elliptic.wp(ctx, a2) - elliptic.wp(ctx, b2)
            rhs = -(elliptic.sigma(ctx, a2 + b2) * elliptic.sigma(ctx, a2 - b2)
                    / (elliptic.sigma(ctx, a2) ** 2
                       * elliptic.sigma(ctx, b2) ** 2))
            res["sigma_wp_relation"].append(abs(lhs - rhs) / max(1.0, abs(lhs)))
            # addition: zeta(a+b) - zeta(a) - zeta(b)
            #           = (wp_z(a) - wp_z(b)) / (2 (wp(a) - wp(b)))
            b = sx.spectral_point(rng, ctx.tau)
            wb = elliptic.wp(ctx, b)
            if abs(w - wb) > 1e-3 * max(1.0, abs(w), abs(wb)):
                lhs = (elliptic.zeta(ctx, z + b) - zt - elliptic.zeta(ctx, b))
                rhs = (wz - elliptic.wp_z(ctx, b)) / (2 * (w - wb))
                res["addition"].append(abs(lhs - rhs) / max(1.0, abs(rhs)))
                qa = elliptic.q_weight(ctx, z, b, method="zeta")
                qb = elliptic.q_weight(ctx, z, b, method="rational")
                res["q_weight_forms"].append(
                    abs(qa - qb) / max(1.0, abs(qa)))
            # modular derivatives against finite differences in tau
            dg1, dg2, dg3 = elliptic.g_tau_derivatives(ctx)
            for i, d in enumerate((dg1, dg2, dg3)):
                fn = lambda t, i=i: (elliptic.make_context(t).g1,
                                     elliptic.make_context(t).g2,
                                     elliptic.make_context(t).g3)[i]
                fd = _fd_tau(fn, ctx.tau)
                res["g_tau"].append(abs(fd - d) / max(1.0, abs(d)))
            fd = _fd_tau(lambda t: elliptic.wp(elliptic.make_context(t), z),
                         ctx.tau)
            val = elliptic.wp_tau(ctx, z)
            res["wp_tau"].append(abs(fd - val) / max(1.0, abs(val)))
            fd = _fd_tau(lambda t: elliptic.zeta(elliptic.make_context(t), z),
                         ctx.tau)
            val = elliptic.zeta_tau(ctx, z)
            res["zeta_tau"].append(abs(fd - val) / max(1.0, abs(val)))
            fd = _fd_tau(
                lambda t: np.log(elliptic.sigma(elliptic.make_context(t), z)),
                ctx.tau)
            val = elliptic.log_sigma_tau(ctx, z)
            res["log_sigma_tau"].append(abs(fd - val) / max(1.0, abs(val)))

    checks = [_residual_check(k, v, tol) for k, v in res.items()]
    # negative control: the cubic with a wrong invariant must blow up
    ctx = ctxs[0]
    bad = []
    for _ in range(5):
        z = sx.spectral_point(rng, ctx.tau)
        w = elliptic.wp(ctx, z)
        bad.append(abs(elliptic.wp_z(ctx, z) ** 2
                       - (4 * w ** 3 - 1.01 * ctx.g2 * w - ctx.g3))
                   / max(1.0, abs(w) ** 3))
    checks.append(_residual_check("control_wrong_invariant", bad, tol,
                                  negative=True, floor=1e-3))
    rep = SuiteReport(suite="identities", seed=seed,
                      params={"trials": trials, "tol": tol}, checks=checks)
    rep.duration_seconds = time.time() - t0
    return rep


def run_oracle_suite(seed: int = 0, points: int = 20, radius: int = 200,
                     tol: float = 1e-5) -> SuiteReport:
    """Series fast path against the brute-force truncated lattice sums."""
    t0 = time.time()
    rng = np.random.default_rng(seed)
    tau = sample_tau(rng)
    ctx = elliptic.make_context(tau)
    rw, rz, rs = [], [], []
    for _ in range(points):
        z = sx.spectral_point(rng, tau)
        o = elliptic.lattice_oracle(tau, z, radius=radius)
        rw.append(abs(elliptic.wp(ctx, z) - o.wp))
        rz.append(abs(elliptic.zeta(ctx, z) - o.zeta))
        rs.append(abs(elliptic.sigma(ctx, z) - o.sigma))
    g2o, g3o = elliptic.eisenstein_oracle(tau, radius=200)
    checks = [
        _residual_check("wp_vs_lattice", rw, tol),
        _residual_check("zeta_vs_lattice", rz, tol),
        _residual_check("sigma_vs_lattice", rs, tol),
        _residual_check("eisenstein_vs_lattice",
                        [abs(ctx.g2 - g2o), abs(ctx.g3 - g3o)], 1e-3),
        _residual_check("control_shifted_point",
                        [abs(elliptic.wp(ctx, 0.31 + 0.21j)
                             - elliptic.lattice_oracle(
                                 tau, 0.33 + 0.21j, radius=radius).wp)],
                        tol, negative=True, floor=1e-3),
    ]
    rep = SuiteReport(suite="oracle", seed=seed,
                      params={"points": points, "radius": radius, "tol": tol},
                      checks=checks)
    rep.duration_seconds = time.time() - t0
    return rep


# ---------------------------------------------------------------------------
# Poisson suite

def _table_residuals(table: dc.BracketTable, jets_list) -> list[float]:
    """Max |coefficient| of every antisymmetry and Jacobi defect over the
    sampled jets.  Symbolically zero defects contribute exact zeros."""
    out = []
    defects = []
    for a in table.fields:
        for b in table.fields:
            defects.append(dc.antisymmetry_defect(table, a, b))
    for tr in dc.jacobi_triples(table.fields):
        defects.append(dc.jacobi_defect(table, *tr))
    for d in defects:
        if d.is_zero():
            out.append(0.0)
            continue
        for jets in jets_list:
            vals = dc.evaluate_distpoly(d, jets)
            out.append(max(abs(x) for x in vals))
    return out


def _flip_one_entry(table: dc.BracketTable, a: str, b: str) -> dc.BracketTable:
    entries = dict(table.entries)
    entries[(a, b)] = tuple(dc.DeltaTerm(-t.coeff, t.orders)
                            for t in entries[(a, b)])
    return dc.BracketTable(fields=table.fields, entries=entries,
                           frozen_modular=table.frozen_modular)


def run_poisson_suite(n: int = 2, seed: int = 0, jets: int = 20,
                      tol: float = 1e-8, corrupt: bool = False) -> SuiteReport:
    """Extraction, closed-form match, antisymmetry, Jacobi, descent and
    chart-independence checks for one field count n."""
    if not 2 <= n <= 6:
        raise models.DomainError(f"n = {n} outside the supported range 2..6")
    t0 = time.time()
    rng = np.random.default_rng(seed)
    checks = []

    sc = models.thm3_extract(n)
    sc2 = models.appendix_table(n)
    mismatches = models.match_structconsts(sc, sc2)
    checks.append(CheckRecord(name="extract_matches_closed_form",
                              passed=not mismatches, exact=not mismatches,
                              detail="; ".join(map(str, mismatches[:3]))))
    if corrupt:
        sc = models.StructConsts(
            n=sc.n,
            P={k: (v + jet(models.field_name(n)) ** 2 if k == (0, 0) else v)
               for k, v in sc.P.items()},
            Q=sc.Q, generator=sc.generator)
    table = sc.to_bracket_table()

    jets_list = []
    for _ in range(3):
        ctx = elliptic.make_context(sample_tau(rng))
        for _ in range(max(1, jets // 3)):
            jets_list.append(sx.sample_jets(
                ctx, table.fields, max_order=table.order() + 4,
                seed=int(rng.integers(1 << 31))))
    checks.append(_residual_check("antisymmetry_and_jacobi",
                                  _table_residuals(table, jets_list), tol))

    # centrality of the modular field against the spectral-basis ratios
    central = []
    za = [f for f in table.fields if f != sx.MODULAR_FIELD]
    for f in za[1:]:
        dp = dc.bracket_of_functions(table, jet(sx.MODULAR_FIELD),
                                     jet(f) / jet(za[0]))
        central.append(dp.is_zero())
    checks.append(CheckRecord(name="modular_centrality",
                              passed=all(central), exact=all(central)))

    # descent: Jacobi must survive in two different affine charts
    for denom in (za[0], za[-1]):
        try:
            red = models.lemma1_descend(table, denom)
        except LoopBracketsError as e:
            checks.append(CheckRecord(name=f"descended_chart_{denom}",
                                      passed=False, detail=str(e)[:200]))
            continue
        sub = jets_list[:4]
        checks.append(_residual_check(
            f"descended_chart_{denom}",
            _table_residuals(red, sub), tol))

    # negative control: one flipped sign must break Jacobi
    bad = _flip_one_entry(table, za[0], za[-1])
    checks.append(_residual_check(
        "control_flipped_sign", _table_residuals(bad, jets_list[:2]),
        tol, negative=True, floor=1e-3))

    rep = SuiteReport(suite="poisson", seed=seed,
                      params={"n": n, "jets": jets, "tol": tol,
                              "corrupt": corrupt},
                      checks=checks)
    rep.duration_seconds = time.time() - t0
    return rep


def run_prop2_suite(seed: int = 0, tol: float = 1e-9) -> SuiteReport:
    """The explicit two-field table: Poisson property, descent onto the
    affine line with the expected quartic-free cubic leading coefficient,
    and identification with the n = 2 extracted table."""
    t0 = time.time()
    rng = np.random.default_rng(seed)
    table = models.prop2_table()
    jets_list = [sx.sample_jets(elliptic.make_context(sample_tau(rng)),
                                table.fields, max_order=table.order() + 4,
                                seed=int(rng.integers(1 << 31)))
                 for _ in range(6)]
    checks = [_residual_check("antisymmetry_and_jacobi",
                              _table_residuals(table, jets_list), 1e-8)]

    red = models.lemma1_descend(table, "z2")
    p, px = jet("p1"), jet("p1", 1)
    G = -sp.Rational(1, 2) * (4 * p ** 3 - sx.g2 * p - sx.g3)
    c1 = sum((t.coeff for t in red.entry("p1", "p1") if t.orders == (1,)),
             sp.Integer(0))
    c0 = sum((t.coeff for t in red.entry("p1", "p1") if t.orders == (0,)),
             sp.Integer(0))
    ok1 = sp.expand(c1 - G) == 0
    ok0 = sp.expand(c0 - sp.diff(G, p) / 2 * px) == 0
    checks.append(CheckRecord(name="descent_leading_coefficient",
                              passed=ok1, exact=ok1))
    checks.append(CheckRecord(name="descent_delta_coefficient",
                              passed=ok0, exact=ok0))

    sols = models.linear_identifications(models.thm3_extract(2), table)
    checks.append(CheckRecord(
        name="identification_with_extracted_table", passed=bool(sols),
        exact=bool(sols), detail=str(sols)))

    bad = _flip_one_entry(table, "z1", "z2")
    checks.append(_residual_check(
        "control_flipped_sign", _table_residuals(bad, jets_list[:2]),
        tol, negative=True, floor=1e-3))
    rep = SuiteReport(suite="prop2", seed=seed, params={"tol": tol},
                      checks=checks)
    rep.duration_seconds = time.time() - t0
    return rep


def run_thm2_suite(n: int = 2, trials: int = 10, seed: int = 0,
                   tol: float = 1e-8) -> SuiteReport:
    """Sigma-function realization of the generating-field bracket with
    lambda = 1/n over the flat-coordinate table."""
    t0 = time.time()
    rng = np.random.default_rng(seed)
    res, rows, bad = [], [], []

    def rc(scale):
        return complex(rng.uniform(-scale, scale), rng.uniform(-scale, scale))

    for _ in range(trials):
        ctx = elliptic.make_context(sample_tau(rng))
        t = [rc(0.12) for _ in range(n - 1)]
        f = rc(1.0) + 2.0
        jets = {f"t{c + 1}": rc(0.3) for c in range(n - 1)}
        jets["tau"] = rc(0.3)
        jets["f"] = rc(0.3)
        real = models.thm2_realization(ctx, n, t, f, jets)
        up = complex(rng.uniform(0.15, 0.35), rng.uniform(0.1, 0.3))
        vp = complex(rng.uniform(-0.35, -0.15), rng.uniform(0.1, 0.3))
        res.append(models.thm2_bracket_residual(ctx, n, real, up, vp))
        rows.append(models.thm2_modular_row_residual(ctx, real, up))
        # negative control: wrong coupling constant
        bad.append(models.thm2_bracket_residual(ctx, n, real, up, vp,
                                                lam=1.0 / n + 0.25))
    checks = [
        _residual_check("generating_field_bracket", res, tol),
        _residual_check("modular_row", rows, tol),
        _residual_check("control_wrong_coupling", bad, tol,
                        negative=True, floor=1e-3),
    ]
    rep = SuiteReport(suite="thm2", seed=seed,
                      params={"n": n, "trials": trials, "tol": tol},
                      checks=checks)
    rep.duration_seconds = time.time() - t0
    return rep


def run_nogo_suite(s: complex = 2.0, restarts: int = 100,
                   seed: int = 0, threshold: float = 1e-3) -> SuiteReport:
    """Infeasibility certificate for the constant-coefficient homogeneous
    lift on two fields, plus the feasible self-test of the optimizer."""
    t0 = time.time()
    sysm = models.prop1_system(s)
    cert = models.prop1_certificate(sysm, restarts=restarts, seed=seed)
    selftest = models.prop1_feasible_selftest(seed=seed)
    checks = [
        CheckRecord(name="lifting_system_infeasible",
                    passed=cert["min_residual"] > threshold,
                    max_residual=cert["min_residual"],
                    median_residual=cert["median_residual"],
                    detail=f"restarts={restarts}"),
        CheckRecord(name="control_feasible_selftest",
                    passed=selftest["min_residual"] < 1e-10,
                    max_residual=selftest["min_residual"],
                    median_residual=selftest["median_residual"],
                    negative_control=True,
                    detail="optimizer reaches feasible points when they exist"),
    ]
    rep = SuiteReport(suite="nogo", seed=seed,
                      params={"s": str(s), "restarts": restarts,
                              "threshold": threshold},
                      checks=checks)
    rep.duration_seconds = time.time() - t0
    return rep


def run_cp2_suite(g2val=1, g3val=sp.Rational(1, 2)) -> SuiteReport:
    """Exact symbolic descent of the three-field quadratic bracket to the
    projective-plane bracket, plus its finite Jacobi check."""
    t0 = time.time()
    res = models.cp2_check(g2val, g3val)
    bad = models.cp2_check(g2val, g3val, corrupt=True)
    checks = [
        CheckRecord(name="descent_exact", passed=res["descent_exact"],
                    exact=res["descent_exact"]),
        CheckRecord(name="jacobi_exact", passed=res["jacobi_exact"],
                    exact=res["jacobi_exact"]),
        CheckRecord(name="control_corrupted_casimir",
                    passed=not (bad["descent_exact"] and bad["jacobi_exact"]),
                    exact=False, negative_control=True),
    ]
    rep = SuiteReport(suite="cp2", seed=0,
                      params={"g2": str(g2val), "g3": str(g3val)},
                      checks=checks)
    rep.duration_seconds = time.time() - t0
    return rep
