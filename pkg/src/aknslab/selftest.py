"""Fast built-in property suite behind the selftest subcommand.

Each check returns (name, passed, measured, bound).  The suite is a compact
mirror of the repository test suite's core invariants, sized to run in
about a minute.
"""

from __future__ import annotations

import math

import numpy as np

from . import diagnostics, flows, hierarchy, lax, profiles, spectral


def _l2(grid, v):
    return math.sqrt(grid.dx * float(np.sum(np.abs(v) ** 2)))


def run_selftest(seed: int = 0) -> list[tuple[str, bool, float, float]]:
    rng = np.random.default_rng(seed)
    g = spectral.Grid(64.0, 256)
    f = profiles.gaussian(g, 0.1)
    checks: list[tuple[str, bool, float, float]] = []

    def check(name: str, measured: float, bound: float):
        checks.append((name, measured <= bound, measured, bound))

    # transforms and multipliers
    round_trip = float(np.max(np.abs(g.ifft(g.fft(f.values)) - f.values)))
    check("transform round trip", round_trip, 1e-12)
    plancherel = abs(f.l2_norm() ** 2
                     - spectral.weighted_norm_sq(f.hat(), g.xi, g.dxi, 0.0))
    check("plancherel", plancherel / f.l2_norm() ** 2, 1e-12)
    m1 = spectral.inverse_shift_symbol(4.0, -1)
    m2 = spectral.inverse_shift_symbol(2.0, +1)
    noise = profiles.random_schwartz(g, rng, norm=0.1)
    composed = spectral.apply_multiplier(
        spectral.apply_multiplier(noise.values, m1, g), m2, g)
    direct = spectral.apply_multiplier(
        noise.values, lambda xi: m1(xi) * m2(xi), g)
    check("multiplier composition", _l2(g, composed - direct) / _l2(g, direct), 1e-12)
    other = profiles.random_schwartz(g, rng, norm=0.1)
    sig = spectral.fractional_symbol(2.0, -1, 0.5)
    adj = spectral.fractional_symbol(2.0, +1, 0.5)
    lhs = g.integrate(np.conj(noise.values) * spectral.apply_multiplier(other.values, sig, g))
    rhs = g.integrate(np.conj(spectral.apply_multiplier(noise.values, adj, g)) * other.values)
    check("fractional adjoint", abs(lhs - rhs) / abs(lhs), 1e-12)
    check("partition constant",
          abs(spectral.partition_constant() - 512.0 / 7.0), 1e-8)

    # Green's functions
    fp = lax.greens_fixed_point(f, 2.0, tol=1e-13)
    oracle = lax.greens_oracle(f, 2.0)
    check("fixed point vs oracle",
          _l2(g, fp.g12 - oracle.g12) / _l2(g, oracle.g12), 1e-7)
    check("quadratic identity", fp.quadratic_residual(g), 1e-10)
    xi = g.xi
    g12p = np.fft.ifft(1j * xi * np.fft.fft(fp.g12))
    residual = g12p - 2.0 * 2.0 * fp.g12 - f.values * (fp.gamma + 1.0)
    check("derivative identity", _l2(g, residual) / f.l2_norm(), 1e-8)
    neg = lax.greens_fixed_point(f, -2.0, tol=1e-13)
    sym = lax.triple_at_minus_kappa(f, fp)
    check("conjugation symmetry", _l2(g, neg.g12 - sym.g12), 1e-10)

    # determinant
    a_int = lax.pdet_integral(f, 2.0, fp)
    a_tr = lax.pdet_trace(f, 2.0, 8).value
    check("determinant integral vs trace", abs(a_int - a_tr), 1e-7)
    step = 1e-3
    plus = lax.pdet_integral(f, 2.0 + step, lax.greens_fixed_point(f, 2.0 + step, tol=1e-13))
    minus = lax.pdet_integral(f, 2.0 - step, lax.greens_fixed_point(f, 2.0 - step, tol=1e-13))
    check("dA/dkappa vs int gamma",
          abs((plus - minus) / (2 * step) - g.integrate(fp.gamma)), 1e-6)

    # gradients and brackets
    pert = profiles.random_schwartz(g, rng, norm=0.05)
    eps = 1e-4
    f_plus = spectral.Field(g, f.values + eps * pert.values, f.sign)
    f_minus = spectral.Field(g, f.values - eps * pert.values, f.sign)
    fp_p = lax.pdet_integral(f_plus, 2.0, lax.greens_fixed_point(f_plus, 2.0, tol=1e-13))
    fp_m = lax.pdet_integral(f_minus, 2.0, lax.greens_fixed_point(f_minus, 2.0, tol=1e-13))
    fd = (fp_p - fp_m) / (2 * eps)
    pairing = (g.integrate(pert.values * fp.g21)
               - f.sign * g.integrate(np.conj(pert.values) * fp.g12))
    check("determinant gradient", abs(fd - pairing), 1e-6)
    t4 = lax.greens_fixed_point(f, 4.0, tol=1e-13)
    bracket = hierarchy.poisson_bracket((fp.g21, -fp.g12), (t4.g21, -t4.g12), g)
    check("determinant bracket", abs(bracket), 1e-8)
    check("telescoping identity", hierarchy.telescoping_residual(fp, t4, g), 1e-8)

    # flows
    gp = spectral.Grid(8 * np.pi, 128)
    wave = profiles.plane_wave(gp, 1.0, 1.0)
    errs = []
    for dt in (0.02, 0.01):
        traj = flows.evolve(wave, flows.FlowSpec("nls", dt, 1.0, scheme="rk4_spectral"))
        omega = 1.0 + 2.0
        exact = 1.0 * np.exp(1j * (gp.x - omega))
        errs.append(float(np.max(np.abs(traj.states[-1] - exact))))
    ratio = errs[0] / errs[1]
    checks.append(("integrator order (expect about 16x)",
                   12.0 <= ratio <= 20.0, ratio, 20.0))
    short = flows.evolve(f, flows.FlowSpec("nls", 1e-3, 0.05, snapshot_stride=50))
    drift = diagnostics.conserved_drift(short, kappas=(2.0,))
    check("short-window conservation", max(drift.relative_drift.values()), 1e-8)

    # microscopic conservation
    traj = flows.evolve(f, flows.FlowSpec("nls", 1e-3, 0.02, fp_tol=1e-13))
    rep = diagnostics.micro_residual(traj, 2.0, "nls")
    check("pointwise microscopic residual", rep.pointwise_l1, 1e-5)
    check("integrated microscopic identity", rep.max_rel_gap(), 1e-5)

    # scaling dichotomy (analytic profiles)
    lams = np.array([8.0, 64.0, 512.0])
    grow = [diagnostics.scale_family_norm_sq_callable(
        lambda e: np.exp(-e * e), lam, -0.5) for lam in lams]
    _, _, res = diagnostics.log_lambda_fit(lams, np.array(grow))
    check("log-lambda fit residual", res, 0.10)
    flat = [diagnostics.scale_family_norm_sq_callable(
        lambda e: e * np.exp(-e * e), lam, -0.5) for lam in lams]
    checks.append(("mean-zero boundedness (x2 band)",
                   max(flat) / min(flat) <= 2.0, max(flat) / min(flat), 2.0))
    return checks


def format_report(checks) -> str:
    lines = []
    for name, ok, measured, bound in checks:
        status = "PASS" if ok else "FAIL"
        lines.append(f"[{status}] {name}: {measured:.3e} (bound {bound:.3e})")
    failed = sum(1 for _, ok, _, _ in checks if not ok)
    lines.append(f"{len(checks) - failed}/{len(checks)} checks passed")
    return "\n".join(lines)
