"""Always-on invariant suite behind the ``validate`` CLI subcommand.

Each check returns (name, passed, detail). The reference points cover the
three figure-scale regimes: the active demon at zero cold temperature, the
passive demon at its optimal detuning, and the active demon at the
pre-Zeno measurement rate.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from . import hilbert, model, observables, solver, sweep
from .hilbert import FSpec, FockCutoff
from .model import ModelParams


def reference_points(n_max_override: int | None = None) -> dict[str, ModelParams]:
    cutoff = FockCutoff(n_max_override) if n_max_override else None
    return {
        "fig2": ModelParams(gamma=1e-4, nbar_c=0.0, cutoff=cutoff),
        "fig3": ModelParams(zeta=0.1, Delta=12.5, nbar_c=1.0, f=FSpec("heaviside"), cutoff=cutoff),
        "fig4": ModelParams(gamma=1e-2, nbar_c=1.0, cutoff=cutoff),
    }


def _solve(p: ModelParams):
    return solver.steady_state(solver.vectorize(model.liouvillian(p)))


def check_displacement_oracle() -> tuple:
    """Closed-form displacement elements vs a dense matrix exponential.

    The oracle runs on a much larger space so the compared block is free of
    exponential truncation bias even for the largest figure displacement.
    """
    worst = 0.0
    a = np.diag(np.sqrt(np.arange(1.0, 140.0)), 1)
    for alpha in (1.0, 2.5 / math.sqrt(2.0), math.sqrt(2.0) * 2.5, 0.7 + 0.3j):
        ref = scipy.linalg.expm(alpha * a.conj().T - np.conj(alpha) * a)
        got = hilbert.displacement(alpha, FockCutoff(60), check=False).matrix
        worst = max(worst, float(np.max(np.abs(ref[:20, :20] - got[:20, :20]))))
    return "displacement closed form vs expm", worst < 1e-10, f"max dev {worst:.2e}"


def check_dcoeff_unitarity() -> tuple:
    """Σ_k |d_{n,k}|² = 1 row sums for the squared displacement."""
    cut = FockCutoff(80)
    d2 = hilbert.displacement(math.sqrt(2.0) * 1.0, cut, check=False).matrix
    sums = np.sum(np.abs(d2[:, :6]) ** 2, axis=0)
    worst = float(np.max(np.abs(sums - 1.0)))
    return "sideband weight row sums", worst < 1e-8, f"max |Σ-1| {worst:.2e}"


def check_vectorize_identity() -> tuple:
    rng = np.random.default_rng(7)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    b = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    x = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    lhs = solver.vec(a @ x @ b)
    rhs = sp.kron(sp.csr_matrix(b.T), sp.csr_matrix(a)) @ solver.vec(x)
    dev = float(np.max(np.abs(lhs - rhs)))
    return "vec(AXB) = (B^T⊗A)vec(X)", dev < 1e-12, f"max dev {dev:.2e}"


def check_trace_preservation(points) -> tuple:
    worst = 0.0
    for p in points.values():
        liou = model.liouvillian(p)
        tvec = np.zeros(p.d * p.d)
        tvec[np.arange(p.d) * (p.d + 1)] = 1.0
        for part in liou.parts.values():
            if part.nnz:
                worst = max(worst, float(np.max(np.abs(part.T @ tvec))))
    return "trace preservation of all parts", worst < 1e-9, f"max defect {worst:.2e}"


def check_hermiticity_preservation(points) -> tuple:
    rng = np.random.default_rng(11)
    worst = 0.0
    for p in points.values():
        l_total = solver.vectorize(model.liouvillian(p))
        m = rng.normal(size=(p.d, p.d)) + 1j * rng.normal(size=(p.d, p.d))
        rho = m + m.conj().T
        out = solver.unvec(l_total @ solver.vec(rho))
        worst = max(worst, float(np.max(np.abs(out - out.conj().T))))
    return "hermiticity preservation", worst < 1e-10, f"max defect {worst:.2e}"


def check_global_local_limit() -> tuple:
    """At zero displacement the sideband dissipator reduces to the local one."""
    p = ModelParams(x0=0.0, gamma=1e-3, nbar_c=0.0, cutoff=FockCutoff(12))
    glo = model.hot_dissipator_global(p)
    loc = model.hot_dissipator_local(p)
    dev = float(abs(glo - loc).max()) if (glo - loc).nnz else 0.0
    return "global = local dissipator at x0 = 0", dev < 1e-10, f"max dev {dev:.2e}"


def check_flux_laws(points) -> tuple:
    """First/second law and the measurement-flux split at the reference points."""
    details = []
    ok = True
    for name, p in points.items():
        res = _solve(p)
        report = sweep.report_for(p, res.state)
        bench = observables.benchmarks(p)
        scale = max(abs(report.Qdot_h), abs(report.Qdot_c), abs(report.Wdot), 1e-9)
        if abs(report.first_law_residual) > 1e-6 * scale:
            ok = False
            details.append(f"{name}: first law {report.first_law_residual:.2e}")
        if report.is_engine and not (report.eta <= bench.eta_carnot + 1e-6):
            ok = False
            details.append(f"{name}: eta {report.eta:.3f} > Carnot {bench.eta_carnot:.3f}")
    return "first and second law at reference points", ok, "; ".join(details) or "all within tolerance"


def check_state_validity(points) -> tuple:
    worst_res = 0.0
    worst_clip = 0.0
    for p in points.values():
        res = _solve(p)
        worst_res = max(worst_res, res.residual_rel)
        worst_clip = max(worst_clip, res.stats.get("clipped_mass", 0.0))
    ok = worst_res < 1e-8 and worst_clip < 1e-6
    return "steady-state residual and positivity", ok, (
        f"max rel residual {worst_res:.2e}, max clipped mass {worst_clip:.2e}")


def check_ideal_state_distance() -> tuple:
    p = ModelParams(gamma=1e-4, nbar_c=0.0)
    res = _solve(p)
    dist = solver.trace_distance(model.ideal_steady_state(p), res.state)
    return "ideal steady state vs solved", dist < 0.05, f"trace distance {dist:.3f}"


def check_benchmark_power() -> tuple:
    p = ModelParams(gamma=1e-4, nbar_c=0.0)
    res = _solve(p)
    report = observables.active_report(p, res.state)
    bench = observables.benchmarks(p)
    ratio = report.Wdot / (p.gamma * bench.W_max)
    eta_ratio = report.eta / bench.eta_max
    ok = abs(ratio - 1.0) < 0.15 and abs(eta_ratio - 1.0) < 0.15
    return "benchmark power and efficiency", ok, (
        f"W/(γW_max) = {ratio:.3f}, eta/eta_max = {eta_ratio:.3f}")


def check_zeta_wmax_arithmetic() -> tuple:
    p = ModelParams(zeta=0.1, Delta=12.5, nbar_c=1.0)
    bench = observables.benchmarks(p)
    value = p.zeta * bench.W_max / (p.Omega * p.kappa_h)
    return "drive benchmark scale", abs(value - 29.2) <= 0.5, f"ζW_max/(Ωκ_h) = {value:.3f}"


def check_appendix_compare(tol: float) -> tuple:
    _, summary = sweep.run_appendix_compare()
    keys = [k for k in summary if k.startswith("reldiff_") and "closed" not in k]
    worst = max(summary[k] for k in keys)
    ok = worst < tol
    detail = f"max global/local flux rel diff {worst:.3f} (tol {tol:g})"
    cf = max(summary.get("reldiff_Qdot_h_closed_form", 1.0),
             summary.get("reldiff_p_e_closed_form", 1.0))
    ok = ok and cf < 0.10
    return "hot dissipator global vs local + closed forms", ok, (
        detail + f"; closed-form rel dev {cf:.3f}")


def check_propagate_agreement(points) -> tuple:
    details = []
    ok = True
    for name, p in points.items():
        l_total = solver.vectorize(model.liouvillian(p))
        res = solver.steady_state(l_total)
        rho_t = solver.propagate(l_total, model.ideal_steady_state(p), t_final=10.0 / p.kappa_h)
        dist = solver.trace_distance(rho_t, res.state)
        details.append(f"{name}: {dist:.2e}")
        ok = ok and dist < 1e-3
    return "propagate vs steady state", ok, "; ".join(details)


def check_cutoff_convergence(points, tol: float) -> tuple:
    """Fluxes must move by < tol under a 1.5x cutoff enlargement."""
    details = []
    ok = True
    for name, p in points.items():
        res = _solve(p)
        report = sweep.report_for(p, res.state)
        big = replace(p, cutoff=FockCutoff(math.ceil(1.5 * p.cutoff.n_max)))
        res_big = _solve(big)
        report_big = sweep.report_for(big, res_big.state)
        worst = 0.0
        for attr in ("Qdot_h", "Qdot_c", "Wdot"):
            a, b = getattr(report, attr), getattr(report_big, attr)
            denom = max(abs(a), abs(b), 1e-12)
            worst = max(worst, abs(a - b) / denom)
        details.append(f"{name}: {worst:.2e}")
        ok = ok and worst < tol
    return "cutoff convergence under 1.5x enlargement", ok, "; ".join(details)


def _guard(fn, *args) -> tuple:
    """A crashing check reports FAIL with the error instead of aborting."""
    try:
        return fn(*args)
    except Exception as exc:
        name = fn.__name__.removeprefix("check_").replace("_", " ")
        return name, False, f"{type(exc).__name__}: {exc}"


def run_all(n_max_override: int | None = None, tol_appendix: float = 0.05,
            tol_convergence: float = 0.005) -> list[tuple]:
    points = reference_points(n_max_override)
    return [
        _guard(check_displacement_oracle),
        _guard(check_dcoeff_unitarity),
        _guard(check_vectorize_identity),
        _guard(check_global_local_limit),
        _guard(check_trace_preservation, points),
        _guard(check_hermiticity_preservation, points),
        _guard(check_state_validity, points),
        _guard(check_flux_laws, points),
        _guard(check_ideal_state_distance),
        _guard(check_benchmark_power),
        _guard(check_zeta_wmax_arithmetic),
        _guard(check_appendix_compare, tol_appendix),
        _guard(check_propagate_agreement, points),
        _guard(check_cutoff_convergence, points, tol_convergence),
    ]
