"""Steady-state energy fluxes, output power, efficiencies, and benchmarks.

Sign convention: Q̇ > 0 flows into the system from the respective bath or
channel; Ẇ > 0 is extracted output power. At stationarity the active demon
satisfies Q̇_h + Q̇_c + Q̇_m = 0 and the passive one Q̇_h + Q̇_c = Ẇ.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import model as _model
from .errors import ConsistencyError, NonHermitianResult
from .model import ModelParams, p_infinity
from .solver import DensityMatrix, unvec, vec

__all__ = [
    "FluxReport", "Benchmarks", "flux", "active_report", "passive_report",
    "benchmarks", "ergotropy", "qubit_excitation", "hot_flux_estimate",
    "excitation_fixed_point",
]

_IMAG_TOL = 1e-9


def _as_matrix(op) -> np.ndarray:
    if sp.issparse(op):
        return op
    return np.asarray(getattr(op, "matrix", op), dtype=complex)


def _real_trace(h, mat: np.ndarray, scale_hint: float = 1.0) -> float:
    """tr{H · mat} checked to be real within tolerance."""
    if sp.issparse(h):
        val = complex((h.multiply(mat.T)).sum())
    else:
        val = complex(np.einsum("ij,ji->", h, mat))
    tol = _IMAG_TOL * max(1.0, abs(val), scale_hint)
    if abs(val.imag) > tol:
        raise NonHermitianResult(f"imaginary residual {val.imag:.3e} exceeds tolerance {tol:.3e}")
    return float(val.real)


def flux(h, l_part: sp.spmatrix, rho) -> float:
    """Energy flux tr{H L(ρ)} for one generator part."""
    h = _as_matrix(h)
    rho_mat = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    drho = unvec(l_part @ vec(rho_mat))
    hn = float(abs(h).max()) if sp.issparse(h) else float(np.max(np.abs(h)))
    scale = hn * float(np.linalg.norm(drho))
    return _real_trace(h, drho, scale_hint=scale)


@dataclass
class FluxReport:
    """Steady-state energy flows (units ℏω²) and efficiency for one point."""

    Qdot_h: float
    Qdot_c: float
    Qdot_m: float
    Qdot_ba: float
    Wdot: float
    eta: float
    mode: str
    first_law_residual: float = 0.0
    eta_heat_cost: float = float("nan")   # Ẇ/(Q̇_h + Q̇_ba)
    eta_net_work: float = float("nan")    # (Ẇ − Q̇_ba)/Q̇_h

    @property
    def is_engine(self) -> bool:
        return self.Qdot_h > 0 and self.Wdot > 0


def _first_law_tol(*fluxes: float) -> float:
    return 1e-6 * max(*(abs(f) for f in fluxes), 1e-9)


def active_report(p: ModelParams, rho) -> FluxReport:
    """Fluxes for the measurement demon, with the backaction/feedback split.

    Q̇_ba = 2γ tr{b†b D[P]ρ} is the pure interrogation backaction and
    Ẇ = γ tr{PρP(H − σ_xHσ_x)} the conditional-flip output; their difference
    must reproduce the direct measurement flux Q̇_m = tr{H L_m ρ}.
    """
    if p.zeta > 0:
        raise ValueError("active_report called with a passive-demon parameter set")
    rho_mat = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    liou = _model.liouvillian(p)
    ops = _model.operators(p)
    h_diag = sp.diags(ops.energies).tocsr()

    q_h = flux(h_diag, liou.parts["hot"], rho_mat)
    q_c = flux(h_diag, liou.parts["cold"], rho_mat)
    q_m = flux(h_diag, liou.parts["measure"], rho_mat)

    q_ba = 0.0
    wdot = 0.0
    if p.gamma > 0:
        proj = ops.proj
        p_rho = proj @ rho_mat
        p_rho_p = p_rho @ proj
        d_proj_rho = p_rho_p - 0.5 * (p_rho + rho_mat @ proj)
        q_ba = 2.0 * p.gamma * float(np.real(np.sum(ops.nb_diag * np.diagonal(d_proj_rho))))
        flip = ops.sigma_x_p @ rho_mat @ ops.sigma_x_p
        wdot = p.gamma * float(np.real(
            np.sum(ops.energies * np.diagonal(p_rho_p))
            - np.sum(ops.energies * np.diagonal(flip))
        ))
        mismatch = abs(q_m - (q_ba - wdot))
        if mismatch > 1e-8 * max(1.0, abs(q_m), abs(q_ba), abs(wdot)):
            raise ConsistencyError(
                f"measurement flux split violated: |Q_m - (Q_ba - W)| = {mismatch:.3e}"
            )

    residual = q_h + q_c + q_m
    if abs(residual) > _first_law_tol(q_h, q_c, q_m):
        raise ConsistencyError(f"first law violated by {residual:.3e} (active)")

    eta = wdot / q_h if q_h > 0 else float("nan")
    eta_heat = wdot / (q_h + q_ba) if q_h + q_ba > 0 else float("nan")
    eta_net = (wdot - q_ba) / q_h if q_h > 0 else float("nan")
    return FluxReport(
        Qdot_h=q_h, Qdot_c=q_c, Qdot_m=q_m, Qdot_ba=q_ba, Wdot=wdot, eta=eta,
        mode="active", first_law_residual=residual,
        eta_heat_cost=eta_heat, eta_net_work=eta_net,
    )


def passive_report(p: ModelParams, rho) -> FluxReport:
    """Fluxes for the coherent drive demon at its rotating-frame limit cycle.

    Ẇ = −ζ(Ω−Δ) tr{f(x)σ_y ρ}; the heat fluxes are weighted with
    Ωσ_z/2 + b†b + ζf(x)σ_x (the rotating-frame Hamiltonian plus the
    frame-shift ℏ(Ω−Δ)σ_z/2, which restores lab-frame energy accounting).
    """
    if p.gamma > 0:
        raise ValueError("passive_report called with an active-demon parameter set")
    rho_mat = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    liou = _model.liouvillian(p)
    ops = _model.operators(p)

    wdot = 0.0
    if p.zeta > 0:
        w_val = complex((ops.f_sy.multiply(rho_mat.T)).sum())
        if abs(w_val.imag) > _IMAG_TOL * max(1.0, abs(w_val)):
            raise NonHermitianResult(f"drive power has imaginary residual {w_val.imag:.3e}")
        wdot = -p.zeta * (p.Omega - p.Delta) * w_val.real
        h_flux = ops.h_flux
    else:
        n = np.arange(ops.dim, dtype=float)
        h_flux = sp.diags(np.concatenate((-0.5 * p.Omega + n, 0.5 * p.Omega + n))).tocsr()

    q_h = flux(h_flux, liou.parts["hot"], rho_mat)
    q_c = flux(h_flux, liou.parts["cold"], rho_mat)

    residual = q_h + q_c - wdot
    if abs(residual) > _first_law_tol(q_h, q_c, wdot):
        raise ConsistencyError(f"first law violated by {residual:.3e} (passive)")

    eta = wdot / q_h if q_h > 0 else float("nan")
    return FluxReport(
        Qdot_h=q_h, Qdot_c=q_c, Qdot_m=0.0, Qdot_ba=0.0, Wdot=wdot, eta=eta,
        mode="passive", first_law_residual=residual,
    )


@dataclass
class Benchmarks:
    """Closed-form performance bounds and reference scales (ℏ = ω = 1)."""

    W_max: float
    p_inf: float
    eta_max: float
    W_erg_approx: float
    eta_carnot: float
    eta_otto: float
    x_th: float
    erasure_energy: float


def _temperature(nbar: float, freq: float) -> float:
    """T from a Bose occupation at the given frequency; 0 when nbar = 0."""
    if nbar <= 0:
        return 0.0
    return freq / math.log1p(1.0 / nbar)


def benchmarks(p: ModelParams) -> Benchmarks:
    pinf = p_infinity(p)
    w_max = (p.Omega - 2.0 * p.x0**2) * pinf
    if p.gamma > 0:
        ratio = (2.0 * p.x0**2) / p.Omega
        eta_max = (1.0 - ratio) / (1.0 + ratio * (1.0 + (2.0 * p.nbar_h + 2.0) * p.kappa_h / p.gamma))
    else:
        eta_max = float("nan")
    w_erg = (p.Omega - 1.0) * pinf - p.nbar_c
    t_h = _temperature(p.nbar_h, p.Omega)
    t_c = _temperature(p.nbar_c, 1.0)
    eta_carnot = 1.0 - t_c / t_h if t_h > 0 else float("nan")
    x_th = math.sqrt(1.0 + 2.0 * p.nbar_c)
    return Benchmarks(
        W_max=w_max, p_inf=pinf, eta_max=eta_max, W_erg_approx=w_erg,
        eta_carnot=eta_carnot, eta_otto=1.0 - 1.0 / p.Omega, x_th=x_th,
        erasure_energy=2.0 * p.x0**2,
    )


def ergotropy(rho, h) -> float:
    """Maximum cyclic-unitary extractable energy via the passive-state construction."""
    rho_mat = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    h_mat = _as_matrix(h)
    if sp.issparse(h_mat):
        h_mat = h_mat.toarray()
    r = np.sort(np.linalg.eigvalsh(rho_mat))[::-1]
    eps = np.sort(np.linalg.eigvalsh(h_mat))
    energy = float(np.real(np.einsum("ij,ji->", h_mat, rho_mat)))
    return energy - float(np.dot(r, eps))


def qubit_excitation(rho) -> float:
    """tr{|e⟩⟨e| ⊗ 1 ρ}; identical in the bare and displaced bases."""
    rho_mat = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    d = rho_mat.shape[0]
    return float(np.real(np.trace(rho_mat[d // 2:, d // 2:])))


def hot_flux_estimate(p: ModelParams) -> float:
    """Weak-coupling closed form for the hot heat input,
    κ_h[n̄_h(1−p∞)(Ω+2x0²) − (n̄_h+1)p∞(Ω−2x0²)]."""
    pinf = p_infinity(p)
    return p.kappa_h * (
        p.nbar_h * (1.0 - pinf) * (p.Omega + 2.0 * p.x0**2)
        - (p.nbar_h + 1.0) * pinf * (p.Omega - 2.0 * p.x0**2)
    )


def excitation_fixed_point(p: ModelParams) -> float:
    """Rate-equation fixed point of the qubit excitation (ideal feedback)."""
    return p_infinity(p)
