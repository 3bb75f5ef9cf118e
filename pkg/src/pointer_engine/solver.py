"""Vectorized superoperators, sparse steady states, and time propagation.

Column-stacking convention: vec(AρB) = (Bᵀ ⊗ A) vec(ρ), with
vec(ρ) = ρ.flatten(order="F"). A GKSL dissipator D[A] maps to
Ā⊗A − ½(1⊗A†A + (A†A)ᵀ⊗1) and −i[H,·] to −i(1⊗H − Hᵀ⊗1).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import splu

from .errors import (
    DimensionMismatch,
    PositivityError,
    SingularSystem,
    StepSizeUnderflow,
)

__all__ = [
    "DensityMatrix", "SteadyStateResult",
    "vec", "unvec", "dissipator_super", "commutator_super", "diag_hamiltonian_super",
    "vectorize", "steady_state", "propagate", "trace_distance",
]

_PRUNE = 1e-14


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho, dtype=complex).flatten(order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    d = math.isqrt(v.size)
    if d * d != v.size:
        raise DimensionMismatch(f"vector of length {v.size} is not a vectorized square matrix")
    return v.reshape((d, d), order="F")


def _abs_row_sum_max(m: sp.csr_matrix) -> float:
    """max_i Σ_j |m_ij| without scipy's complex-abs cast warning."""
    if m.nnz == 0:
        return 0.0
    mag = sp.csr_matrix((np.abs(m.data), m.indices, m.indptr), shape=m.shape)
    return float(mag.sum(axis=1).max())


def _prune(m: sp.spmatrix) -> sp.csr_matrix:
    m = m.tocsr()
    if m.nnz:
        scale = np.max(np.abs(m.data))
        if scale > 0:
            m.data[np.abs(m.data) < _PRUNE * scale] = 0.0
    m.eliminate_zeros()
    return m


def dissipator_super(a: sp.spmatrix | np.ndarray, rate: float = 1.0) -> sp.csr_matrix:
    """rate · (AρA† − ½{A†A, ρ}) as a sparse superoperator."""
    a = sp.csr_matrix(a, dtype=complex)
    d = a.shape[0]
    ada = (a.conj().T @ a).tocsr()
    eye = sp.identity(d, dtype=complex, format="csr")
    out = sp.kron(a.conj(), a, format="csr")
    out = out - 0.5 * sp.kron(eye, ada, format="csr")
    out = out - 0.5 * sp.kron(ada.T, eye, format="csr")
    return _prune(rate * out)


def commutator_super(h: sp.spmatrix | np.ndarray) -> sp.csr_matrix:
    """−i[H, ·] as a sparse superoperator."""
    h = sp.csr_matrix(h, dtype=complex)
    d = h.shape[0]
    eye = sp.identity(d, dtype=complex, format="csr")
    return _prune(-1j * (sp.kron(eye, h, format="csr") - sp.kron(h.T, eye, format="csr")))


def diag_hamiltonian_super(energies: np.ndarray) -> sp.csr_matrix:
    """−i[H, ·] for H diagonal with the given energies (diagonal superoperator)."""
    e = np.asarray(energies, dtype=float)
    d = e.size
    gaps = e[:, None] - e[None, :]  # (row index i, col index j) of rho
    return sp.diags(-1j * gaps.flatten(order="F")).tocsr()


def vectorize(liouvillian) -> sp.csr_matrix:
    """Sum the named superoperator parts into one sparse generator."""
    d = liouvillian.d
    total = sp.csr_matrix((d * d, d * d), dtype=complex)
    for part in liouvillian.parts.values():
        if part.shape != (d * d, d * d):
            raise DimensionMismatch(f"part shape {part.shape} does not match d^2 = {d * d}")
        total = total + part
    return total.tocsr()


@dataclass
class DensityMatrix:
    """Hermitian, unit-trace, positive-semidefinite state on the joint space."""

    matrix: np.ndarray
    basis: str = "displaced"

    HERM_TOL = 1e-9
    TRACE_TOL = 1e-9
    EIG_FLOOR = -1e-7

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        d = self.matrix.shape[0]
        if self.matrix.ndim != 2 or self.matrix.shape != (d, d):
            raise DimensionMismatch(f"density matrix must be square, got {self.matrix.shape}")
        herm = np.max(np.abs(self.matrix - self.matrix.conj().T))
        if herm > self.HERM_TOL:
            raise ValueError(f"hermiticity defect {herm:.2e} exceeds {self.HERM_TOL:g}")
        tr = np.trace(self.matrix)
        if abs(tr - 1.0) > self.TRACE_TOL:
            raise ValueError(f"trace deviates from 1 by {abs(tr - 1.0):.2e}")
        lo = float(np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T)).min())
        if lo < self.EIG_FLOOR:
            raise PositivityError(f"minimum eigenvalue {lo:.2e} below {self.EIG_FLOOR:g}")

    @property
    def d(self) -> int:
        return self.matrix.shape[0]


def trace_distance(rho_a, rho_b) -> float:
    """½ ||ρ − σ||₁."""
    a = rho_a.matrix if isinstance(rho_a, DensityMatrix) else np.asarray(rho_a)
    b = rho_b.matrix if isinstance(rho_b, DensityMatrix) else np.asarray(rho_b)
    diff = a - b
    diff = 0.5 * (diff + diff.conj().T)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(diff))))


@dataclass
class SteadyStateResult:
    state: DensityMatrix
    residual: float        # ||L vec(rho)||_2 after normalization
    residual_rel: float    # residual / (||L||_inf ||vec(rho)||_2)
    stats: dict = field(default_factory=dict)


def _replace_row(m: sp.csr_matrix, row: int, cols: np.ndarray, vals: np.ndarray) -> sp.csr_matrix:
    """Return a copy of m with the given row replaced by the sparse row (cols, vals)."""
    m = m.tocsr()
    keep = np.ones(m.nnz, dtype=bool)
    keep[m.indptr[row]: m.indptr[row + 1]] = False
    counts = np.diff(m.indptr).copy()
    counts[row] = 0
    indptr = np.concatenate(([0], np.cumsum(counts)))
    stripped = sp.csr_matrix((m.data[keep], m.indices[keep], indptr), shape=m.shape)
    extra = sp.csr_matrix(
        (vals.astype(m.dtype), (np.full(cols.size, row), cols)), shape=m.shape
    )
    return (stripped + extra).tocsr()


@lru_cache(maxsize=4)
def _hermitian_basis(d: int) -> sp.csr_matrix:
    """Isometry from real Hermitian coordinates to vec(ρ).

    Columns 0..d-1 are the diagonal units E_ii; then per pair i>j a symmetric
    (E_ij + E_ji)/√2 and an antisymmetric i(E_ij − E_ji)/√2 element. For a
    Hermiticity-preserving generator L, T†LT is real.
    """
    n = d * d
    i_idx, j_idx = np.tril_indices(d, -1)
    npair = i_idx.size
    s = 1.0 / math.sqrt(2.0)
    rows = np.concatenate([
        np.arange(d) * (d + 1),
        j_idx + d * i_idx, i_idx + d * j_idx,
        j_idx + d * i_idx, i_idx + d * j_idx,
    ])
    cols = np.concatenate([
        np.arange(d),
        d + np.arange(npair), d + np.arange(npair),
        d + npair + np.arange(npair), d + npair + np.arange(npair),
    ])
    vals = np.concatenate([
        np.ones(d), s * np.ones(npair), s * np.ones(npair),
        1j * s * np.ones(npair), -1j * s * np.ones(npair),
    ])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _bordered_solve(l_sub: sp.csr_matrix, diag_pos: np.ndarray, order: int) -> tuple[np.ndarray, dict]:
    """Solve {Lx = 0, Σ x_diag = 1} by replacing one redundant row with the trace row.

    The replaced row must be a density-diagonal row (the left null vector of a
    trace-preserving generator is supported there); among those, pick the one
    with the smallest |L_ii| -- the largest diagonal deficiency -- offset by
    ``order`` for the uniqueness probe. Ties break toward the lowest index.
    """
    diag = np.abs(l_sub.diagonal()[diag_pos])
    ranking = np.argsort(diag, kind="stable")
    row = int(diag_pos[ranking[min(order, ranking.size - 1)]])
    bordered = _replace_row(l_sub, row, diag_pos, np.ones(diag_pos.size))
    rhs = np.zeros(l_sub.shape[0], dtype=l_sub.dtype)
    rhs[row] = 1.0
    try:
        lu = splu(bordered.tocsc(), permc_spec="COLAMD")
    except RuntimeError as exc:  # singular factorization
        raise SingularSystem(f"bordered steady-state system is singular: {exc}") from exc
    upiv = np.abs(lu.U.diagonal())
    pivot_ratio = float(upiv.min() / upiv.max()) if upiv.size else 0.0
    if pivot_ratio < 1e-12:
        # healthy engine systems sit at >= 1e-8 even under extreme rate
        # separation; a numerically vanishing pivot means the stationary
        # manifold is degenerate and the bordered row did not fix it
        raise SingularSystem(
            f"stationary manifold is degenerate (LU pivot ratio {pivot_ratio:.1e})"
        )
    x = lu.solve(rhs)
    if not np.all(np.isfinite(x)):
        raise SingularSystem("bordered steady-state solve produced non-finite entries")
    stats = {"replaced_row": row, "lu_nnz": int(lu.nnz),
             "n_unknowns": int(l_sub.shape[0]), "pivot_ratio": pivot_ratio}
    return x, stats


def _solve_reduced(l_real: sp.csr_matrix, trace_pos: np.ndarray, order: int,
                   reduce: bool) -> tuple[np.ndarray, dict]:
    """Bordered solve restricted to the connected component carrying the trace."""
    n = l_real.shape[0]
    mask = None
    n_components = 1
    if reduce:
        mag = sp.csr_matrix((np.abs(l_real.data), l_real.indices, l_real.indptr), shape=l_real.shape)
        n_components, labels = connected_components(mag + mag.T, directed=False)
        if n_components > 1:
            carrier = np.unique(labels[trace_pos])
            if carrier.size == 1:
                mask = labels == carrier[0]
    if mask is not None:
        index_map = np.flatnonzero(mask)
        l_sub = l_real[index_map][:, index_map].tocsr()
        sub_trace = np.searchsorted(index_map, trace_pos)
        x_sub, stats = _bordered_solve(l_sub, sub_trace, order)
        x = np.zeros(n, dtype=l_real.dtype)
        x[index_map] = x_sub
    else:
        x, stats = _bordered_solve(l_real, trace_pos, order)
    stats["components"] = int(n_components)
    return x, stats


def steady_state(l_total: sp.spmatrix, trace_row_order: int = 0,
                 reduce: bool = True, basis: str = "displaced") -> SteadyStateResult:
    """Unique stationary state of a vectorized generator via sparse direct solve.

    Two structural reductions precede the factorization: the system is recast
    on a real basis of Hermitian matrices (a Hermiticity-preserving L has a
    real representation there, quartering the LU arithmetic), and only the
    connected component of the sparsity graph carrying the density-matrix
    diagonal is solved -- decaying coherence sectors are identically zero.
    The residual of the full complex generator is verified at the end.
    ``trace_row_order`` selects the k-th best trace-row replacement
    (order > 0 is the uniqueness probe).
    """
    l_total = l_total.tocsr()
    n = l_total.shape[0]
    d = math.isqrt(n)
    if d * d != n:
        raise DimensionMismatch(f"generator size {n} is not a perfect square")

    t_iso = _hermitian_basis(d)
    l_mixed = (t_iso.conj().T @ l_total @ t_iso).tocsr()
    imag_max = float(np.max(np.abs(l_mixed.data.imag))) if l_mixed.nnz else 0.0
    scale = float(np.max(np.abs(l_mixed.data))) if l_mixed.nnz else 1.0
    if imag_max <= 1e-9 * max(scale, 1.0):
        l_real = sp.csr_matrix(
            (l_mixed.data.real, l_mixed.indices, l_mixed.indptr), shape=l_mixed.shape)
        l_real.eliminate_zeros()
        y, stats = _solve_reduced(l_real, np.arange(d), trace_row_order, reduce)
        x = t_iso @ y
        stats["representation"] = "hermitian-real"
    else:
        # L does not preserve Hermiticity; solve the complex system as-is.
        diag_pos = np.arange(d) * (d + 1)
        x, stats = _solve_reduced(l_total, diag_pos, trace_row_order, reduce)
        stats["representation"] = "complex"

    rho = unvec(x)
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho).real
    if abs(tr) < 1e-12:
        raise SingularSystem("steady-state solve returned a traceless solution")
    rho /= tr

    evals, evecs = np.linalg.eigh(rho)
    lo = float(evals.min())
    if lo < -1e-5:
        raise PositivityError(
            f"steady state has eigenvalue {lo:.2e} < -1e-5; enlarge the Fock cutoff"
        )
    clipped_mass = float(-evals[evals < 0].sum())
    evals = np.clip(evals, 0.0, None)
    rho = (evecs * evals) @ evecs.conj().T
    rho /= np.trace(rho).real
    stats["clipped_mass"] = clipped_mass

    xs = vec(rho)
    residual = float(np.linalg.norm(l_total @ xs))
    scale = _abs_row_sum_max(l_total) or 1.0
    residual_rel = residual / max(scale * float(np.linalg.norm(xs)), 1e-300)
    return SteadyStateResult(
        state=DensityMatrix(rho, basis=basis),
        residual=residual,
        residual_rel=residual_rel,
        stats=stats,
    )


def _phi1(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    small = np.abs(z) < 1e-5
    zs = z[small]
    out[small] = 1.0 + zs / 2.0 + zs**2 / 6.0
    zl = z[~small]
    out[~small] = (np.exp(zl) - 1.0) / zl
    return out


def _phi2(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    small = np.abs(z) < 1e-4
    zs = z[small]
    out[small] = 0.5 + zs / 6.0 + zs**2 / 24.0
    zl = z[~small]
    out[~small] = (np.exp(zl) - 1.0 - zl) / zl**2
    return out


def propagate(l_total: sp.spmatrix, rho0, t_final: float,
              dt_hint: float | None = None, rtol: float = 1e-8,
              atol: float = 1e-12, max_steps: int = 2_000_000) -> DensityMatrix:
    """Integrate dρ/dt = Lρ with an adaptive exponential two-stage scheme.

    The diagonal of L (all Hamiltonian phases in the assembly basis, plus
    local decay) is exponentiated exactly each step; the off-diagonal
    remainder is treated explicitly with an embedded first/second-order
    error estimate. Step size adapts to the requested tolerance and is
    capped by the remainder's norm, so the fast coherent phases do not
    force the step down.
    """
    if t_final <= 0:
        raise ValueError(f"t_final must be > 0, got {t_final}")
    l_total = l_total.tocsr()
    rho_mat = rho0.matrix if isinstance(rho0, DensityMatrix) else np.asarray(rho0, dtype=complex)
    basis = rho0.basis if isinstance(rho0, DensityMatrix) else "displaced"
    y = vec(rho_mat)

    dvec = l_total.diagonal()
    n_off = (l_total - sp.diags(dvec)).tocsr()
    n_off.eliminate_zeros()
    remainder_norm = _abs_row_sum_max(n_off)
    h_cap = 2.0 / remainder_norm if remainder_norm > 0 else t_final

    h = dt_hint if dt_hint else min(h_cap, t_final)
    h = min(h, t_final)
    h_floor = 1e-13 * max(t_final, 1.0)

    d = math.isqrt(y.size)
    diag_pos = np.arange(d) * (d + 1)
    trace0 = float(np.sum(y[diag_pos]).real)

    t = 0.0
    steps = 0
    drift = 0.0
    while t < t_final * (1.0 - 1e-15):
        if steps >= max_steps:
            raise StepSizeUnderflow(f"exceeded {max_steps} steps at t = {t:.3g}")
        h = min(h, t_final - t, h_cap)
        if h < h_floor:
            raise StepSizeUnderflow(f"step size underflow at t = {t:.3g}")
        z = h * dvec
        ez = np.exp(z)
        k1 = n_off @ y
        u = ez * y + h * (_phi1(z) * k1)
        k2 = n_off @ u
        corr = h * (_phi2(z) * (k2 - k1))
        y_new = u + corr
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.sqrt(np.mean(np.abs(corr / scale) ** 2)))
        if err <= 1.0:
            y = y_new
            t += h
            # the exact flow preserves the trace; remove pure integration
            # drift so it cannot accumulate over long runs
            tr = float(np.sum(y[diag_pos]).real)
            if abs(trace0) > 1e-12 and abs(tr) > 1e-12:
                drift = max(drift, abs(tr - trace0))
                y *= trace0 / tr
        steps += 1
        factor = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** (-1.0 / 3.0)))
        h *= factor

    rho = unvec(y)
    rho = 0.5 * (rho + rho.conj().T)
    if drift > 1e-7:
        warnings.warn(f"per-step trace drift reached {drift:.2e} during propagation",
                      RuntimeWarning, stacklevel=2)
    rho /= np.trace(rho).real
    evals, evecs = np.linalg.eigh(rho)
    if evals.min() < -1e-7:
        rho = (evecs * np.clip(evals, 0.0, None)) @ evecs.conj().T
        rho /= np.trace(rho).real
    return DensityMatrix(rho, basis=basis)
