"""Truncated qubit ⊗ oscillator Hilbert space and its elementary operators.

Conventions used throughout the package:

* units ℏ = 1, ω = 1 (oscillator frequency); energies in units of ℏω,
  rates in units of ω;
* qubit basis ordered (g, e), so σ_z = diag(-1, +1);
* joint operators are Kronecker products qubit ⊗ oscillator;
* the oscillator is truncated at Fock level ``n_max``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import eval_genlaguerre, gammaln

from .errors import CutoffError, DimensionMismatch, UnitarityDefectWarning

__all__ = [
    "FockCutoff", "FSpec", "OscillatorOperator", "JointOperator",
    "SIGMA_X", "SIGMA_Y", "SIGMA_Z", "SIGMA_P", "SIGMA_M", "PROJ_G", "PROJ_E",
    "default_n_max", "annihilation", "number_operator", "position_operator",
    "displacement", "unitarity_defect", "d_coeff", "position_function",
    "pointer_level_count", "pointer_projector",
    "embed_qubit", "embed_oscillator", "joint",
]

# Qubit operators in the (g, e) ordering.
SIGMA_Z = np.array([[-1.0, 0.0], [0.0, 1.0]], dtype=complex)
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_P = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)  # |e><g|
SIGMA_M = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)  # |g><e|
SIGMA_Y = -1j * (SIGMA_P - SIGMA_M)
PROJ_G = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
PROJ_E = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)

_HERM_TOL = 1e-12


@dataclass(frozen=True)
class FockCutoff:
    """Highest retained Fock level; oscillator dimension is n_max + 1."""

    n_max: int

    def __post_init__(self):
        if not isinstance(self.n_max, (int, np.integer)) or self.n_max < 1:
            raise ValueError(f"n_max must be an integer >= 1, got {self.n_max!r}")
        object.__setattr__(self, "n_max", int(self.n_max))

    @property
    def dim(self) -> int:
        return self.n_max + 1

    @property
    def joint_dim(self) -> int:
        return 2 * (self.n_max + 1)


def default_n_max(x0: float, nbar_c: float) -> int:
    """Default truncation covering two displaced thermal clouds plus tails.

    A displaced thermal state carries mean excitation x0^2 + nbar_c; four
    times that (plus slack) keeps every figure-scale observable converged
    to well below half a percent.
    """
    return max(30, math.ceil(4.0 * (x0 * x0 + 2.0 * nbar_c + 2.0)))


@dataclass(frozen=True)
class FSpec:
    """Position-dependent drive profile f(x).

    ``center=None`` resolves to 0 for the step profile (Θ(-x)) and to
    -x0 for the Gaussian once the model knows x0. The step is closed on
    the left: f = 1 for x <= center. ``width`` is ignored by the step
    and constant profiles.
    """

    kind: str = "heaviside"
    center: float | None = None
    width: float = 1.0

    _KINDS = ("heaviside", "gaussian", "constant")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"f kind must be one of {self._KINDS}, got {self.kind!r}")
        if not self.width > 0:
            raise ValueError(f"f width must be > 0, got {self.width!r}")

    def resolve(self, x0: float) -> "FSpec":
        """Fill in the default center for a given pointer displacement."""
        if self.center is not None:
            return self
        center = -float(x0) if self.kind == "gaussian" else 0.0
        return FSpec(self.kind, center, self.width)

    def profile(self, x: np.ndarray) -> np.ndarray:
        if self.center is None:
            raise ValueError("FSpec center unresolved; call resolve(x0) first")
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.ones_like(x)
        if self.kind == "heaviside":
            return (x <= self.center + 1e-12).astype(float)
        return np.exp(-((x - self.center) ** 2) / (2.0 * self.width**2))


def _check_hermitian(matrix: np.ndarray, where: str):
    defect = np.max(np.abs(matrix - matrix.conj().T))
    if defect >= _HERM_TOL:
        raise ValueError(f"{where}: hermiticity defect {defect:.3e} exceeds {_HERM_TOL:g}")


@dataclass
class OscillatorOperator:
    """Complex matrix on the truncated oscillator space."""

    matrix: np.ndarray
    hermitian: bool = False

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise DimensionMismatch(f"oscillator operator must be square, got {self.matrix.shape}")
        if self.hermitian:
            _check_hermitian(self.matrix, "OscillatorOperator")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass
class JointOperator:
    """Complex matrix on the joint space, qubit ⊗ oscillator, basis (g, e)."""

    matrix: np.ndarray
    hermitian: bool = False
    basis: str = "bare"

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        d = self.matrix.shape[0]
        if self.matrix.ndim != 2 or self.matrix.shape != (d, d) or d % 2:
            raise DimensionMismatch(f"joint operator must be square with even dim, got {self.matrix.shape}")
        if self.hermitian:
            _check_hermitian(self.matrix, "JointOperator")

    @property
    def d(self) -> int:
        return self.matrix.shape[0]


def annihilation(cutoff: FockCutoff) -> OscillatorOperator:
    """Ladder operator with ⟨m|a|n⟩ = √n δ_{m,n-1}."""
    return OscillatorOperator(np.diag(np.sqrt(np.arange(1.0, cutoff.dim)), k=1))


def number_operator(cutoff: FockCutoff) -> OscillatorOperator:
    return OscillatorOperator(np.diag(np.arange(cutoff.dim, dtype=float)), hermitian=True)


def position_operator(cutoff: FockCutoff) -> OscillatorOperator:
    """x = (a + a†)/√2, real symmetric tridiagonal in the Fock basis."""
    off = np.sqrt(np.arange(1.0, cutoff.dim) / 2.0)
    return OscillatorOperator(np.diag(off, 1) + np.diag(off, -1), hermitian=True)


def _displacement_block(alpha: complex, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Closed-form ⟨m|D(α)|n⟩ on a rows × cols grid.

    Uses the associated-Laguerre expression with log-gamma scaling so the
    individual factors stay inside double range for n up to several hundred.
    """
    m = np.asarray(rows, dtype=np.int64)[:, None]
    n = np.asarray(cols, dtype=np.int64)[None, :]
    if alpha == 0:
        return (m == n).astype(complex)
    x = abs(alpha) ** 2
    lo = np.minimum(m, n)
    k = np.abs(m - n)
    log_mag = 0.5 * (gammaln(lo + 1.0) - gammaln(lo + k + 1.0)) + k * math.log(abs(alpha)) - 0.5 * x
    lag = eval_genlaguerre(lo, k, x)
    unit = alpha / abs(alpha)
    phase = np.where(m >= n, unit ** (m - n), (-np.conj(unit)) ** (n - m))
    return phase * lag * np.exp(log_mag)


def unitarity_defect(matrix: np.ndarray, sub_dim: int) -> float:
    """max |(D†D - 1)| restricted to the first sub_dim levels."""
    block = (matrix.conj().T @ matrix)[:sub_dim, :sub_dim]
    return float(np.max(np.abs(block - np.eye(sub_dim))))


def displacement(alpha: complex, cutoff: FockCutoff, check: bool = True) -> OscillatorOperator:
    """Displacement operator D(α) = exp(α a† − α* a) in the Fock basis.

    Matrix elements come from the closed-form Laguerre expression, not a
    truncated matrix exponential, so the lower half of the basis is exact
    to rounding. Warns when the displaced support does not comfortably fit
    the truncation (|α|² ≳ n_max/4) or the unitarity defect on the lower
    half exceeds 1e-6.
    """
    alpha = complex(alpha)
    if check and abs(alpha) ** 2 > cutoff.n_max / 4.0:
        warnings.warn(
            f"|alpha|^2 = {abs(alpha)**2:.2f} exceeds n_max/4 = {cutoff.n_max / 4:.2f}; "
            "displaced support may not fit the truncation",
            UnitarityDefectWarning, stacklevel=2,
        )
    idx = np.arange(cutoff.dim)
    mat = _displacement_block(alpha, idx, idx)
    if check:
        defect = unitarity_defect(mat, max(1, cutoff.dim // 2))
        if defect > 1e-6:
            warnings.warn(
                f"displacement unitarity defect {defect:.2e} on the lower half of the basis",
                UnitarityDefectWarning, stacklevel=2,
            )
    return OscillatorOperator(mat)


def d_coeff(n: int, k: int, x0: float) -> complex:
    """Weight ⟨n+k|D(√2 x0)|n⟩ of the sideband-k transition."""
    if n < 0:
        raise IndexError(f"n must be >= 0, got {n}")
    if n + k < 0:
        raise IndexError(f"n + k must be >= 0, got {n + k}")
    return complex(_displacement_block(math.sqrt(2.0) * x0, np.array([n + k]), np.array([n]))[0, 0])


def position_function(f: FSpec, cutoff: FockCutoff) -> OscillatorOperator:
    """f(x) via the spectral decomposition of the truncated x operator.

    Diagonalizing the (exactly tridiagonal) truncated x and applying f to
    its eigenvalues sidesteps position-representation discontinuities; the
    eigenvalues are Gauss-Hermite nodes, so smooth f converge quickly.
    """
    off = np.sqrt(np.arange(1.0, cutoff.dim) / 2.0)
    nodes, vecs = eigh_tridiagonal(np.zeros(cutoff.dim), off)
    fvals = f.profile(nodes)
    mat = (vecs * fvals) @ vecs.T
    return OscillatorOperator(0.5 * (mat + mat.conj().T), hermitian=True)


def pointer_level_count(x0: float) -> int:
    """Largest N with 2N+1 ≤ max(x0², 1): pointer levels kept below the
    left-displaced well's energy at x = 0, and at least the ground state."""
    return max(0, math.floor((max(x0 * x0, 1.0) - 1.0) / 2.0))


def pointer_projector(x0: float, cutoff: FockCutoff,
                      n_proj_override: int | None = None) -> OscillatorOperator:
    """Projector onto the lowest left-displaced Fock states, Σ_n D†|n⟩⟨n|D."""
    if x0 < 0:
        raise ValueError(f"x0 must be >= 0, got {x0}")
    n_proj = pointer_level_count(x0) if n_proj_override is None else int(n_proj_override)
    if n_proj < 0:
        raise ValueError(f"projector rank must be >= 1, got N={n_proj}")
    if n_proj + x0 * x0 > cutoff.n_max / 2.0:
        raise CutoffError(
            f"projector support N + x0^2 = {n_proj + x0 * x0:.2f} exceeds n_max/2 = {cutoff.n_max / 2:.1f}"
        )
    alpha = x0 / math.sqrt(2.0)
    cols = displacement(-alpha, cutoff, check=False).matrix[:, : n_proj + 1]
    mat = cols @ cols.conj().T
    return OscillatorOperator(0.5 * (mat + mat.conj().T), hermitian=True)


def embed_qubit(op2: np.ndarray, cutoff: FockCutoff) -> JointOperator:
    op2 = np.asarray(op2, dtype=complex)
    if op2.shape != (2, 2):
        raise DimensionMismatch(f"qubit operator must be 2x2, got {op2.shape}")
    return JointOperator(np.kron(op2, np.eye(cutoff.dim)))


def embed_oscillator(op: OscillatorOperator | np.ndarray) -> JointOperator:
    mat = op.matrix if isinstance(op, OscillatorOperator) else np.asarray(op, dtype=complex)
    return JointOperator(np.kron(np.eye(2), mat))


def joint(op_qubit: np.ndarray, op_osc: OscillatorOperator | np.ndarray) -> JointOperator:
    """Kronecker product qubit ⊗ oscillator with the (g, e) ordering."""
    op_qubit = np.asarray(op_qubit, dtype=complex)
    if op_qubit.shape != (2, 2):
        raise DimensionMismatch(f"qubit operator must be 2x2, got {op_qubit.shape}")
    mat = op_osc.matrix if isinstance(op_osc, OscillatorOperator) else np.asarray(op_osc, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise DimensionMismatch(f"oscillator operator must be square, got {mat.shape}")
    return JointOperator(np.kron(op_qubit, mat))
