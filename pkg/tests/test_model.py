import math
import warnings

import numpy as np
import pytest
import scipy.sparse as sp

from pointer_engine import hilbert, model, solver
from pointer_engine.errors import RegimeWarning, ValidationError
from pointer_engine.hilbert import FSpec, FockCutoff
from pointer_engine.model import ModelParams

from conftest import random_density, random_hermitian

warnings.simplefilter("ignore", RegimeWarning)


def small_params(**kw):
    defaults = dict(Omega=20.0, x0=1.0, kappa_h=1e-3, kappa_c=0.1,
                    nbar_h=1.0, nbar_c=0.0, cutoff=FockCutoff(14))
    defaults.update(kw)
    return ModelParams(**defaults)


class TestModelParams:
    def test_active_xor_passive(self):
        with pytest.raises(ValidationError):
            ModelParams(gamma=0.1, zeta=0.1)

    def test_bath_only_allowed(self):
        p = ModelParams(gamma=0.0, zeta=0.0)
        assert p.mode == "bath"

    def test_negative_rate_rejected(self):
        with pytest.raises(ValidationError):
            ModelParams(kappa_c=-0.1)
        with pytest.raises(ValidationError):
            ModelParams(Omega=-1.0)

    def test_regime_warning(self):
        with pytest.warns(RegimeWarning):
            warnings.simplefilter("always", RegimeWarning)
            ModelParams(Omega=5.0)
        warnings.simplefilter("ignore", RegimeWarning)

    def test_default_cutoff_applied(self):
        p = ModelParams(nbar_c=1.0)
        assert p.cutoff.n_max == 41
        assert p.d == 84

    def test_f_center_resolved(self):
        p = ModelParams(f=FSpec("gaussian"))
        assert p.f.center == -2.5


class TestHamiltonian:
    def test_decoupled_spectrum(self):
        p = small_params(x0=0.0)
        h = model.hamiltonian(p).matrix
        evals = np.sort(np.linalg.eigvalsh(h))
        n = np.arange(p.cutoff.dim)
        expected = np.sort(np.concatenate((-10.0 + n + 0.5, 10.0 + n + 0.5)))
        assert np.allclose(evals, expected)

    def test_displaced_spectrum_structure(self):
        # within each qubit branch the gaps are the oscillator quantum,
        # with the branch offset ±Ω/2 - x0²/2 + 1/2; only the low-lying part
        # of the truncated bare spectrum is free of edge corruption
        p = small_params(x0=1.0, cutoff=FockCutoff(30))
        h = model.hamiltonian(p).matrix
        evals = np.sort(np.linalg.eigvalsh(h))
        expected = np.sort(model.hamiltonian_energies(p))
        keep = p.cutoff.dim // 2
        assert np.allclose(evals[:keep], expected[:keep], atol=1e-6)
        assert expected[0] == pytest.approx(-p.Omega / 2 - p.x0**2 / 2 + 0.5)

    def test_branch_energy_difference(self):
        p = small_params()
        h = model.hamiltonian(p).matrix
        basis = {(label, n): vec for label, n, vec in model.eigenbasis(p)}
        e_g0 = np.real(basis[("g", 0)].conj() @ h @ basis[("g", 0)])
        e_e0 = np.real(basis[("e", 0)].conj() @ h @ basis[("e", 0)])
        assert e_g0 - e_e0 == pytest.approx(-p.Omega, abs=1e-8)


class TestEigenbasis:
    def test_bare_basis_at_zero_displacement(self):
        p = small_params(x0=0.0)
        for label, n, vec in model.eigenbasis(p):
            idx = (0 if label == "g" else p.cutoff.dim) + n
            expected = np.zeros(p.d)
            expected[idx] = 1.0
            assert np.allclose(vec, expected)

    def test_eigen_residual(self):
        p = small_params(cutoff=FockCutoff(60))
        h = model.hamiltonian(p).matrix
        energies = model.hamiltonian_energies(p)
        dim = p.cutoff.dim
        for label, n, vec in model.eigenbasis(p):
            if n > p.cutoff.n_max // 2:
                continue
            e = energies[(0 if label == "g" else dim) + n]
            assert np.linalg.norm(h @ vec - e * vec) < 1e-6

    def test_branch_orthonormality(self):
        p = small_params(cutoff=FockCutoff(30))
        vecs = {(label, n): v for label, n, v in model.eigenbasis(p)}
        half = p.cutoff.n_max // 2
        for n in range(half):
            for m in range(half):
                for label in ("g", "e"):
                    ov = vecs[(label, n)].conj() @ vecs[(label, m)]
                    assert abs(ov - (1.0 if n == m else 0.0)) < 1e-8
        # opposite branches are exactly orthogonal through the qubit factor
        assert abs(vecs[("g", 0)].conj() @ vecs[("e", 0)]) < 1e-12


class TestHotDissipator:
    def test_global_reduces_to_local_at_zero_displacement(self):
        p = small_params(x0=0.0)
        diff = model.hot_dissipator_global(p) - model.hot_dissipator_local(p)
        assert (abs(diff).max() if diff.nnz else 0.0) < 1e-10

    def test_zero_rate_gives_zero(self):
        p = small_params(kappa_h=0.0)
        assert model.hot_dissipator_global(p).nnz == 0

    def test_hot_only_steady_state_thermal_qubit(self):
        # two-branch detailed balance: p_e = nbar/(2 nbar + 1) regardless of
        # the pointer distribution (flat spectrum, level-independent rates)
        p = small_params(kappa_c=0.0, nbar_h=1.0, cutoff=FockCutoff(10))
        liou = model.liouvillian(p)
        res = solver.steady_state(solver.vectorize(liou))
        from pointer_engine.observables import qubit_excitation
        assert qubit_excitation(res.state) == pytest.approx(1 / 3, abs=0.02)

    def test_local_qubit_relaxation_rate(self):
        # bare two-level system: <sigma_z> decays at kappa (2 nbar + 1)
        kappa, nbar = 1e-2, 1.0
        down = solver.dissipator_super(sp.csr_matrix(hilbert.SIGMA_M), kappa * (nbar + 1))
        up = solver.dissipator_super(sp.csr_matrix(hilbert.SIGMA_P), kappa * nbar)
        l_total = (down + up).tocsr()
        rho0 = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)
        t = 30.0
        rho_t = solver.propagate(l_total, rho0, t).matrix
        z_inf = -1.0 / (2 * nbar + 1)
        z_t = np.real(np.trace(np.diag([-1.0, 1.0]) @ rho_t))
        expected = z_inf + (1.0 - z_inf) * math.exp(-kappa * (2 * nbar + 1) * t)
        assert z_t == pytest.approx(expected, abs=1e-6)


class TestColdDissipator:
    def test_decoupled_oscillator_thermalizes(self):
        # qubit populations are conserved without a hot bath; damp the qubit
        # weakly to pin a unique state and read out the oscillator marginal
        p = small_params(x0=0.0, kappa_h=1e-4, nbar_h=0.0, nbar_c=1.0,
                         cutoff=FockCutoff(30))
        res = solver.steady_state(solver.vectorize(model.liouvillian(p)))
        ops = model.operators(p)
        mean_n = float(np.real(np.sum(ops.nb_diag * np.diag(res.state.matrix))))
        assert mean_n == pytest.approx(1.0, abs=1e-6)

    def test_ground_branch_displaced_thermal(self):
        # zero-temperature hot bath selects the ground branch; the pointer
        # sits in a displaced thermal state with mean occupation nbar_c
        p = small_params(kappa_h=1e-3, nbar_h=0.0, nbar_c=0.5, cutoff=FockCutoff(16))
        res = solver.steady_state(solver.vectorize(model.liouvillian(p)))
        ops = model.operators(p)
        from pointer_engine.observables import qubit_excitation
        assert qubit_excitation(res.state) < 1e-8
        mean_b = float(np.real(np.sum(ops.nb_diag * np.diag(res.state.matrix))))
        assert mean_b == pytest.approx(0.5, abs=1e-6)
        ideal = model.ideal_steady_state(p)
        assert solver.trace_distance(ideal, res.state) < 1e-6


class TestMeasurementGenerator:
    def test_zero_rate_gives_zero(self):
        p = small_params(gamma=0.0)
        assert model.measurement_generator(p).nnz == 0

    def test_projector_complement_identity(self, rng):
        # D[1-P] = D[P] for any projector
        p = small_params(gamma=1e-2, x0=2.5, Omega=100.0, cutoff=FockCutoff(33))
        ops = model.operators(p)
        proj = ops.proj.toarray()
        eye = np.eye(p.d)
        d_p = solver.dissipator_super(sp.csr_matrix(proj))
        d_q = solver.dissipator_super(sp.csr_matrix(eye - proj))
        for _ in range(3):
            rho = random_density(rng, p.d)
            lhs = solver.unvec(d_p @ solver.vec(rho))
            rhs = solver.unvec(d_q @ solver.vec(rho))
            assert np.max(np.abs(lhs - rhs)) < 1e-12

    def test_feedback_transfers_excited_branch_to_ground(self):
        # a flip conditioned on the pointer being left takes the excited
        # branch of the ideal state to the ground manifold
        p = ModelParams(gamma=1e-3, nbar_c=0.0)
        ops = model.operators(p)
        dim = p.cutoff.dim
        rho_e = np.zeros((p.d, p.d), dtype=complex)
        rho_e[dim, dim] = 1.0  # |e, 0_e><e, 0_e| in the displaced basis
        flip = ops.sigma_x_p.toarray()
        out = flip @ rho_e @ flip.conj().T
        assert np.trace(out).real == pytest.approx(1.0, abs=1e-10)
        from pointer_engine.observables import qubit_excitation
        assert qubit_excitation(out) < 1e-10

    def test_projector_rank(self):
        p = ModelParams(gamma=1e-3, nbar_c=0.0)
        ops = model.operators(p)
        assert ops.n_proj == 2
        assert np.trace(ops.proj.toarray()).real == pytest.approx(6.0, abs=1e-8)


class TestDrive:
    def test_constant_profile_zero_detuning(self):
        p = small_params(gamma=0.0, zeta=0.05, Delta=0.0, f=FSpec("constant"))
        htilde, _ = model.drive_rotating_frame(p)
        dim = p.cutoff.dim
        d2 = model._d2_matrix(p.x0, p.cutoff.n_max)
        expected = np.kron(np.diag([0.0, 0.0]), np.eye(dim))
        expected = expected + np.kron(np.eye(2), np.diag(np.arange(dim, dtype=float)))
        block = np.zeros((p.d, p.d), dtype=complex)
        block[:dim, dim:] = d2.conj().T
        block[dim:, :dim] = d2
        expected = expected + p.zeta * block
        assert np.max(np.abs(htilde.matrix - expected)) < 1e-12

    def test_zeta_zero_matches_bath_generator_with_detuned_qubit(self):
        # both qubit splittings exceed the sideband range so the hot-bath
        # frequency filter retains identical terms on the two sides
        base = dict(Omega=20.0, x0=1.0, kappa_h=1e-3, kappa_c=0.1, nbar_h=1.0,
                    nbar_c=0.5, cutoff=FockCutoff(10))
        p_rot = ModelParams(zeta=1e-30, Delta=12.0, **base)
        p_lab = ModelParams(Omega=12.0, x0=1.0, kappa_h=1e-3, kappa_c=0.1,
                            nbar_h=1.0, nbar_c=0.5, cutoff=FockCutoff(10))
        l_rot = solver.vectorize(model.liouvillian(p_rot))
        l_lab = solver.vectorize(model.liouvillian(p_lab))
        # the lab assembly carries the constant -x0^2/2 + 1/2 offset which
        # drops out of the commutator, so the generators agree exactly
        diff = l_rot - l_lab
        assert (abs(diff).max() if diff.nnz else 0.0) < 1e-9

    def test_requires_drive(self):
        with pytest.raises(ValidationError):
            model.drive_rotating_frame(small_params())

    def test_optimal_detuning_value(self):
        assert 2 * 2.5**2 == pytest.approx(12.5)


class TestLiouvillian:
    def test_parts_named_and_trace_preserving(self):
        p = small_params(gamma=1e-3)
        liou = model.liouvillian(p)
        assert set(liou.parts) == {"hamiltonian", "hot", "cold", "measure", "drive"}
        liou.validate()

    def test_hermiticity_preservation(self, rng):
        for kw in (dict(gamma=1e-3), dict(zeta=0.05, Delta=3.0)):
            p = small_params(**kw)
            l_total = solver.vectorize(model.liouvillian(p))
            rho = random_hermitian(rng, p.d)
            out = solver.unvec(l_total @ solver.vec(rho))
            assert np.max(np.abs(out - out.conj().T)) < 1e-10

    def test_hamiltonian_part_annihilates_eigenprojectors(self):
        p = small_params()
        liou = model.liouvillian(p)
        dim = p.cutoff.dim
        rho = np.zeros((p.d, p.d), dtype=complex)
        rho[dim + 3, dim + 3] = 1.0
        out = liou.parts["hamiltonian"] @ solver.vec(rho)
        assert np.max(np.abs(out)) < 1e-12


class TestIdealSteadyState:
    def test_zero_hot_occupation_is_ground_branch(self):
        p = small_params(nbar_h=0.0)
        rho = model.ideal_steady_state(p).matrix
        dim = p.cutoff.dim
        assert np.trace(rho[dim:, dim:]).real == pytest.approx(0.0, abs=1e-12)

    def test_branch_weight_formula(self):
        p = small_params(nbar_h=1.0, gamma=1e-9)
        from pointer_engine.observables import qubit_excitation
        assert qubit_excitation(model.ideal_steady_state(p)) == pytest.approx(1 / 3, rel=1e-5)

    def test_bare_basis_representation(self):
        p = small_params(nbar_c=0.3, cutoff=FockCutoff(30))
        rho_d = model.ideal_steady_state(p, basis="displaced")
        rho_b = model.ideal_steady_state(p, basis="bare")
        u = model.basis_transform(p)
        back = u.conj().T @ rho_b.matrix @ u
        assert solver.trace_distance(back / np.trace(back).real, rho_d.matrix) < 1e-8


class TestDisplacedVsBareAssembly:
    """Brute-force bare-basis construction as an independent oracle."""

    def _bare_liouvillian(self, p):
        dim = p.cutoff.dim
        d = p.d
        a = hilbert.annihilation(p.cutoff).matrix
        d1 = hilbert.displacement(p.x0 / math.sqrt(2), p.cutoff, check=False).matrix
        g_vec = [np.kron([1, 0], d1[:, n]) for n in range(dim)]
        e_vec = [np.kron([0, 1], d1.conj().T[:, n]) for n in range(dim)]

        def dis(a_op, rate):
            a_op = sp.csr_matrix(a_op)
            return solver.dissipator_super(a_op, rate)

        n2 = d * d
        parts = {}
        h = model.hamiltonian(p).matrix
        parts["hamiltonian"] = solver.commutator_super(sp.csr_matrix(h))
        hot = sp.csr_matrix((n2, n2), dtype=complex)
        for k in range(-p.cutoff.n_max, p.cutoff.n_max + 1):
            if p.Omega + k <= 0:
                continue
            a_dn = np.zeros((d, d), dtype=complex)
            a_up = np.zeros((d, d), dtype=complex)
            for n in range(dim):
                if 0 <= n - k < dim:
                    a_dn += np.conj(hilbert.d_coeff(n, -k, p.x0)) * np.outer(g_vec[n - k], e_vec[n].conj())
                if 0 <= n + k < dim:
                    a_up += hilbert.d_coeff(n, k, p.x0) * np.outer(e_vec[n + k], g_vec[n].conj())
            hot = hot + dis(a_dn, p.kappa_h * (p.nbar_h + 1))
            if p.nbar_h > 0:
                hot = hot + dis(a_up, p.kappa_h * p.nbar_h)
        parts["hot"] = hot
        b = np.kron(np.eye(2), a) + p.x0 / math.sqrt(2) * np.kron(hilbert.SIGMA_Z, np.eye(dim))
        cold = dis(b, p.kappa_c * (p.nbar_c + 1))
        if p.nbar_c > 0:
            cold = cold + dis(b.conj().T, p.kappa_c * p.nbar_c)
        parts["cold"] = cold
        if p.gamma > 0:
            posc = hilbert.pointer_projector(p.x0, p.cutoff).matrix
            proj = np.kron(np.eye(2), posc)
            flip = np.kron(hilbert.SIGMA_X, posc)
            parts["measure"] = dis(flip, p.gamma) + dis(proj, p.gamma)
        total = sp.csr_matrix((n2, n2), dtype=complex)
        for part in parts.values():
            total = total + part
        return total

    def test_steady_states_agree(self):
        p = ModelParams(Omega=20.0, x0=1.0, kappa_h=1e-3, kappa_c=0.1,
                        nbar_h=1.0, nbar_c=0.2, gamma=1e-3, cutoff=FockCutoff(20))
        l_bare = self._bare_liouvillian(p)
        res_bare = solver.steady_state(l_bare, basis="bare")
        l_disp = solver.vectorize(model.liouvillian(p))
        res_disp = solver.steady_state(l_disp)
        u = model.basis_transform(p)
        rho_from_disp = u @ res_disp.state.matrix @ u.conj().T
        rho_from_disp /= np.trace(rho_from_disp).real
        assert solver.trace_distance(rho_from_disp, res_bare.state.matrix) < 1e-5
        from pointer_engine.observables import qubit_excitation
        assert qubit_excitation(res_bare.state) == pytest.approx(
            qubit_excitation(res_disp.state), abs=1e-5)
