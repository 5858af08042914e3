import numpy as np
import pytest

import oracles
from qmetop import lindblad, model, redfield
from qmetop.model import BathSpec, XxzParams
from qmetop.opalg import qubit_chain_basis, random_density_matrix

# direct-role coefficient matrix of the two-qubit example (mu = -0.5), from the
# Lindblad-form rebuild that reproduces the generator
DIRECT_MIN_EIG = -0.02530
OFFDIAG_NORM = 0.26384


def two_qubit(mu=-0.5):
    H = model.build_xxz(XxzParams.uniform(2, 1, 1.0, 0.1, 1.0))
    parts = redfield.redfield_parts(H, redfield.first_qubit_lowering(2), BathSpec(beta=1.0, mu=mu))
    return H, parts


def test_generator_matches_projector_oracle(rng):
    H, parts = two_qubit()
    L_ref = oracles.redfield_dense(H, np.kron(oracles.sm, oracles.i2), 1.0, -0.5, 10.0)
    L = redfield.redfield_generator(parts)
    f = redfield.redfield_apply(parts)
    for _ in range(5):
        X = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        ref = oracles.apply_colvec(L_ref, X)
        assert np.allclose(f(X), ref, atol=1e-9)
        assert np.allclose((L @ X.reshape(-1)).reshape(4, 4), ref, atol=1e-9)


def test_generator_trace_preserving_and_hermiticity(rng):
    _, parts = two_qubit()
    f = redfield.redfield_apply(parts)
    rho = random_density_matrix(4, rng)
    out = f(rho)
    assert abs(np.trace(out)) < 1e-12
    assert np.allclose(out, out.conj().T)


def test_direct_roles_rebuild_generator():
    _, parts = two_qubit()
    G, H_LS = redfield.gamma_from_redfield(parts, qubit_chain_basis(1, 1, "zmp"), roles="direct")
    assert parts.reconstruction_residual < 1e-10
    assert np.allclose(G, G.conj().T)
    assert np.allclose(H_LS, H_LS.conj().T)
    v = redfield.cp_check(G, 2)
    assert v.min_eigenvalue == pytest.approx(DIRECT_MIN_EIG, abs=1e-4)
    assert v.offdiag_block_norm == pytest.approx(OFFDIAG_NORM, abs=1e-4)
    assert not v.is_psd


@pytest.mark.parametrize("order", ["zpm", "zmp"])
def test_rebuild_holds_in_both_orders_and_larger_chain(order):
    H = model.build_xxz(XxzParams(N=3, omega0=[1.0, 1.1, 0.9], g=[0.1, 0.2], Delta=[1.0, 0.5]))
    parts = redfield.redfield_parts(H, redfield.first_qubit_lowering(3), BathSpec(beta=0.8))
    redfield.gamma_from_redfield(parts, qubit_chain_basis(1, 2, order))
    assert parts.reconstruction_residual < 1e-10


def test_exchanged_roles_do_not_rebuild():
    _, parts = two_qubit()
    redfield.gamma_from_redfield(parts, qubit_chain_basis(1, 1, "zmp"), roles="exchanged")
    assert parts.reconstruction_residual > 1.0
    with pytest.raises(ValueError):
        redfield.gamma_from_redfield(parts, qubit_chain_basis(1, 1), roles="other")


def test_zero_coupling_gives_zero_gamma():
    H = model.build_xxz(XxzParams.uniform(2, 1))
    parts = redfield.redfield_parts(H, redfield.CouplingSet((), 2, 2), BathSpec(beta=1.0))
    G, H_LS = redfield.gamma_from_redfield(parts, qubit_chain_basis(1, 1))
    assert not np.any(G) and not np.any(H_LS)
    assert redfield.cp_check(G, 2).is_psd


def test_cp_check_cases():
    assert redfield.cp_check(np.diag([1.0, 0.5, 0.0]), 2).is_psd
    # zero diagonal with a nonzero row entry cannot be positive
    G = np.zeros((3, 3), dtype=complex)
    G[0, 0] = 1.0
    G[1, 2] = G[2, 1] = 0.3
    v = redfield.cp_check(G, 2)
    assert not v.is_psd and v.lemma1_violations == (2, 3)
    assert v.offdiag_block_norm == 0.0


def test_lowering_coupling_is_local():
    c = redfield.first_qubit_lowering(3, 1)
    assert c.locality_error() == 0.0
    assert np.allclose(c.operators[0], np.kron(oracles.sm, np.eye(4)))


def test_local_conservation():
    _, parts = two_qubit()
    bath = redfield.redfield_apply(parts, include_system=False)
    worst = max(lindblad.conservation_residual(bath, r, O, 2) for r, O in lindblad.conservation_battery(2, 2, 20))
    assert worst <= 1e-12


@pytest.mark.parametrize("mu", [0.0, -0.5])
def test_equilibrium_state_is_stationary_on_diagonal(mu):
    _, parts = two_qubit(mu)
    assert np.max(np.abs(redfield.thermal_residuals(parts, 1.0, mu))) < 1e-10


def test_chemical_potential_moves_the_fixed_point():
    _, parts = two_qubit(-0.5)
    assert np.max(np.abs(redfield.thermal_residuals(parts, 1.0, 0.0))) > 1e-2
