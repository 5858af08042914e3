import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from qmetop import opalg
from qmetop.opalg import (
    BasisError,
    ShapeError,
    apply_super,
    commutator_super,
    dissipator_super,
    expand,
    flat_to_factor_indices,
    hermitian_conjugate_super,
    kron_sandwich,
    product_basis,
    qubit_basis,
    qubit_chain_basis,
    random_hermitian,
    sandwich,
    unvec,
    vec,
)


@pytest.mark.parametrize("order", opalg.BASIS_ORDERS)
def test_qubit_basis_orthonormal_identity_last(order):
    q = qubit_basis(order)
    assert np.allclose(opalg.gram_matrix(q), np.eye(4))
    assert np.allclose(q[-1], np.eye(2) / np.sqrt(2))


def test_basis_orders_swap_raising_and_lowering():
    a, b = qubit_basis("zpm"), qubit_basis("zmp")
    assert np.allclose(a[1], b[2]) and np.allclose(a[2], b[1])
    assert np.allclose(b[1], oracles.sm)


def test_unknown_order_rejected():
    with pytest.raises(ValueError):
        qubit_basis("xyz")


@pytest.mark.parametrize("N_L,N_M", [(1, 1), (1, 2), (2, 1)])
def test_chain_basis_layout(N_L, N_M):
    B = qubit_chain_basis(N_L, N_M, "zmp")
    d = 2 ** (N_L + N_M)
    assert len(B) == d * d
    assert np.allclose(B.gram(), np.eye(d * d), atol=1e-12)
    nL, nM = 4**N_L, 4**N_M
    # local elements come first and the identity is last
    assert B.index_map[: nL - 1] == tuple((a, nM) for a in range(1, nL))
    assert B.index_map[-1] == (nL, nM)
    assert np.allclose(B.elements[-1], np.eye(d) / np.sqrt(d))


def test_local_elements_act_trivially_on_rest():
    B = qubit_chain_basis(1, 2, "zpm")
    f = qubit_basis("zpm")
    for k in range(3):
        assert np.allclose(B.elements[k], np.kron(f[k], np.eye(4) / 2))


def test_non_orthonormal_factor_rejected():
    bad = [np.eye(2), oracles.sx, oracles.sy, oracles.sz]
    with pytest.raises(BasisError):
        product_basis([bad])


def test_flat_index_split():
    assert flat_to_factor_indices(8, 2) == (2, 4)
    assert flat_to_factor_indices(1, 2) == (1, 1)
    assert flat_to_factor_indices(16, 2) == (4, 4)
    with pytest.raises(IndexError):
        flat_to_factor_indices(17, 2)


def test_expand_recombine_roundtrip(rng):
    B = qubit_chain_basis(1, 1)
    X = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    assert np.allclose(B.recombine(expand(X, B)), X)
    with pytest.raises(ShapeError):
        expand(np.eye(3), B)


def test_vec_identity(rng):
    A0, B, A1 = (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)) for _ in range(3))
    assert np.allclose(kron_sandwich(A0, A1) @ vec(B), vec(A0 @ B @ A1.T))
    assert np.allclose(sandwich(A0, A1) @ vec(B), vec(A0 @ B @ A1))
    assert np.allclose(unvec(vec(B)), B)
    with pytest.raises(ShapeError):
        unvec(np.zeros(5))


def test_superoperators_match_loop_oracle(rng):
    d = 4
    ops = [rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)) for _ in range(3)]
    A = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    G = A @ A.conj().T
    H = random_hermitian(d, rng)
    rho = opalg.random_density_matrix(d, rng)
    L = dissipator_super(G, ops) + commutator_super(H)
    assert np.allclose(apply_super(L, rho), oracles.lindblad_loop(G, ops, H)(rho))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_hermitian_conjugate_super(seed):
    r = np.random.default_rng(seed)
    d = 3
    L = r.normal(size=(d * d, d * d)) + 1j * r.normal(size=(d * d, d * d))
    X = r.normal(size=(d, d)) + 1j * r.normal(size=(d, d))
    lhs = apply_super(hermitian_conjugate_super(L), X)
    rhs = apply_super(L, X.conj().T).conj().T
    assert np.allclose(lhs, rhs)


def test_partial_trace(rng):
    A = random_hermitian(2, rng)
    Bm = random_hermitian(3, rng)
    assert np.allclose(opalg.partial_trace_L(np.kron(A, Bm), 2, 3), np.trace(A) * Bm)
