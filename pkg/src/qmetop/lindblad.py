"""Local Lindblad generators, the thermalization residual and conservation audits."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from qmetop import model
from qmetop.model import EigenSystem
from qmetop.opalg import (
    BASIS_ORDERS,
    OperatorBasis,
    ShapeError,
    Superoperator,
    apply_super,
    commutator_super,
    dagger,
    dissipator_super,
    local_operator_basis,
)
from qmetop.settings import DEFAULT_NUMERICS, Numerics


class SteadyStateError(RuntimeError):
    """The population rate matrix does not have a one-dimensional kernel."""


class InternalError(RuntimeError):
    pass


@dataclass(frozen=True)
class LocalLindblad:
    """Coefficients of a generator whose jump operators are ``f_k (x) I_M / sqrt(d_M)``."""

    Gamma_L: np.ndarray = field(repr=False)
    H_LS_L: np.ndarray = field(repr=False)
    basis_order: str = "zpm"
    epsilon2: float = 1.0

    def __post_init__(self):
        G = np.asarray(self.Gamma_L, dtype=complex)
        H = np.asarray(self.H_LS_L, dtype=complex)
        d_L = H.shape[0]
        if H.shape != (d_L, d_L) or G.shape != (d_L**2 - 1, d_L**2 - 1):
            raise ShapeError(f"Gamma_L {G.shape} and H_LS_L {H.shape} do not describe the same local space")
        if self.basis_order not in BASIS_ORDERS:
            raise ValueError(f"unknown basis order {self.basis_order!r}")
        object.__setattr__(self, "Gamma_L", G)
        object.__setattr__(self, "H_LS_L", H)

    @classmethod
    def zero(cls, N_L: int, basis_order: str = "zpm") -> "LocalLindblad":
        d_L = 2**N_L
        return cls(np.zeros((d_L**2 - 1,) * 2), np.zeros((d_L, d_L)), basis_order)

    @property
    def d_L(self) -> int:
        return self.H_LS_L.shape[0]

    @property
    def N_L(self) -> int:
        return int(round(np.log2(self.d_L)))

    @property
    def trace(self) -> float:
        return float(np.trace(self.Gamma_L).real)

    @property
    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh((self.Gamma_L + dagger(self.Gamma_L)) / 2)[0])

    def is_psd(self, tol: float = 1e-9) -> bool:
        return self.min_eigenvalue >= -tol

    def scaled(self, c: float) -> "LocalLindblad":
        return LocalLindblad(c * self.Gamma_L, c * self.H_LS_L, self.basis_order, self.epsilon2)


def local_operators(N_L: int, d_M: int, order: str = "zpm") -> np.ndarray:
    """Jump operators ``f_k (x) I_M / sqrt(d_M)`` for the non-identity local elements."""
    f = local_operator_basis(N_L, order)[:-1]
    IM = np.eye(d_M) / np.sqrt(d_M)
    return np.array([np.kron(fk, IM) for fk in f])


def lindblad_generator(Gamma: np.ndarray, ops: Sequence[np.ndarray], H: np.ndarray | None = None) -> np.ndarray:
    """Matrix of ``-i[H, .] + sum_ab Gamma_ab (F_b . F_a^dag - {F_a^dag F_b, .}/2)``."""
    L = dissipator_super(np.asarray(Gamma), ops)
    if H is not None:
        L = L + commutator_super(H)
    return L


def lindblad_apply(Gamma: np.ndarray, ops: Sequence[np.ndarray], H: np.ndarray | None = None) -> Callable:
    ops = np.asarray(ops)
    Gamma = np.asarray(Gamma)
    opsd = dagger(ops)
    A = np.einsum("ab,aij,bjk->ik", Gamma, opsd, ops)

    def apply(rho: np.ndarray) -> np.ndarray:
        jump = np.einsum("ab,bij,jk,akl->il", Gamma, ops, rho, opsd, optimize=True)
        out = jump - 0.5 * (A @ rho + rho @ A)
        if H is not None:
            out = out - 1j * (H @ rho - rho @ H)
        return out

    return apply


def _full_terms(ll: LocalLindblad, d_M: int) -> tuple[np.ndarray, np.ndarray]:
    ops = local_operators(ll.N_L, d_M, ll.basis_order)
    H = np.kron(ll.H_LS_L, np.eye(d_M))
    return ops, H


def local_l2(ll: LocalLindblad, d_M: int) -> np.ndarray:
    """Matrix of the local generator on the full ``d_L d_M`` space."""
    ops, H = _full_terms(ll, d_M)
    return ll.epsilon2 * lindblad_generator(ll.Gamma_L, ops, H)


def local_l2_apply(ll: LocalLindblad, d_M: int) -> Callable:
    ops, H = _full_terms(ll, d_M)
    f = lindblad_apply(ll.Gamma_L, ops, H)
    return lambda rho: ll.epsilon2 * f(rho)


def dissipator_diagonals(ops: np.ndarray, eig: EigenSystem, populations: np.ndarray) -> np.ndarray:
    """``v[a, b, i] = <E_i| F_b rho F_a^dag - {F_a^dag F_b, rho}/2 |E_i>`` for ``rho`` diagonal in the eigenbasis."""
    V = eig.vectors
    Ft = np.einsum("ji,ajk,kl->ail", V.conj(), np.asarray(ops), V)
    p = np.asarray(populations)
    jump = np.einsum("aik,bik,k->abi", Ft.conj(), Ft, p, optimize=True)
    anti = np.einsum("aki,bki->abi", Ft.conj(), Ft, optimize=True) * p[None, None, :]
    return jump - anti


def thermal_diagonal(
    L2: Superoperator,
    H_S: np.ndarray,
    beta: float,
    numerics: Numerics = DEFAULT_NUMERICS,
    eig: EigenSystem | None = None,
) -> np.ndarray:
    """Real diagonal ``<E_i|L2(rho_th)|E_i>`` in the fixed eigenbasis of ``H_S``."""
    eig = eig if eig is not None else model.eigensystem(H_S, numerics)
    rho = model.gibbs(H_S, beta, eig)
    diag = eig.diag_in_eigenbasis(apply_super(L2, rho))
    scale = max(1.0, float(np.max(np.abs(diag), initial=0.0)))
    if np.max(np.abs(diag.imag), initial=0.0) > numerics.imag_diag_tol * scale:
        raise InternalError(f"thermal diagonal has imaginary part {np.max(np.abs(diag.imag)):.3e}")
    return diag.real


def tau_of_generator(L2: Superoperator, H_S: np.ndarray, beta: float, numerics: Numerics = DEFAULT_NUMERICS) -> float:
    return float(np.sum(np.abs(thermal_diagonal(L2, H_S, beta, numerics))))


def tau(
    ll: LocalLindblad,
    H_S: np.ndarray,
    beta: float,
    numerics: Numerics = DEFAULT_NUMERICS,
    eig: EigenSystem | None = None,
) -> float:
    """Thermalization residual ``sum_i |<E_i|L2(rho_th)|E_i>|`` of a local generator."""
    d = H_S.shape[0]
    if d % ll.d_L:
        raise ShapeError(f"local dimension {ll.d_L} does not divide system dimension {d}")
    L2 = local_l2_apply(ll, d // ll.d_L)
    return float(np.sum(np.abs(thermal_diagonal(L2, H_S, beta, numerics, eig))))


def conservation_residual(L2: Superoperator, rho: np.ndarray, O_M: np.ndarray, d_L: int) -> float:
    """``|Tr[(I_L (x) O_M) L2(rho)]|``."""
    O = np.kron(np.eye(d_L), O_M)
    return float(abs(np.trace(O @ apply_super(L2, rho))))


def lambda_trace_test(Gamma_tilde: np.ndarray, basis: OperatorBasis) -> float:
    """Sum of the diagonal of ``Gamma_tilde`` over elements that are not of the form ``f (x) I_M``."""
    G = np.asarray(Gamma_tilde)
    if G.shape != (len(basis) - 1,) * 2:
        raise ShapeError(f"Gamma over {len(basis) - 1} elements expected, got {G.shape}")
    nM = basis.d_M**2
    idx = [k for k, (_, aM) in enumerate(basis.index_map[:-1]) if aM != nM]
    return float(np.sum(np.diag(G)[idx]).real)


def conservation_battery(d_L: int, d_M: int, count: int = 100, seed: int = 7):
    """Fixed-seed list of ``(rho, O_M)`` pairs with full-rank ``rho`` and Hermitian ``O_M``."""
    from qmetop.opalg import random_density_matrix, random_hermitian

    rng = np.random.default_rng(seed)
    return [(random_density_matrix(d_L * d_M, rng), random_hermitian(d_M, rng)) for _ in range(count)]


@dataclass(frozen=True)
class SteadyStatePerturbation:
    populations: np.ndarray
    rho2_offdiag: np.ndarray = field(repr=False)
    flagged: tuple[tuple[int, int], ...] = ()
    eig: EigenSystem | None = field(default=None, repr=False)

    def rho0(self) -> np.ndarray:
        return self.eig.from_eigenbasis(np.diag(self.populations).astype(complex))

    def rho2(self) -> np.ndarray:
        return self.eig.from_eigenbasis(self.rho2_offdiag)


def population_rate_matrix(L2: Superoperator, eig: EigenSystem) -> np.ndarray:
    """``R[i, j] = <E_i| L2(|E_j><E_j|) |E_i>``."""
    d = len(eig.energies)
    R = np.zeros((d, d))
    for j in range(d):
        v = eig.vectors[:, j]
        R[:, j] = eig.diag_in_eigenbasis(apply_super(L2, np.outer(v, v.conj()))).real
    return R


def perturbative_steady_state(
    L2: Superoperator,
    H_S: np.ndarray,
    numerics: Numerics = DEFAULT_NUMERICS,
) -> SteadyStatePerturbation:
    """Lowest-order steady state of ``-i[H_S, .] + eps^2 L2``.

    Populations span the kernel of the population rate matrix; the second-order
    coherences are ``-i <E_i|L2(rho0)|E_j> / (E_i - E_j)``.
    """
    eig = model.eigensystem(H_S, numerics)
    R = population_rate_matrix(L2, eig)
    d = len(eig.energies)
    _, s, Vt = np.linalg.svd(R)
    scale = max(1.0, float(s[0]))
    null_dim = int(np.sum(s <= 1e-10 * scale))
    if null_dim != 1:
        raise SteadyStateError(f"population rate matrix kernel has dimension {null_dim}")
    p = Vt[-1].real
    p = p / p.sum()
    rho0 = eig.from_eigenbasis(np.diag(p).astype(complex))
    X = eig.to_eigenbasis(apply_super(L2, rho0))
    E = eig.energies
    thr = numerics.degeneracy_tol * max(1.0, float(np.max(np.abs(E))))
    rho2 = np.zeros((d, d), dtype=complex)
    flagged = []
    for i in range(d):
        for j in range(d):
            if i == j:
                continue
            gap = E[i] - E[j]
            if abs(gap) < thr:
                flagged.append((i, j))
                continue
            rho2[i, j] = -1j * X[i, j] / gap
    return SteadyStatePerturbation(populations=p, rho2_offdiag=rho2, flagged=tuple(flagged), eig=eig)
