"""Operator algebra: Hilbert-Schmidt geometry, operator bases and vectorization.

Conventions
-----------
* Vectorization is row-major, ``vec(X) = X.reshape(-1)``, so that
  ``vec(|i><j|) = e_i (x) conj(e_j)`` and ``vec(A0 B A1^T) = (A0 (x) A1) vec(B)``.
* A superoperator is either a ``(d*d, d*d)`` matrix acting on ``vec(rho)`` or a
  plain callable ``rho -> L(rho)``; :func:`apply_super` accepts both.
* Bases carry the identity last. For a bipartition ``H_L (x) H_M`` the full
  basis puts the local elements ``f_i (x) I_M / sqrt(d_M)`` first.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import reduce
from typing import Callable, Sequence, Union

import numpy as np

from qmetop.settings import DEFAULT_NUMERICS, Numerics

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
SP = (SX + 1j * SY) / 2
SM = (SX - 1j * SY) / 2
I2 = np.eye(2, dtype=complex)

# (-sz/sqrt2, s+, s-, I/sqrt2) and the variant with s- before s+
ORDER_PLUS_FIRST = "zpm"
ORDER_MINUS_FIRST = "zmp"
BASIS_ORDERS = (ORDER_PLUS_FIRST, ORDER_MINUS_FIRST)

Superoperator = Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]


class ShapeError(ValueError):
    pass


class BasisError(ValueError):
    pass


def _square(X: np.ndarray, name: str = "matrix") -> np.ndarray:
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {X.shape}")
    return X


def hs_inner(A: np.ndarray, B: np.ndarray) -> complex:
    """Hilbert-Schmidt inner product Tr(A^dagger B)."""
    A = _square(A, "A")
    B = _square(B, "B")
    if A.shape != B.shape:
        raise ShapeError(f"dimension mismatch: {A.shape} vs {B.shape}")
    return complex(np.vdot(A, B))


def dagger(A: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(A, -1, -2))


def hermiticity_error(M: np.ndarray) -> float:
    M = np.asarray(M)
    return float(np.max(np.abs(M - dagger(M)), initial=0.0))


def is_hermitian(M: np.ndarray, numerics: Numerics = DEFAULT_NUMERICS) -> bool:
    M = np.asarray(M)
    scale = max(1.0, float(np.max(np.abs(M), initial=0.0)))
    return hermiticity_error(M) <= numerics.hermitian_tol * scale


def kron_all(ops: Sequence[np.ndarray]) -> np.ndarray:
    return reduce(np.kron, ops)


def site_operator(op: np.ndarray, site: int, n_sites: int) -> np.ndarray:
    """Embed a single-qubit operator at ``site`` (0-based) of an ``n_sites`` chain."""
    return kron_all([op if k == site else I2 for k in range(n_sites)])


def qubit_basis(order: str = ORDER_PLUS_FIRST) -> list[np.ndarray]:
    """Orthonormal single-qubit operator basis with the identity last."""
    if order == ORDER_PLUS_FIRST:
        return [-SZ / np.sqrt(2), SP.copy(), SM.copy(), I2 / np.sqrt(2)]
    if order == ORDER_MINUS_FIRST:
        return [-SZ / np.sqrt(2), SM.copy(), SP.copy(), I2 / np.sqrt(2)]
    raise ValueError(f"unknown basis order {order!r}; expected one of {BASIS_ORDERS}")


def gram_matrix(elements: Sequence[np.ndarray]) -> np.ndarray:
    E = np.asarray(elements)
    flat = E.reshape(len(E), -1)
    return flat.conj() @ flat.T


def check_factor(elements: Sequence[np.ndarray], numerics: Numerics = DEFAULT_NUMERICS) -> None:
    """Raise :class:`BasisError` unless ``elements`` is orthonormal with a normalized identity last."""
    E = np.asarray(elements, dtype=complex)
    if E.ndim != 3 or E.shape[1] != E.shape[2] or len(E) != E.shape[1] ** 2:
        raise BasisError(f"a basis of a {E.shape[-1]}-dim space needs {E.shape[-1] ** 2} square elements")
    err = np.max(np.abs(gram_matrix(E) - np.eye(len(E))))
    if err > numerics.orthonormal_tol:
        raise BasisError(f"factor basis is not orthonormal (max Gram error {err:.3e})")
    n = E.shape[1]
    if np.max(np.abs(E[-1] - np.eye(n) / np.sqrt(n))) > numerics.orthonormal_tol:
        raise BasisError("factor basis must end with the normalized identity")


def flat_to_factor_indices(k: int, n_factors: int, q: int = 4) -> tuple[int, ...]:
    """Split a 1-based flattened index into 1-based per-factor indices.

    The first factor varies slowest and a zero remainder maps to ``q``, so for
    two qubits ``k = 8`` gives ``(2, 4)``.
    """
    if not 1 <= k <= q**n_factors:
        raise IndexError(f"flattened index {k} outside 1..{q ** n_factors}")
    digits = np.unravel_index(k - 1, (q,) * n_factors)
    return tuple(int(i) + 1 for i in digits)


def tensor_basis(factors: Sequence[Sequence[np.ndarray]]) -> list[np.ndarray]:
    """Lexicographic tensor products of factor bases (first factor slowest)."""
    if not factors:
        return [np.ones((1, 1), dtype=complex)]
    return [kron_all(combo) for combo in itertools.product(*factors)]


@dataclass(frozen=True)
class OperatorBasis:
    """Orthonormal operator basis of ``H_L (x) H_M`` with local elements first.

    ``elements[k]`` is the 0-based element k. ``index_map[k]`` gives the
    1-based pair ``(alpha_L, alpha_M)`` with ``elements[k] = f_alpha_L (x) g_alpha_M``.
    """

    d_L: int
    d_M: int
    elements: np.ndarray = field(repr=False)
    index_map: tuple[tuple[int, int], ...] = field(repr=False)
    order: str = ORDER_PLUS_FIRST

    @property
    def d(self) -> int:
        return self.d_L * self.d_M

    @property
    def local_count(self) -> int:
        return self.d_L**2 - 1

    def __len__(self) -> int:
        return len(self.elements)

    def index_of(self, alpha_L: int, alpha_M: int) -> int:
        return self.index_map.index((alpha_L, alpha_M))

    def gram(self) -> np.ndarray:
        return gram_matrix(self.elements)

    def expand(self, X: np.ndarray) -> np.ndarray:
        return expand(X, self)

    def recombine(self, coeffs: np.ndarray) -> np.ndarray:
        return np.tensordot(np.asarray(coeffs), self.elements, axes=(0, 0))


def product_basis(
    L_factors: Sequence[Sequence[np.ndarray]],
    M_factors: Sequence[Sequence[np.ndarray]] = (),
    order: str = ORDER_PLUS_FIRST,
    numerics: Numerics = DEFAULT_NUMERICS,
) -> OperatorBasis:
    """Full basis for a bipartition built from per-site factor bases."""
    for fac in list(L_factors) + list(M_factors):
        check_factor(fac, numerics)
    f = tensor_basis(L_factors)
    g = tensor_basis(M_factors)
    nL, nM = len(f), len(g)
    pairs = [(aL, nM) for aL in range(1, nL)]
    pairs += [(aL, aM) for aL in range(1, nL + 1) for aM in range(1, nM)]
    pairs.append((nL, nM))
    elements = np.array([np.kron(f[aL - 1], g[aM - 1]) for aL, aM in pairs])
    d_L, d_M = f[0].shape[0], g[0].shape[0]
    return OperatorBasis(d_L=d_L, d_M=d_M, elements=elements, index_map=tuple(pairs), order=order)


def qubit_chain_basis(N_L: int, N_M: int, order: str = ORDER_PLUS_FIRST) -> OperatorBasis:
    q = qubit_basis(order)
    return product_basis([q] * N_L, [q] * N_M, order=order)


def local_operator_basis(N_L: int, order: str = ORDER_PLUS_FIRST) -> list[np.ndarray]:
    """The ``d_L**2`` local operators ``f_k`` on ``N_L`` qubits (identity last)."""
    return tensor_basis([qubit_basis(order)] * N_L)


def expand(X: np.ndarray, basis: OperatorBasis) -> np.ndarray:
    """Coefficients ``x_a = Tr(F_a^dagger X)``."""
    X = _square(X, "X")
    if X.shape[0] != basis.d:
        raise ShapeError(f"operator dimension {X.shape[0]} does not match basis dimension {basis.d}")
    return basis.elements.reshape(len(basis), -1).conj() @ X.reshape(-1)


def vec(X: np.ndarray) -> np.ndarray:
    return np.asarray(X).reshape(-1)


def unvec(v: np.ndarray, d: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    n = v.size
    if d is None:
        d = int(round(np.sqrt(n)))
    if d * d != n:
        raise ShapeError(f"cannot reshape a length-{n} vector into a square {d}x{d} matrix")
    return v.reshape(d, d)


def kron_sandwich(A0: np.ndarray, A1: np.ndarray) -> np.ndarray:
    """Matrix of ``B -> A0 B A1^T`` acting on ``vec(B)``."""
    return np.kron(A0, A1)


def sandwich(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Matrix of ``rho -> A rho B``."""
    return np.kron(A, np.transpose(B))


def spre(A: np.ndarray) -> np.ndarray:
    return np.kron(A, np.eye(A.shape[0]))


def spost(A: np.ndarray) -> np.ndarray:
    return np.kron(np.eye(A.shape[0]), np.transpose(A))


def commutator_super(H: np.ndarray) -> np.ndarray:
    """Matrix of ``rho -> -i [H, rho]``."""
    return -1j * (spre(H) - spost(H))


def dissipator_super(Gamma: np.ndarray, ops: Sequence[np.ndarray]) -> np.ndarray:
    """Matrix of ``rho -> sum_ab Gamma_ab (F_b rho F_a^dag - {F_a^dag F_b, rho}/2)``."""
    ops = np.asarray(ops)
    d = ops.shape[1]
    out = np.zeros((d * d, d * d), dtype=complex)
    # jump part: sum_ab Gamma_ab F_b (x) conj(F_a)
    for a, b in zip(*np.nonzero(Gamma)):
        g = Gamma[a, b]
        FaFb = dagger(ops[a]) @ ops[b]
        out += g * (np.kron(ops[b], ops[a].conj()) - 0.5 * spre(FaFb) - 0.5 * spost(FaFb))
    return out


def apply_super(L: Superoperator, rho: np.ndarray) -> np.ndarray:
    if callable(L):
        return L(rho)
    rho = np.asarray(rho)
    return unvec(np.asarray(L) @ vec(rho), rho.shape[0])


def hermitian_conjugate_super(L: np.ndarray) -> np.ndarray:
    """Matrix of ``rho -> (L(rho^dag))^dag``."""
    n = L.shape[0]
    d = int(round(np.sqrt(n)))
    perm = np.arange(n).reshape(d, d).T.reshape(-1)
    return np.conj(L)[np.ix_(perm, perm)]


def partial_trace_L(X: np.ndarray, d_L: int, d_M: int) -> np.ndarray:
    return np.einsum("iaib->ab", np.asarray(X).reshape(d_L, d_M, d_L, d_M))


def random_hermitian(d: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * (A + dagger(A)) / 2


def random_density_matrix(d: int, rng: np.random.Generator) -> np.ndarray:
    """Full-rank density matrix from a Ginibre draw."""
    A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = A @ dagger(A) + 1e-3 * np.eye(d)
    return rho / np.trace(rho).real
