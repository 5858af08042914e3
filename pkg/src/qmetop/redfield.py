"""Redfield generators for partially coupled chains and their Lindblad-form coefficients.

The generator is

    L(rho) = -i [H_S, rho] - eps2 * sum_l ( [S_l^dag, S1_l rho] - [S_l^dag, rho S2_l] + h.c. )

where the filtered operators ``S1_l``, ``S2_l`` carry the bath coefficients
``D`` and ``C`` evaluated on the Bohr frequencies of ``H_S``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from qmetop import model
from qmetop.model import BathSpec, EigenSystem
from qmetop.opalg import (
    SM,
    OperatorBasis,
    ShapeError,
    commutator_super,
    dagger,
    dissipator_super,
    expand,
    hermitian_conjugate_super,
    sandwich,
    site_operator,
    spost,
    spre,
)
from qmetop.settings import DEFAULT_NUMERICS, Numerics

ROLES = ("direct", "exchanged")


class ConsistencyError(RuntimeError):
    """The Lindblad-form rebuild disagrees with the generator it came from."""


@dataclass(frozen=True)
class CouplingSet:
    """System coupling operators ``S_l`` acting as identity on the uncoupled part."""

    operators: tuple[np.ndarray, ...]
    d_L: int
    d_M: int
    tags: tuple[str, ...] = ()

    def __post_init__(self):
        d = self.d_L * self.d_M
        for S in self.operators:
            if S.shape != (d, d):
                raise ShapeError(f"coupling operator shape {S.shape} does not match dimension {d}")

    def __len__(self) -> int:
        return len(self.operators)

    def locality_error(self, rng: np.random.Generator | None = None, trials: int = 5) -> float:
        """Largest ``|[S_l, I_L (x) O_M]|`` over random Hermitian ``O_M``."""
        rng = rng if rng is not None else np.random.default_rng(0)
        worst = 0.0
        for _ in range(trials):
            A = rng.normal(size=(self.d_M, self.d_M)) + 1j * rng.normal(size=(self.d_M, self.d_M))
            O = np.kron(np.eye(self.d_L), A + dagger(A))
            for S in self.operators:
                worst = max(worst, float(np.max(np.abs(S @ O - O @ S))))
        return worst


def local_coupling(local_ops: Sequence[np.ndarray], d_M: int, tags: Sequence[str] = ()) -> CouplingSet:
    """Lift operators on the coupled part to the full space as ``s (x) I_M``."""
    ops = tuple(np.kron(np.asarray(s, dtype=complex), np.eye(d_M)) for s in local_ops)
    d_L = np.asarray(local_ops[0]).shape[0]
    return CouplingSet(operators=ops, d_L=d_L, d_M=d_M, tags=tuple(tags))


def first_qubit_lowering(N: int, N_L: int = 1) -> CouplingSet:
    """``S = sigma_-`` on the first qubit of an ``N``-qubit chain."""
    s = site_operator(SM, 0, N_L)
    return local_coupling([s], 2 ** (N - N_L), tags=("sigma_minus_1",))


def _coeff_table(gaps: np.ndarray, spec: BathSpec, numerics: Numerics):
    cache: dict[float, tuple[complex, complex]] = {}
    C = np.zeros(gaps.shape, dtype=complex)
    D = np.zeros(gaps.shape, dtype=complex)
    for idx, E in np.ndenumerate(gaps):
        if np.isnan(E):
            continue
        key = round(float(E), 12)
        if key not in cache:
            cache[key] = model.bath_coeffs(key, spec, numerics)
        C[idx], D[idx] = cache[key]
    return C, D


def filtered_operators(
    eig: EigenSystem,
    S: np.ndarray,
    spec: BathSpec,
    numerics: Numerics = DEFAULT_NUMERICS,
) -> tuple[np.ndarray, np.ndarray]:
    """``S1 = sum_jk P_j S P_k D(E_k - E_j)`` and ``S2`` likewise with ``C``."""
    model.warn_degenerate(eig, "filtered_operators")
    V, E = eig.vectors, eig.energies
    Se = V.conj().T @ S @ V
    scale = max(1.0, float(np.max(np.abs(Se), initial=0.0)))
    gaps = E[None, :] - E[:, None]
    gaps = np.where(np.abs(Se) > 1e-14 * scale, gaps, np.nan)
    C, D = _coeff_table(gaps, spec, numerics)
    S1 = V @ (Se * D) @ V.conj().T
    S2 = V @ (Se * C) @ V.conj().T
    return S1, S2


@dataclass
class RedfieldParts:
    H_S: np.ndarray = field(repr=False)
    couplings: CouplingSet = field(repr=False)
    S1: tuple[np.ndarray, ...] = field(repr=False)
    S2: tuple[np.ndarray, ...] = field(repr=False)
    epsilon2: float = 1.0
    Gamma: np.ndarray | None = field(default=None, repr=False)
    H_LS: np.ndarray | None = field(default=None, repr=False)
    basis: OperatorBasis | None = field(default=None, repr=False)
    roles: str = "direct"
    reconstruction_residual: float | None = None

    @property
    def d(self) -> int:
        return self.H_S.shape[0]


def redfield_parts(
    H_S: np.ndarray,
    couplings: CouplingSet,
    spec: BathSpec,
    epsilon2: float = 1.0,
    numerics: Numerics = DEFAULT_NUMERICS,
) -> RedfieldParts:
    eig = model.eigensystem(H_S, numerics)
    S1, S2 = zip(*(filtered_operators(eig, S, spec, numerics) for S in couplings.operators)) if len(couplings) else ((), ())
    return RedfieldParts(H_S=np.asarray(H_S, dtype=complex), couplings=couplings, S1=tuple(S1), S2=tuple(S2), epsilon2=epsilon2)


def redfield_apply(parts: RedfieldParts, include_system: bool = True):
    """Callable ``rho -> L(rho)``; avoids forming the ``d^2 x d^2`` matrix.

    ``include_system=False`` drops ``-i [H_S, rho]`` and keeps only the bath part.
    """
    H = parts.H_S if include_system else np.zeros_like(parts.H_S)

    def apply(rho: np.ndarray) -> np.ndarray:
        rd = dagger(rho)
        acc = np.zeros_like(rho, dtype=complex)
        acc_h = np.zeros_like(acc)
        for S, S1, S2 in zip(parts.couplings.operators, parts.S1, parts.S2):
            Sd = dagger(S)
            acc += Sd @ S1 @ rho - S1 @ rho @ Sd - Sd @ rho @ S2 + rho @ S2 @ Sd
            # the h.c. term acts on rho^dag so the map stays complex-linear
            acc_h += Sd @ S1 @ rd - S1 @ rd @ Sd - Sd @ rd @ S2 + rd @ S2 @ Sd
        return -1j * (H @ rho - rho @ H) - parts.epsilon2 * (acc + dagger(acc_h))

    return apply


def redfield_generator(parts: RedfieldParts, include_system: bool = True) -> np.ndarray:
    """Matrix of the Redfield generator on row-major ``vec(rho)``."""
    d = parts.d
    X = np.zeros((d * d, d * d), dtype=complex)
    for S, S1, S2 in zip(parts.couplings.operators, parts.S1, parts.S2):
        Sd = dagger(S)
        X += spre(Sd @ S1) - sandwich(S1, Sd) - sandwich(Sd, S2) + spost(S2 @ Sd)
    bath = -parts.epsilon2 * (X + hermitian_conjugate_super(X))
    return commutator_super(parts.H_S) + bath if include_system else bath


def _outer(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.outer(np.conj(x), y)


def gamma_from_redfield(
    parts: RedfieldParts,
    basis: OperatorBasis,
    roles: str = "direct",
    verify: bool = True,
    numerics: Numerics = DEFAULT_NUMERICS,
) -> tuple[np.ndarray, np.ndarray]:
    """Coefficient matrix ``Gamma`` and Lamb shift ``H_LS`` of the Redfield generator.

    With ``roles="direct"`` the expansions of ``S`` and ``S^dag`` enter as written
    and the Lindblad-form rebuild reproduces the generator. ``roles="exchanged"``
    swaps those two expansions; it gives the conventional published display of the
    two-qubit example but does not rebuild the generator.
    """
    if roles not in ROLES:
        raise ValueError(f"roles must be one of {ROLES}, got {roles!r}")
    if basis.d != parts.d:
        raise ShapeError(f"basis dimension {basis.d} does not match system dimension {parts.d}")
    n = len(basis)
    d = basis.d
    full = np.zeros((n, n), dtype=complex)
    K = np.zeros((n, n), dtype=complex)
    for S, S1, S2 in zip(parts.couplings.operators, parts.S1, parts.S2):
        a, ap = expand(S, basis), expand(dagger(S), basis)
        if roles == "exchanged":
            a, ap = ap, a
        b = expand(S1, basis)
        cp = expand(dagger(S2), basis)
        ab, cpap, ba, apcp = _outer(a, b), _outer(cp, ap), _outer(b, a), _outer(ap, cp)
        full += ab + cpap + ba + apcp
        K += (ab - cpap - ba + apcp) / 2j
    full *= parts.epsilon2
    K *= parts.epsilon2
    F = basis.elements
    Fd = dagger(F)
    H_LS = np.einsum("ab,aij,bjk->ik", K, Fd, F)
    H_LS += np.einsum("a,aij->ij", full[:-1, -1], Fd[:-1]) / (2j * np.sqrt(d))
    H_LS -= np.einsum("b,bij->ij", full[-1, :-1], F[:-1]) / (2j * np.sqrt(d))
    Gamma = full[:-1, :-1]
    parts.Gamma, parts.H_LS, parts.basis, parts.roles = Gamma, H_LS, basis, roles
    if verify:
        resid = reconstruction_residual(parts)
        parts.reconstruction_residual = resid
        if roles == "direct" and resid > numerics.generator_match_tol:
            raise ConsistencyError(f"Lindblad-form rebuild differs from the generator by {resid:.3e}")
    return Gamma, H_LS


def lindblad_form_generator(H: np.ndarray, H_LS: np.ndarray, Gamma: np.ndarray, basis: OperatorBasis) -> np.ndarray:
    """``-i [H + H_LS, .] + sum_ab Gamma_ab (F_b . F_a^dag - {F_a^dag F_b, .}/2)`` over non-identity elements."""
    return commutator_super(H + H_LS) + dissipator_super(Gamma, basis.elements[:-1])


def reconstruction_residual(parts: RedfieldParts) -> float:
    if parts.Gamma is None:
        raise ValueError("Gamma has not been computed for these parts")
    L_direct = redfield_generator(parts)
    L_form = lindblad_form_generator(parts.H_S, parts.H_LS, parts.Gamma, parts.basis)
    return float(np.max(np.abs(L_direct - L_form)))


@dataclass(frozen=True)
class CpVerdict:
    is_psd: bool
    min_eigenvalue: float
    lemma1_violations: tuple[int, ...]
    offdiag_block_norm: float

    def to_dict(self) -> dict:
        return {
            "is_psd": self.is_psd,
            "min_eigenvalue": self.min_eigenvalue,
            "lemma1_violations": list(self.lemma1_violations),
            "offdiag_block_norm": self.offdiag_block_norm,
        }


def cp_check(Gamma: np.ndarray, d_L: int, numerics: Numerics = DEFAULT_NUMERICS) -> CpVerdict:
    """Positivity verdict for a coefficient matrix.

    ``lemma1_violations`` holds 1-based indices whose diagonal entry vanishes
    while the rest of that row does not; any such index rules out positivity.
    """
    G = np.asarray(Gamma, dtype=complex)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ShapeError("Gamma must be square")
    Gh = (G + dagger(G)) / 2
    norm = float(np.linalg.norm(Gh, 2)) if G.size else 0.0
    lam = float(np.linalg.eigvalsh(Gh)[0]) if G.size else 0.0
    is_psd = lam >= -numerics.psd_rel_tol * max(1.0, norm)
    tol = numerics.lemma1_tol * max(1.0, norm)
    off = Gh - np.diag(np.diag(Gh))
    rows = np.linalg.norm(off, axis=1)
    viol = tuple(int(j) + 1 for j in range(len(G)) if abs(Gh[j, j]) <= tol and rows[j] > tol)
    k = d_L**2 - 1
    block = float(np.linalg.norm(Gh[:k, k:])) if k < len(G) else 0.0
    return CpVerdict(is_psd=bool(is_psd), min_eigenvalue=lam, lemma1_violations=viol, offdiag_block_norm=block)


def thermal_residuals(parts: RedfieldParts, beta: float, mu: float = 0.0, number: np.ndarray | None = None) -> np.ndarray:
    """Diagonal ``<E_i|L(rho)|E_i>`` of the Redfield generator at the equilibrium state.

    For ``mu = 0`` the state is the Gibbs state of ``H_S``; otherwise it is
    ``exp(-beta (H_S - mu number))``, with ``number`` defaulting to the chain's
    excitation number.
    """
    eig = model.eigensystem(parts.H_S)
    if mu == 0.0:
        rho = model.gibbs(parts.H_S, beta, eig)
    else:
        if number is None:
            number = model.excitation_number(int(round(np.log2(parts.d))))
        rho = model.grand_gibbs(parts.H_S, number, beta, mu)
    return eig.diag_in_eigenbasis(redfield_apply(parts)(rho))
