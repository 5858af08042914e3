"""Thermalization optimization: the smallest thermal residual over local Lindblad generators.

For a chain whose first ``N_L`` qubits touch the bath, the problem is

    minimize  sum_i |<E_i| L2(rho_th) |E_i>|
    over      Gamma_L >= 0 with Tr Gamma_L = 1 and Hermitian H_LS_L

with ``L2`` the local generator of :mod:`qmetop.lindblad`. The absolute values
become two diagonal blocks ``P >= G``, ``Q >= -G`` with ``G`` the linear map from
``(S, T, U)`` (``H_LS_L = S - T``, ``Gamma_L = U``) to the thermal diagonal.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from qmetop import lindblad, model
from qmetop.lindblad import LocalLindblad
from qmetop.model import EigenSystem, XxzParams
from qmetop.opalg import BASIS_ORDERS, dagger
from qmetop.sdp import Block, BlockSpace, LinearMap, SdpProblem, SdpSolution, complex_embed, solve
from qmetop.settings import DEFAULT_NUMERICS, Numerics

VERDICTS = ("possible", "impossible", "marginal")


class TopError(RuntimeError):
    """A TOP solve failed; the message carries the instance fingerprint."""


class BasisOrderMismatch(ValueError):
    pass


@dataclass(frozen=True)
class TopInstance:
    H_S: np.ndarray = field(repr=False)
    beta: float
    N_L: int
    basis_order: str = "zmp"
    delta: float = 1e-6

    def __post_init__(self):
        d = self.H_S.shape[0]
        if d % self.d_L:
            raise ValueError(f"2**N_L = {self.d_L} does not divide the system dimension {d}")
        if self.basis_order not in BASIS_ORDERS:
            raise ValueError(f"unknown basis order {self.basis_order!r}")

    @classmethod
    def from_params(cls, params: XxzParams, beta: float, basis_order: str = "zmp", delta: float = 1e-6) -> "TopInstance":
        return cls(model.build_xxz(params), float(beta), params.N_L, basis_order, delta)

    @property
    def d(self) -> int:
        return self.H_S.shape[0]

    @property
    def d_L(self) -> int:
        return 2**self.N_L

    @property
    def d_M(self) -> int:
        return self.d // self.d_L

    @property
    def n_gamma(self) -> int:
        return self.d_L**2 - 1

    def fingerprint(self) -> str:
        from qmetop.io import digest

        return digest(
            {
                "H": np.round(np.asarray(self.H_S), 14).view(float).tolist(),
                "beta": self.beta,
                "N_L": self.N_L,
                "basis_order": self.basis_order,
            }
        )


@dataclass(frozen=True)
class GMap:
    """Thermal-diagonal coefficients of the local generator.

    ``gamma_coeffs[a, b, i]`` is the contribution of ``Gamma_L[a, b]`` to
    ``<E_i|L2(rho_th)|E_i>`` and ``hamiltonian_coeffs[x, y, i]`` that of
    ``H_LS_L[x, y]``.
    """

    gamma_coeffs: np.ndarray = field(repr=False)
    hamiltonian_coeffs: np.ndarray = field(repr=False)
    eig: EigenSystem = field(repr=False)
    populations: np.ndarray = field(repr=False)

    def __call__(self, S: np.ndarray, T: np.ndarray, U: np.ndarray) -> np.ndarray:
        H = np.asarray(S) - np.asarray(T)
        val = np.einsum("ab,abi->i", U, self.gamma_coeffs) + np.einsum("xy,xyi->i", H, self.hamiltonian_coeffs)
        return val.real

    @property
    def hamiltonian_inert(self) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.gamma_coeffs), initial=0.0)))
        return float(np.max(np.abs(self.hamiltonian_coeffs), initial=0.0)) <= 1e-13 * scale


def build_gmap(instance: TopInstance, numerics: Numerics = DEFAULT_NUMERICS) -> GMap:
    eig = model.eigensystem(instance.H_S, numerics)
    model.warn_degenerate(eig, "build_gmap")
    p = model.gibbs_weights(eig.energies, instance.beta)
    ops = lindblad.local_operators(instance.N_L, instance.d_M, instance.basis_order)
    v = lindblad.dissipator_diagonals(ops, eig, p)
    # the Lamb-shift part, evaluated through the generator on matrix units
    dL = instance.d_L
    rho = model.gibbs(instance.H_S, instance.beta, eig)
    h = np.zeros((dL, dL, instance.d), dtype=complex)
    zero_gamma = np.zeros((instance.n_gamma, instance.n_gamma))
    for x in range(dL):
        for y in range(dL):
            E = np.zeros((dL, dL))
            E[x, y] = 1.0
            f = lindblad.local_l2_apply(LocalLindblad(zero_gamma, E, instance.basis_order), instance.d_M)
            h[x, y] = eig.diag_in_eigenbasis(f(rho))
    return GMap(gamma_coeffs=v, hamiltonian_coeffs=h, eig=eig, populations=p)


@dataclass
class TopProblem:
    problem: SdpProblem
    gmap: GMap
    includes_hamiltonian: bool


def build_top_sdp(instance: TopInstance, include_hamiltonian: bool | None = None, numerics: Numerics = DEFAULT_NUMERICS) -> TopProblem:
    """Standard-form program with blocks ``P, Q`` (diagonal), ``S, T, U`` (Hermitian).

    When the Lamb-shift coefficients of the thermal diagonal vanish (they do
    whenever the Gibbs state commutes with ``H_S``), ``S`` and ``T`` carry no
    information and are left out unless ``include_hamiltonian`` forces them.
    """
    gm = build_gmap(instance, numerics)
    if include_hamiltonian is None:
        include_hamiltonian = not gm.hamiltonian_inert
    d, dL, n = instance.d, instance.d_L, instance.n_gamma
    blocks = [Block("diag", d), Block("diag", d)]
    if include_hamiltonian:
        blocks += [Block("herm", dL), Block("herm", dL)]
    blocks.append(Block("herm", n))
    space = BlockSpace(tuple(blocks))
    off = space.offsets
    iU = len(blocks) - 1

    # rows of G over the stored vec: Re Tr(W^dag X) = <embed(W), embed(X)> / 2
    G = np.zeros((d, space.dim))
    for i in range(d):
        G[i, off[iU] : off[iU + 1]] = 0.5 * complex_embed(np.conj(gm.gamma_coeffs[:, :, i]), check=False).reshape(-1)
        if include_hamiltonian:
            w = 0.5 * complex_embed(np.conj(gm.hamiltonian_coeffs[:, :, i]), check=False).reshape(-1)
            G[i, off[2] : off[3]] = w
            G[i, off[3] : off[4]] = -w
    cod = BlockSpace((Block("diag", d), Block("diag", d)))
    Psi = np.zeros((2 * d, space.dim))
    Psi[:d, off[0] : off[1]] = np.eye(d)
    Psi[d:, off[1] : off[2]] = np.eye(d)
    Psi[:d] -= G
    Psi[d:] += G
    tr_cod = BlockSpace((Block("diag", 1),))
    Phi = np.zeros((1, space.dim))
    Phi[0, off[iU] : off[iU + 1]] = 0.5 * np.eye(2 * n).reshape(-1)
    objective = np.zeros(space.dim)
    objective[off[0] : off[2]] = 1.0
    problem = SdpProblem(
        space,
        objective,
        Phi=LinearMap(Phi, space, tr_cod),
        B=np.array([1.0]),
        Psi=LinearMap(Psi, space, cod),
        C=np.zeros(2 * d),
        name="top",
    )
    return TopProblem(problem, gm, include_hamiltonian)


def feasible_point(tp: TopProblem, S: np.ndarray, T: np.ndarray, U: np.ndarray) -> np.ndarray:
    """Stored vec with ``P, Q`` set to the positive and negative parts of ``G(S, T, U)``."""
    space = tp.problem.space
    blocks = [b.to_stored(v) for b, v in zip(space.blocks[2:], ([S, T, U] if tp.includes_hamiltonian else [U]))]
    tail = np.concatenate([x.reshape(-1) for x in blocks])
    d = space.blocks[0].n
    G = -tp.problem.Psi.matrix[:d, space.offsets[2] :] @ tail
    return np.concatenate([np.maximum(G, 0.0), np.maximum(-G, 0.0), tail])


def objective_at(tp: TopProblem, S: np.ndarray, T: np.ndarray, U: np.ndarray) -> float:
    """SDP objective at :func:`feasible_point`; equals ``tau`` of ``(U, S - T)``."""
    return tp.problem.objective_value(feasible_point(tp, S, T, U))


@dataclass
class TopResult:
    tau_opt: float
    Gamma_L_opt: np.ndarray = field(repr=False)
    H_LS_opt: np.ndarray = field(repr=False)
    gap: float
    verdict: str
    dual_value: float
    tau_check: float
    solve_stats: dict = field(default_factory=dict)
    delta: float = 1e-6
    floor: float = 1e-10
    basis_order: str = "zmp"

    @property
    def below_floor(self) -> bool:
        return self.tau_opt < self.floor

    def tau_display(self) -> str:
        return f"<= {self.floor:.0e}" if self.below_floor else f"{self.tau_opt:.6e}"

    def local_lindblad(self) -> LocalLindblad:
        return LocalLindblad(self.Gamma_L_opt, self.H_LS_opt, self.basis_order)

    def summary(self) -> dict:
        return {
            "tau_opt": self.tau_opt,
            "tau_display": self.tau_display(),
            "dual_value": self.dual_value,
            "gap": self.gap,
            "verdict": self.verdict,
            "delta": self.delta,
            "tau_check": self.tau_check,
            "gamma_trace": float(np.trace(self.Gamma_L_opt).real),
            "gamma_min_eigenvalue": float(np.linalg.eigvalsh((self.Gamma_L_opt + dagger(self.Gamma_L_opt)) / 2)[0]),
            **self.solve_stats,
        }


def verdict_for(tau_opt: float, gap: float, delta: float) -> str:
    if abs(tau_opt - delta) <= 10 * gap:
        return "marginal"
    return "possible" if tau_opt < delta else "impossible"


def solve_top(
    instance: TopInstance,
    tol: float | None = None,
    numerics: Numerics = DEFAULT_NUMERICS,
    include_hamiltonian: bool | None = None,
) -> TopResult:
    tp = build_top_sdp(instance, include_hamiltonian, numerics)
    try:
        sol: SdpSolution = solve(tp.problem, tol=tol, numerics=numerics)
    except Exception as exc:
        raise TopError(f"TOP solve failed for instance {instance.fingerprint()}: {exc}") from exc
    if sol.status != "optimal":
        raise TopError(f"TOP solve for instance {instance.fingerprint()} ended with status {sol.status}")
    X = sol.X
    U = X[-1]
    U = (U + dagger(U)) / 2
    if tp.includes_hamiltonian:
        H = X[2] - X[3]
        H = (H + dagger(H)) / 2
    else:
        H = np.zeros((instance.d_L, instance.d_L), dtype=complex)
    ll = LocalLindblad(U, H, instance.basis_order)
    tau_check = lindblad.tau(ll, instance.H_S, instance.beta, numerics, tp.gmap.eig)
    # the primal objective bounds tau from above; the generator it certifies is U, H
    tau_opt = float(sol.primal_value)
    stats = sol.summary()
    stats.pop("primal_value", None)
    stats.pop("dual_value", None)
    stats.pop("gap", None)
    stats["hamiltonian_blocks"] = tp.includes_hamiltonian
    return TopResult(
        tau_opt=tau_opt,
        Gamma_L_opt=U,
        H_LS_opt=H,
        gap=float(sol.gap),
        verdict=verdict_for(tau_opt, sol.gap, instance.delta),
        dual_value=float(sol.dual_value),
        tau_check=tau_check,
        solve_stats=stats,
        delta=instance.delta,
        floor=numerics.tau_floor,
        basis_order=instance.basis_order,
    )


def detailed_balance_channel(omega0: float, beta: float, basis_order: str = "zmp") -> LocalLindblad:
    """Single-qubit decay and excitation with rates in the ratio ``exp(-beta omega0)``, trace one."""
    from qmetop.opalg import ORDER_MINUS_FIRST

    down, up = 1.0, math.exp(-beta * omega0)
    G = np.zeros((3, 3))
    i_minus, i_plus = (1, 2) if basis_order == ORDER_MINUS_FIRST else (2, 1)
    G[i_minus, i_minus] = down
    G[i_plus, i_plus] = up
    return LocalLindblad(G / G.trace(), np.zeros((2, 2)), basis_order)


# ---------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepPoint:
    axis: str
    value: float
    N_M: int
    tau_opt: float | None
    gap: float | None
    verdict: str | None
    error: str | None = None

    def csv_row(self) -> list:
        fmt = lambda x: "" if x is None else repr(float(x))
        return [self.axis, repr(float(self.value)), self.N_M, fmt(self.tau_opt), fmt(self.gap), self.verdict or "error"]


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    grid: tuple[float, ...]
    N_L: int
    N_M: tuple[int, ...]
    omega0: float = 1.0
    g: float = 0.1
    Delta: float = 1.0
    beta: float = 1.0
    basis_order: str = "zmp"
    delta: float = 1e-6

    def __post_init__(self):
        if self.axis not in ("g", "beta"):
            raise ValueError(f"sweep axis must be 'g' or 'beta', got {self.axis!r}")
        if not all(np.isfinite(self.grid)):
            raise ValueError("sweep grid must be finite")

    def points(self) -> list[tuple[int, float]]:
        return [(nm, float(v)) for nm in self.N_M for v in self.grid]

    def instance(self, N_M: int, value: float) -> TopInstance:
        g = value if self.axis == "g" else self.g
        beta = value if self.axis == "beta" else self.beta
        params = XxzParams.uniform(self.N_L + N_M, self.N_L, self.omega0, g, self.Delta)
        return TopInstance.from_params(params, beta, self.basis_order, self.delta)


def _run_point(args) -> SweepPoint:
    spec, N_M, value, tol = args
    try:
        res = solve_top(spec.instance(N_M, value), tol=tol)
        return SweepPoint(spec.axis, value, N_M, res.tau_opt, res.gap, res.verdict)
    except Exception as exc:  # recorded, the sweep carries on
        return SweepPoint(spec.axis, value, N_M, None, None, None, f"{type(exc).__name__}: {exc}")


def sweep(spec: SweepSpec, jobs: int = 1, tol: float | None = None) -> list[SweepPoint]:
    """Solve every grid point; results follow the spec's point order regardless of ``jobs``."""
    tasks = [(spec, nm, v, tol) for nm, v in spec.points()]
    if jobs <= 1:
        return [_run_point(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_point, tasks))


def monotonicity(points: Sequence[SweepPoint]) -> dict:
    """Per-``N_M`` trend along the axis and per-value trend across ``N_M``."""
    ok = [p for p in points if p.tau_opt is not None]
    by_nm: dict[int, list[SweepPoint]] = {}
    for p in ok:
        by_nm.setdefault(p.N_M, []).append(p)
    along = {}
    for nm, pts in by_nm.items():
        taus = [p.tau_opt for p in sorted(pts, key=lambda q: q.value)]
        along[nm] = bool(all(b >= a for a, b in zip(taus, taus[1:])))
    across = {}
    values = sorted({p.value for p in ok})
    for v in values:
        taus = [p.tau_opt for p in sorted((p for p in ok if p.value == v), key=lambda q: q.N_M)]
        across[v] = bool(all(b <= a for a, b in zip(taus, taus[1:])))
    return {"nondecreasing_along_axis": along, "nonincreasing_in_N_M": across}


def tau_audit(
    Gamma_L: np.ndarray,
    H_LS_L: np.ndarray | None,
    params: XxzParams,
    beta: float,
    basis_order: str,
    file_basis_order: str | None = None,
    numerics: Numerics = DEFAULT_NUMERICS,
) -> float:
    """Thermal residual of a fixed local generator on a (possibly modified) chain."""
    if file_basis_order is not None and file_basis_order != basis_order:
        raise BasisOrderMismatch(f"generator stored in basis order {file_basis_order!r} but {basis_order!r} was requested")
    d_L = 2**params.N_L
    H_LS_L = np.zeros((d_L, d_L)) if H_LS_L is None else H_LS_L
    ll = LocalLindblad(Gamma_L, H_LS_L, basis_order)
    if ll.d_L != d_L:
        raise ValueError(f"generator acts on {ll.d_L} local states but N_L = {params.N_L} needs {d_L}")
    return lindblad.tau(ll, model.build_xxz(params), beta, numerics)
