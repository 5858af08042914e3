"""XXZ chain Hamiltonians, Gibbs states and bosonic bath coefficients."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np

from qmetop.opalg import SX, SY, SZ, is_hermitian, site_operator
from qmetop.settings import DEFAULT_NUMERICS, Numerics


class ConfigError(ValueError):
    """Invalid model or bath parameters."""


class NumericError(RuntimeError):
    """A numerical procedure failed to reach its accuracy target."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message if residual is None else f"{message} (residual estimate {residual:.3e})")
        self.residual = residual


class DegeneracyWarning(UserWarning):
    pass


def _as_array(value, n: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        raise ConfigError(f"{name} must have length {n}, got {arr.shape[0] if arr.ndim == 1 else arr.shape}")
    return arr.copy()


@dataclass(frozen=True)
class XxzParams:
    """Open XXZ chain of ``N`` qubits; the first ``N_L`` couple to the bath.

    ``g[l]`` and ``Delta[l]`` belong to the bond between qubits ``l`` and
    ``l + 1`` (0-based arrays).
    """

    N: int
    omega0: np.ndarray
    g: np.ndarray
    Delta: np.ndarray
    N_L: int = 1

    def __post_init__(self):
        if int(self.N) < 1:
            raise ConfigError("N must be at least 1")
        if not 1 <= int(self.N_L) <= int(self.N):
            raise ConfigError(f"N_L must lie in 1..N, got N_L={self.N_L}, N={self.N}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "N_L", int(self.N_L))
        object.__setattr__(self, "omega0", _as_array(self.omega0, self.N, "omega0"))
        object.__setattr__(self, "g", _as_array(self.g, self.N - 1, "g"))
        object.__setattr__(self, "Delta", _as_array(self.Delta, self.N - 1, "Delta"))
        for name in ("omega0", "g", "Delta"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ConfigError(f"{name} must be finite")

    @classmethod
    def uniform(cls, N: int, N_L: int = 1, omega0: float = 1.0, g: float = 0.1, Delta: float = 1.0) -> "XxzParams":
        return cls(N=N, omega0=omega0, g=g, Delta=Delta, N_L=N_L)

    @property
    def N_M(self) -> int:
        return self.N - self.N_L

    @property
    def d_L(self) -> int:
        return 2**self.N_L

    @property
    def d_M(self) -> int:
        return 2 ** (self.N - self.N_L)

    def modified(
        self,
        omega0: Mapping[int, float] | None = None,
        g: Mapping[int, float] | None = None,
        Delta: Mapping[int, float] | None = None,
    ) -> "XxzParams":
        """Copy with selected entries replaced; keys are 1-based site or bond labels."""
        arrays = {"omega0": self.omega0.copy(), "g": self.g.copy(), "Delta": self.Delta.copy()}
        for name, changes in (("omega0", omega0), ("g", g), ("Delta", Delta)):
            for k, v in (changes or {}).items():
                if not 1 <= int(k) <= len(arrays[name]):
                    raise ConfigError(f"{name} label {k} out of range 1..{len(arrays[name])}")
                arrays[name][int(k) - 1] = float(v)
        return replace(self, **arrays)

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "N_L": self.N_L,
            "omega0": self.omega0.tolist(),
            "g": self.g.tolist(),
            "Delta": self.Delta.tolist(),
        }

    @classmethod
    def from_dict(cls, cfg: Mapping) -> "XxzParams":
        try:
            N = int(cfg["N"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError("config needs an integer 'N'") from exc
        return cls(
            N=N,
            omega0=cfg.get("omega0", 1.0),
            g=cfg.get("g", 0.1),
            Delta=cfg.get("Delta", 1.0),
            N_L=cfg.get("N_L", 1),
        )


@dataclass(frozen=True)
class BathSpec:
    """Bosonic bath: inverse temperature, chemical potential and Ohmic-Gaussian cutoff."""

    beta: float
    mu: float = 0.0
    omega_c: float = 10.0
    kind: str = "ohmic-gaussian"

    def __post_init__(self):
        if not self.beta > 0:
            raise ConfigError("beta must be positive")
        if not self.omega_c > 0:
            raise ConfigError("omega_c must be positive")
        if self.kind != "ohmic-gaussian":
            raise ConfigError(f"unsupported spectral function {self.kind!r}")


@dataclass(frozen=True)
class EigenSystem:
    energies: np.ndarray
    vectors: np.ndarray = field(repr=False)
    degeneracy_gaps: tuple[tuple[int, int, float], ...] = ()

    @property
    def is_degenerate(self) -> bool:
        return bool(self.degeneracy_gaps)

    def to_eigenbasis(self, X: np.ndarray) -> np.ndarray:
        return self.vectors.conj().T @ X @ self.vectors

    def from_eigenbasis(self, X: np.ndarray) -> np.ndarray:
        return self.vectors @ X @ self.vectors.conj().T

    def diag_in_eigenbasis(self, X: np.ndarray) -> np.ndarray:
        """Entries ``<E_i|X|E_i>``."""
        V = self.vectors
        return np.einsum("ji,jk,ki->i", V.conj(), X, V)


def eigensystem(H: np.ndarray, numerics: Numerics = DEFAULT_NUMERICS) -> EigenSystem:
    """Ascending eigendecomposition with a fixed phase per eigenvector.

    Each eigenvector is rotated so that its largest-magnitude component is real
    and positive (the first such component on ties).
    """
    H = np.asarray(H, dtype=complex)
    if not is_hermitian(H, numerics):
        raise ConfigError("Hamiltonian is not Hermitian")
    E, V = np.linalg.eigh((H + H.conj().T) / 2)
    mags = np.abs(V)
    for k in range(V.shape[1]):
        col = mags[:, k]
        idx = int(np.flatnonzero(col >= col.max() * (1 - 1e-9))[0])
        V[:, k] *= np.exp(-1j * np.angle(V[idx, k]))
    scale = max(1.0, float(np.max(np.abs(E))))
    thr = numerics.degeneracy_tol * scale
    gaps = tuple(
        (i, j, float(abs(E[i] - E[j])))
        for i in range(len(E))
        for j in range(i + 1, len(E))
        if abs(E[i] - E[j]) < thr
    )
    return EigenSystem(energies=E, vectors=V, degeneracy_gaps=gaps)


def build_xxz(params: XxzParams) -> np.ndarray:
    """``sum_l w_l/2 sz_l - sum_l g_l (sx sx + sy sy + Delta_l sz sz)`` on 2**N states."""
    N = params.N
    sz = [site_operator(SZ, k, N) for k in range(N)]
    H = sum(params.omega0[k] / 2 * sz[k] for k in range(N))
    for k in range(N - 1):
        xx = site_operator(SX, k, N) @ site_operator(SX, k + 1, N)
        yy = site_operator(SY, k, N) @ site_operator(SY, k + 1, N)
        H = H - params.g[k] * (xx + yy + params.Delta[k] * sz[k] @ sz[k + 1])
    return np.asarray(H, dtype=complex)


def total_magnetization(N: int) -> np.ndarray:
    return sum(site_operator(SZ, k, N) for k in range(N))


def excitation_number(N: int) -> np.ndarray:
    """Number of up spins, ``(sum_k sigma_z^k + N) / 2``."""
    return (total_magnetization(N) + N * np.eye(2**N)) / 2


def grand_gibbs(H: np.ndarray, number: np.ndarray, beta: float, mu: float) -> np.ndarray:
    """Normalized ``exp(-beta (H - mu number))``; ``number`` must commute with ``H``."""
    return gibbs(np.asarray(H) - mu * np.asarray(number), beta)


def gibbs(H: np.ndarray, beta: float, eig: EigenSystem | None = None) -> np.ndarray:
    """Normalized ``exp(-beta H)``, computed from the spectrum shifted by its minimum."""
    if beta < 0:
        raise ConfigError("beta must be non-negative")
    eig = eig if eig is not None else eigensystem(H)
    w = np.exp(-beta * (eig.energies - eig.energies.min()))
    w /= w.sum()
    rho = (eig.vectors * w) @ eig.vectors.conj().T
    return (rho + rho.conj().T) / 2


def gibbs_weights(energies: np.ndarray, beta: float) -> np.ndarray:
    w = np.exp(-beta * (np.asarray(energies) - np.min(energies)))
    return w / w.sum()


def spectral(omega, spec: BathSpec):
    """Ohmic spectral function with a Gaussian cutoff, zero for non-positive frequency."""
    w = np.asarray(omega, dtype=float)
    out = np.where(w > 0, w * np.exp(-((w / spec.omega_c) ** 2)), 0.0)
    return out if out.ndim else float(out)


def bose(omega, beta: float, mu: float = 0.0):
    """Bose factor ``1 / (exp(beta (omega - mu)) - 1)``."""
    x = beta * (np.asarray(omega, dtype=float) - mu)
    if np.any(x == 0):
        raise ZeroDivisionError("Bose factor diverges at omega = mu")
    out = 1.0 / np.expm1(x)
    return out if out.ndim else float(out)


def occupied_spectral(omega, spec: BathSpec):
    """``J(w) n(w)``, continued to ``1/beta`` at ``w = mu = 0``."""
    w = np.asarray(omega, dtype=float)
    x = spec.beta * (w - spec.mu)
    pos = w > 0
    safe_x = np.where(pos & (x != 0), x, 1.0)
    val = np.where(pos, w * np.exp(-((w / spec.omega_c) ** 2)) / np.expm1(safe_x), 0.0)
    val = np.where(pos & (x == 0), 0.0, val)
    if spec.mu == 0:
        val = np.where(w == 0, 1.0 / spec.beta, val)
    return val if val.ndim else float(val)


def emitted_spectral(omega, spec: BathSpec):
    """``exp(beta (w - mu)) J(w) n(w) = J(w) (n(w) + 1)``."""
    w = np.asarray(omega, dtype=float)
    x = spec.beta * (w - spec.mu)
    pos = w > 0
    safe_x = np.where(pos & (x != 0), x, 1.0)
    val = np.where(pos, w * np.exp(-((w / spec.omega_c) ** 2)) / -np.expm1(-safe_x), 0.0)
    if spec.mu == 0:
        val = np.where(w == 0, 1.0 / spec.beta, val)
    return val if val.ndim else float(val)


def _gl_panels(f: Callable, a: float, b: float, panels: int, nodes: int) -> float:
    if b <= a:
        return 0.0
    x, w = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(a, b, panels + 1)
    half = np.diff(edges) / 2
    mid = (edges[:-1] + edges[1:]) / 2
    pts = mid[:, None] + half[:, None] * x[None, :]
    return float(np.sum(half[:, None] * w[None, :] * f(pts)))


def principal_value(
    f: Callable,
    E: float,
    omega_c: float,
    numerics: Numerics = DEFAULT_NUMERICS,
) -> float:
    """Cauchy principal value of ``int_0^inf f(w) / (w - E) dw`` for a vectorized ``f``.

    The pole neighbourhood ``[E - h, E + h]`` is folded onto ``(f(E+t) - f(E-t))/t``
    and everything is integrated with Gauss-Legendre panels whose count doubles
    until successive results agree.
    """
    E = float(E)
    upper = max(8 * omega_c, E + 8 * omega_c)
    if E == 0.0:
        f0 = float(np.asarray(f(np.array([0.0])))[0])
        if abs(f0) > 0:
            raise NumericError("principal value diverges: pole at the endpoint with nonzero integrand", abs(f0))

    def estimate(panels: int) -> float:
        n = numerics.pv_nodes
        if E <= 0:
            return _gl_panels(lambda w: f(w) / (w - E), 0.0, upper, panels, n)
        h = min(E / 2, omega_c / 10)
        # panel counts proportional to interval length keep the resolution even
        span = upper
        p_lo = max(1, int(np.ceil(panels * (E - h) / span)))
        p_hi = max(1, int(np.ceil(panels * (upper - E - h) / span)))
        p_mid = max(1, int(np.ceil(panels * h / span)))
        lo = _gl_panels(lambda w: f(w) / (w - E), 0.0, E - h, p_lo, n)
        mid = _gl_panels(lambda t: (f(E + t) - f(E - t)) / t, 0.0, h, p_mid, n)
        hi = _gl_panels(lambda w: f(w) / (w - E), E + h, upper, p_hi, n)
        return lo + mid + hi

    panels = numerics.pv_min_panels
    prev = estimate(panels)
    while panels < numerics.pv_max_panels:
        panels *= 2
        cur = estimate(panels)
        change = abs(cur - prev)
        if change <= numerics.pv_tol * max(1.0, abs(cur)):
            return cur
        prev = cur
    raise NumericError(f"principal value at E={E} did not converge within {panels} panels", change)


def bath_coeffs(E: float, spec: BathSpec, numerics: Numerics = DEFAULT_NUMERICS) -> tuple[complex, complex]:
    """Half-line bath coefficients ``(C, D)`` at the transition energy ``E``.

    ``C = J n / 2 - i/(2 pi) PV int J n / (w - E)`` and ``D`` is the same with the
    emission weight ``exp(beta (w - mu)) J n``.
    """
    E = float(E)
    reC = 0.5 * float(occupied_spectral(E, spec)) if E > 0 else 0.0
    reD = 0.5 * float(emitted_spectral(E, spec)) if E > 0 else 0.0
    imC = principal_value(lambda w: occupied_spectral(w, spec), E, spec.omega_c, numerics)
    imD = principal_value(lambda w: emitted_spectral(w, spec), E, spec.omega_c, numerics)
    return complex(reC, -imC / (2 * np.pi)), complex(reD, -imD / (2 * np.pi))


def warn_degenerate(eig: EigenSystem, context: str) -> None:
    if eig.is_degenerate:
        warnings.warn(
            f"{context}: {len(eig.degeneracy_gaps)} near-degenerate level pairs; using the fixed eigenbasis",
            DegeneracyWarning,
            stacklevel=3,
        )
