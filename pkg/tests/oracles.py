"""Independent reference computations used to check the package.

Nothing here imports qmetop; each routine is a direct, slow transcription of
the defining formula.
"""
from __future__ import annotations

import itertools

import numpy as np
from scipy import integrate, linalg

sx = np.array([[0, 1], [1, 0]], dtype=complex)
sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
sz = np.diag([1.0, -1.0]).astype(complex)
sp = np.array([[0, 1], [0, 0]], dtype=complex)
sm = np.array([[0, 0], [1, 0]], dtype=complex)
i2 = np.eye(2, dtype=complex)


def single_qubit_basis(minus_first: bool) -> list[np.ndarray]:
    mid = [sm, sp] if minus_first else [sp, sm]
    return [-sz / np.sqrt(2), *mid, i2 / np.sqrt(2)]


def chain_op(op: np.ndarray, site: int, n: int) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for k in range(n):
        out = np.kron(out, op if k == site else i2)
    return out


def xxz(omega0, g, Delta) -> np.ndarray:
    n = len(omega0)
    H = sum(omega0[k] / 2 * chain_op(sz, k, n) for k in range(n))
    for k in range(n - 1):
        for a, c in ((sx, 1.0), (sy, 1.0), (sz, Delta[k])):
            H = H - g[k] * c * chain_op(a, k, n) @ chain_op(a, k + 1, n)
    return H


def gibbs_expm(H: np.ndarray, beta: float) -> np.ndarray:
    R = linalg.expm(-beta * H)
    return R / np.trace(R)


def lindblad_loop(Gamma, ops, H=None):
    def apply(rho):
        out = np.zeros_like(rho, dtype=complex)
        for a in range(len(ops)):
            for b in range(len(ops)):
                if Gamma[a, b] == 0:
                    continue
                Fa, Fb = ops[a], ops[b]
                FaFb = Fa.conj().T @ Fb
                out += Gamma[a, b] * (Fb @ rho @ Fa.conj().T - 0.5 * (FaFb @ rho + rho @ FaFb))
        if H is not None:
            out += -1j * (H @ rho - rho @ H)
        return out

    return apply


def local_jump_ops(N_L: int, N_M: int, minus_first: bool) -> list[np.ndarray]:
    q = single_qubit_basis(minus_first)
    d_M = 2**N_M
    f = []
    for combo in itertools.product(q, repeat=N_L):
        m = np.eye(1, dtype=complex)
        for c in combo:
            m = np.kron(m, c)
        f.append(m)
    return [np.kron(fk, np.eye(d_M) / np.sqrt(d_M)) for fk in f[:-1]]


def tau_bruteforce(Gamma_L, H_LS_L, N_L, N_M, minus_first, H_S, beta) -> float:
    ops = local_jump_ops(N_L, N_M, minus_first)
    H = np.kron(H_LS_L, np.eye(2**N_M))
    rho = gibbs_expm(H_S, beta)
    out = lindblad_loop(Gamma_L, ops, H)(rho)
    _, V = np.linalg.eigh(H_S)
    return float(np.sum(np.abs(np.real(np.diag(V.conj().T @ out @ V)))))


# --- bath -------------------------------------------------------------------


def occupied(w, beta, mu, wc):
    return w * np.exp(-((w / wc) ** 2)) / np.expm1(beta * (w - mu)) if w > 0 else 0.0


def emitted(w, beta, mu, wc):
    return np.exp(beta * (w - mu)) * occupied(w, beta, mu, wc)


def pv_scipy(f, E: float, upper: float) -> float:
    if E <= 0:
        return integrate.quad(lambda w: f(w) / (w - E), 0, upper, limit=400, epsabs=1e-13, epsrel=1e-12)[0]
    return integrate.quad(f, 0, upper, weight="cauchy", wvar=E, limit=400, epsabs=1e-13, epsrel=1e-12)[0]


def bath_coeffs_scipy(E, beta, mu, wc):
    upper = 12 * wc + abs(E)
    fC = lambda w: occupied(w, beta, mu, wc)
    fD = lambda w: emitted(w, beta, mu, wc)
    reC = fC(E) / 2 if E > 0 else 0.0
    reD = fD(E) / 2 if E > 0 else 0.0
    return reC - 1j * pv_scipy(fC, E, upper) / (2 * np.pi), reD - 1j * pv_scipy(fD, E, upper) / (2 * np.pi)


def redfield_dense(H: np.ndarray, S: np.ndarray, beta: float, mu: float, wc: float) -> np.ndarray:
    """Redfield generator as a matrix on column-stacked vec, from projector sums."""
    E, V = np.linalg.eigh(H)
    d = len(E)
    S1 = np.zeros((d, d), dtype=complex)
    S2 = np.zeros((d, d), dtype=complex)
    for j in range(d):
        for k in range(d):
            m = V[:, j].conj() @ S @ V[:, k]
            if abs(m) < 1e-14:
                continue
            C, D = bath_coeffs_scipy(E[k] - E[j], beta, mu, wc)
            S1 += m * D * np.outer(V[:, j], V[:, k].conj())
            S2 += m * C * np.outer(V[:, j], V[:, k].conj())
    I = np.eye(d)
    pre = lambda A: np.kron(I, A)
    post = lambda A: np.kron(A.T, I)
    Sd = S.conj().T
    X = pre(Sd @ S1) - np.kron(Sd.T, S1) - np.kron(S2.T, Sd) + post(S2 @ Sd)
    # (X(rho^dag))^dag in column-stacked coordinates
    P = np.zeros((d * d, d * d))
    for a in range(d):
        for b in range(d):
            P[a + d * b, b + d * a] = 1
    Xh = P @ X.conj() @ P
    return -1j * (pre(H) - post(H)) - (X + Xh)


def apply_colvec(L: np.ndarray, rho: np.ndarray) -> np.ndarray:
    d = rho.shape[0]
    return (L @ rho.reshape(-1, order="F")).reshape(d, d, order="F")


def nullspace_state(L: np.ndarray) -> np.ndarray:
    ns = linalg.null_space(L, rcond=1e-10)
    d = int(round(np.sqrt(L.shape[0])))
    rho = ns[:, 0].reshape(d, d, order="F")
    return rho / np.trace(rho)


def trace_norm(K: np.ndarray) -> float:
    return float(np.sum(np.abs(np.linalg.eigvalsh(K))))
