"""Dense semidefinite programming with duality certificates.

Problems are posed as

    minimize <A, X>  subject to  Phi(X) = B,  Psi(X) >= C,  X >= 0

over a product of blocks. A block is ``diag`` (nonnegative vector), ``sym``
(real symmetric PSD) or ``herm`` (complex Hermitian PSD, stored through the real
embedding ``[[Re H, -Im H], [Im H, Re H]]``). The inner product is
``Re Tr(A^dag B)`` for every kind, which for an embedded ``herm`` block is half
the entrywise dot product of the embeddings.

:func:`solve` rewrites the inequalities with PSD slack blocks and runs a
primal-dual path-following method with Nesterov-Todd scaling and Mehrotra
predictor-corrector steps.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

from qmetop.settings import DEFAULT_NUMERICS, Numerics

KINDS = ("diag", "sym", "herm")
STATUSES = ("optimal", "infeasible-suspected", "max-iterations")


class SolverError(RuntimeError):
    """The Newton system became numerically singular or a step could not be taken."""


class ValidationError(ValueError):
    pass


def complex_embed(H: np.ndarray, check: bool = True, tol: float = 1e-12) -> np.ndarray:
    """Real embedding ``[[Re H, -Im H], [Im H, Re H]]``."""
    H = np.asarray(H, dtype=complex)
    if check and np.max(np.abs(H - H.conj().T), initial=0.0) > tol * max(1.0, np.max(np.abs(H), initial=0.0)):
        raise ValidationError("complex_embed expects a Hermitian matrix")
    return np.block([[H.real, -H.imag], [H.imag, H.real]])


def complex_unembed(X: np.ndarray) -> np.ndarray:
    """Inverse of :func:`complex_embed`; projects a general real matrix onto the embedded structure."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0] // 2
    X11, X12, X21, X22 = X[:n, :n], X[:n, n:], X[n:, :n], X[n:, n:]
    return 0.5 * ((X11 + X22) + 1j * (X21 - X12))


@dataclass(frozen=True)
class Block:
    kind: str
    n: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"block kind must be one of {KINDS}, got {self.kind!r}")
        if self.n < 1:
            raise ValidationError("block dimension must be positive")

    @property
    def size(self) -> int:
        """Order of the stored real matrix."""
        return 2 * self.n if self.kind == "herm" else self.n

    @property
    def vec_len(self) -> int:
        return self.n if self.kind == "diag" else self.size**2

    @property
    def weight(self) -> float:
        return 0.5 if self.kind == "herm" else 1.0

    def to_stored(self, value) -> np.ndarray:
        """Natural value (vector, real or complex matrix) to stored real form."""
        if self.kind == "diag":
            v = np.asarray(value)
            v = np.diag(v) if v.ndim == 2 else v
            return np.real(v).astype(float).reshape(self.n)
        if self.kind == "sym":
            return np.real(np.asarray(value)).astype(float).reshape(self.n, self.n)
        return complex_embed(np.asarray(value, dtype=complex).reshape(self.n, self.n), check=False)

    def to_natural(self, stored: np.ndarray):
        if self.kind == "herm":
            return complex_unembed(stored)
        return np.asarray(stored)

    def coordinates(self) -> np.ndarray:
        """Independent real coordinates of a natural value as rows over the stored vec."""
        n, s = self.n, self.size
        if self.kind == "diag":
            return np.eye(n)
        rows = []
        if self.kind == "sym":
            for i in range(n):
                for j in range(i, n):
                    r = np.zeros((s, s))
                    r[i, j] += 0.5
                    r[j, i] += 0.5
                    rows.append(r.reshape(-1))
            return np.array(rows)
        for i in range(n):
            for j in range(i, n):
                r = np.zeros((s, s))
                r[i, j] += 0.5
                r[n + i, n + j] += 0.5
                rows.append(r.reshape(-1))
        for i in range(n):
            for j in range(i + 1, n):
                r = np.zeros((s, s))
                r[n + i, j] += 0.5
                r[i, n + j] -= 0.5
                rows.append(r.reshape(-1))
        return np.array(rows)


@dataclass(frozen=True)
class BlockSpace:
    blocks: tuple[Block, ...]

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum([b.vec_len for b in self.blocks])])

    @property
    def dim(self) -> int:
        return int(self.offsets[-1])

    @property
    def weights(self) -> np.ndarray:
        return np.concatenate([np.full(b.vec_len, b.weight) for b in self.blocks])

    def vec(self, stored: Sequence[np.ndarray]) -> np.ndarray:
        if len(stored) != len(self.blocks):
            raise ValidationError(f"expected {len(self.blocks)} blocks, got {len(stored)}")
        return np.concatenate([np.asarray(x, dtype=float).reshape(-1) for x in stored])

    def unvec(self, v: np.ndarray) -> list[np.ndarray]:
        off = self.offsets
        out = []
        for k, b in enumerate(self.blocks):
            seg = v[off[k] : off[k + 1]]
            out.append(seg.copy() if b.kind == "diag" else seg.reshape(b.size, b.size).copy())
        return out

    def from_natural(self, values: Sequence) -> np.ndarray:
        return self.vec([b.to_stored(v) for b, v in zip(self.blocks, values)])

    def to_natural(self, v: np.ndarray) -> list:
        return [b.to_natural(x) for b, x in zip(self.blocks, self.unvec(v))]

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(np.dot(self.weights * u, v))

    def zeros(self) -> np.ndarray:
        return np.zeros(self.dim)


@dataclass(frozen=True)
class LinearMap:
    """Real-linear map between block spaces, stored as a matrix over stored vecs."""

    matrix: np.ndarray = field(repr=False)
    domain: BlockSpace
    codomain: BlockSpace

    def __post_init__(self):
        if self.matrix.shape != (self.codomain.dim, self.domain.dim):
            raise ValidationError(f"map matrix {self.matrix.shape} vs spaces {(self.codomain.dim, self.domain.dim)}")

    def apply_vec(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v

    def apply(self, values: Sequence) -> list:
        return self.codomain.to_natural(self.matrix @ self.domain.from_natural(values))

    def adjoint(self) -> "LinearMap":
        """Adjoint with respect to the weighted inner products of both spaces."""
        wd, wc = self.domain.weights, self.codomain.weights
        return LinearMap((self.matrix.T * wc[None, :]) / wd[:, None], self.codomain, self.domain)

    @classmethod
    def from_function(cls, f: Callable[[list], list], domain: BlockSpace, codomain: BlockSpace) -> "LinearMap":
        """Tabulate a linear ``f`` acting on natural block values."""
        cols = []
        for k in range(domain.dim):
            e = np.zeros(domain.dim)
            e[k] = 1.0
            natural = []
            for b, x in zip(domain.blocks, domain.unvec(e)):
                natural.append(complex_unembed(x) if b.kind == "herm" else x)
            out = f(natural)
            col = []
            for b, y in zip(codomain.blocks, out):
                y = np.asarray(y)
                if b.kind == "herm":
                    y = np.asarray(y, dtype=complex)
                    col.append(np.block([[y.real, -y.imag], [y.imag, y.real]]).reshape(-1))
                elif b.kind == "diag":
                    y = np.diag(y) if y.ndim == 2 else y
                    col.append(np.real(y).reshape(-1))
                else:
                    col.append(np.real(y).reshape(-1))
            cols.append(np.concatenate(col))
        return cls(np.array(cols).T if cols else np.zeros((codomain.dim, 0)), domain, codomain)

    @classmethod
    def identity(cls, space: BlockSpace) -> "LinearMap":
        return cls(np.eye(space.dim), space, space)


@dataclass
class SdpProblem:
    """``min <A, X>  s.t.  Phi(X) = B, Psi(X) >= C, X >= 0``; either constraint family may be absent."""

    space: BlockSpace
    objective: np.ndarray
    Phi: LinearMap | None = None
    B: np.ndarray | None = None
    Psi: LinearMap | None = None
    C: np.ndarray | None = None
    name: str = "sdp"

    def __post_init__(self):
        if self.objective.shape != (self.space.dim,):
            raise ValidationError("objective must be a stored vec over the variable space")
        for M, rhs, label in ((self.Phi, self.B, "Phi"), (self.Psi, self.C, "Psi")):
            if (M is None) != (rhs is None):
                raise ValidationError(f"{label} and its right-hand side must be given together")
            if M is not None and (M.domain != self.space or rhs.shape != (M.codomain.dim,)):
                raise ValidationError(f"{label} does not match the variable space or its right-hand side")

    def objective_value(self, v: np.ndarray) -> float:
        return self.space.inner(self.objective, v)

    def to_json(self) -> str:
        def enc(M):
            return None if M is None else {
                "matrix": M.matrix.tolist(),
                "codomain": [[b.kind, b.n] for b in M.codomain.blocks],
            }

        return json.dumps(
            {
                "name": self.name,
                "blocks": [[b.kind, b.n] for b in self.space.blocks],
                "objective": self.objective.tolist(),
                "Phi": enc(self.Phi),
                "B": None if self.B is None else self.B.tolist(),
                "Psi": enc(self.Psi),
                "C": None if self.C is None else self.C.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "SdpProblem":
        d = json.loads(text)
        space = BlockSpace(tuple(Block(k, n) for k, n in d["blocks"]))

        def dec(m):
            if m is None:
                return None
            cod = BlockSpace(tuple(Block(k, n) for k, n in m["codomain"]))
            return LinearMap(np.array(m["matrix"], dtype=float).reshape(cod.dim, space.dim), space, cod)

        arr = lambda x: None if x is None else np.array(x, dtype=float)
        return cls(space, np.array(d["objective"], dtype=float), dec(d["Phi"]), arr(d["B"]), dec(d["Psi"]), arr(d["C"]), d["name"])


@dataclass
class SdpSolution:
    X: list = field(repr=False)
    Y: list | None = field(repr=False)
    Z: list | None = field(repr=False)
    primal_value: float
    dual_value: float
    gap: float
    status: str
    iterations: int
    primal_residual: float
    dual_residual: float
    history: list = field(default_factory=list, repr=False)
    X_vec: np.ndarray | None = field(default=None, repr=False)

    @property
    def rel_gap(self) -> float:
        return abs(self.primal_value - self.dual_value) / max(1.0, abs(self.primal_value))

    def weak_duality_holds(self, tol: float = 1e-9) -> bool:
        return self.primal_value >= self.dual_value - tol * max(1.0, abs(self.primal_value))

    def summary(self) -> dict:
        return {
            "status": self.status,
            "primal_value": self.primal_value,
            "dual_value": self.dual_value,
            "gap": self.gap,
            "iterations": self.iterations,
            "primal_residual": self.primal_residual,
            "dual_residual": self.dual_residual,
        }

    def to_json(self) -> str:
        def enc(vals):
            if vals is None:
                return None
            out = []
            for v in vals:
                v = np.asarray(v)
                out.append({"re": np.real(v).tolist(), "im": np.imag(v).tolist()})
            return out

        d = self.summary()
        d.update(X=enc(self.X), Y=enc(self.Y), Z=enc(self.Z))
        return json.dumps(d)


# ---------------------------------------------------------------------------
# standard form  min <c, x>  s.t.  A x = b,  x in K   (plain dot products)


@dataclass
class _Standard:
    blocks: list[Block]          # internal blocks, kinds diag/sym only
    A: list[np.ndarray]          # per block: (m, n) for diag, (m, s, s) symmetric for sym
    b: np.ndarray
    c: list[np.ndarray]
    rows: list[np.ndarray]       # per block: constraint rows that touch it
    n_eq: int
    row_scale: np.ndarray


def _internal_block(b: Block) -> Block:
    return Block("sym", b.size) if b.kind != "diag" else b


def _to_standard(problem: SdpProblem) -> tuple[_Standard, BlockSpace, list[np.ndarray]]:
    space = problem.space
    slack_blocks: tuple[Block, ...] = problem.Psi.codomain.blocks if problem.Psi is not None else ()
    full = BlockSpace(space.blocks + slack_blocks)
    row_list, rhs = [], []
    coord_sets = []
    for M, R, slack in ((problem.Phi, problem.B, False), (problem.Psi, problem.C, True)):
        if M is None:
            coord_sets.append(None)
            continue
        cod = M.codomain
        off = cod.offsets
        coords = []
        for k, blk in enumerate(cod.blocks):
            Ck = blk.coordinates()
            P = np.zeros((Ck.shape[0], cod.dim))
            P[:, off[k] : off[k + 1]] = Ck
            coords.append(P)
        Pall = np.vstack(coords)
        coord_sets.append(Pall)
        rows = Pall @ M.matrix
        if slack:
            rows = np.hstack([rows, -Pall])
        else:
            rows = np.hstack([rows, np.zeros((rows.shape[0], full.dim - space.dim))])
        row_list.append(rows)
        rhs.append(Pall @ R)
    if not row_list:
        raise ValidationError("problem has no constraints")
    Arows = np.vstack(row_list)
    b = np.concatenate(rhs)
    n_eq = row_list[0].shape[0] if problem.Phi is not None else 0
    norms = np.linalg.norm(Arows, axis=1)
    if np.any(norms == 0):
        zero = np.flatnonzero(norms == 0)
        if np.any(np.abs(b[zero]) > 0):
            raise ValidationError("a constraint row is identically zero with a nonzero right-hand side")
        keep = norms > 0
        Arows, b, norms = Arows[keep], b[keep], norms[keep]
    Arows = Arows / norms[:, None]
    b = b / norms
    cvec = np.concatenate([problem.objective * space.weights, np.zeros(full.dim - space.dim)])
    off = full.offsets
    A_blocks, c_blocks, touch, internal = [], [], [], []
    for k, blk in enumerate(full.blocks):
        seg = Arows[:, off[k] : off[k + 1]]
        ck = cvec[off[k] : off[k + 1]]
        ib = _internal_block(blk)
        internal.append(ib)
        if ib.kind == "diag":
            A_blocks.append(seg.copy())
            c_blocks.append(ck.copy())
        else:
            S = seg.reshape(-1, ib.n, ib.n)
            A_blocks.append(0.5 * (S + S.transpose(0, 2, 1)))
            C = ck.reshape(ib.n, ib.n)
            c_blocks.append(0.5 * (C + C.T))
        touch.append(np.flatnonzero(np.any(seg != 0, axis=1)))
    return _Standard(internal, A_blocks, b, c_blocks, touch, n_eq, norms), full, coord_sets


def _A_apply(std: _Standard, X: list[np.ndarray]) -> np.ndarray:
    out = np.zeros(len(std.b))
    for blk, Ak, Xk in zip(std.blocks, std.A, X):
        out += Ak @ Xk if blk.kind == "diag" else np.einsum("mij,ij->m", Ak, Xk)
    return out


def _AT_apply(std: _Standard, y: np.ndarray) -> list[np.ndarray]:
    return [Ak.T @ y if blk.kind == "diag" else np.einsum("m,mij->ij", y, Ak) for blk, Ak in zip(std.blocks, std.A)]


def _inner(X: list[np.ndarray], Z: list[np.ndarray]) -> float:
    return float(sum(np.sum(x * z) for x, z in zip(X, Z)))


def _norm(X: list[np.ndarray]) -> float:
    return float(np.sqrt(sum(np.sum(x * x) for x in X)))


def _max_step(blk: Block, X: np.ndarray, dX: np.ndarray, L: np.ndarray | None = None) -> float:
    if blk.kind == "diag":
        neg = dX < 0
        return float(np.min(-X[neg] / dX[neg])) if np.any(neg) else np.inf
    if L is None:
        L = np.linalg.cholesky(X)
    T = sla.solve_triangular(L, dX, lower=True)
    T = sla.solve_triangular(L, T.T, lower=True).T
    lam = np.linalg.eigvalsh(0.5 * (T + T.T))[0]
    return -1.0 / lam if lam < 0 else np.inf


@dataclass
class _Scaling:
    G: object
    Ginv: object
    W: object
    lam: np.ndarray
    LX: np.ndarray | None


def _nt_scaling(blk: Block, X: np.ndarray, Z: np.ndarray) -> _Scaling:
    if blk.kind == "diag":
        w = np.sqrt(X / Z)
        g = np.sqrt(w)
        return _Scaling(g, 1 / g, w, np.sqrt(X * Z), None)
    LX = np.linalg.cholesky(X)
    LZ = np.linalg.cholesky(Z)
    U, s, Vt = np.linalg.svd(LZ.T @ LX)
    G = (LX @ Vt.T) / np.sqrt(s)[None, :]
    Ginv = (np.sqrt(s)[:, None] * Vt) @ sla.solve_triangular(LX, np.eye(blk.n), lower=True)
    return _Scaling(G, Ginv, G @ G.T, s, LX)


def _scaled(blk: Block, sc: _Scaling, dX: np.ndarray, dZ: np.ndarray):
    if blk.kind == "diag":
        return dX * sc.Ginv**2, dZ * sc.G**2
    return sc.Ginv @ dX @ sc.Ginv.T, sc.G.T @ dZ @ sc.G


_MU_FLOOR = 1e-4
_REFINE_STEPS = 2


def _solve_standard(std: _Standard, tol: float, max_iter: int):
    m = len(std.b)
    blocks = std.blocks
    nu = sum(b.n for b in blocks)
    normb = np.linalg.norm(std.b)
    normc = _norm(std.c)
    X, Z = [], []
    for blk, Ak, ck in zip(blocks, std.A, std.c):
        n = blk.n
        An = np.linalg.norm(Ak.reshape(m, -1), axis=1)
        xi = max(10.0, np.sqrt(n), n * np.max((1 + np.abs(std.b)) / (1 + An)))
        eta = max(10.0, np.sqrt(n), np.linalg.norm(ck), np.max(An))
        X.append(np.full(n, xi) if blk.kind == "diag" else xi * np.eye(n))
        Z.append(np.full(n, eta) if blk.kind == "diag" else eta * np.eye(n))
    y = np.zeros(m)
    mu0 = _inner(X, Z) / nu
    history = []
    status = "max-iterations"
    stall = 0
    for it in range(max_iter + 1):
        rp = std.b - _A_apply(std, X)
        ATy = _AT_apply(std, y)
        Rd = [ck - a - z for ck, a, z in zip(std.c, ATy, Z)]
        pobj = _inner(std.c, X)
        dobj = float(std.b @ y)
        mu = _inner(X, Z) / nu
        pinf = np.linalg.norm(rp) / (1 + normb)
        dinf = _norm(Rd) / (1 + normc)
        relgap = abs(pobj - dobj) / max(1.0, abs(pobj))
        history.append({"iter": it, "pobj": pobj, "dobj": dobj, "pinf": pinf, "dinf": dinf, "relgap": relgap, "mu": mu})
        if pinf <= tol and dinf <= tol and relgap <= tol:
            status = "optimal"
            break
        if _norm(X) > 1e12 * (1 + normb) or abs(dobj) > 1e12 * (1 + abs(pobj)):
            status = "infeasible-suspected"
            break
        if it == max_iter:
            break
        try:
            scal = [_nt_scaling(blk, Xk, Zk) for blk, Xk, Zk in zip(blocks, X, Z)]
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"iterate lost positive definiteness at iteration {it}") from exc
        M = np.zeros((m, m))
        for blk, Ak, sc, rows in zip(blocks, std.A, scal, std.rows):
            if len(rows) == 0:
                continue
            Ar = Ak[rows]
            if blk.kind == "diag":
                M[np.ix_(rows, rows)] += (Ar * (sc.W**2)[None, :]) @ Ar.T
            else:
                WAW = sc.W @ Ar @ sc.W
                M[np.ix_(rows, rows)] += np.einsum("pij,qij->pq", Ar, WAW, optimize=True)
        M = 0.5 * (M + M.T)
        # symmetric diagonal equilibration before factorizing
        dM = np.sqrt(np.maximum(np.diag(M), np.finfo(float).tiny))
        Ms = M / np.outer(dM, dM)
        try:
            cho_s = sla.cho_factor(Ms)
        except np.linalg.LinAlgError:
            try:
                cho_s = sla.cho_factor(Ms + 1e-13 * np.eye(m))
            except np.linalg.LinAlgError as exc:
                raise SolverError(f"Schur complement is numerically singular at iteration {it}") from exc

        def schur_solve(r):
            return sla.cho_solve(cho_s, r / dM) / dM
        WRdW = [sc.W * r * sc.W if blk.kind == "diag" else sc.W @ r @ sc.W for blk, sc, r in zip(blocks, scal, Rd)]

        def direction(Rc_list):
            Rt = []
            for blk, sc, Rc in zip(blocks, scal, Rc_list):
                lam = sc.lam
                if blk.kind == "diag":
                    Rt.append(sc.G * (Rc / (2 * lam)) * sc.G)
                else:
                    S = Rc / (lam[:, None] + lam[None, :])
                    Rt.append(sc.G @ S @ sc.G.T)
            rhs = rp - _A_apply(std, Rt) + _A_apply(std, WRdW)
            dy = schur_solve(rhs)
            ATdy = _AT_apply(std, dy)
            dZ = [r - a for r, a in zip(Rd, ATdy)]
            dX = []
            for blk, sc, rt, dz in zip(blocks, scal, Rt, dZ):
                if blk.kind == "diag":
                    dX.append(rt - sc.W * dz * sc.W)
                else:
                    d = rt - sc.W @ dz @ sc.W
                    dX.append(0.5 * (d + d.T))
            # iterative refinement against the true primal equation
            for _ in range(_REFINE_STEPS):
                r = rp - _A_apply(std, dX)
                if np.linalg.norm(r) <= 1e-3 * tol * (1 + normb):
                    break
                cy = schur_solve(r)
                ATcy = _AT_apply(std, cy)
                dy = dy + cy
                dZ = [dz - a for dz, a in zip(dZ, ATcy)]
                for k, (blk, sc, a) in enumerate(zip(blocks, scal, ATcy)):
                    if blk.kind == "diag":
                        dX[k] = dX[k] + sc.W * a * sc.W
                    else:
                        d = sc.W @ a @ sc.W
                        dX[k] = dX[k] + 0.5 * (d + d.T)
            return dX, dy, dZ

        def steps(dX, dZ):
            ap = min([_max_step(blk, x, d, sc.LX) for blk, x, d, sc in zip(blocks, X, dX, scal)] + [np.inf])
            ad = min([_max_step(blk, z, d) for blk, z, d in zip(blocks, Z, dZ)] + [np.inf])
            return ap, ad

        Rc_aff = []
        for blk, sc in zip(blocks, scal):
            Rc_aff.append(-2 * sc.lam**2 if blk.kind == "diag" else np.diag(-2 * sc.lam**2))
        dXa, dya, dZa = direction(Rc_aff)
        ap, ad = steps(dXa, dZa)
        ap, ad = min(1.0, ap), min(1.0, ad)
        mu_aff = _inner([x + ap * d for x, d in zip(X, dXa)], [z + ad * d for z, d in zip(Z, dZa)]) / nu
        sigma = min(1.0, (max(mu_aff, 0.0) / mu) ** 3) if mu > 0 else 0.0
        # keep the barrier from collapsing while the equality residual is still large
        infeas = max(pinf, dinf)
        if infeas > tol and mu > 0:
            sigma = max(sigma, min(1.0, _MU_FLOOR * infeas * mu0 / mu))
        Rc = []
        for blk, sc, dx, dz in zip(blocks, scal, dXa, dZa):
            tx, tz = _scaled(blk, sc, dx, dz)
            if blk.kind == "diag":
                Rc.append(2 * sigma * mu - 2 * sc.lam**2 - 2 * tx * tz)
            else:
                P = tx @ tz
                Rc.append(2 * sigma * mu * np.eye(blk.n) - np.diag(2 * sc.lam**2) - (P + P.T))
        dX, dy, dZ = direction(Rc)
        ap, ad = steps(dX, dZ)
        gamma = 0.9 + 0.09 * min(1.0, ap, ad) if np.isfinite(min(ap, ad)) else 0.99
        ap = min(1.0, gamma * ap)
        ad = min(1.0, gamma * ad)
        # an inexact direction must not spoil primal feasibility already reached
        AdX = _A_apply(std, dX)
        limit = max(pinf, 0.5 * tol) * (1 + normb)
        for _ in range(30):
            if np.linalg.norm(rp - ap * AdX) <= limit:
                break
            ap *= 0.5
        if max(ap, ad) < 1e-10:
            stall += 1
            if stall >= 3:
                break
        else:
            stall = 0
        history[-1].update(alpha_p=ap, alpha_d=ad, sigma=sigma)
        X = [x + ap * d for x, d in zip(X, dX)]
        y = y + ad * dy
        Z = [z + ad * d for z, d in zip(Z, dZ)]
    return X, y, Z, status, history


def solve(problem: SdpProblem, tol: float | None = None, max_iter: int | None = None, numerics: Numerics = DEFAULT_NUMERICS) -> SdpSolution:
    """Solve ``problem``; ``status == "optimal"`` certifies residuals and relative gap within ``tol``."""
    tol = numerics.sdp_tol if tol is None else tol
    max_iter = numerics.sdp_max_iter if max_iter is None else max_iter
    std, full, coords = _to_standard(problem)
    X, y, Z, status, history = _solve_standard(std, tol, max_iter)
    space = problem.space
    xvec = full.vec(X)[: space.dim]
    # undo row scaling and map multipliers back to natural dual variables
    y_unscaled = y / std.row_scale
    Y = Zd = None
    pos = 0
    if problem.Phi is not None:
        k = coords[0].shape[0]
        Y = _dual_natural(problem.Phi.codomain, coords[0], y_unscaled[pos : pos + k])
        pos += k
    if problem.Psi is not None:
        k = coords[1].shape[0]
        Zd = _dual_natural(problem.Psi.codomain, coords[1], y_unscaled[pos : pos + k])
    last = history[-1]
    pval = problem.objective_value(xvec)
    dval = 0.0
    pos = 0
    for P, R in ((coords[0], problem.B), (coords[1], problem.C)):
        if P is None:
            continue
        k = P.shape[0]
        dval += float(y_unscaled[pos : pos + k] @ (P @ R))
        pos += k
    return SdpSolution(
        X=space.to_natural(xvec),
        Y=Y,
        Z=Zd,
        primal_value=pval,
        dual_value=dval,
        gap=abs(pval - dval),
        status=status,
        iterations=last["iter"],
        primal_residual=last["pinf"],
        dual_residual=last["dinf"],
        history=history,
        X_vec=xvec,
    )


def _dual_natural(cod: BlockSpace, coords: np.ndarray, y: np.ndarray) -> list:
    # the multiplier vector as a stored vec, rescaled so that <B, Y> = sum_k y_k B_k
    stored = (coords.T @ y) / cod.weights
    out = []
    for blk, v in zip(cod.blocks, cod.to_natural(stored)):
        out.append(v if blk.kind == "diag" else 0.5 * (v + np.conj(v).T))
    return out


# ---------------------------------------------------------------------------
# trace norm


@dataclass(frozen=True)
class TraceNormCertificate:
    P_f: np.ndarray
    Q_f: np.ndarray
    Pbar: np.ndarray
    Qbar: np.ndarray
    primal_value: float
    dual_value: float


def trace_norm_sdp(K: np.ndarray) -> SdpProblem:
    """``min Tr P + Tr Q  s.t.  P >= K, Q >= -K, P, Q >= 0`` whose optimum is ``||K||_1``."""
    K = np.asarray(K, dtype=complex)
    n = K.shape[0]
    if K.shape != (n, n) or np.max(np.abs(K - K.conj().T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(K))):
        raise ValidationError("trace_norm_sdp expects a square Hermitian matrix")
    space = BlockSpace((Block("herm", n), Block("herm", n)))
    cod = BlockSpace((Block("herm", n), Block("herm", n)))
    Psi = LinearMap.identity(space)
    Psi = LinearMap(Psi.matrix, space, cod)
    objective = space.from_natural([np.eye(n), np.eye(n)])
    C = cod.from_natural([K, -K])
    return SdpProblem(space, objective, Psi=Psi, C=C, name="trace-norm")


def trace_norm_certificate(K: np.ndarray, tol: float = 1e-12) -> TraceNormCertificate:
    """Feasible primal and dual points from the spectral projectors of ``K``.

    ``P_f = Pi_+ K Pi_+`` and ``Q_f = -Pi_- K Pi_-`` attain ``||K||_1``; the dual
    pair ``(Pi_+, Pi_-)`` reaches the same value.
    """
    K = np.asarray(K, dtype=complex)
    lam, V = np.linalg.eigh((K + K.conj().T) / 2)
    pos = lam > tol
    neg = lam < -tol
    Pp = V[:, pos] @ V[:, pos].conj().T
    Pn = V[:, neg] @ V[:, neg].conj().T
    P_f = Pp @ K @ Pp
    Q_f = -Pn @ K @ Pn
    return TraceNormCertificate(
        P_f=P_f,
        Q_f=Q_f,
        Pbar=Pp,
        Qbar=Pn,
        primal_value=float(np.trace(P_f + Q_f).real),
        dual_value=float(np.trace(Pp @ K).real - np.trace(Pn @ K).real),
    )
