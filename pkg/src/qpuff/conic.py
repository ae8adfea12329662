"""Complex semidefinite programs, realified and handed to Clarabel.

A program is built from affine expressions in real decision parameters. A
Hermitian ``n x n`` variable costs ``n^2`` real parameters. A complex
constraint ``H >= 0`` is enforced through the real symmetric embedding
``[[Re H, -Im H], [Im H, Re H]] >= 0``, which is PSD iff ``H`` is.

Example::

    prog = ConicProgram()
    lam = prog.scalar("lam", nonneg=True)
    prog.psd(lam * sigma - rho)
    prog.minimize(lam)
    res = solve(prog)
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .core import NumericalError, QpuffError

DEFAULT_TOL = 1e-8
GAP_TOL = 1e-6
_SQRT2 = math.sqrt(2.0)


def default_tol() -> float:
    """Solver tolerance, overridable through ``QPUFF_SOLVER_TOL``."""
    raw = os.environ.get("QPUFF_SOLVER_TOL")
    if raw:
        try:
            tol = float(raw)
        except ValueError as exc:
            raise QpuffError(f"QPUFF_SOLVER_TOL must be a number, got {raw!r}") from exc
        if not 0 < tol < 1:
            raise QpuffError("QPUFF_SOLVER_TOL must lie in (0, 1)")
        return tol
    return DEFAULT_TOL


class SolverError(NumericalError):
    """The backend did not return a usable optimum."""

    def __init__(self, message: str, result: "SolveResult | None" = None):
        super().__init__(message)
        self.result = result


# ---------------------------------------------------------------------------
# expressions


class Affine:
    """Affine map from the program's real parameters to a scalar or matrix.

    ``coef`` has one row per entry (row-major) and one column per parameter
    known when the expression was built; later parameters have zero weight.
    """

    __array_priority__ = 100

    def __init__(self, shape: tuple, coef: np.ndarray, const: np.ndarray):
        self.shape = tuple(shape)
        self.coef = coef
        self.const = const

    # construction helpers --------------------------------------------------
    @staticmethod
    def constant(value) -> "Affine":
        v = np.asarray(value, dtype=complex)
        return Affine(v.shape, np.zeros((v.size, 0), dtype=complex), v.reshape(-1).copy())

    @property
    def dim(self) -> int:
        return self.shape[0] if self.shape else 1

    @property
    def is_scalar(self) -> bool:
        return self.shape == ()

    def _cols(self, n: int) -> np.ndarray:
        c = self.coef
        if c.shape[1] < n:
            c = np.hstack([c, np.zeros((c.shape[0], n - c.shape[1]), dtype=complex)])
        return c

    # arithmetic --------------------------------------------------------------
    def __add__(self, other):
        other = _lift(other, self.shape)
        if other.shape != self.shape:
            raise ValueError(f"shape mismatch {self.shape} vs {other.shape}")
        n = max(self.coef.shape[1], other.coef.shape[1])
        return Affine(self.shape, self._cols(n) + other._cols(n), self.const + other.const)

    __radd__ = __add__

    def __neg__(self):
        return Affine(self.shape, -self.coef, -self.const)

    def __sub__(self, other):
        return self + (-_lift(other, self.shape))

    def __rsub__(self, other):
        return _lift(other, self.shape) - self

    def __mul__(self, other):
        if isinstance(other, Affine):
            raise TypeError("product of two affine expressions is not affine")
        other = np.asarray(other)
        if other.ndim == 0:
            return Affine(self.shape, self.coef * other, self.const * other)
        if not self.is_scalar:
            raise TypeError("use map() or congruence() for matrix products")
        m = other.astype(complex).reshape(-1)
        return Affine(other.shape, np.outer(m, self.coef[0]), m * self.const[0])

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * (1.0 / other)

    # linear maps ---------------------------------------------------------------
    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "Affine":
        """Push a linear map on matrices through the expression.

        ``fn`` must accept a stack of shape ``(k, m, m)`` and return
        ``(k, p, p)``.
        """
        m = self.dim
        n = self.coef.shape[1]
        stack = np.concatenate([self.const.reshape(1, m, m), self.coef.T.reshape(n, m, m)], axis=0)
        out = np.asarray(fn(stack))
        p = out.shape[-1]
        flat = out.reshape(n + 1, p * p)
        return Affine((p, p), flat[1:].T.copy(), flat[0].copy())

    def trace(self) -> "Affine":
        m = self.dim
        idx = np.arange(m) * (m + 1)
        return Affine((), self.coef[idx].sum(axis=0, keepdims=True), self.const[idx].sum(keepdims=True))

    def inner(self, c) -> "Affine":
        """``Tr[C X]`` for a constant matrix ``C``."""
        c = np.asarray(c, dtype=complex)
        w = c.T.reshape(-1)
        return Affine((), (w @ self.coef)[None, :], np.array([w @ self.const]))

    @property
    def H(self) -> "Affine":
        """Conjugate transpose (for scalar expressions this is the conjugate)."""
        if self.is_scalar:
            return Affine((), self.coef.conj(), self.const.conj())
        return self.map(lambda s: np.conj(np.swapaxes(s, -1, -2)))

    def real(self) -> "Affine":
        if not self.is_scalar:
            raise TypeError("real() is for scalar expressions")
        return Affine((), self.coef.real.astype(complex), self.const.real.astype(complex))

    def value(self, x: np.ndarray):
        n = self.coef.shape[1]
        v = self.coef @ x[:n] + self.const
        if self.is_scalar:
            return complex(v[0])
        return v.reshape(self.shape)


def _lift(value, shape) -> Affine:
    if isinstance(value, Affine):
        return value
    v = np.asarray(value, dtype=complex)
    if v.ndim == 0 and shape != ():
        raise ValueError("adding a scalar to a matrix expression is ambiguous; multiply by an identity")
    return Affine.constant(v)


def congruence(left, expr: Affine, right=None) -> Affine:
    """``L X R`` with constant ``L`` and ``R`` (``R`` defaults to ``L^dagger``)."""
    left = np.asarray(left, dtype=complex)
    right = left.conj().T if right is None else np.asarray(right, dtype=complex)
    return expr.map(lambda s: left @ s @ right)


def kron_const(expr: Affine, c, side: str = "right") -> Affine:
    """``X (x) C`` (``side='right'``) or ``C (x) X``."""
    c = np.asarray(c, dtype=complex)
    if side == "right":
        return expr.map(lambda s: np.stack([np.kron(x, c) for x in s]))
    return expr.map(lambda s: np.stack([np.kron(c, x) for x in s]))


# ---------------------------------------------------------------------------
# programs


@dataclass
class _Block:
    name: str
    kind: str          # "free", "nonneg", "hermitian"
    start: int
    size: int
    dim: int = 1


@dataclass
class _Constraint:
    name: str
    kind: str          # "zero", "nonneg", "psd"
    rows: np.ndarray   # real coefficient rows G (row-major per entry)
    offset: np.ndarray # real constants h; constraint is G x + h in K
    dim: int = 0       # embedding dimension for psd
    complex_dim: int = 0


class ConicProgram:
    """A linear objective over affine zero, nonnegative and PSD constraints."""

    def __init__(self, name: str = "program"):
        self.name = name
        self.nvars = 0
        self.blocks: list[_Block] = []
        self.constraints: list[_Constraint] = []
        self.objective: Affine | None = None
        self.sense = "min"

    # variables -----------------------------------------------------------------
    def _alloc(self, k: int) -> int:
        start = self.nvars
        self.nvars += k
        return start

    def scalar(self, name: str, nonneg: bool = False) -> Affine:
        start = self._alloc(1)
        coef = np.zeros((1, self.nvars), dtype=complex)
        coef[0, start] = 1
        expr = Affine((), coef, np.zeros(1, dtype=complex))
        self.blocks.append(_Block(name, "nonneg" if nonneg else "free", start, 1))
        if nonneg:
            self.ge(expr, 0, name=f"{name}>=0")
        return expr

    def hermitian(self, name: str, dim: int, psd: bool = True) -> Affine:
        """A Hermitian ``dim x dim`` variable, PSD-constrained by default."""
        start = self._alloc(dim * dim)
        coef = np.zeros((dim * dim, self.nvars), dtype=complex)
        k = start
        for i in range(dim):
            coef[i * dim + i, k] = 1
            k += 1
        for i in range(dim):
            for j in range(i + 1, dim):
                coef[i * dim + j, k] = 1
                coef[j * dim + i, k] = 1
                coef[i * dim + j, k + 1] = 1j
                coef[j * dim + i, k + 1] = -1j
                k += 2
        expr = Affine((dim, dim), coef, np.zeros(dim * dim, dtype=complex))
        self.blocks.append(_Block(name, "hermitian", start, dim * dim, dim))
        if psd:
            self.psd(expr, name=f"{name}>=0")
        return expr

    # constraints -----------------------------------------------------------------
    def _scalar_rows(self, expr: Affine):
        if not expr.is_scalar:
            raise ValueError("expected a scalar expression")
        c = expr._cols(self.nvars)
        return c.real.copy(), expr.const.real.copy()

    def eq(self, lhs, rhs=0, name: str | None = None):
        """``lhs == rhs`` for scalar or Hermitian expressions."""
        expr = _as_expr(lhs) - _lift(rhs, _as_expr(lhs).shape)
        name = name or f"eq{len(self.constraints)}"
        if expr.is_scalar:
            g, h = self._scalar_rows(expr)
        else:
            m = expr.dim
            c = expr._cols(self.nvars)
            rows, offs = [], []
            for i in range(m):
                for j in range(i, m):
                    r = i * m + j
                    rows.append(c[r].real)
                    offs.append(expr.const[r].real)
                    if i != j:
                        rows.append(c[r].imag)
                        offs.append(expr.const[r].imag)
            g, h = np.array(rows), np.array(offs)
        self.constraints.append(_Constraint(name, "zero", np.atleast_2d(g), np.atleast_1d(h)))

    def ge(self, lhs, rhs=0, name: str | None = None):
        """``lhs >= rhs``: scalar inequality, or ``lhs - rhs`` PSD for matrices."""
        expr = _as_expr(lhs) - _lift(rhs, _as_expr(lhs).shape)
        name = name or f"ge{len(self.constraints)}"
        if expr.is_scalar:
            g, h = self._scalar_rows(expr)
            self.constraints.append(_Constraint(name, "nonneg", g, h))
        else:
            self.psd(expr, name)

    def le(self, lhs, rhs=0, name: str | None = None):
        rhs_expr = _lift(rhs, _as_expr(lhs).shape) if not isinstance(rhs, Affine) else rhs
        self.ge(rhs_expr, lhs, name)

    def psd(self, expr: Affine, name: str | None = None):
        """Require the Hermitian expression to be positive semidefinite."""
        name = name or f"psd{len(self.constraints)}"
        if expr.is_scalar:
            self.ge(expr.real(), 0, name)
            return
        m = expr.dim
        c = expr._cols(self.nvars)
        n2 = 2 * m
        rows, offs = [], []
        for j in range(n2):
            for i in range(j + 1):
                bi, bj, ii, jj = i // m, j // m, i % m, j % m
                r = ii * m + jj
                if bi == bj:
                    g, h = c[r].real, expr.const[r].real
                elif bi == 0:
                    g, h = -c[r].imag, -expr.const[r].imag
                else:
                    g, h = c[r].imag, expr.const[r].imag
                s = 1.0 if i == j else _SQRT2
                rows.append(s * g)
                offs.append(s * h)
        self.constraints.append(_Constraint(name, "psd", np.array(rows), np.array(offs), dim=n2, complex_dim=m))

    # objective -------------------------------------------------------------------
    def minimize(self, expr):
        self.objective, self.sense = _as_expr(expr), "min"

    def maximize(self, expr):
        self.objective, self.sense = _as_expr(expr), "max"

    # export ----------------------------------------------------------------------
    def dump(self) -> str:
        """Plain-text CBF (conic benchmark format, version 3) rendering."""
        lines = ["VER", "3", "", "OBJSENSE", self.sense.upper(), "", "VAR", f"{self.nvars} 1", f"F {self.nvars}", ""]
        scalar = [c for c in self.constraints if c.kind != "psd"]
        psd = [c for c in self.constraints if c.kind == "psd"]
        if scalar:
            groups = []
            for c in scalar:
                tag = "L=" if c.kind == "zero" else "L+"
                if groups and groups[-1][0] == tag:
                    groups[-1][1] += len(c.offset)
                else:
                    groups.append([tag, len(c.offset)])
            total = sum(g[1] for g in groups)
            lines += ["CON", f"{total} {len(groups)}"] + [f"{t} {k}" for t, k in groups] + [""]
        if psd:
            lines += ["PSDCON", str(len(psd))] + [str(c.dim) for c in psd] + [""]
        obj = self.objective._cols(self.nvars)[0].real if self.objective is not None else np.zeros(self.nvars)
        nz = np.flatnonzero(obj)
        lines += ["OBJACOORD", str(len(nz))] + [f"{j} {obj[j]:.17g}" for j in nz] + [""]
        if self.objective is not None and self.objective.const[0].real != 0:
            lines += ["OBJBCOORD", f"{self.objective.const[0].real:.17g}", ""]
        acoord, bcoord, row = [], [], 0
        for c in scalar:
            for g, h in zip(c.rows, c.offset):
                acoord += [f"{row} {j} {g[j]:.17g}" for j in np.flatnonzero(g)]
                if h != 0:
                    bcoord.append(f"{row} {h:.17g}")
                row += 1
        if acoord:
            lines += ["ACOORD", str(len(acoord))] + acoord + [""]
        if bcoord:
            lines += ["BCOORD", str(len(bcoord))] + bcoord + [""]
        hco, dco = [], []
        for k, c in enumerate(psd):
            idx = 0
            for j in range(c.dim):
                for i in range(j + 1):
                    s = 1.0 if i == j else _SQRT2
                    g, h = c.rows[idx] / s, c.offset[idx] / s
                    # CBF stores the lower triangle: (row, col) = (j, i)
                    hco += [f"{k} {v} {j} {i} {g[v]:.17g}" for v in np.flatnonzero(g)]
                    if h != 0:
                        dco.append(f"{k} {j} {i} {h:.17g}")
                    idx += 1
        if hco:
            lines += ["HCOORD", str(len(hco))] + hco + [""]
        if dco:
            lines += ["DCOORD", str(len(dco))] + dco + [""]
        return "\n".join(lines)


def _as_expr(value) -> Affine:
    return value if isinstance(value, Affine) else Affine.constant(value)


# ---------------------------------------------------------------------------
# solving


@dataclass
class SolveResult:
    status: str                       # optimal, infeasible, unbounded, numerical-failure
    primal: float | None
    dual: float | None
    x: np.ndarray | None = field(default=None, repr=False)
    gap: float | None = None
    iterations: int = 0
    backend_status: str = ""
    duals: dict = field(default_factory=dict, repr=False)

    @property
    def ok(self) -> bool:
        return self.status == "optimal"

    def value(self, expr: Affine):
        if self.x is None:
            raise SolverError(f"no solution available (status {self.status})", self)
        v = expr.value(self.x)
        if isinstance(v, complex):
            return v.real
        return (v + v.conj().T) / 2

    def require(self) -> "SolveResult":
        if not self.ok:
            raise SolverError(f"solver returned {self.status} ({self.backend_status})", self)
        return self


_STATUS = {
    "Solved": "optimal",
    "AlmostSolved": "optimal",
    "PrimalInfeasible": "infeasible",
    "AlmostPrimalInfeasible": "infeasible",
    "DualInfeasible": "unbounded",
    "AlmostDualInfeasible": "unbounded",
}


_REFINE = {
    "iterative_refinement_max_iter": 50,
    "iterative_refinement_reltol": 1e-15,
    "iterative_refinement_abstol": 1e-15,
}


def _svec_to_hermitian(z: np.ndarray, n2: int) -> np.ndarray:
    s = np.zeros((n2, n2))
    idx = 0
    for j in range(n2):
        for i in range(j + 1):
            v = z[idx] if i == j else z[idx] / _SQRT2
            s[i, j] = s[j, i] = v
            idx += 1
    m = n2 // 2
    return (s[:m, :m] + s[m:, m:]) + 1j * (s[m:, :m] - s[:m, m:])


def realify(h) -> np.ndarray:
    """Real symmetric embedding ``[[Re H, -Im H], [Im H, Re H]]``."""
    h = np.asarray(h, dtype=complex)
    return np.block([[h.real, -h.imag], [h.imag, h.real]])


def solve(program: ConicProgram, tol: float | None = None, max_iter: int = 500, verbose: bool = False,
          **backend_settings) -> SolveResult:
    """Solve with Clarabel; never raises on infeasibility, check ``status``.

    Extra keyword arguments are passed to ``clarabel.DefaultSettings``.
    """
    import clarabel

    tol = default_tol() if tol is None else tol
    n = program.nvars
    if program.objective is None:
        raise QpuffError("program has no objective")
    obj = program.objective._cols(n)[0].real
    offset = program.objective.const[0].real
    sign = 1.0 if program.sense == "min" else -1.0

    # order cones: zero, nonneg, psd (Clarabel accepts any order, grouping is tidier)
    ordered = sorted(program.constraints, key=lambda c: {"zero": 0, "nonneg": 1, "psd": 2}[c.kind])
    blocks, cones, spans = [], [], {}
    row = 0
    for c in ordered:
        g = c.rows if c.rows.shape[1] == n else np.hstack([c.rows, np.zeros((c.rows.shape[0], n - c.rows.shape[1]))])
        blocks.append((g, c.offset))
        k = len(c.offset)
        if c.kind == "zero":
            cones.append(clarabel.ZeroConeT(k))
        elif c.kind == "nonneg":
            cones.append(clarabel.NonnegativeConeT(k))
        else:
            cones.append(clarabel.PSDTriangleConeT(c.dim))
        spans[c.name] = (row, row + k, c)
        row += k
    if blocks:
        g_all = np.vstack([b[0] for b in blocks])
        h_all = np.concatenate([b[1] for b in blocks])
    else:
        g_all = np.zeros((0, n))
        h_all = np.zeros(0)

    a_mat = sp.csc_matrix(-g_all)
    p_mat = sp.csc_matrix((n, n))
    q_vec = sign * obj

    def run(extra):
        settings = clarabel.DefaultSettings()
        settings.verbose = verbose
        settings.tol_gap_abs = tol
        settings.tol_gap_rel = tol
        settings.tol_feas = tol
        settings.tol_infeas_abs = tol
        settings.tol_infeas_rel = tol
        settings.max_iter = max_iter
        for key, val in {**backend_settings, **extra}.items():
            setattr(settings, key, val)
        return clarabel.DefaultSolver(p_mat, q_vec, a_mat, h_all, cones, settings).solve()

    def rel_gap(sol):
        return abs(sol.obj_val - sol.obj_val_dual) / (1 + abs(sol.obj_val))

    try:
        sol = run({})
        if str(sol.status) == "AlmostSolved":
            # a stalled step is usually a KKT accuracy problem; refine harder once
            retry = run(_REFINE)
            if str(retry.status) == "Solved" or (
                    str(retry.status) == "AlmostSolved" and rel_gap(retry) < rel_gap(sol)):
                sol = retry
    except Exception as exc:  # backend raised (bad data, panic)
        return SolveResult("numerical-failure", None, None, backend_status=f"exception: {exc}")

    raw = str(sol.status)
    status = _STATUS.get(raw, "numerical-failure")
    if status != "optimal":
        return SolveResult(status, None, None, iterations=sol.iterations, backend_status=raw)
    x = np.asarray(sol.x)
    z = np.asarray(sol.z)
    primal = sign * sol.obj_val + offset
    dual = sign * sol.obj_val_dual + offset
    gap = abs(primal - dual)
    duals = {}
    for name, (r0, r1, c) in spans.items():
        seg = z[r0:r1]
        duals[name] = _svec_to_hermitian(seg, c.dim) if c.kind == "psd" else seg.copy()
    res = SolveResult(status, float(primal), float(dual), x=x, gap=float(gap), iterations=sol.iterations,
                      backend_status=raw, duals=duals)
    if gap > max(GAP_TOL, 10 * tol) * (1 + abs(primal)):
        res.status = "numerical-failure"
        res.backend_status = f"{raw}; duality gap {gap:.3g} exceeds tolerance"
    return res
