"""Utility of a mechanism measured by how well its action can be undone.

``U(A) = 1 - min_B (1/2) ||id - B o A||_diamond`` with ``B`` ranging over
channels from the mechanism output back to the input space. The diamond
norm is evaluated through its dual program: for a Hermitian-preserving
difference with Choi ``J``, ``(1/2)||.||_diamond = min mu`` subject to
``Z >= J``, ``Z >= 0`` and ``mu I >= Tr_out Z``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import conic
from .core import (
    QuantumChannel,
    ValidationError,
    as_state,
    link_choi,
    max_entangled_choi,
    partial_trace,
)
from .divergence import dl_divergence
from .framework import PrivacyBudget
from .mechanism import calibrate_p

UTILITY_SLACK = 1e-7


@dataclass
class UtilityResult:
    utility: float
    recovery_choi: np.ndarray | None = field(default=None, repr=False)
    method: str = "sdp"
    gap: float | None = None

    def __post_init__(self):
        if not -1e-7 <= self.utility <= 1 + 1e-7:
            raise ValidationError(f"utility {self.utility} outside [0, 1]")
        self.utility = min(1.0, max(0.0, self.utility))

    def to_dict(self) -> dict:
        return {"utility": self.utility, "method": self.method, "gap": self.gap}


def _trace_out(stack: np.ndarray, din: int, dout: int) -> np.ndarray:
    return partial_trace(stack, (din, dout), 0)


def _apply_batched(stack: np.ndarray, rho: np.ndarray, din: int, dout: int) -> np.ndarray:
    """Apply each Choi in a stack to ``rho``."""
    k = stack.shape[0]
    return np.einsum("ab,kacbd->kcd", rho, stack.reshape(k, din, dout, din, dout))


def _half_diamond_dual(prog: conic.ConicProgram, diff: conic.Affine, din: int, dout: int, mu):
    """Add ``Z >= diff``, ``Z >= 0``, ``mu I >= Tr_out Z`` to ``prog``."""
    z = prog.hermitian("Z", din * dout)
    prog.psd(z - diff, name="Z>=J")
    prog.psd(mu * np.eye(din) - z.map(lambda s: _trace_out(s, din, dout)), name="mu>=TrZ")
    return z


def _check_pair(n: QuantumChannel, m: QuantumChannel):
    if (n.dim_in, n.dim_out) != (m.dim_in, m.dim_out):
        raise ValidationError("channels must share input and output dims")


def diamond_distance(n: QuantumChannel, m: QuantumChannel, method: str = "dual") -> float:
    """``||N - M||_diamond`` (range ``[0, 2]``).

    ``method='dual'`` minimizes ``mu`` as in the module docstring.
    ``method='primal'`` maximizes ``<J, W>`` over ``0 <= W <= rho (x) I``
    with ``rho`` a state. Both report twice the optimal value.
    """
    _check_pair(n, m)
    din, dout = n.dim_in, n.dim_out
    j = n.choi - m.choi
    prog = conic.ConicProgram(f"diamond-{method}")
    if method == "dual":
        mu = prog.scalar("mu", nonneg=True)
        _half_diamond_dual(prog, conic.Affine.constant(j), din, dout, mu)
        prog.minimize(mu)
    elif method == "primal":
        w = prog.hermitian("W", din * dout)
        rho = prog.hermitian("rho", din)
        prog.eq(rho.trace().real(), 1, name="trace")
        prog.psd(conic.kron_const(rho, np.eye(dout)) - w, name="W<=rho")
        prog.maximize(w.inner(j).real())
    else:
        raise ValidationError(f"unknown method {method!r}")
    return 2 * max(0.0, conic.solve(prog).require().primal)


def _recovery_constraints(prog, gb: conic.Affine, dc: int, dd: int):
    prog.eq(gb.map(lambda s: _trace_out(s, dc, dd)), np.eye(dc), name="TP")


def utility(a: QuantumChannel) -> UtilityResult:
    """Optimal recovery utility, optimizing the recovery channel jointly."""
    da, dc = a.dim_in, a.dim_out
    dd = da
    prog = conic.ConicProgram("utility")
    mu = prog.scalar("mu", nonneg=True)
    gb = prog.hermitian("GammaB", dc * dd)
    _recovery_constraints(prog, gb, dc, dd)
    composed = gb.map(lambda s: link_choi(a.choi, s, (da, dc, dd)))
    _half_diamond_dual(prog, conic.Affine.constant(max_entangled_choi(da)) - composed, da, dd, mu)
    prog.minimize(mu)
    res = conic.solve(prog).require()
    return UtilityResult(1 - res.primal, res.value(gb), "sdp", res.gap)


def depolarization_utility(d: int, p: float) -> float:
    """``1 - p (d^2 - 1) / d^2``; the identity recovery is optimal."""
    if not 0 <= p <= 1:
        raise ValidationError(f"p must lie in [0, 1], got {p}")
    return 1 - p * (d * d - 1) / (d * d)


def depolarization_diamond(d: int, p: float) -> float:
    """``||id - A_dep^p||_diamond = 2 p (1 - 1/d^2)``."""
    return 2 * p * (1 - 1 / (d * d))


# ---------------------------------------------------------------------------
# optimal tradeoffs


@dataclass
class OptimalUtility:
    utility: float
    mechanism: QuantumChannel | None
    budget: PrivacyBudget
    status: str = "optimal"

    def to_dict(self) -> dict:
        return {"utility": self.utility, "budget": self.budget.to_dict(), "status": self.status}


def _pair_states(pair):
    r1, r2 = (as_state(x) for x in pair)
    if r1.shape != r2.shape:
        raise ValidationError("the two states must share a dimension")
    return r1, r2


def optimal_utility(pair, budget: PrivacyBudget) -> OptimalUtility:
    """Best utility of a mechanism private for the pair in both orders.

    The utility of ``A`` is attained by some ``B o A``, and ``B o A`` is as
    private as ``A``; conversely any private channel ``C`` is ``B o A`` with
    ``A = C`` and ``B`` the identity. Hence the optimum is a single convex
    program over the composed channel ``C`` from the input space to itself,
    with the privacy constraints at ``lam = e^eps`` (the constraints only
    loosen as ``lam`` grows). The returned mechanism is that ``C``.
    """
    r1, r2 = _pair_states(pair)
    d = r1.shape[0]
    if math.isinf(budget.eps):
        return OptimalUtility(1.0, QuantumChannel.identity(d), budget)
    lam = math.exp(budget.eps)
    prog = conic.ConicProgram("optimal-utility")
    mu = prog.scalar("mu", nonneg=True)
    gc = prog.hermitian("GammaC", d * d)
    _recovery_constraints(prog, gc, d, d)
    _half_diamond_dual(prog, conic.Affine.constant(max_entangled_choi(d)) - gc, d, d, mu)
    out1 = gc.map(lambda s: _apply_batched(s, r1, d, d))
    out2 = gc.map(lambda s: _apply_batched(s, r2, d, d))
    for k, (x, y) in enumerate(((out1, out2), (out2, out1)), start=1):
        if budget.delta == 0:
            prog.psd(lam * y - x, name=f"private{k}")
        elif budget.delta < 1:
            yk = prog.hermitian(f"Y{k}", d)
            prog.le(yk.trace().real(), budget.delta, name=f"budget{k}")
            prog.psd(yk - (x - lam * y), name=f"private{k}")
    prog.minimize(mu)
    res = conic.solve(prog)
    if res.status == "infeasible":
        return OptimalUtility(math.nan, None, budget, "infeasible")
    res.require()
    choi = res.value(gc)
    # project the numerical solution back onto exact trace preservation
    tp = _trace_out(choi[None], d, d)[0]
    fix = np.kron(np.linalg.inv(np.linalg.cholesky(tp)), np.eye(d))
    choi = fix @ choi @ fix.conj().T
    return OptimalUtility(min(1.0, max(0.0, 1 - res.primal)), QuantumChannel(d, d, choi), budget)


@dataclass
class OptimalEps:
    eps: float
    status: str
    lambdas: tuple = ()
    utility: float | None = None

    def to_dict(self) -> dict:
        eps = self.eps if math.isfinite(self.eps) else ("inf" if self.eps > 0 else None)
        return {"eps": eps, "status": self.status, "lambdas": list(self.lambdas), "utility": self.utility}


def _min_lambda(a: QuantumChannel, x_in, y_in, gamma: float, delta: float):
    """Smallest ``lam`` with the order ``(x, y)`` private and utility at least ``gamma``."""
    da, dc = a.dim_in, a.dim_out
    x, y = a(x_in), a(y_in)
    prog = conic.ConicProgram("optimal-eps")
    lam = prog.scalar("lam", nonneg=True)
    gb = prog.hermitian("GammaB", dc * da)
    _recovery_constraints(prog, gb, dc, da)
    composed = gb.map(lambda s: link_choi(a.choi, s, (da, dc, da)))
    _half_diamond_dual(prog, conic.Affine.constant(max_entangled_choi(da)) - composed, da, da,
                       1 - gamma + UTILITY_SLACK)
    if delta == 0:
        prog.psd(lam * y - x, name="private")
    else:
        yv = prog.hermitian("Y", dc)
        prog.le(yv.trace().real(), delta, name="budget")
        prog.psd(yv - (x - lam * y), name="private")
    prog.minimize(lam)
    res = conic.solve(prog)
    if res.status == "infeasible":
        return math.inf
    return res.require().primal


def optimal_eps(a: QuantumChannel, gamma: float, delta: float, pair) -> OptimalEps:
    """Least eps for which ``a`` is (eps, delta)-private on the pair, given utility ``gamma``.

    The utility of ``a`` is checked first; if it falls short of ``gamma``
    the status is ``infeasible``. Otherwise the two programs (one per order)
    are solved and ``eps = ln max(lam_1, lam_2)``, which is ``inf`` when no
    finite ``lam`` works.
    """
    if not 0 <= gamma <= 1:
        raise ValidationError(f"gamma must lie in [0, 1], got {gamma}")
    if not 0 <= delta <= 1:
        raise ValidationError(f"delta must lie in [0, 1], got {delta}")
    r1, r2 = _pair_states(pair)
    if r1.shape[0] != a.dim_in:
        raise ValidationError("pair dimension does not match the mechanism input")
    u = utility(a).utility
    if u < gamma - 1e-6:
        return OptimalEps(math.nan, "infeasible", (), u)
    if delta >= 1:
        return OptimalEps(-math.inf, "optimal", (0.0, 0.0), u)
    lams = (_min_lambda(a, r1, r2, gamma, delta), _min_lambda(a, r2, r1, gamma, delta))
    top = max(lams)
    eps = math.inf if math.isinf(top) else (math.log(top) if top > 0 else -math.inf)
    return OptimalEps(eps, "optimal", lams, u)


def optimal_eps_decoupled(a: QuantumChannel, gamma: float, delta: float, pair) -> float:
    """Same quantity from the divergence module: the constraints share no variables.

    The recovery only enters the utility constraint and ``lam`` only enters
    the privacy constraint, so the optimum is the larger information-spectrum
    divergence between the two outputs whenever the utility target is met.
    """
    r1, r2 = _pair_states(pair)
    if utility(a).utility < gamma - 1e-6:
        return math.nan
    if delta >= 1:
        return -math.inf
    x, y = a(r1), a(r2)
    return max(dl_divergence(x, y, delta).value, dl_divergence(y, x, delta).value)


# ---------------------------------------------------------------------------
# depolarization frontier

FRONTIER_COLUMNS = ("eps", "K", "d", "p", "gamma")


def frontier(eps_grid, ks=(0.25, 0.5, 1.0), d: int = 2) -> list[dict]:
    """Utility of the calibrated depolarization along an eps grid, per ``K``."""
    rows = []
    for k in ks:
        for eps in eps_grid:
            p = calibrate_p(d, float(k), float(eps))
            rows.append({"eps": float(eps), "K": float(k), "d": int(d), "p": p,
                         "gamma": depolarization_utility(d, p)})
    return rows


def frontier_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=FRONTIER_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: r[k] for k in FRONTIER_COLUMNS})
    return buf.getvalue()
