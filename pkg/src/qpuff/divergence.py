"""Quantum divergences with spectral evaluations and SDP counterparts.

The information-spectrum divergence here is the upper form

    D^delta(rho || sigma) = ln inf{lam >= 0 : Tr[(rho - lam sigma)_+] <= delta},

computed either by bisection on the monotone map ``lam -> Tr[(rho - lam
sigma)_+]`` or by the matching SDP pair. All values are natural logarithms.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import conic
from .core import (
    NumericalError,
    ValidationError,
    as_hermitian,
    as_psd,
    eigh,
    matrix_function,
    positive_part_trace,
    trace_norm,
)

BISECTION_TOL = 1e-9
BRACKET_CAP = math.exp(50)
SUPPORT_FLOOR = 1e-12
SUPPORT_TOL = 1e-8


@dataclass
class DivergenceValue:
    """An extended-real divergence together with how it was obtained.

    ``primal`` and ``dual`` hold the optimal values in linear (lambda) space
    when an SDP was solved; ``witness`` holds an optimizer when available.
    """

    value: float
    method: str
    witness: object = field(default=None, repr=False)
    primal: float | None = None
    dual: float | None = None
    status: str = ""

    def __float__(self) -> float:
        return float(self.value)

    @property
    def gap(self) -> float | None:
        """Relative duality gap ``|primal - dual| / (1 + |primal|)``."""
        if self.primal is None or self.dual is None:
            return None
        return abs(self.primal - self.dual) / (1 + abs(self.primal))


def _pair(rho, sigma):
    rho = as_psd(rho)
    sigma = as_psd(sigma)
    if rho.shape != sigma.shape:
        raise ValidationError(f"dimension mismatch {rho.shape} vs {sigma.shape}")
    return rho, sigma


def _check_delta(delta: float, lo_open: bool = False) -> float:
    delta = float(delta)
    if not (0 <= delta < 1) or (lo_open and delta == 0):
        raise ValidationError(f"delta must lie in {'(0, 1)' if lo_open else '[0, 1)'}, got {delta}")
    return delta


def _log(lam: float) -> float:
    if lam <= 0:
        return -math.inf
    return math.log(lam)


# ---------------------------------------------------------------------------
# support helpers


def support_projector(a, floor: float = SUPPORT_FLOOR) -> np.ndarray:
    w, v = eigh(np.asarray(a, dtype=complex))
    keep = v[:, w > floor]
    return keep @ keep.conj().T


def support_contained(rho, sigma) -> bool:
    """True when ``supp(rho)`` lies inside ``supp(sigma)`` (projector test)."""
    p = support_projector(sigma)
    q = np.eye(p.shape[0]) - p
    return float(np.linalg.norm(q @ rho @ q, 2)) <= SUPPORT_TOL


def _rescaled(solver, rho, sigma, *args) -> DivergenceValue:
    """Run an SDP in lambda-space, re-solving with ``sigma`` rescaled when needed.

    Interior-point accuracy degrades when the optimal ``lam`` is far from 1.
    A second solve with ``sigma`` replaced by ``lam_1 sigma`` puts the optimum
    near 1; the logarithm of the scale is added back.
    """
    first = solver(rho, sigma, *args)
    if first.primal is None or not math.isfinite(first.value) or 0.5 <= first.primal <= 2:
        return _converged(first)
    if first.status == "Solved":
        return first
    c = first.primal
    second = solver(rho, c * sigma, *args)
    if second.primal is None:
        return _converged(first)
    second = DivergenceValue(second.value + math.log(c), second.method, witness=second.witness,
                             primal=second.primal * c, dual=second.dual * c, status=second.status)
    return _converged(second if second.gap <= first.gap else first)


UNCONVERGED = "unconverged"


def _usable(res: conic.SolveResult) -> str:
    """Backend status of a result worth keeping; a loose-gap solve is kept for rescaling."""
    if res.status == "numerical-failure" and res.primal is not None and res.x is not None:
        return f"{UNCONVERGED}: {res.backend_status}"
    res.require()
    return res.backend_status


def _converged(v: DivergenceValue) -> DivergenceValue:
    if v.status.startswith(UNCONVERGED):
        raise NumericalError(f"SDP did not reach the gap tolerance even after rescaling ({v.status})")
    return v


# ---------------------------------------------------------------------------
# max-relative entropy


def dmax(rho, sigma, method: str = "spectral") -> DivergenceValue:
    """``ln inf{lam : rho <= lam sigma}``; +inf when the support condition fails."""
    rho, sigma = _pair(rho, sigma)
    if method == "sdp":
        return _rescaled(_dmax_sdp, rho, sigma)
    if method != "spectral":
        raise ValidationError(f"unknown method {method!r}")
    if not support_contained(rho, sigma):
        return DivergenceValue(math.inf, "spectral")
    w, v = eigh(sigma)
    keep = w > SUPPORT_FLOOR
    vk = v[:, keep]
    inv_sqrt = vk / np.sqrt(w[keep])
    m = inv_sqrt.conj().T @ rho @ inv_sqrt
    lam = float(eigh((m + m.conj().T) / 2)[0][-1])
    return DivergenceValue(_log(lam), "spectral", witness=lam)


def _dmax_sdp(rho, sigma) -> DivergenceValue:
    prog = conic.ConicProgram("dmax")
    lam = prog.scalar("lam", nonneg=True)
    prog.psd(lam * sigma - rho, name="order")
    prog.minimize(lam)
    res = conic.solve(prog)
    if res.status == "infeasible":
        return DivergenceValue(math.inf, "sdp")
    status = _usable(res)
    return DivergenceValue(_log(res.primal), "sdp", witness=res.primal, primal=res.primal, dual=res.dual,
                           status=status)


def thompson(rho, sigma) -> float:
    """Symmetrized max-relative entropy."""
    return max(dmax(rho, sigma).value, dmax(sigma, rho).value)


# ---------------------------------------------------------------------------
# hockey-stick


def hockey_stick(rho, sigma, gamma: float, check: bool = True) -> float:
    """``E_gamma(rho || sigma) = Tr[(rho - gamma sigma)_+]`` for ``gamma >= 1``.

    For unit-trace inputs the trace-norm form ``||rho - gamma sigma||_1 / 2 +
    (1 - gamma)/2`` is evaluated too and must agree.
    """
    gamma = float(gamma)
    if not gamma >= 1:
        raise ValidationError(f"hockey-stick parameter must be >= 1, got {gamma}")
    rho, sigma = _pair(rho, sigma)
    diff = rho - gamma * sigma
    w = eigh(diff)[0]
    value = float(np.sum(w[w >= 0]))
    if check and abs(np.trace(rho).real - 1) < 1e-9 and abs(np.trace(sigma).real - 1) < 1e-9:
        alt = 0.5 * float(np.sum(np.abs(w))) + (1 - gamma) / 2
        if abs(alt - value) > 1e-8 * max(1.0, gamma):
            raise NumericalError(f"hockey-stick forms disagree ({value} vs {alt})")
    return max(0.0, value)


def hockey_stick_trace_norm(rho, sigma, gamma: float) -> float:
    """The trace-norm expression ``||rho - gamma sigma||_1 / 2 + (1 - gamma)/2``."""
    return 0.5 * trace_norm(np.asarray(rho) - gamma * np.asarray(sigma)) + (1 - gamma) / 2


# ---------------------------------------------------------------------------
# information-spectrum divergence


def _spectral_dl(rho, sigma, delta) -> DivergenceValue:
    if delta == 0:
        d = dmax(rho, sigma)
        return DivergenceValue(d.value, "spectral", witness=d.witness)

    def f(lam):
        return positive_part_trace(rho - lam * sigma)

    dm = dmax(rho, sigma)
    if math.isfinite(dm.value):
        hi = math.exp(dm.value) * (1 + 1e-12) + 1e-15
    else:
        hi = 1.0
        while f(hi) > delta:
            hi *= 2
            if hi > BRACKET_CAP:
                return DivergenceValue(math.inf, "spectral")
    lo = 0.0
    if f(lo) <= delta:
        return DivergenceValue(-math.inf, "spectral", witness=0.0)
    # the contract is |hi - lo| <= 1e-9; also stop on a relative 1e-12 so
    # the logarithm stays accurate for small lambda
    for _ in range(400):
        if hi - lo <= min(BISECTION_TOL, 1e-12 * hi):
            break
        mid = 0.5 * (lo + hi)
        if f(mid) <= delta:
            hi = mid
        else:
            lo = mid
    return DivergenceValue(_log(hi), "spectral", witness=hi)


def _sdp_dl(rho, sigma, delta) -> DivergenceValue:
    n = rho.shape[0]
    prog = conic.ConicProgram("dl-primal")
    lam = prog.scalar("lam", nonneg=True)
    z = prog.hermitian("Z", n)
    prog.le(z.trace(), delta, name="budget")
    prog.psd(z - (rho - lam * sigma), name="dominate")
    prog.minimize(lam)
    res = conic.solve(prog)
    if res.status == "infeasible":
        return DivergenceValue(math.inf, "sdp")
    status = _usable(res)
    return DivergenceValue(_log(res.primal), "sdp", witness=res.duals.get("dominate"), primal=res.primal, dual=res.dual,
                           status=status)


def dl_divergence(rho, sigma, delta: float, method: str = "spectral") -> DivergenceValue:
    """Information-spectrum divergence (upper form), in nats.

    ``method='spectral'`` bisects on ``lam`` to 1e-9; ``method='sdp'`` solves
    the primal program (variables ``lam``, ``Z``) and reports its dual value.
    ``sigma`` may be any PSD operator, not only a state.
    """
    rho, sigma = _pair(rho, sigma)
    delta = _check_delta(delta)
    if method == "spectral":
        return _spectral_dl(rho, sigma, delta)
    if method == "sdp":
        return _rescaled(_sdp_dl, rho, sigma, delta)
    raise ValidationError(f"unknown method {method!r}")


def dl_divergence_underline(rho, sigma, delta: float, method: str = "spectral") -> DivergenceValue:
    """Lower form, equal to the upper form at ``1 - delta``; ``delta`` in (0, 1]."""
    delta = float(delta)
    if not 0 < delta <= 1:
        raise ValidationError(f"delta must lie in (0, 1], got {delta}")
    return dl_divergence(rho, sigma, 1 - delta, method)


def dl_divergence_w_form(rho, sigma, delta: float) -> DivergenceValue:
    """Test-operator form ``ln sup (Tr[W rho] - delta)/Tr[W sigma]`` over ``0 <= W <= I``.

    Solved through the equivalent program in ``(mu, W)``:
    ``sup Tr[W rho] - mu delta`` s.t. ``Tr[W sigma] <= 1``, ``0 <= W <= mu I``.
    """
    rho, sigma = _pair(rho, sigma)
    delta = _check_delta(delta, lo_open=True)
    return _rescaled(_w_form_sdp, rho, sigma, delta)


def _w_form_sdp(rho, sigma, delta) -> DivergenceValue:
    n = rho.shape[0]
    prog = conic.ConicProgram("dl-dual")
    mu = prog.scalar("mu", nonneg=True)
    w = prog.hermitian("W", n)
    prog.le(w.inner(sigma).real(), 1, name="normalization")
    prog.psd(mu * np.eye(n) - w, name="cap")
    prog.maximize(w.inner(rho).real() - delta * mu)
    res = conic.solve(prog)
    if res.status == "unbounded":
        return DivergenceValue(math.inf, "sdp")
    status = _usable(res)
    wopt = res.value(w)
    mu_opt = res.value(mu)
    witness = wopt / mu_opt if mu_opt > 0 else wopt
    return DivergenceValue(_log(res.primal), "sdp", witness=witness, primal=res.primal, dual=res.dual,
                           status=status)


def dl_sup_form(rho, sigma, delta: float) -> float:
    """``ln sup{lam : Tr[(rho - lam sigma)_+] >= 1 - delta}`` by bisection from below."""
    rho, sigma = _pair(rho, sigma)
    target = 1 - float(delta)

    def f(lam):
        return positive_part_trace(rho - lam * sigma)

    if f(0.0) < target:
        return -math.inf
    lo, hi = 0.0, 1.0
    while f(hi) >= target:
        lo = hi
        hi *= 2
        if hi > BRACKET_CAP:
            return math.inf
    while hi - lo > min(BISECTION_TOL, 1e-12 * hi):
        mid = 0.5 * (lo + hi)
        if f(mid) >= target:
            lo = mid
        else:
            hi = mid
    return _log(lo)


def approximate_max_divergence(p, q, delta: float) -> float:
    """Classical ``ln max_S (P(S) - delta)/Q(S)`` over subsets with ``P(S) >= delta``.

    Exhaustive over all subsets, so only meant for small alphabets.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise ValidationError("distributions must be vectors of equal length")
    if p.size > 20:
        raise ValidationError("alphabet too large for exhaustive subset search (limit 20)")
    best = -math.inf
    for r in range(1, p.size + 1):
        for subset in itertools.combinations(range(p.size), r):
            ps, qs = p[list(subset)].sum(), q[list(subset)].sum()
            if ps < delta:
                continue
            num = ps - delta
            if qs <= 0:
                if num > 0:
                    return math.inf
                continue
            best = max(best, _log(num / qs) if num > 0 else -math.inf)
    return best


# ---------------------------------------------------------------------------
# smoothed max-relative entropy


def dmax_smooth(rho, sigma, delta: float) -> DivergenceValue:
    """Smoothed max-relative entropy over states within trace distance ``delta``.

    Program: ``min lam`` s.t. ``rho~ <= lam sigma``, ``Tr rho~ = 1``,
    ``Y >= rho - rho~``, ``Tr Y <= delta``, all operators PSD.
    """
    rho, sigma = _pair(rho, sigma)
    delta = _check_delta(delta)
    if delta == 0:
        return dmax(rho, sigma, "sdp")
    return _rescaled(_dmax_smooth_sdp, rho, sigma, delta)


def _dmax_smooth_sdp(rho, sigma, delta) -> DivergenceValue:
    n = rho.shape[0]
    prog = conic.ConicProgram("dmax-smooth")
    lam = prog.scalar("lam", nonneg=True)
    rt = prog.hermitian("rho_tilde", n)
    y = prog.hermitian("Y", n)
    prog.eq(rt.trace().real(), 1, name="normalized")
    prog.psd(lam * sigma - rt, name="order")
    prog.psd(y - (rho - rt), name="smoothing")
    prog.le(y.trace().real(), delta, name="budget")
    prog.minimize(lam)
    res = conic.solve(prog)
    if res.status == "infeasible":
        return DivergenceValue(math.inf, "sdp")
    status = _usable(res)
    return DivergenceValue(_log(res.primal), "sdp", witness=res.value(rt), primal=res.primal, dual=res.dual,
                           status=status)


# ---------------------------------------------------------------------------
# Renyi family


def renyi_petz(rho, sigma, alpha: float) -> float:
    """``1/(alpha-1) ln Tr[rho^alpha sigma^(1-alpha)]`` for ``alpha`` in (0,1) or (1,2]."""
    rho, sigma = _pair(rho, sigma)
    alpha = float(alpha)
    if not (0 < alpha < 1 or 1 < alpha <= 2):
        raise ValidationError(f"Petz order must lie in (0,1) or (1,2], got {alpha}")
    if alpha > 1 and not support_contained(rho, sigma):
        return math.inf
    ra = matrix_function(rho, lambda w: w ** alpha, floor=SUPPORT_FLOOR)
    sb = matrix_function(sigma, lambda w: w ** (1 - alpha), floor=SUPPORT_FLOOR)
    q = float(np.trace(ra @ sb).real)
    if q <= 0:
        return math.inf
    return math.log(q) / (alpha - 1)


def renyi_sandwiched(rho, sigma, alpha: float) -> float:
    """``1/(alpha-1) ln Tr[(sigma^g rho sigma^g)^alpha]``, ``g = (1-alpha)/(2 alpha)``, ``alpha >= 1/2``."""
    rho, sigma = _pair(rho, sigma)
    alpha = float(alpha)
    if not (alpha >= 0.5 and alpha != 1):
        raise ValidationError(f"sandwiched order must be >= 1/2 and != 1, got {alpha}")
    if alpha > 1 and not support_contained(rho, sigma):
        return math.inf
    g = (1 - alpha) / (2 * alpha)
    sg = matrix_function(sigma, lambda w: w ** g, floor=SUPPORT_FLOOR)
    inner = sg @ rho @ sg
    inner = (inner + inner.conj().T) / 2
    q = float(np.trace(matrix_function(inner, lambda w: np.clip(w, 0, None) ** alpha, floor=SUPPORT_FLOOR)).real)
    if q <= 0:
        return math.inf
    return math.log(q) / (alpha - 1)


def relative_entropy(rho, sigma) -> float:
    """Umegaki relative entropy ``Tr[rho (ln rho - ln sigma)]`` in nats."""
    rho, sigma = _pair(rho, sigma)
    if not support_contained(rho, sigma):
        return math.inf
    lr = matrix_function(rho, np.log, floor=SUPPORT_FLOOR)
    ls = matrix_function(sigma, np.log, floor=SUPPORT_FLOOR)
    return float(np.trace(rho @ (lr - ls)).real)
