"""Depolarization mechanisms and classical mechanisms derived from them.

The mechanism ``rho -> A_dep^p(E(rho))`` mixes the output of a pre-channel
``E`` with the maximally mixed state. Two sufficient conditions fix ``p``:

* pure privacy: ``p >= dK / (dK + e^eps - 1)`` with
  ``K = max_M ||M||_inf / Tr M  *  max_pairs ||E(rho^R) - E(rho^T)||_1 / 2``;
* approximate privacy (all measurements): ``p >= d(K' - delta) / (dK' + e^eps - 1)``
  with ``K'`` the second factor alone.

Both are sufficient only; :func:`tighten` searches for the smallest ``p``
that actually passes the checker.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    QuantumChannel,
    ValidationError,
    basis_state,
    check_povm,
    eigh,
    max_entangled_choi,
    trace_norm,
)
from .framework import (
    AllMeasurements,
    ExplicitMeasurements,
    Framework,
    PrivacyBudget,
    check_qpp,
)

TIGHTEN_TOL = 1e-6


@dataclass(frozen=True)
class DepolarizationPlan:
    """Calibrated depolarizing strength for a framework and pre-channel."""

    p: float
    d: int
    K: float
    Kprime: float
    target: PrivacyBudget
    formula: str

    def __post_init__(self):
        if not 0 <= self.p <= 1:
            raise ValidationError(f"p must lie in [0, 1], got {self.p}")

    def mechanism(self, pre: QuantumChannel | None = None) -> QuantumChannel:
        """The calibrated channel ``A_dep^p o E``."""
        dep = depolarize(self.d, self.p)
        return dep if pre is None else pre.then(dep)

    def to_dict(self) -> dict:
        return {"p": self.p, "d": self.d, "K": self.K, "Kprime": self.Kprime,
                "eps": self.target.eps, "delta": self.target.delta, "formula": self.formula}


def depolarize(d: int, p: float) -> QuantumChannel:
    """``rho -> (1 - p) rho + p Tr[rho] I / d``."""
    if not 0 <= p <= 1:
        raise ValidationError(f"p must lie in [0, 1], got {p}")
    choi = (1 - p) * max_entangled_choi(d) + (p / d) * np.eye(d * d)
    return QuantumChannel(d, d, choi)


def _pre(framework: Framework, pre: QuantumChannel | None) -> QuantumChannel:
    if pre is None:
        return QuantumChannel.identity(framework.dim)
    if pre.dim_in != framework.dim:
        raise ValidationError("pre-channel input dim does not match the framework")
    return pre


def measurement_factor(framework: Framework) -> float:
    """``max ||M||_inf / Tr M`` over the framework's measurement class.

    Operators with zero trace impose no constraint and are skipped. Classes
    other than an explicit list contain rank-one projectors (or, for PPT, are
    bounded by the general inequality ``||M||_inf <= Tr M``), so the factor is 1.
    """
    meas = framework.measurements
    if not isinstance(meas, ExplicitMeasurements):
        return 1.0
    best = 0.0
    for m in meas.operators:
        tr = float(np.real(np.trace(m)))
        if tr > 1e-12:
            best = max(best, float(eigh(m)[0][-1]) / tr)
    return best


def compute_Kprime(framework: Framework, pre: QuantumChannel | None = None) -> float:
    """Largest half trace distance between pre-channel outputs of paired mixtures."""
    e = _pre(framework, pre)
    items, _ = framework.admissible()
    return max((0.5 * trace_norm(e(rr) - e(rt)) for _, _, rr, rt in items), default=0.0)


def compute_K(framework: Framework, pre: QuantumChannel | None = None) -> float:
    return measurement_factor(framework) * compute_Kprime(framework, pre)


def calibrate_p(d: int, K: float, eps: float) -> float:
    """Smallest ``p`` allowed by the pure-privacy condition."""
    if K <= 0 or math.isinf(eps):
        return 0.0
    return d * K / (d * K + math.expm1(eps))


def achievable_eps(p: float, d: int, K: float) -> float:
    """``ln(1 + (1 - p) d K / p)``: the pure budget guaranteed at strength ``p``."""
    if not 0 <= p <= 1:
        raise ValidationError(f"p must lie in [0, 1], got {p}")
    if K <= 0 or p >= 1:
        return 0.0
    if p == 0:
        return math.inf
    return math.log1p((1 - p) * d * K / p)


def calibrate_p_delta(d: int, Kprime: float, eps: float, delta: float) -> float:
    """Smallest ``p`` allowed by the approximate-privacy condition."""
    if Kprime <= delta or math.isinf(eps):
        return 0.0
    return max(0.0, d * (Kprime - delta) / (d * Kprime + math.expm1(eps)))


def calibrate_eps(framework: Framework, pre: QuantumChannel | None, eps: float) -> DepolarizationPlan:
    """Calibrate for ``(eps, 0)``.

    ``eps = 0`` with ``K > 0`` yields ``p = 1`` (only the constant channel
    is perfectly private); the plan records it rather than raising.
    """
    if eps < 0 or math.isnan(eps):
        raise ValidationError(f"eps must be >= 0, got {eps}")
    e = _pre(framework, pre)
    kp = compute_Kprime(framework, e)
    k = measurement_factor(framework) * kp
    d = e.dim_out
    return DepolarizationPlan(calibrate_p(d, k, eps), d, k, kp, PrivacyBudget(eps, 0.0), "thm-eps")


def calibrate_eps_delta(framework: Framework, pre: QuantumChannel | None,
                        budget: PrivacyBudget) -> DepolarizationPlan:
    """Calibrate for ``(eps, delta)`` against all measurements."""
    if not isinstance(framework.measurements, AllMeasurements):
        raise ValidationError("the (eps, delta) calibration needs the class of all measurements")
    e = _pre(framework, pre)
    kp = compute_Kprime(framework, e)
    d = e.dim_out
    p = calibrate_p_delta(d, kp, budget.eps, budget.delta)
    return DepolarizationPlan(p, d, kp, kp, budget, "prop-eps-delta")


def tighten(framework: Framework, pre: QuantumChannel | None, budget: PrivacyBudget,
            plan: DepolarizationPlan | None = None, tol: float = TIGHTEN_TOL) -> DepolarizationPlan:
    """Bisect ``p`` down from the formula value against the checker.

    Assumes the verdict is monotone in ``p``, which holds for the class of
    all measurements because a stronger depolarization is a post-processing
    of a weaker one.
    """
    e = _pre(framework, pre)
    if plan is None:
        plan = (calibrate_eps(framework, e, budget.eps) if budget.delta == 0
                else calibrate_eps_delta(framework, e, budget))

    def passes(p):
        return check_qpp(framework, e.then(depolarize(e.dim_out, p)), budget).holds

    hi = plan.p
    if not passes(hi):
        hi = 1.0
        if not passes(hi):
            raise ValidationError("budget unreachable even with full depolarization")
    lo = 0.0
    if passes(lo):
        hi = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if passes(mid):
            hi = mid
        else:
            lo = mid
    return DepolarizationPlan(hi, plan.d, plan.K, plan.Kprime, budget, "tightened")


# ---------------------------------------------------------------------------
# classical mechanisms


def classical_pp_mechanism(mechanism: QuantumChannel, post: QuantumChannel | None,
                           povm) -> np.ndarray:
    """Row-stochastic kernel ``p(y|x) = Tr[M_y J(A(|x><x|))]``."""
    final = mechanism if post is None else mechanism.then(post)
    ops = check_povm(povm)
    if ops[0].shape[0] != final.dim_out:
        raise ValidationError("POVM dimension does not match the channel output")
    d = mechanism.dim_in
    kernel = np.empty((d, len(ops)))
    for x in range(d):
        out = final(basis_state(d, x))
        kernel[x] = [np.real(np.trace(m @ out)) for m in ops]
    if np.max(np.abs(kernel.sum(axis=1) - 1)) > 1e-8:
        raise ValidationError("kernel rows do not sum to one")
    return np.clip(kernel, 0.0, 1.0)


def randomized_response_kernel(k: int, q: float) -> np.ndarray:
    """Keep the symbol with probability ``1 - q``, else output a uniform symbol."""
    if not 0 <= q <= 1:
        raise ValidationError(f"q must lie in [0, 1], got {q}")
    return (1 - q) * np.eye(k) + (q / k) * np.ones((k, k))


def computational_povm(d: int) -> list[np.ndarray]:
    return [basis_state(d, i) for i in range(d)]
