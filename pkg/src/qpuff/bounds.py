"""Closed-form consequences of a privacy guarantee, and a suite that tests them.

An (eps, 0) guarantee against all measurements bounds the max-relative
entropy between paired outputs in both directions, which in turn caps Renyi
divergences, relative entropy, trace distance and Holevo information. Every
calculator here returns a plain float; ``verify_bounds`` compares them with
exact values on random certified channels.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    QuantumChannel,
    ValidationError,
    as_state,
    random_channel,
    random_state,
    trace_norm,
    von_neumann_entropy,
)
from .divergence import dl_divergence, relative_entropy, renyi_petz, renyi_sandwiched, thompson
from .framework import PrivacyBudget, _pmap, check_qpp, make_qldp_framework
from .mechanism import depolarize

BOUND_SLACK = 1e-6


def _check_eps(eps: float) -> float:
    eps = float(eps)
    if math.isnan(eps) or eps < 0:
        raise ValidationError(f"eps must be >= 0, got {eps}")
    return eps


def quadratic_branch_active(eps: float, alpha: float) -> bool:
    """The quadratic Renyi cap is proved only for ``eps * alpha <= 2``."""
    return eps * alpha <= 2


def renyi_bound(eps: float, alpha: float) -> float:
    """``min{eps^2 alpha / 2, eps}`` for any data-processing Renyi divergence of order ``alpha > 1``.

    Outside ``eps * alpha <= 2`` the quadratic term is at least ``eps``, so
    the minimum already selects the linear cap there.
    """
    eps = _check_eps(eps)
    if not alpha > 1:
        raise ValidationError(f"order must exceed 1, got {alpha}; use relative_entropy_bound at 1")
    return min(eps * eps * alpha / 2, eps)


def relative_entropy_bound(eps: float) -> float:
    eps = _check_eps(eps)
    return min(eps, eps * eps / 2)


def trace_norm_bound(budget: PrivacyBudget, form: str = "tightest") -> float:
    """Cap on ``||A(rho^R) - A(rho^T)||_1``.

    ``form='pinsker'`` is ``min{eps, sqrt(2 eps)}`` (pure budgets only),
    ``form='strength'`` is ``2 - 4(1 - delta)/(e^eps + 1)``, and
    ``'tightest'`` takes the smaller valid one.
    """
    eps, delta = budget.eps, budget.delta
    strength = 2.0 if math.isinf(eps) else 2 - 4 * (1 - delta) / (math.exp(eps) + 1)
    if form == "strength":
        return strength
    if form not in ("pinsker", "tightest"):
        raise ValidationError(f"unknown form {form!r}")
    if delta > 0:
        if form == "pinsker":
            raise ValidationError("the Pinsker form needs delta = 0")
        return strength
    pinsker = min(eps, math.sqrt(2 * eps))
    return pinsker if form == "pinsker" else min(pinsker, strength)


def strength_convert(budget: PrivacyBudget, eps_prime: float) -> PrivacyBudget:
    """Trade eps for delta: ``(eps, delta)`` implies ``(eps', delta')`` for ``eps' < eps``."""
    eps_prime = _check_eps(eps_prime)
    if eps_prime > budget.eps:
        raise ValidationError(f"eps' = {eps_prime} exceeds eps = {budget.eps}")
    if math.isinf(budget.eps):
        return PrivacyBudget(eps_prime, 1.0)
    delta = 1 - (math.exp(eps_prime) + 1) * (1 - budget.delta) / (math.exp(budget.eps) + 1)
    return PrivacyBudget(eps_prime, min(1.0, max(0.0, delta)))


def binary_entropy(p: float) -> float:
    """In nats, with ``0 ln 0 = 0``."""
    if not 0 <= p <= 1:
        raise ValidationError(f"p must lie in [0, 1], got {p}")
    return -sum(x * math.log(x) for x in (p, 1 - p) if x > 0)


def holevo_bound_pure(eps: float) -> float:
    return relative_entropy_bound(eps)


def holevo_delta_prime(eps: float, delta: float) -> float:
    return 1 - 2 * (1 - delta) / (math.exp(eps) + 1)


def holevo_bound_approx(eps: float, delta: float, d: int) -> float:
    """``delta' ln(d - 1) + h(delta')``, valid for ``delta'`` in ``[0, 1 - 1/d]``."""
    dp = holevo_delta_prime(_check_eps(eps), delta)
    if not -1e-12 <= dp <= 1 - 1 / d + 1e-12:
        raise ValidationError(f"delta' = {dp:.6g} lies outside [0, 1 - 1/d] for d = {d}")
    dp = min(max(dp, 0.0), 1 - 1 / d)
    return dp * math.log(d - 1) + binary_entropy(dp) if d > 1 else 0.0


def holevo_bounds(eps: float, delta: float, d: int) -> float:
    """The pure cap when ``delta = 0``, otherwise the continuity cap."""
    if delta == 0:
        return holevo_bound_pure(eps)
    return holevo_bound_approx(eps, delta, d)


def holevo_information(probs, states) -> float:
    """``S(sum_x p_x rho_x) - sum_x p_x S(rho_x)``."""
    probs = np.asarray(probs, dtype=float)
    states = [as_state(s) for s in states]
    if probs.shape != (len(states),) or np.any(probs < 0) or abs(probs.sum() - 1) > 1e-9:
        raise ValidationError("probs must be a distribution with one entry per state")
    avg = sum(p * s for p, s in zip(probs, states))
    return von_neumann_entropy(avg) - float(sum(p * von_neumann_entropy(s) for p, s in zip(probs, states)))


def variant_chain(eps: float, alpha: float, delta: float, K: float | None = None) -> dict:
    """Budgets reached by passing through a Renyi or relative-entropy guarantee.

    ``eps_prime`` caps the sandwiched divergence of order ``alpha`` and
    ``eps_star`` is the resulting (eps, delta) budget. ``eps_dprime`` caps
    the relative entropy; ``eps_hat`` needs the caller's ``K`` (the largest
    trace distance between paired outputs) and is omitted without it.
    """
    eps = _check_eps(eps)
    if not alpha > 1:
        raise ValidationError(f"order must exceed 1, got {alpha}")
    if not 0 < delta < 1:
        raise ValidationError(f"delta must lie in (0, 1), got {delta}")
    ep = min(eps, eps * eps * alpha / 2)
    tail = math.log(1 / (1 - delta * delta))
    out = {
        "eps_prime": ep,
        "eps_star": ep + math.log(1 / (delta * delta)) / (alpha - 1) + tail,
        "eps_dprime": relative_entropy_bound(eps),
    }
    if K is not None:
        out["eps_hat"] = (out["eps_dprime"] + float(K)) / (delta * delta) + tail
    return out


def fairness_from_qpp(eps: float) -> float:
    """Output-distribution gap ``sqrt(min{eps, eps^2/2} / 2)`` for close inputs."""
    return math.sqrt(relative_entropy_bound(eps) / 2)


def privacy_from_fairness(beta: float) -> float:
    """A fair decision model is ``(eps, 2 beta)``-private for every eps."""
    if not 0 <= beta <= 1:
        raise ValidationError(f"beta must lie in [0, 1], got {beta}")
    return min(1.0, 2 * beta)


# ---------------------------------------------------------------------------
# conditional information for i.i.d. registers


def conditional_holevo_iid(a: QuantumChannel, probs, states, n: int, i: int) -> float:
    """``I(X_i; B | X_rest)`` for ``B = A(rho^{x_1} (x) ... (x) rho^{x_n})``, i.i.d. ``X``.

    Each fixed value of the other registers contributes the Holevo
    information of ``{p_x, A(rho^x at slot i, rest fixed)}``.
    """
    probs = np.asarray(probs, dtype=float)
    states = [as_state(s) for s in states]
    if not 0 <= i < n or n > 3:
        raise ValidationError("register index out of range (at most 3 registers)")
    total = 0.0
    for rest in itertools.product(range(len(states)), repeat=n - 1):
        weight = float(np.prod([probs[r] for r in rest]))
        branch = []
        for x in range(len(states)):
            labels = list(rest[:i]) + [x] + list(rest[i:])
            rho = states[labels[0]]
            for lab in labels[1:]:
                rho = np.kron(rho, states[lab])
            branch.append(a(rho))
        total += weight * holevo_information(probs, branch)
    return total


def iid_neighbor_eps(a: QuantumChannel, probs, states, n: int) -> float:
    """Pure eps over the pairs (slot-i state, slot-i average) the conditional bound uses."""
    states = [as_state(s) for s in states]
    avg = sum(p * s for p, s in zip(probs, states))
    worst = 0.0
    for i in range(n):
        for rest in itertools.product(range(len(states)), repeat=n - 1):
            def build(mid):
                ops = [states[r] for r in rest[:i]] + [mid] + [states[r] for r in rest[i:]]
                out = ops[0]
                for o in ops[1:]:
                    out = np.kron(out, o)
                return out
            ya = a(build(avg))
            for x in range(len(states)):
                worst = max(worst, thompson(a(build(states[x])), ya))
    return worst


# ---------------------------------------------------------------------------
# verification suite


@dataclass
class BoundStatement:
    name: str
    inputs: dict
    bound: float
    exact: float | None = None

    @property
    def slack(self) -> float | None:
        return None if self.exact is None else self.bound - self.exact

    @property
    def holds(self) -> bool:
        return self.exact is None or self.exact <= self.bound + BOUND_SLACK

    def to_dict(self) -> dict:
        return {"name": self.name, "inputs": self.inputs, "bound": self.bound,
                "exact": self.exact, "slack": self.slack, "holds": self.holds}


@dataclass
class BoundsReport:
    statements: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(s.holds for s in self.statements)

    @property
    def min_slack(self) -> float:
        return min((s.slack for s in self.statements if s.slack is not None), default=math.inf)

    def by_name(self, name: str) -> list:
        return [s for s in self.statements if s.name == name]

    def to_dict(self) -> dict:
        return {"passed": self.passed, "min_slack": self.min_slack, "count": len(self.statements),
                "statements": [s.to_dict() for s in self.statements]}


def _certified_instance(rng, d: int):
    """Random local-privacy framework and a channel with a finite certified eps."""
    n = int(rng.integers(2, 4))
    states = [random_state(d, seed=rng) for _ in range(n)]
    f = make_qldp_framework(states)
    a = random_channel(d, seed=rng).then(depolarize(d, float(rng.uniform(0.2, 0.95))))
    eps = check_qpp(f, a, PrivacyBudget(0.0, 0.0)).min_eps
    if not check_qpp(f, a, PrivacyBudget(eps + 1e-9, 0.0)).holds:
        raise ValidationError("certified eps failed its own check")
    return f, a, states, eps


def _instance_bounds(seed_seq, d: int) -> list:
    rng = np.random.default_rng(seed_seq)
    f, a, states, eps = _certified_instance(rng, d)
    outs = [a(s) for s in states]
    out = []
    pure = PrivacyBudget(eps, 0.0)
    k_max = 0.0
    for (i, x), (j, y) in itertools.permutations(enumerate(outs), 2):
        inp = {"eps": eps, "pair": [i, j]}
        out.append(BoundStatement("renyi_petz_2", inp, renyi_bound(eps, 2), renyi_petz(x, y, 2)))
        out.append(BoundStatement("renyi_sandwiched_2", inp, renyi_bound(eps, 2), renyi_sandwiched(x, y, 2)))
        out.append(BoundStatement("relative_entropy", inp, relative_entropy_bound(eps), relative_entropy(x, y)))
        tn = trace_norm(x - y)
        k_max = max(k_max, tn / 2)
        out.append(BoundStatement("trace_norm", inp, trace_norm_bound(pure), tn))
        out.append(BoundStatement("trace_norm_pinsker", inp, trace_norm_bound(pure, "pinsker"), tn))
    probs = rng.dirichlet(np.ones(len(states)))
    out.append(BoundStatement("holevo", {"eps": eps, "probs": probs.tolist()},
                              holevo_bound_pure(eps), holevo_information(probs, outs)))
    # approximate budgets: eps at a random delta from the checker
    delta = float(rng.uniform(0.01, 0.3))
    eps_d = max(0.0, check_qpp(f, a, PrivacyBudget(0.0, delta)).min_eps)
    approx = PrivacyBudget(eps_d, delta)
    for x, y in itertools.permutations(outs, 2):
        out.append(BoundStatement("trace_norm_strength", approx.to_dict(), trace_norm_bound(approx),
                                  trace_norm(x - y)))
    if 0 <= holevo_delta_prime(eps_d, delta) <= 1 - 1 / d:
        out.append(BoundStatement("holevo_approx", approx.to_dict(), holevo_bound_approx(eps_d, delta, d),
                                  holevo_information(probs, outs)))
    # weaker budgets implied by the certified one must also pass the checker
    conv = strength_convert(approx, float(rng.uniform(0, eps_d)) if eps_d > 0 else 0.0)
    rep = check_qpp(f, a, conv)
    out.append(BoundStatement("strength_convert", conv.to_dict(), conv.delta, rep.min_delta))
    chain = variant_chain(eps, 2.0, delta, K=k_max)
    worst_dl = max(dl_divergence(x, y, delta).value for x, y in itertools.permutations(outs, 2))
    out.append(BoundStatement("eps_star", {"eps": eps, "alpha": 2.0, "delta": delta}, chain["eps_star"], worst_dl))
    out.append(BoundStatement("eps_hat", {"eps": eps, "delta": delta, "K": k_max}, chain["eps_hat"], worst_dl))
    return out


def _iid_bounds(seed_seq) -> list:
    rng = np.random.default_rng(seed_seq)
    n = int(rng.integers(2, 4))
    states = [random_state(2, seed=rng) for _ in range(2)]
    probs = rng.dirichlet(np.ones(2))
    a = random_channel(2 ** n, seed=rng).then(depolarize(2 ** n, float(rng.uniform(0.5, 0.95))))
    eps = iid_neighbor_eps(a, probs, states, n)
    return [BoundStatement("conditional_holevo", {"eps": eps, "n": n, "i": i},
                           relative_entropy_bound(eps), conditional_holevo_iid(a, probs, states, n, i))
            for i in range(n)]


def verify_bounds(instances: int = 50, seed: int = 0, d: int = 2, iid_instances: int = 5,
                  threads: int = 1) -> BoundsReport:
    """Compare every calculator with exact values on random certified channels."""
    root = np.random.SeedSequence(seed)
    main, iid = root.spawn(2)
    report = BoundsReport()
    for chunk in _pmap(lambda s: _instance_bounds(s, d), main.spawn(instances), threads):
        report.statements.extend(chunk)
    for chunk in _pmap(_iid_bounds, iid.spawn(iid_instances), threads):
        report.statements.extend(chunk)
    return report
