"""Budget calculus for combining private mechanisms, with end-to-end checks.

The calculators are closed forms. ``verify_rule`` builds the literal
composed channel on small random instances (tensor products, mixtures,
post-processed channels, and an instrument-controlled adaptive channel) and
runs the privacy checker on the composed framework at the predicted budget.
A pass is evidence of sufficiency only; the predicted budgets are not tight.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    QuantumChannel,
    QuantumInstrument,
    ValidationError,
    as_state,
    basis_state,
    haar_isometry,
    link_choi,
    permute_systems,
    random_channel,
    random_state,
    tensor_choi,
)
from .framework import (
    ALL,
    Ensemble,
    Framework,
    PrivacyBudget,
    ProductMeasurements,
    Secret,
    _pmap,
    check_qpp,
    make_qldp_framework,
)
from .mechanism import calibrate_eps_delta, depolarize, tighten

MAX_COMPOSED_DIM = 64
RULES = ("product", "joint1", "joint2", "adaptive", "flexible", "convex", "post_process")


@dataclass(frozen=True)
class CompositionResult:
    budget: PrivacyBudget
    rule: str
    inputs: tuple
    regime: str
    flags: tuple = ()

    def __post_init__(self):
        if self.rule not in RULES:
            raise ValidationError(f"unknown rule {self.rule!r}")
        if self.regime not in ("product", "joint"):
            raise ValidationError(f"unknown measurement regime {self.regime!r}")

    @property
    def vacuous(self) -> bool:
        return self.budget.delta >= 1 or math.isinf(self.budget.eps)

    def to_dict(self) -> dict:
        return {"rule": self.rule, "regime": self.regime, "budget": self.budget.to_dict(),
                "inputs": [b.to_dict() for b in self.inputs], "flags": list(self.flags)}


def _clamp(eps: float, delta: float, flags: list) -> PrivacyBudget:
    if delta >= 1:
        flags.append("delta clamped to 1 (vacuous)")
        delta = 1.0
    return PrivacyBudget(eps, delta)


def parallel_product(budgets) -> CompositionResult:
    """``(sum eps_i, sum delta_i)`` when the adversary measures each output separately."""
    budgets = tuple(budgets)
    if not budgets:
        raise ValidationError("no budgets to compose")
    flags: list = []
    b = _clamp(sum(x.eps for x in budgets), sum(x.delta for x in budgets), flags)
    return CompositionResult(b, "product", budgets, "product", tuple(flags))


def parallel_joint(b1: PrivacyBudget, b2: PrivacyBudget):
    """Two budgets valid against joint measurements on both outputs.

    The first trades delta for eps through ``ln 1/((1-delta_1)(1-delta_2))``
    and is flagged when its deltas sum to one or more; the second keeps
    eps additive and weights one delta by the other mechanism's ``e^eps``.
    Neither dominates the other, so both are returned.
    """
    flags1: list = []
    if b1.delta >= 1 or b2.delta >= 1:
        flags1.append("delta_i >= 1: first form undefined")
        r1 = CompositionResult(PrivacyBudget(math.inf, 1.0), "joint1", (b1, b2), "joint", tuple(flags1))
    else:
        eps = b1.eps + b2.eps - math.log1p(-b1.delta) - math.log1p(-b2.delta)
        d1 = math.sqrt(b1.delta * (2 - b1.delta))
        d2 = math.sqrt(b2.delta * (2 - b2.delta))
        if d1 + d2 >= 1:
            flags1.append("hypothesis violated: transformed deltas sum to >= 1")
        r1 = CompositionResult(_clamp(eps, d1 + d2, flags1), "joint1", (b1, b2), "joint", tuple(flags1))
    flags2: list = []
    delta = min(b1.delta + math.exp(min(b1.eps, 700)) * b2.delta,
                b2.delta + math.exp(min(b2.eps, 700)) * b1.delta)
    r2 = CompositionResult(_clamp(b1.eps + b2.eps, delta, flags2), "joint2", (b1, b2), "joint", tuple(flags2))
    return r1, r2


def adaptive(b1: PrivacyBudget, b2: PrivacyBudget, y_size: int) -> CompositionResult:
    """Second mechanism picked from the first one's instrument outcome."""
    if int(y_size) != y_size or y_size < 1:
        raise ValidationError(f"outcome count must be a positive integer, got {y_size}")
    flags: list = []
    b = _clamp(b1.eps + b2.eps, b2.delta + b1.delta * int(y_size), flags)
    return CompositionResult(b, "adaptive", (b1, b2), "product", tuple(flags))


def _common(budgets, rule) -> PrivacyBudget:
    budgets = tuple(budgets)
    if not budgets:
        raise ValidationError("no budgets given")
    b0 = budgets[0]
    for b in budgets[1:]:
        if abs(b.eps - b0.eps) > 1e-12 or abs(b.delta - b0.delta) > 1e-12:
            raise ValidationError(f"{rule} needs a common budget; got {b0.to_dict()} and {b.to_dict()}")
    return b0


def convex_combination(budgets, probs) -> CompositionResult:
    """Picking mechanism ``i`` with probability ``p_i`` keeps the common budget."""
    budgets = tuple(budgets)
    probs = np.asarray(probs, dtype=float)
    if probs.shape != (len(budgets),) or np.any(probs < 0) or abs(probs.sum() - 1) > 1e-9:
        raise ValidationError("probs must be a distribution with one entry per budget")
    return CompositionResult(_common(budgets, "convex combination"), "convex", budgets, "joint")


def post_process(budget: PrivacyBudget) -> CompositionResult:
    return CompositionResult(budget, "post_process", (budget,), "joint")


# ---------------------------------------------------------------------------
# composed objects


def product_framework(f1: Framework, f2: Framework, measurements=ALL) -> Framework:
    """Secrets ``R_1 x R_2`` paired with ``T_1 x T_2`` over independent inputs.

    Every combination of one ensemble from each factor is included, and
    each pair ``((R_1, T_1), (R_2, T_2))`` of ordered factor pairs becomes one
    ordered pair, so the result is built with ``symmetric=False``.
    """
    if f1.dim * f2.dim > MAX_COMPOSED_DIM:
        raise ValidationError(f"composed input dim {f1.dim * f2.dim} exceeds {MAX_COMPOSED_DIM}")
    ensembles = []
    for e1 in f1.ensembles:
        for e2 in f2.ensembles:
            labels, probs, states = [], [], {}
            for l1, p1 in zip(e1.labels, e1.probs):
                for l2, p2 in zip(e2.labels, e2.probs):
                    labels.append((l1, l2))
                    probs.append(p1 * p2)
                    states[(l1, l2)] = np.kron(e1.states[l1], e2.states[l2])
            ensembles.append(Ensemble(tuple(labels), tuple(probs), states))
    secrets, pairs, seen = [], [], set()

    def secret(s1, s2):
        name = f"{s1.name}|{s2.name}"
        if name not in seen:
            seen.add(name)
            secrets.append(Secret(name, frozenset(itertools.product(s1.members, s2.members))))
        return name

    for r1, t1 in f1.pairs:
        for r2, t2 in f2.pairs:
            a = secret(f1.secret(r1), f2.secret(r2))
            b = secret(f1.secret(t1), f2.secret(t2))
            pairs.append((a, b))
    return Framework(tuple(secrets), tuple(pairs), tuple(ensembles), measurements, symmetric=False)


def mixture(channels, probs) -> QuantumChannel:
    """The channel that applies ``channels[i]`` with probability ``probs[i]``."""
    c0 = channels[0]
    if any((c.dim_in, c.dim_out) != (c0.dim_in, c0.dim_out) for c in channels):
        raise ValidationError("mixed channels must share dimensions")
    choi = sum(p * c.choi for p, c in zip(probs, channels))
    return QuantumChannel(c0.dim_in, c0.dim_out, choi)


def _flagged_choi(choi: np.ndarray, din: int, dout: int, y: int, ny: int) -> np.ndarray:
    """Choi of ``rho -> |y><y| (x) N(rho)`` in the order ``in (x) (flag, out)``."""
    big = np.kron(basis_state(ny, y), choi)
    return permute_systems(big, (ny, din, dout), (1, 0, 2))


def adaptive_channel(first: QuantumChannel, instrument: QuantumInstrument,
                     second: dict) -> QuantumChannel:
    """``rho_1 (x) rho_2 -> sum_y E_y(A_1(rho_1)) (x) |y><y| (x) A_2^y(rho_2)``.

    ``second`` maps each instrument label to the channel used on that branch.
    Output systems are ordered (instrument output, flag, second output).
    """
    if instrument.dim_in != first.dim_out:
        raise ValidationError("instrument input dim does not match the first mechanism")
    ys = instrument.labels
    missing = [y for y in ys if y not in second]
    if missing:
        raise ValidationError(f"no second-stage channel for outcomes {missing}")
    c2 = [second[y] for y in ys]
    d2in, d2out = c2[0].dim_in, c2[0].dim_out
    if any((c.dim_in, c.dim_out) != (d2in, d2out) for c in c2):
        raise ValidationError("second-stage channels must share dimensions")
    d1in, de, ny = first.dim_in, instrument.dim_out, len(ys)
    if d1in * d2in > MAX_COMPOSED_DIM or de * ny * d2out > MAX_COMPOSED_DIM:
        raise ValidationError(f"composed dimension exceeds {MAX_COMPOSED_DIM}")
    total = 0
    for k, y in enumerate(ys):
        top = link_choi(first.choi, instrument.branch(y), (d1in, first.dim_out, de))
        bottom = _flagged_choi(second[y].choi, d2in, d2out, k, ny)
        total = total + tensor_choi(top, (d1in, de), bottom, (d2in, ny * d2out))
    return QuantumChannel(d1in * d2in, de * ny * d2out, total)


def correlated_input(q, first_states, second_states) -> np.ndarray:
    """``sum_z q(z) omega^z (x) tau^z``."""
    q = np.asarray(q, dtype=float)
    return as_state(sum(qz * np.kron(w, t) for qz, w, t in zip(q, first_states, second_states)))


# ---------------------------------------------------------------------------
# randomized verification


@dataclass
class RuleReport:
    rule: str
    instances: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(i["holds"] for i in self.instances)

    def to_dict(self) -> dict:
        return {"rule": self.rule, "passed": self.passed, "instances": self.instances}


def _random_budget(rng, delta_max=0.15) -> PrivacyBudget:
    return PrivacyBudget(float(rng.uniform(0.2, 1.5)), float(rng.uniform(0.0, delta_max)))


def _private_mechanism(framework: Framework, budget: PrivacyBudget, rng) -> QuantumChannel:
    """Random pre-channel followed by depolarization tightened to the budget.

    Tightening puts each factor on the edge of its budget, which is where a
    composition rule can fail.
    """
    pre = random_channel(framework.dim, seed=rng)
    plan = tighten(framework, pre, budget, calibrate_eps_delta(framework, pre, budget))
    return plan.mechanism(pre)


def _uniform_mechanism(d: int, budget: PrivacyBudget) -> QuantumChannel:
    """Depolarization private for every pair of inputs (distance bound one)."""
    expm1 = math.expm1(budget.eps)
    p = max(0.0, d * (1 - budget.delta) / (d + expm1))
    return depolarize(d, p)


def _qldp(d: int, n: int, rng) -> Framework:
    return make_qldp_framework([random_state(d, rank=int(rng.integers(1, d + 1)), seed=rng) for _ in range(n)])


def _record(report, predicted: CompositionResult, extra=None) -> dict:
    out = {"budget": predicted.budget.to_dict(), "inputs": [b.to_dict() for b in predicted.inputs],
           "holds": bool(report.holds), "min_delta": report.min_delta, "flags": list(predicted.flags)}
    out.update(extra or {})
    return out


def _instance(rule: str, rng, d: int, starts: int) -> dict:
    if rule in ("product", "joint1", "joint2"):
        f = _qldp(d, 2, rng)
        b1, b2 = _random_budget(rng), _random_budget(rng)
        a1, a2 = _private_mechanism(f, b1, rng), _private_mechanism(f, b2, rng)
        composed = a1.tensor(a2)
        if rule == "product":
            pred = parallel_product([b1, b2])
            fw = product_framework(f, f, ProductMeasurements((a1.dim_out, a2.dim_out), starts=starts))
        else:
            pred = parallel_joint(b1, b2)[0 if rule == "joint1" else 1]
            fw = product_framework(f, f, ALL)
        if pred.vacuous:
            return {"budget": pred.budget.to_dict(), "holds": True, "vacuous": True, "flags": list(pred.flags)}
        return _record(check_qpp(fw, composed, pred.budget), pred)

    if rule == "adaptive":
        f = _qldp(d, 2, rng)
        b1, b2 = _random_budget(rng, 0.1), _random_budget(rng, 0.1)
        ny = int(rng.integers(2, 5))
        a1 = _private_mechanism(f, b1, rng)
        povm_basis = haar_isometry(d, d, seed=rng)
        weights = rng.dirichlet(np.ones(ny), size=d)
        povm = [povm_basis @ np.diag(weights[:, y]) @ povm_basis.conj().T for y in range(ny)]
        inst = QuantumInstrument.from_povm(povm)
        pool = [_private_mechanism(f, b2, rng) for _ in range(2)]
        pred = adaptive(b1, b2, ny)
        fw = product_framework(f, f, ProductMeasurements((d, ny * d), starts=starts))
        worst, holds = 0.0, True
        # every assignment of pool channels to outcomes
        for choice in itertools.product(range(len(pool)), repeat=ny):
            ch = adaptive_channel(a1, inst, {y: pool[c] for y, c in zip(inst.labels, choice)})
            rep = check_qpp(fw, ch, pred.budget)
            worst = max(worst, rep.min_delta)
            holds = holds and rep.holds
        return {"budget": pred.budget.to_dict(), "inputs": [b1.to_dict(), b2.to_dict()], "outcomes": ny,
                "assignments": len(pool) ** ny, "holds": holds, "min_delta": worst}

    if rule == "flexible":
        b1, b2 = _random_budget(rng), _random_budget(rng)
        a1, a2 = _uniform_mechanism(d, b1), _uniform_mechanism(d, b2)
        nz = int(rng.integers(1, 4))
        q = rng.dirichlet(np.ones(nz))
        w1 = [random_state(d, seed=rng) for _ in range(nz)]
        t1 = [random_state(d, seed=rng) for _ in range(nz)]
        w2 = [random_state(d, seed=rng) for _ in range(nz)]
        t2 = [random_state(d, seed=rng) for _ in range(nz)]
        s1, s2 = correlated_input(q, w1, t1), correlated_input(q, w2, t2)
        composed = a1.tensor(a2)
        out = {}
        for name, pred, meas in (
                ("product", parallel_product([b1, b2]), ProductMeasurements((d, d), starts=starts)),
                ("joint2", parallel_joint(b1, b2)[1], ALL)):
            fw = make_qldp_framework({"s1": s1, "s2": s2}, meas)
            out[name] = check_qpp(fw, composed, pred.budget).holds
        pred1 = parallel_joint(b1, b2)[0]
        if not pred1.vacuous:
            out["joint1"] = check_qpp(make_qldp_framework({"s1": s1, "s2": s2}), composed, pred1.budget).holds
        return {"inputs": [b1.to_dict(), b2.to_dict()], "components": nz, "checks": out,
                "holds": all(out.values())}

    if rule == "convex":
        f = _qldp(d, 3, rng)
        b = _random_budget(rng)
        k = int(rng.integers(2, 4))
        mechs = [_private_mechanism(f, b, rng) for _ in range(k)]
        probs = rng.dirichlet(np.ones(k))
        pred = convex_combination([b] * k, probs)
        return _record(check_qpp(f, mixture(mechs, probs), pred.budget), pred, {"components": k})

    if rule == "post_process":
        f = _qldp(d, 3, rng)
        b = _random_budget(rng)
        a = _private_mechanism(f, b, rng)
        post = random_channel(a.dim_out, int(rng.integers(2, 4)), seed=rng)
        pred = post_process(b)
        return _record(check_qpp(f, a.then(post), pred.budget), pred)

    raise ValidationError(f"unknown rule {rule!r}; expected one of {RULES}")


def verify_rule(rule: str, instances: int = 20, seed: int = 0, d: int = 2,
                starts: int = 12, threads: int = 1) -> RuleReport:
    """Check a composition rule end to end on random instances.

    Each instance draws fresh states, budgets and calibrated mechanisms from
    its own seed stream, so results do not depend on the thread count.
    """
    if rule not in RULES:
        raise ValidationError(f"unknown rule {rule!r}; expected one of {RULES}")
    if not 2 <= d <= 3:
        raise ValidationError("verification runs on qubits or qutrits")
    seeds = np.random.SeedSequence(seed).spawn(instances)
    results = _pmap(lambda s: _instance(rule, np.random.default_rng(s), d, starts), seeds, threads)
    return RuleReport(rule, results)
