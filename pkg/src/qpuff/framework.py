"""Pufferfish frameworks: secrets, discriminative pairs, ensembles, measurements.

A mechanism ``A`` is (eps, delta)-private for a framework when, for every
ensemble and every ordered pair ``(R, T)`` of secrets with positive mass,

    Tr[M A(rho^R)] <= e^eps Tr[M A(rho^T)] + delta

for all measurement operators ``M`` in the framework's class. With the class
of all measurements this is ``E_{e^eps}(A(rho^R) || A(rho^T)) <= delta``,
equivalently ``D^delta(A(rho^R) || A(rho^T)) <= eps``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import conic
from .core import (
    QuantumChannel,
    ValidationError,
    as_measurement,
    as_state,
    basis_state,
    partial_transpose,
    trace_distance,
)
from .divergence import dl_divergence, hockey_stick

FEASIBILITY_SLACK = 1e-7
MAX_SUBSETS = 2 ** 20


# ---------------------------------------------------------------------------
# budgets


@dataclass(frozen=True)
class PrivacyBudget:
    """An (eps, delta) pair; ``eps`` may be ``inf`` for "no constraint"."""

    eps: float
    delta: float = 0.0

    def __post_init__(self):
        eps, delta = float(self.eps), float(self.delta)
        if math.isnan(eps) or eps < 0:
            raise ValidationError(f"eps must be >= 0, got {self.eps}")
        if not 0 <= delta <= 1:
            raise ValidationError(f"delta must lie in [0, 1], got {self.delta}")
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "delta", delta)

    @property
    def gamma(self) -> float:
        return math.exp(self.eps) if self.eps < 700 else math.inf

    def __add__(self, other: "PrivacyBudget") -> "PrivacyBudget":
        return PrivacyBudget(self.eps + other.eps, min(1.0, self.delta + other.delta))

    def to_dict(self) -> dict:
        return {"eps": self.eps, "delta": self.delta}


# ---------------------------------------------------------------------------
# measurement classes


@dataclass(frozen=True)
class AllMeasurements:
    kind: str = field(default="ALL", init=False)


@dataclass(frozen=True)
class PPTMeasurements:
    """Operators with ``0 <= M <= I`` and ``0 <= M^Gamma <= I`` (bipartite)."""

    dims: tuple
    kind: str = field(default="PPT", init=False)


@dataclass(frozen=True)
class ExplicitMeasurements:
    operators: tuple = field(repr=False)
    kind: str = field(default="EXPLICIT", init=False)

    def __post_init__(self):
        ops = tuple(as_measurement(m) for m in self.operators)
        if not ops:
            raise ValidationError("explicit measurement class is empty")
        object.__setattr__(self, "operators", ops)


@dataclass(frozen=True)
class ProjectiveSubsets:
    """Projectors ``sum_{y in B} |y><y|`` for subsets ``B`` of a basis.

    ``basis`` holds the basis vectors as columns; ``None`` means the
    computational basis of the output space.
    """

    basis: np.ndarray | None = field(default=None, repr=False)
    kind: str = field(default="PROJECTIVE_SUBSETS", init=False)


@dataclass(frozen=True)
class ProductMeasurements:
    """Product operators ``M_1 (x) M_2`` with each ``0 <= M_i <= I``.

    The supremum over this class is a bilinear program; it is evaluated by
    alternating maximization from several starts, which yields a lower bound
    that is exact at any start inside the optimal basin. The value over all
    measurements is reported alongside as an upper bound. ``search_eps``
    enables a bisection for the minimal eps (otherwise reported as NaN).
    """

    dims: tuple
    starts: int = 24
    search_eps: bool = False
    kind: str = field(default="PRODUCT", init=False)


ALL = AllMeasurements()


# ---------------------------------------------------------------------------
# ensembles, secrets, frameworks


@dataclass(frozen=True)
class Ensemble:
    """A finite-support distribution over labelled states."""

    labels: tuple
    probs: tuple
    states: Mapping = field(repr=False)

    def __post_init__(self):
        labels = tuple(self.labels)
        probs = tuple(float(p) for p in self.probs)
        if len(labels) != len(probs) or not labels:
            raise ValidationError("ensemble needs one probability per label")
        if len(set(labels)) != len(labels):
            raise ValidationError("ensemble labels must be distinct")
        if any(p < 0 for p in probs) or abs(sum(probs) - 1) > 1e-9:
            raise ValidationError("ensemble probabilities must be nonnegative and sum to 1")
        states = {}
        for lab in labels:
            if lab not in self.states:
                raise ValidationError(f"label {lab!r} has no state")
            states[lab] = as_state(self.states[lab])
        dims = {s.shape[0] for s in states.values()}
        if len(dims) != 1:
            raise ValidationError("ensemble states must share a dimension")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "states", states)

    @property
    def dim(self) -> int:
        return next(iter(self.states.values())).shape[0]

    @classmethod
    def uniform(cls, states: Mapping) -> "Ensemble":
        labels = tuple(states)
        return cls(labels, tuple([1 / len(labels)] * len(labels)), states)

    def prob(self, label) -> float:
        try:
            return self.probs[self.labels.index(label)]
        except ValueError:
            return 0.0


@dataclass(frozen=True)
class Secret:
    name: str
    members: frozenset

    def __post_init__(self):
        members = frozenset(self.members)
        if not members:
            raise ValidationError(f"secret {self.name!r} has no members")
        object.__setattr__(self, "members", members)


def conditional_state(ensemble: Ensemble, secret: Secret):
    """Return ``(rho^R, P(R))``; the state is ``None`` when the mass is zero."""
    mass = sum(ensemble.prob(lab) for lab in secret.members)
    if mass <= 0:
        return None, 0.0
    rho = sum(ensemble.prob(lab) / mass * ensemble.states[lab]
              for lab in secret.members if ensemble.prob(lab) > 0)
    return as_state(rho), float(mass)


@dataclass(frozen=True)
class Framework:
    """Secrets, ordered discriminative pairs, ensembles, measurements.

    Pairs are closed under swap unless ``symmetric=False``, which keeps the
    listed order only (useful for one-sided statements such as a restricted
    class that separates the states in one direction but not the other).
    """

    secrets: tuple
    pairs: tuple
    ensembles: tuple
    measurements: object = ALL
    symmetric: bool = True

    def __post_init__(self):
        secrets = tuple(self.secrets)
        names = [s.name for s in secrets]
        if len(set(names)) != len(names):
            raise ValidationError("secret names must be unique")
        by_name = {s.name: s for s in secrets}
        closed = []
        for r, t in self.pairs:
            for a, b in ((r, t), (t, r)) if self.symmetric else ((r, t),):
                if a not in by_name or b not in by_name:
                    raise ValidationError(f"pair ({r!r}, {t!r}) names an unknown secret")
                if (a, b) not in closed:
                    closed.append((a, b))
        if not closed:
            raise ValidationError("framework has no discriminative pairs")
        for a, b in closed:
            if by_name[a].members & by_name[b].members:
                raise ValidationError(f"paired secrets {a!r} and {b!r} overlap")
        ensembles = tuple(self.ensembles)
        if not ensembles:
            raise ValidationError("framework has no ensembles")
        dims = {e.dim for e in ensembles}
        if len(dims) != 1:
            raise ValidationError("ensembles must share a state dimension")
        known = set().union(*(set(e.labels) for e in ensembles))
        for s in secrets:
            missing = s.members - known
            if missing:
                raise ValidationError(f"secret {s.name!r} lists labels absent from every ensemble: {sorted(map(str, missing))}")
        object.__setattr__(self, "secrets", secrets)
        object.__setattr__(self, "pairs", tuple(closed))
        object.__setattr__(self, "ensembles", ensembles)

    @property
    def dim(self) -> int:
        return self.ensembles[0].dim

    def secret(self, name) -> Secret:
        for s in self.secrets:
            if s.name == name:
                return s
        raise KeyError(name)

    def admissible(self):
        """Yield ``(ensemble_index, (R, T), rho_R, rho_T)`` and collect skips.

        Returns ``(items, skipped)`` where ``skipped`` lists pairs with a
        zero-mass secret.
        """
        items, skipped = [], []
        for k, ens in enumerate(self.ensembles):
            cache = {}
            for r, t in self.pairs:
                for name in (r, t):
                    if name not in cache:
                        cache[name] = conditional_state(ens, self.secret(name))
                (rr, mr), (rt, mt) = cache[r], cache[t]
                if mr <= 0 or mt <= 0:
                    skipped.append({"ensemble": k, "pair": [r, t], "reason": "zero mass"})
                    continue
                items.append((k, (r, t), rr, rt))
        return items, skipped


# ---------------------------------------------------------------------------
# reports


@dataclass
class PairResult:
    ensemble: int
    pair: tuple
    delta_min: float    # minimal delta at the budget's eps
    eps_min: float      # minimal eps at the budget's delta
    holds: bool
    dl_holds: bool | None = None

    def to_dict(self) -> dict:
        return {"ensemble": self.ensemble, "pair": list(self.pair), "delta_min": self.delta_min,
                "eps_min": self.eps_min, "holds": self.holds}


@dataclass
class QPPReport:
    holds: bool
    budget: PrivacyBudget
    measurement_class: str
    per_pair: list
    worst: PairResult | None
    skipped: list = field(default_factory=list)
    routes_agree: bool = True

    @property
    def min_eps(self) -> float:
        """Smallest eps satisfying the framework at the budget's delta (NaN if not searched)."""
        vals = [p.eps_min for p in self.per_pair]
        if any(math.isnan(v) for v in vals):
            return math.nan
        return max(vals, default=-math.inf)

    @property
    def min_delta(self) -> float:
        """Smallest delta satisfying the framework at the budget's eps."""
        return max((p.delta_min for p in self.per_pair), default=0.0)

    def to_dict(self) -> dict:
        worst = None
        if self.worst is not None:
            worst = {"ensemble": self.worst.ensemble, "pair": list(self.worst.pair), "value": self.worst.delta_min}
        return {
            "holds": self.holds,
            "budget": self.budget.to_dict(),
            "measurement_class": self.measurement_class,
            "min_eps": _json_float(self.min_eps),
            "min_delta": self.min_delta,
            "worst": worst,
            "per_pair": [_clean(p.to_dict()) for p in self.per_pair],
            "skipped": self.skipped,
            "routes_agree": self.routes_agree,
        }


def _json_float(x: float):
    if math.isnan(x):
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _clean(d: dict) -> dict:
    return {k: (_json_float(v) if isinstance(v, float) else v) for k, v in d.items()}


def _pmap(fn, items, threads: int):
    if threads and threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _finish(framework, budget, results, skipped, agree=True) -> QPPReport:
    holds = all(r.holds for r in results)
    worst = max(results, key=lambda r: r.delta_min) if results else None
    return QPPReport(holds, budget, framework.measurements.kind, results, worst, skipped, agree)


# ---------------------------------------------------------------------------
# verification


def check_qpp(framework: Framework, channel: QuantumChannel, budget: PrivacyBudget,
              slack: float = FEASIBILITY_SLACK, threads: int = 1) -> QPPReport:
    """Verify (eps, delta)-privacy of ``channel`` for ``framework``.

    For the class of all measurements the verdict comes from the hockey-stick
    divergence and is cross-checked against the information-spectrum
    divergence. Other classes are dispatched to ``check_qpp_restricted``.
    """
    if not isinstance(framework.measurements, AllMeasurements):
        return check_qpp_restricted(framework, channel, budget, slack=slack, threads=threads)
    _check_dims(framework, channel)
    items, skipped = framework.admissible()
    gamma = budget.gamma

    def one(item):
        k, pair, rr, rt = item
        x, y = channel(rr), channel(rt)
        if math.isinf(gamma):
            return PairResult(k, pair, 0.0, -math.inf, True, True)
        dmin = hockey_stick(x, y, gamma)
        holds = dmin <= budget.delta + slack
        if budget.delta >= 1:
            return PairResult(k, pair, dmin, -math.inf, holds, True)
        eps_min = dl_divergence(x, y, budget.delta).value
        # same slack on the divergence route: D^{delta+slack} <= eps iff E <= delta+slack
        relaxed = min(budget.delta + slack, 1 - 1e-12)
        dl_holds = dl_divergence(x, y, relaxed).value <= budget.eps + 1e-9
        return PairResult(k, pair, dmin, eps_min, holds, dl_holds)

    results = _pmap(one, items, threads)
    agree = all(r.holds == r.dl_holds for r in results)
    return _finish(framework, budget, results, skipped, agree)


def _check_dims(framework: Framework, channel: QuantumChannel):
    if channel.dim_in != framework.dim:
        raise ValidationError(f"channel input dim {channel.dim_in} does not match framework dim {framework.dim}")


def check_qpp_restricted(framework: Framework, channel: QuantumChannel, budget: PrivacyBudget,
                         slack: float = FEASIBILITY_SLACK, threads: int = 1) -> QPPReport:
    """Verify privacy against an explicit, PPT, or projective-subset class."""
    meas = framework.measurements
    _check_dims(framework, channel)
    items, skipped = framework.admissible()
    if isinstance(meas, ExplicitMeasurements):
        evaluate = _explicit_eval(meas, channel)
    elif isinstance(meas, PPTMeasurements):
        evaluate = _ppt_eval(meas, channel)
    elif isinstance(meas, ProjectiveSubsets):
        evaluate = _subset_eval(meas, channel)
    elif isinstance(meas, ProductMeasurements):
        evaluate = _product_eval(meas, channel)
    elif isinstance(meas, AllMeasurements):
        return check_qpp(framework, channel, budget, slack, threads)
    else:
        raise ValidationError(f"unsupported measurement class {meas!r}")

    def one(item):
        k, pair, rr, rt = item
        x, y = channel(rr), channel(rt)
        dmin, eps_min = evaluate(x, y, budget)
        return PairResult(k, pair, dmin, eps_min, dmin <= budget.delta + slack)

    results = _pmap(one, items, threads)
    return _finish(framework, budget, results, skipped)


def _ratio_eps(num: float, den: float) -> float:
    if num <= 0:
        return -math.inf
    if den <= 0:
        return math.inf
    return math.log(num / den)


def _explicit_eval(meas: ExplicitMeasurements, channel: QuantumChannel):
    ops = meas.operators
    if ops[0].shape[0] != channel.dim_out:
        raise ValidationError("measurement operators do not match the channel output dim")

    def evaluate(x, y, budget):
        a = np.array([np.trace(m @ x).real for m in ops])
        b = np.array([np.trace(m @ y).real for m in ops])
        gamma = budget.gamma
        dmin = 0.0 if math.isinf(gamma) else max(0.0, float(np.max(a - gamma * b)))
        eps_min = max(_ratio_eps(ai - budget.delta, bi) for ai, bi in zip(a, b))
        return dmin, eps_min

    return evaluate


def ppt_max_violation(x, y, gamma: float, dims) -> float:
    """``max Tr[M (x - gamma y)]`` over ``0 <= M, M^Gamma <= I`` (value >= 0)."""
    n = x.shape[0]
    prog = conic.ConicProgram("ppt-violation")
    m = prog.hermitian("M", n)
    prog.psd(np.eye(n) - m, name="M<=I")
    mg = m.map(lambda s: partial_transpose(s, dims, 1))
    prog.psd(mg, name="MT>=0")
    prog.psd(np.eye(n) - mg, name="MT<=I")
    prog.maximize(m.inner(x - gamma * y).real())
    return max(0.0, conic.solve(prog).require().primal)


def ppt_min_gamma(x, y, delta: float, dims) -> float:
    """Smallest ``gamma`` with ``max_M Tr[M (x - gamma y)] <= delta`` over PPT ``M``.

    Uses the dual of the inner maximization, which is jointly linear in
    ``gamma``: ``Tr P + Tr Q <= delta`` and ``P + Q^Gamma - S^Gamma >= x - gamma y``
    with ``P, Q, S >= 0``. Returns ``inf`` if no finite ``gamma`` works.
    """
    n = x.shape[0]
    prog = conic.ConicProgram("ppt-min-gamma")
    g = prog.scalar("gamma", nonneg=True)
    p = prog.hermitian("P", n)
    q = prog.hermitian("Q", n)
    s = prog.hermitian("S", n)
    tq = q.map(lambda a: partial_transpose(a, dims, 1))
    ts = s.map(lambda a: partial_transpose(a, dims, 1))
    prog.le(p.trace().real() + q.trace().real(), delta, name="budget")
    prog.psd(p + tq - ts - (x - g * y), name="dominate")
    prog.minimize(g)
    res = conic.solve(prog)
    if res.status == "infeasible":
        return math.inf
    return res.require().primal


def _ppt_eval(meas: PPTMeasurements, channel: QuantumChannel):
    dims = tuple(meas.dims)
    if int(np.prod(dims)) != channel.dim_out:
        raise ValidationError("PPT dims do not multiply to the channel output dim")

    def evaluate(x, y, budget):
        gamma = budget.gamma
        dmin = 0.0 if math.isinf(gamma) else ppt_max_violation(x, y, gamma, dims)
        if budget.delta >= 1:
            return dmin, -math.inf
        gmin = ppt_min_gamma(x, y, budget.delta, dims)
        return dmin, (math.log(gmin) if gmin > 0 else -math.inf)

    return evaluate


def subset_sums(values: np.ndarray) -> np.ndarray:
    """All ``2^n`` subset sums, indexed by bitmask."""
    values = np.asarray(values, dtype=float)
    if 2 ** values.size > MAX_SUBSETS:
        raise ValidationError(
            f"{2 ** values.size} subsets exceed the exhaustive limit of {MAX_SUBSETS}; "
            "use a smaller basis or an explicit measurement list")
    sums = np.zeros(1)
    for v in values:
        sums = np.concatenate([sums, sums + v])
    return sums


def _subset_eval(meas: ProjectiveSubsets, channel: QuantumChannel):
    d = channel.dim_out
    basis = np.eye(d, dtype=complex) if meas.basis is None else np.asarray(meas.basis, dtype=complex)
    if basis.shape[0] != d:
        raise ValidationError("basis vectors do not match the channel output dim")
    if 2 ** basis.shape[1] > MAX_SUBSETS:
        raise ValidationError(
            f"{2 ** basis.shape[1]} subsets exceed the exhaustive limit of {MAX_SUBSETS}; "
            "use a smaller basis or an explicit measurement list")

    def evaluate(x, y, budget):
        px = np.einsum("iy,ij,jy->y", basis.conj(), x, basis).real
        py = np.einsum("iy,ij,jy->y", basis.conj(), y, basis).real
        sx, sy = subset_sums(px), subset_sums(py)
        gamma = budget.gamma
        dmin = 0.0 if math.isinf(gamma) else max(0.0, float(np.max(sx - gamma * sy)))
        num = sx - budget.delta
        pos = num > 0
        if not np.any(pos):
            return dmin, -math.inf
        if np.any(pos & (sy <= 0)):
            return dmin, math.inf
        return dmin, float(np.max(np.log(num[pos] / sy[pos])))

    return evaluate


def _positive_projector(a: np.ndarray):
    w, v = np.linalg.eigh(a)
    keep = w > 0
    vk = v[:, keep]
    return vk @ vk.conj().T, float(np.sum(w[keep]))


def product_measurement_sup(w, dims, starts: int = 24, seed: int = 0,
                            max_iter: int = 500, tol: float = 1e-13):
    """Maximize ``Tr[(M_1 (x) M_2) W]`` over ``0 <= M_i <= I``.

    For fixed ``M_1`` the best ``M_2`` is the projector onto the positive
    part of ``Tr_1[(M_1 (x) I) W]`` and vice versa, so alternating these
    steps never decreases the objective. Starts include the identity, the
    positive-part projectors of both partial traces, spectral projectors
    and random subspaces on either side. Returns ``(value, M_1, M_2)``.
    """
    d1, d2 = (int(d) for d in dims)
    w = np.asarray(w, dtype=complex)
    if w.shape != (d1 * d2, d1 * d2):
        raise ValidationError("operator shape does not match the bipartition")
    w4 = w.reshape(d1, d2, d1, d2)

    def second(m1):
        return _positive_projector(np.einsum("ab,bjai->ji", m1, w4))

    def first(m2):
        return _positive_projector(np.einsum("ij,bjai->ba", m2, w4))

    rng = np.random.default_rng(seed)

    def seeds(d, reduced):
        out = [np.eye(d, dtype=complex), _positive_projector(reduced)[0]]
        _, v = np.linalg.eigh(reduced)
        out += [np.outer(v[:, k], v[:, k].conj()) for k in range(d)]
        target = max(starts // 2, len(out) + 1)
        while len(out) < target:
            k = int(rng.integers(1, d + 1))
            g = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
            q, _ = np.linalg.qr(g)
            out.append(q @ q.conj().T)
        return out

    tr2 = np.einsum("bjaj->ba", w4)
    tr1 = np.einsum("bjbi->ji", w4)
    best = (-math.inf, None, None)
    runs = [(m, 1) for m in seeds(d1, tr2)] + [(m, 2) for m in seeds(d2, tr1)]
    for m, side in runs:
        if side == 1:
            m1 = m
            m2, val = second(m1)
        else:
            m2 = m
            m1, val = first(m2)
        for _ in range(max_iter):
            m1, _ = first(m2)
            m2, new = second(m1)
            if new <= val + tol:
                val = max(val, new)
                break
            val = new
        if val > best[0]:
            best = (val, m1, m2)
    return best


def _product_eval(meas: ProductMeasurements, channel: QuantumChannel):
    dims = tuple(meas.dims)
    if int(np.prod(dims)) != channel.dim_out:
        raise ValidationError("product dims do not multiply to the channel output dim")

    def violation(x, y, gamma):
        return max(0.0, product_measurement_sup(x - gamma * y, dims, meas.starts)[0])

    def evaluate(x, y, budget):
        gamma = budget.gamma
        dmin = 0.0 if math.isinf(gamma) else violation(x, y, gamma)
        if not meas.search_eps:
            return dmin, math.nan
        if budget.delta >= 1 or violation(x, y, 0.0) <= budget.delta:
            return dmin, -math.inf
        # the product value never exceeds the unrestricted one, so the
        # unrestricted threshold is a valid upper bracket
        top = dl_divergence(x, y, budget.delta).value
        if math.isinf(top):
            return dmin, math.inf
        lo, hi = 0.0, math.exp(top)
        while hi - lo > 1e-9 * max(1.0, hi):
            mid = 0.5 * (lo + hi)
            if violation(x, y, mid) <= budget.delta:
                hi = mid
            else:
                lo = mid
        return dmin, math.log(hi)

    return evaluate


# ---------------------------------------------------------------------------
# builders


def _labelled(states) -> dict:
    if isinstance(states, Mapping):
        return {k: as_state(v) for k, v in states.items()}
    return {f"s{i}": as_state(v) for i, v in enumerate(states)}


def trace_distance_neighbors(threshold: float) -> Callable:
    """Neighbouring predicate ``||rho - sigma||_1 / 2 <= threshold``."""
    def predicate(rho, sigma):
        return trace_distance(rho, sigma) <= threshold + 1e-12
    return predicate


def make_qdp_framework(states, neighbors, measurements=ALL) -> Framework:
    """Differential-privacy framework: singleton secrets, neighbouring pairs.

    ``neighbors`` is a predicate on two states or an explicit list of label
    pairs. Since every secret is a single state, one ensemble with full
    support covers every distribution that could matter.
    """
    states = _labelled(states)
    labels = list(states)
    if callable(neighbors):
        pairs = [(a, b) for i, a in enumerate(labels) for b in labels[i + 1:]
                 if neighbors(states[a], states[b])]
    else:
        pairs = [tuple(p) for p in neighbors]
    if not pairs:
        raise ValidationError("neighbouring relation is empty")
    secrets = tuple(Secret(lab, frozenset([lab])) for lab in labels)
    return Framework(secrets, tuple(pairs), (Ensemble.uniform(states),), measurements)


def make_qldp_framework(states, measurements=ALL) -> Framework:
    """Local privacy: every pair of distinct input states is discriminative."""
    states = _labelled(states)
    labels = list(states)
    if len(labels) < 2:
        raise ValidationError("local privacy needs at least two states")
    pairs = [(a, b) for i, a in enumerate(labels) for b in labels[i + 1:]]
    secrets = tuple(Secret(lab, frozenset([lab])) for lab in labels)
    return Framework(secrets, tuple(pairs), (Ensemble.uniform(states),), measurements)


def encode_classical_pp(alphabet, secrets: Mapping, priors: Sequence, pairs: Iterable | None = None) -> Framework:
    """Embed a classical pufferfish framework with ``rho^x = |x><x|``.

    ``alphabet`` is a size or a list of symbols, ``secrets`` maps a name to
    a set of symbols, and ``priors`` lists probability vectors over the
    alphabet. ``pairs`` defaults to every pair of disjoint secrets.
    """
    symbols = list(range(alphabet)) if isinstance(alphabet, int) else list(alphabet)
    d = len(symbols)
    states = {x: basis_state(d, i) for i, x in enumerate(symbols)}
    ensembles = tuple(Ensemble(tuple(symbols), tuple(p), states) for p in priors)
    sec = tuple(Secret(name, frozenset(m)) for name, m in secrets.items())
    if pairs is None:
        pairs = [(a.name, b.name) for i, a in enumerate(sec) for b in sec[i + 1:] if not (a.members & b.members)]
    return Framework(sec, tuple(pairs), ensembles, ProjectiveSubsets(None))


def framework_from_dict(d: Mapping, state_loader: Callable | None = None) -> Framework:
    """Build a framework from its JSON form.

    ``ensembles[i].states`` maps labels to matrix objects (or to paths when
    ``state_loader`` is given).
    """
    from .core import matrix_from_dict

    def load(v):
        if isinstance(v, str):
            if state_loader is None:
                raise ValidationError("state references need a loader")
            return state_loader(v)
        return matrix_from_dict(v)

    try:
        secrets = tuple(Secret(s["name"], frozenset(s["members"])) for s in d["secrets"])
        pairs = tuple(tuple(p) for p in d["pairs"])
        ensembles = tuple(
            Ensemble(tuple(e["labels"]), tuple(e["probs"]), {k: load(v) for k, v in e["states"].items()})
            for e in d["ensembles"])
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed framework JSON: {exc}") from exc
    mc = d.get("measurement_class", {"kind": "ALL"})
    kind = mc.get("kind", "ALL") if isinstance(mc, Mapping) else str(mc)
    if kind == "ALL":
        meas = ALL
    elif kind == "PPT":
        meas = PPTMeasurements(tuple(mc["dims"]))
    elif kind == "EXPLICIT":
        meas = ExplicitMeasurements(tuple(matrix_from_dict(m) for m in mc["operators"]))
    elif kind == "PRODUCT":
        meas = ProductMeasurements(tuple(mc["dims"]))
    elif kind == "PROJECTIVE_SUBSETS":
        basis = mc.get("basis")
        meas = ProjectiveSubsets(None if basis is None else matrix_from_dict(basis))
    else:
        raise ValidationError(f"unknown measurement class {kind!r}")
    return Framework(secrets, pairs, ensembles, meas, symmetric=bool(d.get("symmetric", True)))
