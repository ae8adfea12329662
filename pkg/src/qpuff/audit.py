"""Hypothesis-test audit of a black-box channel against an (eps, delta) claim.

For a pair ``(rho, sigma)`` the statistic is

    T^eps(rho, sigma, A) = ||A(rho) - e^eps A(sigma)||_1 / (e^eps + 1),

and the claim holds for the pair iff ``T^eps <= g(eps, delta)`` in both
orders, with ``g = (2 delta + e^eps - 1) / (e^eps + 1)``. An estimator with
additive error ``alpha`` (failure probability ``beta``) is simulated
classically: the exact value plus bounded noise. Accepting when the
estimate is at most ``g + alpha`` keeps the type-I error at most ``beta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special, stats

from .core import QuantumChannel, ValidationError, as_state, eigh, trace_norm
from .framework import FEASIBILITY_SLACK, PrivacyBudget, _pmap

TRUNCATION = 5.0        # noise support is [-5 alpha, 5 alpha]
RANK_FLOOR = 1e-12


def t_eps(rho, sigma, a: QuantumChannel, eps: float) -> float:
    rho, sigma = as_state(rho), as_state(sigma)
    if rho.shape != sigma.shape or rho.shape[0] != a.dim_in:
        raise ValidationError("state dims do not match the channel input")
    gamma = math.exp(eps)
    return trace_norm(a(rho) - gamma * a(sigma)) / (gamma + 1)


def threshold_g(budget: PrivacyBudget) -> float:
    gamma = budget.gamma
    if math.isinf(gamma):
        return 1.0
    return (2 * budget.delta + gamma - 1) / (gamma + 1)


def t_floor(eps: float) -> float:
    """Smallest possible statistic, ``(e^eps - 1) / (e^eps + 1)``."""
    return math.tanh(eps / 2)


# ---------------------------------------------------------------------------
# simulated estimator


def sample_count(alpha: float, beta: float, r: int) -> int:
    """Cost model ``log(1/beta) r^2 / alpha^5 log^2(r/alpha) log^2(1/alpha)``, unit constant.

    Natural logarithms; rounded up. ``alpha >= 1`` needs no samples since
    any guess in ``[0, 1]`` is within ``alpha``.
    """
    _check_ab(alpha, beta)
    if r < 1:
        raise ValidationError(f"rank must be >= 1, got {r}")
    if alpha >= 1:
        return 0
    val = math.log(1 / beta) * r * r / alpha ** 5 * math.log(r / alpha) ** 2 * math.log(1 / alpha) ** 2
    return int(math.ceil(val))


def _check_ab(alpha, beta):
    if not alpha > 0:
        raise ValidationError(f"alpha must be > 0, got {alpha}")
    if not 0 < beta < 1:
        raise ValidationError(f"beta must lie in (0, 1), got {beta}")


@dataclass(frozen=True)
class NoiseModel:
    """Centred Gaussian with scale ``sigma``, optionally truncated to ``[-bound, bound]``."""

    sigma: float
    bound: float

    def sample(self, rng, size=None):
        if math.isinf(self.bound):
            return rng.normal(0.0, self.sigma, size)
        b = self.bound / self.sigma
        return stats.truncnorm.rvs(-b, b, scale=self.sigma, size=size, random_state=rng)

    def tail(self, t: float) -> float:
        """``P(|noise| > t)``."""
        if math.isinf(self.bound):
            return float(2 * special.ndtr(-t / self.sigma))
        if t >= self.bound:
            return 0.0
        b, x = self.bound / self.sigma, t / self.sigma
        return float((special.ndtr(b) - special.ndtr(x)) / (special.ndtr(b) - 0.5))


def noise_model(alpha: float, beta: float) -> NoiseModel:
    """Noise with ``P(|noise| > alpha) = beta`` exactly.

    A Gaussian truncated at ``5 alpha`` is used when it can reach that tail;
    its tail mass at ``alpha`` rises to 0.8 as the scale grows, so larger
    ``beta`` falls back to an untruncated Gaussian.
    """
    _check_ab(alpha, beta)
    bound = TRUNCATION * alpha
    if beta < (TRUNCATION - 1) / TRUNCATION - 1e-9:
        def gap(log_s):
            return NoiseModel(math.exp(log_s), bound).tail(alpha) - beta
        lo, hi = math.log(alpha) - 6, math.log(alpha) + 12
        return NoiseModel(math.exp(optimize.brentq(gap, lo, hi, xtol=1e-14)), bound)
    return NoiseModel(float(alpha / special.ndtri(1 - beta / 2)), math.inf)


def noisy_estimate(exact: float, alpha: float, beta: float, r: int, rng):
    """Simulated estimate of a statistic in ``[0, 1]``: ``(estimate, samples)``."""
    model = noise_model(alpha, beta)
    est = float(np.clip(exact + model.sample(rng), 0.0, 1.0))
    return est, sample_count(alpha, beta, r)


# ---------------------------------------------------------------------------
# audit


@dataclass
class AuditConfig:
    budget: PrivacyBudget
    pairs: list = field(repr=False)
    alpha: float = 0.05
    beta: float = 0.1
    seed: int = 0
    exact: bool = False

    def __post_init__(self):
        _check_ab(self.alpha, self.beta)
        self.pairs = [(as_state(r), as_state(s)) for r, s in self.pairs]
        if not self.pairs:
            raise ValidationError("audit needs at least one pair")


@dataclass
class AuditReport:
    decision: str
    statistic: float
    threshold: float
    per_pair: list
    sample_budget: int
    worst: dict | None = None

    def __post_init__(self):
        if (self.decision == "accept-H0") != (self.statistic <= self.threshold):
            raise ValidationError("decision inconsistent with statistic and threshold")

    @property
    def accepted(self) -> bool:
        return self.decision == "accept-H0"

    def to_dict(self) -> dict:
        return {"decision": self.decision, "statistic": self.statistic, "threshold": self.threshold,
                "sample_budget": self.sample_budget, "worst": self.worst, "per_pair": self.per_pair}


def _rank(a: np.ndarray) -> int:
    return max(1, int(np.sum(eigh(a)[0] > RANK_FLOOR)))


def exact_statistics(a: QuantumChannel, cfg: AuditConfig) -> list[dict]:
    """Exact statistic for every pair in both orders, with the rank used for costing."""
    out = []
    floor = t_floor(cfg.budget.eps) if math.isfinite(cfg.budget.eps) else 1.0
    for k, (r, s) in enumerate(cfg.pairs):
        xr, xs = a(r), a(s)
        rank = max(_rank(xr), _rank(xs))
        for order, (x, y) in (("forward", (r, s)), ("reverse", (s, r))):
            t = t_eps(x, y, a, cfg.budget.eps) if math.isfinite(cfg.budget.eps) else 0.0
            if t < floor - 1e-9:
                raise ValidationError(f"statistic {t} below its floor {floor}")
            out.append({"pair": k, "order": order, "exact": t, "rank": rank})
    return out


def _decide(stats_, threshold, budget_samples):
    worst = max(stats_, key=lambda e: e["estimate"])
    statistic = worst["estimate"]
    decision = "accept-H0" if statistic <= threshold else "reject-H0"
    return AuditReport(decision, statistic, threshold, stats_, budget_samples,
                       {"pair": worst["pair"], "order": worst["order"]})


def audit(a: QuantumChannel, cfg: AuditConfig, rng=None) -> AuditReport:
    """Audit ``a`` on the configured pairs.

    Exact mode compares the exact statistic with ``g`` at ``delta`` plus the
    checker's feasibility slack, so its verdict matches the checker. Noisy
    mode splits ``beta`` evenly over all estimates (both orders of every
    pair), so the chance that any estimate misses by more than ``alpha``,
    and hence the type-I error, is at most ``beta``.
    """
    stats_ = exact_statistics(a, cfg)
    if cfg.exact:
        relaxed = PrivacyBudget(cfg.budget.eps, min(1.0, cfg.budget.delta + FEASIBILITY_SLACK))
        for e in stats_:
            e["estimate"] = e["exact"]
        return _decide(stats_, threshold_g(relaxed), 0)
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    beta_each = cfg.beta / len(stats_)
    total = 0
    for e in stats_:
        e["estimate"], n = noisy_estimate(e["exact"], cfg.alpha, beta_each, e["rank"], rng)
        total += n
    return _decide(stats_, threshold_g(cfg.budget) + cfg.alpha, total)


@dataclass
class TypeOneResult:
    rate: float
    trials: int
    beta: float

    @property
    def stderr(self) -> float:
        return math.sqrt(self.beta * (1 - self.beta) / self.trials)

    @property
    def within_bound(self) -> bool:
        return self.rate <= self.beta + 3 * self.stderr

    def to_dict(self) -> dict:
        return {"rate": self.rate, "trials": self.trials, "beta": self.beta,
                "stderr": self.stderr, "within_bound": self.within_bound}


def type1_curve(a: QuantumChannel, cfg: AuditConfig, trials: int = 10_000, threads: int = 1) -> TypeOneResult:
    """Monte-Carlo rejection rate of the noisy audit on a channel satisfying H0.

    Trial ``i`` draws from the ``i``-th child of ``SeedSequence(cfg.seed)``.
    Refuses when the exact audit rejects, since the rate would then be a
    power estimate rather than a type-I error.
    """
    exact_cfg = AuditConfig(cfg.budget, cfg.pairs, cfg.alpha, cfg.beta, cfg.seed, exact=True)
    if not audit(a, exact_cfg).accepted:
        raise ValidationError("channel violates the audited claim; type-I rate is undefined")
    base = exact_statistics(a, cfg)
    threshold = threshold_g(cfg.budget) + cfg.alpha
    if cfg.exact:
        return TypeOneResult(0.0, trials, cfg.beta)
    model = noise_model(cfg.alpha, cfg.beta / len(base))
    exact = np.array([e["exact"] for e in base])

    def one(seed_seq):
        rng = np.random.default_rng(seed_seq)
        est = np.clip(exact + model.sample(rng, exact.size), 0.0, 1.0)
        return bool(est.max() > threshold)

    seeds = np.random.SeedSequence(cfg.seed).spawn(trials)
    rejections = sum(_pmap(one, seeds, threads))
    return TypeOneResult(rejections / trials, trials, cfg.beta)
