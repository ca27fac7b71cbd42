"""Auditing detection-event logs for setting-independent loss.

A log holds, for each of the four setting pairs, the number of trials and
the four outcome counts; everything else is a failure. The audit tests
whether the pair efficiencies factor as f(alpha) g(beta), the only form of
setting dependence that postselection can undo for the prepared state.

Passing the audit says nothing about the efficiencies of other internal
states, so it can never certify the hidden-variable-level condition.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import chi2

from .errors import EmptyCellError, OutOfDomainError
from .kernels import fit_product_binomial
from .scenario import (
    ALICE_LABELS,
    BOB_LABELS,
    CHSH_TERMS,
    SETTING_PAIRS,
    BellScenario,
    probability_table,
)

CSV_HEADER = ("setting_a", "setting_b", "n_trials", "n_pp", "n_pm", "n_mp", "n_mm")
DEFAULT_BOOTSTRAP = 2000
SMALL_EXPECTED = 10.0

_ALICE_INDEX = {v: int(k) for k, v in ALICE_LABELS.items()}
_BOB_INDEX = {v: int(k) for k, v in BOB_LABELS.items()}

LIMITATION_NOTE = (
    "The test concerns the efficiencies of the prepared state only. A pass "
    "does not establish that loss is setting-independent for every internal "
    "state or hidden value; a rejection does show that it is not."
)


class LogFormatError(ValueError):
    """Malformed event-log CSV."""


@dataclass(frozen=True)
class EventLog:
    """``trials[alpha, beta]`` and ``counts[alpha, beta, (pp, pm, mp, mm)]``."""

    trials: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        trials = np.array(self.trials, dtype=np.int64)
        counts = np.array(self.counts, dtype=np.int64)
        if trials.shape != (2, 2) or counts.shape != (2, 2, 4):
            raise LogFormatError("log needs trials (2, 2) and counts (2, 2, 4)")
        if np.any(trials < 0) or np.any(counts < 0):
            raise LogFormatError("counts must be non-negative")
        if np.any(counts.sum(axis=2) > trials):
            raise LogFormatError("more detections than trials for some setting pair")
        trials.setflags(write=False)
        counts.setflags(write=False)
        object.__setattr__(self, "trials", trials)
        object.__setattr__(self, "counts", counts)

    @property
    def successes(self) -> np.ndarray:
        return self.counts.sum(axis=2)

    @property
    def failures(self) -> np.ndarray:
        return self.trials - self.successes

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for a, b in SETTING_PAIRS:
            w.writerow([ALICE_LABELS[a], BOB_LABELS[b], self.trials[a, b], *self.counts[a, b]])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "EventLog":
        rows = list(csv.reader(io.StringIO(text)))
        rows = [r for r in rows if any(c.strip() for c in r)]
        if not rows or tuple(c.strip() for c in rows[0]) != CSV_HEADER:
            raise LogFormatError(f"header must be {','.join(CSV_HEADER)}")
        body = rows[1:]
        if len(body) != 4:
            raise LogFormatError(f"expected exactly four rows, got {len(body)}")
        trials = np.full((2, 2), -1, dtype=np.int64)
        counts = np.zeros((2, 2, 4), dtype=np.int64)
        for row in body:
            if len(row) != len(CSV_HEADER):
                raise LogFormatError(f"row has {len(row)} fields: {row}")
            sa, sb = row[0].strip(), row[1].strip()
            if sa not in _ALICE_INDEX or sb not in _BOB_INDEX:
                raise LogFormatError(f"unknown setting labels ({sa}, {sb})")
            a, b = _ALICE_INDEX[sa], _BOB_INDEX[sb]
            if trials[a, b] >= 0:
                raise LogFormatError(f"duplicate row for ({sa}, {sb})")
            try:
                values = [int(c) for c in row[2:]]
            except ValueError as exc:
                raise LogFormatError(f"non-integer count in {row}") from exc
            trials[a, b] = values[0]
            counts[a, b] = values[1:]
        return cls(trials, counts)


def simulate_log(s: BellScenario, n_per_pair: int, seed: int = 0) -> EventLog:
    """Multinomial sample of outcomes and failures for each setting pair."""
    if n_per_pair < 0:
        raise OutOfDomainError("n_per_pair must be non-negative")
    probs = probability_table(s)  # [alpha, beta, i, j], outcome index 0 is +
    rng = np.random.default_rng(seed)
    trials = np.full((2, 2), n_per_pair, dtype=np.int64)
    counts = np.zeros((2, 2, 4), dtype=np.int64)
    for a, b in SETTING_PAIRS:
        p = np.clip(probs[a, b].ravel(), 0.0, 1.0)
        fail = max(0.0, 1.0 - p.sum())
        full = np.append(p, fail)
        counts[a, b] = rng.multinomial(n_per_pair, full / full.sum())[:4]
    return EventLog(trials, counts)


def log_from_efficiencies(eff, n_per_pair: int, seed: int = 0) -> EventLog:
    """Log whose detections are split evenly over outcomes; only efficiencies matter."""
    eff = np.asarray(eff, dtype=float).reshape(2, 2)
    rng = np.random.default_rng(seed)
    trials = np.full((2, 2), n_per_pair, dtype=np.int64)
    counts = np.zeros((2, 2, 4), dtype=np.int64)
    for a, b in SETTING_PAIRS:
        p = np.append(np.full(4, eff[a, b] / 4), 1 - eff[a, b])
        counts[a, b] = rng.multinomial(n_per_pair, p)[:4]
    return EventLog(trials, counts)


def _require_trials(log: EventLog):
    if np.any(log.trials == 0):
        raise EmptyCellError("every setting pair needs at least one trial")


def estimate_efficiencies(log: EventLog) -> tuple[np.ndarray, np.ndarray]:
    """(eff_hat[alpha, beta], stderr[alpha, beta])."""
    _require_trials(log)
    eff = log.successes / log.trials
    return eff, np.sqrt(eff * (1 - eff) / log.trials)


def _loglik(succ, trials, p) -> float:
    p = np.clip(p, 0.0, 1.0)
    fail = trials - succ
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(succ > 0, succ * np.log(p), 0.0)
        b = np.where(fail > 0, fail * np.log1p(-p), 0.0)
    return float(np.sum(a + b))


@dataclass(frozen=True)
class ProductFit:
    f: np.ndarray
    g: np.ndarray
    loglik: float
    iterations: int

    @property
    def expected(self) -> np.ndarray:
        return np.clip(np.outer(self.f, self.g), 0.0, 1.0)


def fit_product(log: EventLog) -> ProductFit:
    """Maximum-likelihood f(alpha) g(beta) with max g = 1."""
    _require_trials(log)
    f, g, ll, it = fit_product_binomial(log.successes.astype(float), log.trials.astype(float))
    return ProductFit(np.asarray(f), np.asarray(g), float(ll), int(it))


def lr_statistic(log: EventLog) -> tuple[float, ProductFit]:
    fit = fit_product(log)
    succ, n = log.successes.astype(float), log.trials.astype(float)
    saturated = _loglik(succ, n, succ / n)
    return max(0.0, 2.0 * (saturated - fit.loglik)), fit


def _bootstrap_pvalue(stat: float, fit: ProductFit, trials, resamples: int, seed: int) -> float:
    rng = np.random.default_rng(seed)
    p = fit.expected
    exceed = 0
    for _ in range(resamples):
        succ = rng.binomial(trials, p)
        fake = np.zeros((2, 2, 4), dtype=np.int64)
        fake[..., 0] = succ
        s, _ = lr_statistic(EventLog(trials, fake))
        exceed += s >= stat - 1e-12
    return (exceed + 1) / (resamples + 1)


@dataclass(frozen=True)
class BellEstimate:
    value: float
    ci_low: float
    ci_high: float
    stderr: float


def _bell_from_counts(counts: np.ndarray) -> float:
    """Postselected B from [alpha, beta, (pp, pm, mp, mm)] counts."""
    tot = counts.sum(axis=2)
    if np.any(tot == 0):
        raise EmptyCellError("a setting pair has no detections")
    corr = (counts[..., 0] - counts[..., 1] - counts[..., 2] + counts[..., 3]) / tot
    return float(sum(s * corr[a, b] for a, b, s in CHSH_TERMS))


def postselected_bell_estimate(
    log: EventLog, resamples: int = DEFAULT_BOOTSTRAP, seed: int = 0, level: float = 0.95
) -> BellEstimate:
    """Plug-in estimate with a percentile bootstrap over trials."""
    value = _bell_from_counts(log.counts)
    rng = np.random.default_rng(seed)
    draws = []
    for _ in range(resamples):
        boot = np.zeros_like(log.counts)
        for a, b in SETTING_PAIRS:
            p = np.append(log.counts[a, b], log.failures[a, b]) / log.trials[a, b]
            boot[a, b] = rng.multinomial(log.trials[a, b], p)[:4]
        if np.all(boot.sum(axis=2) > 0):
            draws.append(_bell_from_counts(boot))
    if not draws:
        return BellEstimate(value, value, value, 0.0)
    draws = np.array(draws)
    tail = (1 - level) / 2
    lo, hi = np.quantile(draws, [tail, 1 - tail])
    return BellEstimate(value, float(lo), float(hi), float(draws.std(ddof=1)) if draws.size > 1 else 0.0)


CONSISTENT = "consistent_with_fair"
REJECTED = "rejected"


@dataclass(frozen=True)
class AuditReport:
    eff_hat: list
    eff_stderr: list
    factor_fit: dict
    test_statistic: float
    p_value: float
    method: str
    significance: float
    verdict: str
    bell_estimate: dict
    note: str = LIMITATION_NOTE
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def fairness_test(
    log: EventLog,
    significance: float = 0.05,
    bootstrap: int | None = None,
    seed: int = 0,
    bell_resamples: int = DEFAULT_BOOTSTRAP,
) -> AuditReport:
    """Likelihood-ratio test of eff(alpha, beta) = f(alpha) g(beta).

    The statistic is compared with chi-square(1) unless some expected failure
    count is below 10, in which case a parametric bootstrap with `bootstrap`
    resamples (default 2000) under the fitted product model is used. Passing
    ``bootstrap=0`` forces the asymptotic p-value.
    """
    if not 0 < significance <= 0.5:
        raise OutOfDomainError("significance must lie in (0, 0.5]")
    eff, se = estimate_efficiencies(log)
    stat, fit = lr_statistic(log)
    expected_fail = log.trials * (1 - fit.expected)
    small = bool(np.any(expected_fail < SMALL_EXPECTED))
    n_boot = DEFAULT_BOOTSTRAP if bootstrap is None else int(bootstrap)
    if small and n_boot > 0:
        p_value = _bootstrap_pvalue(stat, fit, log.trials, n_boot, seed)
        method = f"parametric bootstrap ({n_boot})"
    else:
        p_value = float(chi2.sf(stat, df=1))
        method = "chi2(1)"
    try:
        be = postselected_bell_estimate(log, bell_resamples, seed)
        bell = asdict(be)
    except EmptyCellError:
        bell = {"value": None, "ci_low": None, "ci_high": None, "stderr": None}
    return AuditReport(
        eff_hat=eff.tolist(),
        eff_stderr=se.tolist(),
        factor_fit={"alice": fit.f.tolist(), "bob": fit.g.tolist(), "loglik": fit.loglik},
        test_statistic=float(stat),
        p_value=float(p_value),
        method=method,
        significance=float(significance),
        verdict=REJECTED if p_value < significance else CONSISTENT,
        bell_estimate=bell,
    )


def combined_fairness_test(logs, significance: float = 0.05, **kwargs) -> dict:
    """Per-log tests, Bonferroni-combined: rejected if any p < significance / n."""
    if not logs:
        raise OutOfDomainError("need at least one log")
    level = significance / len(logs)
    reports = [fairness_test(log, level, **kwargs) for log in logs]
    p_min = min(r.p_value for r in reports)
    return {
        "reports": [r.to_dict() for r in reports],
        "per_log_significance": level,
        "combined_p_value": min(1.0, p_min * len(logs)),
        "verdict": REJECTED if p_min < level else CONSISTENT,
        "note": LIMITATION_NOTE
        + " Several preparations strengthen the audit but still cannot prove the condition.",
    }


__all__ = [
    "AuditReport",
    "BellEstimate",
    "CONSISTENT",
    "EventLog",
    "LogFormatError",
    "ProductFit",
    "REJECTED",
    "combined_fairness_test",
    "estimate_efficiencies",
    "fairness_test",
    "fit_product",
    "log_from_efficiencies",
    "lr_statistic",
    "postselected_bell_estimate",
    "simulate_log",
]
