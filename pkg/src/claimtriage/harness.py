"""Metrics, risk-coverage curves, cost model, robustness sims, and runs.

Everything here is pure computation over labels, scores, and records except
run_pipeline, which walks the full route-then-resolve loop (fast verdicts
plus expert escalation) and aggregates a machine-readable report.
"""

from __future__ import annotations

import math
import random
from collections import defaultdict
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .claims import CLASS_ORDER, DatasetRecord, ErrorCategory, Label, Verdict
from .errors import (
    ConfigError,
    EmptyInput,
    InsufficientPoints,
    InsufficientPool,
    InvalidInput,
    LengthMismatch,
    SingleClass,
    TooFewSamples,
    TransportError,
)
from .expert import EndpointConfig, build_copt_prompt, evaluate_many, mock_expert
from .router import (
    CalibrationProfile,
    Path,
    SweepPoint,
    TriageDecision,
    binary_fail_f1,
    fast_verdict,
    route,
    sweep_risk_coverage,
)

DEFAULT_FAST_LATENCY_S = 0.12
DEFAULT_EXPERT_LATENCY_S = 6.88
DEFAULT_HOURLY_RATE_USD = 3.0
DEFAULT_VOLUME = 1_000_000


# --- metrics ---

@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    binary_f1: float
    macro_f1: float
    macro_f1_classes: tuple[str, ...]
    zero_support_classes: tuple[str, ...]
    per_class: dict
    confusion_labels: tuple[str, ...]
    confusion: tuple[tuple[int, ...], ...]
    auc: Optional[float]
    n: int

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "binary_f1": self.binary_f1,
            "macro_f1": self.macro_f1,
            "macro_f1_classes": list(self.macro_f1_classes),
            "zero_support_classes": list(self.zero_support_classes),
            "per_class": self.per_class,
            "confusion_labels": list(self.confusion_labels),
            "confusion": [list(row) for row in self.confusion],
            "auc": self.auc,
            "n": self.n,
        }


def _class_name(label: Label, fine: bool) -> str:
    if label.verdict is Verdict.PASS:
        return CLASS_ORDER[0] if fine else "valid"
    if fine:
        return label.category.value
    return "invalid"


def compute_metrics(
    predictions: Sequence[Label],
    gold: Sequence[Label],
    scores: Optional[Sequence[float]] = None,
) -> MetricsReport:
    """Verdict accuracy, Fail-positive F1, macro F1, per-class table, AUC.

    Fine-grained (six-class) tallies apply when every Fail label on both
    sides carries a category; otherwise classes collapse to valid/invalid.
    """
    if len(predictions) != len(gold):
        raise LengthMismatch(f"{len(predictions)} predictions vs {len(gold)} gold labels")
    if not gold:
        raise EmptyInput("cannot compute metrics on an empty set")
    if scores is not None and len(scores) != len(gold):
        raise LengthMismatch(f"{len(scores)} scores vs {len(gold)} gold labels")

    fine = all(
        l.category is not None
        for l in (*predictions, *gold) if l.verdict is Verdict.FAIL
    )
    labels = CLASS_ORDER if fine else ("valid", "invalid")
    pred_names = [_class_name(p, fine) for p in predictions]
    gold_names = [_class_name(g, fine) for g in gold]

    accuracy = sum(p.verdict is g.verdict for p, g in zip(predictions, gold)) / len(gold)

    index = {name: i for i, name in enumerate(labels)}
    matrix = [[0] * len(labels) for _ in labels]
    for g, p in zip(gold_names, pred_names):
        matrix[index[g]][index[p]] += 1

    per_class = {}
    f1s = []
    supported = []
    zero_support = []
    for i, name in enumerate(labels):
        support = sum(matrix[i])
        tp = matrix[i][i]
        predicted = sum(matrix[r][i] for r in range(len(labels)))
        if support == 0:
            zero_support.append(name)
            continue
        precision = tp / predicted if predicted else 0.0
        recall = tp / support
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[name] = {
            "precision": precision, "recall": recall, "f1": f1, "support": support,
        }
        supported.append(name)
        f1s.append(f1)

    auc = None
    if scores is not None:
        try:
            auc = compute_auc(scores, gold)
        except SingleClass:
            auc = None

    return MetricsReport(
        accuracy=accuracy,
        binary_f1=binary_fail_f1(predictions, gold),
        macro_f1=sum(f1s) / len(f1s),
        macro_f1_classes=tuple(supported),
        zero_support_classes=tuple(zero_support),
        per_class=per_class,
        confusion_labels=tuple(labels),
        confusion=tuple(tuple(row) for row in matrix),
        auc=auc,
        n=len(gold),
    )


def compute_auc(scores: Sequence[float], gold: Sequence[Label]) -> float:
    """P(random Fail outscores random Pass), ties at half; rank statistic."""
    y = np.array([1 if g.verdict is Verdict.FAIL else 0 for g in gold])
    s = np.asarray(scores, dtype=float)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("AUC needs both a Pass and a Fail sample")
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(len(s))
    sorted_s = s[order]
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2 + 1
        i = j + 1
    pos_rank_sum = float(ranks[y == 1].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg)


# --- curves ---

@dataclass(frozen=True)
class CurvePoint:
    gamma: float
    retained_f1: Optional[float]
    escalated: int


def retained_f1_curve(
    uncertainties: Sequence[float],
    gatekeeper_verdicts: Sequence[Label],
    gold: Sequence[Label],
    grid: Optional[Sequence[float]] = None,
    f1_mode: str = "binary",
) -> list[CurvePoint]:
    points = sweep_risk_coverage(uncertainties, gatekeeper_verdicts, gold, grid, f1_mode)
    n = len(uncertainties)
    return [
        CurvePoint(p.gamma, p.retained_f1, min(n, math.ceil(p.gamma * n - 1e-9)))
        for p in points
    ]


CurveLike = Union[CurvePoint, SweepPoint, tuple]


def _curve_pairs(curve: Sequence[CurveLike]) -> list[tuple[float, Optional[float]]]:
    pairs = []
    for p in curve:
        if isinstance(p, (CurvePoint, SweepPoint)):
            pairs.append((p.gamma, p.retained_f1))
        else:
            pairs.append((float(p[0]), None if p[1] is None else float(p[1])))
    return pairs


def aurc(curve: Sequence[CurveLike]) -> float:
    """Trapezoidal area of risk (1 - retained F1) over the defined gammas."""
    defined = [(g, f1) for g, f1 in _curve_pairs(curve) if f1 is not None]
    if len(defined) < 2:
        raise InsufficientPoints("AURC needs at least two defined curve points")
    defined.sort(key=lambda p: p[0])
    area = 0.0
    for (g1, f1), (g2, f2) in zip(defined, defined[1:]):
        area += (g2 - g1) * ((1 - f1) + (1 - f2)) / 2
    return area


# --- cost model ---

@dataclass(frozen=True)
class CostProfile:
    fast_latency_s: float = DEFAULT_FAST_LATENCY_S
    expert_latency_s: float = DEFAULT_EXPERT_LATENCY_S
    hourly_rate_usd: float = DEFAULT_HOURLY_RATE_USD
    volume: int = DEFAULT_VOLUME

    def __post_init__(self):
        if min(self.fast_latency_s, self.expert_latency_s,
               self.hourly_rate_usd, self.volume) <= 0:
            raise ConfigError("cost profile fields must all be positive")


def estimate_cost(profile: CostProfile, escalation_rate: float) -> tuple[float, float]:
    """(seconds per claim, USD for profile.volume claims) at the given rate."""
    if not 0.0 <= escalation_rate <= 1.0:
        raise InvalidInput(f"escalation rate {escalation_rate} outside [0, 1]")
    seconds = ((1.0 - escalation_rate) * profile.fast_latency_s
               + escalation_rate * profile.expert_latency_s)
    usd = seconds * profile.volume / 3600 * profile.hourly_rate_usd
    return seconds, usd


# --- robustness simulations ---

def parse_ratio(ratio: Union[str, float, int, tuple]) -> tuple[int, int]:
    if isinstance(ratio, tuple):
        p, f = ratio
    elif isinstance(ratio, str):
        try:
            p, f = ratio.split(":")
        except ValueError as exc:
            raise InvalidInput(f"ratio {ratio!r} is not of the form P:F") from exc
    else:
        # a bare number means P passes per single fail
        p, f = ratio, 1
    p, f = int(p), int(f)
    if p <= 0 or f <= 0:
        raise InvalidInput("ratio parts must be positive")
    return p, f


def simulate_skew(
    records: Sequence[DatasetRecord],
    pass_to_fail_ratio: Union[str, float, int, tuple],
    seed: int,
    total: Optional[int] = None,
) -> list[DatasetRecord]:
    """Deterministic subsample at an exact Pass:Fail ratio.

    Fail records are drawn uniformly across the five categories (remainders
    go to the earliest categories in class order).
    """
    p_part, f_part = parse_ratio(pass_to_fail_ratio)
    unit = p_part + f_part
    passes = [r for r in records if r.label.verdict is Verdict.PASS]
    by_cat: dict[ErrorCategory, list[DatasetRecord]] = defaultdict(list)
    for r in records:
        if r.label.category is not None:
            by_cat[r.label.category].append(r)

    def _needs(k: int) -> tuple[int, dict[ErrorCategory, int]]:
        n_fail = k * f_part
        base, rem = divmod(n_fail, len(ErrorCategory))
        need = {}
        for i, cat in enumerate(ErrorCategory):
            need[cat] = base + (1 if i < rem else 0)
        return k * p_part, need

    if total is None:
        k = 0
        upper = min(
            len(passes) // p_part if p_part else 0,
            (sum(len(v) for v in by_cat.values())) // f_part if f_part else 0,
        )
        for cand in range(upper, 0, -1):
            n_pass, need = _needs(cand)
            if n_pass <= len(passes) and all(len(by_cat[c]) >= m for c, m in need.items()):
                k = cand
                break
        if k == 0:
            raise InsufficientPool("no subsample size satisfies the requested ratio")
    else:
        k, rem = divmod(total, unit)
        if rem or k == 0:
            raise InvalidInput(
                f"total {total} does not divide into the {p_part}:{f_part} ratio"
            )
        n_pass, need = _needs(k)
        if n_pass > len(passes) or any(len(by_cat[c]) < m for c, m in need.items()):
            raise InsufficientPool(
                f"pool cannot supply {n_pass} Pass and {dict((c.value, m) for c, m in need.items())}"
            )

    n_pass, need = _needs(k)
    rng = random.Random(seed)
    chosen = rng.sample(passes, n_pass)
    for cat in ErrorCategory:
        chosen.extend(rng.sample(by_cat[cat], need[cat]))
    rng.shuffle(chosen)
    return chosen


def stratified_folds(
    records: Sequence[DatasetRecord], k: int, seed: int
) -> list[tuple[list[DatasetRecord], list[DatasetRecord]]]:
    """k (train, validation) partitions preserving class mix within one sample."""
    if k < 2:
        raise InvalidInput("need at least 2 folds")
    groups: dict[str, list[DatasetRecord]] = defaultdict(list)
    for r in records:
        groups[_class_name(r.label, fine=True)].append(r)
    thin = [name for name, members in groups.items() if len(members) < k]
    if thin:
        raise TooFewSamples(f"classes with fewer than {k} members: {sorted(thin)}")
    rng = random.Random(seed)
    assignments: list[list[DatasetRecord]] = [[] for _ in range(k)]
    for name in sorted(groups):
        members = list(groups[name])
        rng.shuffle(members)
        for i, r in enumerate(members):
            assignments[i % k].append(r)
    folds = []
    for i in range(k):
        val = assignments[i]
        train = [r for j in range(k) if j != i for r in assignments[j]]
        folds.append((train, val))
    return folds


def split_records(
    records: Sequence[DatasetRecord],
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> tuple[list[DatasetRecord], list[DatasetRecord], list[DatasetRecord]]:
    if len(ratios) != 3 or not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
        raise InvalidInput("split ratios must be three values summing to 1")
    shuffled = list(records)
    random.Random(seed).shuffle(shuffled)
    n = len(shuffled)
    a = int(ratios[0] * n)
    b = int((ratios[0] + ratios[1]) * n)
    return shuffled[:a], shuffled[a:b], shuffled[b:]


# --- end-to-end pipeline ---

@dataclass
class PipelineResult:
    decisions: list[TriageDecision]
    unresolved_ids: list[str]
    hybrid: MetricsReport
    gatekeeper: MetricsReport
    realized_gamma: float
    per_category: dict
    cost_seconds_per_claim: float
    cost_usd: float
    mean_latency_s: float

    def to_dict(self) -> dict:
        return {
            "n": len(self.decisions) + len(self.unresolved_ids),
            "fast": sum(1 for d in self.decisions if d.path is Path.FAST),
            "rigorous": sum(1 for d in self.decisions if d.path is Path.RIGOROUS),
            "unresolved_ids": list(self.unresolved_ids),
            "realized_gamma": self.realized_gamma,
            "metrics_hybrid": self.hybrid.to_dict(),
            "metrics_gatekeeper": self.gatekeeper.to_dict(),
            "per_category": self.per_category,
            "cost": {
                "seconds_per_claim": self.cost_seconds_per_claim,
                "usd": self.cost_usd,
            },
            "mean_latency_s": self.mean_latency_s,
        }


def run_pipeline(
    records: Sequence[DatasetRecord],
    dists: np.ndarray,
    profile: CalibrationProfile,
    expert_mode: Union[str, EndpointConfig] = "mock",
    cost_profile: CostProfile = CostProfile(),
    measure: bool = False,
    max_concurrency: int = 4,
) -> PipelineResult:
    """Route every record, resolve escalations through the expert, aggregate.

    A TransportError on an escalated record leaves it unresolved: excluded
    from metrics, listed by id, still counted in conservation totals.
    """
    if expert_mode != "mock" and not isinstance(expert_mode, EndpointConfig):
        raise InvalidInput(f"unknown expert mode: {expert_mode!r}")
    if len(records) != len(dists):
        raise LengthMismatch(f"{len(records)} records vs {len(dists)} score rows")
    if not records:
        raise EmptyInput("cannot run the pipeline on an empty dataset")

    choices = [route(dist, profile) for dist in dists]
    escalated = [(r, c) for r, c in zip(records, choices) if c.path is Path.RIGOROUS]

    expert_results: dict[str, object] = {}
    unresolved: list[str] = []
    if escalated:
        if expert_mode == "mock":
            for r, _ in escalated:
                expert_results[r.id] = mock_expert(r.claim_set)
        else:
            items = [(r.id, build_copt_prompt(r.claim_set)) for r, _ in escalated]
            results, failures = evaluate_many(expert_mode, items, max_concurrency)
            expert_results.update(results)
            for rid, exc in failures.items():
                if isinstance(exc, TransportError):
                    unresolved.append(rid)
                else:
                    raise exc

    decisions: list[TriageDecision] = []
    resolved_records: list[DatasetRecord] = []
    predictions: list[Label] = []
    p_inv: list[float] = []
    for i, (record, choice) in enumerate(zip(records, choices)):
        dist_row = tuple(float(v) for v in np.asarray(dists[i], dtype=float))
        if choice.path is Path.FAST:
            verdict = choice.fast
            reasoning = None
            latency = cost_profile.fast_latency_s
            path = Path.FAST
        else:
            outcome = expert_results.get(record.id)
            if outcome is None:
                continue
            verdict = Label(outcome.verdict)
            reasoning = outcome.reasoning
            latency = (outcome.transport_latency if measure
                       else cost_profile.expert_latency_s)
            path = Path.RIGOROUS
        decisions.append(TriageDecision(
            id=record.id, uncertainty=choice.uncertainty, path=path,
            verdict=verdict, gatekeeper_dist=dist_row,
            expert_reasoning=reasoning, latency_s=latency,
        ))
        resolved_records.append(record)
        predictions.append(verdict)
        p_inv.append(sum(dist_row[1:]))

    gold = [r.label for r in resolved_records]
    resolved_idx = {r.id for r in resolved_records}

    hybrid = compute_metrics(predictions, gold, scores=p_inv)
    gatekeeper = compute_metrics(
        [fast_verdict(d.gatekeeper_dist) for d in decisions], gold, scores=p_inv)

    n = len(records)
    n_escalated = len(escalated)
    realized_gamma = n_escalated / n

    per_category: dict = {}
    for record, choice in zip(records, choices):
        name = _class_name(record.label, fine=True)
        bucket = per_category.setdefault(
            name, {"n": 0, "escalated": 0, "correct": 0, "unresolved": 0})
        bucket["n"] += 1
        if choice.path is Path.RIGOROUS:
            bucket["escalated"] += 1
        if record.id not in resolved_idx:
            bucket["unresolved"] += 1
    for decision, record in zip(decisions, resolved_records):
        name = _class_name(record.label, fine=True)
        if decision.verdict.verdict is record.label.verdict:
            per_category[name]["correct"] += 1

    seconds, usd = estimate_cost(cost_profile, realized_gamma)
    mean_latency = (sum(d.latency_s for d in decisions) / len(decisions)
                    if decisions else 0.0)

    return PipelineResult(
        decisions=decisions,
        unresolved_ids=sorted(unresolved),
        hybrid=hybrid,
        gatekeeper=gatekeeper,
        realized_gamma=realized_gamma,
        per_category=dict(sorted(per_category.items())),
        cost_seconds_per_claim=seconds,
        cost_usd=usd,
        mean_latency_s=mean_latency,
    )
