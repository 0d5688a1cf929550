"""Entropy-gated routing between the fast verdict and the expert path.

The six-class distribution is marginalized to (p_valid, p_inv); binary
Shannon entropy in nats is the uncertainty score.  A calibration profile
fixes the escalation rate gamma* by sweeping retained F1 against an
escalation penalty, then converts gamma* into an entropy threshold tau on
the calibration uncertainties.  Routing itself is a pure hard switch:
U <= tau keeps the fast verdict, U > tau escalates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .claims import ErrorCategory, Label, Verdict
from .errors import EmptyInput, EmptySweep, InvalidInput, LengthMismatch

LOG_BASE = "nats"
DEFAULT_LAMBDA = 0.1
PROFILE_FORMAT = "calibration-profile/1"

_CATEGORIES = tuple(ErrorCategory)


class Path(Enum):
    FAST = "fast"
    RIGOROUS = "rigorous"


def marginalize(dist: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(dist, dtype=float)
    return float(arr[0]), float(arr[1:].sum())


def binary_entropy(p_valid: float, p_inv: float) -> float:
    u = 0.0
    for p in (p_valid, p_inv):
        if p > 0.0:
            u -= p * math.log(p)
    return u


def entropy(marginal: tuple[float, float]) -> float:
    return binary_entropy(marginal[0], marginal[1])


def uncertainties_from_dists(dists: np.ndarray) -> np.ndarray:
    """Binary predictive entropy, vectorized over rows of (n, K+1) dists."""
    dists = np.asarray(dists, dtype=float)
    p = np.stack([dists[:, 0], dists[:, 1:].sum(axis=1)], axis=1)
    terms = np.where(p > 0.0, p * np.log(np.where(p > 0.0, p, 1.0)), 0.0)
    return -terms.sum(axis=1)


def fast_verdict(dist: Sequence[float]) -> Label:
    """Argmax of the binary marginal; the tie goes to Fail."""
    p_valid, p_inv = marginalize(dist)
    if p_valid > p_inv:
        return Label(Verdict.PASS)
    fail_scores = np.asarray(dist, dtype=float)[1:]
    return Label(Verdict.FAIL, _CATEGORIES[int(fail_scores.argmax())])


def binary_fail_f1(predicted: Sequence[Label], gold: Sequence[Label]) -> float:
    """F1 with Fail as the positive class; an empty tally scores 1.0.

    The degenerate convention makes "all verdicts correct" yield retained
    F1 = 1 even on an all-Pass retained set.
    """
    tp = fp = fn = 0
    for p, g in zip(predicted, gold):
        if p.verdict is Verdict.FAIL and g.verdict is Verdict.FAIL:
            tp += 1
        elif p.verdict is Verdict.FAIL:
            fp += 1
        elif g.verdict is Verdict.FAIL:
            fn += 1
    if tp + fp + fn == 0:
        return 1.0
    return 2 * tp / (2 * tp + fp + fn)


def _retained_f1(predicted, gold, mode: str) -> float:
    if mode == "binary":
        return binary_fail_f1(predicted, gold)
    if mode == "macro":
        flipped_p = [Label(Verdict.PASS if p.verdict is Verdict.FAIL else Verdict.FAIL)
                     for p in predicted]
        flipped_g = [Label(Verdict.PASS if g.verdict is Verdict.FAIL else Verdict.FAIL)
                     for g in gold]
        return 0.5 * (binary_fail_f1(predicted, gold) + binary_fail_f1(flipped_p, flipped_g))
    raise InvalidInput(f"unknown f1 mode: {mode!r}")


@dataclass(frozen=True)
class SweepPoint:
    gamma: float
    retained_f1: Optional[float]
    objective: Optional[float] = None


def default_grid(step_hundredths: int = 1) -> tuple[float, ...]:
    return tuple(i / 100 for i in range(0, 101, step_hundredths))


def escalation_order(uncertainties: Sequence[float]) -> list[int]:
    """Indices from most to least uncertain; ties keep record order."""
    return sorted(range(len(uncertainties)), key=lambda i: (-uncertainties[i], i))


def sweep_risk_coverage(
    uncertainties: Sequence[float],
    gatekeeper_verdicts: Sequence[Label],
    gold: Sequence[Label],
    grid: Optional[Sequence[float]] = None,
    f1_mode: str = "binary",
) -> list[SweepPoint]:
    n = len(uncertainties)
    if not (n == len(gatekeeper_verdicts) == len(gold)):
        raise LengthMismatch(
            f"uncertainties/verdicts/gold lengths differ: "
            f"{n}/{len(gatekeeper_verdicts)}/{len(gold)}"
        )
    grid = default_grid() if grid is None else list(grid)
    order = escalation_order(uncertainties)
    points = []
    for gamma in grid:
        k = min(n, math.ceil(gamma * n - 1e-9))
        retained = sorted(order[k:])
        if not retained:
            points.append(SweepPoint(gamma, None))
            continue
        f1 = _retained_f1([gatekeeper_verdicts[i] for i in retained],
                          [gold[i] for i in retained], f1_mode)
        points.append(SweepPoint(gamma, f1))
    return points


def select_gamma(sweep: Sequence[SweepPoint], lam: float = DEFAULT_LAMBDA) -> float:
    defined = [p for p in sweep if p.retained_f1 is not None]
    if not defined:
        raise EmptySweep("no sweep point has a defined retained F1")
    best = max(defined, key=lambda p: (p.retained_f1 - lam * p.gamma, -p.gamma))
    return best.gamma


def calibrate_tau(uncertainties: Sequence[float], gamma_star: float) -> float:
    n = len(uncertainties)
    if n == 0:
        raise EmptyInput("cannot calibrate tau on an empty uncertainty set")
    if gamma_star >= 1.0:
        return float("-inf")
    ordered = sorted(uncertainties)
    rank = math.ceil((1.0 - gamma_star) * n - 1e-9)
    rank = min(max(rank, 1), n)
    return float(ordered[rank - 1])


@dataclass(frozen=True)
class CalibrationProfile:
    lam: float
    sweep: tuple[SweepPoint, ...]
    gamma_star: float
    tau: float
    calibration_set_size: int
    f1_mode: str = "binary"
    log_base: str = LOG_BASE


def calibrate(
    uncertainties: Sequence[float],
    gatekeeper_verdicts: Sequence[Label],
    gold: Sequence[Label],
    lam: float = DEFAULT_LAMBDA,
    grid: Optional[Sequence[float]] = None,
    f1_mode: str = "binary",
) -> CalibrationProfile:
    raw = sweep_risk_coverage(uncertainties, gatekeeper_verdicts, gold, grid, f1_mode)
    sweep = tuple(
        SweepPoint(p.gamma, p.retained_f1,
                   None if p.retained_f1 is None else p.retained_f1 - lam * p.gamma)
        for p in raw
    )
    gamma_star = select_gamma(sweep, lam)
    tau = calibrate_tau(uncertainties, gamma_star)
    return CalibrationProfile(lam, sweep, gamma_star, tau, len(uncertainties), f1_mode)


@dataclass(frozen=True)
class RouteChoice:
    path: Path
    uncertainty: float
    fast: Label


def route(dist: Sequence[float], profile: CalibrationProfile) -> RouteChoice:
    u = entropy(marginalize(dist))
    if u <= profile.tau:
        return RouteChoice(Path.FAST, u, fast_verdict(dist))
    return RouteChoice(Path.RIGOROUS, u, fast_verdict(dist))


@dataclass(frozen=True)
class TriageDecision:
    """One routed record, as it lands in run reports."""

    id: str
    uncertainty: float
    path: Path
    verdict: Optional[Label]
    gatekeeper_dist: tuple[float, ...]
    expert_reasoning: Optional[str] = None
    latency_s: float = 0.0


# --- profile persistence ---

def _num_out(value: Optional[float]):
    if value is None:
        return None
    if not math.isfinite(value):
        return str(value)
    return value


def _num_in(value):
    if value is None:
        return None
    return float(value)


def save_profile(profile: CalibrationProfile, path: str) -> None:
    doc = {
        "format": PROFILE_FORMAT,
        "lambda": profile.lam,
        "log_base": profile.log_base,
        "f1_mode": profile.f1_mode,
        "gamma_star": profile.gamma_star,
        "tau": _num_out(profile.tau),
        "calibration_set_size": profile.calibration_set_size,
        "sweep": [[p.gamma, _num_out(p.retained_f1), _num_out(p.objective)]
                  for p in profile.sweep],
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, separators=(",", ":"), sort_keys=True)
        fh.write("\n")


def load_profile(path: str) -> CalibrationProfile:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != PROFILE_FORMAT:
        raise InvalidInput(f"unrecognized profile format in {path}")
    sweep = tuple(
        SweepPoint(float(g), _num_in(f1), _num_in(obj)) for g, f1, obj in doc["sweep"]
    )
    return CalibrationProfile(
        lam=float(doc["lambda"]),
        sweep=sweep,
        gamma_star=float(doc["gamma_star"]),
        tau=float(doc["tau"]),
        calibration_set_size=int(doc["calibration_set_size"]),
        f1_mode=doc.get("f1_mode", "binary"),
        log_base=doc.get("log_base", LOG_BASE),
    )
