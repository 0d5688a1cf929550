"""Seeded single-edit defect injection and labeled dataset generation.

Each injection is one contiguous text edit to one claim, chosen from the
candidate sites the category admits.  The mutated set is re-audited before it
is accepted: a site only counts if the audit verdict lands on the requested
category, so recorded labels are correct by construction rather than by
intent.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .claims import (
    Claim,
    ClaimSet,
    DatasetRecord,
    ErrorCategory,
    Injection,
    Label,
    Verdict,
    parse_claim_set,
    stable_seed,
)
from .errors import InsufficientPool, InvalidInput, NotApplicable
from .oracle import Article, _find_transition, audit, default_lexicons, extract_entities

#: Swap-in nouns for antecedent breaks, tried in order; the first one absent
#: from the claim set is used, so the choice is independent of the seed.
REPLACEMENT_NOUNS = (
    "processor", "lever", "handle", "valve", "housing",
    "sensor", "widget", "spring", "motor", "panel",
)

#: unit token sequence -> vague replacement for the whole "<number> <unit>" span
VAGUE_BY_UNIT = {
    ("degrees", "celsius"): "a substantially high temperature",
    ("pascals",): "a substantially high pressure",
    ("millimeters",): "a substantially wide clearance",
}

_BROKEN_TRANSITION = "includes"


@dataclass(frozen=True)
class _Edit:
    claim_number: int
    span: tuple[int, int]   # span in the original claim text
    replacement: str


def _splice(claim_set: ClaimSet, edit: _Edit) -> ClaimSet:
    lines = []
    for c in claim_set.claims:
        text = c.text
        if c.number == edit.claim_number:
            s, e = edit.span
            text = text[:s] + edit.replacement + text[e:]
        lines.append(f"{c.number}. {text}")
    return parse_claim_set("\n".join(lines), source_id=claim_set.source_id)


def _last_token_span(claim: Claim, phrase_end: int) -> tuple[int, int]:
    for _, (s, e) in claim.tokens:
        if e == phrase_end:
            return (s, e)
    return (phrase_end, phrase_end)


def _antecedent_groups(cs: ClaimSet) -> list[list[_Edit]]:
    present = cs.all_token_strings()
    substitute = next((n for n in REPLACEMENT_NOUNS if n not in present), None)
    if substitute is None:
        return []
    edits = []
    for claim in cs.claims:
        for m in extract_entities(claim, set_tokens=present):
            if m.article is Article.INDEFINITE:
                edits.append(_Edit(claim.number, _last_token_span(claim, m.span[1]), substitute))
    return [edits] if edits else []


def _digit_ref_occurrences(claim: Claim) -> list[tuple[int, tuple[int, int]]]:
    # (referenced number, span of just the digit token)
    out = []
    toks = claim.tokens
    for i in range(len(toks) - 1):
        if toks[i][0] == "claim" and toks[i + 1][0].isdigit():
            out.append((int(toks[i + 1][0]), toks[i + 1][1]))
    return out


def _dependency_groups(cs: ClaimSet) -> list[list[_Edit]]:
    numbers = set(cs.numbers())
    missing = 8 if 8 not in numbers else max(numbers) + 5
    nonexistent, forward, cycle = [], [], []
    for claim in cs.claims:
        occurrences = _digit_ref_occurrences(claim)
        for _, span in occurrences:
            nonexistent.append(_Edit(claim.number, span, str(missing)))
        later = sorted(n for n in numbers if n > claim.number)
        target = later[0] if later else claim.number
        for _, span in occurrences:
            forward.append(_Edit(claim.number, span, str(target)))
    for claim in cs.claims:
        # rewriting claim i's reference to j, where j already refers to i,
        # closes a two-claim loop
        for j, _ in ((c.number, r) for c in cs.claims for r in c.references
                     if r == claim.number and c.number != claim.number):
            for _, span in _digit_ref_occurrences(claim):
                cycle.append(_Edit(claim.number, span, str(j)))
    return [g for g in (nonexistent, forward, cycle) if g]


def _logical_groups(cs: ClaimSet) -> list[list[_Edit]]:
    lex = default_lexicons()
    edits = []
    for claim in cs.claims:
        counts = Counter(w for w, _ in claim.tokens)
        for word, n in counts.items():
            partner = lex.antonym_partner(word)
            if partner is None or n < 2:
                continue
            for w, span in claim.tokens:
                if w == word:
                    edits.append(_Edit(claim.number, span, partner))
    return [edits] if edits else []


def _ambiguity_groups(cs: ClaimSet) -> list[list[_Edit]]:
    edits = []
    for claim in cs.claims:
        toks = claim.tokens
        for i, (w, (s, _)) in enumerate(toks):
            if not w.isdigit():
                continue
            for unit, phrase in VAGUE_BY_UNIT.items():
                k = len(unit)
                if tuple(t[0] for t in toks[i + 1:i + 1 + k]) == unit:
                    end = toks[i + k][1][1]
                    edits.append(_Edit(claim.number, (s, end), phrase))
                    break
    return [edits] if edits else []


def _syntax_groups(cs: ClaimSet) -> list[list[_Edit]]:
    lex = default_lexicons()
    transition, period, separator = [], [], []
    for claim in cs.claims:
        t_span = _find_transition(claim, lex)
        if t_span is not None:
            transition.append(_Edit(claim.number, t_span, _BROKEN_TRANSITION))
        if claim.text.endswith("."):
            n = len(claim.text)
            period.append(_Edit(claim.number, (n - 1, n), ""))
        indefs = [m for m in extract_entities(claim)
                  if m.article is Article.INDEFINITE]
        if t_span is not None:
            elements = [m for m in indefs if m.span[0] >= t_span[1]]
        else:
            elements = indefs[1:]
        if len(elements) >= 2:
            lo, hi = elements[0].span[0], elements[-1].span[1]
            marks = [i for i in range(lo, hi) if claim.text[i] in ",;"]
            if len(marks) == 1:
                separator.append(_Edit(claim.number, (marks[0], marks[0] + 1), ""))
    return [g for g in (transition, period, separator) if g]


_SITE_FINDERS = {
    ErrorCategory.ANTECEDENT: _antecedent_groups,
    ErrorCategory.DEPENDENCY: _dependency_groups,
    ErrorCategory.LOGICAL: _logical_groups,
    ErrorCategory.AMBIGUITY: _ambiguity_groups,
    ErrorCategory.SYNTAX: _syntax_groups,
}


def inject(claim_set: ClaimSet, category: ErrorCategory, seed: int) -> tuple[ClaimSet, Injection]:
    """Apply one seeded *category* defect to a clean *claim_set*.

    Raises InvalidInput when the input already fails audit, and NotApplicable
    when no candidate edit survives re-audit under the requested category.
    """
    if audit(claim_set).verdict.verdict is not Verdict.PASS:
        raise InvalidInput("refusing to inject into a claim set that already fails audit")
    groups = _SITE_FINDERS[category](claim_set)
    if not groups:
        raise NotApplicable(f"no {category.value} injection site in this claim set")
    rng = random.Random(seed)
    first_group = rng.randrange(len(groups))
    for gi in range(len(groups)):
        group = groups[(first_group + gi) % len(groups)]
        start = rng.randrange(len(group))
        for k in range(len(group)):
            edit = group[(start + k) % len(group)]
            mutated = _splice(claim_set, edit)
            post = audit(mutated)
            if post.verdict.verdict is Verdict.FAIL and post.verdict.category is category:
                s, _ = edit.span
                injection = Injection(
                    category=category,
                    rule_id=post.violations[0].rule_id,
                    claim_number=edit.claim_number,
                    span=(s, s + len(edit.replacement)),
                    seed=seed,
                )
                return mutated, injection
    raise NotApplicable(f"no verified {category.value} edit in this claim set")


@dataclass(frozen=True)
class GenerationSpec:
    """How many records to draw, and under which run seed."""

    pass_count: int
    fail_counts: Mapping[ErrorCategory, int]
    seed: int
    disjoint_anchors: bool = True


def _normalized_counts(raw: Mapping) -> dict[ErrorCategory, int]:
    out = {}
    for key, value in raw.items():
        cat = key if isinstance(key, ErrorCategory) else ErrorCategory(key)
        out[cat] = int(value)
    return out


def generate_dataset(
    pool: Sequence[ClaimSet], spec: GenerationSpec
) -> tuple[list[DatasetRecord], dict]:
    """Draw a labeled dataset from *pool*, one pool set per record.

    Pool sets that cannot host the requested category are skipped with
    replacement; the skip tally lands in the returned report.  Raises
    InsufficientPool when the pool runs out before every record is placed.
    """
    counts = _normalized_counts(spec.fail_counts)
    targets: list[Optional[ErrorCategory]] = [None] * spec.pass_count
    for cat in ErrorCategory:
        targets.extend([cat] * counts.get(cat, 0))

    skipped: Counter = Counter()
    records: list[DatasetRecord] = []
    cursor = 0
    for index, target in enumerate(targets):
        rec_seed = stable_seed(spec.seed, index)
        placed = False
        for _ in range(len(pool)):
            if cursor >= len(pool) and spec.disjoint_anchors:
                break
            cs = pool[cursor % len(pool)]
            cursor += 1
            if target is None:
                if audit(cs).verdict.verdict is Verdict.PASS:
                    records.append(DatasetRecord(
                        id="", claim_set=cs, label=Label(Verdict.PASS), injection=None))
                    placed = True
                    break
                skipped["failing_pool_set"] += 1
                continue
            try:
                mutated, injection = inject(cs, target, rec_seed)
            except NotApplicable:
                skipped[f"not_applicable_{target.value}"] += 1
                continue
            except InvalidInput:
                skipped["failing_pool_set"] += 1
                continue
            records.append(DatasetRecord(
                id="", claim_set=mutated,
                label=Label(Verdict.FAIL, target), injection=injection))
            placed = True
            break
        if not placed:
            raise InsufficientPool(
                f"pool exhausted after {len(records)} of {len(targets)} records "
                f"(skips: {dict(skipped)})"
            )

    records = [
        DatasetRecord(id=f"rec-{i:06d}", claim_set=r.claim_set,
                      label=r.label, injection=r.injection)
        for i, r in enumerate(records)
    ]
    random.Random(spec.seed).shuffle(records)
    report = {
        "requested": len(targets),
        "generated": len(records),
        "pool_consumed": min(cursor, len(pool)) if spec.disjoint_anchors else cursor,
        "skipped": dict(sorted(skipped.items())),
        "seed": spec.seed,
    }
    return records, report
