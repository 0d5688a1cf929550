"""Domain types and parsing for numbered patent-claim sets.

A claim set is an ordered list of numbered claims; dependent claims refer to
earlier claims via "claim N" phrases.  Everything downstream (linting,
injection, classification, routing) consumes the types defined here.
"""

from __future__ import annotations

import hashlib
import json
import re
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

from .errors import EmptyInput, NonMonotonicNumbering

__all__ = [
    "Verdict",
    "ErrorCategory",
    "Claim",
    "ClaimSet",
    "Label",
    "Injection",
    "DatasetRecord",
    "tokenize",
    "stable_seed",
    "parse_claim_set",
    "validate_record",
    "write_dataset",
    "load_dataset",
]


class Verdict(Enum):
    PASS = "pass"
    FAIL = "fail"


class ErrorCategory(Enum):
    """The five defect categories; fixed cardinality K = 5."""

    ANTECEDENT = "antecedent"
    DEPENDENCY = "dependency"
    LOGICAL = "logical"
    AMBIGUITY = "ambiguity"
    SYNTAX = "syntax"

    @property
    def class_index(self) -> int:
        # class 0 is reserved for the valid ("pass") outcome
        return list(ErrorCategory).index(self) + 1


#: Fixed class order of the (K+1)-way distribution: index 0 = valid.
CLASS_ORDER: tuple[str, ...] = ("valid",) + tuple(c.value for c in ErrorCategory)

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


def tokenize(text: str) -> tuple[tuple[str, tuple[int, int]], ...]:
    """Split *text* into lowercase word tokens plus standalone punctuation.

    Returns (token, (start, end)) pairs with character spans into *text*.
    Spans are ordered and non-overlapping; whitespace is dropped.
    """
    return tuple(
        (m.group(0).lower(), (m.start(), m.end())) for m in _TOKEN_RE.finditer(text)
    )


def stable_seed(*parts: object) -> int:
    """Derive a 64-bit seed from *parts*, stable across runs and platforms.

    Used wherever a sub-seed is split off a run seed (one per record, per
    pool entry, ...) so that no component depends on Python's hash
    randomization.
    """
    joined = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(joined, digest_size=8).digest(), "big")


def _extract_references(tokens: Iterable[tuple[str, tuple[int, int]]]) -> tuple[int, ...]:
    toks = list(tokens)
    refs = []
    for i in range(len(toks) - 1):
        if toks[i][0] == "claim" and toks[i + 1][0].isdigit():
            refs.append(int(toks[i + 1][0]))
    return tuple(refs)


@dataclass(frozen=True)
class Claim:
    """One numbered claim: raw text, token spans, and outgoing references."""

    number: int
    text: str
    tokens: tuple[tuple[str, tuple[int, int]], ...] = field(repr=False)
    references: tuple[int, ...] = ()

    @staticmethod
    def from_text(number: int, text: str) -> "Claim":
        toks = tokenize(text)
        return Claim(number=number, text=text, tokens=toks,
                     references=_extract_references(toks))

    def token_strings(self) -> tuple[str, ...]:
        return tuple(t for t, _ in self.tokens)


@dataclass(frozen=True)
class ClaimSet:
    claims: tuple[Claim, ...]
    source_id: str = ""

    def serialize(self) -> str:
        """Render back to the canonical "N. body" text form, one claim per line."""
        return "\n".join(f"{c.number}. {c.text}" for c in self.claims)

    def claim_by_number(self, number: int) -> Optional[Claim]:
        for c in self.claims:
            if c.number == number:
                return c
        return None

    def numbers(self) -> tuple[int, ...]:
        return tuple(c.number for c in self.claims)

    def all_token_strings(self) -> frozenset[str]:
        return frozenset(t for c in self.claims for t in c.token_strings())


@dataclass(frozen=True)
class Label:
    """Hierarchical label: Pass, or Fail plus one of the five categories."""

    verdict: Verdict
    category: Optional[ErrorCategory] = None

    @property
    def class_index(self) -> int:
        if self.verdict is Verdict.PASS:
            return 0
        return self.category.class_index if self.category else -1


@dataclass(frozen=True)
class Injection:
    """Provenance of one injected defect."""

    category: ErrorCategory
    rule_id: str
    claim_number: int
    span: tuple[int, int]
    seed: int


@dataclass(frozen=True)
class DatasetRecord:
    id: str
    claim_set: ClaimSet
    label: Label
    injection: Optional[Injection] = None

    @property
    def text(self) -> str:
        return self.claim_set.serialize()


_MARKER_RE = re.compile(r"(\d+)\s*\.(?=\s)")
_SENTENCE_END = ".!?"


def _is_claim_marker(text: str, start: int) -> bool:
    """A "N." run is a claim marker at line start or after sentence punctuation.

    This is what keeps inline "claim 1." references from splitting the text.
    """
    j = start - 1
    while j >= 0 and text[j] in " \t":
        j -= 1
    if j < 0 or text[j] == "\n":
        return True
    while j >= 0 and text[j].isspace():
        j -= 1
    return j >= 0 and text[j] in _SENTENCE_END


def parse_claim_set(text: str, source_id: str = "") -> ClaimSet:
    """Parse a raw multi-claim string into a ClaimSet.

    Claims are split on leading "N." markers.  A body with no leading number
    is assigned number 1 only when it is the sole claim.  Raises EmptyInput on
    blank input and NonMonotonicNumbering when claim numbers do not strictly
    increase (or the numbering is otherwise unusable).
    """
    text = unicodedata.normalize("NFC", text)
    if not text.strip():
        raise EmptyInput("claim set text is empty")

    markers = [m for m in _MARKER_RE.finditer(text) if _is_claim_marker(text, m.start())]
    if not markers:
        body = text.strip()
        return ClaimSet(claims=(Claim.from_text(1, body),), source_id=source_id)

    if text[: markers[0].start()].strip():
        raise NonMonotonicNumbering(
            "unnumbered leading text before the first claim marker"
        )

    claims = []
    prev_number = 0
    for i, m in enumerate(markers):
        number = int(m.group(1))
        if number < 1 or number <= prev_number:
            raise NonMonotonicNumbering(
                f"claim numbers must be strictly increasing positive integers; "
                f"saw {number} after {prev_number}"
            )
        prev_number = number
        end = markers[i + 1].start() if i + 1 < len(markers) else len(text)
        body = text[m.end():end].strip()
        claims.append(Claim.from_text(number, body))
    return ClaimSet(claims=tuple(claims), source_id=source_id)


def validate_record(record: DatasetRecord) -> list[str]:
    """Return a list of consistency defects; empty iff the record is coherent.

    Never raises: defects are reported, not thrown.
    """
    defects = []
    label = record.label
    if label.verdict is Verdict.PASS and label.category is not None:
        defects.append("label: category present on a Pass verdict")
    if label.verdict is Verdict.FAIL and label.category is None:
        defects.append("label: Fail verdict missing its category")
    if label.verdict is Verdict.PASS and record.injection is not None:
        defects.append("injection: injection present on a Pass record")
    if label.verdict is Verdict.FAIL and record.injection is None:
        defects.append("injection: Fail record missing injection provenance")
    inj = record.injection
    if inj is not None:
        if label.category is not None and inj.category is not label.category:
            defects.append(
                f"injection: category {inj.category.value} does not match "
                f"label category {label.category.value}"
            )
        claim = record.claim_set.claim_by_number(inj.claim_number)
        if claim is None:
            defects.append(
                f"injection: claim {inj.claim_number} not present in the claim set"
            )
        else:
            start, end = inj.span
            if not (0 <= start <= end <= len(claim.text)):
                defects.append("injection: mutation span outside the claim text")
    return defects


# --- dataset file format: one JSON object per line, UTF-8, LF ---

def record_to_dict(record: DatasetRecord) -> dict:
    doc: dict = {"id": record.id, "text": record.text,
                 "label": record.label.verdict.value}
    if record.label.category is not None:
        doc["category"] = record.label.category.value
    if record.injection is not None:
        inj = record.injection
        doc["injection"] = {
            "category": inj.category.value,
            "rule_id": inj.rule_id,
            "claim_number": inj.claim_number,
            "span": [inj.span[0], inj.span[1]],
            "seed": inj.seed,
        }
    return doc


def record_from_dict(doc: dict) -> DatasetRecord:
    verdict = Verdict(doc["label"])
    category = ErrorCategory(doc["category"]) if "category" in doc else None
    injection = None
    if "injection" in doc:
        raw = doc["injection"]
        injection = Injection(
            category=ErrorCategory(raw["category"]),
            rule_id=raw["rule_id"],
            claim_number=int(raw["claim_number"]),
            span=(int(raw["span"][0]), int(raw["span"][1])),
            seed=int(raw["seed"]),
        )
    claim_set = parse_claim_set(doc["text"], source_id=doc["id"])
    return DatasetRecord(id=doc["id"], claim_set=claim_set,
                         label=Label(verdict, category), injection=injection)


def write_dataset(records: Iterable[DatasetRecord], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(json.dumps(record_to_dict(record), separators=(",", ":")))
            fh.write("\n")


def load_dataset(path: str) -> list[DatasetRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(record_from_dict(json.loads(line)))
    return records
