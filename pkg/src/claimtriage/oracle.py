"""Deterministic structural linter for the five MPEP-grounded defect classes.

The checks are rule- and lexicon-driven; identical inputs always yield
identical violation lists.  This module is the ground truth for injected
errors and the knowledge source of the offline mock expert.

Scope notes:
- Antecedent resolution follows the claim-dependency closure: a dependent
  claim inherits the indefinite introductions of the claims it (transitively)
  references.  When a claim's references are themselves broken (missing
  target, forward reference, cycle), antecedent analysis is skipped for that
  claim: scope cannot be resolved reliably, and the dependency defect is the
  one reported.
- The missing-transition and missing-separator checks apply to multi-element
  enumerations (two or more element mentions beyond the preamble); a
  single-element claim body carries no enumeration convention to violate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Optional

from .claims import Claim, ClaimSet, ErrorCategory, Label, Verdict

__all__ = [
    "Article",
    "EntityMention",
    "Violation",
    "Lexicons",
    "OracleReport",
    "RULE_REGISTRY",
    "load_lexicons",
    "default_lexicons",
    "extract_entities",
    "check_antecedent",
    "check_dependency",
    "check_logical",
    "check_ambiguity",
    "check_syntax",
    "audit",
    "lint_lines",
]


class Article(Enum):
    INDEFINITE = "indefinite"
    DEFINITE = "definite"


@dataclass(frozen=True)
class EntityMention:
    head: str                 # normalized noun phrase, e.g. "gate structure"
    article: Article
    claim_number: int
    span: tuple[int, int]     # article start .. phrase end, in claim text
    head_token: str           # normalized last token, fallback match key


#: rule id -> (category, statutory citation used in messages)
RULE_REGISTRY: dict[str, tuple[ErrorCategory, str]] = {
    "antecedent-unintroduced": (ErrorCategory.ANTECEDENT, "MPEP 2173.05(e)"),
    "dependency-nonexistent": (ErrorCategory.DEPENDENCY, "MPEP 608.01(n)"),
    "dependency-forward": (ErrorCategory.DEPENDENCY, "MPEP 608.01(n)"),
    "dependency-cycle": (ErrorCategory.DEPENDENCY, "MPEP 608.01(n)"),
    "logical-contradiction": (ErrorCategory.LOGICAL, "MPEP 2173.05(q)"),
    "ambiguity-degree-term": (ErrorCategory.AMBIGUITY, "MPEP 2173.05(b)"),
    "syntax-missing-transition": (ErrorCategory.SYNTAX, "35 U.S.C. 112"),
    "syntax-missing-period": (ErrorCategory.SYNTAX, "35 U.S.C. 112"),
    "syntax-missing-separator": (ErrorCategory.SYNTAX, "35 U.S.C. 112"),
}

#: verdict category is decided by the first violation under this order
CATEGORY_PRIORITY: tuple[ErrorCategory, ...] = (
    ErrorCategory.ANTECEDENT,
    ErrorCategory.DEPENDENCY,
    ErrorCategory.LOGICAL,
    ErrorCategory.AMBIGUITY,
    ErrorCategory.SYNTAX,
)


@dataclass(frozen=True)
class Violation:
    category: ErrorCategory
    claim_number: int
    span: tuple[int, int]
    rule_id: str
    message: str


@dataclass(frozen=True)
class Lexicons:
    """Rule vocabulary; all entries lowercase, antonym pairs symmetric.

    degree_terms entries are (phrase, flag_in_numeric_context); antonym_pairs
    are unordered; transitional_phrases are tried longest-first; stop words
    terminate noun-phrase runs during entity extraction; implied_antecedents
    are heads with inherent antecedent basis ("the water") that never need an
    indefinite introduction.
    """

    degree_terms: tuple[tuple[str, bool], ...]
    antonym_pairs: tuple[tuple[str, str], ...]
    transitional_phrases: tuple[str, ...]
    implied_antecedents: frozenset[str]
    noun_phrase_stops: frozenset[str]

    def antonym_partner(self, word: str) -> Optional[str]:
        for x, y in self.antonym_pairs:
            if word == x:
                return y
            if word == y:
                return x
        return None


_ARTICLE_TOKENS = frozenset({"a", "an", "the", "said", "one"})


def _build_lexicons(doc: dict) -> Lexicons:
    degree = []
    for entry in doc.get("degree_terms", []):
        if isinstance(entry, str):
            degree.append((entry.lower(), True))
        else:
            degree.append((entry["term"].lower(), bool(entry.get("flag_numeric", True))))
    pairs = tuple(
        (str(x).lower(), str(y).lower()) for x, y in doc.get("antonym_pairs", [])
    )
    transitions = tuple(t.lower() for t in doc.get("transitional_phrases", []))
    stops = {w.lower() for w in doc.get("noun_phrase_stops", [])}
    # transition words always terminate a noun phrase too
    for t in transitions:
        stops.update(t.split())
    return Lexicons(
        degree_terms=tuple(degree),
        antonym_pairs=pairs,
        transitional_phrases=transitions,
        implied_antecedents=frozenset(
            w.lower() for w in doc.get("implied_antecedents", [])
        ),
        noun_phrase_stops=frozenset(stops),
    )


def load_lexicons(path: str) -> Lexicons:
    with open(path, encoding="utf-8") as fh:
        return _build_lexicons(json.load(fh))


_DEFAULT: Optional[Lexicons] = None


def default_lexicons() -> Lexicons:
    global _DEFAULT
    if _DEFAULT is None:
        text = resources.files("claimtriage.data").joinpath("lexicons.json").read_text(
            encoding="utf-8"
        )
        _DEFAULT = _build_lexicons(json.loads(text))
    return _DEFAULT


def _norm_head(word: str, set_tokens: frozenset[str]) -> str:
    # strip a trailing plural "s" only when the singular occurs in the set
    if len(word) > 1 and word.endswith("s") and word[:-1] in set_tokens:
        return word[:-1]
    return word


def extract_entities(
    claim: Claim,
    lexicons: Optional[Lexicons] = None,
    set_tokens: Optional[frozenset[str]] = None,
) -> list[EntityMention]:
    """All article-introduced noun-phrase mentions of *claim*, in text order.

    A mention is {a|an|one or more|the|said} plus the maximal following token
    run, terminated by punctuation, a digit, another article, or a stop word.
    """
    lex = lexicons or default_lexicons()
    if set_tokens is None:
        set_tokens = frozenset(claim.token_strings())
    toks = claim.tokens
    n = len(toks)
    out: list[EntityMention] = []
    i = 0
    while i < n:
        word = toks[i][0]
        article: Optional[Article] = None
        j = i + 1
        if word in ("a", "an"):
            article = Article.INDEFINITE
        elif word == "one" and i + 2 < n and toks[i + 1][0] == "or" and toks[i + 2][0] == "more":
            article = Article.INDEFINITE
            j = i + 3
        elif word in ("the", "said"):
            article = Article.DEFINITE
        if article is None:
            i += 1
            continue
        phrase: list[str] = []
        end = None
        while j < n:
            w = toks[j][0]
            if (
                w in _ARTICLE_TOKENS
                or w in lex.noun_phrase_stops
                or w.isdigit()
                or not w[0].isalnum()
            ):
                break
            phrase.append(w)
            end = toks[j][1][1]
            j += 1
        if phrase:
            phrase[-1] = _norm_head(phrase[-1], set_tokens)
            out.append(
                EntityMention(
                    head=" ".join(phrase),
                    article=article,
                    claim_number=claim.number,
                    span=(toks[i][1][0], end),
                    head_token=phrase[-1],
                )
            )
            i = j
        else:
            i += 1
    return out


# --- dependency graph helpers ---

def _reference_occurrences(claim: Claim) -> list[tuple[int, tuple[int, int]]]:
    """(referenced number, char span over the "claim N" bigram) occurrences."""
    toks = claim.tokens
    occ = []
    for i in range(len(toks) - 1):
        if toks[i][0] == "claim" and toks[i + 1][0].isdigit():
            occ.append((int(toks[i + 1][0]), (toks[i][1][0], toks[i + 1][1][1])))
    return occ


def _cycle_members(claim_set: ClaimSet) -> frozenset[int]:
    """Claim numbers on any reference cycle (self-loops excluded; those are
    already reported as forward references)."""
    numbers = set(claim_set.numbers())
    graph = {
        c.number: sorted({r for r in c.references if r in numbers and r != c.number})
        for c in claim_set.claims
    }
    members: set[int] = set()
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {u: WHITE for u in graph}
    stack: list[int] = []

    def dfs(u: int) -> None:
        color[u] = GRAY
        stack.append(u)
        for v in graph[u]:
            if color[v] == GRAY:
                members.update(stack[stack.index(v):])
            elif color[v] == WHITE:
                dfs(v)
        stack.pop()
        color[u] = BLACK

    for u in sorted(graph):
        if color[u] == WHITE:
            dfs(u)
    return frozenset(members)


def _resolvable(claim: Claim, claim_set: ClaimSet, cycles: frozenset[int]) -> bool:
    numbers = set(claim_set.numbers())
    if claim.number in cycles:
        return False
    return all(r in numbers and r < claim.number for r in claim.references)


def _ancestors(claim: Claim, claim_set: ClaimSet) -> list[Claim]:
    """Transitive dependency closure in ascending claim order (valid edges only)."""
    seen: set[int] = set()
    frontier = [r for r in claim.references]
    while frontier:
        r = frontier.pop()
        if r in seen or r >= claim.number:
            continue
        parent = claim_set.claim_by_number(r)
        if parent is None:
            continue
        seen.add(r)
        frontier.extend(parent.references)
    return [c for c in claim_set.claims if c.number in seen]


def _violation(rule_id: str, claim_number: int, span: tuple[int, int], message: str) -> Violation:
    category, citation = RULE_REGISTRY[rule_id]
    return Violation(
        category=category,
        claim_number=claim_number,
        span=span,
        rule_id=rule_id,
        message=f"{message} ({citation})",
    )


def check_antecedent(
    claim_set: ClaimSet, lexicons: Optional[Lexicons] = None
) -> list[Violation]:
    """Definite mentions must be preceded by an indefinite introduction in the
    same claim or in the claim's dependency closure."""
    lex = lexicons or default_lexicons()
    set_tokens = claim_set.all_token_strings()
    cycles = _cycle_members(claim_set)
    out: list[Violation] = []
    for claim in claim_set.claims:
        if not _resolvable(claim, claim_set, cycles):
            continue
        phrases: set[str] = set()
        heads: set[str] = set()
        for parent in _ancestors(claim, claim_set):
            for m in extract_entities(parent, lex, set_tokens):
                if m.article is Article.INDEFINITE:
                    phrases.add(m.head)
                    heads.add(m.head_token)
        for m in extract_entities(claim, lex, set_tokens):
            if m.article is Article.INDEFINITE:
                phrases.add(m.head)
                heads.add(m.head_token)
                continue
            if m.head in phrases or m.head_token in heads:
                continue
            if m.head in lex.implied_antecedents or m.head_token in lex.implied_antecedents:
                continue
            snippet = claim.text[m.span[0]:m.span[1]]
            out.append(
                _violation(
                    "antecedent-unintroduced",
                    claim.number,
                    m.span,
                    f"definite reference '{snippet}' lacks antecedent basis",
                )
            )
    return out


def check_dependency(claim_set: ClaimSet, lexicons: Optional[Lexicons] = None) -> list[Violation]:
    numbers = set(claim_set.numbers())
    cycles = _cycle_members(claim_set)
    out: list[Violation] = []
    for claim in claim_set.claims:
        for ref, span in _reference_occurrences(claim):
            if ref not in numbers:
                out.append(
                    _violation(
                        "dependency-nonexistent",
                        claim.number,
                        span,
                        f"reference to non-existent claim {ref}",
                    )
                )
            elif claim.number in cycles and ref in cycles:
                # reported once per claim by the cycle rule below
                continue
            elif ref >= claim.number:
                out.append(
                    _violation(
                        "dependency-forward",
                        claim.number,
                        span,
                        f"claim {claim.number} references claim {ref}, "
                        f"which is not an earlier claim",
                    )
                )
        if claim.number in cycles:
            occ = [
                (r, s)
                for r, s in _reference_occurrences(claim)
                if r in cycles and r in numbers
            ]
            span = occ[0][1] if occ else (0, min(1, len(claim.text)))
            out.append(
                _violation(
                    "dependency-cycle",
                    claim.number,
                    span,
                    f"claim {claim.number} participates in a circular dependency",
                )
            )
    return out


def check_logical(
    claim_set: ClaimSet,
    lexicons: Optional[Lexicons] = None,
    radius: Optional[int] = None,
) -> list[Violation]:
    """Both members of an antonym pair inside one claim contradict each other.

    radius limits the token distance between the members; None means any
    distance within the claim.
    """
    lex = lexicons or default_lexicons()
    out: list[Violation] = []
    for claim in claim_set.claims:
        toks = claim.tokens
        index: dict[str, int] = {}
        for pos, (w, _) in enumerate(toks):
            if w not in index:
                index[w] = pos
        for x, y in lex.antonym_pairs:
            if x in index and y in index:
                ix, iy = index[x], index[y]
                if radius is not None and abs(ix - iy) > radius:
                    continue
                second = max(ix, iy)
                out.append(
                    _violation(
                        "logical-contradiction",
                        claim.number,
                        toks[second][1],
                        f"contradictory terms '{x}' and '{y}' within one claim",
                    )
                )
    return out


def _has_digit_nearby(toks, start_idx: int, end_idx: int, window: int = 2) -> bool:
    lo = max(0, start_idx - window)
    hi = min(len(toks), end_idx + window)
    return any(toks[k][0].isdigit() for k in range(lo, hi))


def check_ambiguity(
    claim_set: ClaimSet, lexicons: Optional[Lexicons] = None
) -> list[Violation]:
    """One violation per degree-term occurrence; longest phrase match wins."""
    lex = lexicons or default_lexicons()
    phrases = sorted(
        ((term.split(), flag) for term, flag in lex.degree_terms),
        key=lambda e: -len(e[0]),
    )
    out: list[Violation] = []
    for claim in claim_set.claims:
        toks = claim.tokens
        words = [w for w, _ in toks]
        i = 0
        while i < len(words):
            matched = False
            for parts, flag in phrases:
                k = len(parts)
                if words[i:i + k] == parts:
                    if flag or not _has_digit_nearby(toks, i, i + k):
                        span = (toks[i][1][0], toks[i + k - 1][1][1])
                        out.append(
                            _violation(
                                "ambiguity-degree-term",
                                claim.number,
                                span,
                                f"vague degree term '{' '.join(parts)}'",
                            )
                        )
                    i += k
                    matched = True
                    break
            if not matched:
                i += 1
    return out


def _find_transition(claim: Claim, lex: Lexicons) -> Optional[tuple[int, int]]:
    """Char span of the first transitional phrase, longest match first."""
    words = [w for w, _ in claim.tokens]
    candidates = sorted((t.split() for t in lex.transitional_phrases), key=len, reverse=True)
    for i in range(len(words)):
        for parts in candidates:
            k = len(parts)
            if words[i:i + k] == parts:
                return (claim.tokens[i][1][0], claim.tokens[i + k - 1][1][1])
    return None


def check_syntax(
    claim_set: ClaimSet, lexicons: Optional[Lexicons] = None
) -> list[Violation]:
    lex = lexicons or default_lexicons()
    set_tokens = claim_set.all_token_strings()
    out: list[Violation] = []
    for claim in claim_set.claims:
        text = claim.text
        mentions = extract_entities(claim, lex, set_tokens)
        indefs = [m for m in mentions if m.article is Article.INDEFINITE]
        transition = _find_transition(claim, lex)
        if transition is not None:
            elements = [m for m in indefs if m.span[0] >= transition[1]]
        else:
            # without a transition, the first indefinite mention is the preamble
            elements = indefs[1:]
        independent = not claim.references
        if independent and transition is None and len(elements) >= 2:
            span = indefs[0].span if indefs else (0, min(1, len(text)))
            out.append(
                _violation(
                    "syntax-missing-transition",
                    claim.number,
                    span,
                    "independent claim lacks a transitional phrase",
                )
            )
        if not text.endswith("."):
            out.append(
                _violation(
                    "syntax-missing-period",
                    claim.number,
                    (max(0, len(text) - 1), len(text)),
                    "claim body does not end with a period",
                )
            )
        if len(elements) >= 2:
            region = text[elements[0].span[0]:elements[-1].span[1]]
            if "," not in region and ";" not in region:
                out.append(
                    _violation(
                        "syntax-missing-separator",
                        claim.number,
                        (elements[0].span[0], elements[-1].span[1]),
                        "multi-element enumeration lacks ';' or ',' separators",
                    )
                )
    return out


@dataclass(frozen=True)
class OracleReport:
    verdict: Label
    violations: tuple[Violation, ...]
    steps: tuple[str, str, str]


def audit(claim_set: ClaimSet, lexicons: Optional[Lexicons] = None) -> OracleReport:
    """Run all five checkers; Fail iff any violation fires.

    The verdict category is the category of the first violation under the
    fixed priority Antecedent > Dependency > Logical > Ambiguity > Syntax.
    """
    lex = lexicons or default_lexicons()
    groups = (
        check_antecedent(claim_set, lex),
        check_dependency(claim_set, lex),
        check_logical(claim_set, lex),
        check_ambiguity(claim_set, lex),
        check_syntax(claim_set, lex),
    )
    violations = tuple(v for group in groups for v in group)

    set_tokens = claim_set.all_token_strings()
    parse_bits = []
    for claim in claim_set.claims:
        mentions = extract_entities(claim, lex, set_tokens)
        intro = [m.head for m in mentions if m.article is Article.INDEFINITE]
        refer = [m.head for m in mentions if m.article is Article.DEFINITE]
        bit = f"claim {claim.number} introduces " + (", ".join(intro) if intro else "no elements")
        if refer:
            bit += " and refers back to " + ", ".join(refer)
        parse_bits.append(bit)
    step1 = "Step 1 [Element Parsing]: " + "; ".join(parse_bits) + "."

    if violations:
        step2 = "Step 2 [Statutory Compliance]: " + " ".join(
            f"[claim {v.claim_number}] {v.message}." for v in violations
        )
        category = violations[0].category
        step3 = (
            f"Step 3 [Verdict]: Fail. The controlling defect category is "
            f"{category.value}."
        )
        verdict = Label(Verdict.FAIL, category)
    else:
        step2 = ("Step 2 [Statutory Compliance]: no antecedent, dependency, "
                 "logical, ambiguity, or syntax violations found.")
        step3 = "Step 3 [Verdict]: Pass. The claim set meets the structural requirements."
        verdict = Label(Verdict.PASS)
    return OracleReport(verdict=verdict, violations=violations, steps=(step1, step2, step3))


def lint_lines(claim_set: ClaimSet, lexicons: Optional[Lexicons] = None) -> list[str]:
    """Tab-separated lint output: claim, category, rule, span, message."""
    report = audit(claim_set, lexicons)
    return [
        f"{v.claim_number}\t{v.category.value}\t{v.rule_id}\t"
        f"{v.span[0]}-{v.span[1]}\t{v.message}"
        for v in report.violations
    ]
