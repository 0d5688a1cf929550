import pytest
from hypothesis import given, settings, strategies as st

from claimtriage.claims import ErrorCategory, Verdict, parse_claim_set
from claimtriage.oracle import (
    Article,
    CATEGORY_PRIORITY,
    RULE_REGISTRY,
    audit,
    check_ambiguity,
    check_antecedent,
    check_dependency,
    check_logical,
    check_syntax,
    default_lexicons,
    extract_entities,
    lint_lines,
    load_lexicons,
)

# Exemplar snippets used across the suite.  The *_OK/_BAD pairs differ by a
# single targeted defect.
ANTECEDENT_OK = "A device comprising a sensor; wherein the sensor captures data."
ANTECEDENT_BAD = "A device comprising a processor; wherein the sensor captures data based on input."
DEPENDENCY_OK = "1. A method comprising a step.\n2. The method of claim 1, further comprising..."
DEPENDENCY_BAD = "1. A method comprising a step.\n2. The method of claim 8, further comprising..."
LOGICAL_OK = "A transparent glass layer acting as a window."
LOGICAL_BAD = "A transparent glass layer made of opaque steel."
AMBIGUITY_OK = "Heating the water to 100 degrees Celsius."
AMBIGUITY_BAD = "Heating the water to a substantially high temperature."
SYNTAX_OK = "A system comprising: a processor; and a memory."
SYNTAX_BAD = "A system includes a processor a memory"
MULTI_ELEMENT_OK = (
    "A semiconductor device comprising a substrate, a gate structure formed "
    "over the substrate, and a spacer adjacent to gate structure."
)


def _cs(text):
    return parse_claim_set(text)


# --- entity extraction ---

def test_extract_entities_articles_and_heads():
    claim = _cs(ANTECEDENT_OK).claims[0]
    mentions = extract_entities(claim)
    got = [(m.head, m.article) for m in mentions]
    assert got == [
        ("device", Article.INDEFINITE),
        ("sensor", Article.INDEFINITE),
        ("sensor", Article.DEFINITE),
    ]
    for m in mentions:
        s, e = m.span
        assert 0 <= s < e <= len(claim.text)


def test_extract_entities_single_mention():
    mentions = extract_entities(_cs("A widget.").claims[0])
    assert [(m.head, m.article) for m in mentions] == [("widget", Article.INDEFINITE)]


def test_extract_entities_multiword_heads_match():
    claim = _cs(
        "A device comprising a gate structure, wherein the gate structure is rigid."
    ).claims[0]
    mentions = extract_entities(claim)
    heads = [m.head for m in mentions if m.head != "device"]
    assert heads == ["gate structure", "gate structure"]


def test_extract_entities_one_or_more_is_indefinite():
    cs = _cs("An assembly comprising one or more sensors, wherein the sensors are active.")
    mentions = extract_entities(cs.claims[0])
    by_article = {m.article: m.head for m in mentions if m.head != "assembly"}
    # introducer and later use share one normalized head, so resolution holds
    assert by_article[Article.INDEFINITE] == by_article[Article.DEFINITE]
    assert check_antecedent(cs) == []


def test_extract_entities_plural_strips_only_with_singular_present():
    # singular "sensor" occurs in the set, so "sensors" normalizes
    claim = _cs("A sensor array and the sensors.").claims[0]
    heads = [m.head for m in extract_entities(claim)]
    assert "sensor" in heads
    # no singular anywhere: plural head survives
    claim2 = _cs("A bellows attached to the bellows.").claims[0]
    heads2 = [m.head for m in extract_entities(claim2)]
    assert heads2 == ["bellows", "bellows"]


# --- antecedent ---

def test_antecedent_flags_dangling_definite_reference():
    vs = check_antecedent(_cs(ANTECEDENT_BAD))
    assert len(vs) == 1
    v = vs[0]
    assert v.category is ErrorCategory.ANTECEDENT
    claim = _cs(ANTECEDENT_BAD).claims[0]
    assert claim.text[v.span[0]:v.span[1]] == "the sensor"
    assert "2173.05(e)" in v.message


def test_antecedent_clean_when_introducer_present():
    assert check_antecedent(_cs(ANTECEDENT_OK)) == []


def test_antecedent_resolves_through_dependency_closure():
    cs = _cs(
        "1. A device comprising a substrate.\n"
        "2. The device of claim 1, wherein the substrate is rigid."
    )
    assert check_antecedent(cs) == []


def test_antecedent_closure_is_transitive():
    cs = _cs(
        "1. A device comprising a substrate.\n"
        "2. The device of claim 1, further comprising a spacer.\n"
        "3. The device of claim 2, wherein the substrate supports the spacer."
    )
    assert check_antecedent(cs) == []


def test_antecedent_not_inherited_from_unrelated_claim():
    cs = _cs(
        "1. A device comprising a substrate.\n"
        "2. A tool comprising a blade, wherein the substrate is cut."
    )
    vs = check_antecedent(cs)
    assert [v.claim_number for v in vs] == [2]


def test_antecedent_skipped_for_claims_with_broken_references():
    # the dependency defect is the reportable one; scope cannot be resolved
    vs = check_antecedent(_cs(DEPENDENCY_BAD))
    assert vs == []


def test_antecedent_implied_heads_need_no_introduction():
    assert check_antecedent(_cs(AMBIGUITY_OK)) == []


def test_antecedent_said_is_definite():
    vs = check_antecedent(_cs("A clamp engaging said rail."))
    assert len(vs) == 1
    assert "said rail" in vs[0].message


# --- dependency ---

def test_dependency_nonexistent_reference_single_violation():
    cs = _cs(
        "1. A method comprising a step.\n"
        "2. The method of claim 8, further comprising...\n"
        "3. The method of claim 1, wherein the step repeats."
    )
    vs = check_dependency(cs)
    assert len(vs) == 1
    assert vs[0].rule_id == "dependency-nonexistent"
    assert vs[0].claim_number == 2


def test_dependency_two_claim_cycle_yields_two_violations():
    cs = _cs(
        "1. A method comprising a step.\n"
        "2. The method of claim 3, further comprising a pause.\n"
        "3. The method of claim 2, wherein the pause is timed."
    )
    vs = check_dependency(cs)
    assert len(vs) == 2
    assert {v.rule_id for v in vs} == {"dependency-cycle"}
    assert sorted(v.claim_number for v in vs) == [2, 3]


def test_dependency_backward_reference_is_clean():
    cs = _cs("1. A method comprising a step.\n2. The method of claim 1.")
    assert check_dependency(cs) == []


def test_dependency_forward_reference_flagged():
    cs = _cs(
        "1. A method comprising a step.\n"
        "2. The method of claim 3, wherein the step repeats.\n"
        "3. The method of claim 1, further comprising a pause."
    )
    vs = check_dependency(cs)
    assert [v.rule_id for v in vs] == ["dependency-forward"]


def test_dependency_self_reference_flagged_once():
    vs = check_dependency(_cs("The method of claim 1, further comprising..."))
    assert [v.rule_id for v in vs] == ["dependency-forward"]


# --- logical ---

def test_logical_contradiction_flagged_on_second_member():
    cs = _cs(LOGICAL_BAD)
    vs = check_logical(cs)
    assert len(vs) == 1
    v = vs[0]
    claim = cs.claims[0]
    assert claim.text[v.span[0]:v.span[1]] == "opaque"
    assert "transparent" in v.message and "opaque" in v.message


def test_logical_charging_discharged_pair():
    cs = _cs(
        "A battery including a charging unit that generates electrical "
        "energy from the discharged battery cell."
    )
    vs = check_logical(cs)
    assert len(vs) == 1
    assert "charging" in vs[0].message


def test_logical_single_member_is_clean():
    assert check_logical(_cs(LOGICAL_OK)) == []


def test_logical_pair_split_across_claims_is_clean():
    cs = _cs("1. A rigid frame.\n2. The frame of claim 1, with a flexible strap.")
    assert check_logical(cs) == []


def test_logical_radius_limits_the_window():
    cs = _cs("A rigid beam positioned over a flexible mat.")
    assert len(check_logical(cs)) == 1
    assert check_logical(cs, radius=1) == []


# --- ambiguity ---

def test_ambiguity_flags_vague_degree_phrase_longest_match():
    vs = check_ambiguity(_cs(AMBIGUITY_BAD))
    assert len(vs) == 1
    cs = _cs(AMBIGUITY_BAD)
    got = cs.claims[0].text[vs[0].span[0]:vs[0].span[1]]
    assert got == "substantially high"


def test_ambiguity_precise_numeric_is_clean():
    assert check_ambiguity(_cs(AMBIGUITY_OK)) == []


def test_ambiguity_each_occurrence_flagged():
    vs = check_ambiguity(_cs("A substantially long arm and a relatively short leg."))
    assert len(vs) == 2


def test_ambiguity_empty_lexicon_is_vacuous(tmp_path):
    path = tmp_path / "lex.json"
    path.write_text(
        '{"degree_terms": [], "antonym_pairs": [], "transitional_phrases": []}'
    )
    lex = load_lexicons(str(path))
    assert check_ambiguity(_cs(AMBIGUITY_BAD), lex) == []


def test_ambiguity_numeric_context_respects_entry_flag(tmp_path):
    path = tmp_path / "lex.json"
    path.write_text(
        '{"degree_terms": [{"term": "about", "flag_numeric": false}],'
        ' "antonym_pairs": [], "transitional_phrases": []}'
    )
    lex = load_lexicons(str(path))
    assert check_ambiguity(_cs("A beam spanning about 100 millimeters."), lex) == []
    assert len(check_ambiguity(_cs("A beam of about average span."), lex)) == 1


# --- syntax ---

def test_syntax_corrupted_transition_raises_all_three_rules():
    vs = check_syntax(_cs(SYNTAX_BAD))
    assert {v.rule_id for v in vs} == {
        "syntax-missing-transition",
        "syntax-missing-period",
        "syntax-missing-separator",
    }


def test_syntax_clean_enumeration():
    assert check_syntax(_cs(SYNTAX_OK)) == []


def test_syntax_single_element_vacuous():
    assert check_syntax(_cs("A widget comprising a handle.")) == []


def test_syntax_no_transition_single_element_is_clean():
    # a simple body with no enumeration carries no transition requirement
    assert check_syntax(_cs(LOGICAL_OK)) == []
    assert check_syntax(_cs(AMBIGUITY_OK)) == []


def test_syntax_missing_period_only():
    vs = check_syntax(_cs("1. A widget comprising a handle"))
    assert [v.rule_id for v in vs] == ["syntax-missing-period"]


def test_syntax_separator_restored_is_clean():
    assert check_syntax(_cs("A system comprising a processor, and a memory.")) == []


# --- audit ---

def test_audit_pass_on_multi_element_device_claim():
    report = audit(_cs(MULTI_ELEMENT_OK))
    assert report.verdict.verdict is Verdict.PASS
    assert report.violations == ()
    assert "Element Parsing" in report.steps[0]
    assert "Statutory Compliance" in report.steps[1]
    assert "Verdict" in report.steps[2]


def test_audit_fail_with_antecedent_category():
    report = audit(_cs(ANTECEDENT_BAD))
    assert report.verdict.verdict is Verdict.FAIL
    assert report.verdict.category is ErrorCategory.ANTECEDENT


def test_audit_priority_antecedent_over_dependency():
    cs = _cs(
        "1. A device comprising a lever, wherein the handle turns.\n"
        "2. The device of claim 3, further comprising a pin.\n"
        "3. The device of claim 1, wherein the lever locks."
    )
    report = audit(cs)
    cats = {v.category for v in report.violations}
    assert ErrorCategory.ANTECEDENT in cats and ErrorCategory.DEPENDENCY in cats
    assert report.verdict.category is ErrorCategory.ANTECEDENT


def test_audit_category_matches_priority_order_generally():
    cs = _cs(SYNTAX_BAD)
    report = audit(cs)
    first = min(
        report.violations, key=lambda v: CATEGORY_PRIORITY.index(v.category)
    )
    assert report.verdict.category is first.category


@pytest.mark.parametrize(
    "ok,bad,category",
    [
        (ANTECEDENT_OK, ANTECEDENT_BAD, ErrorCategory.ANTECEDENT),
        (DEPENDENCY_OK, DEPENDENCY_BAD, ErrorCategory.DEPENDENCY),
        (LOGICAL_OK, LOGICAL_BAD, ErrorCategory.LOGICAL),
        (AMBIGUITY_OK, AMBIGUITY_BAD, ErrorCategory.AMBIGUITY),
        (SYNTAX_OK, SYNTAX_BAD, ErrorCategory.SYNTAX),
    ],
)
def test_audit_exemplar_pairs(ok, bad, category):
    clean = audit(_cs(ok))
    assert clean.verdict.verdict is Verdict.PASS, (ok, clean.violations)
    broken = audit(_cs(bad))
    assert broken.verdict.verdict is Verdict.FAIL
    assert broken.verdict.category is category


def test_audit_determinism():
    cs = _cs(SYNTAX_BAD)
    a, b = audit(cs), audit(cs)
    assert a == b


def test_checkers_emit_only_their_own_category():
    texts = [ANTECEDENT_BAD, DEPENDENCY_BAD, LOGICAL_BAD, AMBIGUITY_BAD, SYNTAX_BAD]
    checkers = {
        ErrorCategory.ANTECEDENT: check_antecedent,
        ErrorCategory.DEPENDENCY: check_dependency,
        ErrorCategory.LOGICAL: check_logical,
        ErrorCategory.AMBIGUITY: check_ambiguity,
        ErrorCategory.SYNTAX: check_syntax,
    }
    for text in texts:
        cs = _cs(text)
        for cat, fn in checkers.items():
            assert all(v.category is cat for v in fn(cs))


def test_rule_registry_covers_all_violations():
    for text in (ANTECEDENT_BAD, DEPENDENCY_BAD, LOGICAL_BAD, AMBIGUITY_BAD, SYNTAX_BAD):
        for v in audit(_cs(text)).violations:
            assert v.rule_id in RULE_REGISTRY
            assert RULE_REGISTRY[v.rule_id][0] is v.category


def test_lint_lines_format():
    lines = lint_lines(_cs(ANTECEDENT_BAD))
    assert len(lines) == 1
    fields = lines[0].split("\t")
    assert len(fields) == 5
    assert fields[0] == "1"
    assert fields[1] == "antecedent"
    assert fields[2] == "antecedent-unintroduced"
    start, end = fields[3].split("-")
    assert int(start) < int(end)


def test_lexicons_lowercase_and_symmetric():
    lex = default_lexicons()
    for term, _ in lex.degree_terms:
        assert term == term.lower()
    for x, y in lex.antonym_pairs:
        assert lex.antonym_partner(x) == y
        assert lex.antonym_partner(y) == x


@settings(max_examples=60)
@given(
    st.lists(
        st.sampled_from(
            ["a", "the", "sensor", "valve", "comprising", "wherein", ";", ".", "rigid"]
        ),
        min_size=1,
        max_size=25,
    )
)
def test_audit_verdict_fail_iff_any_violation(words):
    try:
        cs = parse_claim_set("1. " + " ".join(words))
    except Exception:
        return
    report = audit(cs)
    assert (report.verdict.verdict is Verdict.FAIL) == bool(report.violations)
    if report.verdict.verdict is Verdict.FAIL:
        assert report.verdict.category is report.violations[0].category
    else:
        assert report.verdict.category is None
