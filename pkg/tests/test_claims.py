import json

import pytest
from hypothesis import given, strategies as st

from claimtriage.claims import (
    Claim,
    DatasetRecord,
    ErrorCategory,
    Injection,
    Label,
    Verdict,
    load_dataset,
    parse_claim_set,
    record_from_dict,
    record_to_dict,
    tokenize,
    validate_record,
    write_dataset,
)
from claimtriage.errors import EmptyInput, NonMonotonicNumbering


def test_parse_two_claims_with_reference():
    cs = parse_claim_set(
        "1. A device comprising a sensor. 2. The device of claim 1, wherein..."
    )
    assert len(cs.claims) == 2
    assert cs.claims[0].number == 1
    assert cs.claims[1].number == 2
    assert cs.claims[1].references == (1,)
    assert cs.claims[0].references == ()


def test_parse_sole_unnumbered_claim_gets_number_one():
    cs = parse_claim_set("A widget comprising a handle.")
    assert len(cs.claims) == 1
    assert cs.claims[0].number == 1
    assert cs.claims[0].references == ()


def test_parse_blank_input_raises():
    with pytest.raises(EmptyInput):
        parse_claim_set("   ")


def test_parse_rejects_non_monotonic_numbers():
    with pytest.raises(NonMonotonicNumbering):
        parse_claim_set("2. A device. 1. A widget.")
    with pytest.raises(NonMonotonicNumbering):
        parse_claim_set("1. A device. 1. A widget.")


def test_parse_rejects_unnumbered_prefix_before_markers():
    with pytest.raises(NonMonotonicNumbering):
        parse_claim_set("A stray body. 2. A device.")


def test_inline_claim_reference_does_not_split():
    # "claim 1." followed by more prose must stay inside claim 2
    cs = parse_claim_set(
        "1. A method comprising a step.\n2. The method of claim 1. 3. A tool."
    )
    assert cs.numbers() == (1, 2, 3)
    assert "claim 1." in cs.claims[1].text


def test_newline_marker_without_prior_period_still_splits():
    cs = parse_claim_set("1. A device comprising a sensor\n2. The device of claim 1.")
    assert cs.numbers() == (1, 2)


def test_tokenize_keeps_punctuation_and_spans():
    toks = tokenize("A device; ok.")
    assert [t for t, _ in toks] == ["a", "device", ";", "ok", "."]
    for tok, (s, e) in toks:
        assert "A device; ok."[s:e].lower() == tok
    spans = [sp for _, sp in toks]
    assert spans == sorted(spans)
    assert all(spans[i][1] <= spans[i + 1][0] for i in range(len(spans) - 1))


def test_serialize_reparse_round_trip():
    cs = parse_claim_set(
        "1. A device comprising a sensor. 2. The device of claim 1, "
        "wherein the sensor captures data."
    )
    again = parse_claim_set(cs.serialize())
    assert again.claims == cs.claims


@given(st.text(alphabet="abcdefghij claim0123456789.;, ", min_size=1, max_size=120))
def test_reference_extraction_matches_bigram_definition(body):
    try:
        cs = parse_claim_set("1. " + body.replace("\n", " "))
    except (EmptyInput, NonMonotonicNumbering):
        return
    for c in cs.claims:
        words = list(c.token_strings())
        expected = [
            int(words[i + 1])
            for i in range(len(words) - 1)
            if words[i] == "claim" and words[i + 1].isdigit()
        ]
        assert list(c.references) == expected


def _pass_record():
    cs = parse_claim_set("1. A widget comprising a handle.", source_id="p1")
    return DatasetRecord(id="p1", claim_set=cs, label=Label(Verdict.PASS))


def _fail_record():
    cs = parse_claim_set("1. A widget comprising a handle.", source_id="f1")
    inj = Injection(ErrorCategory.AMBIGUITY, "ambiguity-degree-term", 1, (0, 5), 7)
    return DatasetRecord(
        id="f1",
        claim_set=cs,
        label=Label(Verdict.FAIL, ErrorCategory.AMBIGUITY),
        injection=inj,
    )


def test_validate_record_clean_cases():
    assert validate_record(_pass_record()) == []
    assert validate_record(_fail_record()) == []


def test_validate_record_flags_injection_on_pass():
    rec = _pass_record()
    bad = DatasetRecord(
        id=rec.id,
        claim_set=rec.claim_set,
        label=rec.label,
        injection=_fail_record().injection,
    )
    defects = validate_record(bad)
    assert len(defects) == 1
    assert "Pass" in defects[0]


def test_validate_record_flags_fail_without_category():
    rec = _fail_record()
    bad = DatasetRecord(
        id=rec.id,
        claim_set=rec.claim_set,
        label=Label(Verdict.FAIL),
        injection=rec.injection,
    )
    assert any("missing its category" in d for d in validate_record(bad))


def test_validate_record_flags_out_of_bounds_span():
    rec = _fail_record()
    bad_inj = Injection(ErrorCategory.AMBIGUITY, "ambiguity-degree-term", 1, (0, 9999), 7)
    bad = DatasetRecord(id=rec.id, claim_set=rec.claim_set, label=rec.label,
                        injection=bad_inj)
    assert any("span" in d for d in validate_record(bad))


def test_dataset_round_trip(tmp_path):
    records = [_pass_record(), _fail_record()]
    path = tmp_path / "data.jsonl"
    write_dataset(records, str(path))
    raw = path.read_bytes()
    assert b"\r" not in raw
    loaded = load_dataset(str(path))
    assert [r.id for r in loaded] == ["p1", "f1"]
    assert loaded[1].injection == records[1].injection
    assert loaded[1].label == records[1].label
    assert loaded[0].text == records[0].text
    # dict form is stable under a round trip too
    doc = record_to_dict(records[1])
    assert record_to_dict(record_from_dict(json.loads(json.dumps(doc)))) == doc


def test_claim_from_text_spans_inside_bounds():
    c = Claim.from_text(1, "A conduit coupled to a pump.")
    for _, (s, e) in c.tokens:
        assert 0 <= s < e <= len(c.text)
