"""Deterministic pool of lint-clean synthetic claim sets.

Every set audits clean by construction and carries the structure the defect
injector needs: indefinite introducers that are later referenced definitely,
dependent claims with rewritable "claim N" references, numeric operating
points, repeated pair adjectives, and two-element enumerations holding a
single separator.

Only the first member of each antonym pair appears in clean text; partners
enter the corpus exclusively through injection.
"""

from __future__ import annotations

import json
import random

from .claims import ClaimSet, parse_claim_set, stable_seed
from .errors import InsufficientPool
from .claims import Verdict
from .oracle import audit

DEVICE_NOUNS = (
    "machine", "apparatus", "assembly", "fixture", "mechanism",
    "instrument", "appliance", "enclosure", "platform", "cartridge",
)

COMPONENT_NOUNS = (
    "conduit", "gauge", "piston", "bracket", "rotor", "membrane", "nozzle",
    "actuator", "spindle", "damper", "bearing", "flange", "manifold",
    "gasket", "impeller", "plunger", "solenoid", "diaphragm", "clamp",
    "baffle", "louver", "sprocket", "pawl", "detent", "ferrule", "grommet",
    "stanchion", "turret", "carriage", "shroud",
)

# leading members of the antonym pairs; see the module docstring
PAIR_ADJECTIVES = ("heated", "rigid", "transparent", "conductive", "charging")

PLAIN_ADJECTIVES = (
    "cylindrical", "tubular", "annular", "planar", "tapered",
    "serrated", "perforated", "hollow", "resilient", "elongated",
)

NUMERIC_SPECS = (
    (90, "degrees Celsius"), (140, "degrees Celsius"), (220, "degrees Celsius"),
    (250, "pascals"), (420, "pascals"), (640, "pascals"),
    (12, "millimeters"), (35, "millimeters"), (60, "millimeters"),
)

_LINK_VERBS = ("surrounds", "engages", "supports")

_MAX_ATTEMPTS_PER_SLOT = 64


def _article(word: str) -> str:
    return "an" if word[0] in "aeiou" else "a"


def _noun_phrase(comp: str, adj: str | None, numeric: tuple[int, str] | None) -> str:
    head = f"{adj} {comp}" if adj else comp
    phrase = f"{_article(head)} {head}"
    if numeric is not None:
        phrase += f" operable at {numeric[0]} {numeric[1]}"
    return phrase


def _independent_claim(rng: random.Random, device: str, comps: list[str]) -> str:
    adjs: list[str | None] = [None] * len(comps)
    if len(comps) >= 2 and rng.random() < 0.35:
        # one pair adjective on two elements: a site for logical injection
        shared = rng.choice(PAIR_ADJECTIVES)
        for slot in rng.sample(range(len(comps)), 2):
            adjs[slot] = shared
    elif rng.random() < 0.4:
        adjs[rng.randrange(len(comps))] = rng.choice(PLAIN_ADJECTIVES + PAIR_ADJECTIVES)

    numerics: list[tuple[int, str] | None] = [None] * len(comps)
    if rng.random() < 0.55:
        numerics[rng.randrange(len(comps))] = rng.choice(NUMERIC_SPECS)

    elements = [_noun_phrase(c, a, n) for c, a, n in zip(comps, adjs, numerics)]
    opener = f"{_article(device).capitalize()} {device} comprising"
    if len(elements) == 2:
        body = f"{opener} {elements[0]}, and {elements[1]}"
    elif rng.random() < 0.5:
        body = f"{opener}: " + "; ".join(elements[:-1]) + f"; and {elements[-1]}"
    else:
        body = f"{opener} " + ", ".join(elements[:-1]) + f", and {elements[-1]}"

    if len(comps) >= 3 and rng.random() < 0.3:
        first, second = rng.sample(comps, 2)
        body += f", wherein the {first} {rng.choice(_LINK_VERBS)} the {second}"
    return body + "."


def _dependent_claim(rng: random.Random, device: str, ref: int,
                     comps: list[str], fresh: list[str]) -> str:
    forms = ["state", "link", "within"]
    if fresh:
        forms.append("extra")
    if len(comps) >= 2 and rng.random() < 0.25:
        forms = ["twin"]
    form = rng.choice(forms)
    lead = f"The {device} of claim {ref},"
    if form == "state":
        adj = rng.choice(PLAIN_ADJECTIVES + PAIR_ADJECTIVES)
        return f"{lead} wherein the {rng.choice(comps)} is {adj}."
    if form == "link":
        a, b = rng.sample(comps, 2) if len(comps) >= 2 else (comps[0], comps[0])
        if a == b:
            return f"{lead} wherein the {a} is {rng.choice(PLAIN_ADJECTIVES)}."
        return f"{lead} wherein the {a} {rng.choice(_LINK_VERBS)} the {b}."
    if form == "within":
        a, b = (rng.sample(comps, 2) if len(comps) >= 2 else (comps[0], comps[0]))
        if a == b:
            return f"{lead} wherein the {a} is hollow."
        return f"{lead} wherein the {a} is disposed within the {b}."
    if form == "twin":
        adj = rng.choice(PAIR_ADJECTIVES)
        a, b = rng.sample(comps, 2)
        return f"{lead} wherein the {a} remains {adj} and the {b} remains {adj}."
    new = fresh.pop(rng.randrange(len(fresh)))
    phrase = _noun_phrase(new, None, None)
    return f"{lead} further comprising {phrase} coupled to the {rng.choice(comps)}."


def _build_one(rng: random.Random, source_id: str) -> ClaimSet:
    device = rng.choice(DEVICE_NOUNS)
    n_claims = rng.choices((2, 3, 4), weights=(25, 45, 30))[0]
    n_elements = 2 if rng.random() < 0.3 else 3
    comps = rng.sample(COMPONENT_NOUNS, n_elements + 2)
    elements, fresh = comps[:n_elements], comps[n_elements:]

    lines = ["1. " + _independent_claim(rng, device, elements)]
    chain = n_claims >= 3 and rng.random() < 0.5
    for number in range(2, n_claims + 1):
        ref = number - 1 if chain else 1
        lines.append(f"{number}. " + _dependent_claim(rng, device, ref, elements, fresh))
    return parse_claim_set("\n".join(lines), source_id=source_id)


def build_pool(size: int, seed: int) -> list[ClaimSet]:
    """Build *size* distinct clean claim sets, fully determined by *seed*."""
    if size < 0:
        raise InsufficientPool("pool size must be non-negative")
    sets: list[ClaimSet] = []
    seen: set[str] = set()
    for i in range(size):
        for attempt in range(_MAX_ATTEMPTS_PER_SLOT):
            rng = random.Random(stable_seed(seed, "pool", i, attempt))
            cs = _build_one(rng, source_id=f"pool-{seed}-{i:05d}")
            text = cs.serialize()
            if text not in seen:
                break
        else:
            raise InsufficientPool(
                f"could not draw {size} distinct claim sets from the template "
                f"vocabulary (stalled at {len(sets)})"
            )
        report = audit(cs)
        if report.verdict.verdict is not Verdict.PASS:
            v = report.violations[0]
            raise RuntimeError(
                f"template produced a failing claim set "
                f"({v.rule_id} on claim {v.claim_number}): {text!r}"
            )
        seen.add(text)
        sets.append(cs)
    return sets


def write_pool(sets: list[ClaimSet], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for cs in sets:
            doc = {"id": cs.source_id, "text": cs.serialize()}
            fh.write(json.dumps(doc, separators=(",", ":")) + "\n")


def load_pool(path: str) -> list[ClaimSet]:
    sets = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            doc = json.loads(line)
            sets.append(parse_claim_set(doc["text"], source_id=doc.get("id", "")))
    return sets
