"""Expert-path client: CoPT prompt assembly, strict response schema, transport.

The prompt is a fixed two-shot chat template (one Pass demonstration, one
Fail demonstration) whose system instruction mandates the three-step protocol
and a JSON answer of the form {"reasoning": ..., "verdict": "Pass"/"Fail"}.
Responses are accepted only through that schema; the verdict field is never
inferred from prose.

`mock_expert` backs the same interface with the structural audit, giving an
offline expert whose verdict equals the oracle verdict on every input.
"""

from __future__ import annotations

import json
import os
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import requests

from .claims import ClaimSet, Verdict
from .errors import AuthError, ConfigError, SchemaError, TransportError
from .oracle import audit

COPT_SYSTEM_INSTRUCTION = (
    "You are a Senior Patent Attorney.\n"
    "Your task is to evaluate the validity of a patent claim based on specific error "
    "types.\n"
    "\n"
    "[Special Instruction]: To ensure strict adherence to 35 U.S.C. § 112, you "
    "must explicitly document your reasoning process using the Chain of Patent "
    "Thought (CoPT) protocol before concluding.\n"
    "\n"
    "1. [Element Parsing]: Identify preamble, transition, and body elements.\n"
    "2. [Statutory Compliance]: Check for Antecedent Basis errors, Indefinite terms, "
    "and Logical Contradictions.\n"
    "3. [Verdict]: Determine if the claim passes or fails based strictly on the "
    "above.\n"
    "\n"
    "Output Requirement:\n"
    'You must return a JSON object containing a "reasoning" field (for the '
    'step-by-step analysis) and a "verdict" field ("Pass" or "Fail").\n'
    'Format: {"reasoning": "Step 1... Step 2...", "verdict": "Pass/Fail"}'
)

_SHOT_1_USER = (
    'Claim: "A semiconductor device comprising a substrate, a gate structure formed '
    'over the substrate, and a spacer adjacent to the gate structure."'
)
_SHOT_1_ASSISTANT = (
    '{"reasoning": "Step 1 [Element Parsing]: The claim includes a substrate, a gate '
    "structure, and a spacer. Step 2 [Statutory Compliance]: 'the substrate' and "
    "'the gate structure' have clear antecedent bases from the preamble. No "
    "indefinite terms or logical conflicts found. Step 3 [Verdict]: The claim meets "
    'all 35 U.S.C. § 112 requirements.", "verdict": "Pass"}'
)
_SHOT_2_USER = (
    'Claim: "A device comprising a processor; wherein the sensor captures data '
    'based on input."'
)
_SHOT_2_ASSISTANT = (
    '{"reasoning": "Step 1 [Element Parsing]: The claim introduces a processor but '
    "explicitly recites 'the sensor' in the body. Step 2 [Statutory Compliance]: The "
    "term 'the sensor' lacks a proper antecedent basis (i.e., 'a sensor' was never "
    'introduced). This is a violation of 35 U.S.C. § 112(b). Step 3 [Verdict]: '
    'The claim is invalid due to lack of antecedent basis.", "verdict": "Fail"}'
)

COPT_SHOTS: tuple[tuple[str, str], ...] = (
    (_SHOT_1_USER, _SHOT_1_ASSISTANT),
    (_SHOT_2_USER, _SHOT_2_ASSISTANT),
)

TARGET_TEMPLATE = 'Claim: "{claim_text}"'

DEFAULT_CONCURRENCY = 4


@dataclass(frozen=True)
class PromptBundle:
    system_instruction: str
    shots: tuple[tuple[str, str], ...]
    target_user_message: str

    def messages(self) -> list[dict]:
        out = [{"role": "system", "content": self.system_instruction}]
        for user, assistant in self.shots:
            out.append({"role": "user", "content": user})
            out.append({"role": "assistant", "content": assistant})
        out.append({"role": "user", "content": self.target_user_message})
        return out


@dataclass(frozen=True)
class ExpertVerdict:
    reasoning: str
    verdict: Verdict
    raw: str
    transport_latency: float = 0.0


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model: str = "copt-expert"
    timeout_s: float = 30.0
    max_retries: int = 2
    temperature: float = 0.0
    max_tokens: int = 1024
    credential_env: str = "CLAIMTRIAGE_EXPERT_KEY"
    backoff_base_s: float = 0.5
    jitter_s: float = 0.1

    def __post_init__(self):
        if self.timeout_s <= 0:
            raise ConfigError("endpoint timeout must be positive")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be non-negative")


def build_copt_prompt(claim_set: ClaimSet) -> PromptBundle:
    target = TARGET_TEMPLATE.format(claim_text=claim_set.serialize())
    return PromptBundle(COPT_SYSTEM_INSTRUCTION, COPT_SHOTS, target)


def serialize_expert_verdict(verdict: ExpertVerdict) -> str:
    # reasoning precedes verdict in the serialized object, always
    return json.dumps(
        {"reasoning": verdict.reasoning,
         "verdict": "Pass" if verdict.verdict is Verdict.PASS else "Fail"}
    )


def parse_expert_response(raw: str) -> ExpertVerdict:
    """Decode the first JSON object in *raw* and validate it as a verdict.

    Validation applies to that first object only; a schema violation is not
    masked by searching further.
    """
    decoder = json.JSONDecoder()
    obj = None
    for idx, ch in enumerate(raw):
        if ch != "{":
            continue
        try:
            candidate, _ = decoder.raw_decode(raw, idx)
        except json.JSONDecodeError:
            continue
        if isinstance(candidate, dict):
            obj = candidate
            break
    if obj is None:
        raise SchemaError("response contains no JSON object")
    if "reasoning" not in obj:
        raise SchemaError("response object lacks a reasoning field")
    if "verdict" not in obj:
        raise SchemaError("response object lacks a verdict field")
    reasoning = obj["reasoning"]
    if not isinstance(reasoning, str) or not reasoning.strip():
        raise SchemaError("reasoning must be a non-empty string")
    verdict_raw = obj["verdict"]
    if not isinstance(verdict_raw, str) or verdict_raw.lower() not in ("pass", "fail"):
        raise SchemaError(f"unrecognized verdict value: {verdict_raw!r}")
    verdict = Verdict.PASS if verdict_raw.lower() == "pass" else Verdict.FAIL
    return ExpertVerdict(reasoning=reasoning, verdict=verdict, raw=raw)


class _Transient(Exception):
    pass


def _request_once(cfg: EndpointConfig, bundle: PromptBundle) -> ExpertVerdict:
    url = cfg.base_url.rstrip("/") + "/v1/chat/completions"
    payload = {
        "model": cfg.model,
        "messages": bundle.messages(),
        "temperature": cfg.temperature,
        "max_tokens": cfg.max_tokens,
    }
    headers = {}
    key = os.environ.get(cfg.credential_env, "")
    if key:
        headers["Authorization"] = f"Bearer {key}"
    started = time.monotonic()
    response = requests.post(url, json=payload, headers=headers, timeout=cfg.timeout_s)
    latency = time.monotonic() - started
    if response.status_code in (401, 403):
        raise AuthError(f"endpoint rejected credentials (HTTP {response.status_code})")
    if response.status_code == 429 or response.status_code >= 500:
        raise _Transient(f"HTTP {response.status_code}")
    if response.status_code != 200:
        raise TransportError(f"unexpected HTTP {response.status_code} from {url}")
    try:
        doc = response.json()
        content = doc["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise SchemaError(f"malformed completion envelope: {exc}") from exc
    if not isinstance(content, str):
        raise SchemaError("completion content is not text")
    return replace(parse_expert_response(content), transport_latency=latency)


def evaluate_remote(cfg: EndpointConfig, bundle: PromptBundle) -> ExpertVerdict:
    """One expert call with retries on transient transport failures only.

    Schema and auth failures surface immediately; connection errors and 5xx
    responses back off exponentially (base doubling per attempt, plus jitter)
    until the retry budget runs out, then raise TransportError.
    """
    rng = random.Random()
    last: Optional[BaseException] = None
    for attempt in range(cfg.max_retries + 1):
        try:
            return _request_once(cfg, bundle)
        except (requests.RequestException, _Transient) as exc:
            last = exc
            if attempt < cfg.max_retries:
                time.sleep(cfg.backoff_base_s * 2 ** attempt
                           + rng.uniform(0.0, cfg.jitter_s))
    raise TransportError(
        f"transport failed after {cfg.max_retries + 1} attempts: {last}"
    ) from last


def evaluate_many(
    cfg: EndpointConfig,
    items: Sequence[tuple[str, PromptBundle]],
    max_concurrency: int = DEFAULT_CONCURRENCY,
) -> tuple[dict[str, ExpertVerdict], dict[str, Exception]]:
    """Evaluate bundles concurrently, joined by id; failures collected per id."""
    results: dict[str, ExpertVerdict] = {}
    failures: dict[str, Exception] = {}
    if not items:
        return results, failures
    workers = max(1, min(max_concurrency, len(items)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {rid: pool.submit(evaluate_remote, cfg, bundle)
                   for rid, bundle in items}
        for rid, future in futures.items():
            try:
                results[rid] = future.result()
            except Exception as exc:
                failures[rid] = exc
    return results, failures


def mock_expert(claim_set: ClaimSet) -> ExpertVerdict:
    """Offline expert backed by the structural audit; fully deterministic."""
    report = audit(claim_set)
    reasoning = " ".join(report.steps)
    verdict = ExpertVerdict(reasoning=reasoning, verdict=report.verdict.verdict, raw="")
    return replace(verdict, raw=serialize_expert_verdict(verdict))
