"""Patent-claim validity triage pipeline.

Submodules: claims (domain types and parsing), oracle (structural linter),
corpus (clean claim-set synthesis), injector (seeded defect injection and
dataset assembly), gatekeeper (hashed-feature log-linear classifier), router
(entropy-based escalation policy), expert (schema-constrained expert client),
harness (metrics, cost model, end-to-end runs), cli (command-line entry).
"""

__version__ = "0.1.0"
