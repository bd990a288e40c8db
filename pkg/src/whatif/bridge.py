"""Pluggable LLM integration.

Two-step generation (type classification by majority vote over three
calls, then spec generation from a few-shot prompt), binary error
detection, per-category diagnosis prompts, and targeted repair. A
deterministic mock provider replays recorded transcripts keyed by
prompt digest, so every pipeline runs offline; live providers read
their endpoint and credentials from the environment and are never
contacted by tests.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import time
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

from .errors import ErrorFinding, blocking, finding
from .jsontree import canonical_dumps, path_exists, path_get
from .spec import (
    EXPERIMENT_TYPES,
    SCHEMA,
    Spec,
    SpecPatch,
    PatchOp,
    parse_spec,
    serialize_spec,
)
from .validation import categorize_errors, diff_specs, validate_structure

log = logging.getLogger(__name__)

DEFAULT_TEMPERATURE = 0.0
RETRY_ATTEMPTS = 3
CLASSIFY_CALLS = 3


class ProviderError(Exception):
    def __init__(self, message: str, votes: list[str] | None = None):
        super().__init__(message)
        self.votes = votes or []


def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class MockProvider:
    """Replays recorded responses keyed by prompt digest.

    Transcripts are JSON-lines files of ``{"promptDigest": ...,
    "response": ...}`` (or an in-memory mapping from digest to
    response).
    """

    def __init__(self, transcript: str | Path | dict):
        if isinstance(transcript, dict):
            self._responses = dict(transcript)
        else:
            self._responses = {}
            with Path(transcript).open(encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    entry = json.loads(line)
                    self._responses[entry["promptDigest"]] = entry["response"]

    def complete(self, prompt: str) -> str:
        digest = prompt_digest(prompt)
        try:
            return self._responses[digest]
        except KeyError:
            head = prompt.splitlines()[0] if prompt else ""
            raise ProviderError(
                f"transcript has no response for digest {digest[:12]}... "
                f"(prompt starts {head!r})") from None


class HttpProvider:
    """Plain text-in/text-out completion over HTTP.

    Configuration comes from the environment: WHATIF_LLM_ENDPOINT,
    WHATIF_LLM_API_KEY, WHATIF_LLM_MODEL. Credentials never appear in
    prompts, logs, or serialized reports.
    """

    def __init__(self, endpoint: str | None = None, model: str | None = None,
                 temperature: float = DEFAULT_TEMPERATURE, timeout: float = 60.0):
        self.endpoint = endpoint or os.environ.get("WHATIF_LLM_ENDPOINT")
        self.model = model or os.environ.get("WHATIF_LLM_MODEL", "")
        self.temperature = temperature
        self.timeout = timeout
        if not self.endpoint:
            raise ProviderError("no endpoint configured (WHATIF_LLM_ENDPOINT)")

    def complete(self, prompt: str) -> str:
        import urllib.request

        key = os.environ.get("WHATIF_LLM_API_KEY", "")
        body = json.dumps({"model": self.model, "prompt": prompt,
                           "temperature": self.temperature}).encode()
        last_error: Exception | None = None
        for attempt in range(RETRY_ATTEMPTS):
            try:
                req = urllib.request.Request(
                    self.endpoint, data=body,
                    headers={"Content-Type": "application/json",
                             "Authorization": f"Bearer {key}"})
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    payload = json.loads(resp.read().decode())
                return payload["text"]
            except Exception as exc:  # noqa: BLE001 - retried, then surfaced
                last_error = exc
                time.sleep(2 ** attempt * 0.5)
        raise ProviderError(f"provider failed after {RETRY_ATTEMPTS} attempts: "
                            f"{last_error}")


def provider_from_config(config: dict | None):
    config = config or {}
    kind = config.get("kind", "mock" if config.get("transcript") else "http")
    if kind == "mock":
        transcript = config.get("transcript")
        if not transcript:
            raise ProviderError("mock provider needs a transcript path")
        return MockProvider(transcript)
    return HttpProvider(endpoint=config.get("endpoint"), model=config.get("model"),
                        temperature=config.get("temperature", DEFAULT_TEMPERATURE))


# ---------------------------------------------------------------------------
# Prompt builders (each section under a labeled delimiter)


def _section(label: str, content: str) -> str:
    return f"### {label}\n{content.strip()}\n\n"


_SCHEMA_TEXT: str | None = None


def schema_text() -> str:
    global _SCHEMA_TEXT
    if _SCHEMA_TEXT is None:
        _SCHEMA_TEXT = resources.files("whatif").joinpath(
            "pslschema.v1.json").read_text("utf-8")
    return _SCHEMA_TEXT


def _load_package_json(name: str) -> Any:
    return json.loads(resources.files("whatif").joinpath(name).read_text("utf-8"))


_EXEMPLARS: dict[str, list[dict]] | None = None


def generation_exemplars(wia_type: str) -> list[dict]:
    global _EXEMPLARS
    if _EXEMPLARS is None:
        _EXEMPLARS = _load_package_json("exemplars.json")
    return _EXEMPLARS.get(wia_type, [])


def shuffled_type_order(question: str, call_index: int, seed: int = 0) -> list[str]:
    rng = random.Random(f"{seed}|{call_index}|{question}")
    order = sorted(EXPERIMENT_TYPES)
    rng.shuffle(order)
    return order


def build_classification_prompt(question: str, dataset_context: str,
                                type_order: list[str]) -> str:
    lines = [f"- {t}: {SCHEMA['typeDefinitions'][t]}" for t in type_order]
    task = ("Classify the what-if question into exactly one analysis type. "
            "Answer with the type name alone.\n" + "\n".join(lines))
    return (_section("TASK", task)
            + _section("DATASET CONTEXT", dataset_context)
            + _section("QUESTION", question)).rstrip() + "\n"


def build_generation_prompt(question: str, wia_type: str, dataset_context: str,
                            exemplars: list[dict] | None = None) -> str:
    if exemplars is None:
        exemplars = generation_exemplars(wia_type)
    if not 2 <= len(exemplars) <= 4:
        raise ProviderError(f"generation needs two to four exemplar pairs, "
                            f"got {len(exemplars)}")
    shown = "\n\n".join(
        f"Question: {ex['question']}\nSpecification:\n"
        + canonical_dumps(ex["spec"]).rstrip()
        for ex in exemplars)
    task = (f"Write the what-if specification (JSON) for the question. "
            f"The assigned analysis type is {wia_type}: "
            f"{SCHEMA['typeDefinitions'][wia_type]} "
            "Answer with the JSON document alone.")
    return (_section("TASK", task)
            + _section("SCHEMA", schema_text())
            + _section("EXAMPLES", shown)
            + _section("DATASET CONTEXT", dataset_context)
            + _section("QUESTION", question)).rstrip() + "\n"


def build_detection_prompt(question: str, spec: Spec, dataset_context: str) -> str:
    task = ("Does the specification contain any error with respect to the "
            "question? Answer 1 for yes, 0 for no. Answer with the digit alone.")
    return (_section("TASK", task)
            + _section("DATASET CONTEXT", dataset_context)
            + _section("SCHEMA", schema_text())
            + _section("QUESTION", question)
            + _section("SPECIFICATION", serialize_spec(spec))).rstrip() + "\n"


def build_diagnosis_prompt(question: str, spec: Spec, dataset_context: str,
                           category: str, definition: dict) -> str:
    """Per-category yes/no diagnosis. Exposed as a builder plus response
    parser only; nothing autonomous consumes it."""
    bundle = (f"{definition['name']}: {definition['description']}\n"
              "Positive examples (the error is present):\n"
              + "\n".join(canonical_dumps(e).rstrip()
                          for e in definition.get("positive", []))
              + "\nNegative examples (the error is absent):\n"
              + "\n".join(canonical_dumps(e).rstrip()
                          for e in definition.get("negative", [])))
    task = (f"Is error {category} present in the specification? "
            "Answer 1 for present, 0 for absent. Answer with the digit alone.")
    return (_section("TASK", task)
            + _section("ERROR DEFINITION", bundle)
            + _section("DATASET CONTEXT", dataset_context)
            + _section("SCHEMA", schema_text())
            + _section("QUESTION", question)
            + _section("SPECIFICATION", serialize_spec(spec))).rstrip() + "\n"


REPAIR_SECTION_LABELS = ("ERROR", "REPAIR INSTRUCTION", "EXAMPLES",
                         "DATASET CONTEXT", "SCHEMA")


@dataclass(frozen=True)
class RepairContext:
    error_category: str
    error_name: str
    error_description: str
    repair_instruction: str
    exemplars: tuple
    dataset_context: str
    schema: str

    def validate(self) -> None:
        parts = {
            "error name": self.error_name,
            "error description": self.error_description,
            "repair instruction": self.repair_instruction,
            "dataset context": self.dataset_context,
            "schema": self.schema,
        }
        for part, value in parts.items():
            if not value or not str(value).strip():
                raise ProviderError(f"repair context is missing its {part}")
        if not 2 <= len(self.exemplars) <= 3:
            raise ProviderError(
                f"repair context needs two or three exemplar triplets, "
                f"got {len(self.exemplars)}")
        for ex in self.exemplars:
            for key in ("question", "incorrect", "corrected"):
                if key not in ex:
                    raise ProviderError(f"repair exemplar is missing {key!r}")


_REPAIR_CONTEXTS: dict | None = None


def repair_context_for(category: str, dataset_context: str) -> RepairContext:
    """The shipped per-category repair fixture, bound to a dataset summary."""
    global _REPAIR_CONTEXTS
    if _REPAIR_CONTEXTS is None:
        _REPAIR_CONTEXTS = _load_package_json("repair_contexts.json")
    entry = _REPAIR_CONTEXTS.get(category)
    if entry is None:
        raise ProviderError(f"no repair context for category {category!r}")
    return RepairContext(
        error_category=category,
        error_name=entry["name"],
        error_description=entry["description"],
        repair_instruction=entry["instruction"],
        exemplars=tuple(entry["exemplars"]),
        dataset_context=dataset_context,
        schema=schema_text(),
    )


def build_repair_prompt(ctx: RepairContext, erroneous_spec: Spec,
                        question: str) -> str:
    """The five labeled parts, in order, then the question and the
    incorrect specification. Deterministic for identical inputs."""
    ctx.validate()
    shown = "\n\n".join(
        f"Question: {ex['question']}\nIncorrect specification:\n"
        + canonical_dumps(ex["incorrect"]).rstrip()
        + "\nCorrected specification:\n"
        + canonical_dumps(ex["corrected"]).rstrip()
        for ex in ctx.exemplars)
    return (_section("ERROR", f"{ctx.error_name}: {ctx.error_description}")
            + _section("REPAIR INSTRUCTION", ctx.repair_instruction)
            + _section("EXAMPLES", shown)
            + _section("DATASET CONTEXT", ctx.dataset_context)
            + _section("SCHEMA", ctx.schema)
            + _section("QUESTION", question)
            + _section("INCORRECT SPECIFICATION",
                       serialize_spec(erroneous_spec))).rstrip() + "\n"


# ---------------------------------------------------------------------------
# Pipelines


def classify_wia_type(question: str, dataset_context: str, provider,
                      seed: int = 0) -> str:
    """Three classification calls with a seeded shuffle of the type
    list; majority vote, first answer on a three-way split."""
    if not question.strip():
        raise ProviderError("question is empty")
    votes: list[str] = []
    for i in range(CLASSIFY_CALLS):
        order = shuffled_type_order(question, i, seed)
        prompt = build_classification_prompt(question, dataset_context, order)
        try:
            response = provider.complete(prompt).strip()
        except ProviderError as exc:
            raise ProviderError(f"classification call {i + 1} failed: {exc}",
                                votes=votes) from exc
        if response not in EXPERIMENT_TYPES:
            raise ProviderError(f"unrecognized type answer {response!r}",
                                votes=votes)
        votes.append(response)
    counts = Counter(votes)
    tag, n = counts.most_common(1)[0]
    if n == 1:
        log.warning("three-way classification split %s; keeping the first answer",
                    votes)
        return votes[0]
    return tag


@dataclass
class GenerationOutcome:
    raw: str
    findings: list[ErrorFinding]
    spec: Spec | None

    @property
    def compiles(self) -> bool:
        return not blocking(self.findings)


def generate_spec(question: str, wia_type: str, dataset_context: str, provider,
                  exemplars: list[dict] | None = None) -> GenerationOutcome:
    """One generation call; the raw response is always preserved and the
    validator's verdict attached, never hidden."""
    if wia_type not in EXPERIMENT_TYPES:
        raise ProviderError(f"unknown analysis type {wia_type!r}")
    prompt = build_generation_prompt(question, wia_type, dataset_context, exemplars)
    raw = provider.complete(prompt)
    findings = validate_structure(raw)
    parsed = parse_spec(raw)
    return GenerationOutcome(raw=raw, findings=findings,
                             spec=parsed if isinstance(parsed, Spec) else None)


def parse_binary_answer(response: str) -> bool:
    """The 0/1 answer protocol; anything else is a protocol error."""
    answer = response.strip()
    if answer not in ("0", "1"):
        raise ProviderError(f"expected a 0 or 1 answer, got {answer!r}")
    return answer == "1"


def detect_error_binary(question: str, spec: Spec, provider,
                        dataset_context: str = "") -> dict:
    """Single yes/no screen; non-conforming responses are an error, not
    silently coerced."""
    prompt = build_detection_prompt(question, spec, dataset_context)
    return {"flagged": parse_binary_answer(provider.complete(prompt))}


def diagnose_category(question: str, spec: Spec, category: str, definition: dict,
                      provider, dataset_context: str = "") -> dict:
    """Per-category yes/no diagnosis call.

    A standalone probe; nothing downstream consumes its verdict
    automatically (repair takes its category from a human).
    """
    prompt = build_diagnosis_prompt(question, spec, dataset_context, category,
                                    definition)
    return {"category": category,
            "present": parse_binary_answer(provider.complete(prompt))}


# default subtree to replace per category when slot-filling
_SLOT_ROOTS = {
    "EC5": ("perturb",),
    "EC6": ("outputVariable",),
    "EC7": ("constraints", "kind"),
    "EC8": ("scope",),
    "EC9": ("range", "top"),
}


def _slot_path(category: str, spec: Spec) -> str:
    keys = _SLOT_ROOTS.get(category)
    if keys is None:
        raise ProviderError(f"slot filling is not defined for {category}; "
                            "use regenerate mode")
    tree = spec.to_tree()
    if "scope" in keys:
        return "scope"
    if "outputVariable" in keys:
        return "outputVariable"
    for i, exp in enumerate(tree.get("experiments", [])):
        for key in keys:
            if isinstance(exp, dict) and key in exp:
                return f"experiments[{i}].{key}"
    # the faulty property may be missing outright; target the first
    # experiment's slot so the repair can introduce it
    if tree.get("experiments"):
        return f"experiments[0].{keys[0]}"
    raise ProviderError("specification has no experiments to repair")


@dataclass
class RepairOutcome:
    raw: str
    spec: Spec | None
    findings: list[ErrorFinding]
    target_path: str | None = None

    @property
    def compiles(self) -> bool:
        return not blocking(self.findings)


def repair_spec(question: str, erroneous_spec: Spec, category: str, provider,
                mode: str = "regenerate", dataset_context: str = "",
                target_path: str | None = None) -> RepairOutcome:
    """Category-targeted repair; the category is supplied by a human.

    ``regenerate`` replaces the whole document with the provider's
    answer and surfaces any cross-property substitution (EC10) the
    rewrite introduced. ``slotFill`` accepts only the subtree at the
    faulty path and patches it in, which structurally confines the
    change to that subtree.
    """
    ctx = repair_context_for(category, dataset_context or "(no dataset context)")
    prompt = build_repair_prompt(ctx, erroneous_spec, question)
    raw = provider.complete(prompt)

    if mode == "regenerate":
        findings = validate_structure(raw)
        parsed = parse_spec(raw)
        if isinstance(parsed, Spec):
            drift = [f for f in categorize_errors(
                diff_specs(parsed, erroneous_spec), parsed, erroneous_spec)
                if f.category == "EC10"]
            findings = findings + drift
            return RepairOutcome(raw=raw, spec=parsed, findings=findings)
        return RepairOutcome(raw=raw, spec=None, findings=findings)

    if mode != "slotFill":
        raise ProviderError(f"unknown repair mode {mode!r}")
    path = target_path or _slot_path(category, erroneous_spec)
    try:
        response_tree = json.loads(raw)
    except json.JSONDecodeError:
        return RepairOutcome(
            raw=raw, spec=None, target_path=path,
            findings=[finding("EC1", "malformedTree", path,
                              "slot-fill response is not JSON")])
    if isinstance(response_tree, dict) and path_exists(response_tree, path):
        subtree = path_get(response_tree, path)
    else:
        subtree = response_tree
    from .spec import apply_patch

    patched = apply_patch(erroneous_spec,
                          SpecPatch(ops=(PatchOp(path, "set", subtree),)))
    if isinstance(patched, list):
        return RepairOutcome(raw=raw, spec=None, findings=patched, target_path=path)
    return RepairOutcome(raw=raw, spec=patched, findings=[], target_path=path)
