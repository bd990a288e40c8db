import json

import pytest

from whatif.bridge import (
    MockProvider,
    ProviderError,
    RepairContext,
    build_classification_prompt,
    build_detection_prompt,
    build_generation_prompt,
    build_repair_prompt,
    classify_wia_type,
    detect_error_binary,
    generate_spec,
    prompt_digest,
    repair_context_for,
    repair_spec,
    shuffled_type_order,
)
from whatif.errors import CATEGORIES
from whatif.jsontree import canonical_dumps, is_under
from whatif.spec import Spec, parse_spec, serialize_spec
from whatif.validation import diff_specs

from conftest import bank_point_sensitivity_tree, spec_text

CTX = "dataset bank_attrition (3 rows)"


def transcript_for(prompts_and_responses):
    return MockProvider({prompt_digest(p): r for p, r in prompts_and_responses})


def classification_transcript(question, answers, seed=0):
    pairs = []
    for i, answer in enumerate(answers):
        order = shuffled_type_order(question, i, seed)
        pairs.append((build_classification_prompt(question, CTX, order), answer))
    return transcript_for(pairs)


def test_checked_in_transcript_drives_both_steps(bank):
    from pathlib import Path

    from whatif.data import dataset_context

    transcript = Path(__file__).parent / "fixtures" / "transcript_flagship.jsonl"
    provider = MockProvider(transcript)
    ctx = dataset_context(bank)
    question = ("If customers with one product were changed to two and "
                "complaints were halved, what happens to churn?")
    assert classify_wia_type(question, ctx, provider) == "pointSensitivity"
    outcome = generate_spec(question, "pointSensitivity", ctx, provider)
    assert outcome.findings == []
    perturbs = outcome.spec.experiments[0].perturbs
    assert [p.op for p in perturbs] == ["setTo", "changeBy"]
    assert perturbs[0].filter is not None  # one-product rows only
    assert perturbs[1].value == -50  # complaints halved


def test_mock_provider_round_trip(tmp_path):
    path = tmp_path / "transcript.jsonl"
    prompt = "hello"
    path.write_text(json.dumps({"promptDigest": prompt_digest(prompt),
                                "response": "world"}) + "\n")
    provider = MockProvider(path)
    assert provider.complete("hello") == "world"
    with pytest.raises(ProviderError):
        provider.complete("unknown")


def test_majority_vote():
    q = "What is the most salient feature?"
    provider = classification_transcript(q, ["importance", "importance",
                                             "rangeSensitivity"])
    assert classify_wia_type(q, CTX, provider) == "importance"


def test_three_way_split_keeps_first(caplog):
    q = "How does churn vary across ages 20 to 80?"
    provider = classification_transcript(
        q, ["rangeSensitivity", "pointSensitivity", "importance"])
    with caplog.at_level("WARNING"):
        assert classify_wia_type(q, CTX, provider) == "rangeSensitivity"
    assert any("split" in r.message for r in caplog.records)


def test_type_order_is_shuffled_per_call():
    q = "anything"
    orders = {tuple(shuffled_type_order(q, i)) for i in range(3)}
    assert len(orders) == 3  # the three calls see different orders


def test_provider_failure_carries_votes():
    q = "What is the most salient feature?"
    pairs = []
    for i, answer in enumerate(["importance"]):
        order = shuffled_type_order(q, i, 0)
        pairs.append((build_classification_prompt(q, CTX, order), answer))
    provider = transcript_for(pairs)  # second call missing
    with pytest.raises(ProviderError) as err:
        classify_wia_type(q, CTX, provider)
    assert err.value.votes == ["importance"]


def test_generation_returns_spec_and_findings(bank_point_spec_tree):
    q = ("If customers with one product were changed to two and complaints "
         "were halved, what happens to churn?")
    answer = canonical_dumps(bank_point_sensitivity_tree())
    prompt = build_generation_prompt(q, "pointSensitivity", CTX)
    outcome = generate_spec(q, "pointSensitivity", CTX,
                            transcript_for([(prompt, answer)]))
    assert outcome.findings == []
    assert isinstance(outcome.spec, Spec)
    assert outcome.raw == answer


def test_generation_preserves_malformed_raw():
    q = "anything"
    prompt = build_generation_prompt(q, "importance", CTX)
    outcome = generate_spec(q, "importance", CTX,
                            transcript_for([(prompt, '{"dataset": "x",}')]))
    assert outcome.spec is None
    assert outcome.raw.endswith(",}")
    assert outcome.findings[0].category == "EC1"
    assert not outcome.compiles


def test_generation_flags_swapped_roles():
    q = "reach sales of 6000"
    bad = json.dumps({"dataset": "media_spend", "outputVariable": ["Sales"],
                      "experiments": [{"experimentType": "goalSeek",
                                       "kind": {"target": 6000, "value": "Sales"},
                                       "searchVariables": ["Affiliate_Impressions"]}]})
    prompt = build_generation_prompt(q, "goalSeek", CTX)
    outcome = generate_spec(q, "goalSeek", CTX, transcript_for([(prompt, bad)]))
    assert any(f.code == "swappedTargetValue" for f in outcome.findings)


def test_generation_prompt_requires_two_to_four_exemplars():
    with pytest.raises(ProviderError):
        build_generation_prompt("q", "importance", CTX,
                                exemplars=[{"question": "q", "spec": {}}])


def test_detection_protocol(bank_point_spec_tree):
    spec = parse_spec(spec_text(bank_point_spec_tree))
    q = "does it matter?"
    prompt = build_detection_prompt(q, spec, CTX)
    assert detect_error_binary(q, spec, transcript_for([(prompt, "1")]),
                               CTX) == {"flagged": True}
    assert detect_error_binary(q, spec, transcript_for([(prompt, "0")]),
                               CTX) == {"flagged": False}
    with pytest.raises(ProviderError):
        detect_error_binary(q, spec, transcript_for([(prompt, "maybe")]), CTX)


def test_diagnosis_probe(bank_point_spec_tree):
    from whatif.bridge import build_diagnosis_prompt, diagnose_category

    spec = parse_spec(spec_text(bank_point_spec_tree))
    definition = {"name": "Misgauging the scope",
                  "description": "the analysis runs on the wrong subset",
                  "positive": [{"scope": {"X": {"operator": "==", "value": 1}}}],
                  "negative": [{"scope": None}]}
    prompt = build_diagnosis_prompt("q", spec, CTX, "EC8", definition)
    assert "### ERROR DEFINITION" in prompt
    provider = transcript_for([(prompt, "1")])
    assert diagnose_category("q", spec, "EC8", definition, provider,
                             CTX) == {"category": "EC8", "present": True}
    with pytest.raises(ProviderError):
        diagnose_category("q", spec, "EC8", definition,
                          transcript_for([(prompt, "yes")]), CTX)


# --- repair prompts -----------------------------------------------------------


def test_repair_prompt_has_all_sections_in_order(bank_point_spec_tree):
    spec = parse_spec(spec_text(bank_point_spec_tree))
    ctx = repair_context_for("EC8", CTX)
    prompt = build_repair_prompt(ctx, spec, "a question")
    positions = [prompt.index(f"### {label}")
                 for label in ("ERROR", "REPAIR INSTRUCTION", "EXAMPLES",
                               "DATASET CONTEXT", "SCHEMA", "QUESTION",
                               "INCORRECT SPECIFICATION")]
    assert positions == sorted(positions)


def test_repair_prompt_deterministic(bank_point_spec_tree):
    spec = parse_spec(spec_text(bank_point_spec_tree))
    ctx = repair_context_for("EC9", CTX)
    assert build_repair_prompt(ctx, spec, "q") == build_repair_prompt(ctx, spec, "q")


def test_every_category_has_a_repair_context(bank_point_spec_tree):
    spec = parse_spec(spec_text(bank_point_spec_tree))
    for category in CATEGORIES:
        ctx = repair_context_for(category, CTX)
        prompt = build_repair_prompt(ctx, spec, "q")
        assert "### SCHEMA" in prompt


def test_single_exemplar_rejected():
    ctx = repair_context_for("EC9", CTX)
    crippled = RepairContext(
        error_category=ctx.error_category, error_name=ctx.error_name,
        error_description=ctx.error_description,
        repair_instruction=ctx.repair_instruction,
        exemplars=ctx.exemplars[:1], dataset_context=ctx.dataset_context,
        schema=ctx.schema)
    with pytest.raises(ProviderError, match="two or three"):
        crippled.validate()


def test_missing_context_part_named():
    ctx = repair_context_for("EC9", CTX)
    broken = RepairContext(
        error_category=ctx.error_category, error_name=ctx.error_name,
        error_description=ctx.error_description, repair_instruction="",
        exemplars=ctx.exemplars, dataset_context=ctx.dataset_context,
        schema=ctx.schema)
    with pytest.raises(ProviderError, match="repair instruction"):
        broken.validate()


# --- repair pipelines ---------------------------------------------------------


def range_tree(with_bounds=True):
    rng = {"variable": "Age", "upperBound": 80, "stepSize": 5}
    if with_bounds:
        rng["lowerBound"] = 20
    return {"dataset": "bank_attrition", "outputVariable": ["Exited"],
            "experiments": [{"experimentType": "rangeSensitivity",
                             "range": rng}]}


def repair_transcript(question, spec, category, response, ctx=CTX):
    prompt = build_repair_prompt(repair_context_for(category, ctx), spec, question)
    return transcript_for([(prompt, response)])


def test_slot_fill_confines_diff_to_target_subtree():
    broken = parse_spec(json.dumps(range_tree(with_bounds=False)))
    fixed_tree = range_tree(with_bounds=True)
    provider = repair_transcript("ages 20 to 80", broken, "EC9",
                                 canonical_dumps(fixed_tree))
    outcome = repair_spec("ages 20 to 80", broken, "EC9", provider,
                          mode="slotFill", dataset_context=CTX)
    assert outcome.spec is not None
    assert outcome.target_path == "experiments[0].range"
    for diff in diff_specs(outcome.spec, broken):
        assert is_under(diff.path, outcome.target_path)
    assert outcome.spec.experiments[0].range.lower_bound == 20


def test_slot_fill_accepts_bare_subtree():
    broken = parse_spec(json.dumps(range_tree(with_bounds=False)))
    subtree = {"variable": "Age", "lowerBound": 20, "upperBound": 80, "stepSize": 5}
    provider = repair_transcript("ages 20 to 80", broken, "EC9",
                                 canonical_dumps(subtree))
    outcome = repair_spec("ages 20 to 80", broken, "EC9", provider,
                          mode="slotFill", dataset_context=CTX)
    assert outcome.spec.experiments[0].range.lower_bound == 20


def test_slot_fill_targets_kind_for_goal_seek_faults():
    tree = {"dataset": "media_spend", "outputVariable": ["Sales"],
            "experiments": [{"experimentType": "goalSeek",
                             "kind": {"target": "Sales", "value": 9000,
                                      "direction": "reach"},
                             "searchVariables": ["Affiliate_Impressions"]}]}
    broken = parse_spec(json.dumps(tree))
    fixed_kind = {"target": "Sales", "value": 6000, "direction": "reach"}
    provider = repair_transcript("reach sales of 6000", broken, "EC7",
                                 canonical_dumps(fixed_kind))
    outcome = repair_spec("reach sales of 6000", broken, "EC7", provider,
                          mode="slotFill", dataset_context=CTX)
    assert outcome.target_path == "experiments[0].kind"
    assert outcome.spec.experiments[0].kind.value == 6000
    for diff in diff_specs(outcome.spec, broken):
        assert is_under(diff.path, outcome.target_path)


def test_regenerate_surfaces_cross_property_substitution():
    erroneous = parse_spec(json.dumps(bank_point_sensitivity_tree()))
    drifted = bank_point_sensitivity_tree()
    # the repair swaps the filter construct for a scope
    del drifted["experiments"][0]["perturb"][0]["filter"]
    drifted["scope"] = {"NumOfProducts": {"operator": "==", "value": 1}}
    drifted["experiments"][0]["experimentType"] = "scopedPointSensitivity"
    drifted["experiments"][0]["scope"] = "scope"
    provider = repair_transcript("change one to two products", erroneous, "EC5",
                                 canonical_dumps(drifted))
    outcome = repair_spec("change one to two products", erroneous, "EC5", provider,
                          mode="regenerate", dataset_context=CTX)
    assert any(f.category == "EC10" for f in outcome.findings)


def test_repairing_correct_spec_is_fixed_point():
    spec = parse_spec(json.dumps(bank_point_sensitivity_tree()))
    provider = repair_transcript("q", spec, "EC5", serialize_spec(spec))
    outcome = repair_spec("q", spec, "EC5", provider, mode="regenerate",
                          dataset_context=CTX)
    assert outcome.findings == []
    assert serialize_spec(outcome.spec) == serialize_spec(spec)


def test_no_credentials_in_prompts(monkeypatch, bank_point_spec_tree):
    secret = "sk-super-secret-key"
    monkeypatch.setenv("WHATIF_LLM_API_KEY", secret)
    spec = parse_spec(spec_text(bank_point_spec_tree))
    prompts = [
        build_classification_prompt("q", CTX, shuffled_type_order("q", 0)),
        build_generation_prompt("q", "importance", CTX),
        build_detection_prompt("q", spec, CTX),
        build_repair_prompt(repair_context_for("EC5", CTX), spec, "q"),
    ]
    for prompt in prompts:
        assert secret not in prompt
