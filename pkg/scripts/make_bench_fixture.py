#!/usr/bin/env python3
"""Build the recorded-scale benchmark fixture and its mock transcript.

Constructs 1215 cases (405 synthetic questions, each asked of three
simulated generators) over the bundled datasets, with ground-truth
specs per case. The transcript is keyed by prompt digest and encodes
a fixed counting profile: 637 of 1215 generations correct before
intervention, 578 erroneous; targeted repair then fixes 340, leaving
238 erroneous (52.42% -> 80.42% correct).

Usage: python3 scripts/make_bench_fixture.py [outdir] [datasets_dir]
"""

from __future__ import annotations

import copy
import json
import sys
from pathlib import Path

from whatif.bridge import (
    build_classification_prompt,
    build_generation_prompt,
    build_repair_prompt,
    prompt_digest,
    repair_context_for,
    shuffled_type_order,
)
from whatif.data import dataset_context, load_dataset
from whatif.jsontree import canonical_dumps
from whatif.spec import parse_spec_strict
from whatif.validation import validate_structure

REPO = Path(__file__).resolve().parents[1]

MODELS = ("gen-a", "gen-b", "gen-c")
N_QUESTIONS = 405
TYPES = ("pointSensitivity", "scopedPointSensitivity", "rangeSensitivity",
         "scopedRangeSensitivity", "goalSeek", "scopedGoalSeek",
         "constrainedGoalSeek", "scopedConstrainedGoalSeek", "counterfactual",
         "importance", "scopedImportance")

# how many erroneous generations carry each defect, and how many of those
# the targeted repair fixes
ERROR_PLAN = {
    "EC1": (10, 0),
    "EC2": (12, 10),
    "EC3": (18, 12),
    "EC4": (18, 12),
    "EC5": (120, 75),
    "EC6": (100, 60),
    "EC7": (80, 50),
    "EC8": (110, 65),
    "EC9": (110, 56),
}

SCOPED = {"scopedPointSensitivity", "scopedRangeSensitivity", "scopedGoalSeek",
          "scopedConstrainedGoalSeek", "scopedImportance"}
GOALSEEK = {"goalSeek", "scopedGoalSeek", "constrainedGoalSeek",
            "scopedConstrainedGoalSeek"}
EC9_OK = {"rangeSensitivity", "scopedRangeSensitivity", "importance",
          "scopedImportance", "counterfactual"}

PAIR = {"pointSensitivity": "scopedPointSensitivity",
        "scopedPointSensitivity": "pointSensitivity",
        "rangeSensitivity": "scopedRangeSensitivity",
        "scopedRangeSensitivity": "rangeSensitivity",
        "goalSeek": "scopedGoalSeek",
        "scopedGoalSeek": "goalSeek",
        "constrainedGoalSeek": "scopedConstrainedGoalSeek",
        "scopedConstrainedGoalSeek": "constrainedGoalSeek",
        "importance": "scopedImportance",
        "scopedImportance": "importance"}


def compatible(category: str, wia_type: str) -> bool:
    if category == "EC5":
        # flipping to the scoped sibling keeps the document compilable
        return wia_type not in SCOPED and wia_type != "counterfactual"
    if category == "EC7":
        return wia_type in GOALSEEK
    if category == "EC8":
        return wia_type in SCOPED
    if category == "EC9":
        return wia_type in EC9_OK
    return True


def ground_truth(wia_type: str, i: int) -> tuple[str, dict]:
    """A question and its specification, varied by index."""
    classifier = [{"id": "model_1", "type": "randomForestClassifier", "seed": 0}]
    regressor = [{"id": "model_1", "type": "randomForestRegressor", "seed": 0}]
    delta = 5 + (i % 9)
    pct = 10 + (i % 5) * 10
    scope = {"Geography": {"operator": "==",
                           "value": ["France", "Germany", "Spain"][i % 3]}}
    if wia_type == "pointSensitivity":
        q = f"What happens to churn if complaints rise by {delta}%?"
        spec = {"dataset": "bank_attrition", "outputVariable": ["Exited"],
                "objective": {"goal": "minimize"}, "model": classifier,
                "experiments": [{"experimentType": wia_type, "model": "model_1",
                                 "perturb": [{"variable": "Complain",
                                              "op": "changeBy", "unit": "percent",
                                              "value": delta,
                                              "filter": {"NumOfProducts": {
                                                  "operator": "==", "value": 1}}}]}]}
    elif wia_type == "scopedPointSensitivity":
        q = f"For {scope['Geography']['value']} customers, what happens to churn if balances grow {pct}%?"
        spec = {"dataset": "bank_attrition", "outputVariable": ["Exited"],
                "objective": {"goal": "minimize"}, "model": classifier,
                "scope": scope,
                "experiments": [{"experimentType": wia_type, "model": "model_1",
                                 "scope": "scope",
                                 "perturb": [{"variable": "Balance",
                                              "op": "changeBy", "unit": "percent",
                                              "value": pct}]}]}
    elif wia_type == "rangeSensitivity":
        lo, hi = 20 + (i % 4), 80 - (i % 6)
        q = f"How does churn vary as age runs from {lo} to {hi}?"
        spec = {"dataset": "bank_attrition", "outputVariable": ["Exited"],
                "objective": {"goal": "minimize"}, "model": classifier,
                "experiments": [{"experimentType": wia_type, "model": "model_1",
                                 "range": {"variable": "Age", "lowerBound": lo,
                                           "upperBound": hi, "stepSize": 5}}]}
    elif wia_type == "scopedRangeSensitivity":
        q = f"For {scope['Geography']['value']} customers, how does churn move as complaints run 0 to {delta}?"
        spec = {"dataset": "bank_attrition", "outputVariable": ["Exited"],
                "objective": {"goal": "minimize"}, "model": classifier,
                "scope": scope,
                "experiments": [{"experimentType": wia_type, "model": "model_1",
                                 "scope": "scope",
                                 "range": {"variable": "Complain", "lowerBound": 0,
                                           "upperBound": delta, "stepSize": 1}}]}
    elif wia_type in GOALSEEK:
        target = 4000 + (i % 20) * 100
        cap = 12000 + (i % 8) * 1000
        exp = {"experimentType": wia_type, "model": "model_1",
               "kind": {"target": "Sales", "value": target, "direction": "reach"},
               "searchVariables": ["Affiliate_Impressions", "Google_Impressions"]}
        spec = {"dataset": "media_spend", "outputVariable": ["Sales"],
                "objective": {"goal": "setTarget", "targetValue": target},
                "model": regressor, "experiments": [exp]}
        q = f"What impressions reach sales of {target}?"
        if "scoped" in wia_type.lower() or wia_type in SCOPED:
            spec["scope"] = {"Calendar_Week": {"operator": "<=", "value": 26}}
            exp["scope"] = "scope"
            q = f"In the first half of the year, what impressions reach sales of {target}?"
        if "onstrained" in wia_type:
            exp["constraints"] = [{"variable": "Affiliate_Impressions",
                                   "operator": "<=", "value": cap}]
            q += f" Keep affiliate impressions at most {cap}."
    elif wia_type == "counterfactual":
        q = f"What would have to change for email {i % 50} to be opened?"
        spec = {"dataset": "email_campaign", "outputVariable": ["Email_Status"],
                "objective": {"goal": "maximize"}, "model": classifier,
                "experiments": [{"experimentType": wia_type, "model": "model_1",
                                 "anchorRow": i % 50, "desiredOutcome": 1,
                                 "closestToFeature": "Word_Count"}]}
    elif wia_type == "importance":
        k = 1 + (i % 5)
        q = f"Which {k} features drive email opens the most?"
        spec = {"dataset": "email_campaign", "outputVariable": ["Email_Status"],
                "objective": {"goal": "maximize"}, "model": classifier,
                "experiments": [{"experimentType": wia_type, "model": "model_1",
                                 "top": k}]}
    else:  # scopedImportance
        k = 2 + (i % 4)
        q = f"Within transactional emails, which {k} features matter most?"
        spec = {"dataset": "email_campaign", "outputVariable": ["Email_Status"],
                "objective": {"goal": "maximize"}, "model": classifier,
                "scope": {"Email_Type": {"operator": "==", "value": "Transactional"}},
                "experiments": [{"experimentType": wia_type, "model": "model_1",
                                 "scope": "scope", "top": k}]}
    return q, spec


def mutate(tree: dict, category: str, wia_type: str) -> dict | str:
    """Inject one category-typical defect; strings are raw documents."""
    bad = copy.deepcopy(tree)
    exp = bad["experiments"][0]
    if category == "EC1":
        return canonical_dumps(tree).rstrip() + ",}"
    if category == "EC2":
        bad["relativeTo"] = "baseline"
    elif category == "EC3":
        del bad["outputVariable"]
    elif category == "EC4":
        bad["objective"] = {"goal": "setTarget"}
    elif category == "EC5":
        exp["experimentType"] = PAIR[wia_type]
    elif category == "EC6":
        bad["outputVariable"] = ["Tenure"] if bad["dataset"] == "bank_attrition" \
            else ["Overall_Views"] if bad["dataset"] == "media_spend" \
            else ["Total_Links"]
    elif category == "EC7":
        if "constraints" in exp:
            exp["experimentType"] = {"constrainedGoalSeek": "goalSeek",
                                     "scopedConstrainedGoalSeek":
                                     "scopedGoalSeek"}[wia_type]
            del exp["constraints"]
        else:
            exp["kind"] = dict(exp["kind"], value=exp["kind"]["value"] + 500)
    elif category == "EC8":
        del exp["scope"]  # scope defined but never referenced
    elif category == "EC9":
        if "top" in exp:
            exp["top"] = -exp["top"]
        elif "range" in exp:
            del exp["range"]["stepSize"]
        else:
            exp["desiredOutcome"] = 0
    return bad


def ec10_variant(tree: dict) -> dict:
    """A failed repair that swapped the filter construct for a scope."""
    bad = copy.deepcopy(tree)
    exp = bad["experiments"][0]
    flt = exp["perturb"][0].pop("filter")
    bad["scope"] = flt
    exp["experimentType"] = "scopedPointSensitivity"
    exp["scope"] = "scope"
    return bad


def build(outdir: Path, datasets_dir: Path) -> tuple[Path, Path]:
    outdir.mkdir(parents=True, exist_ok=True)
    contexts = {name: dataset_context(load_dataset(datasets_dir / f"{name}.csv"))
                for name in ("bank_attrition", "email_campaign", "media_spend")}

    cases = []
    for qi in range(N_QUESTIONS):
        wia_type = TYPES[qi % len(TYPES)]
        for model in MODELS:
            question, spec = ground_truth(wia_type, qi)
            question = f"[{model}/q{qi:04d}] {question}"
            assert validate_structure(canonical_dumps(spec)) == [], (wia_type, qi)
            cases.append({"id": f"{model}-q{qi:04d}", "question": question,
                          "wiaType": wia_type, "dataset": spec["dataset"],
                          "groundTruthSpec": spec})

    # deterministic label assignment honoring category/type compatibility
    remaining = {c: n for c, (n, _) in ERROR_PLAN.items()}
    to_fix = {c: k for c, (_, k) in ERROR_PLAN.items()}
    labels: list[str | None] = []
    for case in cases:
        chosen = None
        for category in sorted(remaining, key=lambda c: -remaining[c]):
            if remaining[category] > 0 and compatible(category, case["wiaType"]):
                chosen = category
                remaining[category] -= 1
                break
        labels.append(chosen)
    assert all(v == 0 for v in remaining.values()), remaining
    correct_n = sum(1 for l in labels if l is None)
    assert correct_n == N_QUESTIONS * len(MODELS) - sum(
        n for n, _ in ERROR_PLAN.values())

    transcript: dict[str, str] = {}
    fixture_lines = []
    for case, label in zip(cases, labels):
        ctx = contexts[case["dataset"]]
        question = case["question"]
        for i in range(3):
            order = shuffled_type_order(question, i, 0)
            p = build_classification_prompt(question, ctx, order)
            transcript[prompt_digest(p)] = case["wiaType"]
        gen_prompt = build_generation_prompt(question, case["wiaType"], ctx)
        gt_text = canonical_dumps(case["groundTruthSpec"])
        if label is None:
            transcript[prompt_digest(gen_prompt)] = gt_text
        else:
            mutated = mutate(case["groundTruthSpec"], label, case["wiaType"])
            bad_text = mutated if isinstance(mutated, str) \
                else canonical_dumps(mutated)
            transcript[prompt_digest(gen_prompt)] = bad_text
            case["repairCategory"] = label
            if label != "EC1":
                erroneous = parse_spec_strict(bad_text)
                repair_prompt = build_repair_prompt(
                    repair_context_for(label, ctx), erroneous, question)
                if to_fix[label] > 0:
                    to_fix[label] -= 1
                    transcript[prompt_digest(repair_prompt)] = gt_text
                else:
                    # failed repair: either cross-property drift or no change
                    if case["wiaType"] == "pointSensitivity":
                        response = canonical_dumps(
                            ec10_variant(case["groundTruthSpec"]))
                    else:
                        response = bad_text
                    transcript[prompt_digest(repair_prompt)] = response
        fixture_lines.append(json.dumps(case, sort_keys=True))
    assert all(v == 0 for v in to_fix.values()), to_fix

    fixture_path = outdir / "bench_cases.jsonl"
    fixture_path.write_text("\n".join(fixture_lines) + "\n", "utf-8")
    transcript_path = outdir / "bench_transcript.jsonl"
    with transcript_path.open("w", encoding="utf-8") as fh:
        for digest in sorted(transcript):
            fh.write(json.dumps({"promptDigest": digest,
                                 "response": transcript[digest]}) + "\n")
    print(f"wrote {fixture_path} ({len(cases)} cases)")
    print(f"wrote {transcript_path} ({len(transcript)} responses)")
    return fixture_path, transcript_path


def main() -> None:
    outdir = Path(sys.argv[1]) if len(sys.argv) > 1 else REPO / "fixtures" / "bench"
    datasets_dir = Path(sys.argv[2]) if len(sys.argv) > 2 else REPO / "datasets"
    build(outdir, datasets_dir)


if __name__ == "__main__":
    main()
