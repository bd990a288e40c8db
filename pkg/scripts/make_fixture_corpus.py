#!/usr/bin/env python3
"""Write the checked-in fixture corpus.

- fixtures/error_corpus/: 40 defective documents (4 per error category)
  with a manifest naming the intended category, the dataset, and the
  reference spec for the diff-audited ones.
- fixtures/propagation_pairs/: six erroneous/corrected pairs (EC5-EC10)
  that all compile but render structurally different interfaces.
- fixtures/specs/: a handful of valid documents used across tests, the
  CLI examples, and the interface goldens.

Usage: python3 scripts/make_fixture_corpus.py
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

from whatif.jsontree import canonical_dumps

REPO = Path(__file__).resolve().parents[1]
FIXTURES = REPO / "fixtures"


def classifier(seed=0):
    return [{"id": "model_1", "type": "randomForestClassifier", "seed": seed}]


def regressor(seed=0):
    return [{"id": "model_1", "type": "randomForestRegressor", "seed": seed}]


def bank_point():
    return {
        "dataset": "bank_attrition", "outputVariable": ["Exited"],
        "objective": {"goal": "minimize"}, "model": classifier(),
        "experiments": [{
            "experimentType": "pointSensitivity", "model": "model_1",
            "perturb": [
                {"variable": "NumOfProducts", "op": "setTo", "unit": "absolute",
                 "value": 2,
                 "filter": {"NumOfProducts": {"operator": "==", "value": 1}}},
                {"variable": "Complain", "op": "changeBy", "unit": "percent",
                 "value": -50}]}]}


def media_goal_seek(constrained=True):
    exp = {"experimentType": "constrainedGoalSeek" if constrained else "goalSeek",
           "model": "model_1",
           "kind": {"target": "Sales", "value": 6000, "direction": "reach"},
           "searchVariables": ["Affiliate_Impressions", "Google_Impressions"]}
    if constrained:
        exp["constraints"] = [{"variable": "Affiliate_Impressions",
                               "operator": "<=", "value": 15000}]
    return {"dataset": "media_spend", "outputVariable": ["Sales"],
            "objective": {"goal": "setTarget", "targetValue": 6000},
            "model": regressor(), "experiments": [exp]}


def email_hotness(op="changeBy"):
    return {"dataset": "email_campaign", "outputVariable": ["Email_Status"],
            "objective": {"goal": "maximize"}, "model": classifier(),
            "experiments": [{
                "experimentType": "pointSensitivity", "model": "model_1",
                "perturb": [{"variable": "Subject_Hotness_Score", "op": op,
                             "unit": "absolute", "value": 0.5}]}]}


def email_scoped():
    return {"dataset": "email_campaign", "outputVariable": ["Email_Status"],
            "objective": {"goal": "maximize"}, "model": classifier(),
            "scope": {"Email_Type": {"operator": "==", "value": "Transactional"}},
            "experiments": [{
                "experimentType": "scopedPointSensitivity", "model": "model_1",
                "scope": "scope",
                "perturb": [{"variable": "Subject_Hotness_Score",
                             "op": "changeBy", "unit": "absolute",
                             "value": 0.1}]}]}


def bank_range():
    return {"dataset": "bank_attrition", "outputVariable": ["Exited"],
            "objective": {"goal": "minimize"}, "model": classifier(),
            "experiments": [{"experimentType": "rangeSensitivity",
                             "model": "model_1",
                             "range": {"variable": "Age", "lowerBound": 20,
                                       "upperBound": 80, "stepSize": 5}}]}


def email_importance(top=5):
    return {"dataset": "email_campaign", "outputVariable": ["Email_Status"],
            "objective": {"goal": "maximize"}, "model": classifier(),
            "experiments": [{"experimentType": "importance", "model": "model_1",
                             "top": top}]}


def media_two_outputs():
    return {"dataset": "media_spend",
            "outputVariable": ["Overall_Views", "Sales"],
            "objective": {"goal": "maximize"}, "model": regressor(),
            "experiments": [{
                "experimentType": "pointSensitivity", "model": "model_1",
                "perturb": [
                    {"variable": "Paid_Views", "op": "changeBy",
                     "unit": "absolute", "value": 200},
                    {"variable": "Organic_Views", "op": "changeBy",
                     "unit": "absolute", "value": -100}]}]}


def write(path: Path, content) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(content, str):
        path.write_text(content, "utf-8")
    else:
        path.write_text(canonical_dumps(content), "utf-8")


def make_error_corpus() -> None:
    root = FIXTURES / "error_corpus"
    entries = []

    def add(name, category, content, dataset=None, reference=None):
        write(root / name, content)
        entry = {"file": name, "category": category}
        if dataset:
            entry["dataset"] = dataset
        if reference is not None:
            ref_name = name.replace(".json", ".reference.json")
            write(root / ref_name, reference)
            entry["reference"] = ref_name
        entries.append(entry)

    # EC1: cannot be parsed at all / wrong container shapes
    add("ec1_empty.json", "EC1", "")
    add("ec1_dangling_comma.json", "EC1",
        '{"dataset": "bank_attrition", "outputVariable": ["Exited"],}')
    bad = bank_point()
    bad["experiments"][0]["perturb"] = bad["experiments"][0]["perturb"][0]
    add("ec1_single_perturb_object.json", "EC1", bad)
    bad = {"dataset": "bank_attrition", "outputVariable": ["Exited"],
           "model": classifier(),
           "experiments": [{"experimentType": "counterfactual",
                            "model": "model_1", "anchorRow": 3,
                            "desiredOutcome": 0}]}
    add("ec1_missing_closest_feature.json", "EC1", bad)

    # EC2: duplication and hallucinated keys
    add("ec2_duplicate_key.json", "EC2",
        '{"dataset": "bank_attrition", "dataset": "bank_attrition", '
        '"outputVariable": ["Exited"], "experiments": '
        '[{"experimentType": "importance", "top": 3}]}')
    bad = bank_point()
    bad["experiments"].append(copy.deepcopy(bad["experiments"][0]))
    add("ec2_duplicated_experiments.json", "EC2", bad)
    bad = bank_point()
    bad["experiments"][0]["perturb"][1]["relativeTo"] = "baseline"
    add("ec2_hallucinated_key.json", "EC2", bad)
    bad = bank_point()
    bad["model"] = classifier() + classifier(seed=1)
    add("ec2_duplicate_model_ids.json", "EC2", bad)

    # EC3: missing mandatory blocks
    bad = media_goal_seek(constrained=False)
    del bad["experiments"][0]["kind"]["target"]
    add("ec3_missing_kind_target.json", "EC3", bad)
    bad = bank_point()
    del bad["experiments"][0]["perturb"]
    add("ec3_missing_perturb.json", "EC3", bad)
    bad = bank_point()
    del bad["outputVariable"]
    add("ec3_missing_output_variable.json", "EC3", bad)
    bad = media_goal_seek(constrained=False)
    del bad["experiments"][0]["kind"]
    add("ec3_missing_kind.json", "EC3", bad)

    # EC4: schema violations
    bad = media_goal_seek(constrained=False)
    bad["experiments"][0]["kind"] = {"target": 6000, "value": "Sales",
                                     "direction": "reach"}
    add("ec4_swapped_target_value.json", "EC4", bad)
    bad = email_scoped()
    del bad["experiments"][0]["scope"]
    bad["experiments"][0]["perturb"][0]["scope"] = "scope"
    add("ec4_scope_in_perturb.json", "EC4", bad)
    bad = email_scoped()
    del bad["scope"]
    add("ec4_dangling_scope_ref.json", "EC4", bad)
    bad = bank_range()
    bad["experiments"][0]["range"].update(lowerBound=80, upperBound=20)
    add("ec4_reversed_range.json", "EC4", bad)

    # EC5: wrong operation semantics (audited against a reference)
    add("ec5_set_to_instead_of_change_by.json", "EC5", email_hotness("setTo"),
        dataset="email_campaign", reference=email_hotness("changeBy"))
    good = bank_point()
    bad = copy.deepcopy(good)
    bad["experiments"][0]["perturb"][1]["unit"] = "absolute"
    add("ec5_wrong_unit.json", "EC5", bad, dataset="bank_attrition",
        reference=good)
    good = bank_range()
    bad = copy.deepcopy(good)
    bad["experiments"][0]["experimentType"] = "scopedRangeSensitivity"
    add("ec5_type_flip.json", "EC5", bad, dataset="bank_attrition",
        reference=good)
    good = bank_point()
    bad = copy.deepcopy(good)
    del bad["experiments"][0]["perturb"][1]
    add("ec5_missing_perturbation.json", "EC5", bad, dataset="bank_attrition",
        reference=good)

    # EC6: wrong variables / models
    good = media_two_outputs()
    bad = copy.deepcopy(good)
    bad["outputVariable"] = ["Sales"]
    add("ec6_missing_output_variable.json", "EC6", bad, dataset="media_spend",
        reference=good)
    good = bank_point()
    bad = copy.deepcopy(good)
    bad["experiments"][0]["perturb"][1]["variable"] = "Balance"
    add("ec6_wrong_input_variable.json", "EC6", bad, dataset="bank_attrition",
        reference=good)
    bad = email_importance()
    bad["model"] = [{"id": "model_1", "type": "linearRegressor", "seed": 0}]
    add("ec6_model_type_mismatch.json", "EC6", bad, dataset="email_campaign")
    bad = bank_point()
    bad["experiments"][0]["perturb"][1]["variable"] = "Complaints_Total"
    add("ec6_unknown_column.json", "EC6", bad, dataset="bank_attrition")

    # EC7: objectives and constraints
    add("ec7_missing_constraint.json", "EC7", media_goal_seek(constrained=False),
        dataset="media_spend", reference=media_goal_seek(constrained=True))
    good = media_goal_seek(constrained=True)
    bad = copy.deepcopy(good)
    bad["experiments"][0]["constraints"][0]["operator"] = ">="
    add("ec7_reversed_inequality.json", "EC7", bad, dataset="media_spend",
        reference=good)
    bad = copy.deepcopy(good)
    bad["experiments"][0]["constraints"][0]["variable"] = "Google_Impressions"
    add("ec7_wrong_constraint_variable.json", "EC7", bad, dataset="media_spend",
        reference=good)
    good = email_importance()
    bad = copy.deepcopy(good)
    bad["objective"] = {"goal": "minimize"}
    add("ec7_objective_flip.json", "EC7", bad, dataset="email_campaign",
        reference=good)

    # EC8: scope faults
    bad = email_hotness()
    bad["scope"] = {"Email_Type": {"operator": "==", "value": "Transactional"}}
    add("ec8_scope_unreferenced.json", "EC8", bad, dataset="email_campaign")
    bad = email_scoped()
    bad["scope"]["Email_Type"]["value"] = 3
    add("ec8_wrong_encoding.json", "EC8", bad, dataset="email_campaign")
    bad = email_scoped()
    bad["scope"]["Email_Type"] = {"operator": "==",
                                  "value": "WHERE Email_Type = 'Transactional'"}
    add("ec8_sqlish_scope.json", "EC8", bad, dataset="email_campaign")
    good = email_scoped()
    bad = copy.deepcopy(good)
    bad["scope"]["Email_Type"]["value"] = "Promotional"
    add("ec8_scope_value_mismatch.json", "EC8", bad, dataset="email_campaign",
        reference=good)

    # EC9: misused or omitted properties
    good = bank_range()
    bad = copy.deepcopy(good)
    del bad["experiments"][0]["range"]["stepSize"]
    add("ec9_missing_step_size.json", "EC9", bad, dataset="bank_attrition",
        reference=good)
    bad = bank_range()
    bad["experiments"][0]["range"]["lowerBound"] = 5
    add("ec9_bound_out_of_range.json", "EC9", bad, dataset="bank_attrition")
    add("ec9_wrong_top_sign.json", "EC9", email_importance(-5),
        dataset="email_campaign", reference=email_importance(5))
    good = bank_range()
    bad = copy.deepcopy(good)
    del bad["experiments"][0]["range"]["lowerBound"]
    del bad["experiments"][0]["range"]["upperBound"]
    add("ec9_missing_bounds.json", "EC9", bad, dataset="bank_attrition",
        reference=good)

    # EC10: one construct swapped for another (all still compile)
    good = bank_point()
    bad = copy.deepcopy(good)
    flt = bad["experiments"][0]["perturb"][0].pop("filter")
    bad["scope"] = flt
    bad["experiments"][0]["experimentType"] = "scopedPointSensitivity"
    bad["experiments"][0]["scope"] = "scope"
    add("ec10_filter_to_scope.json", "EC10", bad, dataset="bank_attrition",
        reference=good)
    good = email_scoped()
    bad = copy.deepcopy(good)
    del bad["scope"]
    del bad["experiments"][0]["scope"]
    bad["experiments"][0]["experimentType"] = "pointSensitivity"
    bad["experiments"][0]["perturb"][0]["filter"] = {
        "Email_Type": {"operator": "==", "value": "Transactional"}}
    add("ec10_scope_to_filter.json", "EC10", bad, dataset="email_campaign",
        reference=good)
    good = media_goal_seek(constrained=False)
    good["experiments"][0]["setFixed"] = [{"variable": "Organic_Views",
                                           "value": 2000}]
    bad = copy.deepcopy(good)
    del bad["experiments"][0]["setFixed"]
    bad["experiments"][0]["experimentType"] = "constrainedGoalSeek"
    bad["experiments"][0]["constraints"] = [{"variable": "Organic_Views",
                                             "operator": "<=", "value": 2000}]
    add("ec10_set_fixed_to_constraints.json", "EC10", bad, dataset="media_spend",
        reference=good)
    good = email_importance()
    bad = copy.deepcopy(good)
    del bad["experiments"][0]["top"]
    bad["experiments"][0]["experimentType"] = "rangeSensitivity"
    bad["experiments"][0]["range"] = {"variable": "Word_Count", "lowerBound": 40,
                                      "upperBound": 1300, "stepSize": 100}
    add("ec10_top_to_range.json", "EC10", bad, dataset="email_campaign",
        reference=good)

    write(root / "manifest.json", entries)
    print(f"wrote {root} ({len(entries)} fixtures)")


def make_propagation_pairs() -> None:
    root = FIXTURES / "propagation_pairs"
    pairs = []

    def add(category, dataset, erroneous, corrected, difference):
        for role, content in (("erroneous", erroneous), ("corrected", corrected)):
            write(root / f"{category.lower()}_{role}.json", content)
        pairs.append({"category": category, "dataset": dataset,
                      "difference": difference})

    add("EC5", "email_campaign", email_hotness("setTo"), email_hotness("changeBy"),
        "sliderRange")
    err = media_two_outputs()
    err["outputVariable"] = ["Sales"]
    add("EC6", "media_spend", err, media_two_outputs(), "panelCount")
    add("EC7", "media_spend", media_goal_seek(constrained=False),
        media_goal_seek(constrained=True), "constraintControl")
    err = email_hotness()
    err["experiments"][0]["perturb"][0]["value"] = 0.1
    add("EC8", "email_campaign", err, email_scoped(), "scopeChip")
    add("EC9", "email_campaign", email_importance(-5), email_importance(5),
        "tornadoOrder")
    good = bank_point()
    del good["experiments"][0]["perturb"][1]
    err = copy.deepcopy(good)
    flt = err["experiments"][0]["perturb"][0].pop("filter")
    err["scope"] = flt
    err["experiments"][0]["experimentType"] = "scopedPointSensitivity"
    err["experiments"][0]["scope"] = "scope"
    add("EC10", "bank_attrition", err, good, "scopeChip")

    write(root / "manifest.json", pairs)
    print(f"wrote {root} ({len(pairs)} pairs)")


def make_spec_fixtures() -> None:
    root = FIXTURES / "specs"
    write(root / "bank_point_sensitivity.json", bank_point())
    write(root / "bank_age_range.json", bank_range())
    write(root / "media_constrained_goal_seek.json", media_goal_seek())
    write(root / "media_two_outputs.json", media_two_outputs())
    write(root / "email_scoped_sensitivity.json", email_scoped())
    write(root / "email_importance.json", email_importance())
    cf = {"dataset": "bank_attrition", "outputVariable": ["Exited"],
          "objective": {"goal": "minimize"}, "model": classifier(),
          "experiments": [{"experimentType": "counterfactual",
                           "model": "model_1", "anchorRow": 7,
                           "desiredOutcome": 0,
                           "closestToFeature": "Balance"}]}
    write(root / "bank_counterfactual.json", cf)
    # all six top-level properties in one session: drives the inspector
    inspector = bank_point()
    inspector["scope"] = {"Geography": {"operator": "==", "value": "France"}}
    inspector["experiments"][0]["experimentType"] = "scopedPointSensitivity"
    inspector["experiments"][0]["scope"] = "scope"
    inspector["experiments"].append({"experimentType": "scopedImportance",
                                     "model": "model_1", "scope": "scope",
                                     "top": -5})
    write(root / "bank_inspector_session.json", inspector)
    print(f"wrote {root}")


def main() -> None:
    make_error_corpus()
    make_propagation_pairs()
    make_spec_fixtures()


if __name__ == "__main__":
    main()
