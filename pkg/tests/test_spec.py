import json

import pytest
from hypothesis import given, settings, strategies as st

from whatif.jsontree import PathError
from whatif.spec import (
    Spec,
    SpecPatch,
    apply_patch,
    parse_spec,
    populate_defaults,
    serialize_spec,
)
from whatif.validation import validate_structure

from conftest import bank_point_sensitivity_tree, spec_text


def test_flagship_document_parses(bank_point_spec_tree):
    spec = parse_spec(spec_text(bank_point_spec_tree))
    assert isinstance(spec, Spec)
    assert spec.experiments[0].experiment_type == "pointSensitivity"
    assert spec.output_variables == ["Exited"]
    assert spec.models[0].type == "randomForestClassifier"
    assert len(spec.experiments[0].perturbs) == 2


def test_empty_input_is_a_complete_error():
    findings = parse_spec("")
    assert len(findings) == 1
    assert findings[0].category == "EC1"
    assert findings[0].code == "completeError"
    assert parse_spec("   \n")[0].code == "completeError"


def test_dangling_comma_is_malformed_tree():
    findings = parse_spec('{"dataset": "d",}')
    assert findings[0].category == "EC1"
    assert findings[0].code == "malformedTree"


def test_single_perturb_object_instead_of_array(bank_point_spec_tree):
    tree = bank_point_sensitivity_tree()
    tree["experiments"][0]["perturb"] = tree["experiments"][0]["perturb"][0]
    findings = parse_spec(spec_text(tree))
    assert isinstance(findings, list)
    assert any(f.category == "EC1" and f.path == "experiments[0].perturb"
               for f in findings)


def test_duplicate_keys_flagged_as_ec2():
    doc = '{"dataset": "d", "dataset": "e", "outputVariable": "y", "experiments": []}'
    findings = parse_spec(doc)
    assert isinstance(findings, list)
    assert findings[0].category == "EC2"
    assert findings[0].code == "duplicatedKey"


def test_multiple_shape_errors_all_reported():
    tree = {"dataset": "d", "outputVariable": 5, "objective": "min",
            "experiments": [{"experimentType": "pointSensitivity",
                             "perturb": {"variable": "x"}}]}
    findings = parse_spec(spec_text(tree))
    assert isinstance(findings, list)
    assert len(findings) >= 3  # outputVariable, objective, perturb


def test_serialize_contains_canonical_property_names(bank_point_spec_tree):
    spec = parse_spec(spec_text(bank_point_spec_tree))
    text = serialize_spec(spec)
    for name in ("dataset", "outputVariable", "objective", "model", "experiments"):
        assert f'"{name}"' in text


def test_round_trip_is_stable(bank_point_spec_tree):
    spec = parse_spec(spec_text(bank_point_spec_tree))
    text = serialize_spec(spec)
    again = parse_spec(text)
    assert serialize_spec(again) == text


def test_key_order_does_not_matter():
    a = parse_spec('{"outputVariable": "y", "dataset": "d", "experiments": '
                   '[{"experimentType": "importance", "top": 3}]}')
    b = parse_spec('{"dataset": "d", "experiments": '
                   '[{"experimentType": "importance", "top": 3}], '
                   '"outputVariable": "y"}')
    assert serialize_spec(a) == serialize_spec(b)


def test_unknown_keys_survive_round_trip():
    doc = json.dumps({"dataset": "d", "outputVariable": "y", "banana": 1,
                      "experiments": [{"experimentType": "importance", "top": 2,
                                       "relativeTo": "x"}]})
    spec = parse_spec(doc)
    text = serialize_spec(spec)
    assert '"banana"' in text
    assert '"relativeTo"' in text


# strategy for structurally valid documents, to exercise the round trip
_col = st.sampled_from(["Age", "Balance", "Complain", "EstimatedSalary"])
_perturb = st.builds(
    lambda v, op, value: {"variable": v, "op": op, "unit": "absolute", "value": value},
    _col, st.sampled_from(["setTo", "changeBy"]),
    st.floats(-100, 100, allow_nan=False))
_experiment = st.one_of(
    st.builds(lambda ps: {"experimentType": "pointSensitivity", "perturb": ps},
              st.lists(_perturb, min_size=1, max_size=3)),
    st.builds(lambda t: {"experimentType": "importance", "top": t},
              st.integers(-10, 10).filter(lambda t: t != 0)),
    st.builds(lambda v, lo, hi: {"experimentType": "rangeSensitivity",
                                 "range": {"variable": v, "lowerBound": lo,
                                           "upperBound": lo + hi,
                                           "stepSize": hi / 7}},
              _col, st.floats(-50, 50, allow_nan=False),
              st.floats(1, 50, allow_nan=False)),
)
_documents = st.builds(
    lambda out, exps: {"dataset": "bank_attrition", "outputVariable": out,
                       "experiments": exps},
    st.lists(st.sampled_from(["Exited", "Balance"]), min_size=1, max_size=2,
             unique=True),
    st.lists(_experiment, min_size=1, max_size=3),
)


@settings(max_examples=60)
@given(_documents)
def test_parse_serialize_round_trip_property(tree):
    spec = parse_spec(json.dumps(tree))
    assert isinstance(spec, Spec)
    text = serialize_spec(spec)
    again = parse_spec(text)
    assert isinstance(again, Spec)
    assert serialize_spec(again) == text


# --- defaults ---------------------------------------------------------------


def test_range_defaults_come_from_column_bounds(media):
    tree = {"dataset": "media_spend", "outputVariable": ["Sales"],
            "experiments": [{"experimentType": "rangeSensitivity",
                             "range": {"variable": "Affiliate_Impressions"}}]}
    spec = parse_spec(spec_text(tree))
    filled = populate_defaults(spec, media)
    rng = filled.experiments[0].range
    col = media.meta["Affiliate_Impressions"]
    assert rng.lower_bound == col.min
    assert rng.upper_bound == col.max
    assert rng.step_size == pytest.approx((col.max - col.min) / 10)


def test_defaults_never_overwrite(media):
    tree = {"dataset": "media_spend", "outputVariable": ["Sales"],
            "objective": {"goal": "maximize"},
            "model": [{"id": "m", "type": "randomForestRegressor", "seed": 7}],
            "experiments": [{"experimentType": "rangeSensitivity", "model": "m",
                             "range": {"variable": "Sales_lagged",
                                       "lowerBound": 1, "upperBound": 9,
                                       "stepSize": 2}}]}
    tree["experiments"][0]["range"]["variable"] = "Affiliate_Impressions"
    spec = parse_spec(spec_text(tree))
    filled = populate_defaults(spec, media)
    assert filled.experiments[0].range.lower_bound == 1
    assert filled.models[0].seed == 7
    assert filled.objective.goal == "maximize"


def test_defaults_idempotent(media):
    tree = {"dataset": "media_spend", "outputVariable": ["Sales"],
            "experiments": [{"experimentType": "importance"}]}
    spec = parse_spec(spec_text(tree))
    once = populate_defaults(spec, media)
    twice = populate_defaults(once, media)
    assert serialize_spec(once) == serialize_spec(twice)
    assert once.experiments[0].top == 5


def test_fully_specified_spec_is_untouched(bank, bank_point_spec_tree):
    tree = bank_point_sensitivity_tree()
    tree["experiments"][0]["perturb"][0]["unit"] = "absolute"
    spec = parse_spec(spec_text(tree))
    filled = populate_defaults(spec, bank)
    assert serialize_spec(filled) == serialize_spec(spec)


def test_missing_model_defaults_to_output_kind(bank):
    tree = {"dataset": "bank_attrition", "outputVariable": ["Exited"],
            "experiments": [{"experimentType": "importance", "top": 3}]}
    filled = populate_defaults(parse_spec(spec_text(tree)), bank)
    assert filled.models[0].type == "randomForestClassifier"
    assert filled.models[0].seed == 0
    assert filled.experiments[0].model_ref == filled.models[0].id


# --- patches ----------------------------------------------------------------


def test_patch_single_set(bank_point_spec_tree):
    spec = parse_spec(spec_text(bank_point_spec_tree))
    patch = SpecPatch.single("experiments[0].perturb[1].value", "set", -25)
    patched = apply_patch(spec, patch)
    assert isinstance(patched, Spec)
    assert patched.experiments[0].perturbs[1].value == -25
    # everything else identical
    assert serialize_spec(patched).replace("-25", "-50") == serialize_spec(spec)


def test_rejected_patch_leaves_spec_untouched():
    tree = {"dataset": "media_spend", "outputVariable": ["Sales"],
            "experiments": [{"experimentType": "goalSeek",
                             "kind": {"target": "Sales", "value": 6000},
                             "searchVariables": ["Affiliate_Impressions"]}]}
    spec = parse_spec(spec_text(tree))
    before = serialize_spec(spec)
    result = apply_patch(spec, SpecPatch.single("experiments[0].kind.target", "remove"))
    assert isinstance(result, list)
    assert any(f.category == "EC3" for f in result)
    assert serialize_spec(spec) == before


def test_patch_insert_second_experiment(bank_point_spec_tree):
    spec = parse_spec(spec_text(bank_point_spec_tree))
    new_exp = {"experimentType": "importance", "model": "model_1", "top": 3}
    patched = apply_patch(spec, SpecPatch.single("experiments[1]", "insert", new_exp))
    assert isinstance(patched, Spec)
    assert len(patched.experiments) == 2
    assert validate_structure(serialize_spec(patched)) == []


def test_patch_path_error_raises(bank_point_spec_tree):
    spec = parse_spec(spec_text(bank_point_spec_tree))
    with pytest.raises(PathError):
        apply_patch(spec, SpecPatch.single("experiments[9].top", "set", 1))
