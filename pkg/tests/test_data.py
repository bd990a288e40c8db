import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from whatif.data import (
    DatasetError,
    PerturbError,
    ScopeError,
    apply_perturbations,
    evaluate_scope,
    load_dataset,
    resolve_scope_function,
)
from whatif.spec import Perturb, Predicate


def pred(**kw):
    return Predicate.from_tree(kw)


def perturb(**kw):
    return Perturb.from_tree(kw)


def test_bank_column_kinds(bank):
    assert bank.meta["Exited"].kind == "binary"
    assert bank.meta["EstimatedSalary"].kind == "continuous"
    assert bank.meta["NumOfProducts"].kind == "categorical"
    assert bank.meta["CustomerId"].role == "identifier"
    assert bank.meta["Exited"].role == "output"


def test_one_row_file_degenerate_bounds(tmp_path):
    f = tmp_path / "tiny.csv"
    f.write_text("a,b\n1.5,hello\n")
    ds = load_dataset(f)
    assert ds.meta["a"].min == ds.meta["a"].max == 1.5
    assert ds.meta["b"].kind == "categorical"


def test_categorical_hint_overrides_inference(tmp_path):
    f = tmp_path / "hinted.csv"
    rows = "\n".join(str(i % 12) for i in range(40))
    f.write_text("code\n" + rows + "\n")
    plain = load_dataset(f)
    assert plain.meta["code"].kind == "continuous"  # 12 distinct ints
    hinted = load_dataset(f, encoding_hints={"code": {"kind": "categorical"}})
    assert hinted.meta["code"].kind == "categorical"
    assert len(hinted.meta["code"].categories) == 12


def test_ragged_row_reports_line(tmp_path):
    f = tmp_path / "ragged.csv"
    f.write_text("a,b\n1,2\n3\n")
    with pytest.raises(DatasetError, match="line 3"):
        load_dataset(f)


def test_empty_file_rejected(tmp_path):
    f = tmp_path / "empty.csv"
    f.write_text("")
    with pytest.raises(DatasetError):
        load_dataset(f)


def test_missing_values_drop_rows(tmp_path, caplog):
    f = tmp_path / "gappy.csv"
    f.write_text("a,b\n1,2\n,3\n4,5\n")
    ds = load_dataset(f)
    assert ds.n_rows == 2


# --- scope -------------------------------------------------------------------


def test_empty_scope_selects_all_rows(bank):
    assert len(evaluate_scope(bank, {})) == bank.n_rows
    assert len(evaluate_scope(bank, None)) == bank.n_rows


def test_encoded_label_matches_codes(email):
    rows = evaluate_scope(email, {"Email_Type": pred(operator="==",
                                                     value="Transactional")})
    codes = email.column("Email_Type")[rows]
    assert len(rows) > 0
    assert np.all(codes == 1)
    by_code = evaluate_scope(email, {"Email_Type": pred(operator="==", value=1)})
    assert np.array_equal(rows, by_code)


def test_quartile3_scope_matches_sort_oracle(bank):
    rows = evaluate_scope(bank, {"EstimatedSalary": pred(operator=">=",
                                                         function="quartile3")})
    values = sorted(bank.column("EstimatedSalary"))
    threshold = values[math.ceil(0.75 * len(values)) - 1]
    expected = {i for i, v in enumerate(bank.column("EstimatedSalary"))
                if v >= threshold}
    assert set(rows.tolist()) == expected


def test_scope_conjunction_never_grows(bank):
    one = evaluate_scope(bank, {"Geography": pred(operator="==", value="France")})
    two = evaluate_scope(bank, {"Geography": pred(operator="==", value="France"),
                                "Exited": pred(operator="==", value=1)})
    assert set(two.tolist()) <= set(one.tolist())


def test_in_operator(bank):
    rows = evaluate_scope(bank, {"Geography": pred(operator="in",
                                                   value=["France", "Spain"])})
    assert 0 < len(rows) < bank.n_rows


def test_scope_errors(bank):
    with pytest.raises(ScopeError):
        evaluate_scope(bank, {"Nope": pred(operator="==", value=1)})
    with pytest.raises(ScopeError):
        evaluate_scope(bank, {"Geography": pred(operator="<", value="France")})
    with pytest.raises(ScopeError):
        resolve_scope_function(bank, "Geography", "quartile3")


def test_quartile_nearest_rank():
    import csv
    import tempfile
    from pathlib import Path

    with tempfile.TemporaryDirectory() as d:
        f = Path(d) / "q.csv"
        with f.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x"])
            for v in [10, 20, 30, 40]:
                w.writerow([v + 0.5])
        ds = load_dataset(f)
        # ceil(0.75 * 4) = 3rd of the sorted values
        assert resolve_scope_function(ds, "x", "quartile3") == 30.5
        assert resolve_scope_function(ds, "x", "mean") == pytest.approx(25.5)
        assert resolve_scope_function(ds, "x", "max") == ds.meta["x"].max


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=60),
       st.sampled_from(["quartile1", "quartile2", "quartile3"]))
def test_nearest_rank_quartiles_match_oracle(values, fn):
    import csv
    import tempfile
    from pathlib import Path

    q = {"quartile1": 0.25, "quartile2": 0.5, "quartile3": 0.75}[fn]
    with tempfile.TemporaryDirectory() as d:
        f = Path(d) / "q.csv"
        with f.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x"])
            for v in values:
                w.writerow([repr(v)])
        ds = load_dataset(f, encoding_hints={"x": {"kind": "continuous"}})
        got = resolve_scope_function(ds, "x", fn)
    expected = sorted(values)[max(math.ceil(q * len(values)), 1) - 1]
    assert got == expected


# --- perturbations ----------------------------------------------------------


def test_percent_change(media):
    rows = media.all_rows()
    base = media.column("Organic_Views").copy()
    view = apply_perturbations(media, rows, [perturb(
        variable="Organic_Views", op="changeBy", unit="percent", value=15)])
    assert np.allclose(view.column("Organic_Views"), base * 1.15)


def test_change_by_vs_set_to_distinction(email):
    rows = email.all_rows()
    base = email.column("Subject_Hotness_Score")
    changed = apply_perturbations(email, rows, [perturb(
        variable="Subject_Hotness_Score", op="changeBy", unit="absolute", value=0.5)])
    assert np.allclose(changed.column("Subject_Hotness_Score"), base + 0.5)
    pinned = apply_perturbations(email, rows, [perturb(
        variable="Subject_Hotness_Score", op="setTo", unit="absolute", value=0.5)])
    assert np.all(pinned.column("Subject_Hotness_Score") == 0.5)


def test_filter_keeps_row_count(bank):
    rows = bank.all_rows()
    view = apply_perturbations(bank, rows, [perturb(
        variable="NumOfProducts", op="setTo", unit="absolute", value=2,
        filter={"NumOfProducts": {"operator": "==", "value": 1}})])
    assert view.n_rows == bank.n_rows  # filters modify, scopes drop
    before = bank.column("NumOfProducts")
    after = view.column("NumOfProducts")
    assert np.all(after[before == 1] == 2)
    assert np.array_equal(after[before != 1], before[before != 1])


def test_zero_change_is_identity(media):
    rows = media.all_rows()
    for unit in ("absolute", "percent"):
        view = apply_perturbations(media, rows, [perturb(
            variable="Sales", op="changeBy", unit=unit, value=0)])
        assert np.array_equal(view.column("Sales"), media.column("Sales"))


def test_dataset_never_mutated(bank):
    checksum = bank.checksum()
    apply_perturbations(bank, bank.all_rows(), [
        perturb(variable="Complain", op="changeBy", unit="percent", value=-50),
        perturb(variable="NumOfProducts", op="setTo", unit="absolute", value=2),
    ])
    assert bank.checksum() == checksum


def test_perturb_errors(bank):
    rows = bank.all_rows()
    with pytest.raises(PerturbError):
        apply_perturbations(bank, rows, [perturb(
            variable="Geography", op="setTo", unit="absolute", value="Mars")])
    with pytest.raises(PerturbError):
        apply_perturbations(bank, rows, [perturb(
            variable="Geography", op="changeBy", unit="percent", value=10)])
