"""Benchmark harness: classify, generate, audit, repair, re-audit.

Cases come from a JSON-lines fixture of (question, analysis type,
dataset, ground-truth spec); providers are pluggable, so a recorded
mock transcript reproduces a whole run deterministically. Correctness
counting is exact: a generated spec is correct iff it compiles and has
no property-level difference from its ground truth.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .bridge import classify_wia_type, generate_spec, repair_spec
from .data import dataset_context, load_dataset
from .errors import CATEGORIES, blocking
from .jsontree import canonical_dumps
from .spec import Spec, parse_spec, parse_spec_strict, serialize_spec
from .validation import categorize_errors, diff_specs


class BenchmarkError(Exception):
    pass


@dataclass
class BenchmarkCase:
    id: str
    question: str
    wia_type: str
    dataset: str
    ground_truth: Spec
    repair_category: str | None = None

    @classmethod
    def from_tree(cls, tree: dict) -> "BenchmarkCase":
        gt = parse_spec(canonical_dumps(tree["groundTruthSpec"]))
        if not isinstance(gt, Spec):
            raise BenchmarkError(f"case {tree.get('id')!r}: ground truth does "
                                 "not parse")
        return cls(id=str(tree["id"]), question=tree["question"],
                   wia_type=tree["wiaType"], dataset=tree["dataset"],
                   ground_truth=gt,
                   repair_category=tree.get("repairCategory"))


def load_cases(path: str | Path) -> list[BenchmarkCase]:
    cases = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                cases.append(BenchmarkCase.from_tree(json.loads(line)))
    return cases


@dataclass
class BenchmarkReport:
    per_case: list[dict]
    aggregates: dict

    def to_tree(self) -> dict:
        return {"version": "benchreport.v1", "aggregates": self.aggregates,
                "perCase": self.per_case}

    def serialize(self) -> str:
        return canonical_dumps(self.to_tree())


def _audit(raw_or_spec, ground_truth: Spec) -> tuple[list, bool]:
    """Findings for a generated document against its ground truth."""
    if isinstance(raw_or_spec, Spec):
        text = serialize_spec(raw_or_spec)
    else:
        text = raw_or_spec
    from .validation import validate_structure

    findings = validate_structure(text)
    if blocking(findings):
        return findings, False
    spec = parse_spec_strict(text)
    diffs = diff_specs(spec, ground_truth)
    findings = findings + categorize_errors(diffs, spec, ground_truth)
    return findings, not findings


def _per_category(case_findings: list[list]) -> dict[str, int]:
    counts = {c: 0 for c in CATEGORIES}
    for findings in case_findings:
        for category in {f.category for f in findings}:
            if category in counts:
                counts[category] += 1
    return counts


def detection_confusion(cases: list[dict], provider,
                        context_for=None) -> dict:
    """Binary-detection harness over labeled cases.

    Each case is ``{question, spec (tree), label (bool), dataset?}``;
    the label is the human reference. Returns the confusion counts plus
    accuracy, reproducing whatever the transcript recorded.
    """
    from .bridge import detect_error_binary

    counts = {"TP": 0, "TN": 0, "FP": 0, "FN": 0}
    for case in cases:
        spec = parse_spec(canonical_dumps(case["spec"]))
        if not isinstance(spec, Spec):
            raise BenchmarkError("detection cases must parse")
        ctx = context_for(case.get("dataset")) if context_for else \
            case.get("datasetContext", "")
        flagged = detect_error_binary(case["question"], spec, provider,
                                      dataset_context=ctx)["flagged"]
        label = bool(case["label"])
        key = ("TP" if label else "FP") if flagged else ("FN" if label else "TN")
        counts[key] += 1
    total = sum(counts.values())
    counts["accuracy"] = round(100.0 * (counts["TP"] + counts["TN"]) / total, 4) \
        if total else 0.0
    return counts


def run_benchmark(fixture_file: str | Path, provider, repair_mode: str = "none",
                  datasets_dir: str | Path | None = None,
                  classify: bool = True) -> BenchmarkReport:
    """Run every case through the two-step pipeline and count outcomes.

    ``repair_mode`` is ``none``, ``regenerate``, or ``slotFill``; repair
    uses the fixture-supplied category when present (standing in for
    the human in the loop) and the first audited category otherwise.
    Provider failures are recorded per case and never abort the run.
    """
    cases = load_cases(fixture_file)
    datasets_dir = Path(datasets_dir) if datasets_dir else \
        Path(fixture_file).resolve().parent
    contexts: dict[str, str] = {}

    def context_for(name: str) -> str:
        if name not in contexts:
            csv_path = datasets_dir / f"{name}.csv"
            if csv_path.exists():
                contexts[name] = dataset_context(load_dataset(csv_path))
            else:
                contexts[name] = f"dataset {name}"
        return contexts[name]

    per_case = []
    before_findings: list[list] = []
    after_findings: list[list] = []
    correct_before = 0
    correct_after = 0
    for case in cases:
        ctx = context_for(case.dataset)
        entry: dict = {"id": case.id, "wiaType": case.wia_type}
        try:
            voted = classify_wia_type(case.question, ctx, provider) if classify \
                else case.wia_type
            entry["votedType"] = voted
            outcome = generate_spec(case.question, voted, ctx, provider)
            entry["generated"] = outcome.raw
            findings, ok = _audit(outcome.raw, case.ground_truth)
        except Exception as exc:  # provider failures never abort the run
            entry["error"] = str(exc)
            findings, ok = [], False
            outcome = None
        entry["findings"] = [f.to_tree() for f in findings]
        entry["correctBefore"] = ok
        before_findings.append(findings)
        correct_before += ok

        final_findings, final_ok = findings, ok
        if not ok and repair_mode != "none" and outcome is not None \
                and outcome.spec is not None:
            category = case.repair_category or next(
                (f.category for f in findings), None)
            if category is not None:
                try:
                    repaired = repair_spec(case.question, outcome.spec, category,
                                           provider, mode=repair_mode,
                                           dataset_context=ctx)
                    entry["repairCategory"] = category
                    if repaired.spec is not None:
                        final_findings, final_ok = _audit(repaired.spec,
                                                          case.ground_truth)
                        entry["repaired"] = serialize_spec(repaired.spec)
                    else:
                        final_findings, final_ok = repaired.findings, False
                except Exception as exc:
                    entry["repairError"] = str(exc)
        entry["postRepairFindings"] = [f.to_tree() for f in final_findings]
        entry["correctAfter"] = final_ok
        after_findings.append(final_findings)
        correct_after += final_ok
        per_case.append(entry)

    total = len(cases)
    before_counts = _per_category(before_findings)
    after_counts = _per_category(after_findings)
    per_ec = {}
    for category in CATEGORIES:
        b, a = before_counts[category], after_counts[category]
        direction = "S" if a == b else ("D" if a < b else "I")
        per_ec[category] = {"before": b, "after": a, "direction": direction,
                            "new": b == 0 and a > 0}
    aggregates = {
        "totalCases": total,
        "correctBefore": correct_before,
        "correctAfter": correct_after,
        "correctBeforePct": round(100.0 * correct_before / total, 4) if total else 0.0,
        "correctAfterPct": round(100.0 * correct_after / total, 4) if total else 0.0,
        "perCategory": per_ec,
        "repairMode": repair_mode,
    }
    return BenchmarkReport(per_case=per_case, aggregates=aggregates)
