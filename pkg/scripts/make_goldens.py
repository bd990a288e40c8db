#!/usr/bin/env python3
"""Regenerate the golden ifacedesc.v1 documents in fixtures/goldens/.

One golden per view type, compiled from the fixture specs over the
bundled datasets. Compilation is deterministic, so these bytes are the
contract the web client renders against.

Usage: python3 scripts/make_goldens.py
"""

from __future__ import annotations

import json
from pathlib import Path

from whatif.analysis import execute_spec
from whatif.compiler import compile_interface
from whatif.data import load_dataset
from whatif.models import ModelCache
from whatif.spec import parse_spec_strict, populate_defaults

REPO = Path(__file__).resolve().parents[1]

GOLDENS = {
    "barChart": "bank_point_sensitivity.json",
    "lineChart": "bank_age_range.json",
    "smallMultiples": "media_two_outputs.json",
    "tableAndCard": "media_constrained_goal_seek.json",
    "tornadoChart": "email_importance.json",
    "counterfactualTable": "bank_counterfactual.json",
    "inspectorSession": "bank_inspector_session.json",
}


def main() -> None:
    outdir = REPO / "fixtures" / "goldens" / "ifacedesc"
    outdir.mkdir(parents=True, exist_ok=True)
    cache = ModelCache()
    datasets = {}
    for name, spec_file in GOLDENS.items():
        spec = parse_spec_strict((REPO / "fixtures" / "specs" / spec_file)
                                 .read_text("utf-8"))
        if spec.dataset not in datasets:
            datasets[spec.dataset] = load_dataset(
                REPO / "datasets" / f"{spec.dataset}.csv")
        ds = datasets[spec.dataset]
        spec = populate_defaults(spec, ds)
        iface = compile_interface(spec, execute_spec(spec, ds, cache), ds)
        (outdir / f"{name}.json").write_text(iface.serialize(), "utf-8")
        print(f"wrote {outdir / f'{name}.json'}")
        if name == "inspectorSession":
            # the inspector also needs the session's canonical document
            from whatif.spec import serialize_spec

            (outdir / f"{name}.doc.json").write_text(serialize_spec(spec),
                                                     "utf-8")
            print(f"wrote {outdir / f'{name}.doc.json'}")


if __name__ == "__main__":
    main()
