"""Command line interface.

Exit codes: 0 clean, 1 findings reported, 2 usage or IO errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .analysis import ExecutionError, execute_spec
from .bridge import MockProvider, build_repair_prompt, repair_context_for
from .compiler import compile_interface
from .data import DatasetError, dataset_context, load_dataset
from .errors import blocking, findings_to_jsonl
from .jsontree import canonical_dumps
from .models import ModelCache
from .spec import SpecError, parse_spec_strict, populate_defaults
from .validation import lint_semantics, validate_structure


def _read(path: str) -> str:
    return Path(path).read_text("utf-8")


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    return json.loads(_read(path))


def cmd_validate(args) -> int:
    findings = validate_structure(_read(args.spec))
    sys.stdout.write(findings_to_jsonl(findings))
    return 1 if findings else 0


def cmd_lint(args) -> int:
    text = _read(args.spec)
    findings = validate_structure(text)
    if not blocking(findings) and args.dataset:
        ds = load_dataset(args.dataset)
        spec = parse_spec_strict(text)
        try:
            spec = populate_defaults(spec, ds)
            findings = findings + lint_semantics(spec, ds)
        except SpecError as exc:
            findings = findings + exc.findings
    sys.stdout.write(findings_to_jsonl(findings))
    return 1 if findings else 0


def _pipeline(args):
    text = _read(args.spec)
    findings = validate_structure(text)
    if blocking(findings):
        sys.stdout.write(findings_to_jsonl(findings))
        return None, None, None, 1
    ds = load_dataset(args.dataset)
    spec = populate_defaults(parse_spec_strict(text), ds)
    cache = ModelCache(args.cache_dir)
    results = execute_spec(spec, ds, cache)
    return spec, ds, results, 0


def cmd_compile(args) -> int:
    spec, ds, results, rc = _pipeline(args)
    if rc:
        return rc
    iface = compile_interface(spec, results, ds)
    out = iface.serialize()
    if args.output:
        Path(args.output).write_text(out, "utf-8")
    else:
        sys.stdout.write(out)
    return 0


def cmd_run(args) -> int:
    spec, ds, results, rc = _pipeline(args)
    if rc:
        return rc
    sys.stdout.write(canonical_dumps([r.to_tree() for r in results]))
    return 0


def cmd_repair_prompt(args) -> int:
    spec = parse_spec_strict(_read(args.spec))
    ctx_text = dataset_context(load_dataset(args.dataset)) if args.dataset \
        else "(no dataset context)"
    ctx = repair_context_for(args.category, ctx_text)
    sys.stdout.write(build_repair_prompt(ctx, spec, args.question or ""))
    return 0


def cmd_bench(args) -> int:
    from .bench import run_benchmark

    provider = MockProvider(args.mock) if args.mock else None
    if provider is None:
        from .bridge import HttpProvider

        provider = HttpProvider()
    report = run_benchmark(args.cases, provider, repair_mode=args.repair,
                           datasets_dir=args.datasets)
    out = report.serialize()
    if args.output:
        Path(args.output).write_text(out, "utf-8")
        agg = report.aggregates
        print(f"cases: {agg['totalCases']}  correct before: "
              f"{agg['correctBeforePct']}%  after: {agg['correctAfterPct']}%")
    else:
        sys.stdout.write(out)
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    config = _load_config(args.config)
    if args.dataset:
        config.setdefault("datasets", []).extend(args.dataset)
    serve(config, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="whatif",
        description="Parse, validate, execute, and compile what-if "
                    "specifications.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="structural validation (EC1-EC4)")
    p.add_argument("spec")
    p.add_argument("--dataset", help="unused; accepted for symmetry")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("lint", help="structural validation plus semantic lints")
    p.add_argument("spec")
    p.add_argument("--dataset")
    p.set_defaults(fn=cmd_lint)

    p = sub.add_parser("compile", help="execute and emit the interface description")
    p.add_argument("spec")
    p.add_argument("--dataset", required=True)
    p.add_argument("--cache-dir")
    p.add_argument("-o", "--output")
    p.set_defaults(fn=cmd_compile)

    p = sub.add_parser("run", help="execute and print experiment results")
    p.add_argument("spec")
    p.add_argument("--dataset", required=True)
    p.add_argument("--cache-dir")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("repair-prompt", help="emit the targeted repair prompt")
    p.add_argument("spec")
    p.add_argument("--category", required=True)
    p.add_argument("--question", default="")
    p.add_argument("--dataset")
    p.set_defaults(fn=cmd_repair_prompt)

    p = sub.add_parser("bench", help="run the benchmark harness")
    p.add_argument("cases")
    p.add_argument("--mock", help="mock transcript (JSON lines)")
    p.add_argument("--repair", default="none",
                   choices=["none", "regenerate", "slotFill"])
    p.add_argument("--datasets", help="directory with the datasets")
    p.add_argument("-o", "--output")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--config")
    p.add_argument("--port", type=int)
    p.add_argument("--dataset", action="append",
                   help="CSV to register at startup (repeatable)")
    p.set_defaults(fn=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (OSError, DatasetError, SpecError, ExecutionError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
