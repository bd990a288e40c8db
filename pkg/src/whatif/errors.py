"""Error taxonomy shared by the parser, validator, auditor, and services.

Categories EC1-EC4 are non-functional (the document cannot be compiled);
EC5-EC10 are functional (the document compiles but misrepresents the
question's intent).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

NON_FUNCTIONAL = ("EC1", "EC2", "EC3", "EC4")
FUNCTIONAL = ("EC5", "EC6", "EC7", "EC8", "EC9", "EC10")
CATEGORIES = NON_FUNCTIONAL + FUNCTIONAL

CATEGORY_NAMES = {
    "EC1": "Structural / formatting errors",
    "EC2": "Redundancy / duplication errors",
    "EC3": "Missing blocks / key errors",
    "EC4": "Incorrect schema errors",
    "EC5": "Misunderstanding the analysis operation",
    "EC6": "Misspecifying variables",
    "EC7": "Misspecifying objectives and constraints",
    "EC8": "Misgauging the scope",
    "EC9": "Misusing or omitting properties",
    "EC10": "Cross-property substitutions",
}


def severity_for(category: str) -> str:
    if category in NON_FUNCTIONAL:
        return "nonFunctional"
    if category in FUNCTIONAL:
        return "functional"
    raise ValueError(f"unknown error category: {category}")


@dataclass(frozen=True)
class ErrorFinding:
    category: str
    code: str
    path: str
    message: str
    severity: str

    def to_tree(self) -> dict:
        return asdict(self)


def finding(category: str, code: str, path: str, message: str) -> ErrorFinding:
    return ErrorFinding(category, code, path, message, severity_for(category))


def blocking(findings: list[ErrorFinding]) -> list[ErrorFinding]:
    """The subset that prevents compilation (severity nonFunctional)."""
    return [f for f in findings if f.severity == "nonFunctional"]


def findings_to_jsonl(findings: list[ErrorFinding]) -> str:
    """One finding per line, machine readable; consumed by CLI and UI."""
    return "".join(json.dumps(f.to_tree(), sort_keys=True) + "\n" for f in findings)
