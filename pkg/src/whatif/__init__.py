"""whatif: declarative what-if-analysis specifications, end to end.

Parse PSL documents, validate them against the shipped ``pslschema.v1``
contract, execute sensitivity / goal-seek / importance / counterfactual
experiments over tabular data, and compile the results into
deterministic interactive interface descriptions (``ifacedesc.v1``).
"""

from .errors import CATEGORIES, ErrorFinding, blocking, finding
from .spec import (
    SCHEMA,
    SCHEMA_VERSION,
    Spec,
    SpecPatch,
    apply_patch,
    parse_spec,
    populate_defaults,
    serialize_spec,
)
from .validation import (
    PropertyDiff,
    categorize_errors,
    diff_specs,
    lint_semantics,
    validate_structure,
)

__all__ = [
    "CATEGORIES",
    "ErrorFinding",
    "PropertyDiff",
    "SCHEMA",
    "SCHEMA_VERSION",
    "Spec",
    "SpecPatch",
    "apply_patch",
    "blocking",
    "categorize_errors",
    "diff_specs",
    "finding",
    "lint_semantics",
    "parse_spec",
    "populate_defaults",
    "serialize_spec",
    "validate_structure",
]

__version__ = "0.1.0"
