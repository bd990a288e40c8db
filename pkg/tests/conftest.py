import json
from pathlib import Path

import pytest

from whatif.data import load_dataset

REPO = Path(__file__).resolve().parents[1]
DATASETS = REPO / "datasets"
FIXTURES = REPO / "fixtures"


def spec_text(tree: dict) -> str:
    return json.dumps(tree)


@pytest.fixture(scope="session")
def bank():
    return load_dataset(DATASETS / "bank_attrition.csv")


@pytest.fixture(scope="session")
def email():
    return load_dataset(DATASETS / "email_campaign.csv")


@pytest.fixture(scope="session")
def media():
    return load_dataset(DATASETS / "media_spend.csv")


def bank_point_sensitivity_tree() -> dict:
    """The flagship churn question: one-product customers moved to two
    products, complaints halved."""
    return {
        "dataset": "bank_attrition",
        "outputVariable": ["Exited"],
        "objective": {"goal": "minimize"},
        "model": [{"id": "model_1", "type": "randomForestClassifier", "seed": 0}],
        "experiments": [{
            "experimentType": "pointSensitivity",
            "model": "model_1",
            "perturb": [
                {"variable": "NumOfProducts", "op": "setTo", "unit": "absolute",
                 "value": 2,
                 "filter": {"NumOfProducts": {"operator": "==", "value": 1}}},
                {"variable": "Complain", "op": "changeBy", "unit": "percent",
                 "value": -50},
            ],
        }],
    }


@pytest.fixture
def bank_point_spec_tree():
    return bank_point_sensitivity_tree()
