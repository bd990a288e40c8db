#!/usr/bin/env python3
"""Generate the three bundled example datasets (seeded, reproducible).

Writes CSVs plus ``.enc.json`` sidecars into datasets/. The tables are
synthetic but follow the shape of common churn / email-campaign /
media-spend decision data: binary outcomes driven by a handful of
inputs with planted effects, so sensitivity and importance analyses
have real signal to find.

Usage: python3 scripts/make_datasets.py [outdir]
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import numpy as np

OUTDIR = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / "datasets"


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def write_csv(path: Path, header: list[str], columns: list) -> None:
    rows = zip(*columns)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow(row)
    print(f"wrote {path}")


def make_bank(outdir: Path) -> None:
    rng = np.random.default_rng(20240601)
    n = 1000
    customer_id = np.arange(15_000_001, 15_000_001 + n)
    credit_score = rng.integers(350, 851, n)
    geography = rng.choice(["France", "Germany", "Spain"], n, p=[0.5, 0.25, 0.25])
    gender = rng.choice(["Female", "Male"], n)
    age = rng.integers(18, 93, n)
    tenure = rng.integers(0, 11, n)
    balance = np.round(np.where(rng.random(n) < 0.3, 0.0,
                                rng.normal(95_000, 40_000, n).clip(0, 260_000)), 2)
    num_products = rng.choice([1, 2, 3, 4], n, p=[0.5, 0.4, 0.07, 0.03])
    has_card = rng.integers(0, 2, n)
    is_active = rng.integers(0, 2, n)
    salary = np.round(rng.uniform(1_000, 200_000, n), 2)
    complain = rng.poisson(2.2, n).clip(0, 14)
    satisfaction = rng.integers(1, 6, n)
    card_type = rng.choice(["SILVER", "GOLD", "PLATINUM", "DIAMOND"], n)
    points = rng.integers(100, 1001, n)

    # churn mostly driven by complaints, single-product holders, inactivity, age
    z = (0.55 * (complain - 2.2)
         + 1.1 * (num_products == 1)
         - 0.9 * is_active
         + 0.02 * (age - 45)
         - 2.0)
    exited = (rng.random(n) < sigmoid(z)).astype(int)

    header = ["CustomerId", "CreditScore", "Geography", "Gender", "Age", "Tenure",
              "Balance", "NumOfProducts", "HasCrCard", "IsActiveMember",
              "EstimatedSalary", "Complain", "SatisfactionScore", "CardType",
              "PointEarned", "Exited"]
    write_csv(outdir / "bank_attrition.csv", header,
              [customer_id, credit_score, geography, gender, age, tenure, balance,
               num_products, has_card, is_active, salary, complain, satisfaction,
               card_type, points, exited])
    (outdir / "bank_attrition.enc.json").write_text(json.dumps({
        "columns": {
            "CustomerId": {"role": "identifier"},
            "Complain": {"kind": "continuous"},
            "Exited": {"role": "output"},
        }
    }, indent=2) + "\n", "utf-8")


def make_email(outdir: Path) -> None:
    rng = np.random.default_rng(20240602)
    n = 800
    email_id = np.arange(1, n + 1)
    email_type = rng.choice([1, 2], n, p=[0.45, 0.55])
    hotness = np.round(rng.beta(2.0, 2.5, n), 3)
    source_type = rng.choice([1, 2], n)
    location = rng.choice(["A", "B", "C", "D", "E", "F", "G"], n)
    campaign_type = rng.choice([1, 2, 3], n, p=[0.2, 0.5, 0.3])
    past_comms = rng.integers(0, 60, n)
    word_count = rng.integers(40, 1301, n)
    links = rng.integers(1, 30, n)
    images = rng.integers(0, 12, n)

    z = (2.4 * (hotness - 0.45)
         + 0.9 * (email_type == 1)
         + 0.02 * (past_comms - 30)
         - 0.0012 * (word_count - 600)
         - 0.06 * (links - 10)
         - 0.4)
    opened = (rng.random(n) < sigmoid(z)).astype(int)

    header = ["Email_ID", "Email_Type", "Subject_Hotness_Score", "Email_Source_Type",
              "Customer_Location", "Email_Campaign_Type", "Total_Past_Communications",
              "Word_Count", "Total_Links", "Total_Images", "Email_Status"]
    write_csv(outdir / "email_campaign.csv", header,
              [email_id, email_type, hotness, source_type, location, campaign_type,
               past_comms, word_count, links, images, opened])
    (outdir / "email_campaign.enc.json").write_text(json.dumps({
        "columns": {
            "Email_ID": {"role": "identifier"},
            "Email_Type": {"labels": {"1": "Transactional", "2": "Promotional"}},
            "Email_Source_Type": {"labels": {"1": "Internal", "2": "External"}},
            "Email_Campaign_Type": {"labels": {"1": "Onboarding", "2": "Newsletter",
                                               "3": "Offer"}},
            "Subject_Hotness_Score": {"kind": "continuous"},
            "Email_Status": {"role": "output"},
        }
    }, indent=2) + "\n", "utf-8")


def make_media(outdir: Path) -> None:
    rng = np.random.default_rng(20240603)
    n = 208  # four years of weeks
    week = np.tile(np.arange(1, 53), 4)
    google = np.round(rng.uniform(20_000, 160_000, n), 0)
    facebook = np.round(rng.uniform(10_000, 120_000, n), 0)
    affiliate = np.round(rng.uniform(2_000, 30_000, n), 0)
    email_imp = np.round(rng.uniform(5_000, 60_000, n), 0)
    paid_views = np.round(0.012 * google + 0.02 * facebook + rng.normal(0, 120, n), 0)
    organic_views = np.round(rng.uniform(400, 5_000, n), 0)
    overall = paid_views + organic_views + np.round(rng.normal(0, 40, n), 0)
    sales = np.round(
        18.0 * np.sqrt(affiliate)
        + 0.015 * google
        + 0.01 * facebook
        + 0.6 * organic_views
        + 0.9 * paid_views
        + rng.normal(0, 180, n), 2)

    header = ["Calendar_Week", "Google_Impressions", "Facebook_Impressions",
              "Affiliate_Impressions", "Email_Impressions", "Paid_Views",
              "Organic_Views", "Overall_Views", "Sales"]
    write_csv(outdir / "media_spend.csv", header,
              [week, google, facebook, affiliate, email_imp, paid_views,
               organic_views, overall, sales])
    (outdir / "media_spend.enc.json").write_text(json.dumps({
        "columns": {
            "Calendar_Week": {"kind": "continuous"},
            "Overall_Views": {"role": "output"},
            "Sales": {"role": "output"},
        }
    }, indent=2) + "\n", "utf-8")


def main() -> None:
    OUTDIR.mkdir(parents=True, exist_ok=True)
    make_bank(OUTDIR)
    make_email(OUTDIR)
    make_media(OUTDIR)


if __name__ == "__main__":
    main()
