#!/usr/bin/env python3
"""Turn the raw Adult and COMPAS files into categorical CSVs matching
recipes/adult.schema.json and recipes/compas_small.schema.json.

    python3 scripts/prepare_datasets.py [--raw data/raw] [--out data]
"""

import argparse
import csv
import os
import sys

AGE_DECADES = ["<20", "20-29", "30-39", "40-49", "50-59", "60-69", ">=70"]
EDUCATION = ["<6", "6", "7", "8", "9", "10", "11", "12", ">12"]


def clip(x, lo, hi):
    return max(lo, min(hi, x))


def prepare_adult(src, dst):
    rows = 0
    with open(src, newline="") as f, open(dst, "w", newline="") as g:
        out = csv.writer(g, lineterminator="\n")
        out.writerow(["sex", "race", "age", "education", "income"])
        for rec in csv.reader(f, skipinitialspace=True):
            if len(rec) < 15:
                continue
            age = int(rec[0])
            edu_num = int(rec[4])
            race = "White" if rec[8] == "White" else "Non-White"
            income = ">50K" if rec[14].rstrip(".") == ">50K" else "<=50K"
            out.writerow([
                rec[9],
                race,
                AGE_DECADES[clip(age // 10 - 1, 0, 6)],
                EDUCATION[clip(edu_num - 5, 0, 8)],
                income,
            ])
            rows += 1
    return rows


def age_bucket(age):
    if age < 25:
        return "<25"
    if age <= 45:
        return "25-45"
    return ">45"


def priors_bucket(n):
    if n == 0:
        return "0"
    if n <= 3:
        return "1-3"
    return ">3"


def prepare_compas_small(src, dst):
    rows = 0
    with open(src, newline="") as f, open(dst, "w", newline="") as g:
        out = csv.writer(g, lineterminator="\n")
        out.writerow(["sex", "race", "age", "priors", "charge_degree", "two_year_recid"])
        for rec in csv.DictReader(f):
            days = rec["days_b_screening_arrest"]
            if days == "" or not -30 <= int(float(days)) <= 30:
                continue
            if rec["is_recid"] == "-1" or rec["c_charge_degree"] == "O" or rec["score_text"] == "N/A":
                continue
            if rec["race"] not in ("Caucasian", "African-American"):
                continue
            out.writerow([
                rec["sex"],
                rec["race"],
                age_bucket(int(rec["age"])),
                priors_bucket(int(rec["priors_count"])),
                rec["c_charge_degree"],
                rec["two_year_recid"],
            ])
            rows += 1
    return rows


def main():
    here = os.path.dirname(os.path.abspath(__file__))
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--raw", default=os.path.join(here, "..", "data", "raw"))
    p.add_argument("--out", default=os.path.join(here, "..", "data"))
    args = p.parse_args()
    os.makedirs(args.out, exist_ok=True)
    jobs = [
        ("adult.data", "adult.csv", prepare_adult),
        ("compas-scores-two-years.csv", "compas_small.csv", prepare_compas_small),
    ]
    for raw, name, fn in jobs:
        src = os.path.join(args.raw, raw)
        if not os.path.exists(src):
            print(f"missing {src}, skipping", file=sys.stderr)
            continue
        n = fn(src, os.path.join(args.out, name))
        print(f"{name}: {n} rows")


if __name__ == "__main__":
    main()
