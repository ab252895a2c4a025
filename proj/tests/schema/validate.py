#!/usr/bin/env python3
"""Validate scenario files and scenario reports against the JSON schemas."""

import argparse
import copy
import json
import sys
from pathlib import Path

import jsonschema


def load(path):
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def check(validator, path):
    errors = sorted(validator.iter_errors(load(path)), key=lambda e: list(e.path))
    for e in errors:
        where = "/".join(str(p) for p in e.path) or "<root>"
        print(f"FAIL {path}: {where}: {e.message}")
    if not errors:
        print(f"ok   {path}")
    return not errors


def rejects(validator, doc, label):
    if validator.is_valid(doc):
        print(f"FAIL schema accepts a broken document ({label})")
        return False
    return True


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--schemas", required=True, type=Path)
    ap.add_argument("--scenario", action="append", default=[], type=Path)
    ap.add_argument("--scenario-dir", type=Path)
    ap.add_argument("--report", action="append", default=[], type=Path)
    args = ap.parse_args()

    cls = jsonschema.Draft202012Validator
    scenario_schema = load(args.schemas / "scenario.schema.json")
    report_schema = load(args.schemas / "scenario-report.schema.json")
    cls.check_schema(scenario_schema)
    cls.check_schema(report_schema)
    scenarios = cls(scenario_schema)
    reports = cls(report_schema)

    files = list(args.scenario)
    if args.scenario_dir:
        files += sorted(args.scenario_dir.glob("*.json"))
    ok = True
    for f in files:
        ok &= check(scenarios, f)
    for f in args.report:
        ok &= check(reports, f)

    # The schemas must actually constrain something.
    if files:
        doc = load(files[0])
        broken = copy.deepcopy(doc)
        del broken["timeline"]
        ok &= rejects(scenarios, broken, "missing timeline")
        broken = copy.deepcopy(doc)
        broken["unexpected"] = 1
        ok &= rejects(scenarios, broken, "unknown key")
    if args.report:
        doc = load(args.report[0])
        broken = copy.deepcopy(doc)
        broken["status"] = "finished"
        ok &= rejects(reports, broken, "bad status")

    if not files and not args.report:
        print("nothing to validate")
        return 2
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
