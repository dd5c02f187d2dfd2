"""Shared plumbing for the experiment scripts: dataclass configs as CLI flags, CSV/JSON output."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
from pathlib import Path


def parse_config(cls, description: str, argv=None):
    """Every dataclass field becomes --field-name; list fields take several values."""
    ap = argparse.ArgumentParser(description=description)
    defaults = cls()
    for f in dataclasses.fields(cls):
        default = getattr(defaults, f.name)
        flag = "--" + f.name.replace("_", "-")
        if isinstance(default, (list, tuple)):
            kind = type(default[0]) if default else float
            ap.add_argument(flag, type=kind, nargs="+", default=list(default))
        elif isinstance(default, bool):
            ap.add_argument(flag, action=argparse.BooleanOptionalAction, default=default)
        else:
            ap.add_argument(flag, type=type(default), default=default)
    return cls(**vars(ap.parse_args(argv)))


def write_outputs(out_dir: str, stem: str, header, rows, summary: dict) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"{stem}.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    (out / f"{stem}.json").write_text(json.dumps(summary, indent=2, default=float) + "\n")
    print(json.dumps(summary, indent=2, default=float))
