#!/usr/bin/env python3
"""Regenerate the committed synthetic fixtures under assets/fixtures."""

from pathlib import Path

from copaint.fixtures import write_fixtures

if __name__ == "__main__":
    paths = write_fixtures(Path(__file__).resolve().parents[1] / "assets" / "fixtures")
    for name, path in paths.items():
        print(f"{name}: {path}")
