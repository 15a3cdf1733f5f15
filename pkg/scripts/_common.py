"""Shared helpers for the sweep scripts."""

from __future__ import annotations

import argparse
from pathlib import Path

from fairshare.config import load_config

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"


def parser(desc: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=desc)
    p.add_argument("--out-dir", default=str(ROOT / "results"))
    p.add_argument("--jobs", type=int, default=1)
    return p


def config(name: str):
    return load_config(CONFIGS / name)


def write(out_dir: str, name: str, text: str) -> Path:
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    path = path / name
    path.write_text(text)
    print(f"wrote {path}")
    return path
