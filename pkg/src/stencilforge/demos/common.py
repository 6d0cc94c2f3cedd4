from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path


@dataclass
class DemoResult:
    name: str
    steps: int
    diagnostics: dict = field(default_factory=dict)
    dumps: dict = field(default_factory=dict)  # label -> Path
    fields: dict = field(default_factory=dict, repr=False)
    ok: bool = True


def out_path(outdir, name):
    if outdir is None:
        return None
    d = Path(outdir)
    d.mkdir(parents=True, exist_ok=True)
    return d / name
