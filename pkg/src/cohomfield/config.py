"""Run configuration files: ``[integrator]``, ``[germ]`` and ``[solve]``
sections in the same key/value format as scenario files."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ScenarioParseError
from .flow import IntegratorConfig
from .germ import GermConfig
from .textformat import parse_sections


@dataclass
class SolveConfig:
    mask_distance: float = 1e-3
    t_max: float = 200.0
    residual_step: float = 1e-4


@dataclass
class Settings:
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    germ: GermConfig = field(default_factory=GermConfig)
    solve: SolveConfig = field(default_factory=SolveConfig)


_SECTIONS = {"integrator": IntegratorConfig, "germ": GermConfig, "solve": SolveConfig}


def loads(text: str) -> Settings:
    allowed = {name: {f.name for f in dataclasses.fields(cls)} for name, cls in _SECTIONS.items()}
    sections = parse_sections(text, allowed)
    values = {name: {} for name in _SECTIONS}
    for sec in sections:
        types = {f.name: f.type for f in dataclasses.fields(_SECTIONS[sec.name])}
        for key in sec.entries:
            raw = sec.one(key)
            try:
                values[sec.name][key] = int(raw) if types[key] in ("int", int) else float(raw)
            except ValueError:
                raise ScenarioParseError(f"{key} expects a number, got {raw!r}", sec.line_of(key)) from None
    return Settings(IntegratorConfig(**values["integrator"]), GermConfig(**values["germ"]),
                    SolveConfig(**values["solve"]))


def load(path) -> Settings:
    return loads(Path(path).read_text(encoding="utf-8"))
