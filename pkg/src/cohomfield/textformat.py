"""Sectioned key/value text used by scenario and config files.

::

    # comment
    [section]
    key = value
    key = "quoted, with comma", bare

Sections may repeat.  Values are split on commas outside double quotes.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

from .errors import ScenarioParseError


@dataclass
class Section:
    name: str
    line: int
    entries: Dict[str, Tuple[str, int]] = field(default_factory=dict)

    def items(self, key: str) -> List[str]:
        value, line = self.entries[key]
        try:
            row = next(csv.reader([value], skipinitialspace=True, strict=True))
        except (csv.Error, StopIteration) as exc:
            raise ScenarioParseError(f"cannot split value of {key!r}: {exc}", line) from None
        return [v.strip() for v in row]

    def one(self, key: str) -> str:
        vals = self.items(key)
        if len(vals) != 1:
            raise ScenarioParseError(f"{key} expects one value, got {len(vals)}", self.entries[key][1])
        return vals[0]

    def line_of(self, key: str) -> int:
        return self.entries[key][1]


def parse_sections(text: str, allowed: Dict[str, set]) -> List[Section]:
    """Split ``text`` into sections, rejecting unknown sections and keys."""
    sections: List[Section] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ScenarioParseError(f"malformed section header {line!r}", lineno)
            name = line[1:-1].strip()
            if name not in allowed:
                raise ScenarioParseError(f"unknown section [{name}]", lineno)
            sections.append(Section(name, lineno))
            continue
        if "=" not in line:
            raise ScenarioParseError(f"expected 'key = value', got {line!r}", lineno)
        if not sections:
            raise ScenarioParseError("key outside of any section", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        sec = sections[-1]
        if key not in allowed[sec.name]:
            raise ScenarioParseError(f"unknown key {key!r} in [{sec.name}]", lineno)
        if key in sec.entries:
            raise ScenarioParseError(f"duplicate key {key!r} in [{sec.name}]", lineno)
        sec.entries[key] = (value, lineno)
    return sections


def quote(s: str) -> str:
    return '"' + s.replace('"', '""') + '"'


def fmt_float(v: float) -> str:
    return repr(float(v))
