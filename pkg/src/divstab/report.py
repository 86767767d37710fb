"""Line-oriented ``key: value`` reports with ``[section]`` headers.

Reports never contain timestamps or absolute paths so that identical
inputs and seeds give byte-identical output.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import __version__


def _clean(value) -> str:
    return " ".join(str(value).split())


@dataclass
class Section:
    title: str
    items: list[tuple[str, str]] = field(default_factory=list)

    def add(self, key: str, value) -> Section:
        self.items.append((key, _clean(value)))
        return self

    def extend(self, pairs) -> Section:
        for k, v in pairs:
            self.add(k, v)
        return self


@dataclass
class Report:
    command: str
    input_name: str | None = None
    digest: str | None = None
    sections: list[Section] = field(default_factory=list)

    def section(self, title: str) -> Section:
        s = Section(title)
        self.sections.append(s)
        return s

    def render(self) -> str:
        head = Section("divstab")
        head.add("version", __version__)
        head.add("command", self.command)
        if self.input_name is not None:
            head.add("input", self.input_name)
        if self.digest is not None:
            head.add("sha256", self.digest)
        out = []
        for sec in [head, *self.sections]:
            out.append(f"[{sec.title}]")
            out.extend(f"{k}: {v}" for k, v in sec.items)
            out.append("")
        return "\n".join(out)


def parse_report(text: str) -> dict[str, dict[str, str]]:
    """Inverse of ``Report.render`` for tests and downstream tooling."""
    out: dict[str, dict[str, str]] = {}
    current = None
    for line in text.splitlines():
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = out.setdefault(line[1:-1], {})
        elif current is not None:
            k, v = line.split(": ", 1) if ": " in line else (line.rstrip(":"), "")
            current[k] = v
    return out
