"""Report documents and their text / structured renderings.

Text layout (``format_version: 1``)::

    format_version: 1
    command: <name>
    <key>: <value>            # header block, one per line, fixed order
                              # blank line
    [table <name>]            # comma-separated, first row is the header
    <col>,<col>,...
                              # blank line
    [diagram <name>]          # free-form ASCII, verbatim
    ...

Numbers carry 12 significant digits; magnitudes below 1e-13 print as 0.
The structured rendering is JSON with the same content and sorted keys.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

FORMAT_VERSION = 1
SNAP = 1e-13

__all__ = ["FORMAT_VERSION", "Report", "fmt", "fmt_complex"]


def fmt(x) -> str:
    if isinstance(x, bool) or isinstance(x, str):
        return str(x).lower() if isinstance(x, bool) else x
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if abs(x) < SNAP:
        return "0"
    return f"{x:.12g}"


def fmt_complex(z) -> str:
    z = complex(z)
    re = fmt(z.real)
    if abs(z.imag) < SNAP:
        return re
    im = fmt(abs(z.imag))
    sign = "-" if z.imag < 0 else "+"
    if re == "0":
        return f"-{im}j" if z.imag < 0 else f"{im}j"
    return f"{re}{sign}{im}j"


def _plain(x):
    """JSON value for a table cell: numbers rounded to the text precision."""
    if isinstance(x, (bool, str, int)) or x is None:
        return x
    if isinstance(x, complex):
        return {"re": _plain(x.real), "im": _plain(x.imag)}
    x = float(x)
    return 0.0 if abs(x) < SNAP else float(f"{x:.12g}")


@dataclass
class Report:
    command: str
    header: list = field(default_factory=list)
    tables: list = field(default_factory=list)
    diagrams: list = field(default_factory=list)

    def add(self, key: str, value) -> "Report":
        self.header.append((key, value))
        return self

    def table(self, name: str, columns: list, rows: list) -> "Report":
        self.tables.append((name, list(columns), [list(r) for r in rows]))
        return self

    def diagram(self, name: str, lines: list) -> "Report":
        self.diagrams.append((name, list(lines)))
        return self

    def render(self, style: str = "text") -> str:
        if style == "structured":
            return self.render_structured()
        return self.render_text()

    def render_text(self) -> str:
        out = [f"format_version: {FORMAT_VERSION}", f"command: {self.command}"]
        out += [f"{k}: {fmt(v) if not isinstance(v, complex) else fmt_complex(v)}" for k, v in self.header]
        for name, columns, rows in self.tables:
            out += ["", f"[table {name}]", ",".join(columns)]
            for r in rows:
                out.append(",".join(fmt_complex(c) if isinstance(c, complex) else fmt(c) for c in r))
        for name, lines in self.diagrams:
            out += ["", f"[diagram {name}]"] + [l.rstrip() for l in lines]
        return "\n".join(out) + "\n"

    def render_structured(self) -> str:
        doc = {
            "format_version": FORMAT_VERSION,
            "command": self.command,
            "header": {k: _plain(v) for k, v in self.header},
            "tables": {
                name: {"columns": columns, "rows": [[_plain(c) for c in r] for r in rows]}
                for name, columns, rows in self.tables
            },
            "diagrams": {name: lines for name, lines in self.diagrams},
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
