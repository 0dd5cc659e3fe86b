"""Event trace records and their CSV form (`t_ms,node,event,detail`)."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

HEADER = ["t_ms", "node", "event", "detail"]


@dataclass(frozen=True)
class TraceRecord:
    t_ms: float
    node: int
    event: str
    detail: str = ""

    def fields(self) -> dict[str, str]:
        """Parse ``k=v;k=v`` details into a dict."""
        if not self.detail:
            return {}
        return dict(part.split("=", 1) for part in self.detail.split(";") if "=" in part)


@dataclass
class EventTrace:
    records: list[TraceRecord] = field(default_factory=list)

    def add(self, t_ms: float, node: int, event: str, detail: str = "") -> None:
        self.records.append(TraceRecord(t_ms, node, event, detail))

    def __iter__(self) -> Iterator[TraceRecord]:
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def of(self, event: str, node: int | None = None) -> list[TraceRecord]:
        return [r for r in self.records if r.event == event and (node is None or r.node == node)]

    def header(self) -> dict[str, str]:
        rec = next((r for r in self.records if r.event == "scenario"), None)
        return rec.fields() if rec else {}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(HEADER)
        for r in self.records:
            w.writerow([f"{r.t_ms:.3f}", r.node, r.event, r.detail])
        return buf.getvalue()

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "EventTrace":
        rows = csv.reader(io.StringIO(text))
        head = next(rows, None)
        if head != HEADER:
            raise ValueError(f"trace header must be {','.join(HEADER)}, got {head}")
        out = cls()
        for i, row in enumerate(rows, start=2):
            if len(row) != 4:
                raise ValueError(f"line {i}: expected 4 columns, got {len(row)}")
            out.add(float(row[0]), int(row[1]), row[2], row[3])
        return out

    @classmethod
    def read(cls, path: str | Path) -> "EventTrace":
        return cls.from_csv(Path(path).read_text())
