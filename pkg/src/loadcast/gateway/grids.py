"""JSON grid envelope: the wire format for every gateway request and response.

A grid is {"meta": {"op": ..., possibly "err" and "dis"}, "cols": [...],
"rows": [...]}; see docs/http_api.md for the field-by-field schema.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..errors import ProtocolError


@dataclass
class GridDocument:
    meta: dict
    cols: list[dict] = field(default_factory=list)
    rows: list[dict] = field(default_factory=list)

    def __post_init__(self):
        if "op" not in self.meta:
            raise ProtocolError("grid meta must carry an op")
        names = {c.get("name") for c in self.cols}
        for row in self.rows:
            if not set(row).issubset(names):
                raise ProtocolError(f"row keys {sorted(row)} not within cols {sorted(names)}")

    @property
    def is_error(self) -> bool:
        return bool(self.meta.get("err"))

    @property
    def dis(self) -> str:
        return str(self.meta.get("dis", ""))

    def to_json(self) -> str:
        return json.dumps({"meta": self.meta, "cols": self.cols, "rows": self.rows})


def make_grid(op: str, cols: list[str], rows: list[dict], meta_extra: dict | None = None) -> GridDocument:
    meta = {"op": op}
    if meta_extra:
        meta.update(meta_extra)
    return GridDocument(meta=meta, cols=[{"name": c} for c in cols], rows=rows)


def error_grid(op: str, dis: str) -> GridDocument:
    return GridDocument(meta={"op": op, "err": True, "dis": dis}, cols=[], rows=[])


def parse_grid(text: str | bytes) -> GridDocument:
    """Parse and structurally validate a grid; ProtocolError carries a payload
    excerpt so upstream garbage is diagnosable."""
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ProtocolError(f"response is not JSON ({e}); payload starts: {text[:160]!r}") from e
    if not isinstance(obj, dict) or not isinstance(obj.get("meta"), dict):
        raise ProtocolError(f"response is not a grid; payload starts: {text[:160]!r}")
    try:
        return GridDocument(
            meta=obj["meta"],
            cols=list(obj.get("cols", [])),
            rows=list(obj.get("rows", [])),
        )
    except (TypeError, ProtocolError) as e:
        raise ProtocolError(f"malformed grid: {e}; payload starts: {text[:160]!r}") from e
