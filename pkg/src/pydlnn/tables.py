"""Result tables: emission as CSV, Markdown or HTML, and comparison with reference counts."""

import csv
import io
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from pydlnn.html_converter import HtmlConverter
from pydlnn.markdown_converter import MarkdownConverter
from pydlnn.network import Architecture

logger = logging.getLogger(__name__)

BASE_COLUMNS = ["d_i", "d_x", "d_y", "N", "CBB", "BKK"]
BOUND_COLUMNS = ["B_C", "B_C*"]
COUNT_COLUMNS = ["N_C", "N_C*", "max N_R"]
FORMATS = ("csv", "markdown", "html")
SKIPPED = "skipped"


class ReferenceFormatError(ValueError):
    """Raised when a reference table cannot be read."""

    pass


@dataclass(frozen=True)
class TableRow:
    """One architecture's line in a result table."""

    d_i: int
    d_x: int
    d_y: int
    N: int
    cbb: int
    bkk: Optional[int]
    n_c: int
    n_cstar: int
    max_n_r: int
    b_c: Optional[int] = None
    b_cstar: Optional[int] = None

    @property
    def key(self) -> Tuple[int, int, int]:
        return self.d_i, self.d_x, self.d_y

    def cells(self, with_bounds: bool) -> List[str]:
        values = [
            str(self.d_i),
            str(self.d_x),
            str(self.d_y),
            str(self.N),
            str(self.cbb),
            SKIPPED if self.bkk is None else str(self.bkk),
        ]
        if with_bounds:
            values += ["" if v is None else str(v) for v in (self.b_c, self.b_cstar)]
        values += [str(self.n_c), str(self.n_cstar), str(self.max_n_r)]
        return values


def columns(with_bounds: bool) -> List[str]:
    return BASE_COLUMNS + (BOUND_COLUMNS if with_bounds else []) + COUNT_COLUMNS


def _with_bounds(rows: Sequence[TableRow]) -> bool:
    return any(r.b_c is not None or r.b_cstar is not None for r in rows)


def table_title(arch: Architecture) -> str:
    """Section title used for ``arch`` in reference documents."""
    return f"H={arch.H}, m={arch.m}"


def emit_table(
    rows: Sequence[TableRow],
    fmt: str = "csv",
    path: Optional[Union[str, Path]] = None,
    title: Optional[str] = None,
) -> str:
    """Render ``rows``; the closed-form bound columns appear only when some row has them.

    The text is written to ``path`` when one is given.
    """
    if not rows:
        raise ValueError("Cannot emit an empty table")
    if fmt not in FORMATS:
        raise ValueError(f"Unknown table format '{fmt}', expected one of {', '.join(FORMATS)}")
    with_bounds = _with_bounds(rows)
    header = columns(with_bounds)
    body = [row.cells(with_bounds) for row in rows]

    if fmt == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(body)
        text = buffer.getvalue()
    else:
        text = MarkdownConverter.render_table(header, body)
        if title:
            text = f"## {title}\n\n{text}"
        if fmt == "html":
            text = MarkdownConverter().convert(text) + "\n"

    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
        logger.debug("Wrote %d rows to %s", len(rows), path)
    return text


def _optional_int(text: str) -> Optional[int]:
    text = text.strip()
    if text in ("", SKIPPED):
        return None
    return int(text)


def _rows_from_cells(header: Sequence[str], records: Sequence[Sequence[str]]) -> List[TableRow]:
    header = [h.replace("\\", "").strip() for h in header]
    for name in BASE_COLUMNS + COUNT_COLUMNS:
        if name not in header:
            raise ReferenceFormatError(f"Missing column '{name}' in {header}")
    index = {name: i for i, name in enumerate(header)}
    rows = []
    for record in records:
        if len(record) != len(header):
            raise ReferenceFormatError(
                f"Row {list(record)} has {len(record)} cells, expected {len(header)}"
            )
        try:

            def get(name: str) -> Optional[int]:
                return _optional_int(record[index[name]]) if name in index else None

            rows.append(
                TableRow(
                    d_i=int(record[index["d_i"]]),
                    d_x=int(record[index["d_x"]]),
                    d_y=int(record[index["d_y"]]),
                    N=int(record[index["N"]]),
                    cbb=int(record[index["CBB"]]),
                    bkk=get("BKK"),
                    n_c=int(record[index["N_C"]]),
                    n_cstar=int(record[index["N_C*"]]),
                    max_n_r=int(record[index["max N_R"]]),
                    b_c=get("B_C"),
                    b_cstar=get("B_C*"),
                )
            )
        except ValueError as e:
            raise ReferenceFormatError(f"Malformed row {list(record)}: {e}") from e
    return rows


def parse_csv(text: str) -> List[TableRow]:
    """Inverse of ``emit_table(rows, "csv")``."""
    records = list(csv.reader(io.StringIO(text)))
    if not records:
        raise ReferenceFormatError("Empty CSV table")
    return _rows_from_cells(records[0], records[1:])


def default_reference_text() -> str:
    return resources.files("pydlnn").joinpath("data/reference_tables.md").read_text(
        encoding="utf-8"
    )


def load_reference(source: Optional[Union[str, Path]] = None) -> Dict[str, List[TableRow]]:
    """Reference tables keyed by section title (``"H=1, m=1"`` and so on).

    The Markdown document is rendered to HTML and the ``<table>`` elements
    are read back, so any table the renderer accepts is accepted here.
    """
    text = default_reference_text() if source is None else Path(source).read_text(encoding="utf-8")
    html = MarkdownConverter().convert(text)
    tables = HtmlConverter.extract_tables(html)
    if not tables:
        raise ReferenceFormatError("Reference document contains no tables")
    reference: Dict[str, List[TableRow]] = {}
    for table in tables:
        if not table.title:
            raise ReferenceFormatError("Reference table without a section heading")
        reference[table.title] = _rows_from_cells(table.header, table.rows)
    logger.debug("Loaded reference tables: %s", ", ".join(reference))
    return reference


@dataclass(frozen=True)
class CellDiff:
    key: Tuple[int, int, int]
    column: str
    expected: Optional[int]
    observed: Optional[int]

    def describe(self) -> str:
        d_i, d_x, d_y = self.key
        return (
            f"d_i={d_i} d_x={d_x} d_y={d_y}: {self.column} "
            f"expected {self.expected}, observed {self.observed}"
        )


@dataclass
class DiffReport:
    """Cell-by-cell comparison of computed rows with a reference table."""

    compared: int = 0
    diffs: List[CellDiff] = field(default_factory=list)
    missing: List[Tuple[int, int, int]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.diffs and not self.missing

    def to_text(self) -> str:
        lines = [f"Compared {self.compared} row(s): {len(self.diffs)} diff(s)"]
        lines += [d.describe() for d in self.diffs]
        lines += [f"No reference row for d_i={k[0]} d_x={k[1]} d_y={k[2]}" for k in self.missing]
        return "\n".join(lines)


_EXACT_COLUMNS = [
    ("N", "N"),
    ("CBB", "cbb"),
    ("BKK", "bkk"),
    ("B_C", "b_c"),
    ("B_C*", "b_cstar"),
    ("N_C", "n_c"),
    ("N_C*", "n_cstar"),
]


def verify_against_reference(
    rows: Sequence[TableRow],
    reference: Union[Sequence[TableRow], Mapping[str, List[TableRow]]],
    title: Optional[str] = None,
) -> DiffReport:
    """Compare computed rows with reference rows matched on ``(d_i, d_x, d_y)``.

    Bound and count columns must agree exactly; a skipped BKK or an absent
    bound is not compared. ``max N_R`` passes when the observed value does
    not exceed the reference, since fewer trials may see fewer real points.
    """
    if isinstance(reference, Mapping):
        if title is None or title not in reference:
            raise ReferenceFormatError(f"No reference table titled '{title}'")
        reference_rows = reference[title]
    else:
        reference_rows = list(reference)
    by_key = {r.key: r for r in reference_rows}

    report = DiffReport()
    for row in rows:
        expected = by_key.get(row.key)
        if expected is None:
            report.missing.append(row.key)
            continue
        report.compared += 1
        for column, attr in _EXACT_COLUMNS:
            observed, wanted = getattr(row, attr), getattr(expected, attr)
            if observed is None or wanted is None:
                continue
            if observed != wanted:
                report.diffs.append(CellDiff(row.key, column, wanted, observed))
        if row.max_n_r > expected.max_n_r:
            report.diffs.append(CellDiff(row.key, "max N_R", expected.max_n_r, row.max_n_r))
    if not report.ok:
        logger.warning("Reference comparison found %d diff(s)", len(report.diffs))
    return report
