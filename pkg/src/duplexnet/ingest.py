"""Readers for flow edgelists, concordances, patent events and auxiliary panels.

Everything here is pure: parsers take text streams and return plain records,
the harmonisation helpers take records and return new records.
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, replace
from typing import Iterable, Literal, Mapping, Sequence, TextIO

import numpy as np
import pandas as pd

from duplexnet.errors import (
    DataError,
    EmptyMap,
    EmptyWindowGrid,
    MissingColumn,
    MissingDeflator,
    NegativeValue,
    NonNumericValue,
    NonPositiveDeflator,
    UnmappedCode,
    WeightOutOfRange,
)

Period = int | str

AUX_COLUMNS = (
    "employment",
    "wage",
    "capital_intensity",
    "investment_pc",
    "energy_pc",
    "materials_pc",
    "prod_labor_share",
    "rel_prod_wage",
    "tfp",
    "value_added_pc",
    "deflator",
)


@dataclass(frozen=True)
class FlowEdge:
    """One cross-industry flow: ``value`` units move from ``source`` to ``target``."""

    source: str
    target: str
    value: float
    period: Period | None = None

    def __post_init__(self):
        if not self.source or not self.target:
            raise DataError("edge codes must be non-empty")
        if not math.isfinite(self.value) or self.value < 0:
            raise DataError(f"edge value must be finite and >= 0, got {self.value}")


@dataclass(frozen=True)
class EdgeColumns:
    source: str = "source"
    target: str = "target"
    value: str = "value"
    period: str | None = "period"


def _parse_period(raw: str) -> Period:
    raw = raw.strip()
    try:
        return int(raw)
    except ValueError:
        return raw


def _parse_value(raw: str, line: int) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise NonNumericValue(line, raw) from None
    if not math.isfinite(value):
        raise NonNumericValue(line, raw)
    if value < 0:
        raise NegativeValue(line, raw)
    return value


def _header_index(header: Sequence[str], name: str) -> int:
    try:
        return list(header).index(name)
    except ValueError:
        raise MissingColumn(name, header) from None


def parse_flow_edgelist(
    stream: TextIO,
    columns: EdgeColumns = EdgeColumns(),
    period: Period | None = None,
    delimiter: str = ",",
) -> list[FlowEdge]:
    """Parse a long three- or four-column flow table.

    If the file has no period column, ``period`` is stamped on every edge.
    Line numbers in errors count the header as line 1.
    """
    reader = csv.reader(stream, delimiter=delimiter)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise MissingColumn(columns.source) from None
    i_src = _header_index(header, columns.source)
    i_tgt = _header_index(header, columns.target)
    i_val = _header_index(header, columns.value)
    i_per = None
    if columns.period is not None and columns.period in header:
        i_per = header.index(columns.period)
    elif period is None and columns.period is not None:
        raise MissingColumn(columns.period, header)

    edges = []
    for line, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        value = _parse_value(row[i_val], line)
        p = _parse_period(row[i_per]) if i_per is not None else period
        src, tgt = row[i_src].strip(), row[i_tgt].strip()
        if not src or not tgt:
            raise DataError(f"line {line}: empty classification code")
        edges.append(FlowEdge(src, tgt, value, p))
    return edges


def write_flow_edgelist(edges: Iterable[FlowEdge], stream: TextIO, delimiter: str = ",") -> None:
    writer = csv.writer(stream, delimiter=delimiter, lineterminator="\n")
    writer.writerow(["source", "target", "value", "period"])
    for e in edges:
        writer.writerow([e.source, e.target, repr(e.value), "" if e.period is None else e.period])


# -- concordances ---------------------------------------------------------


@dataclass(frozen=True)
class ConcordanceMap:
    """Weighted many-to-many mapping ``source code -> [(target code, weight)]``.

    Weights of each source sum to one.
    """

    entries: Mapping[str, tuple[tuple[str, float], ...]]

    def __contains__(self, code: str) -> bool:
        return code in self.entries

    def targets(self, code: str) -> tuple[tuple[str, float], ...]:
        return self.entries[code]

    @classmethod
    def identity(cls, codes: Iterable[str]) -> "ConcordanceMap":
        return cls({c: ((c, 1.0),) for c in codes})

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str, float | None]]) -> "ConcordanceMap":
        raw: dict[str, dict[str, float | None]] = defaultdict(dict)
        for src, tgt, w in pairs:
            if w is not None and not (0.0 <= w <= 1.0):
                raise WeightOutOfRange(f"weight {w} for {src}->{tgt} outside [0, 1]")
            prev = raw[src].get(tgt)
            raw[src][tgt] = w if prev is None else prev + (w or 0.0)
        if not raw:
            raise EmptyMap("concordance has no entries")
        entries = {}
        for src, tgts in raw.items():
            if any(w is None for w in tgts.values()):
                # one-to-many without weights: split uniformly
                k = len(tgts)
                entries[src] = tuple((t, 1.0 / k) for t in tgts)
                continue
            total = sum(tgts.values())
            if total <= 0:
                raise WeightOutOfRange(f"weights of {src!r} sum to zero")
            entries[src] = tuple((t, w / total) for t, w in tgts.items())
        return cls(entries)

    def to_rows(self) -> list[tuple[str, str, float]]:
        return [(s, t, w) for s, ts in self.entries.items() for t, w in ts]


def parse_concordance(
    stream: TextIO,
    source: str = "source",
    target: str = "target",
    weight: str = "weight",
    delimiter: str = ",",
) -> ConcordanceMap:
    """Read a crosswalk table; the weight column is optional (uniform split if absent)."""
    reader = csv.reader(stream, delimiter=delimiter)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise EmptyMap("empty concordance file") from None
    i_src = _header_index(header, source)
    i_tgt = _header_index(header, target)
    i_w = header.index(weight) if weight in header else None
    pairs = []
    for line, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        w = None
        if i_w is not None and row[i_w].strip():
            try:
                w = float(row[i_w])
            except ValueError:
                raise NonNumericValue(line, row[i_w]) from None
        pairs.append((row[i_src].strip(), row[i_tgt].strip(), w))
    return ConcordanceMap.from_pairs(pairs)


def _mapped(code: str, cmap: ConcordanceMap, strict: bool) -> tuple[tuple[str, float], ...]:
    if code in cmap:
        return cmap.targets(code)
    if strict:
        raise UnmappedCode(code)
    return ((code, 1.0),)


def apply_concordance(
    edges: Iterable[FlowEdge],
    cmap: ConcordanceMap,
    sides: Literal["source", "target", "both"] = "both",
    strict: bool = True,
) -> list[FlowEdge]:
    """Re-express edges in the target classification.

    Each edge is split over the cross product of the mapped source and target
    codes with value ``v * w_s * w_t``. With ``strict=False`` unmapped codes
    pass through unchanged instead of raising.
    """
    if sides not in ("source", "target", "both"):
        raise ValueError(f"sides must be source/target/both, got {sides!r}")
    out = []
    for e in edges:
        srcs = _mapped(e.source, cmap, strict) if sides in ("source", "both") else ((e.source, 1.0),)
        tgts = _mapped(e.target, cmap, strict) if sides in ("target", "both") else ((e.target, 1.0),)
        for s, ws in srcs:
            for t, wt in tgts:
                out.append(FlowEdge(s, t, e.value * ws * wt, e.period))
    return out


def aggregate_edges(edges: Iterable[FlowEdge]) -> list[FlowEdge]:
    """Sum duplicate (source, target, period) triples; first-seen order kept."""
    acc: dict[tuple, float] = {}
    for e in edges:
        key = (e.source, e.target, e.period)
        acc[key] = acc.get(key, 0.0) + e.value
    return [FlowEdge(s, t, v, p) for (s, t, p), v in acc.items()]


# -- patent events --------------------------------------------------------


@dataclass(frozen=True)
class EventRecord:
    id: str
    year: int
    codes: tuple[str, ...]
    forward_citations: int = 0

    def __post_init__(self):
        # dedupe codes, keep first occurrence
        object.__setattr__(self, "codes", tuple(dict.fromkeys(self.codes)))
        if self.forward_citations < 0:
            raise DataError(f"event {self.id}: negative citation count")


def parse_events(
    stream: TextIO,
    delimiter: str = ",",
    code_sep: str = ";",
    year_range: tuple[int, int] | None = None,
    code_level: int | None = None,
) -> list[EventRecord]:
    """Read patent records with columns ``id, year, codes[, forward_citations]``.

    ``code_level`` truncates codes to their first characters (e.g. 4 for CPC
    subclasses) before deduplication. Duplicate ids are rejected.
    """
    reader = csv.reader(stream, delimiter=delimiter)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise MissingColumn("id") from None
    i_id = _header_index(header, "id")
    i_year = _header_index(header, "year")
    i_codes = _header_index(header, "codes")
    i_cit = header.index("forward_citations") if "forward_citations" in header else None
    seen = set()
    events = []
    for line, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        eid = row[i_id].strip()
        if eid in seen:
            raise DataError(f"line {line}: duplicate event id {eid!r}")
        seen.add(eid)
        try:
            year = int(row[i_year])
        except ValueError:
            raise NonNumericValue(line, row[i_year]) from None
        if year_range is not None and not (year_range[0] <= year <= year_range[1]):
            raise DataError(f"line {line}: year {year} outside {year_range}")
        codes = [c.strip() for c in row[i_codes].split(code_sep) if c.strip()]
        if code_level is not None:
            codes = [c[:code_level] for c in codes]
        cites = 0
        if i_cit is not None and row[i_cit].strip():
            cites = int(_parse_value(row[i_cit], line))
        events.append(EventRecord(eid, year, tuple(codes), cites))
    return events


@dataclass(frozen=True)
class Window:
    anchor: int
    start: int
    end: int

    def __contains__(self, year: int) -> bool:
        return self.start <= year <= self.end


def window_grid(
    anchors: Sequence[int], window_len: int, timing: Literal["prior", "posterior"] = "prior"
) -> list[Window]:
    """Windows ``[anchor-len+1, anchor]`` (prior) or ``[anchor, anchor+len-1]`` (posterior)."""
    if window_len < 1:
        raise ValueError("window_len must be >= 1")
    if not anchors:
        raise EmptyWindowGrid("no anchor years given")
    if timing == "prior":
        wins = [Window(a, a - window_len + 1, a) for a in sorted(anchors)]
    elif timing == "posterior":
        wins = [Window(a, a, a + window_len - 1) for a in sorted(anchors)]
    else:
        raise ValueError(f"timing must be prior/posterior, got {timing!r}")
    for a, b in zip(wins, wins[1:]):
        if b.start <= a.end:
            raise ValueError(f"windows around {a.anchor} and {b.anchor} overlap")
    return wins


def assign_window(year: int, windows: Sequence[Window]) -> int | None:
    for w in windows:
        if year in w:
            return w.anchor
    return None


def window_events(
    events: Iterable[EventRecord],
    window_len: int,
    anchors: Sequence[int],
    timing: Literal["prior", "posterior"] = "prior",
) -> dict[int, list[EventRecord]]:
    """Bucket events into the window grid; events outside every window are dropped."""
    windows = window_grid(anchors, window_len, timing)
    out: dict[int, list[EventRecord]] = {w.anchor: [] for w in windows}
    for ev in events:
        a = assign_window(ev.year, windows)
        if a is not None:
            out[a].append(ev)
    return out


def count_forward_citations(
    events: Sequence[EventRecord],
    citations: Iterable[tuple[str, str]],
    window_len: int,
    anchors: Sequence[int],
    timing: Literal["prior", "posterior"] = "prior",
    scope: Literal["window", "all"] = "window",
) -> list[EventRecord]:
    """Fill ``forward_citations`` from ``(citing_id, cited_id)`` pairs.

    ``scope="window"`` only counts citations made by patents granted in the
    same window as the cited patent; ``scope="all"`` counts every citation.
    """
    windows = window_grid(anchors, window_len, timing)
    by_id = {ev.id: ev for ev in events}
    win = {ev.id: assign_window(ev.year, windows) for ev in events}
    counts: dict[str, int] = defaultdict(int)
    for citing, cited in citations:
        if cited not in by_id:
            continue
        if scope == "window":
            if citing not in by_id or win[cited] is None or win[citing] != win[cited]:
                continue
        counts[cited] += 1
    return [replace(ev, forward_citations=counts.get(ev.id, 0)) for ev in events]


def citation_edges(
    events: Sequence[EventRecord],
    citations: Iterable[tuple[str, str]],
    window_len: int,
    anchors: Sequence[int],
    timing: Literal["prior", "posterior"] = "prior",
) -> list[FlowEdge]:
    """Class-level citation flows, one unit per (cited code, citing code) pair.

    Knowledge flows from the cited to the citing patent, so the edge runs
    ``cited code -> citing code`` and is stamped with the citing patent's window.
    """
    windows = window_grid(anchors, window_len, timing)
    by_id = {ev.id: ev for ev in events}
    acc: dict[tuple[str, str, int], float] = defaultdict(float)
    for citing, cited in citations:
        a, b = by_id.get(citing), by_id.get(cited)
        if a is None or b is None:
            continue
        period = assign_window(a.year, windows)
        if period is None:
            continue
        for cb in b.codes:
            for ca in a.codes:
                acc[(cb, ca, period)] += 1.0
    return [FlowEdge(s, t, v, p) for (s, t, p), v in sorted(acc.items())]


@dataclass(frozen=True)
class Stock:
    weighted: float = 0.0
    unweighted: float = 0.0


def citation_weighted_stock(
    windowed: Mapping[int, Iterable[EventRecord]],
    cmap: ConcordanceMap | None = None,
    strict: bool = True,
) -> dict[tuple[str, int], Stock]:
    """Patent stocks per ``(industry, window)``.

    A patent adds ``w * (1 + forward_citations)`` to the weighted stock and
    ``w`` to the unweighted one for every industry its codes map to, where
    ``w`` is the concordance weight. Patents with several codes count once per
    code.
    """
    weighted: dict[tuple[str, int], float] = defaultdict(float)
    unweighted: dict[tuple[str, int], float] = defaultdict(float)
    for anchor, evs in windowed.items():
        for ev in evs:
            for code in ev.codes:
                targets = ((code, 1.0),) if cmap is None else _mapped(code, cmap, strict)
                for ind, w in targets:
                    weighted[(ind, anchor)] += w * (1 + ev.forward_citations)
                    unweighted[(ind, anchor)] += w
    return {k: Stock(weighted[k], unweighted[k]) for k in sorted(weighted, key=str)}


# -- auxiliary panel ------------------------------------------------------


def parse_aux_panel(
    stream: TextIO,
    industry: str = "industry",
    period: str = "period",
    delimiter: str = ",",
) -> pd.DataFrame:
    """Read an industry x period table of controls into a frame indexed by (industry, period)."""
    df = pd.read_csv(stream, sep=delimiter, dtype={industry: str}, na_values=["", "NA"])
    for col in (industry, period):
        if col not in df.columns:
            raise MissingColumn(col, df.columns)
    df = df.rename(columns={industry: "industry", period: "period"})
    value_cols = [c for c in df.columns if c not in ("industry", "period")]
    for c in value_cols:
        if not pd.api.types.is_numeric_dtype(df[c]):
            bad = pd.to_numeric(df[c], errors="coerce").isna() & df[c].notna()
            line = int(np.flatnonzero(bad.to_numpy())[0]) + 2
            raise NonNumericValue(line, df[c][bad].iloc[0])
    if "deflator" in df and (df["deflator"].dropna() <= 0).any():
        raise NonPositiveDeflator("deflator must be > 0")
    if "prod_labor_share" in df:
        s = df["prod_labor_share"].dropna()
        if ((s < 0) | (s > 1)).any():
            raise DataError("prod_labor_share outside [0, 1]")
    if df.duplicated(["industry", "period"]).any():
        raise DataError("duplicate (industry, period) rows in auxiliary panel")
    return df.set_index(["industry", "period"]).sort_index()


def deflate(nominal: pd.Series, deflator: pd.Series) -> pd.Series:
    """Divide nominal values by the deflator with the same (industry, period) key."""
    missing = nominal.index.difference(deflator.index)
    if len(missing):
        raise MissingDeflator(missing[0])
    d = deflator.reindex(nominal.index)
    if d.isna().any():
        raise MissingDeflator(d.index[d.isna()][0])
    if (d <= 0).any():
        raise NonPositiveDeflator(f"non-positive deflator at {d.index[d <= 0][0]!r}")
    return nominal / d
