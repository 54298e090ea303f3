"""Flow matrices, share matrices and node sizes for the two network layers.

Orientation convention used everywhere: ``matrix[i, j]`` is the flow from
industry ``j`` to industry ``i`` (``i``'s input from ``j``). Rows are buyers
(or citing industries), columns are suppliers (or cited industries).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Literal, Mapping, Sequence, TextIO

import numpy as np

from duplexnet.errors import LayerSizeSourceMissing, UnknownCode, ZeroDispersion
from duplexnet.ingest import FlowEdge, Period

Layer = Literal["market", "innovation"]
Direction = Literal["up", "dw"]
LAYERS: tuple[Layer, ...] = ("market", "innovation")
DIRECTIONS: tuple[Direction, ...] = ("up", "dw")


@dataclass(frozen=True)
class IndustryIndex:
    """Bijection between industry codes and matrix positions."""

    codes: tuple[str, ...]
    _pos: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        codes = tuple(str(c) for c in self.codes)
        if len(set(codes)) != len(codes):
            raise ValueError("industry codes must be unique")
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "_pos", {c: i for i, c in enumerate(codes)})

    @classmethod
    def from_edges(cls, edges: Iterable[FlowEdge]) -> "IndustryIndex":
        codes = set()
        for e in edges:
            codes.add(e.source)
            codes.add(e.target)
        return cls(tuple(sorted(codes)))

    def __len__(self) -> int:
        return len(self.codes)

    def __contains__(self, code: str) -> bool:
        return code in self._pos

    def position(self, code: str) -> int:
        try:
            return self._pos[code]
        except KeyError:
            raise UnknownCode(code) from None

    def write_csv(self, stream: TextIO) -> None:
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["position", "code"])
        for i, c in enumerate(self.codes):
            w.writerow([i, c])

    @classmethod
    def read_csv(cls, stream: TextIO) -> "IndustryIndex":
        rows = list(csv.DictReader(stream))
        rows.sort(key=lambda r: int(r["position"]))
        return cls(tuple(r["code"] for r in rows))


@dataclass(frozen=True)
class FlowMatrix:
    period: Period
    layer: Layer
    matrix: np.ndarray
    index: IndustryIndex

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        n = len(self.index)
        if m.shape != (n, n):
            raise ValueError(f"matrix shape {m.shape} does not match index of size {n}")
        if not np.all(np.isfinite(m)) or (m < 0).any():
            raise ValueError("flow matrix entries must be finite and >= 0")
        object.__setattr__(self, "matrix", m)

    def triplets(self) -> list[tuple[str, str, float]]:
        """Nonzero entries as ``(supplier, buyer, value)``."""
        rows, cols = np.nonzero(self.matrix)
        return [
            (self.index.codes[j], self.index.codes[i], float(self.matrix[i, j]))
            for i, j in zip(rows, cols)
        ]


@dataclass(frozen=True)
class ShareMatrix:
    period: Period
    layer: Layer
    direction: Direction
    matrix: np.ndarray
    index: IndustryIndex

    @property
    def oriented(self) -> np.ndarray:
        """The matrix with one row per focal industry and its partners' shares.

        ``up`` rows are already per buyer (input mix). ``dw`` is transposed so
        that row ``i`` holds the shares of ``i``'s output taken by each customer.
        """
        return self.matrix if self.direction == "up" else self.matrix.T


@dataclass(frozen=True)
class NodeSizeVector:
    period: Period
    layer: Layer
    values: np.ndarray
    index: IndustryIndex
    normalization: Literal["raw", "per-period-mean", "global-sd"] = "raw"


def build_flow_matrix(
    edges: Iterable[FlowEdge],
    index: IndustryIndex,
    period: Period | None = None,
    layer: Layer = "market",
) -> FlowMatrix:
    """Accumulate edges into a dense matrix, ``m[i, j] += value`` for every ``j -> i``.

    When ``period`` is given, edges stamped with another period are skipped.
    """
    n = len(index)
    m = np.zeros((n, n))
    for e in edges:
        if period is not None and e.period is not None and e.period != period:
            continue
        m[index.position(e.target), index.position(e.source)] += e.value
    return FlowMatrix(period, layer, m, index)


def _safe_divide(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros_like(num, dtype=float)
    np.divide(num, den, out=out, where=den != 0)
    return out


def input_shares(fm: FlowMatrix) -> ShareMatrix:
    """Row-normalised flows: each buyer's input mix."""
    rs = fm.matrix.sum(axis=1, keepdims=True)
    return ShareMatrix(fm.period, fm.layer, "up", _safe_divide(fm.matrix, rs), fm.index)


def output_shares(
    fm: FlowMatrix, variant: Literal["column", "row-owner"] = "column"
) -> ShareMatrix:
    """Output shares.

    ``column`` (default): ``w[i, j] = flow[i, j] / sum_k flow[k, j]``, the share
    of supplier ``j``'s output delivered to ``i``; column-stochastic.

    ``row-owner``: ``w[i, j] = flow[i, j] / sum_k flow[k, i]``, i.e. divided by
    the total output of the row industry ``i``. Not stochastic in general.
    """
    cs = fm.matrix.sum(axis=0)
    if variant == "column":
        w = _safe_divide(fm.matrix, cs[None, :])
    elif variant == "row-owner":
        w = _safe_divide(fm.matrix, cs[:, None])
    else:
        raise ValueError(f"unknown output share variant {variant!r}")
    return ShareMatrix(fm.period, fm.layer, "dw", w, fm.index)


def node_sizes(
    fm: FlowMatrix,
    layer: Layer | None = None,
    stock: Mapping[str, float] | np.ndarray | None = None,
) -> NodeSizeVector:
    """Industry sizes.

    Market layer: total output, i.e. the column sum of the flow matrix.
    Innovation layer: the patent stock must be supplied, either aligned with
    the index or as a code mapping (missing codes get 0).
    """
    layer = layer or fm.layer
    if layer == "market":
        return NodeSizeVector(fm.period, layer, fm.matrix.sum(axis=0), fm.index)
    if stock is None:
        raise LayerSizeSourceMissing("innovation sizes need a patent stock")
    if isinstance(stock, Mapping):
        values = np.array([float(stock.get(c, 0.0)) for c in fm.index.codes])
    else:
        values = np.asarray(stock, dtype=float)
        if values.shape != (len(fm.index),):
            raise ValueError("stock vector does not match the index")
    if (values < 0).any():
        raise ValueError("patent stocks must be >= 0")
    return NodeSizeVector(fm.period, layer, values, fm.index)


def normalize_sizes(
    sizes: NodeSizeVector | Sequence[NodeSizeVector],
    mode: Literal["per-period-mean", "global-sd"] = "per-period-mean",
) -> NodeSizeVector | list[NodeSizeVector]:
    """Normalise sizes by the cross-industry mean of each period, or by the
    standard deviation pooled over industries and all given periods."""
    single = isinstance(sizes, NodeSizeVector)
    vecs = [sizes] if single else list(sizes)
    if not vecs or any(v.values.size == 0 for v in vecs):
        raise ValueError("empty size vector")
    out = []
    if mode == "per-period-mean":
        for v in vecs:
            mean = v.values.mean()
            if mean == 0:
                raise ZeroDispersion(f"mean size is zero in period {v.period}")
            out.append(NodeSizeVector(v.period, v.layer, v.values / mean, v.index, mode))
    elif mode == "global-sd":
        pooled = np.concatenate([v.values for v in vecs])
        sd = pooled.std(ddof=1) if pooled.size > 1 else 0.0
        if not sd > 0:
            raise ZeroDispersion("sizes have zero dispersion")
        out = [NodeSizeVector(v.period, v.layer, v.values / sd, v.index, mode) for v in vecs]
    else:
        raise ValueError(f"unknown normalisation {mode!r}")
    return out[0] if single else out


def reconstruct_flows(up: ShareMatrix, dw: ShareMatrix, fm_or_marginals=None) -> tuple[np.ndarray, np.ndarray]:
    """Rebuild flows from shares and marginals (row sums for ``up``, column sums for ``dw``)."""
    if isinstance(fm_or_marginals, FlowMatrix):
        rs = fm_or_marginals.matrix.sum(axis=1)
        cs = fm_or_marginals.matrix.sum(axis=0)
    else:
        rs, cs = fm_or_marginals
    return up.matrix * np.asarray(rs)[:, None], dw.matrix * np.asarray(cs)[None, :]


@dataclass
class PeriodNetwork:
    flows: dict[Layer, FlowMatrix]
    shares: dict[tuple[Layer, Direction], ShareMatrix]
    sizes: dict[Layer, NodeSizeVector]


@dataclass
class DuplexPanelNetwork:
    """Market and innovation layers over a common index for a sequence of periods."""

    index: IndustryIndex
    periods: list[Period]
    networks: dict[Period, PeriodNetwork]

    def flow(self, period: Period, layer: Layer) -> FlowMatrix:
        return self.networks[period].flows[layer]

    def share(self, period: Period, layer: Layer, direction: Direction) -> ShareMatrix:
        return self.networks[period].shares[(layer, direction)]

    def size(self, period: Period, layer: Layer) -> NodeSizeVector:
        return self.networks[period].sizes[layer]


def build_duplex(
    market_edges: Sequence[FlowEdge],
    innovation_edges: Sequence[FlowEdge],
    periods: Sequence[Period],
    innovation_stock: Mapping[tuple[str, Period], float],
    index: IndustryIndex | None = None,
    dw_variant: Literal["column", "row-owner"] = "column",
) -> DuplexPanelNetwork:
    """Assemble the duplex network.

    Industries missing from a period keep empty rows and columns so that the
    index is shared across layers and periods.
    """
    if index is None:
        codes = set()
        for e in list(market_edges) + list(innovation_edges):
            codes.update((e.source, e.target))
        codes.update(code for code, _ in innovation_stock)
        index = IndustryIndex(tuple(sorted(codes)))
    by_period: dict[tuple[Layer, Period], list[FlowEdge]] = {}
    for layer, edges in (("market", market_edges), ("innovation", innovation_edges)):
        for e in edges:
            by_period.setdefault((layer, e.period), []).append(e)
    networks = {}
    for p in periods:
        flows, shares, sizes = {}, {}, {}
        for layer in LAYERS:
            fm = build_flow_matrix(by_period.get((layer, p), []), index, p, layer)
            flows[layer] = fm
            shares[(layer, "up")] = input_shares(fm)
            shares[(layer, "dw")] = output_shares(fm, dw_variant)
        sizes["market"] = node_sizes(flows["market"], "market")
        stock = {code: v for (code, per), v in innovation_stock.items() if per == p}
        sizes["innovation"] = node_sizes(flows["innovation"], "innovation", stock)
        networks[p] = PeriodNetwork(flows, shares, sizes)
    return DuplexPanelNetwork(index, list(periods), networks)


# -- serialisation --------------------------------------------------------


def write_dense_csv(matrix: np.ndarray, index: IndustryIndex, stream: TextIO) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow([""] + list(index.codes))
    for code, row in zip(index.codes, matrix):
        w.writerow([code] + [format(float(x), ".10g") for x in row])


def read_dense_csv(stream: TextIO) -> tuple[np.ndarray, IndustryIndex]:
    rows = list(csv.reader(stream))
    codes = tuple(rows[0][1:])
    m = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
    if tuple(r[0] for r in rows[1:]) != codes:
        raise ValueError("row and column labels differ")
    return m, IndustryIndex(codes)


def write_triplet_csv(matrix: np.ndarray, index: IndustryIndex, stream: TextIO) -> None:
    """Nonzero entries as ``row,col,value`` with codes (``row`` receives from ``col``)."""
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["row", "col", "value"])
    rows, cols = np.nonzero(matrix)
    for i, j in zip(rows, cols):
        w.writerow([index.codes[i], index.codes[j], format(float(matrix[i, j]), ".17g")])


def read_triplet_csv(stream: TextIO, index: IndustryIndex) -> np.ndarray:
    n = len(index)
    m = np.zeros((n, n))
    for r in csv.DictReader(stream):
        m[index.position(r["row"]), index.position(r["col"])] = float(r["value"])
    return m
