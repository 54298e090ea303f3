"""Staged pipeline: ingest -> build -> metrics -> spill -> panel -> estimate -> report.

Every stage reads only artifacts registered in the output directory's
manifest (checked against their recorded hash) and registers what it writes.
The manifest is a sorted ``key=value`` text file without timestamps, so two
runs on identical inputs produce identical manifests.
"""

from __future__ import annotations

import csv
import hashlib
import os
import shutil
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
import pandas as pd

from duplexnet import ingest as ing
from duplexnet.config import PATH_KEYS, PipelineConfig
from duplexnet.econ import GmmOptions, RegressionSpec, estimate
from duplexnet.errors import ConfigError, DataError, DuplexError, MissingDeflator
from duplexnet.netcore import (
    DIRECTIONS,
    LAYERS,
    FlowMatrix,
    IndustryIndex,
    build_duplex,
    input_shares,
    output_shares,
    read_triplet_csv,
    write_triplet_csv,
)
from duplexnet.netmetrics import (
    NetworkStats,
    cosine_similarity,
    degree_strength,
    export_filtered_edges,
    network_stats,
    pagerank,
    top_k_ranking,
)
from duplexnet.panel import PanelDataset, TransformPlan, assemble, transform
from duplexnet.report import Cell, dp_tp_layout, format_csv, format_text, single_layout, table_rows
from duplexnet.spill import spillover, spillover_weighted, threshold_links

MANIFEST = "manifest.txt"
LOCK = ".duplexnet.lock"
STAGES = ("ingest", "build", "metrics", "spill", "panel", "estimate", "report")


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class Manifest:
    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.path = out_dir / MANIFEST
        self.entries: dict[str, str] = {}
        if self.path.exists():
            for line in self.path.read_text().splitlines():
                if "=" in line:
                    k, v = line.split("=", 1)
                    self.entries[k] = v

    def save(self) -> None:
        text = "".join(f"{k}={self.entries[k]}\n" for k in sorted(self.entries))
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(text)
        os.replace(tmp, self.path)

    def register(self, rel: str) -> None:
        self.entries[f"artifact.{rel}"] = "sha256:" + sha256(self.out_dir / rel)

    def require(self, rel: str, stage: str) -> Path:
        """Path of a registered artifact whose content still matches its hash."""
        key = f"artifact.{rel}"
        p = self.out_dir / rel
        if key not in self.entries:
            raise DataError(f"artifact {rel} is not in the manifest; run the {stage} stage first")
        if not p.is_file() or "sha256:" + sha256(p) != self.entries[key]:
            raise DataError(f"artifact {rel} was modified after the {stage} stage wrote it")
        return p

    def artifacts(self, prefix: str) -> list[str]:
        return sorted(k[len("artifact."):] for k in self.entries if k.startswith(f"artifact.{prefix}"))

    def drop_prefix(self, prefix: str) -> None:
        for k in [k for k in self.entries if k.startswith(f"artifact.{prefix}")]:
            del self.entries[k]


@contextmanager
def output_lock(out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = out_dir / LOCK
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigError(f"output directory {out_dir} is locked ({LOCK} exists)") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


@dataclass
class Context:
    cfg: PipelineConfig
    manifest: Manifest

    @property
    def out(self) -> Path:
        return self.manifest.out_dir

    def write(self, rel: str, writer: Callable) -> None:
        p = self.out / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        with open(p, "w", newline="") as fh:
            writer(fh)
        self.manifest.register(rel)

    def write_frame(self, rel: str, df: pd.DataFrame) -> None:
        self.write(rel, lambda fh: df.to_csv(fh, index=False, float_format="%.10g", na_rep="NA", lineterminator="\n"))

    def read_frame(self, rel: str, stage: str) -> pd.DataFrame:
        p = self.manifest.require(rel, stage)
        return pd.read_csv(p, dtype={"industry": str, "source": str, "target": str}, na_values=["NA"], keep_default_na=False, float_precision="round_trip")


# -- stages ---------------------------------------------------------------


def stage_ingest(ctx: Context) -> None:
    cfg = ctx.cfg
    p = cfg.ingest
    for key in PATH_KEYS:
        path = cfg.path(key)
        ctx.manifest.entries[f"input.{key}"] = f"{path.name} sha256:{sha256(path)}"
    anchors = sorted(p.anchors)

    with open(cfg.path("concordance"), newline="") as fh:
        cmap = ing.parse_concordance(fh)
    with open(cfg.path("market_edges"), newline="") as fh:
        market = ing.parse_flow_edgelist(fh)
    with open(cfg.path("innovation_edges"), newline="") as fh:
        innov = ing.parse_flow_edgelist(fh)
    market = [e for e in ing.aggregate_edges(market) if e.period in anchors]
    innov = ing.apply_concordance(innov, cmap, p.concordance_sides, p.strict_concordance)
    innov = [e for e in ing.aggregate_edges(innov) if e.period in anchors]
    for name, edges in (("market", market), ("innovation", innov)):
        present = {e.period for e in edges}
        if present != set(anchors):
            raise DataError(f"{name} edges lack periods {sorted(set(anchors) - present)}")

    with open(cfg.path("events"), newline="") as fh:
        events = ing.parse_events(fh)
    windowed = ing.window_events(events, p.window_len, anchors, p.timing)
    stocks = ing.citation_weighted_stock(windowed, cmap, p.strict_concordance)

    with open(cfg.path("aux"), newline="") as fh:
        aux = ing.parse_aux_panel(fh)
    cols = [c for c in p.deflate if c in aux.columns]
    if cols and "deflator" not in aux.columns:
        raise MissingDeflator("aux panel has no deflator column")
    for c in cols:
        aux[c] = aux[c] / aux["deflator"]

    def edges_writer(edges):
        def w(fh):
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["source", "target", "value", "period"])
            for e in sorted(edges, key=lambda e: (e.period, e.source, e.target)):
                out.writerow([e.source, e.target, format(e.value, ".17g"), e.period])
        return w

    ctx.write("ingest/market_edges.csv", edges_writer(market))
    ctx.write("ingest/innovation_edges.csv", edges_writer(innov))
    st = pd.DataFrame(
        [(ind, per, s.weighted, s.unweighted) for (ind, per), s in stocks.items()],
        columns=["industry", "period", "weighted", "unweighted"],
    ).sort_values(["industry", "period"])
    ctx.write("ingest/patent_stocks.csv", lambda fh: st.to_csv(fh, index=False, float_format="%.17g", lineterminator="\n"))
    ctx.write("ingest/aux.csv", lambda fh: aux.reset_index().to_csv(fh, index=False, float_format="%.17g", na_rep="NA", lineterminator="\n"))


def _read_edges(ctx: Context, rel: str) -> list[ing.FlowEdge]:
    with open(ctx.manifest.require(rel, "ingest"), newline="") as fh:
        return ing.parse_flow_edgelist(fh)


def stage_build(ctx: Context) -> None:
    cfg = ctx.cfg
    anchors = sorted(cfg.ingest.anchors)
    market = _read_edges(ctx, "ingest/market_edges.csv")
    innov = _read_edges(ctx, "ingest/innovation_edges.csv")
    st = ctx.read_frame("ingest/patent_stocks.csv", "ingest")
    stock = {(r.industry, int(r.period)): float(r.weighted) for r in st.itertuples()}
    codes = sorted({e.source for e in market} | {e.target for e in market})
    index = IndustryIndex(tuple(codes))
    stray = sorted({c for e in innov for c in (e.source, e.target) if c not in index})
    if stray:
        raise DataError(f"innovation layer codes not in the market index: {stray[:5]}")
    stock = {k: v for k, v in stock.items() if k[0] in index}
    net = build_duplex(market, innov, anchors, stock, index, cfg.network.dw_variant)

    ctx.manifest.drop_prefix("network/")
    ctx.write("network/index.csv", index.write_csv)
    rows = []
    aux = ctx.read_frame("ingest/aux.csv", "ingest").set_index(["industry", "period"])
    for per in anchors:
        for layer in LAYERS:
            fm = net.flow(per, layer)
            ctx.write(f"network/flows_{layer}_{per}.csv", lambda fh, m=fm.matrix: write_triplet_csv(m, index, fh))
        nominal = net.size(per, "market").values
        if cfg.network.deflate_market_size:
            if "deflator" not in aux.columns:
                raise MissingDeflator("market size deflation needs a deflator column")
            keys = pd.MultiIndex.from_tuples([(c, per) for c in codes])
            defl = aux["deflator"].reindex(keys).to_numpy(dtype=float)
            real = nominal / defl
        else:
            real = nominal
        unw = {k[0]: v for k, v in st.set_index(["industry", "period"])["unweighted"].items() if k[1] == per}
        for i, c in enumerate(codes):
            rows.append((c, per, real[i], nominal[i], net.size(per, "innovation").values[i], unw.get(c, 0.0)))
    sizes = pd.DataFrame(
        rows, columns=["industry", "period", "size_market", "size_market_nominal", "size_innovation", "patents_unweighted"]
    )
    ctx.write("network/sizes.csv", lambda fh: sizes.to_csv(fh, index=False, float_format="%.17g", na_rep="NA", lineterminator="\n"))


def _load_network(ctx: Context):
    cfg = ctx.cfg
    with open(ctx.manifest.require("network/index.csv", "build"), newline="") as fh:
        index = IndustryIndex.read_csv(fh)
    shares, flows = {}, {}
    for per in sorted(cfg.ingest.anchors):
        for layer in LAYERS:
            with open(ctx.manifest.require(f"network/flows_{layer}_{per}.csv", "build"), newline="") as fh:
                fm = FlowMatrix(per, layer, read_triplet_csv(fh, index), index)
            flows[(per, layer)] = fm
            shares[(per, layer, "up")] = input_shares(fm)
            shares[(per, layer, "dw")] = output_shares(fm, cfg.network.dw_variant)
    sizes = ctx.read_frame("network/sizes.csv", "build").set_index(["industry", "period"])
    return index, flows, shares, sizes


def _size_vector(sizes: pd.DataFrame, index: IndustryIndex, per, layer: str) -> np.ndarray:
    col = "size_market" if layer == "market" else "size_innovation"
    keys = pd.MultiIndex.from_tuples([(c, per) for c in index.codes])
    return sizes[col].reindex(keys).to_numpy(dtype=float)


def stage_metrics(ctx: Context) -> None:
    cfg, m = ctx.cfg, ctx.cfg.metrics
    index, flows, shares, sizes = _load_network(ctx)
    anchors = sorted(cfg.ingest.anchors)
    labels = {}
    if cfg.paths.labels:
        with open(cfg.path("labels"), newline="") as fh:
            labels = {r["industry"]: r["label"] for r in csv.DictReader(fh)}

    ctx.manifest.drop_prefix("metrics/")
    cent, stats, sims = [], [], []
    for per in anchors:
        for layer in LAYERS:
            size = _size_vector(sizes, index, per, layer)
            for d in DIRECTIONS:
                w = shares[(per, layer, d)]
                pr = pagerank(w, damping=m.damping)
                deg, strength = degree_strength(w, "out", threshold=m.stats_threshold or None)
                for i, c in enumerate(index.codes):
                    cent.append((c, per, layer, d, pr.values[i], deg.values[i], strength.values[i]))
                stats.append((per, layer, d, _stats_or_nan(w, m.stats_threshold, size, True)))
                sims.append((per, layer, d, _stats_or_nan(cosine_similarity(w), m.similarity_threshold, size, False)))
            ranking = top_k_ranking(size / np.nanmean(size), index, m.top_k, labels, per)
            ctx.write(f"metrics/ranking_{layer}_{per}.csv", ranking.write_csv)

    ctx.write_frame(
        "metrics/centrality.csv",
        pd.DataFrame(cent, columns=["industry", "period", "layer", "direction", "pagerank", "degree", "strength"]),
    )
    for rel, recs in (("metrics/network_stats.csv", stats), ("metrics/similarity_stats.csv", sims)):
        df = pd.DataFrame(
            [(p, l, d, *s.as_dict().values()) for p, l, d, s in recs],
            columns=["period", "layer", "direction", *NetworkStats.FIELDS],
        )
        ctx.write_frame(rel, df)

    half = (len(anchors) + 1) // 2
    windows = {f"{anchors[0]}-{anchors[half - 1]}": anchors[:half], f"{anchors[half]}-{anchors[-1]}": anchors[half:]}
    for layer in LAYERS:
        for d in DIRECTIONS:
            pool = [shares[(p, layer, d)].oriented for p in anchors]
            rows = []
            for name, pers in windows.items():
                if not pers:
                    continue
                mats = [shares[(p, layer, d)].oriented for p in pers]
                # oriented rows are focal industries: (partner, focal, weight)
                for src, tgt, wt in export_filtered_edges(mats, index, pool):
                    rows.append((name, tgt, src, wt))
            df = pd.DataFrame(rows, columns=["window", "focal", "partner", "weight"])
            ctx.write_frame(f"metrics/filtered_edges_{layer}_{d}.csv", df)


def _stats_or_nan(w, threshold, sizes, percent) -> NetworkStats:
    try:
        return network_stats(w, threshold=threshold, sizes=sizes, percent=percent)
    except DuplexError:
        return NetworkStats(*([float("nan")] * len(NetworkStats.FIELDS)))


def stage_spill(ctx: Context) -> None:
    cfg, s = ctx.cfg, ctx.cfg.spill
    index, _, shares, sizes = _load_network(ctx)
    ctx.manifest.drop_prefix("spill/")
    data: dict[str, list] = {"industry": [], "period": []}
    counts = []
    for per in sorted(cfg.ingest.anchors):
        data["industry"] += list(index.codes)
        data["period"] += [per] * len(index)
        for layer in LAYERS:
            a = _size_vector(sizes, index, per, layer)
            a = np.nan_to_num(a, nan=0.0)
            for d in DIRECTIONS:
                w = shares[(per, layer, d)]
                links = threshold_links(w, s.theta)
                off = links.links.astype(int).copy()
                np.fill_diagonal(off, 0)
                per_row = off.sum(axis=1)
                counts.append((per, layer, d, int(per_row.max()), float(per_row.mean())))
                v = spillover(links, a) if s.variant == "binary" else spillover_weighted(w, a)
                data.setdefault(f"spill_{layer}_{d}", []).extend(v.values.tolist())
    ctx.write_frame("spill/spillovers.csv", pd.DataFrame(data))
    ctx.write_frame(
        "spill/link_counts.csv",
        pd.DataFrame(counts, columns=["period", "layer", "direction", "max_links_per_row", "mean_links_per_row"]),
    )


NETWORK_COLUMNS = (
    ["size_market", "size_innovation"]
    + [f"pr_{l}_{d}" for l in LAYERS for d in DIRECTIONS]
    + [f"spill_{l}_{d}" for l in LAYERS for d in DIRECTIONS]
)


def stage_panel(ctx: Context) -> None:
    p = ctx.cfg.panel
    keys = ["industry", "period"]
    sizes = ctx.read_frame("network/sizes.csv", "build")[keys + ["size_market", "size_innovation"]]
    cent = ctx.read_frame("metrics/centrality.csv", "metrics")
    cent["col"] = "pr_" + cent["layer"] + "_" + cent["direction"]
    pr = cent.pivot_table(index=keys, columns="col", values="pagerank").reset_index()
    pr.columns.name = None
    spill = ctx.read_frame("spill/spillovers.csv", "spill")
    aux = ctx.read_frame("ingest/aux.csv", "ingest")
    missing = [c for c in p.controls if c not in aux.columns]
    if missing:
        raise DataError(f"aux panel lacks control columns {missing}")
    aux = aux[keys + list(p.controls)]
    regcols = NETWORK_COLUMNS + list(p.controls)
    panel = assemble([sizes, pr, spill, aux], balanced=p.balanced, required=regcols)
    if len(panel) == 0:
        raise DataError("no industry survives the balanced-panel filter")
    plan = TransformPlan(
        scale=NETWORK_COLUMNS,
        log=regcols,
        log_exempt=p.log_exempt,
        outliers=regcols,
        iqr_multiplier=p.iqr_multiplier,
    )
    out = transform(panel, plan)
    ctx.manifest.drop_prefix("panel/")
    path = ctx.out / "panel" / "panel.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    out.write_csv(path)
    ctx.manifest.register("panel/panel.csv")
    ctx.manifest.register("panel/panel.provenance.json")


def _layout(cfg: PipelineConfig) -> list[Cell]:
    e = cfg.estimate
    if e.layout == "dp_tp":
        return dp_tp_layout()
    return single_layout(e.dependent, e.regressors)


def cell_spec(cfg: PipelineConfig, cell: Cell) -> RegressionSpec:
    e = cfg.estimate
    regs = list(cell.regressors)
    if cell.controls:
        regs += [f"L1.{c}" for c in cfg.panel.controls]
    gmm = GmmOptions(
        max_instrument_lag=e.max_instrument_lag,
        collapsed=e.collapsed,
        steps=e.steps,
        time_dummies=e.time_dummies,
    )
    return RegressionSpec(cell.dependent, tuple(regs), e.estimator, e.weights or None, gmm=gmm, se=e.se)


def stage_estimate(ctx: Context) -> None:
    ctx.manifest.require("panel/panel.provenance.json", "panel")
    panel = PanelDataset.read_csv(ctx.manifest.require("panel/panel.csv", "panel"))
    ctx.manifest.drop_prefix("estimate/")
    for cell in _layout(ctx.cfg):
        try:
            res = estimate(cell_spec(ctx.cfg, cell), panel)
        except DuplexError as exc:
            exc.args = (f"cell {cell.key} ({cell.dependent}): {exc}",)
            raise
        coef = f"estimate/cell_{cell.key}_coefs.csv"
        diag = f"estimate/cell_{cell.key}_diagnostics.csv"
        (ctx.out / "estimate").mkdir(parents=True, exist_ok=True)
        with open(ctx.out / coef, "w", newline="") as fc, open(ctx.out / diag, "w", newline="") as fd:
            res.write_csv(fc, fd)
        ctx.manifest.register(coef)
        ctx.manifest.register(diag)


@dataclass
class CellResult:
    """Coefficient table of one estimated cell, as read back from disk."""

    names: list[str]
    params: np.ndarray
    std_errors: np.ndarray
    codes: list[str]
    ar1_p: float
    ar2_p: float
    sargan_p: float
    r2_proxy: float
    n_obs: int


def read_cell(ctx: Context, key: str) -> CellResult | None:
    coef = f"estimate/cell_{key}_coefs.csv"
    if f"artifact.{coef}" not in ctx.manifest.entries:
        return None
    c = ctx.read_frame(coef, "estimate")
    d = ctx.read_frame(f"estimate/cell_{key}_diagnostics.csv", "estimate").iloc[0]
    return CellResult(
        list(c["regressor"]),
        c["coef"].to_numpy(dtype=float),
        c["se"].to_numpy(dtype=float),
        [str(x) for x in c["code"]],
        float(d["AR1"]),
        float(d["AR2"]),
        float(d["Sargan"]),
        float(d["R2"]),
        int(d["N"]),
    )


def stage_report(ctx: Context) -> None:
    layout = _layout(ctx.cfg)
    results = {c.key: r for c in layout if (r := read_cell(ctx, c.key)) is not None}
    rows = table_rows(layout, results)
    ctx.manifest.drop_prefix("report/")
    ctx.write("report/table.csv", lambda fh: fh.write(format_csv(rows)))
    ctx.write("report/table.txt", lambda fh: fh.write(format_text(rows)))


STAGE_FUNCS = {
    "ingest": stage_ingest,
    "build": stage_build,
    "metrics": stage_metrics,
    "spill": stage_spill,
    "panel": stage_panel,
    "estimate": stage_estimate,
    "report": stage_report,
}


class StageError(Exception):
    def __init__(self, stage: str, error: DuplexError):
        super().__init__(f"stage {stage}: {error}")
        self.stage = stage
        self.error = error


def run_stages(cfg: PipelineConfig, stages) -> Path:
    """Run ``stages`` in order under the output-directory lock."""
    cfg.validate(need_inputs="ingest" in stages)
    out = cfg.output_dir
    with output_lock(out):
        manifest = Manifest(out)
        for k, v in cfg.parameters().items():
            if not k.startswith("simulate."):
                manifest.entries[f"param.{k}"] = v
        ctx = Context(cfg, manifest)
        for stage in stages:
            try:
                STAGE_FUNCS[stage](ctx)
            except DuplexError as exc:
                manifest.save()
                raise StageError(stage, exc) from exc
            manifest.entries[f"stage.{stage}"] = "done"
            manifest.save()
    return out / MANIFEST


def simulate(cfg: PipelineConfig) -> dict[str, Path]:
    """Write synthetic raw inputs to the configured input paths."""
    from duplexnet.synthlab import write_synthetic_inputs

    s = cfg.simulate
    for key in PATH_KEYS:
        if not getattr(cfg.paths, key):
            raise ConfigError(f"paths.{key} must be set to know where to write synthetic input")
    with tempfile.TemporaryDirectory() as tmp:
        made = write_synthetic_inputs(
            tmp,
            n_industries=s.n_industries,
            periods=sorted(cfg.ingest.anchors),
            window_len=cfg.ingest.window_len,
            seed=s.seed,
            density=s.density,
        )
        out = {}
        for key in PATH_KEYS:
            dest = cfg.path(key)
            dest.parent.mkdir(parents=True, exist_ok=True)
            shutil.copyfile(getattr(made, key), dest)
            out[key] = dest
    return out
