"""Experiment protocol: repeated fits and samplings, metric aggregation.

Seeds come from :func:`derive_seed`, a SHA-256 hash of the master seed,
generator name and run coordinates. A generator's runs therefore do not
depend on its position in the config or on the other generators.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from . import __version__
from .baselines import GeneratorSpec, fit_generator
from .coverage import CoverageConfig, coverage
from .dataset import (
    DataTable,
    SplitSpec,
    TableSchema,
    encode,
    fit_encoder,
    load_csv,
    preprocess_trips,
    split,
)
from .downstream import GbmConfig, fit_downstream_model
from .errors import DataError, TripEvalError
from .graph_metric import table_similarity
from .neighbors import nearest_distances
from .ot import OtConfig, solve_wasserstein
from .privacy import DEFAULT_ALPHA, DEFAULT_SWEEP, dcr_profile, percentile, rdcr

logger = logging.getLogger(__name__)


def derive_seed(master_seed: int, *parts: Any) -> int:
    """63-bit seed from SHA-256 over ``"tripeval-seed-v1|master|part|..."``."""
    text = "|".join(["tripeval-seed-v1", str(int(master_seed)), *map(str, parts)])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


# Capped samples are solved exactly: entropic iterations on clustered
# one-hot data stall well above the default tolerance at this size.
HARNESS_OT_DEFAULTS = {"exact_cutoff": 2000}


@dataclass(frozen=True)
class GeneratorEntry:
    name: str
    spec: GeneratorSpec | None = None
    files: tuple[str, ...] = ()

    def __post_init__(self):
        if (self.spec is None) == (not self.files):
            raise DataError(f"generator {self.name!r}: give exactly one of 'kind' or 'files'")


@dataclass(frozen=True)
class ZoneColumns:
    pickup: str
    dropoff: str
    drop_self_loops: bool = False


@dataclass
class ExperimentConfig:
    schema: TableSchema
    real_csv: str | None = None
    train_csv: str | None = None
    holdout_csv: str | None = None
    drop_columns: tuple[str, ...] = ()
    datetime_columns: tuple[str, ...] = ()
    split: SplitSpec = field(default_factory=lambda: SplitSpec(40000, 20000, 0))
    generators: tuple[GeneratorEntry, ...] = ()
    fits_per_model: int = 3
    samples_per_fit: int = 5
    sample_size: int = 20000
    ot: OtConfig = field(default_factory=lambda: OtConfig(**HARNESS_OT_DEFAULTS))
    coverage: CoverageConfig = field(default_factory=CoverageConfig)
    gbm: GbmConfig = field(default_factory=GbmConfig)
    alpha: float = DEFAULT_ALPHA
    alphas: tuple[float, ...] = DEFAULT_SWEEP
    metric_row_cap: int = 20000
    zone_columns: ZoneColumns | None = None
    master_seed: int = 0
    schema_path: str | None = None

    def __post_init__(self):
        if self.fits_per_model * self.samples_per_fit < 1:
            raise DataError("fits_per_model x samples_per_fit must be at least 1")
        if self.sample_size < 1:
            raise DataError("sample_size must be at least 1")
        if self.real_csv is None and (self.train_csv is None or self.holdout_csv is None):
            raise DataError("config needs 'real_csv' or both 'train_csv' and 'holdout_csv'")

    @classmethod
    def from_dict(cls, obj: Mapping, base_dir: str | Path = ".") -> "ExperimentConfig":
        base = Path(base_dir)

        def path(p):
            return None if p is None else str((base / p) if not Path(p).is_absolute() else Path(p))

        try:
            schema_ref = obj["schema"]
        except KeyError:
            raise DataError("config missing 'schema'") from None
        if isinstance(schema_ref, Mapping):
            schema, schema_path = TableSchema.from_dict(schema_ref), None
        else:
            schema_path = path(schema_ref)
            schema = TableSchema.load(schema_path)
        gens = []
        for g in obj.get("generators", []):
            name = g.get("name") or g.get("kind")
            if "files" in g:
                gens.append(GeneratorEntry(name, files=tuple(path(f) for f in g["files"])))
            else:
                spec = GeneratorSpec(g["kind"], g.get("noise_sigma", 0.01), g.get("seed", 0))
                gens.append(GeneratorEntry(name, spec))
        names = [g.name for g in gens]
        if len(set(names)) != len(names):
            raise DataError("generator names must be unique")
        pre = obj.get("preprocess", {})
        sp = obj.get("split", {})
        metrics = obj.get("metrics", {})
        zones = obj.get("zone_columns")
        try:
            return cls(
                schema=schema,
                schema_path=schema_path,
                real_csv=path(obj.get("real_csv")),
                train_csv=path(obj.get("train_csv")),
                holdout_csv=path(obj.get("holdout_csv")),
                drop_columns=tuple(pre.get("drop_columns", ())),
                datetime_columns=tuple(pre.get("datetime_columns", ())),
                split=SplitSpec(sp.get("train_size", 40000), sp.get("holdout_size", 20000),
                                sp.get("seed", 0)),
                generators=tuple(gens),
                fits_per_model=int(obj.get("fits_per_model", 3)),
                samples_per_fit=int(obj.get("samples_per_fit", 5)),
                sample_size=int(obj.get("sample_size", 20000)),
                ot=OtConfig(**{**HARNESS_OT_DEFAULTS, **metrics.get("ot", {})}),
                coverage=CoverageConfig(**metrics.get("coverage", {})),
                gbm=GbmConfig(**metrics.get("gbm", {})),
                alpha=float(metrics.get("alpha", DEFAULT_ALPHA)),
                alphas=tuple(float(a) for a in metrics.get("alphas", DEFAULT_SWEEP)),
                metric_row_cap=int(metrics.get("row_cap", 20000)),
                zone_columns=None if zones is None else ZoneColumns(**zones),
                master_seed=int(obj.get("master_seed", 0)),
            )
        except TypeError as exc:
            raise DataError(f"malformed config: {exc}") from None

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise DataError(f"config not found: {path}")
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f), path.parent)

    def echo(self) -> dict:
        out = {
            "real_csv": self.real_csv,
            "train_csv": self.train_csv,
            "holdout_csv": self.holdout_csv,
            "schema": self.schema.to_dict(),
            "preprocess": {"drop_columns": list(self.drop_columns),
                           "datetime_columns": list(self.datetime_columns)},
            "split": asdict(self.split),
            "generators": [
                {"name": g.name, "files": list(g.files)} if g.files else
                {"name": g.name, "kind": g.spec.kind.value, "noise_sigma": g.spec.noise_sigma}
                for g in self.generators
            ],
            "fits_per_model": self.fits_per_model,
            "samples_per_fit": self.samples_per_fit,
            "sample_size": self.sample_size,
            "metrics": {
                "ot": asdict(self.ot),
                "coverage": asdict(self.coverage),
                "gbm": asdict(self.gbm),
                "alpha": self.alpha,
                "alphas": list(self.alphas),
                "row_cap": self.metric_row_cap,
            },
            "zone_columns": None if self.zone_columns is None else asdict(self.zone_columns),
            "master_seed": self.master_seed,
        }
        return out


def _cap(t: DataTable, cap: int, seed: int) -> DataTable:
    if t.n_rows <= cap:
        return t
    idx = np.sort(np.random.default_rng(seed).choice(t.n_rows, cap, replace=False))
    return t.take(idx)


def _stats(values: Sequence[float]) -> dict:
    vals = [float(v) for v in values]
    n = len(vals)
    mean = math.fsum(vals) / n
    std = None
    if n > 1:
        if all(math.isfinite(v) for v in vals):
            std = math.sqrt(math.fsum((v - mean) ** 2 for v in vals) / (n - 1))
        else:
            std = math.nan
    return {"mean": mean, "std": std, "run_count": n, "values": vals}


class _Context:
    """Everything fixed once per experiment: split, encoder, capped reference sets."""

    def __init__(self, cfg: ExperimentConfig, train: DataTable, holdout: DataTable):
        self.cfg = cfg
        self.train = train
        self.holdout = holdout
        self.encoder = fit_encoder(train)
        cap_seed = derive_seed(cfg.master_seed, "reference", "cap")
        self.train_c = _cap(train, cfg.metric_row_cap, cap_seed)
        self.holdout_c = _cap(holdout, cfg.metric_row_cap, cap_seed + 1)
        self.e_train = encode(self.train_c, self.encoder)
        self.e_holdout = encode(self.holdout_c, self.encoder)
        self.rr = nearest_distances(self.e_train.data, self.e_train.data, exclude_self=True)
        target = cfg.schema.target
        self.target = target if target is not None and target in train.schema else None
        self.train_model = (
            fit_downstream_model(train, self.target, cfg.gbm) if self.target else None
        )


def reference_baselines(train: DataTable, holdout: DataTable, cfg: ExperimentConfig,
                        _ctx: _Context | None = None) -> dict:
    """No-synthetic-data reference values (the ``*_tr_te`` and ``dwn_tr_tr`` columns)."""
    ctx = _ctx or _Context(cfg, train, holdout)
    ot_cfg = _with_seed(cfg.ot, derive_seed(cfg.master_seed, "reference", "ot"))
    w = solve_wasserstein(ctx.e_train, ctx.e_holdout, ot_cfg)
    out = {
        "w1_tr_te": w.distance,
        "cov_tr_te": coverage(ctx.e_train, ctx.e_holdout, cfg.coverage),
    }
    if cfg.zone_columns is not None:
        z = cfg.zone_columns
        out["G_tr_te"] = table_similarity(train, holdout, z.pickup, z.dropoff,
                                          drop_self_loops=z.drop_self_loops)
    if ctx.train_model is not None:
        out["dwn_tr_tr"] = ctx.train_model.score(train)
        out["dwn_tr_te"] = ctx.train_model.score(holdout)
    return {"values": out, "ot": w.to_dict()}


def _with_seed(ot: OtConfig, seed: int) -> OtConfig:
    return OtConfig(**{**asdict(ot), "seed": seed})


def evaluate_sample(ctx: _Context, synth: DataTable, seed: int) -> tuple[dict, dict, dict]:
    """All per-sample metrics. Returns ``(metrics, sweep_ratios, provenance)``."""
    cfg = ctx.cfg
    metrics: dict[str, float] = {}
    prov: dict[str, Any] = {}
    synth_c = _cap(synth, cfg.metric_row_cap, derive_seed(seed, "cap"))
    e_syn = encode(synth_c, ctx.encoder)

    if ctx.train_model is not None:
        m_sy = fit_downstream_model(synth, ctx.target, cfg.gbm)
        metrics.update(
            dwn_tr_syn=ctx.train_model.score(synth),
            dwn_syn_syn=m_sy.score(synth),
            dwn_syn_tr=m_sy.score(ctx.train),
            dwn_syn_te=m_sy.score(ctx.holdout),
        )

    w_tr = solve_wasserstein(ctx.e_train, e_syn, _with_seed(cfg.ot, derive_seed(seed, "ot", "tr")))
    w_te = solve_wasserstein(ctx.e_holdout, e_syn, _with_seed(cfg.ot, derive_seed(seed, "ot", "te")))
    metrics.update(w1_tr_syn=w_tr.distance, w1_te_syn=w_te.distance)
    prov["ot"] = {"tr_syn": w_tr.to_dict(), "te_syn": w_te.to_dict()}

    if cfg.zone_columns is not None:
        z = cfg.zone_columns
        metrics["G_tr_syn"] = table_similarity(ctx.train, synth, z.pickup, z.dropoff,
                                               drop_self_loops=z.drop_self_loops)
        metrics["G_te_syn"] = table_similarity(ctx.holdout, synth, z.pickup, z.dropoff,
                                               drop_self_loops=z.drop_self_loops)

    metrics["cov_tr_syn"] = coverage(ctx.e_train, e_syn, cfg.coverage)
    metrics["cov_te_syn"] = coverage(ctx.e_holdout, e_syn, cfg.coverage)

    profile = dcr_profile(ctx.e_train, ctx.e_holdout, e_syn, rr=ctx.rr)
    main = rdcr(profile, cfg.alpha)
    metrics.update(
        dcr_rs=main.d_rs,
        dcr_hs=main.d_hs,
        rDCR=main.ratio,
        dcr_rr=percentile(profile.rr, cfg.alpha),
        dcr_ss=percentile(profile.ss, cfg.alpha),
    )
    if main.flag:
        prov["rdcr_flag"] = main.flag
    sweep = {}
    for a in cfg.alphas:
        r = rdcr(profile, a)
        sweep[repr(float(a))] = {"d_rs": r.d_rs, "d_hs": r.d_hs, "ratio": r.ratio}
    return metrics, sweep, prov


def _aggregate(runs: list[dict]) -> tuple[dict, list]:
    names = list(runs[0]["metrics"])
    metrics = {n: _stats([r["metrics"][n] for r in runs]) for n in names}
    sweep = []
    for key in runs[0]["sweep"]:
        entry = {"alpha": float(key)}
        for part in ("d_rs", "d_hs", "ratio"):
            s = _stats([r["sweep"][key][part] for r in runs])
            entry[part] = s["mean"]
            entry[part + "_std"] = s["std"]
        sweep.append(entry)
    return metrics, sweep


def _run_generator(ctx: _Context, entry: GeneratorEntry) -> dict:
    cfg = ctx.cfg
    runs = []
    if entry.files:
        for i, f in enumerate(entry.files):
            synth = load_csv(f, ctx.train.schema)
            if synth.missing_mask().any():
                raise DataError(f"{f}: synthetic file has missing cells")
            seed = derive_seed(cfg.master_seed, entry.name, "file", i)
            metrics, sweep, prov = evaluate_sample(ctx, synth, seed)
            runs.append({"file": f, "seed": seed, "metrics": metrics, "sweep": sweep, **prov})
    else:
        for fit in range(cfg.fits_per_model):
            fit_seed = derive_seed(cfg.master_seed, entry.name, fit, "fit")
            spec = GeneratorSpec(entry.spec.kind, entry.spec.noise_sigma, fit_seed)
            gen = fit_generator(ctx.train, spec)
            for s in range(cfg.samples_per_fit):
                seed = derive_seed(cfg.master_seed, entry.name, fit, s)
                synth = gen.sample(cfg.sample_size, seed)
                metrics, sweep, prov = evaluate_sample(ctx, synth, seed)
                runs.append({"fit": fit, "sample": s, "fit_seed": fit_seed, "seed": seed,
                             "metrics": metrics, "sweep": sweep, **prov})
    agg, sweep = _aggregate(runs)
    return {"metrics": agg, "sweep": sweep, "runs": runs, "error": None}


def load_real_tables(cfg: ExperimentConfig) -> tuple[DataTable, DataTable, dict]:
    """Load, preprocess and split the real data (split fixed once per experiment)."""
    info: dict[str, Any] = {}

    def prep(t):
        return preprocess_trips(t, cfg.drop_columns, cfg.datetime_columns, return_stats=True)

    if cfg.real_csv is not None:
        table, stats = prep(load_csv(cfg.real_csv, cfg.schema))
        info["preprocess"] = {"rows_in": stats.rows_in, "rows_out": stats.rows_out,
                              "unparseable_datetimes": stats.unparseable_datetimes}
        train, holdout = split(table, cfg.split)
    else:
        train, s1 = prep(load_csv(cfg.train_csv, cfg.schema))
        holdout, s2 = prep(load_csv(cfg.holdout_csv, cfg.schema))
        info["preprocess"] = {"rows_removed": s1.rows_removed + s2.rows_removed}
    info["n_train"], info["n_holdout"] = train.n_rows, holdout.n_rows
    return train, holdout, info


def run_experiment(cfg: ExperimentConfig, tables: tuple[DataTable, DataTable] | None = None) -> dict:
    """Run the protocol and return a JSON-serializable report.

    ``tables`` may supply an already split ``(train, holdout)`` pair.
    """
    if tables is None:
        train, holdout, info = load_real_tables(cfg)
    else:
        train, holdout = tables
        info = {"n_train": train.n_rows, "n_holdout": holdout.n_rows}
    ctx = _Context(cfg, train, holdout)
    ref = reference_baselines(train, holdout, cfg, ctx)
    report = {
        "toolkit": {"name": "tripeval", "version": __version__},
        "config": cfg.echo(),
        "provenance": {
            **info,
            "encoder": ctx.encoder.describe(),
            "seed_scheme": "sha256('tripeval-seed-v1|master|generator|fit|sample')[:8] >> 1",
            "metric_rows": {"train": ctx.train_c.n_rows, "holdout": ctx.holdout_c.n_rows},
            "reference_ot": ref["ot"],
            "graph_metric": "computed" if cfg.zone_columns else "not applicable",
        },
        "reference": {k: _stats([v]) for k, v in ref["values"].items()},
        "generators": {},
    }
    for entry in cfg.generators:
        logger.info("generator %s", entry.name)
        try:
            report["generators"][entry.name] = _run_generator(ctx, entry)
        except (TripEvalError, ArithmeticError, ValueError) as exc:
            logger.error("generator %s failed: %s", entry.name, exc)
            report["generators"][entry.name] = {
                "metrics": {}, "sweep": [], "runs": [],
                "error": f"{type(exc).__name__}: {exc}",
            }
    return report


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=False) + "\n"
