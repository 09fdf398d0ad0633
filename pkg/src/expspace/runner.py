"""Experiment orchestration: config parsing, the runner, report emission.

One experiment evaluates every configured (space, method) pair on the test
samples of one dataset and one trained model, producing a row of metrics per
pair.  Per-sample seeds are derived from (seed, sample index, salt) so the
aggregate is independent of evaluation order.  Sparsity cells are suppressed
whenever faithfulness is below 50%.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import metrics as met
from .attribution import (
    BACKPROP_METHODS,
    METHODS,
    MethodConfig,
    calibrate_decomposition,
    compute,
)
from .data import SynthSpec, load_ucr_tsv, synth_dataset
from .errors import ConfigError, ExpSpaceError
from .net import load_model, wrap
from .plots import emit_attribution_plot
from .spaces import Space, space_from_config


def derive_seed(seed: int, sample_index: int, salt: int) -> int:
    state = np.random.SeedSequence([seed, sample_index, salt]).generate_state(1)[0]
    return int(state)


@dataclass
class ExperimentConfig:
    dataset: dict
    model_path: str
    spaces: list
    methods: list
    method_config: MethodConfig = field(default_factory=MethodConfig)
    robustness: met.RobustnessConfig = field(default_factory=met.RobustnessConfig)
    faithfulness: met.FaithfulnessConfig = field(default_factory=met.FaithfulnessConfig)
    sparsity: met.SparsityConfig = field(default_factory=met.SparsityConfig)
    sample_limit: int = 100
    seed: int = 0
    calibrate: bool | None = None  # None = auto by method family
    dataset_name: str = ""

    def __post_init__(self):
        if not self.spaces or not self.methods:
            raise ConfigError("need at least one space and one method")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown methods: {unknown}")
        if self.sample_limit < 1:
            raise ConfigError("sample_limit must be >= 1")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("experiment config must be a JSON object")
        try:
            dataset = doc["dataset"]
            model_path = doc["model"]
            spaces = doc["spaces"]
            methods = doc["methods"]
        except KeyError as exc:
            raise ConfigError(f"config field missing: {exc}") from exc
        mcfg = MethodConfig(**doc.get("method_config", {}))
        metric = doc.get("metrics", {})
        rcfg = met.RobustnessConfig(
            lam=metric.get("lambda", 0.01),
            num_perturbations=metric.get("num_perturbations", 10),
            norm=metric.get("norm", "l2"),
        )
        fcfg = met.FaithfulnessConfig(
            threshold_eps=metric.get("threshold_eps", 0.05),
            mask_value=metric.get("mask_value", 0.0),
        )
        scfg = met.SparsityConfig(beta=metric.get("beta", 2.0))
        return cls(
            dataset=dataset,
            model_path=model_path,
            spaces=list(spaces),
            methods=list(methods),
            method_config=mcfg,
            robustness=rcfg,
            faithfulness=fcfg,
            sparsity=scfg,
            sample_limit=int(doc.get("sample_limit", 100)),
            seed=int(doc.get("seed", 0)),
            calibrate=doc.get("calibrate"),
            dataset_name=doc.get("dataset_name", ""),
        )

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)


@dataclass
class ReportRow:
    dataset: str
    space: str
    method: str
    faithfulness_pct: float
    sparsity: float | None  # None = suppressed
    cls_robustness: float
    xai_robustness: float
    shannon_entropy: float
    beta: float
    eps: float
    lam: float


@dataclass
class ExperimentReport:
    rows: list

    def cell(self, space: str, method: str) -> str:
        for row in self.rows:
            if row.space == space and row.method == method:
                return _format_cell(row)
        raise KeyError((space, method))


def _resolve_test_samples(cfg: ExperimentConfig) -> tuple[str, list]:
    ds = cfg.dataset
    if "path" in ds:
        samples = load_ucr_tsv(ds["path"])
        name = cfg.dataset_name or os.path.splitext(os.path.basename(ds["path"]))[0]
        return name, samples
    if "synth" in ds:
        spec = SynthSpec(
            kind=ds["synth"]["kind"],
            n_samples=int(ds["synth"].get("n_samples", 200)),
            length=int(ds["synth"].get("length", 128)),
            noise_sigma=float(ds["synth"].get("noise_sigma", 0.1)),
            seed=int(ds["synth"].get("seed", cfg.seed)),
            params=ds["synth"].get("params", {}),
        )
        _, test = synth_dataset(spec)
        return cfg.dataset_name or spec.kind, test
    raise ConfigError("dataset must have a 'path' or a 'synth' entry")


def _build_spaces(cfg: ExperimentConfig, input_len: int) -> list:
    spaces = []
    for entry in cfg.spaces:
        entry = dict(entry)
        entry.setdefault("input_len", input_len)
        spaces.append(space_from_config(entry))
    return spaces


def _should_calibrate(cfg: ExperimentConfig, space: Space, method: str) -> bool:
    if space.kind != "decomposition":
        return False
    if cfg.calibrate is not None:
        return cfg.calibrate
    return method in BACKPROP_METHODS


def run_experiment(cfg: ExperimentConfig, out_dir: str | None = None
                   ) -> ExperimentReport:
    """Evaluate all (space, method) pairs; optionally write artifacts."""
    name, samples = _resolve_test_samples(cfg)
    model = load_model(cfg.model_path)
    lengths = {len(s) for s in samples}
    if lengths != {model.input_len}:
        raise ConfigError(
            f"model expects N={model.input_len}, dataset has N={sorted(lengths)}"
        )
    samples = samples[: cfg.sample_limit]
    spaces = _build_spaces(cfg, model.input_len)

    if out_dir:
        os.makedirs(os.path.join(out_dir, "attributions"), exist_ok=True)
        os.makedirs(os.path.join(out_dir, "plots"), exist_ok=True)

    rows = []
    for space in spaces:
        wrapped = wrap(model, space)
        zs = [space.forward(s.values) for s in samples]
        cls_rbt = [
            met.classifier_robustness(
                wrapped, z,
                met.RobustnessConfig(
                    lam=cfg.robustness.lam,
                    num_perturbations=cfg.robustness.num_perturbations,
                    seed=derive_seed(cfg.seed, i, 1),
                    norm=cfg.robustness.norm,
                ),
            )
            for i, z in enumerate(zs)
        ]
        for method in cfg.methods:
            flips, spars, ents, xai_rbt = [], [], [], []
            attr_rows = []
            first_attr = None
            for i, (s, z) in enumerate(zip(samples, zs)):
                target = int(np.argmax(wrapped.predict(z)))
                mcfg = cfg.method_config.with_seed(derive_seed(cfg.seed, i, 0))
                att = compute(method, wrapped, z, target, mcfg)
                if _should_calibrate(cfg, space, method):
                    att = calibrate_decomposition(wrapped, z, target, att, mcfg)
                flips.append(met.faithfulness_flip(wrapped, z, att, cfg.faithfulness))
                spars.append(met.sparsity(att, cfg.sparsity))
                if np.abs(att.scores).sum() > 0:
                    ents.append(met.shannon_entropy(att))
                xai_rbt.append(met.xai_robustness(
                    wrapped, z, method, mcfg,
                    met.RobustnessConfig(
                        lam=cfg.robustness.lam,
                        num_perturbations=cfg.robustness.num_perturbations,
                        seed=derive_seed(cfg.seed, i, 2),
                        norm=cfg.robustness.norm,
                    ),
                ))
                if first_attr is None:
                    first_attr = (s, att)
                if out_dir:
                    labels = space.bin_labels()
                    attr_rows.extend(
                        f"{i},{space.kind},{method},{j},{labels[j]},{score!r}"
                        for j, score in enumerate(att.scores)
                    )
            faith_pct = 100.0 * float(np.mean(flips))
            mean_sparsity = float(np.mean(spars)) if spars else None
            rows.append(ReportRow(
                dataset=name,
                space=space.kind,
                method=method,
                faithfulness_pct=faith_pct,
                sparsity=mean_sparsity if faith_pct >= 50.0 else None,
                cls_robustness=float(np.mean(cls_rbt)),
                xai_robustness=float(np.mean(xai_rbt)),
                shannon_entropy=float(np.mean(ents)) if ents else 0.0,
                beta=cfg.sparsity.beta,
                eps=cfg.faithfulness.threshold_eps,
                lam=cfg.robustness.lam,
            ))
            if out_dir:
                path = os.path.join(
                    out_dir, "attributions", f"{space.kind}-{method}.csv"
                )
                with open(path, "w", encoding="utf-8") as fh:
                    fh.write("sample_id,space,method,coordinate,label,score\n")
                    fh.write("\n".join(attr_rows) + "\n")
                if first_attr is not None:
                    emit_attribution_plot(
                        first_attr[0], space, first_attr[1],
                        os.path.join(
                            out_dir, "plots", f"{space.kind}-{method}-sample0.svg"
                        ),
                    )

    report = ExperimentReport(rows=rows)
    if out_dir:
        emit_report(report, "csv", os.path.join(out_dir, "report.csv"))
        emit_report(report, "markdown", os.path.join(out_dir, "report.md"))
    return report


# -- rendering -------------------------------------------------------------


def _format_cell(row: ReportRow) -> str:
    faith = f"{row.faithfulness_pct:.0f}%"
    return f"{faith} ({row.sparsity:.2f})" if row.sparsity is not None else f"{faith} (-)"


def render_csv(report: ExperimentReport) -> str:
    lines = [
        "dataset,space,method,faithfulness_pct,sparsity,cls_robustness,"
        "xai_robustness,shannon_entropy,beta,eps,lambda"
    ]
    for r in report.rows:
        spars = "" if r.sparsity is None else f"{r.sparsity:.6f}"
        lines.append(
            f"{r.dataset},{r.space},{r.method},{r.faithfulness_pct:.2f},{spars},"
            f"{r.cls_robustness:.6g},{r.xai_robustness:.6g},"
            f"{r.shannon_entropy:.6f},{r.beta:g},{r.eps:g},{r.lam:g}"
        )
    return "\n".join(lines) + "\n"


def render_markdown(report: ExperimentReport) -> str:
    """Table II convention: one row per (dataset, space), 'F% (S)' cells."""
    methods: list[str] = []
    groups: dict[tuple, dict] = {}
    for r in report.rows:
        if r.method not in methods:
            methods.append(r.method)
        groups.setdefault((r.dataset, r.space), {})[r.method] = r
    lines = ["| Dataset | Space | " + " | ".join(methods) + " |",
             "|---|---|" + "---|" * len(methods)]
    for (dataset, space), by_method in groups.items():
        cells = [
            _format_cell(by_method[m]) if m in by_method else ""
            for m in methods
        ]
        lines.append(f"| {dataset} | {space} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def render_report(report: ExperimentReport, fmt: str) -> str:
    if fmt == "csv":
        return render_csv(report)
    if fmt == "markdown":
        return render_markdown(report)
    raise ConfigError(f"unknown report format {fmt!r}")


def emit_report(report: ExperimentReport, fmt: str, path) -> None:
    text = render_report(report, fmt)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise ExpSpaceError(f"cannot write {path}: {exc}") from exc


def report_from_csv(path) -> ExperimentReport:
    """Rehydrate a report written by render_csv (for `report` re-rendering)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if not lines or not lines[0].startswith("dataset,"):
        raise ConfigError(f"{path} is not a report CSV")
    rows = []
    for ln in lines[1:]:
        f = ln.split(",")
        if len(f) != 11:
            raise ConfigError(f"bad report row: {ln!r}")
        rows.append(ReportRow(
            dataset=f[0], space=f[1], method=f[2],
            faithfulness_pct=float(f[3]),
            sparsity=None if f[4] == "" else float(f[4]),
            cls_robustness=float(f[5]), xai_robustness=float(f[6]),
            shannon_entropy=float(f[7]), beta=float(f[8]), eps=float(f[9]),
            lam=float(f[10]),
        ))
    return ExperimentReport(rows=rows)
