"""Command-line entry point: ``agn run|inspect|gen|train|insert|eval``.

Exit codes: 0 success, 2 configuration error, 3 stage failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import datetime as _dt
import json
import logging
import os
import sys
from dataclasses import fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .evaluation import (
    edge_composition,
    novelty_report,
    topology_delta,
    topology_report,
)
from .features import FeatureMatrix, NormParams, extract_features, normalize, resolve_schema
from .graph import Graph, load_edge_list, save_graph
from .insertion import GG, GO, VARIANTS, AugmentedGraph, InsertionConfig, insert_variant
from .model import ModelParams
from .pipeline import PRESETS, SYNTHETIC_REGIMES, DatasetResult, DatasetSpec, StageFailure, load_dataset, run_dataset
from .rng import RNG_ALGORITHM
from .training import TrainConfig, split_edges, train

log = logging.getLogger("agn")

EXIT_OK, EXIT_CONFIG, EXIT_STAGE = 0, 2, 3
SCHEMA_VERSION = 1

DESIGN_FLAGS = {
    "high_degree_neighbor_cutoff": "neighbor degree > graph mean degree",
    "higher_degree_neighbor_rule": "neighbor degree > own degree",
    "neighbor_degree_std": "population",
    "wasserstein": "mean over feature dimensions of 1-D W1 between marginals",
    "diversity": "mean pairwise (1 - cosine) among generated rows",
    "nmi_normalization": "arithmetic mean of entropies",
    "validation_noise": "one eps draw frozen per run",
    "batching": "full batch; batch_size unused",
    "isolated_generated_nodes": "kept as isolated nodes",
    "weight_decay": "coupled L2",
}


class ConfigError(ValueError):
    pass


# formatting ------------------------------------------------------------------------


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.6g}"
    return str(value)


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


# configuration ---------------------------------------------------------------------


def _split_list(text: str) -> list[str]:
    return [t.strip() for t in text.replace("\n", ",").split(",") if t.strip()]


def _coerce(value: str, kind):
    if kind is bool:
        return value.strip().lower() in ("1", "true", "yes", "on")
    return kind(value)


def _dataclass_overrides(section, cls) -> dict:
    out = {}
    types = {f.name: f.type for f in fields(cls)}
    for key, value in section.items():
        if key not in types:
            raise ConfigError(f"unknown key {key!r} in [{section.name}]")
        t = types[key]
        kind = {"int": int, "float": float, "bool": bool}.get(t if isinstance(t, str) else t.__name__, str)
        try:
            out[key] = _coerce(value, kind)
        except ValueError as exc:
            raise ConfigError(f"[{section.name}] {key}: {exc}") from None
    return out


def _dataset_from_section(name: str, section) -> DatasetSpec:
    base = PRESETS.get(name)
    kind = section.get("kind", base.kind if base else None)
    if kind is None:
        raise ConfigError(f"[dataset.{name}] needs a kind")
    schema = resolve_schema(section["schema"]) if "schema" in section else (base.schema if base else None)
    if schema is None:
        raise ConfigError(f"[dataset.{name}] needs a schema")
    params = dict(base.params) if base and base.kind == kind else {}
    for key in ("block_sizes",):
        if key in section:
            params[key] = tuple(int(v) for v in _split_list(section[key]))
    for key in ("p_within", "p_between"):
        if key in section:
            params[key] = float(section[key])
    for key in ("n", "m", "seed"):
        if key in section:
            params[key] = int(section[key])
    for key in ("name", "path"):
        if key in section:
            params[key] = section[key]
    if "relabel" in section:
        params["relabel"] = section.getboolean("relabel")
    if kind == "edgelist":
        if "path" not in params:
            raise ConfigError(f"[dataset.{name}] edgelist needs a path")
        if not Path(params["path"]).exists():
            raise ConfigError(f"[dataset.{name}] file not found: {params['path']}")
    target = section.get("target_density")
    m_new = section.get("m_new")
    return DatasetSpec(
        name=name, kind=kind, schema=schema, params=params,
        target_density=float(target) if target else (base.target_density if base else None),
        m_new=int(m_new) if m_new else (base.m_new if base else None),
    )


class ExperimentConfig:
    """Parsed experiment configuration (INI-style sections)."""

    def __init__(self, parser: configparser.ConfigParser, base_dir: Path = Path(".")):
        run = parser["run"] if parser.has_section("run") else {}
        self.seed = int(run.get("seed", 42))
        self.out = Path(run.get("out", "results"))
        self.path_sample = int(run.get("path_sample", 500))
        limit = run.get("max_binding_fraction", "0.03")
        self.max_binding_fraction = None if limit.strip().lower() in ("", "none") else float(limit)
        self.variants = _split_list(run.get("variants", ",".join(VARIANTS)))
        if len(set(self.variants)) != len(self.variants):
            raise ConfigError("variant names must be unique")
        for v in self.variants:
            if v not in VARIANTS:
                raise ConfigError(f"unknown variant {v!r}")
        names = _split_list(run.get("datasets", ",".join(SYNTHETIC_REGIMES)))
        if len(set(names)) != len(names):
            raise ConfigError("dataset names must be unique")
        self.datasets = []
        for name in names:
            section_name = f"dataset.{name}"
            if parser.has_section(section_name):
                self.datasets.append(_dataset_from_section(name, parser[section_name]))
            elif name in PRESETS:
                self.datasets.append(PRESETS[name])
            else:
                raise ConfigError(f"dataset {name!r} is neither a preset nor a [dataset.{name}] section")
        self.train = TrainConfig(**{
            "seed": self.seed,
            **(_dataclass_overrides(parser["train"], TrainConfig) if parser.has_section("train") else {}),
        })
        if "AGN_EPOCHS" in os.environ:
            epochs = int(os.environ["AGN_EPOCHS"])
            self.train = TrainConfig(**{**self.train.__dict__, "max_epochs": epochs,
                                        "patience": min(self.train.patience, epochs)})
        self.insert = InsertionConfig(**{
            "seed": self.seed,
            **(_dataclass_overrides(parser["insert"], InsertionConfig) if parser.has_section("insert") else {}),
        })
        self.variant_overrides = {}
        for v in self.variants:
            if parser.has_section(f"variant.{v}"):
                self.variant_overrides[v] = _dataclass_overrides(parser[f"variant.{v}"], InsertionConfig)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            parser.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from None
        try:
            return cls(parser, path.parent)
        except (KeyError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None

    def hyperparameters(self) -> dict:
        return {"train": dict(self.train.__dict__), "insert": dict(self.insert.__dict__),
                "path_sample": self.path_sample, "max_binding_fraction": self.max_binding_fraction,
                "variant_overrides": self.variant_overrides}


# result tables -----------------------------------------------------------------------

TOPOLOGY_KEYS = (
    "nodes", "edges", "density", "mean_degree", "min_degree", "max_degree",
    "component_count", "avg_clustering", "transitivity", "avg_shortest_path",
    "diameter", "degree_assortativity", "modularity", "communities",
)


def result_tables(results: list[DatasetResult]) -> dict[str, tuple[list[str], list[list]]]:
    topo, comp, nov, tasks = [], [], [], []
    for r in results:
        name = r.spec.name
        b = r.before.scalars()
        topo.append([name, "original", "before", *(b[k] for k in TOPOLOGY_KEYS)])
        tasks.append([name, "original", r.link_prediction["auc"], r.link_prediction["ap"],
                      r.link_prediction["cn_auc"], r.link_prediction["cn_ap"], 1.0, 1.0,
                      r.stress["nmi"], r.stress["ari"]])
        for v, vr in r.variants.items():
            a = vr.after.scalars()
            topo.append([name, v, "after", *(a[k] for k in TOPOLOGY_KEYS)])
            topo.append([name, v, "delta_pct", *(vr.delta[k] for k in TOPOLOGY_KEYS)])
            c = vr.composition
            ag = vr.augmented
            comp.append([name, v, c.go_count, c.gg_count, c.gg_ratio, c.avg_generated_degree,
                         c.majority_gg_node_count, c.generated_nodes, ag.binding_fraction,
                         ag.isolated, vr.backbone_ok])
            if vr.novelty is not None:
                n = vr.novelty
                nov.append([name, v, n.nn_dist_mean, n.nn_dist_std, n.mean_dist_to_original,
                            n.wasserstein, n.diversity])
            tasks.append([name, v, r.link_prediction["auc"], r.link_prediction["ap"],
                          r.link_prediction["cn_auc"], r.link_prediction["cn_ap"], vr.nmi, vr.ari,
                          vr.stress["nmi"], vr.stress["ari"]])
    return {
        "topology.csv": (["dataset", "variant", "stage", *TOPOLOGY_KEYS], topo),
        "composition.csv": (["dataset", "variant", "go_count", "gg_count", "gg_ratio",
                             "avg_generated_degree", "majority_gg_nodes", "generated_nodes",
                             "binding_fraction", "isolated_generated", "backbone_preserved"], comp),
        "novelty.csv": (["dataset", "variant", "nn_dist_mean", "nn_dist_std",
                         "mean_dist_to_original", "wasserstein", "diversity"], nov),
        "tasks.csv": (["dataset", "variant", "lp_auc", "lp_ap", "cn_auc", "cn_ap",
                       "nmi", "ari", "stress_nmi", "stress_ari"], tasks),
    }


def run_meta(cfg: ExperimentConfig, results: list[DatasetResult], errors: list[dict]) -> dict:
    flags = dict(DESIGN_FLAGS)
    datasets = {}
    for r in results:
        datasets[r.spec.name] = r.meta
        if r.meta.get("density_mismatch"):
            flags.setdefault("density_mismatch", []).append({
                "dataset": r.spec.name,
                "realized_density": r.meta["realized_density"],
                "target_density": r.meta["target_density"],
                "expected_density_from_parameters": r.meta.get("expected_density"),
                "note": "generator parameters do not reproduce the nominal density; "
                        "parameters were kept and the realized density is reported",
            })
        if any(r.meta["isolated_generated"].values()):
            flags.setdefault("isolated_generated_fired", []).append(r.spec.name)
    return {
        "schema_version": SCHEMA_VERSION,
        "agn_version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "seed": cfg.seed,
        "rng_algorithm": RNG_ALGORITHM,
        "hyperparameters": cfg.hyperparameters(),
        "variants": cfg.variants,
        "datasets": datasets,
        "flags": flags,
        "errors": errors,
    }


def write_dataset_artifacts(out: Path, r: DatasetResult) -> None:
    d = out / r.spec.name
    d.mkdir(parents=True, exist_ok=True)
    r.training.write_history(d / "history.csv")
    r.training.params.save(d / "model.npz")
    save_graph(r.graph, d / "graph.txt")
    for v, vr in r.variants.items():
        save_graph(vr.augmented.graph, d / f"augmented_{v}.txt")
        _write_generated_features(d / f"features_{v}.csv", vr.augmented, r.x_norm.schema)


def _write_generated_features(path: Path, ag: AugmentedGraph, schema) -> None:
    raw = ag.gen_features_raw
    header = ["node", "features_generated", *(f"norm_{s}" for s in schema)]
    if raw is not None:
        header += [f"raw_{s}" for s in schema]
    rows = []
    for i in range(ag.m_new):
        row = [ag.original_count + i, ag.features_generated, *ag.gen_features_norm[i]]
        if raw is not None:
            row += list(raw[i])
        rows.append(row)
    write_csv(path, header, rows)


# subcommands ---------------------------------------------------------------------------


def cmd_run(args) -> int:
    try:
        cfg = ExperimentConfig.from_file(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.train = TrainConfig(**{**cfg.train.__dict__, "seed": args.seed})
        cfg.insert = InsertionConfig(**{**cfg.insert.__dict__, "seed": args.seed})
    if args.variant:
        bad = [v for v in args.variant if v not in VARIANTS]
        if bad:
            print(f"config error: unknown variant(s) {bad}", file=sys.stderr)
            return EXIT_CONFIG
        cfg.variants = list(dict.fromkeys(args.variant))
    out = Path(args.out) if args.out else cfg.out
    out.mkdir(parents=True, exist_ok=True)

    results: list[DatasetResult] = []
    errors: list[dict] = []
    for spec in cfg.datasets:
        try:
            r = run_dataset(spec, cfg.train, cfg.insert, cfg.variants, cfg.seed, cfg.path_sample,
                            cfg.max_binding_fraction, cfg.variant_overrides)
        except StageFailure as exc:
            log.error("dataset %s failed at %s: %s", spec.name, exc.stage, exc.message)
            errors.append({"dataset": spec.name, "stage": exc.stage, "message": exc.message})
            continue
        results.append(r)
        for msg in r.errors:
            log.error(msg)
            errors.append({"dataset": spec.name, "stage": "binding_check", "message": msg})
        write_dataset_artifacts(out, r)

    for fname, (header, rows) in result_tables(results).items():
        write_csv(out / fname, header, rows)
    with open(out / "run_meta.json", "w", encoding="utf-8") as fh:
        json.dump(_jsonable(run_meta(cfg, results, errors)), fh, indent=2, sort_keys=True)
    if errors:
        for e in errors:
            print(f"error: {e['dataset']} [{e['stage']}]: {e['message']}", file=sys.stderr)
        return EXIT_STAGE
    return EXIT_OK


def cmd_inspect(args) -> int:
    try:
        g = load_edge_list(args.graph, relabel=args.relabel)
    except (OSError, ValueError) as exc:
        print(f"cannot load {args.graph}: {exc}", file=sys.stderr)
        return EXIT_STAGE
    report = topology_report(g, args.path_sample, args.seed).to_dict()
    report["generated_nodes"] = g.generated_count
    if args.json:
        print(json.dumps(_jsonable(report), indent=2))
    else:
        width = max(len(k) for k in report)
        for k, v in report.items():
            print(f"{k:<{width}}  {fmt(v) if v is not None else 'n/a'}")
    return EXIT_OK


def cmd_gen(args) -> int:
    if args.dataset not in PRESETS:
        print(f"config error: unknown dataset {args.dataset!r}; choose from {sorted(PRESETS)}", file=sys.stderr)
        return EXIT_CONFIG
    g, labels, meta = load_dataset(PRESETS[args.dataset], args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_graph(g, out)
    if labels is not None:
        write_csv(out.with_suffix(".labels.csv"), ["node", "block"], [[i, b] for i, b in enumerate(labels)])
    print(json.dumps(_jsonable(meta), sort_keys=True))
    return EXIT_OK


def cmd_train(args) -> int:
    try:
        g = load_edge_list(args.graph, relabel=args.relabel)
        schema = resolve_schema(args.schema)
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    cfg = TrainConfig(seed=args.seed)
    if args.epochs or "AGN_EPOCHS" in os.environ:
        epochs = args.epochs or int(os.environ["AGN_EPOCHS"])
        cfg = TrainConfig(seed=args.seed, max_epochs=epochs, patience=min(cfg.patience, epochs))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    x_raw = extract_features(g, schema)
    x_norm, norm = normalize(x_raw)
    try:
        split = split_edges(g, seed=args.seed)
        result = train(g, x_norm, cfg, split)
    except Exception as exc:  # noqa: BLE001
        print(f"stage failure [train]: {exc}", file=sys.stderr)
        return EXIT_STAGE
    result.params.save(out / "model.npz")
    split.save(out / "split.npz")
    result.write_history(out / "history.csv")
    x_raw.to_csv(out / "features_raw.csv")
    x_norm.to_csv(out / "features_norm.csv")
    (out / "norm.json").write_text(json.dumps({"schema": list(schema), **norm.to_dict()}, indent=2))
    print(f"trained {len(result.history)} epochs; best epoch {result.best_epoch}, "
          f"val loss {result.best_val:.6g}")
    return EXIT_OK


def _load_model_dir(path: Path):
    params = ModelParams.load(path / "model.npz")
    x_norm = FeatureMatrix.from_csv(path / "features_norm.csv")
    norm_doc = json.loads((path / "norm.json").read_text())
    return params, x_norm, NormParams.from_dict(norm_doc)


def cmd_insert(args) -> int:
    try:
        g = load_edge_list(args.graph, relabel=args.relabel)
        params, x_norm, norm = _load_model_dir(Path(args.model_dir))
    except (OSError, ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    cfg = InsertionConfig(m_new=args.m_new, top_k=args.top_k, tau=args.tau, seed=args.seed)
    try:
        ag = insert_variant(args.variant, g, x_norm, params, cfg, norm)
    except (KeyError, ValueError) as exc:
        print(f"stage failure [insert]: {exc}", file=sys.stderr)
        return EXIT_STAGE
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_graph(ag.graph, out / "augmented.txt")
    _write_generated_features(out / "generated_features.csv", ag, x_norm.schema)
    comp = edge_composition(ag)
    print(json.dumps(_jsonable({**comp.to_dict(), "binding_fraction": ag.binding_fraction,
                                "isolated_generated": ag.isolated}), sort_keys=True))
    return EXIT_OK


def _augmented_from_file(g_after: Graph) -> AugmentedGraph:
    n = g_after.original_count
    e = g_after.edges
    new = e[:, 1] >= n
    new_edges = e[new]
    prov = np.where(new_edges[:, 0] >= n, GG, GO)
    w = g_after.weights[new] if g_after.weights is not None else np.ones(len(new_edges))
    return AugmentedGraph(g_after, new_edges, w, prov, np.zeros((g_after.generated_count, 0)))


def cmd_eval(args) -> int:
    try:
        before = load_edge_list(args.graph)
        after = load_edge_list(args.augmented)
    except (OSError, ValueError) as exc:
        print(f"cannot load graph: {exc}", file=sys.stderr)
        return EXIT_STAGE
    b = topology_report(before, args.path_sample, args.seed)
    a = topology_report(after, args.path_sample, args.seed)
    doc = {"before": b.to_dict(), "after": a.to_dict(), "delta_pct": topology_delta(b, a),
           "composition": edge_composition(_augmented_from_file(after)).to_dict()}
    if args.features and args.generated_features:
        x_norm = FeatureMatrix.from_csv(args.features)
        with open(args.generated_features, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        cols = [f"norm_{s}" for s in x_norm.schema]
        gen = np.array([[float(r[c]) for c in cols] for r in rows if r["features_generated"] == "true"])
        if len(gen):
            doc["novelty"] = novelty_report(x_norm, gen).to_dict()
    text = json.dumps(_jsonable(doc), indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="agn", description="Controlled node insertion into observed graphs.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the configured experiment grid")
    r.add_argument("--config", required=True)
    r.add_argument("--out")
    r.add_argument("--seed", type=int)
    r.add_argument("--variant", action="append", help="restrict to this variant (repeatable)")
    r.set_defaults(func=cmd_run)

    i = sub.add_parser("inspect", help="print topology metrics of an edge list")
    i.add_argument("graph")
    i.add_argument("--json", action="store_true")
    i.add_argument("--relabel", action="store_true")
    i.add_argument("--path-sample", type=int, default=500)
    i.add_argument("--seed", type=int, default=42)
    i.set_defaults(func=cmd_inspect)

    g = sub.add_parser("gen", help="write a preset graph as an edge list")
    g.add_argument("dataset")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=42)
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="train the autoencoder on an edge list")
    t.add_argument("--graph", required=True)
    t.add_argument("--schema", required=True, help="community | multi_community | scale_free | comma list")
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=int, default=42)
    t.add_argument("--epochs", type=int)
    t.add_argument("--relabel", action="store_true")
    t.set_defaults(func=cmd_train)

    n = sub.add_parser("insert", help="insert nodes using a trained model directory")
    n.add_argument("--graph", required=True)
    n.add_argument("--model-dir", required=True)
    n.add_argument("--variant", default="agn", choices=VARIANTS)
    n.add_argument("--out", required=True)
    n.add_argument("--m-new", type=int, default=100)
    n.add_argument("--top-k", type=int, default=10)
    n.add_argument("--tau", type=float, default=0.5)
    n.add_argument("--seed", type=int, default=42)
    n.add_argument("--relabel", action="store_true")
    n.set_defaults(func=cmd_insert)

    e = sub.add_parser("eval", help="compare a graph with its augmented version")
    e.add_argument("--graph", required=True)
    e.add_argument("--augmented", required=True)
    e.add_argument("--features", help="normalized original features CSV")
    e.add_argument("--generated-features", help="generated features CSV written by insert")
    e.add_argument("--out")
    e.add_argument("--path-sample", type=int, default=500)
    e.add_argument("--seed", type=int, default=42)
    e.set_defaults(func=cmd_eval)
    return p


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
