"""Dataset presets and the generate -> train -> insert -> evaluate driver."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .evaluation import (
    EdgeCompositionReport,
    NoveltyReport,
    TopologyReport,
    backbone_preserved,
    edge_composition,
    edge_drop_stress,
    link_prediction_scores,
    nmi,
    ari,
    novelty_report,
    topology_delta,
    topology_report,
)
from .features import FeatureMatrix, NormParams, extract_features, normalize, resolve_schema
from .graph import Graph, load_edge_list, normalized_adjacency
from .insertion import VARIANTS, AugmentedGraph, InsertionConfig, insert_variant
from .synth import BaSpec, SbmSpec, builtin_graph, gen_ba, gen_sbm
from .training import EdgeSplit, TrainConfig, TrainResult, split_edges, train

log = logging.getLogger(__name__)

DENSITY_TOLERANCE = 0.10


class StageFailure(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
        self.message = message


@dataclass
class DatasetSpec:
    name: str
    kind: str  # sbm | ba | builtin | edgelist
    schema: tuple[str, ...]
    params: dict = field(default_factory=dict)
    target_density: Optional[float] = None
    m_new: Optional[int] = None


PRESETS = {
    "community_sbm": DatasetSpec(
        "community_sbm", "sbm", resolve_schema("community"),
        {"block_sizes": (400, 400, 400), "p_within": 0.35, "p_between": 0.03},
        target_density=0.133,
    ),
    "multi_sbm": DatasetSpec(
        "multi_sbm", "sbm", resolve_schema("multi_community"),
        {"block_sizes": (300,) * 5, "p_within": 0.25, "p_between": 0.01},
        target_density=0.087,
    ),
    "scale_free": DatasetSpec(
        "scale_free", "ba", resolve_schema("scale_free"), {"n": 2000, "m": 2},
        target_density=0.002,
    ),
    "karate": DatasetSpec("karate", "builtin", resolve_schema("community"), {"name": "karate"},
                          target_density=0.139, m_new=15),
    "lesmis": DatasetSpec("lesmis", "builtin", resolve_schema("scale_free"), {"name": "lesmis"},
                          target_density=0.0868, m_new=15),
}

SYNTHETIC_REGIMES = ("community_sbm", "multi_sbm", "scale_free")


def load_dataset(spec: DatasetSpec, seed: int = 42) -> tuple[Graph, Optional[np.ndarray], dict]:
    """Build or read the graph for ``spec``; returns ``(graph, block_labels, metadata)``."""
    labels = None
    meta: dict = {"kind": spec.kind}
    p = spec.params
    if spec.kind == "sbm":
        sbm = SbmSpec(tuple(p["block_sizes"]), float(p["p_within"]), float(p["p_between"]),
                      int(p.get("seed", seed)))
        lg = gen_sbm(sbm)
        g, labels = lg.graph, lg.labels
        meta.update(block_sizes=list(sbm.block_sizes), p_within=sbm.p_within,
                    p_between=sbm.p_between, expected_density=sbm.expected_density())
    elif spec.kind == "ba":
        ba = BaSpec(int(p["n"]), int(p["m"]), int(p.get("seed", seed)))
        g = gen_ba(ba)
        meta.update(n=ba.n, m=ba.m, expected_edges=ba.m * (ba.n - ba.m))
    elif spec.kind == "builtin":
        g = builtin_graph(p["name"])
    elif spec.kind == "edgelist":
        g = load_edge_list(p["path"], relabel=bool(p.get("relabel", True)))
    else:
        raise ValueError(f"unknown dataset kind {spec.kind!r}")
    meta["realized_density"] = g.density
    meta["nodes"] = g.node_count
    meta["edges"] = g.edge_count
    if spec.target_density is not None:
        gap = (g.density - spec.target_density) / spec.target_density
        meta["target_density"] = spec.target_density
        meta["density_relative_gap"] = gap
        meta["density_mismatch"] = bool(abs(gap) > DENSITY_TOLERANCE)
    return g, labels, meta


@dataclass
class VariantResult:
    name: str
    augmented: AugmentedGraph
    after: TopologyReport
    delta: dict
    composition: EdgeCompositionReport
    novelty: Optional[NoveltyReport]
    nmi: float
    ari: float
    stress: dict
    backbone_ok: bool


@dataclass
class DatasetResult:
    spec: DatasetSpec
    graph: Graph
    labels: Optional[np.ndarray]
    x_raw: FeatureMatrix
    x_norm: FeatureMatrix
    norm: NormParams
    split: EdgeSplit
    training: TrainResult
    before: TopologyReport
    link_prediction: dict
    stress: dict
    variants: dict[str, VariantResult]
    meta: dict
    errors: list[str] = field(default_factory=list)


def evaluate_variant(name: str, g: Graph, x_norm: FeatureMatrix, ag: AugmentedGraph,
                     before: TopologyReport, seed: int, path_sample: Optional[int]) -> VariantResult:
    after = topology_report(ag.graph, path_sample, seed)
    restricted = after.partition[: g.node_count]
    nov = novelty_report(x_norm, ag.gen_features_norm) if ag.features_generated and ag.m_new else None
    stress = edge_drop_stress(ag.graph, 0.1, seed, base_partition=after.partition)
    return VariantResult(
        name=name,
        augmented=ag,
        after=after,
        delta=topology_delta(before, after),
        composition=edge_composition(ag),
        novelty=nov,
        nmi=nmi(before.partition, restricted),
        ari=ari(before.partition, restricted),
        stress=stress,
        backbone_ok=backbone_preserved(g, ag),
    )


def run_dataset(spec: DatasetSpec, train_cfg: TrainConfig, insert_cfg: InsertionConfig,
                variants=VARIANTS, seed: int = 42, path_sample: Optional[int] = 500,
                max_binding_fraction: Optional[float] = 0.03,
                variant_overrides: Optional[dict] = None) -> DatasetResult:
    """Run the full pipeline on one dataset.

    Raises :class:`StageFailure` when a stage cannot complete. A similarity
    variant whose threshold rejects more than ``max_binding_fraction`` of its
    top-k candidates is recorded in ``errors`` (the caller decides whether
    that fails the run).
    """
    try:
        g, labels, meta = load_dataset(spec, seed)
    except Exception as exc:  # noqa: BLE001 - reported as a structured stage error
        raise StageFailure("load", str(exc)) from exc
    log.info("%s: %r", spec.name, g)
    x_raw = extract_features(g, spec.schema)
    x_norm, norm = normalize(x_raw)
    try:
        split = split_edges(g, seed=seed)
        result = train(g, x_norm, train_cfg, split)
    except Exception as exc:  # noqa: BLE001
        raise StageFailure("train", str(exc)) from exc
    log.info("%s: trained %d epochs, best epoch %d", spec.name, len(result.history), result.best_epoch)

    before = topology_report(g, path_sample, seed)
    lp = link_prediction_scores(result.params, split, x_norm, g)
    base_stress = edge_drop_stress(g, 0.1, seed, base_partition=before.partition)
    a_full = normalized_adjacency(g)
    if spec.m_new is not None:
        insert_cfg = InsertionConfig(**{**insert_cfg.__dict__, "m_new": spec.m_new})

    out: dict[str, VariantResult] = {}
    errors: list[str] = []
    for name in variants:
        cfg = insert_cfg
        if variant_overrides and name in variant_overrides:
            cfg = InsertionConfig(**{**insert_cfg.__dict__, **variant_overrides[name]})
        try:
            ag = insert_variant(name, g, x_norm, result.params, cfg, norm, a_norm=a_full)
        except Exception as exc:  # noqa: BLE001
            raise StageFailure(f"insert:{name}", str(exc)) from exc
        vr = evaluate_variant(name, g, x_norm, ag, before, seed, path_sample)
        out[name] = vr
        if (name in ("agn", "agn_original") and max_binding_fraction is not None
                and ag.binding_fraction > max_binding_fraction):
            errors.append(
                f"{spec.name}/{name}: threshold tau={cfg.tau} rejected "
                f"{ag.binding_fraction:.2%} of top-k candidates (limit {max_binding_fraction:.0%})"
            )
        log.info("%s/%s: %s", spec.name, name, vr.composition)

    meta.update(
        schema=list(spec.schema),
        epochs_run=len(result.history),
        best_epoch=result.best_epoch,
        best_val_loss=result.best_val,
        binding_fraction={k: v.augmented.binding_fraction for k, v in out.items()},
        isolated_generated={k: v.augmented.isolated for k, v in out.items()},
    )
    return DatasetResult(spec, g, labels, x_raw, x_norm, norm, split, result, before, lp,
                         base_stress, out, meta, errors)
