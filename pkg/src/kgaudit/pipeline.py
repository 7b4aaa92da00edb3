"""End-to-end orchestration: run artifacts, the empirical study, reporting.

A training run directory contains: ``config.json`` (echo of the run config),
``vocab.tsv``, ``metrics.tsv`` (per-epoch loss curves), ``confidence.tsv``
(final confidence table, most-suspicious first), and ``model.kgs1``
(parameter checkpoint).  All primary outputs are byte-stable for a fixed
seed.
"""

from __future__ import annotations

import dataclasses
import json
import os
import time

import numpy as np

from .checkpoint import load_params, save_params
from .detector import DualViewDetector, RunConfig, config_from_dict
from .errors import ConfigError, DataError
from .evaluate import EvalReport, evaluate
from .kg import KnowledgeGraph
from .noise import INJECTORS, load_noisy_dataset
from .synth import make_synthetic_kg

RUN_ARTIFACTS = ("config.json", "metrics.tsv", "confidence.tsv")


def _write_json(path, doc):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def write_metrics(path, metrics):
    with open(path, "w", encoding="utf-8") as f:
        f.write("epoch\tloss_text\tloss_struct\tloss_contrastive\n")
        for row in metrics:
            f.write(f"{row['epoch']}\t{row['loss_text']!r}\t"
                    f"{row['loss_struct']!r}\t{row['loss_contrastive']!r}\n")


def load_dataset_from_config(config):
    if config.dataset is None:
        raise ConfigError("run config has no dataset paths")
    return load_noisy_dataset(config.dataset.dataset, config.dataset.entities,
                              config.dataset.relations)


def run_training(config):
    """Train per config and write the full artifact set into ``out_dir``."""
    kg, labels, kinds = load_dataset_from_config(config)
    out = config.out_dir
    os.makedirs(out, exist_ok=True)
    detector = DualViewDetector(config).fit(kg)
    _write_json(os.path.join(out, "config.json"), detector.get_params())
    detector.vocab.save(os.path.join(out, "vocab.tsv"))
    write_metrics(os.path.join(out, "metrics.tsv"), detector.metrics)
    detector.final_table.write_tsv(os.path.join(out, "confidence.tsv"), kg)
    save_params(os.path.join(out, "model.kgs1"), detector.parameter_arrays())
    return detector, kg, labels, kinds


def run_detect(config, checkpoint_path, out_path):
    """Load a checkpoint and write a fresh ascending-confidence ranking."""
    kg, _labels, _kinds = load_dataset_from_config(config)
    detector = DualViewDetector(config).prepare(kg, pretrain=False)
    detector.load_parameter_arrays(load_params(checkpoint_path))
    table = detector.detect()
    table.write_tsv(out_path, kg)
    return table


def read_ranking(path):
    """Triplet token keys of a ranking file, most-suspicious first."""
    rows = []
    with open(path, encoding="utf-8") as f:
        for i, line in enumerate(f.read().splitlines(), start=1):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 8:
                raise DataError(f"{path}:{i}: expected 8 columns, got {len(parts)}")
            rows.append((parts[0], parts[1], parts[2]))
    return rows


def evaluate_ranking(ranking_path, dataset_path, entities_path, relations_path,
                     k_values):
    """Join a ranking file with dataset labels and score it."""
    started = time.perf_counter()
    ranked = read_ranking(ranking_path)
    kg, labels, kinds = load_noisy_dataset(dataset_path, entities_path,
                                           relations_path)
    by_tokens = {}
    for i, (h, r, t) in enumerate(kg.triplets):
        key = (kg.entities[h].token, kg.relations[r].token, kg.entities[t].token)
        by_tokens[key] = i
    if len(ranked) != len(kg.triplets):
        raise DataError(
            f"ranking has {len(ranked)} rows but dataset has {len(kg.triplets)}")
    order = []
    for key in ranked:
        idx = by_tokens.get(key)
        if idx is None:
            raise DataError(f"ranked triplet {key} not present in the dataset")
        order.append(idx)
    order = np.asarray(order)
    report = evaluate(labels[order], k_values, [kinds[i] for i in order],
                      ranking_path=os.path.basename(ranking_path))
    report.wall_clock = time.perf_counter() - started
    return report


# ---------------------------------------------------------------------------
# empirical study
# ---------------------------------------------------------------------------

STUDY_KEYS = ("synth", "ratio", "kinds", "variants", "run", "eval_k", "seed",
              "out_dir")


def empirical_study(study):
    """Per-noise-kind precision table across model variants.

    ``study`` is a dict with keys: synth {entities, relations, triplets,
    clusters}, ratio, kinds, variants, run (RunConfig fields sans dataset),
    eval_k, seed, out_dir.  Returns the results document.
    """
    unknown = sorted(set(study) - set(STUDY_KEYS))
    if unknown:
        raise ConfigError(f"unknown keys in study config: {unknown}")
    synth = study.get("synth", {})
    ratio = study.get("ratio", 0.05)
    kinds = study.get("kinds", ["random", "semantic", "adversarial"])
    variants = study.get("variants", ["full", "struct-only"])
    k_values = study.get("eval_k", [0.01, 0.05])
    seed = study.get("seed", 0)
    out_dir = study.get("out_dir")

    kg = make_synthetic_kg(
        synth.get("entities", 300), synth.get("relations", 12),
        synth.get("triplets", 5000), synth.get("clusters", 10), seed=seed)

    results = {"ratio": ratio, "seed": seed, "rows": []}
    for kind_i, kind in enumerate(kinds):
        if kind not in INJECTORS or kind == "mixed":
            raise ConfigError(f"study noise kind must be one of "
                              f"{sorted(set(INJECTORS) - {'mixed'})}: {kind!r}")
        dataset = INJECTORS[kind](kg, ratio, seed=seed + 1000 * (kind_i + 1))
        kg_all = KnowledgeGraph(kg.entities, kg.relations, dataset.triplets())
        labels = dataset.labels()
        for variant in variants:
            run_fields = dict(study.get("run", {}))
            run_fields["variant"] = variant
            run_fields.setdefault("seed", seed)
            run_fields.setdefault("eval_k", list(k_values))
            config = config_from_dict(run_fields)
            detector = DualViewDetector(config).fit(kg_all)
            table = detector.detect()
            order = table.suspicion_order()
            report = evaluate(labels[order], k_values)
            results["rows"].append({
                "kind": kind,
                "variant": variant,
                "precision": {f"{k:g}": report.per_k[float(k)]["precision"]
                              for k in k_values},
            })
    results["table"] = render_study_table(results["rows"], k_values)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        _write_json(os.path.join(out_dir, "study.json"),
                    {k: v for k, v in results.items() if k != "table"})
        with open(os.path.join(out_dir, "study.txt"), "w", encoding="utf-8") as f:
            f.write(results["table"])
    return results


def render_study_table(rows, k_values):
    header = ["noise", "variant"] + [f"p@{k:g}" for k in sorted(k_values)]
    lines = [header]
    for row in rows:
        lines.append([row["kind"], row["variant"]]
                     + [f"{row['precision'][f'{k:g}']:.3f}" for k in sorted(k_values)])
    widths = [max(len(line[c]) for line in lines) for c in range(len(header))]
    out = []
    for line in lines:
        out.append("  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip())
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# reporting
# ---------------------------------------------------------------------------

def aggregate_report(run_dir):
    """Aggregate a run directory into one JSON document plus a text table."""
    missing = [name for name in RUN_ARTIFACTS
               if not os.path.exists(os.path.join(run_dir, name))]
    if missing:
        raise DataError(f"missing run artifacts in {run_dir}: {', '.join(missing)}")
    with open(os.path.join(run_dir, "config.json"), encoding="utf-8") as f:
        config = json.load(f)
    metrics = []
    with open(os.path.join(run_dir, "metrics.tsv"), encoding="utf-8") as f:
        lines = f.read().splitlines()
    for line in lines[1:]:
        epoch, lt, ls, lc = line.split("\t")
        metrics.append({"epoch": int(epoch), "loss_text": float(lt),
                        "loss_struct": float(ls), "loss_contrastive": float(lc)})
    evals = {}
    for name in sorted(os.listdir(run_dir)):
        if name.startswith("eval") and name.endswith(".json"):
            with open(os.path.join(run_dir, name), encoding="utf-8") as f:
                evals[name] = json.load(f)
    doc = {"config": config, "metrics": metrics, "evaluations": evals}

    lines = ["epoch  loss_text  loss_struct  loss_contrastive"]
    for row in metrics:
        lines.append(f"{row['epoch']:>5}  {row['loss_text']:<9.4f}  "
                     f"{row['loss_struct']:<11.4f}  {row['loss_contrastive']:.4f}")
    for name, ev in evals.items():
        lines.append("")
        lines.append(f"{name}: K  precision  recall")
        for k in sorted(ev.get("per_k", {}), key=float):
            entry = ev["per_k"][k]
            lines.append(f"  {k:>6}  {entry['precision']:.4f}     {entry['recall']:.4f}")
    text = "\n".join(lines) + "\n"

    _write_json(os.path.join(run_dir, "report.json"), doc)
    with open(os.path.join(run_dir, "report.txt"), "w", encoding="utf-8") as f:
        f.write(text)
    return doc, text
