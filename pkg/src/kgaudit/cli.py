"""Command-line surface.

Subcommands: prep, inject, synth, train, detect, eval, study, report.
Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .baselines import BaselineConfig
from .detector import config_from_dict
from .errors import ConfigError, DataError, NumericalError
from .kg import load_kg, save_kg, stats
from .noise import INJECTORS, save_manifest, save_noisy_dataset
from .pipeline import (aggregate_report, empirical_study, evaluate_ranking,
                       run_detect, run_training)
from .synth import make_synthetic_kg


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(self._usage_exit(message))

    def _usage_exit(self, message):
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        return 1


def _kg_args(sub):
    sub.add_argument("--triplets", required=True)
    sub.add_argument("--entities", required=True)
    sub.add_argument("--relations", required=True)


def build_parser():
    parser = _Parser(prog="kgaudit",
                     description="Knowledge-graph error detection toolkit")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("prep", help="load and validate a knowledge graph")
    _kg_args(p)
    p.add_argument("--out-dir", help="write normalized copies and stats here")
    p.set_defaults(func=cmd_prep)

    p = subs.add_parser("inject", help="generate a labeled noisy dataset")
    _kg_args(p)
    p.add_argument("--kind", required=True, choices=sorted(INJECTORS))
    p.add_argument("--ratio", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--manifest")
    p.add_argument("--embed-dim", type=int, default=256)
    p.add_argument("--split-fraction", type=float, default=0.9)
    p.add_argument("--adv-dim", type=int, default=32)
    p.add_argument("--adv-epochs", type=int, default=30)
    p.add_argument("--adv-lr", type=float, default=0.05)
    p.set_defaults(func=cmd_inject)

    p = subs.add_parser("synth", help="generate a synthetic knowledge graph")
    p.add_argument("--entities", type=int, default=300)
    p.add_argument("--relations", type=int, default=12)
    p.add_argument("--triplets", type=int, default=5000)
    p.add_argument("--clusters", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)

    p = subs.add_parser("train", help="train the detector per a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", help="override the config's output directory")
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("detect", help="rank triplets by ascending confidence")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_detect)

    p = subs.add_parser("eval", help="precision/recall at top-K for a ranking")
    p.add_argument("--ranking", required=True)
    p.add_argument("--labels", required=True, help="labeled dataset TSV")
    p.add_argument("--entities", required=True)
    p.add_argument("--relations", required=True)
    p.add_argument("--k", default="0.01,0.05",
                   help="comma-separated cutoff ratios")
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("study", help="per-noise-kind empirical study")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", help="override the config's output directory")
    p.set_defaults(func=cmd_study)

    p = subs.add_parser("report", help="aggregate a run directory")
    p.add_argument("--run-dir", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def _load_json(path):
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path} is not valid JSON: {exc}") from exc


def cmd_prep(args):
    kg = load_kg(args.triplets, args.entities, args.relations)
    doc = stats(kg)
    doc["warnings"] = {
        "dropped_text_entities": kg.report.dropped_text_entities,
        "dropped_text_relations": kg.report.dropped_text_relations,
        "missing_text_entities": kg.report.missing_text_entities,
        "missing_text_relations": kg.report.missing_text_relations,
        "duplicate_triplets": kg.report.duplicate_triplets,
    }
    print(json.dumps(doc, indent=2, sort_keys=True))
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        save_kg(kg, os.path.join(args.out_dir, "triplets.tsv"),
                os.path.join(args.out_dir, "entities.tsv"),
                os.path.join(args.out_dir, "relations.tsv"))
        with open(os.path.join(args.out_dir, "stats.json"), "w",
                  encoding="utf-8") as f:
            json.dump(doc, f, indent=2, sort_keys=True)
            f.write("\n")
    return 0


def cmd_inject(args):
    kg = load_kg(args.triplets, args.entities, args.relations)
    kwargs = {"seed": args.seed}
    if args.kind in ("semantic", "mixed"):
        kwargs["dim"] = args.embed_dim
    if args.kind in ("adversarial", "mixed"):
        kwargs["baseline_config"] = BaselineConfig(
            dim=args.adv_dim, epochs=args.adv_epochs, learning_rate=args.adv_lr)
        kwargs["split_fraction"] = args.split_fraction
    dataset = INJECTORS[args.kind](kg, args.ratio, **kwargs)
    save_noisy_dataset(dataset, kg, args.out)
    manifest_path = args.manifest or args.out + ".manifest.json"
    save_manifest(dataset, manifest_path)
    print(json.dumps(dataset.manifest(), indent=2, sort_keys=True))
    return 0


def cmd_synth(args):
    kg = make_synthetic_kg(args.entities, args.relations, args.triplets,
                           args.clusters, seed=args.seed)
    os.makedirs(args.out_dir, exist_ok=True)
    save_kg(kg, os.path.join(args.out_dir, "triplets.tsv"),
            os.path.join(args.out_dir, "entities.tsv"),
            os.path.join(args.out_dir, "relations.tsv"))
    print(json.dumps(stats(kg), indent=2, sort_keys=True))
    return 0


def cmd_train(args):
    config = config_from_dict(_load_json(args.config))
    if args.out_dir:
        config.out_dir = args.out_dir
    run_training(config)
    print(f"run artifacts written to {config.out_dir}")
    return 0


def cmd_detect(args):
    config = config_from_dict(_load_json(args.config))
    run_detect(config, args.checkpoint, args.out)
    print(f"ranking written to {args.out}")
    return 0


def cmd_eval(args):
    try:
        k_values = [float(x) for x in args.k.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --k list {args.k!r}") from exc
    if not k_values:
        raise ConfigError("--k needs at least one cutoff")
    report = evaluate_ranking(args.ranking, args.labels, args.entities,
                              args.relations, k_values)
    payload = report.to_json()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(payload)
    print(payload, end="")
    print(f"wall clock: {report.wall_clock:.3f}s", file=sys.stderr)
    return 0


def cmd_study(args):
    study = _load_json(args.config)
    if args.out_dir:
        study["out_dir"] = args.out_dir
    results = empirical_study(study)
    print(results["table"], end="")
    return 0


def cmd_report(args):
    _doc, text = aggregate_report(args.run_dir)
    print(text, end="")
    return 0


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        return args.func(args) or 0
    except ConfigError as exc:
        print(f"kgaudit: config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"kgaudit: data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"kgaudit: numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
