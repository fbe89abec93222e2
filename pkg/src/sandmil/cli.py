"""Command-line surface: synth, train, predict, evaluate, optimize-weights.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bundle import BundleError, ModelBundle
from .ckta import AlignmentError, LabeledPaths, optimize_weights
from .clustering import ClusteringError, approx_cluster
from .config import PipelineConfig, load_config
from .forest import ForestError, predict as forest_predict, train_forest
from .ingest import (
    Label,
    ParseError,
    extract_instances,
    load_reports,
    split_by_time,
    write_reports,
)
from .metrics import confusion_rates
from .report import render_report_figures, write_predictions, write_rate_report
from .similarity import similarity_for_type
from .synthgen import demo_family_specs, generate_corpus, load_family_specs
from .vectorize import Projector, RTYPE_ORDER, build_vocabulary, write_projection

USAGE_ERROR = 1
DATA_ERROR = 2
INTERNAL_ERROR = 3

_DATA_ERRORS = (
    ParseError,
    BundleError,
    ClusteringError,
    ForestError,
    AlignmentError,
    ValueError,
    OSError,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _seed_children(seed: int, count: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count)]


def _parse_cutoff(raw: str):
    from .ingest import _parse_timestamp

    return _parse_timestamp(raw)


def _load_labeled(path, cutoff=None, keep: str = "train"):
    samples = load_reports(path)
    if cutoff is not None:
        train, test = split_by_time(samples, cutoff)
        samples = train if keep == "train" else test
    labeled = [s for s in samples if s.label != Label.UNKNOWN]
    return samples, labeled


def _similarities(config: PipelineConfig, weights: dict | None = None):
    sim_cfg = config.similarity_config()
    if weights:
        if "file" in weights:
            sim_cfg.file_weights = tuple(weights["file"])
        if "registry" in weights:
            sim_cfg.registry_weights = tuple(weights["registry"])
    return {rtype: similarity_for_type(rtype.value, sim_cfg) for rtype in RTYPE_ORDER}


def train_pipeline(samples, config: PipelineConfig, seed: int = 0, threads: int = 1):
    """Cluster instance names, build the vocabulary, project, and fit the forest."""
    labeled = [s for s in samples if s.label != Label.UNKNOWN]
    n_classes = len({s.label for s in labeled})
    if len(labeled) < 2 or n_classes < 2:
        raise ValueError("training data must contain both malicious and legitimate samples")
    sims = _similarities(config)
    instances = extract_instances(labeled)
    seeds = _seed_children(seed, len(RTYPE_ORDER) + 1)
    prototypes = {}
    cluster_stats = {}
    for pos, rtype in enumerate(RTYPE_ORDER):
        names = instances.get(rtype)
        if not names:
            continue
        result = approx_cluster(
            names, sims[rtype], config.approx_config(seed=seeds[pos]), rtype=rtype.value
        )
        prototypes[rtype] = result.prototypes
        cluster_stats[rtype.value] = {
            "names": len(names),
            "prototypes": len(result.prototypes),
            "sim_evaluations": result.sim_evaluations,
            "iterations": len(result.iterations),
        }
    vocabulary = build_vocabulary(prototypes)
    threshold = config.epsilon if config.projection_threshold else None
    projector = Projector(vocabulary, sims, threshold=threshold)
    x = projector.project_corpus(labeled, threads=threads)
    y = np.array([1 if s.label == Label.MALICIOUS else 0 for s in labeled], dtype=np.int64)
    forest = train_forest(x, y, config.forest_config(seed=seeds[-1]))
    bundle = ModelBundle(
        config=config,
        vocabulary=vocabulary,
        forest=forest,
        weights={
            "file": [float(v) for v in config.file_weights],
            "registry": [float(v) for v in config.registry_weights],
        },
    )
    return bundle, labeled, x, y, cluster_stats


def predict_samples(bundle: ModelBundle, samples, threads: int = 1):
    sims = _similarities(bundle.config, bundle.weights)
    threshold = bundle.config.epsilon if bundle.config.projection_threshold else None
    projector = Projector(bundle.vocabulary, sims, threshold=threshold)
    x = projector.project_corpus(samples, threads=threads)
    labels, scores = forest_predict(bundle.forest, x)
    verdicts = [Label.MALICIOUS.value if v else Label.LEGITIMATE.value for v in labels]
    return verdicts, scores


def _cmd_synth(args) -> int:
    if args.spec:
        families, benign = load_family_specs(args.spec)
    else:
        families, benign = demo_family_specs(
            samples_per_family=args.samples_per_family,
            benign_samples=args.benign_samples,
            n_families=args.families,
        )
    corpus = generate_corpus(families, benign, seed=args.seed)
    write_reports(corpus, args.out)
    print(f"wrote {len(corpus)} samples to {args.out}")
    return 0


def _cmd_train(args) -> int:
    config = load_config(args.config) if args.config else PipelineConfig()
    cutoff = _parse_cutoff(args.cutoff) if args.cutoff else None
    samples, _ = _load_labeled(args.reports, cutoff, keep="train")
    if not samples:
        raise ValueError(f"no training samples in {args.reports}")
    bundle, labeled, x, y, cluster_stats = train_pipeline(
        samples, config, seed=args.seed, threads=args.threads
    )
    out = Path(args.out)
    bundle.save(out)
    write_projection(out / "projected.jsonl", [s.sample_id for s in labeled], x)
    pred_labels, _ = forest_predict(bundle.forest, x)
    truths = [s.label.value for s in labeled]
    preds = [Label.MALICIOUS.value if v else Label.LEGITIMATE.value for v in pred_labels]
    report = confusion_rates(truths, preds)
    write_rate_report(out, report, extra={"scope": "training", "clusters": cluster_stats})
    for rtype, stats in cluster_stats.items():
        print(
            f"{rtype}: {stats['prototypes']} prototypes from {stats['names']} names "
            f"({stats['sim_evaluations']} similarity evaluations)"
        )
    print(f"vocabulary size: {len(bundle.vocabulary)}")
    print(f"training accuracy: {report.acc:.4f}")
    print(f"model written to {out}")
    return 0


def _cmd_predict(args) -> int:
    bundle = ModelBundle.load(args.model)
    samples = load_reports(args.reports)
    if not samples:
        raise ValueError(f"no samples in {args.reports}")
    verdicts, scores = predict_samples(bundle, samples, threads=args.threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_predictions(out / "predictions.tsv", [s.sample_id for s in samples], verdicts, scores)
    print(f"wrote predictions for {len(samples)} samples to {out / 'predictions.tsv'}")
    return 0


def _cmd_evaluate(args) -> int:
    bundle = ModelBundle.load(args.model)
    cutoff = _parse_cutoff(args.cutoff) if args.cutoff else None
    _, labeled = _load_labeled(args.reports, cutoff, keep="test")
    if not labeled:
        raise ValueError("evaluation set is empty (no labeled samples)")
    verdicts, scores = predict_samples(bundle, labeled, threads=args.threads)
    truths = [s.label.value for s in labeled]
    report = confusion_rates(truths, verdicts)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_predictions(out / "predictions.tsv", [s.sample_id for s in labeled], verdicts, scores)
    write_rate_report(out, report, extra={"scope": "evaluation", "samples": len(labeled)})
    render_report_figures(out, report, scores, truths)
    print(report.to_text())
    print(f"report written to {out}")
    return 0


def _cmd_optimize_weights(args) -> int:
    config = load_config(args.config) if args.config else PipelineConfig()
    data = LabeledPaths.from_jsonl(args.paths)
    sim_cfg = config.similarity_config()
    known = (
        sim_cfg.file_known_folders
        if args.rtype == "file"
        else sim_cfg.registry_known_folders
    )
    result = optimize_weights(
        data, config.optimizer_config(seed=args.seed), known, lowercase=sim_cfg.lowercase
    )
    payload = {
        "rtype": args.rtype,
        "weights": [float(v) for v in result.weights],
        "alignment_before": result.alignment_before,
        "alignment_after": result.alignment_after,
    }
    Path(args.out).write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    print(
        f"alignment {result.alignment_before:.4f} -> {result.alignment_after:.4f}; "
        f"weights written to {args.out}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sandmil", description=__doc__)
    parser.add_argument("--version", action="version", version=f"sandmil {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate a synthetic report corpus")
    synth.add_argument("--out", required=True, help="output JSONL report file")
    synth.add_argument("--spec", help="family spec JSON file (default: built-in demo)")
    synth.add_argument("--families", type=int, default=10)
    synth.add_argument("--samples-per-family", type=int, default=200)
    synth.add_argument("--benign-samples", type=int, default=1000)
    synth.add_argument("--seed", type=int, default=0)
    synth.set_defaults(func=_cmd_synth)

    train = sub.add_parser("train", help="cluster, vectorize, and fit the classifier")
    train.add_argument("--reports", required=True, help="JSONL report file")
    train.add_argument("--config", help="pipeline config JSON file")
    train.add_argument("--out", required=True, help="output model directory")
    train.add_argument("--cutoff", help="train only on samples collected before this time")
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--threads", type=int, default=1)
    train.set_defaults(func=_cmd_train)

    pred = sub.add_parser("predict", help="classify samples with a trained model")
    pred.add_argument("--reports", required=True)
    pred.add_argument("--model", required=True, help="model bundle directory")
    pred.add_argument("--out", required=True, help="output directory")
    pred.add_argument("--threads", type=int, default=1)
    pred.set_defaults(func=_cmd_predict)

    ev = sub.add_parser("evaluate", help="score a model against labeled reports")
    ev.add_argument("--reports", required=True)
    ev.add_argument("--model", required=True)
    ev.add_argument("--out", required=True)
    ev.add_argument("--cutoff", help="evaluate only samples collected at or after this time")
    ev.add_argument("--threads", type=int, default=1)
    ev.set_defaults(func=_cmd_evaluate)

    opt = sub.add_parser("optimize-weights", help="learn similarity weights from labeled paths")
    opt.add_argument("--paths", required=True, help='JSONL of {"path":..., "class":...}')
    opt.add_argument("--config", help="pipeline config JSON file")
    opt.add_argument("--out", required=True, help="output weights JSON file")
    opt.add_argument("--rtype", choices=("file", "registry"), default="file")
    opt.add_argument("--seed", type=int, default=0)
    opt.set_defaults(func=_cmd_optimize_weights)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except _DATA_ERRORS as exc:
        print(f"sandmil: error: {exc}", file=sys.stderr)
        return DATA_ERROR
    except Exception as exc:  # pragma: no cover - defensive
        print(f"sandmil: internal error: {exc}", file=sys.stderr)
        return INTERNAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
