"""Command-line entry points: prepare, train, grid, weaklabel, plot.

Every run writes exactly one manifest holding the fully resolved config,
input digests, and output paths, so any run can be reproduced from the
manifest alone.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field

from .config import ConfigError, DataError, load_config_file, resolve_config
from .data import CorpusSummary, load_corpus, read_corpus, write_corpus
from .training import EvalReport, cross_platform_grid, train
from .weak_labels import (
    LiveLabelerClient,
    ReplayLabelerClient,
    SeedLabeler,
    TargetTaxonomy,
    TransportError,
    WeakLabelSource,
    llm_label,
    load_lexicon,
)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_PARTIAL = 3


@dataclass
class RunManifest:
    command: str
    config_path: str | None
    resolved_config: dict
    seed: int
    input_digests: dict = field(default_factory=dict)
    output_paths: list = field(default_factory=list)
    started_at: str = ""
    finished_at: str = ""

    def write(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(dataclasses.asdict(self), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def read(cls, path: str) -> "RunManifest":
        with open(path) as fh:
            return cls(**json.load(fh))


def _digest_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; 2 is reserved for data errors here
    def error(self, message):
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="crosshate", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, backend=True):
        p.add_argument("--config", default=None, help="YAML config file")
        p.add_argument("--seed", type=int, default=None)
        if backend:
            p.add_argument("--backend", choices=["toy", "pretrained"], default=None)
            p.add_argument("--max-steps", type=int, default=None)

    p = sub.add_parser("prepare", help="convert a raw platform file to the canonical corpus format")
    p.add_argument("inputs", nargs="+", help="raw dataset file(s)")
    p.add_argument("--platform", required=True)
    p.add_argument("--out", required=True, help="canonical corpus path (.jsonl)")

    p = sub.add_parser("train", help="train one model on a canonical corpus")
    common(p)
    p.add_argument("--source", required=True, help="training corpus (.jsonl)")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("grid", help="train per source, evaluate on every target")
    common(p)
    p.add_argument("--source", action="append", required=True,
                   help="source corpus (.jsonl); repeatable")
    p.add_argument("--target", action="append", required=True,
                   help="target corpus (.jsonl); repeatable")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("weaklabel", help="attach weak target labels to a corpus")
    common(p, backend=False)
    p.add_argument("--source", required=True, help="corpus to label (.jsonl)")
    p.add_argument("--kind", choices=["lexicon", "external-llm", "gold-passthrough"],
                   default="lexicon")
    p.add_argument("--replay", default=None,
                   help="recorded responses for external-llm mode; live calls otherwise")
    p.add_argument("--out", required=True, help="labeled corpus path (.jsonl)")

    p = sub.add_parser("plot", help="render a latent dump or grid report")
    p.add_argument("--source", required=True, help="latent dump or grid report file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="image path (.png)")
    return parser


def _resolve(args) -> tuple:
    try:
        file_values = load_config_file(args.config) if args.config else {}
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {args.config}") from e
    overrides = {}
    for flag, key in (("seed", "seed"), ("backend", "backend"),
                      ("max_steps", "max_steps")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    return resolve_config(file_values, overrides), args.config


def _sidecar_manifest(out_path: str) -> str:
    return out_path + ".manifest.json"


def cmd_prepare(args) -> int:
    records = []
    n_rejected = 0
    for path in args.inputs:
        recs, part = load_corpus(path, args.platform)
        records.extend(recs)
        n_rejected += part.n_rejected
    summary = CorpusSummary.from_records(records, n_rejected=n_rejected)
    write_corpus(args.out, records)
    summary_path = args.out + ".summary.json"
    with open(summary_path, "w") as fh:
        json.dump(summary.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"{args.platform}: {summary.n_posts} posts, "
          f"{summary.n_hateful} hateful ({summary.hate_pct:.1f}%), "
          f"{summary.n_rejected} rejected")
    manifest = RunManifest(
        command="prepare", config_path=None, resolved_config={}, seed=0,
        input_digests={p: _digest_file(p) for p in args.inputs},
        output_paths=[args.out, summary_path], started_at=_now())
    manifest.finished_at = _now()
    manifest.write(_sidecar_manifest(args.out))
    return EXIT_OK


def cmd_train(args) -> int:
    cfg, config_path = _resolve(args)
    started = _now()
    records = read_corpus(args.source)
    ckpt = train(records, cfg)
    os.makedirs(args.out, exist_ok=True)
    ckpt_dir = os.path.join(args.out, "checkpoint")
    ckpt.save(ckpt_dir)
    final = ckpt.history[-1]["val_macro_f1"] if ckpt.history else None
    best = max((h["val_macro_f1"] for h in ckpt.history), default=None)
    print(f"trained {ckpt.step} steps on {args.source}; "
          f"best val macro-F1 {best if best is not None else 'n/a'} "
          f"(last {final if final is not None else 'n/a'})")
    manifest = RunManifest(
        command="train", config_path=config_path,
        resolved_config=cfg.to_dict(), seed=cfg.seed,
        input_digests={args.source: _digest_file(args.source)},
        output_paths=[ckpt_dir], started_at=started, finished_at=_now())
    manifest.write(os.path.join(args.out, "manifest.json"))
    return EXIT_OK


def _corpus_by_platform(paths: list) -> dict:
    out = {}
    for path in paths:
        records = read_corpus(path)
        if not records:
            raise DataError(f"{path}: empty corpus")
        platforms = {r.platform for r in records}
        if len(platforms) > 1:
            raise DataError(f"{path}: mixed platforms {sorted(platforms)}")
        out[platforms.pop()] = records
    return out


def cmd_grid(args) -> int:
    cfg, config_path = _resolve(args)
    started = _now()
    sources = _corpus_by_platform(args.source)
    targets = _corpus_by_platform(args.target)
    report = cross_platform_grid(sources, targets, cfg)
    os.makedirs(args.out, exist_ok=True)
    report_path = os.path.join(args.out, "grid.tsv")
    report.save(report_path)
    print(report.render())
    manifest = RunManifest(
        command="grid", config_path=config_path,
        resolved_config=cfg.to_dict(), seed=cfg.seed,
        input_digests={p: _digest_file(p) for p in args.source + args.target},
        output_paths=[report_path], started_at=started, finished_at=_now())
    manifest.write(os.path.join(args.out, "manifest.json"))
    if report.has_failures:
        print("warning: grid completed with failed cells", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_weaklabel(args) -> int:
    cfg, config_path = _resolve(args)
    started = _now()
    records = read_corpus(args.source)
    taxonomy = TargetTaxonomy()
    if args.kind == "external-llm":
        client = ReplayLabelerClient(args.replay) if args.replay else LiveLabelerClient()
        labels = [llm_label(r.text, taxonomy, client) for r in records]
    else:
        lexicon = load_lexicon(cfg.lexicon_path or None) if args.kind == "lexicon" else None
        labeler = SeedLabeler(taxonomy, WeakLabelSource(kind=args.kind),
                              lexicon=lexicon)
        labels = [labeler(r) for r in records]
    with open(args.out, "w") as fh:
        for record, label in zip(records, labels):
            row = {"id": record.id,
                   "target": taxonomy.classes[label.argmax],
                   "confidence": label.confidence,
                   "target_probs": [float(p) for p in label.probs.tolist()]}
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    print(f"labeled {len(records)} records from {args.source} "
          f"with {args.kind} supervision")
    manifest = RunManifest(
        command="weaklabel", config_path=config_path,
        resolved_config=cfg.to_dict(), seed=cfg.seed,
        input_digests={args.source: _digest_file(args.source)},
        output_paths=[args.out], started_at=started, finished_at=_now())
    manifest.write(_sidecar_manifest(args.out))
    return EXIT_OK


def cmd_plot(args) -> int:
    from . import viz
    from .training import load_latent_dump

    started = _now()
    with open(args.source) as fh:
        first = fh.readline()
    if first.startswith("# config"):
        report = EvalReport.load(args.source)
        viz.plot_grid_report(report, args.out)
        outputs = [args.out]
        print(f"rendered grid report to {args.out}")
    else:
        rows = load_latent_dump(args.source)
        import numpy as np
        coords = viz.project_2d(np.stack([v for _, _, v in rows]), seed=args.seed)
        coords_path = os.path.splitext(args.out)[0] + ".coords.tsv"
        viz.write_coordinates(coords_path, rows, coords)
        viz.plot_latents(rows, coords, args.out)
        outputs = [args.out, coords_path]
        print(f"projected {len(rows)} latents to {args.out} "
              f"(coordinates in {coords_path})")
    manifest = RunManifest(
        command="plot", config_path=None, resolved_config={},
        seed=getattr(args, "seed", 0),
        input_digests={args.source: _digest_file(args.source)},
        output_paths=outputs, started_at=started, finished_at=_now())
    manifest.write(_sidecar_manifest(args.out))
    return EXIT_OK


_HANDLERS = {
    "prepare": cmd_prepare,
    "train": cmd_train,
    "grid": cmd_grid,
    "weaklabel": cmd_weaklabel,
    "plot": cmd_plot,
}


def main(argv: list | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError, TransportError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
