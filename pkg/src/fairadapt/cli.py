"""Command-line entry point: fetch data, print split statistics, train, export latents."""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

from .datasets import (
    DATASET_IDS,
    fetch_datasets,
    load_dataset,
    make_split,
    split_stats,
    stats_rows,
    valid_split_ids,
    write_stats_csv,
)
from .errors import FairAdaptError
from .losses import LossWeights
from .metrics import UNDEFINED_TEXT, EvalReport, write_reports_csv
from .model import FairModel, encode, load_model, save_model
from .trainer import ABLATIONS, CURVE_FIELDS, TrainConfig, run_repeated

log = logging.getLogger("fairadapt")

DEFAULT_DATA_DIR = "data"
DEFAULT_OUT = "runs"
WEIGHT_KEYS = ("alpha", "beta", "gamma")
SUMMARY_HEADER = "| Dataset | Split | Method | Acc. | ΔDP | ΔEO | ΔAO |\n|---|---|---|---|---|---|---|\n"


class InvocationError(FairAdaptError, ValueError):
    pass


@dataclass
class ExperimentConfig:
    dataset: str
    split: str
    ablations: tuple[str, ...] = ("full",)
    runs: int = 7
    seed: int = 0
    out: str = DEFAULT_OUT
    data_dir: str = DEFAULT_DATA_DIR
    workers: int = 1
    train: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.dataset not in DATASET_IDS:
            raise InvocationError(f"unknown dataset {self.dataset!r}; valid: {', '.join(DATASET_IDS)}")
        valid = valid_split_ids(self.dataset)
        if self.split not in valid:
            raise InvocationError(
                f"split {self.split!r} is not valid for {self.dataset}; valid: {', '.join(valid)}"
            )
        for ab in self.ablations:
            if ab not in ABLATIONS:
                raise InvocationError(f"unknown ablation {ab!r}; valid: {', '.join(ABLATIONS)}")
        if self.runs < 1:
            raise InvocationError(f"--runs must be >= 1, got {self.runs}")
        if self.workers < 1:
            raise InvocationError(f"--workers must be >= 1, got {self.workers}")
        for ab in self.ablations:
            self.train_config(ab)

    def train_config(self, ablation: str) -> TrainConfig:
        """TrainConfig for one ablation; bad override values surface as InvocationError."""
        types = {f.name: f.type for f in fields(TrainConfig)}
        kwargs, weights = {}, {}
        for key, raw in self.train.items():
            if key in WEIGHT_KEYS:
                weights[key] = _parse_value(key, raw, "float")
            elif key in types and key not in ("weights", "seed", "ablation"):
                kwargs[key] = _parse_value(key, raw, types[key])
            else:
                raise InvocationError(f"unknown training option {key!r}")
        try:
            return TrainConfig(weights=LossWeights(**weights), seed=self.seed,
                               ablation=ablation, **kwargs)
        except FairAdaptError as exc:
            raise InvocationError(str(exc)) from exc


def _parse_value(key: str, raw, kind: str):
    if not isinstance(raw, str):
        return raw
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return raw.strip()
    except ValueError:
        raise InvocationError(f"bad value for {key}: {raw!r}") from None


def read_config(path) -> tuple[dict, dict]:
    """``[experiment]`` and ``[train]`` sections of an INI file."""
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise InvocationError(f"config file {path} not found")
    experiment = dict(parser["experiment"]) if parser.has_section("experiment") else {}
    train = dict(parser["train"]) if parser.has_section("train") else {}
    unknown = set(parser.sections()) - {"experiment", "train"}
    if unknown:
        raise InvocationError(f"unknown config sections: {', '.join(sorted(unknown))}")
    return experiment, train


def _option_name(key: str) -> str:
    # configparser lowercases keys; map back to the TrainConfig spelling
    canonical = {name.lower(): name for name in TrainConfig.field_names()}
    return canonical.get(key.strip().lower(), key.strip())


def build_experiment(args) -> ExperimentConfig:
    """Merge config file and flags; flags win."""
    experiment, raw_train = read_config(args.config) if args.config else ({}, {})
    train = {_option_name(k): v for k, v in raw_train.items()}
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise InvocationError(f"--set expects KEY=VALUE, got {item!r}")
        train[_option_name(key)] = value.strip()

    def pick(name, default):
        flag = getattr(args, name, None)
        if flag is not None:
            return flag
        return experiment.get(name, default)

    dataset = pick("dataset", None)
    split = pick("split", None)
    if dataset is None or split is None:
        raise InvocationError("both --dataset and --split are required (flag or config)")
    ablation = pick("ablation", "full")
    cfg = ExperimentConfig(
        dataset=dataset,
        split=split,
        ablations=tuple(a.strip() for a in str(ablation).split(",") if a.strip()),
        runs=int(pick("runs", 7)),
        seed=int(pick("seed", 0)),
        out=str(pick("out", DEFAULT_OUT)),
        data_dir=str(pick("data_dir", DEFAULT_DATA_DIR)),
        workers=int(pick("workers", 1)),
        train=train,
    )
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# output helpers


def _fmt(v) -> str:
    if v is None:
        return UNDEFINED_TEXT
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_curves_csv(path, curves: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_FIELDS)
        for row in curves:
            w.writerow(["" if isinstance(row[k], float) and row[k] != row[k] else _fmt(row[k])
                        for k in CURVE_FIELDS])


def summary_row(dataset: str, split: str, method: str, rep: EvalReport) -> str:
    def cell(v):
        return UNDEFINED_TEXT if v is None else f"{v:.2f}"

    mark = " (degenerate)" if rep.degenerate else ""
    return (f"| {dataset} | {split} | {method}{mark} | {cell(rep.balanced_accuracy)} | "
            f"{cell(rep.delta_dp)} | {cell(rep.delta_eo)} | {cell(rep.delta_ao)} |\n")


def write_resolved_config(path, cfg: ExperimentConfig) -> None:
    parser = configparser.ConfigParser()
    parser["experiment"] = {
        "dataset": cfg.dataset, "split": cfg.split, "ablation": ",".join(cfg.ablations),
        "runs": str(cfg.runs), "seed": str(cfg.seed), "workers": str(cfg.workers),
    }
    parser["train"] = {k: str(v) for k, v in sorted(cfg.train.items())}
    with open(path, "w") as fh:
        parser.write(fh)


def _write_run(run_dir: Path, outcome) -> None:
    fit = outcome.fit
    ckpt_dir = run_dir / "checkpoints"
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    write_curves_csv(run_dir / "curves.csv", fit.curves)
    entries = []
    for rec in fit.checkpoints:
        name = f"itr_{rec.iteration:06d}.ckpt"
        save_model(FairModel.from_arrays(rec.params, fit.model.activation), ckpt_dir / name)
        entries.append({
            "file": f"checkpoints/{name}", "iteration": rec.iteration,
            "val_acc": rec.val_acc, "dp_tar": rec.dp_tar, "score": rec.score,
            "degenerate": rec.degenerate,
        })
    manifest = {
        "seed": outcome.seed,
        "selected": f"checkpoints/itr_{fit.selected.iteration:06d}.ckpt",
        "selected_iteration": fit.selected.iteration,
        "all_degenerate": fit.all_degenerate,
        "counters": fit.counters,
        "target_label_reads": fit.target_label_reads,
        "checkpoints": entries,
    }
    (run_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    save_model(fit.model, run_dir / "selected.ckpt")


# ---------------------------------------------------------------------------
# subcommands


def cmd_fetch(args) -> int:
    manifest = fetch_datasets(args.data_dir, timeout=args.timeout, offline=args.offline)
    for name, meta in sorted(manifest["files"].items()):
        print(f"{name}: {meta['records']} records ({meta.get('origin', 'local')})")
    return 0


def cmd_stats(args) -> int:
    if args.dataset not in DATASET_IDS:
        raise InvocationError(f"unknown dataset {args.dataset!r}; valid: {', '.join(DATASET_IDS)}")
    valid = valid_split_ids(args.dataset)
    wanted = valid if args.split in (None, "all") else [args.split]
    for s in wanted:
        if s not in valid:
            raise InvocationError(f"split {s!r} is not valid for {args.dataset}; valid: {', '.join(valid)}")
    table = load_dataset(args.dataset, args.data_dir)
    rows = []
    for s in wanted:
        source, target = make_split(table, s)
        sid = f"{args.dataset[0].upper()}-random" if s == "random" else s
        rows.extend(stats_rows(sid, split_stats(source, target)))
    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_stats_csv(fh, rows)
    else:
        write_stats_csv(sys.stdout, rows)
    return 0


def cmd_run(args) -> int:
    cfg = build_experiment(args)
    table = load_dataset(cfg.dataset, cfg.data_dir)
    source, target = make_split(table, cfg.split)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_resolved_config(out / "config.ini", cfg)
    summary = [SUMMARY_HEADER]
    for ablation in cfg.ablations:
        tc = cfg.train_config(ablation)
        log.info("%s %s %s: %d run(s), seed %d", cfg.dataset, cfg.split, ablation, cfg.runs, cfg.seed)
        result = run_repeated(tc, source, target, cfg.runs, cfg.workers)
        exp_dir = out / f"{cfg.dataset}_{cfg.split}_{ablation}"
        rows = []
        for outcome in result.runs:
            _write_run(exp_dir / f"seed_{outcome.seed}", outcome)
            rows.append((f"seed_{outcome.seed}", outcome.report))
        rows.append(("mean", result.aggregate))
        write_reports_csv(exp_dir / "reports.csv", rows)
        line = summary_row(cfg.dataset, cfg.split, ablation, result.aggregate)
        (exp_dir / "summary.md").write_text(SUMMARY_HEADER + line)
        summary.append(line)
        print(line, end="")
    (out / "summary.md").write_text("".join(summary))
    return 0


def cmd_export_embeddings(args) -> int:
    ckpt = Path(args.checkpoint)
    if not ckpt.is_file():
        raise FileNotFoundError(f"checkpoint {ckpt} does not exist")
    if args.dataset not in DATASET_IDS or args.split not in valid_split_ids(args.dataset):
        raise InvocationError(f"invalid dataset/split {args.dataset}/{args.split}")
    model = load_model(ckpt)
    table = load_dataset(args.dataset, args.data_dir)
    source, target = make_split(table, args.split)
    if model.n_features != source.n:
        raise InvocationError(
            f"checkpoint expects {model.n_features} features, split {args.split} has {source.n}"
        )
    header = ["domain"] + [f"z{i + 1}" for i in range(model.latent_dim)] + ["a", "y"]
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for domain, ds in (("source", source), ("target", target)):
            latent = encode(model, ds.X, ds.a).data
            for row, a, y in zip(latent, ds.a, ds.y):
                w.writerow([domain, *("%.17g" % v for v in row), int(a), int(y)])
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fairadapt", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fetch", help="download and verify the datasets")
    f.add_argument("--data-dir", default=DEFAULT_DATA_DIR)
    f.add_argument("--timeout", type=float, default=300.0)
    f.add_argument("--offline", action="store_true", help="only verify files already present")
    f.set_defaults(func=cmd_fetch)

    s = sub.add_parser("stats", help="source/target split statistics as CSV")
    s.add_argument("--dataset", required=True)
    s.add_argument("--split", default="all", help="split id, 'random', or 'all'")
    s.add_argument("--data-dir", default=DEFAULT_DATA_DIR)
    s.add_argument("--out", help="CSV path (default: stdout)")
    s.set_defaults(func=cmd_stats)

    r = sub.add_parser("run", help="train and evaluate over several seeds")
    r.add_argument("--config", help="INI file with [experiment] and [train] sections")
    r.add_argument("--dataset")
    r.add_argument("--split")
    r.add_argument("--ablation", help="one of base, swd_only, fair_only, full; comma-separated for a sweep")
    r.add_argument("--runs", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--workers", type=int)
    r.add_argument("--out")
    r.add_argument("--data-dir", dest="data_dir")
    r.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a [train] option, e.g. --set itr=3000")
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("export-embeddings", help="write latent codes of both domains as CSV")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--dataset", required=True)
    e.add_argument("--split", required=True)
    e.add_argument("--data-dir", default=DEFAULT_DATA_DIR)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_export_embeddings)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InvocationError as exc:
        parser.error(str(exc))
    except FileNotFoundError as exc:
        print(f"fairadapt: {exc}", file=sys.stderr)
        return 1
    except FairAdaptError as exc:
        print(f"fairadapt: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
