"""Command line front end.

Every subcommand reads one JSON config file; ``--set key=value`` overrides
individual keys (values parsed as JSON, falling back to plain strings). Each
subcommand writes ``run_manifest_<command>.json`` into its output directory,
and passing that manifest back as ``--config`` reproduces the run.
"""
from __future__ import annotations

import argparse
import json
import os
import platform
import sys
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .distance import DistanceMetric
from .errors import ConfigError, DegenerateSimilarityError, IngestionError, PairTransferError
from .evaluation import (
    BenchmarkSpec,
    ExperimentConfig,
    reports_to_csv,
    reports_to_json,
    run_experiment,
    synthesize_benchmark,
)
from .serialization import save_checkpoint, write_json
from .similarity import compute_ipd_report
from .timeseries import (
    PairedMultiSourceDataset,
    load_dsa_directory,
    load_generic,
    load_npz,
    rescale_minmax,
    save_npz,
    write_generic,
)
from .trainer import STRATEGIES, FinetuneConfig, PretrainConfig, default_model, run_pipeline

DEFAULT_NOISE_SWEEP = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)

# Most similar sources per DSA target, as reported for the original study.
DSA_REFERENCE_TOP2 = {
    "torso": ("left_leg", "right_leg"),
    "right_arm": ("left_arm", "right_leg"),
    "left_arm": ("right_arm", "left_leg"),
    "left_leg": ("right_leg", "left_arm"),
    "right_leg": ("left_leg", "right_arm"),
}


@dataclass
class RunConfig:
    """Resolved run configuration; defaults reproduce the published hyperparameters."""

    source: dict = field(default_factory=lambda: {"type": "synthetic"})
    target: str | None = None
    distance: str = "dtw"
    dtw_window: int | None = None
    ipd_m: int = 1000
    allow_uniform: bool = False
    lambda0: float = 5e-4
    J: int = 50
    batch_size: int | None = None
    lambda_T: float = 1e-3
    J_target: int = 100
    k_folds: int = 10
    R: int = 5
    lr_floor: float = 1e-6
    hidden: int = 32
    init_scheme: str = "uniform01"
    strategy: str = "adaptive"
    strategies: list = field(default_factory=lambda: ["adaptive", "no_transfer", "direct_transfer", "no_pairing"])
    repetitions: int = 15
    noise_ratios: list = field(default_factory=lambda: [0.0])
    n_train_subjects: int | None = None
    seed: int = 0
    output_dir: str = "runs/default"

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if "config" in d and "format" in d:  # a run manifest
            d = d["config"]
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def validate(self):
        kind = self.source.get("type")
        if kind not in ("dsa", "manifest", "synthetic"):
            raise ConfigError(f"source.type must be dsa, manifest or synthetic, got {kind!r}")
        if kind in ("dsa", "manifest") and not self.source.get("path"):
            raise ConfigError(f"source.path is required for a {kind} source")
        for s in [self.strategy, *self.strategies]:
            if s not in STRATEGIES:
                raise ConfigError(f"unknown strategy {s!r}; choose from {', '.join(STRATEGIES)}")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be at least 1")
        if any(not 0 <= r <= 1 for r in self.noise_ratios):
            raise ConfigError("noise ratios must lie in [0, 1]")
        try:
            self.metric()
            self.pretrain_config()
            self.finetune_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def metric(self) -> DistanceMetric:
        return DistanceMetric(self.distance, self.dtw_window)

    def pretrain_config(self) -> PretrainConfig:
        return PretrainConfig(self.lambda0, self.J, self.batch_size, self.seed)

    def finetune_config(self) -> FinetuneConfig:
        return FinetuneConfig(self.lambda_T, self.J_target, self.k_folds, self.R, self.lr_floor, self.seed)

    def experiment_config(self) -> ExperimentConfig:
        return ExperimentConfig(
            self.metric(), self.pretrain_config(), self.finetune_config(), self.hidden,
            self.init_scheme, self.ipd_m, self.n_train_subjects, True,
        )


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_config(path, overrides=()) -> RunConfig:
    d = {}
    if path is not None:
        try:
            d = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"{path}: {exc.strerror or exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if "config" in d and "format" in d:
            d = d["config"]
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        if "." in key:
            outer, inner = key.split(".", 1)
            d.setdefault(outer, {})[inner] = _parse_value(value)
        else:
            d[key] = _parse_value(value)
    return RunConfig.from_dict(d)


# ---------------------------------------------------------------------------
# dataset handling


def load_source(cfg: RunConfig) -> PairedMultiSourceDataset:
    src = cfg.source
    kind = src["type"]
    if kind == "dsa":
        ds = load_dsa_directory(src["path"])
    elif kind == "manifest":
        ds = load_generic(src["path"])
    else:
        spec = BenchmarkSpec(**src.get("spec", {}))
        ds = synthesize_benchmark(spec, src.get("seed", cfg.seed))
    if cfg.target is not None:
        try:
            ds = ds.with_target(cfg.target)
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from None
    return ds


def _cache_paths(out: Path):
    return out / "dataset_raw.npz", out / "dataset_normalized.npz"


def cached_dataset(cfg: RunConfig, normalized: bool) -> PairedMultiSourceDataset:
    out = Path(cfg.output_dir)
    raw_p, norm_p = _cache_paths(out)
    p = norm_p if normalized else raw_p
    if p.exists():
        ds = load_npz(p)
        return ds.with_target(cfg.target) if cfg.target else ds
    ds = load_source(cfg)
    return rescale_minmax(ds) if normalized else ds


@contextmanager
def run_dir(cfg: RunConfig, command: str):
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    lock = out / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigError(f"{out} is in use by another run (remove {lock} if stale)") from None
    os.write(fd, str(os.getpid()).encode())
    os.close(fd)
    try:
        yield out
        write_json(out / f"run_manifest_{command}.json", {
            "format": "pairtransfer-run-manifest",
            "command": command,
            "config": asdict(cfg),
            "versions": {
                "pairtransfer": __version__,
                "numpy": np.__version__,
                "python": platform.python_version(),
            },
        })
    finally:
        lock.unlink(missing_ok=True)


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(cfg: RunConfig) -> int:
    spec = BenchmarkSpec(**cfg.source.get("spec", {}))
    with run_dir(cfg, "synth") as out:
        ds = synthesize_benchmark(spec, cfg.source.get("seed", cfg.seed))
        path = write_generic(ds, out / "synthetic")
        print(f"wrote {path}")
        _print_summary(ds)
    return 0


def _print_summary(ds: PairedMultiSourceDataset):
    s = ds.summary()
    print(f"V={s['V']} N={s['N']} K={s['K']} T={s['T']}")
    print(f"Q={s['Q']} target={s['target']} domains={','.join(s['domains'])}")
    print("label histogram: " + " ".join(str(c) for c in s["label_histogram"]))


def cmd_ingest(cfg: RunConfig) -> int:
    with run_dir(cfg, "ingest") as out:
        ds = load_source(cfg)
        raw_p, norm_p = _cache_paths(out)
        save_npz(ds, raw_p)
        save_npz(rescale_minmax(ds), norm_p)
        _print_summary(ds)
    return 0


def cmd_ipd(cfg: RunConfig) -> int:
    with run_dir(cfg, "ipd") as out:
        ds = cached_dataset(cfg, normalized=True)
        report = compute_ipd_report(ds, cfg.metric(), cfg.ipd_m, cfg.seed,
                                    allow_uniform=cfg.allow_uniform)
        d = report.to_dict()
        ref = DSA_REFERENCE_TOP2.get(report.target) if set(ds.domain_names) == set(DSA_REFERENCE_TOP2) else None
        if ref is not None:
            d["reference_top2"] = list(ref)
            d["reference_top2_match"] = set(report.ranking[:2]) == set(ref)
        write_json(out / "ipd_report.json", d)
        print(report.table())
        if report.weights is not None and report.weights.uniform_fallback:
            print("note: all sources are indistinguishable from the target; using uniform weights")
        if ref is not None:
            print(f"reference top-2 for {report.target}: {', '.join(ref)} "
                  f"({'match' if d['reference_top2_match'] else 'differs'})")
    return 0


def cmd_train(cfg: RunConfig) -> int:
    with run_dir(cfg, "train") as out:
        ds = cached_dataset(cfg, normalized=True)
        model = default_model(ds, cfg.hidden, cfg.seed, cfg.init_scheme)
        res = run_pipeline(ds, cfg.metric(), cfg.pretrain_config(), cfg.finetune_config(),
                           cfg.strategy, model=model, ipd_m=cfg.ipd_m, ipd_seed=cfg.seed,
                           allow_uniform=cfg.allow_uniform)
        save_checkpoint(res.pretrained, out / "checkpoint_pretrain.json")
        save_checkpoint(res.final, out / "checkpoint_final.json")
        (out / "trace.csv").write_text(res.trace.to_csv())
        if res.report is not None:
            write_json(out / "ipd_report.json", res.report.to_dict())
        pre = res.trace.domains("pretrain")
        ft = res.trace.phase("finetune")
        print(f"strategy={cfg.strategy} pretrain domains: {', '.join(pre) or '-'}")
        print(f"finetune epochs: {len(ft)}" + (f" (final r={ft[-1].r})" if ft else ""))
    return 0


def _evaluate(cfg: RunConfig, noise_ratios, command: str) -> int:
    with run_dir(cfg, command) as out:
        ds = cached_dataset(cfg, normalized=False)
        reports = run_experiment(ds, cfg.strategies, cfg.experiment_config(), cfg.repetitions,
                                 noise_ratios, cfg.seed)
        name = "noise_sweep" if command == "noise-sweep" else "reports"
        (out / f"{name}.csv").write_text(reports_to_csv(reports))
        (out / f"{name}.json").write_text(reports_to_json(reports) + "\n")
        for r in reports:
            print(f"{r.strategy:<22} noise={r.noise_ratio:<4} RCC {r.mean:.4f} (+/- {r.std:.4f})")
    return 0


def cmd_evaluate(cfg: RunConfig) -> int:
    return _evaluate(cfg, cfg.noise_ratios, "evaluate")


def cmd_noise_sweep(cfg: RunConfig) -> int:
    ratios = cfg.noise_ratios if len(cfg.noise_ratios) > 1 else DEFAULT_NOISE_SWEEP
    return _evaluate(cfg, ratios, "noise-sweep")


COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "ipd": cmd_ipd,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "noise-sweep": cmd_noise_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pairtransfer", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("-c", "--config", help="JSON config or run manifest")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (repeatable)")
        sp.add_argument("-o", "--output-dir", help="shorthand for --set output_dir=...")
        sp.add_argument("--strategy", choices=STRATEGIES)
        sp.add_argument("--target")
        sp.add_argument("--distance", choices=("dtw", "euclidean"))
        sp.add_argument("--seed", type=int)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = list(args.set)
    for key in ("output_dir", "strategy", "target", "distance", "seed"):
        val = getattr(args, key)
        if val is not None:
            overrides.append(f"{key}={json.dumps(val)}")
    try:
        cfg = load_config(args.config, overrides)
        return COMMANDS[args.command](cfg)
    except PairTransferError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc, DegenerateSimilarityError):
            print("hint: rerun with --set allow_uniform=true to pre-train with equal weights",
                  file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        err = IngestionError if isinstance(exc, OSError) else ConfigError
        print(f"error: {exc}", file=sys.stderr)
        return err.exit_code


if __name__ == "__main__":
    sys.exit(main())
