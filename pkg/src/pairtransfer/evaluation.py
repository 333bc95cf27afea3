"""Evaluation protocol: RCC, binary positive-vs-rest tasks, noise injection,
repeated experiments and a synthetic paired benchmark."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import classifier as clf
from .distance import DistanceMetric
from .errors import ConfigError, PairTransferError, SplitError
from .timeseries import (
    DomainDataset,
    PairedMultiSourceDataset,
    TimeSeries,
    choose_train_subjects,
    rescale_minmax,
    split_by_subject,
)
from .trainer import FinetuneConfig, PretrainConfig, default_model, train_full_pipeline

NOISE_SCALE = 0.02


class TaskError(PairTransferError, ValueError):
    exit_code = 2


def rcc(model: clf.ClassifierState, test, y=None) -> float:
    """Fraction of examples whose argmax label matches the ground truth."""
    if y is None:
        test = list(test)
        if not test:
            raise ValueError("empty test set")
        X = np.stack([x.values if isinstance(x, TimeSeries) else np.asarray(x, float) for x, _ in test])
        y = np.array([int(c) for _, c in test])
    else:
        X = test
        y = np.asarray(y)
    if len(y) == 0:
        raise ValueError("empty test set")
    return float(np.mean(clf.predict(model, X) == y))


# ---------------------------------------------------------------------------
# binary tasks


def _binary(dataset: PairedMultiSourceDataset, index, is_pos) -> PairedMultiSourceDataset:
    labels = is_pos[index].astype(np.int64)
    sub = dataset.take(index, labels=labels)
    return PairedMultiSourceDataset(sub.domains, labels, sub.target_index, ("negative", "positive"))


def upsample_index(labels, positive_label, rng) -> np.ndarray:
    """Indices with the minority class bootstrapped up to the majority count."""
    is_pos = np.asarray(labels) == positive_label
    pos, neg = np.flatnonzero(is_pos), np.flatnonzero(~is_pos)
    if pos.size == 0:
        raise TaskError(f"no examples of positive label {positive_label}")
    if neg.size == 0:
        raise TaskError("no negative examples")
    if pos.size <= neg.size:
        pos = rng.choice(pos, size=neg.size, replace=True)
    else:
        neg = rng.choice(neg, size=pos.size, replace=True)
    return np.concatenate([pos, neg])


def downsample_index(labels, positive_label, rng) -> np.ndarray:
    """Indices with the majority class subsampled (no replacement) to the minority count."""
    is_pos = np.asarray(labels) == positive_label
    pos, neg = np.flatnonzero(is_pos), np.flatnonzero(~is_pos)
    if pos.size == 0:
        raise TaskError(f"no examples of positive label {positive_label}")
    if neg.size == 0:
        raise TaskError("no negative examples")
    if neg.size >= pos.size:
        neg = np.sort(rng.choice(neg, size=pos.size, replace=False))
    else:
        pos = np.sort(rng.choice(pos, size=neg.size, replace=False))
    return np.concatenate([pos, neg])


def make_binary_task(train: PairedMultiSourceDataset, test: PairedMultiSourceDataset,
                     positive_label: int, seed):
    """Positive-vs-rest relabelling (1 = positive) with class balancing.

    Training positives are bootstrapped up to the negative count; test
    negatives are subsampled without replacement down to the positive count.
    The same indices are applied to every domain.
    """
    rng = np.random.default_rng(seed)
    tr = upsample_index(train.labels, positive_label, rng)
    te = downsample_index(test.labels, positive_label, rng)
    return (
        _binary(train, tr, train.labels == positive_label),
        _binary(test, te, test.labels == positive_label),
    )


# ---------------------------------------------------------------------------
# noise


def inject_noise_array(values, ratio: float, rng) -> np.ndarray:
    """Noise injection on an (n, K, T) or (K, T) array with an explicit Generator."""
    if not 0.0 <= ratio <= 1.0:
        raise ValueError("noise ratio must lie in [0, 1]")
    x = np.array(values, dtype=float)
    single = x.ndim == 2
    if single:
        x = x[None]
    n, K, T = x.shape
    count = int(np.floor(ratio * T))
    if count == 0:
        return x[0] if single else x
    # uniform subset of `count` timestamps per series
    cols = np.argsort(rng.random((n, T)), axis=1)[:, :count]
    mask = np.zeros((n, T), dtype=bool)
    np.put_along_axis(mask, cols, True, axis=1)
    noise = np.sqrt(NOISE_SCALE * np.abs(x)) * rng.standard_normal(x.shape)
    x = np.where(mask[:, None, :], x + noise, x)
    return x[0] if single else x


def inject_noise(series: TimeSeries, ratio: float, seed) -> TimeSeries:
    """Add N(0, 0.02 diag|x_t|) noise to ``floor(ratio * T)`` random timestamps."""
    values = series.values if isinstance(series, TimeSeries) else series
    return TimeSeries(inject_noise_array(values, ratio, np.random.default_rng(seed)))


# ---------------------------------------------------------------------------
# synthetic benchmark


@dataclass(frozen=True)
class BenchmarkSpec:
    """Generator parameters.

    ``corruption`` holds one level per source domain (so ``V = 1 +
    len(corruption)``). A level ``c`` scales the channelwise gain change, the
    time warp and the additive noise of that source; ``c = 0`` reproduces the
    target exactly.
    """

    corruption: tuple = (0.1, 1.0)
    K: int = 2
    T: int = 32
    N: int = 240
    n_labels: int = 4
    n_subjects: int = 8
    target_noise: float = 0.5
    phase_jitter: float = 0.6
    template_shift: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "corruption", tuple(float(c) for c in self.corruption))
        if min(self.K, self.T, self.N) < 1 or self.n_labels < 2 or self.n_subjects < 1:
            raise ConfigError(f"invalid benchmark spec {self}")
        if any(c < 0 for c in self.corruption):
            raise ConfigError("corruption levels must be non-negative")
        if self.N < self.n_labels:
            raise ConfigError("N must be at least the label count")

    @property
    def V(self) -> int:
        return 1 + len(self.corruption)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["corruption"] = list(self.corruption)
        return d


def _warp(x, amount):
    """Monotone time warp ``t -> t + amount * sin(pi t / (T-1))`` via interpolation."""
    T = x.shape[-1]
    t = np.arange(T, dtype=float)
    src = np.clip(t + amount * np.sin(np.pi * t / max(T - 1, 1)), 0, T - 1)
    flat = x.reshape(-1, T)
    out = np.stack([np.interp(src, t, row) for row in flat])
    return out.reshape(x.shape)


def synthesize_benchmark(spec: BenchmarkSpec, seed) -> PairedMultiSourceDataset:
    """Paired multi-source data whose source/target similarity is known by construction.

    Target series are label-specific sinusoid templates with per-series phase
    jitter and Gaussian noise. Source ``q`` is a channelwise gain change and
    time warp of the paired target series plus noise, all scaled by the
    source's corruption level.
    """
    rng = np.random.default_rng(seed)
    K, T, N, L = spec.K, spec.T, spec.N, spec.n_labels
    t = np.arange(T) / T
    # templates share a base shape; labels differ by shifted frequency/phase
    base_f = rng.uniform(1.0, 3.0, size=K)
    base_p = rng.uniform(0, 2 * np.pi, size=K)
    freqs = base_f + spec.template_shift * rng.uniform(-1, 1, size=(L, K))
    phases = base_p + spec.template_shift * rng.uniform(-np.pi, np.pi, size=(L, K))

    labels = np.arange(N) % L
    rng.shuffle(labels)
    subjects = np.array([f"p{1 + (n % spec.n_subjects)}" for n in range(N)])
    subject_gain = rng.uniform(0.8, 1.2, size=(spec.n_subjects, K))
    subj_idx = np.arange(N) % spec.n_subjects

    jitter = spec.phase_jitter * rng.standard_normal((N, K))
    arg = 2 * np.pi * freqs[labels][:, :, None] * t + phases[labels][:, :, None] + jitter[:, :, None]
    target = subject_gain[subj_idx][:, :, None] * np.sin(arg)
    target = target + spec.target_noise * rng.standard_normal((N, K, T))

    domains = [DomainDataset("target", target, subjects)]
    for q, c in enumerate(spec.corruption):
        gain = 1.0 + c * rng.uniform(-0.3, 0.3, size=K)
        warp = c * rng.uniform(1.0, 3.0)
        noise = rng.standard_normal((N, K, T))
        src = gain[None, :, None] * _warp(target, warp) + c * noise
        domains.append(DomainDataset(f"source{q}", src, subjects))
    return PairedMultiSourceDataset(tuple(domains), labels, 0, tuple(f"class{c}" for c in range(L)))


# ---------------------------------------------------------------------------
# experiments


@dataclass
class EvaluationReport:
    strategy: str
    classifier: str
    distance: str
    rcc: list
    seeds: list
    noise_ratio: float = 0.0
    positive_labels: list = field(default_factory=list)
    fingerprints: list = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(np.mean(self.rcc))

    @property
    def std(self) -> float:
        # population std so a single repetition reports 0
        return float(np.std(self.rcc))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mean"] = self.mean
        d["std"] = self.std
        return d


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a repetition needs besides the data and strategy list."""

    metric: DistanceMetric = DistanceMetric("dtw")
    pretrain: PretrainConfig = PretrainConfig()
    finetune: FinetuneConfig = FinetuneConfig()
    hidden: int = 32
    init_scheme: str = "uniform01"
    ipd_m: int = 1000
    n_train_subjects: int | None = None
    allow_uniform: bool = True
    positive_label: int | None = None


def repetition_seeds(seed: int, I: int) -> list:
    """One 63-bit seed per repetition, derived from the master seed."""
    return [int(s.generate_state(1, np.uint64)[0] >> np.uint64(1))
            for s in np.random.SeedSequence(seed).spawn(I)]


def prepare_repetition(dataset: PairedMultiSourceDataset, cfg: ExperimentConfig, rep_seed: int):
    """Subject split, min-max scaling on training statistics and binary relabelling."""
    ss = np.random.SeedSequence(rep_seed)
    split_seed, label_seed, task_seed, model_seed, noise_seed, order_seed = (
        int(s.generate_state(1)[0]) for s in ss.spawn(6)
    )
    n_subj = len(set(dataset.subject_ids.tolist()))
    n_train = cfg.n_train_subjects or max(1, int(round(0.75 * n_subj)))
    train_subjects = choose_train_subjects(dataset, n_train, split_seed)
    train, test = split_by_subject(dataset, train_subjects)
    train_scaled = rescale_minmax(train)
    test_scaled = rescale_minmax(test, reference=train)
    present = sorted(set(train.labels.tolist()) & set(test.labels.tolist()))
    if not present:
        raise SplitError("no label occurs in both training and test subjects")
    if cfg.positive_label is None:
        positive = int(np.random.default_rng(label_seed).choice(present))
    else:
        positive = cfg.positive_label
    btrain, btest = make_binary_task(train_scaled, test_scaled, positive, task_seed)
    return {
        "train": btrain,
        "test": btest,
        "positive": positive,
        "train_subjects": train_subjects,
        "model_seed": model_seed,
        "noise_seed": noise_seed,
        "order_seed": order_seed,
        "ipd_seed": split_seed,
    }


def run_experiment(dataset: PairedMultiSourceDataset, strategies, cfg: ExperimentConfig,
                   I: int = 15, noise_ratios=(0.0,), seed: int = 0, progress=None):
    """Repeat the binary protocol ``I`` times for every strategy.

    Within a repetition every strategy sees the same split, positive label,
    resampled data, initial parameters and test noise. Returns one report per
    (strategy, noise ratio), in that nesting order.
    """
    strategies = list(strategies)
    noise_ratios = [float(r) for r in noise_ratios]
    reports = {
        (s, r): EvaluationReport(s, f"mlp[h={cfg.hidden},{cfg.init_scheme}]", cfg.metric.name, [], [], r)
        for s in strategies for r in noise_ratios
    }
    for i, rep_seed in enumerate(repetition_seeds(seed, I)):
        try:
            rep = prepare_repetition(dataset, cfg, rep_seed)
            train, test = rep["train"], rep["test"]
            model = default_model(train, cfg.hidden, rep["model_seed"], cfg.init_scheme, n_labels=2)
            pre = PretrainConfig(cfg.pretrain.lambda0, cfg.pretrain.J, cfg.pretrain.batch_size, rep["model_seed"])
            fine = FinetuneConfig(cfg.finetune.lambda_T, cfg.finetune.J_target, cfg.finetune.k_folds,
                                  cfg.finetune.R, cfg.finetune.lr_floor, rep["model_seed"])
            noisy = {}
            for r in noise_ratios:
                rng = np.random.default_rng(rep["noise_seed"])
                noisy[r] = inject_noise_array(test.target.values, r, rng)
            fp = (train.fingerprint(), test.fingerprint())
            for s in strategies:
                state, _, _ = train_full_pipeline(
                    train, cfg.metric, pre, fine, s, model=model, ipd_m=cfg.ipd_m,
                    ipd_seed=rep["ipd_seed"], allow_uniform=cfg.allow_uniform,
                    order_seed=rep["order_seed"],
                )
                for r in noise_ratios:
                    rep_ = reports[(s, r)]
                    rep_.rcc.append(rcc(state, noisy[r], test.labels))
                    rep_.seeds.append(rep_seed)
                    rep_.positive_labels.append(rep["positive"])
                    rep_.fingerprints.append(fp[0][:16] + ":" + fp[1][:16])
        except PairTransferError as exc:
            raise type(exc)(f"repetition {i}: {exc}") from exc
        if progress is not None:
            progress(i)
    return [reports[(s, r)] for s in strategies for r in noise_ratios]


def reports_to_csv(reports) -> str:
    """Long format: one row per (strategy, noise ratio) with mean and std."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["strategy", "noise_ratio", "classifier", "distance", "I", "mean", "std", "rcc"])
    for r in reports:
        w.writerow([r.strategy, repr(r.noise_ratio), r.classifier, r.distance, len(r.rcc),
                    repr(r.mean), repr(r.std), " ".join(repr(x) for x in r.rcc)])
    return buf.getvalue()


def reports_to_json(reports) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=1)
