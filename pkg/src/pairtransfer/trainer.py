"""Source-domain pre-training, target fine-tuning and the end-to-end pipeline."""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field

import numpy as np

from . import classifier as clf
from .distance import DistanceMetric
from .errors import ConfigError, NumericError, SplitError
from .similarity import DEFAULT_M, DomainWeights, IpdReport, compute_ipd_report
from .timeseries import DomainDataset, PairedMultiSourceDataset

STRATEGIES = (
    "adaptive",
    "no_transfer",
    "direct_transfer",
    "no_pairing",
    "adaptive_random_order",
    "adaptive_top2",
)


@dataclass(frozen=True)
class PretrainConfig:
    lambda0: float = 5e-4
    J: int = 50
    batch_size: int | None = None  # None = full batch
    seed: int = 0

    def __post_init__(self):
        if not self.lambda0 > 0:
            raise ConfigError("lambda0 must be positive")
        if self.J < 1:
            raise ConfigError("J must be at least 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise ConfigError("batch_size must be positive")


@dataclass(frozen=True)
class FinetuneConfig:
    lambda_T: float = 1e-3
    J_target: int = 100
    k_folds: int = 10
    R: int = 5
    lr_floor: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if not self.lambda_T > 0:
            raise ConfigError("lambda_T must be positive")
        if self.k_folds < 2:
            raise ConfigError("k_folds must be at least 2")
        if self.R < 1:
            raise ConfigError("R must be at least 1")
        if self.J_target < 0:
            raise ConfigError("J_target must be non-negative")
        if not 0 <= self.lr_floor <= self.lambda_T:
            raise ConfigError("lr_floor must lie in [0, lambda_T]")


@dataclass(frozen=True)
class EpochRecord:
    phase: str  # "pretrain" or "finetune"
    domain: str
    epoch: int
    lr: float
    loss: float
    alpha: float | None = None
    fold: int | None = None
    val_loss: float | None = None
    r: int | None = None
    clamped: bool = False


@dataclass
class TrainingTrace:
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def extend(self, other: "TrainingTrace") -> "TrainingTrace":
        return TrainingTrace(self.records + other.records)

    def phase(self, phase: str, domain: str | None = None) -> list:
        return [
            r for r in self.records
            if r.phase == phase and (domain is None or r.domain == domain)
        ]

    def domains(self, phase: str = "pretrain") -> list:
        out = []
        for r in self.records:
            if r.phase == phase and r.domain not in out:
                out.append(r.domain)
        return out

    def lrs(self, phase: str, domain: str | None = None) -> np.ndarray:
        return np.array([r.lr for r in self.phase(phase, domain)])

    COLUMNS = ("epoch", "phase", "domain", "lr", "loss", "alpha", "fold", "val_loss", "r", "clamped")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for rec in self.records:
            d = asdict(rec)
            w.writerow(["" if d[c] is None else (repr(d[c]) if isinstance(d[c], float) else d[c])
                        for c in self.COLUMNS])
        return buf.getvalue()


def _full_batch_epochs(state, X, y, lrs, domain, alpha, batch_size, rng):
    records = []
    for j, lr in enumerate(lrs):
        if batch_size is None or batch_size >= len(y):
            loss, grad = clf.loss_and_gradient(state, X, y)
            if not np.isfinite(loss):
                raise NumericError(f"non-finite loss in source domain {domain!r}, epoch {j}")
            state = clf.step(state, grad, lr)
        else:
            perm = rng.permutation(len(y))
            losses = []
            for start in range(0, len(y), batch_size):
                b = perm[start:start + batch_size]
                loss_b, grad = clf.loss_and_gradient(state, X[b], y[b])
                if not np.isfinite(loss_b):
                    raise NumericError(f"non-finite loss in source domain {domain!r}, epoch {j}")
                losses.append(loss_b * len(b))
                state = clf.step(state, grad, lr)
            loss = float(np.sum(losses) / len(y))
        records.append(EpochRecord("pretrain", domain, j, float(lr), float(loss), alpha))
    return state, records


def lr_schedule(lambda0: float, alpha: float, J: int) -> np.ndarray:
    """``lambda_j = lambda0 * (1 - alpha)**j`` for j = 0..J-1.

    Closed form of the per-epoch decay ``lambda_{j+1} = lambda_j (1 - alpha)``;
    evaluating the power directly avoids rounding drift over many epochs.
    """
    return lambda0 * (1.0 - alpha) ** np.arange(J, dtype=float)


def pretrain(dataset: PairedMultiSourceDataset, weights: DomainWeights, model: clf.ClassifierState,
             cfg: PretrainConfig, order=None):
    """Sequential gradient descent over the source domains.

    Domains are visited in ``weights.order`` (largest IPD first) unless an
    explicit ``order`` of indices into ``weights.names`` is given. Each domain
    starts from the previous domain's parameters and from ``cfg.lambda0``.
    """
    order = weights.order if order is None else tuple(order)
    trace = TrainingTrace()
    if weights.Q == 0:
        return model, trace
    y = dataset.labels
    rng = np.random.default_rng(cfg.seed)
    state = model
    for idx in order:
        name = weights.names[idx]
        alpha = float(weights.alphas[idx])
        X = dataset.domain(name).values
        lrs = lr_schedule(cfg.lambda0, alpha, cfg.J)
        state, recs = _full_batch_epochs(state, X, y, lrs, name, alpha, cfg.batch_size, rng)
        trace.records.extend(recs)
    return state, trace


def random_order(Q: int, seed) -> tuple:
    return tuple(int(i) for i in np.random.default_rng(seed).permutation(Q))


def pretrain_random_order(dataset, weights: DomainWeights, model, cfg: PretrainConfig, seed):
    """As :func:`pretrain`, but domains are visited in a seeded random order."""
    return pretrain(dataset, weights, model, cfg, order=random_order(weights.Q, seed))


def make_folds(n: int, k: int, seed) -> list:
    """Random partition of ``range(n)`` into ``k`` disjoint folds of near-equal size."""
    if n < k:
        raise SplitError(f"cannot split {n} examples into {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, k)]


def finetune(target: DomainDataset, labels, model: clf.ClassifierState, cfg: FinetuneConfig,
             validation_loss=None):
    """Fine-tune on the target domain with a validation-driven learning rate.

    Every epoch picks one of ``k_folds`` fixed folds uniformly at random as the
    validation set. The learning rate is ``(1 - val_loss) * lambda_T`` clipped
    to ``[lr_floor, lambda_T]``, with the validation loss taken at the current
    parameters, followed by one full-gradient step on the other folds. A rate
    strictly above the previous epoch's increments the counter ``r`` and any
    other epoch resets it; training stops at ``r == R`` or after ``J_target``
    epochs.

    ``validation_loss(state, X_val, y_val)`` replaces the cross-entropy used
    for the rate, for scripted tests.
    """
    X = target.values
    y = np.asarray(labels, dtype=int)
    if len(y) != target.N:
        raise SplitError(f"{target.N} target series but {len(y)} labels")
    rng = np.random.default_rng(cfg.seed)
    fold_seed, select_seed = rng.integers(0, 2**63, size=2)
    folds = make_folds(target.N, cfg.k_folds, fold_seed)
    select = np.random.default_rng(select_seed)
    if validation_loss is None:
        def validation_loss(state, Xv, yv):
            return clf.loss(state, Xv, yv)

    trace = TrainingTrace()
    state = model
    prev_lr = cfg.lambda_T
    r, j = 0, 0
    while r < cfg.R and j < cfg.J_target:
        b = int(select.integers(cfg.k_folds))
        val = folds[b]
        train = np.concatenate([f for i, f in enumerate(folds) if i != b])
        vloss = float(validation_loss(state, X[val], y[val]))
        if not np.isfinite(vloss):
            raise NumericError(f"non-finite validation loss in fine-tuning epoch {j}")
        raw = (1.0 - vloss) * cfg.lambda_T
        lr = min(max(raw, cfg.lr_floor), cfg.lambda_T)
        r = r + 1 if lr > prev_lr else 0
        loss, grad = clf.loss_and_gradient(state, X[train], y[train])
        if not np.isfinite(loss):
            raise NumericError(f"non-finite training loss in fine-tuning epoch {j}")
        state = clf.step(state, grad, lr)
        trace.records.append(
            EpochRecord("finetune", target.name, j, lr, loss, None, b, vloss, r, lr != raw)
        )
        prev_lr = lr
        j += 1
    return state, trace


def default_model(dataset: PairedMultiSourceDataset, hidden: int = 32, seed: int = 0,
                  scheme: str = "uniform01", n_labels: int | None = None) -> clf.ClassifierState:
    arch = clf.MLPArchitecture(dataset.K, dataset.T, hidden, n_labels or max(2, dataset.n_labels))
    return clf.init(arch, seed, scheme)


@dataclass
class PipelineResult:
    pretrained: clf.ClassifierState
    final: clf.ClassifierState
    report: IpdReport | None
    weights: DomainWeights | None
    trace: TrainingTrace


def run_pipeline(
    dataset: PairedMultiSourceDataset,
    metric: DistanceMetric,
    pre_cfg: PretrainConfig,
    fine_cfg: FinetuneConfig,
    strategy: str = "adaptive",
    model: clf.ClassifierState | None = None,
    ipd_m: int = DEFAULT_M,
    ipd_seed: int = 0,
    allow_uniform: bool = False,
    order_seed: int | None = None,
) -> PipelineResult:
    """Similarity estimation, pre-training and fine-tuning for one strategy.

    ``adaptive`` runs the full method; ``no_transfer`` only fine-tunes;
    ``direct_transfer`` pre-trains with equal weights in stored order;
    ``no_pairing`` estimates similarity after randomly re-pairing the target
    series; ``adaptive_random_order`` visits sources in a seeded random
    order; ``adaptive_top2`` pre-trains only on the two smallest-IPD sources.
    """
    if strategy not in STRATEGIES:
        raise ConfigError(f"unknown strategy {strategy!r}; choose from {', '.join(STRATEGIES)}")
    if model is None:
        model = default_model(dataset, seed=pre_cfg.seed)
    source_names = [d.name for d in dataset.sources]

    report: IpdReport | None = None
    weights: DomainWeights | None = None
    order = None
    if strategy in ("adaptive", "adaptive_random_order", "adaptive_top2", "no_pairing") and source_names:
        pairing = "shuffled" if strategy == "no_pairing" else "paired"
        report = compute_ipd_report(dataset, metric, ipd_m, ipd_seed, pairing=pairing,
                                    allow_uniform=allow_uniform)
        weights = report.weights
        if strategy == "adaptive_top2" and weights.Q > 2:
            weights = weights.subset(report.ranking[:2])
        elif strategy == "adaptive_random_order":
            seed = pre_cfg.seed if order_seed is None else order_seed
            order = random_order(weights.Q, seed)
    elif strategy == "direct_transfer" and source_names:
        weights = DomainWeights.uniform(source_names)

    trace = TrainingTrace()
    pretrained = model
    if weights is not None:
        pretrained, trace = pretrain(dataset, weights, model, pre_cfg, order=order)
    final, ft = finetune(dataset.target, dataset.labels, pretrained, fine_cfg)
    return PipelineResult(pretrained, final, report, weights, trace.extend(ft))


def train_full_pipeline(dataset, metric, pre_cfg, fine_cfg, strategy="adaptive", **kwargs):
    """Returns ``(state, report, trace)``; ``report`` is ``None`` when no
    similarity was estimated. Keyword arguments go to :func:`run_pipeline`."""
    res = run_pipeline(dataset, metric, pre_cfg, fine_cfg, strategy, **kwargs)
    return res.final, res.report, res.trace
