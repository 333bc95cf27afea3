"""Inter-domain pairwise distance (IPD) estimation.

Pipeline per source domain:

1. channel-wise distances between the n-th source and n-th target series give
   one K-vector per pair (:func:`empirical_difference`);
2. a Gaussian kernel density estimate is fitted to those vectors
   (:func:`fit_kde`);
3. ``m`` vectors are drawn from the estimate and the IPD is the matrix norm of
   the draws divided by ``m`` (:func:`ipd_estimate`).

The estimates are turned into importance weights ``alpha_q = g_q / sum(g)``
and a training order (largest distance first) by :func:`domain_weights`.
"""
from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field

import numpy as np

from .distance import DistanceMetric, pairwise_batch
from .errors import DegenerateSimilarityError, InsufficientDataError, PairingError
from .timeseries import DomainDataset, PairedMultiSourceDataset

EPS_BW = 1e-6
DEFAULT_M = 1000


@dataclass(frozen=True, eq=False)
class DifferenceSet:
    """Empirical difference vectors ``D_n`` (rows) between one source and the target."""

    source_name: str
    vectors: np.ndarray

    def __post_init__(self):
        v = np.array(self.vectors, dtype=float)
        if v.ndim != 2:
            raise ValueError("difference vectors must form an (N, K) array")
        if not np.all(np.isfinite(v)) or (v < 0).any():
            raise ValueError("difference vectors must be finite and non-negative")
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)

    @property
    def N(self) -> int:
        return self.vectors.shape[0]

    @property
    def K(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True, eq=False)
class KdeModel:
    """Gaussian KDE with a diagonal bandwidth matrix ``H = diag(bandwidth)``."""

    centers: np.ndarray
    bandwidth: np.ndarray
    source_name: str = ""

    def __post_init__(self):
        c = np.atleast_2d(np.array(self.centers, dtype=float))
        h = np.atleast_1d(np.array(self.bandwidth, dtype=float))
        if h.shape != (c.shape[1],):
            raise ValueError(f"bandwidth diagonal must have length K={c.shape[1]}")
        if not (h > 0).all():
            raise ValueError("bandwidth must be positive definite")
        c.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "bandwidth", h)

    @property
    def K(self) -> int:
        return self.centers.shape[1]

    @property
    def H(self) -> np.ndarray:
        return np.diag(self.bandwidth)

    def logpdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        # a flat array is a batch of scalar points when K == 1
        x = x.reshape(-1, 1) if (self.K == 1 and x.ndim <= 1) else np.atleast_2d(x)
        z = (x[:, None, :] - self.centers[None, :, :]) ** 2 / self.bandwidth
        log_k = -0.5 * z.sum(axis=2) - 0.5 * (
            self.K * np.log(2 * np.pi) + np.log(self.bandwidth).sum()
        )
        mx = log_k.max(axis=1, keepdims=True)
        return (mx[:, 0] + np.log(np.exp(log_k - mx).mean(axis=1)))

    def pdf(self, x) -> np.ndarray:
        """Mixture density evaluated at each row of ``x``."""
        return np.exp(self.logpdf(x))


@dataclass(frozen=True, eq=False)
class IpdEstimate:
    source_name: str
    samples: np.ndarray
    g: float
    norm: str = "fro"

    @property
    def m(self) -> int:
        return self.samples.shape[0]

    @property
    def K(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True)
class DomainWeights:
    """Normalised importance weights and the pre-training order.

    ``alphas[i]`` belongs to ``names[i]``; ``order`` lists indices into those
    sequences with the largest distance first.
    """

    names: tuple
    g: tuple
    alphas: tuple
    order: tuple
    uniform_fallback: bool = False

    @property
    def Q(self) -> int:
        return len(self.names)

    def ordered_names(self) -> list:
        return [self.names[i] for i in self.order]

    def subset(self, names) -> "DomainWeights":
        """Weights restricted to ``names`` and renormalised over them."""
        idx = [self.names.index(n) for n in names]
        return domain_weights(
            [self.g[i] for i in idx], names=[self.names[i] for i in idx],
            allow_uniform=self.uniform_fallback,
        )

    @classmethod
    def uniform(cls, names) -> "DomainWeights":
        names = tuple(names)
        q = len(names)
        return cls(names, (float("nan"),) * q, (1.0 / q,) * q, tuple(range(q)), True)

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "g": list(self.g),
            "alphas": list(self.alphas),
            "order": list(self.order),
            "uniform_fallback": self.uniform_fallback,
        }


def empirical_difference(source: DomainDataset, target: DomainDataset, metric: DistanceMetric) -> DifferenceSet:
    """Channel-wise distance between every paired (source, target) series."""
    if source.values.shape != target.values.shape:
        raise PairingError(
            f"source {source.name!r} has shape {source.values.shape}, "
            f"target {target.name!r} has {target.values.shape}"
        )
    N, K, T = source.values.shape
    d = pairwise_batch(metric, source.values.reshape(N * K, T), target.values.reshape(N * K, T))
    return DifferenceSet(source.name, d.reshape(N, K))


def silverman_bandwidth(vectors) -> np.ndarray:
    """Diagonal of ``H``: squared Silverman factor times the channel std."""
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    n, k = vectors.shape
    if n < 2:
        raise InsufficientDataError(f"bandwidth selection needs at least 2 difference vectors, got {n}")
    sigma = vectors.std(axis=0, ddof=1)
    factor = (4.0 / (k + 2)) ** (1.0 / (k + 4)) * n ** (-1.0 / (k + 4))
    h = (factor * sigma) ** 2
    return np.where(sigma > 0, h, EPS_BW)


def fit_kde(diffs: DifferenceSet) -> KdeModel:
    return KdeModel(diffs.vectors, silverman_bandwidth(diffs.vectors), diffs.source_name)


def sample_kde(model: KdeModel, m: int, seed) -> np.ndarray:
    """Draw ``m`` rows from the KDE: a uniform center plus N(0, H) noise."""
    if m < 1:
        raise ValueError("sample count m must be at least 1")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, model.centers.shape[0], size=m)
    noise = rng.standard_normal((m, model.K))
    return model.centers[idx] + noise * np.sqrt(model.bandwidth)


def ipd_from_samples(samples, source_name: str = "", norm: str = "fro") -> IpdEstimate:
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    m = samples.shape[0]
    if m < 1:
        raise ValueError("need at least one sample")
    g = float(np.linalg.norm(samples, ord=norm)) / m
    samples = samples.copy()
    samples.setflags(write=False)
    return IpdEstimate(source_name, samples, g, norm)


def ipd_estimate(model: KdeModel, m: int = DEFAULT_M, seed=0, norm: str = "fro") -> IpdEstimate:
    return ipd_from_samples(sample_kde(model, m, seed), model.source_name, norm)


def noise_floor(K: int) -> float:
    """Largest g attributable to bandwidth noise alone for identical domains."""
    return 2.0 * np.sqrt(K * EPS_BW)


def domain_weights(estimates, names=None, allow_uniform: bool = False, zero_tol=None) -> DomainWeights:
    """Importance weights ``g_q / sum(g)`` and the descending-``g`` order.

    ``estimates`` may be :class:`IpdEstimate` objects or plain numbers. When
    every ``g`` is at or below ``zero_tol`` (default: :func:`noise_floor` for
    estimates, 0 for plain numbers) the similarity is degenerate: raise
    :class:`DegenerateSimilarityError`, or return uniform weights when
    ``allow_uniform`` is set.
    """
    estimates = list(estimates)
    if not estimates:
        raise ValueError("need at least one source domain")
    if isinstance(estimates[0], IpdEstimate):
        g = np.array([e.g for e in estimates])
        names = names or [e.source_name for e in estimates]
        tol = noise_floor(estimates[0].K) if zero_tol is None else zero_tol
    else:
        g = np.array(estimates, dtype=float)
        names = names or [f"source{i}" for i in range(len(g))]
        tol = 0.0 if zero_tol is None else zero_tol
    if len(names) != len(g):
        raise ValueError("names and estimates differ in length")
    if not np.all(np.isfinite(g)) or (g < 0).any():
        raise ValueError(f"IPD estimates must be finite and non-negative, got {g.tolist()}")

    # stable sort on -g keeps ties in input order
    order = tuple(int(i) for i in np.argsort(-g, kind="stable"))
    if np.all(g <= tol):
        if not allow_uniform:
            raise DegenerateSimilarityError(
                f"all source domains are indistinguishable from the target (g = {g.tolist()}); "
                "enable the uniform-weight fallback to continue"
            )
        q = len(g)
        return DomainWeights(tuple(names), tuple(g.tolist()), (1.0 / q,) * q, order, True)
    alphas = g / g.sum()
    return DomainWeights(tuple(names), tuple(g.tolist()), tuple(alphas.tolist()), order, False)


def rank_influential(estimates, names=None) -> list:
    """Source names ordered from smallest ``g`` (most influential) to largest."""
    if estimates and isinstance(estimates[0], IpdEstimate):
        g = [e.g for e in estimates]
        names = names or [e.source_name for e in estimates]
    else:
        g = list(estimates)
        names = names or [f"source{i}" for i in range(len(g))]
    order = np.argsort(np.asarray(g, dtype=float), kind="stable")
    return [names[i] for i in order]


def source_seed(seed: int, name: str) -> np.random.SeedSequence:
    """Sampling stream for one source, keyed by name so reordering sources is harmless."""
    return np.random.SeedSequence([int(seed), zlib.crc32(name.encode())])


@dataclass(frozen=True, eq=False)
class IpdReport:
    target: str
    metric: DistanceMetric
    m: int
    seed: int
    norm: str
    estimates: list
    bandwidths: dict
    weights: DomainWeights | None
    pairing: str = "paired"
    ranking: list = field(default_factory=list)

    @property
    def g(self) -> dict:
        return {e.source_name: e.g for e in self.estimates}

    def to_dict(self) -> dict:
        w = self.weights
        return {
            "format": "pairtransfer-ipd-report",
            "version": 1,
            "target": self.target,
            **self.metric.to_dict(),
            "m": self.m,
            "seed": self.seed,
            "norm": self.norm,
            "pairing": self.pairing,
            "sources": [
                {
                    "name": e.source_name,
                    "g": e.g,
                    "alpha": (w.alphas[w.names.index(e.source_name)] if w else None),
                    "bandwidth_diag": [float(x) for x in self.bandwidths[e.source_name]],
                    "m": e.m,
                }
                for e in self.estimates
            ],
            "order": w.ordered_names() if w else [],
            "ranking": list(self.ranking),
            "uniform_fallback": bool(w.uniform_fallback) if w else False,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    def table(self) -> str:
        rows = [f"IPD to target {self.target!r} ({self.metric.name}, m={self.m})"]
        rows.append(f"{'rank':>4}  {'source':<16} {'g':>12} {'alpha':>8}")
        d = self.to_dict()
        by_name = {s["name"]: s for s in d["sources"]}
        for r, name in enumerate(self.ranking, start=1):
            s = by_name[name]
            alpha = "-" if s["alpha"] is None else f"{s['alpha']:.4f}"
            rows.append(f"{r:>4}  {name:<16} {s['g']:>12.6g} {alpha:>8}")
        return "\n".join(rows)


def weights_from_report_dict(d: dict) -> DomainWeights:
    """Rebuild :class:`DomainWeights` from a serialised report."""
    names = [s["name"] for s in d["sources"]]
    g = [s["g"] for s in d["sources"]]
    if d.get("uniform_fallback"):
        w = domain_weights(g, names=names, allow_uniform=True, zero_tol=float("inf"))
    else:
        w = domain_weights(g, names=names)
    return w


def compute_ipd_report(
    dataset: PairedMultiSourceDataset,
    metric: DistanceMetric,
    m: int = DEFAULT_M,
    seed: int = 0,
    norm: str = "fro",
    pairing: str = "paired",
    allow_uniform: bool = False,
) -> IpdReport:
    """Estimate IPD for every source domain of ``dataset`` against its target.

    ``pairing="shuffled"`` re-pairs target series with a random permutation
    before computing differences, which discards the index alignment.
    """
    if pairing not in ("paired", "shuffled"):
        raise ValueError(f"unknown pairing mode {pairing!r}")
    target = dataset.target
    estimates, bandwidths = [], {}
    for src in dataset.sources:
        ss = source_seed(seed, src.name)
        perm_seed, sample_seed = ss.spawn(2)
        tgt = target
        if pairing == "shuffled":
            perm = np.random.default_rng(perm_seed).permutation(target.N)
            tgt = target.take(perm)
        diffs = empirical_difference(src, tgt, metric)
        model = fit_kde(diffs)
        bandwidths[src.name] = model.bandwidth
        estimates.append(ipd_estimate(model, m, sample_seed, norm))
    weights = domain_weights(estimates, allow_uniform=allow_uniform) if estimates else None
    return IpdReport(
        target.name, metric, m, seed, norm, estimates, bandwidths, weights, pairing,
        rank_influential(estimates) if estimates else [],
    )
