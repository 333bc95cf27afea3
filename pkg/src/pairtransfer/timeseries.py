"""Time series containers, paired multi-source datasets, ingestion and scaling.

A dataset stores each domain as a dense ``(N, K, T)`` array. The n-th series
of every domain shares ``labels[n]``, so any reindexing must go through
:meth:`PairedMultiSourceDataset.take` to keep the pairing intact.
"""
from __future__ import annotations

import csv
import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import IngestionError, PairingError, SplitError

# DSA column blocks, 9 columns per sensor unit
DSA_DOMAINS = ("torso", "right_arm", "left_arm", "right_leg", "left_leg")
DSA_ROWS = 125
DSA_COLUMNS = 45
DSA_CHANNELS = 9


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """One ``K x T`` multivariate recording (channels in rows)."""

    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"time series must be a non-empty K x T matrix, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("time series contains NaN or Inf")
        object.__setattr__(self, "values", v)

    @property
    def K(self) -> int:
        return self.values.shape[0]

    @property
    def T(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class DomainDataset:
    """All recordings of a single sensor position.

    Parameters
    ----------
    name : str
        Domain identifier, e.g. ``"torso"``.
    values : array, shape (N, K, T)
    subject_ids : sequence of str, length N
    """

    name: str
    values: np.ndarray
    subject_ids: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 3 or min(v.shape) < 1:
            raise ValueError(f"domain {self.name!r}: expected non-empty (N, K, T) array, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError(f"domain {self.name!r}: values contain NaN or Inf")
        s = _frozen([str(x) for x in self.subject_ids], dtype=object)
        if s.shape != (v.shape[0],):
            raise PairingError(
                f"domain {self.name!r}: {v.shape[0]} series but {len(s)} subject ids"
            )
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "subject_ids", s)

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def K(self) -> int:
        return self.values.shape[1]

    @property
    def T(self) -> int:
        return self.values.shape[2]

    def series(self, n: int) -> TimeSeries:
        return TimeSeries(self.values[n])

    def take(self, index) -> "DomainDataset":
        index = np.asarray(index, dtype=int)
        return DomainDataset(self.name, self.values[index], self.subject_ids[index])


@dataclass(frozen=True, eq=False)
class PairedMultiSourceDataset:
    """V paired domains sharing one label array.

    ``target_index`` selects the domain used for fine-tuning and testing; the
    remaining ``Q = V - 1`` domains are sources, in their stored order.
    """

    domains: tuple
    labels: np.ndarray
    target_index: int = 0
    label_names: tuple = field(default=())

    def __post_init__(self):
        domains = tuple(self.domains)
        if not domains:
            raise ValueError("dataset needs at least one domain")
        labels = _frozen(self.labels, dtype=np.int64)
        if labels.ndim != 1:
            raise ValueError("labels must be one-dimensional")
        for d in domains:
            if d.N != labels.shape[0]:
                raise PairingError(
                    f"domain {d.name!r} has {d.N} series but there are {labels.shape[0]} labels"
                )
            if (d.K, d.T) != (domains[0].K, domains[0].T):
                raise PairingError(
                    f"domain {d.name!r} has shape K={d.K}, T={d.T}; "
                    f"expected K={domains[0].K}, T={domains[0].T}"
                )
        names = [d.name for d in domains]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate domain names: {names}")
        if not 0 <= self.target_index < len(domains):
            raise ValueError(f"target_index {self.target_index} out of range for V={len(domains)}")
        if labels.size and labels.min() < 0:
            raise ValueError("labels must be non-negative")
        object.__setattr__(self, "domains", domains)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "label_names", tuple(self.label_names))

    @property
    def V(self) -> int:
        return len(self.domains)

    @property
    def Q(self) -> int:
        return self.V - 1

    @property
    def N(self) -> int:
        return self.labels.shape[0]

    @property
    def K(self) -> int:
        return self.domains[0].K

    @property
    def T(self) -> int:
        return self.domains[0].T

    @property
    def n_labels(self) -> int:
        if self.label_names:
            return len(self.label_names)
        return int(self.labels.max()) + 1 if self.N else 0

    @property
    def subject_ids(self) -> np.ndarray:
        return self.domains[self.target_index].subject_ids

    @property
    def target(self) -> DomainDataset:
        return self.domains[self.target_index]

    @property
    def sources(self) -> list:
        return [d for i, d in enumerate(self.domains) if i != self.target_index]

    @property
    def domain_names(self) -> list:
        return [d.name for d in self.domains]

    def domain(self, name: str) -> DomainDataset:
        for d in self.domains:
            if d.name == name:
                return d
        raise KeyError(f"no domain named {name!r}; have {self.domain_names}")

    def with_target(self, name_or_index) -> "PairedMultiSourceDataset":
        if isinstance(name_or_index, str):
            idx = self.domain_names.index(name_or_index) if name_or_index in self.domain_names else None
            if idx is None:
                raise KeyError(f"no domain named {name_or_index!r}; have {self.domain_names}")
        else:
            idx = int(name_or_index)
        return PairedMultiSourceDataset(self.domains, self.labels, idx, self.label_names)

    def take(self, index, labels=None) -> "PairedMultiSourceDataset":
        """Reindex every domain identically (optionally replacing labels)."""
        index = np.asarray(index, dtype=int)
        new_labels = self.labels[index] if labels is None else labels
        return PairedMultiSourceDataset(
            tuple(d.take(index) for d in self.domains), new_labels, self.target_index, self.label_names
        )

    def replace_values(self, arrays) -> "PairedMultiSourceDataset":
        domains = tuple(
            DomainDataset(d.name, a, d.subject_ids) for d, a in zip(self.domains, arrays)
        )
        return PairedMultiSourceDataset(domains, self.labels, self.target_index, self.label_names)

    def fingerprint(self) -> str:
        """Content hash over values, labels, subjects and target choice."""
        h = hashlib.sha256()
        h.update(str((self.target_index, self.domain_names)).encode())
        h.update(np.ascontiguousarray(self.labels).tobytes())
        for d in self.domains:
            h.update(np.ascontiguousarray(d.values).tobytes())
            h.update("\x00".join(d.subject_ids.tolist()).encode())
        return h.hexdigest()

    def summary(self) -> dict:
        hist = np.bincount(self.labels, minlength=self.n_labels) if self.N else np.zeros(0, int)
        return {
            "V": self.V,
            "Q": self.Q,
            "N": self.N,
            "K": self.K,
            "T": self.T,
            "target": self.target.name,
            "domains": self.domain_names,
            "label_histogram": hist.tolist(),
        }


# ---------------------------------------------------------------------------
# ingestion


def _read_numeric_csv(path: Path) -> np.ndarray:
    rows = []
    try:
        with open(path, newline="") as fh:
            for r, row in enumerate(csv.reader(fh), start=1):
                if not row or all(not c.strip() for c in row):
                    continue
                parsed = []
                for c, cell in enumerate(row, start=1):
                    try:
                        parsed.append(float(cell))
                    except ValueError:
                        raise IngestionError(
                            f"{path}: non-numeric cell {cell!r} at row {r}, column {c}"
                        ) from None
                rows.append(parsed)
    except IngestionError:
        raise
    except OSError as exc:
        raise IngestionError(f"{path}: {exc.strerror or exc}") from exc
    widths = {len(r) for r in rows}
    if len(widths) > 1:
        raise IngestionError(f"{path}: ragged rows with widths {sorted(widths)}")
    return np.array(rows, dtype=float)


def _numbered(dirpath: Path, prefix: str, suffix: str = ""):
    pat = re.compile(rf"^{prefix}(\d+){re.escape(suffix)}$")
    out = []
    for p in dirpath.iterdir():
        m = pat.match(p.name)
        if m:
            out.append((int(m.group(1)), p))
    return [p for _, p in sorted(out)]


def load_dsa_directory(root_path) -> PairedMultiSourceDataset:
    """Load the UCI Daily and Sports Activities tree ``root/aXX/pY/sZZ.txt``.

    Each 125 x 45 segment file is split into five 9-column sensor blocks and
    transposed to ``9 x 125``. Labels come from the activity directory
    (``a01`` -> 0) and subject ids from the subject directory.
    """
    root = Path(root_path)
    if not root.is_dir():
        raise IngestionError(f"{root}: not a directory")
    activities = _numbered(root, "a")
    if not activities:
        raise IngestionError(f"{root}: no activity directories a01..a19 found")

    segments, labels, subjects = [], [], []
    for label, adir in enumerate(activities):
        subj_dirs = _numbered(adir, "p")
        if not subj_dirs:
            raise IngestionError(f"{adir}: no subject directories")
        for sdir in subj_dirs:
            files = _numbered(sdir, "s", ".txt")
            if not files:
                raise IngestionError(f"{sdir}: no segment files")
            for f in files:
                seg = _read_numeric_csv(f)
                if seg.shape != (DSA_ROWS, DSA_COLUMNS):
                    raise IngestionError(
                        f"{f}: expected {DSA_ROWS} rows x {DSA_COLUMNS} columns, got "
                        f"{seg.shape[0]} x {seg.shape[1] if seg.ndim == 2 else 0}"
                    )
                if not np.all(np.isfinite(seg)):
                    raise IngestionError(f"{f}: non-finite value")
                segments.append(seg)
                labels.append(label)
                subjects.append(sdir.name)

    data = np.stack(segments)  # (N, 125, 45)
    domains = []
    for v, name in enumerate(DSA_DOMAINS):
        block = data[:, :, v * DSA_CHANNELS:(v + 1) * DSA_CHANNELS]
        domains.append(DomainDataset(name, block.transpose(0, 2, 1), subjects))
    return PairedMultiSourceDataset(
        tuple(domains), labels, 0, tuple(p.name for p in activities)
    )


def _read_lines(path: Path) -> list:
    try:
        with open(path) as fh:
            return [ln.strip() for ln in fh if ln.strip()]
    except OSError as exc:
        raise IngestionError(f"{path}: {exc.strerror or exc}") from exc


def load_generic(manifest_path) -> PairedMultiSourceDataset:
    """Load a dataset described by a JSON manifest.

    Manifest layout::

        {
          "format": "pairtransfer-manifest", "version": 1,
          "domains": [{"name": "wrist", "files": ["wrist/0000.csv", ...]}, ...],
          "labels": "labels.txt",        # one integer per line
          "subjects": "subjects.txt",    # one token per line (optional)
          "target": "wrist",             # optional, defaults to first domain
          "label_names": [...]           # optional
        }

    Each series file holds one channel per line, ``T`` comma-separated values.
    Relative paths resolve against the manifest's directory.
    """
    manifest_path = Path(manifest_path)
    try:
        spec = json.loads(manifest_path.read_text())
    except OSError as exc:
        raise IngestionError(f"{manifest_path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise IngestionError(f"{manifest_path}: invalid JSON ({exc})") from exc
    base = manifest_path.parent
    try:
        domain_specs = spec["domains"]
        label_file = spec["labels"]
    except KeyError as exc:
        raise IngestionError(f"{manifest_path}: missing key {exc}") from None

    label_tokens = _read_lines(base / label_file)
    try:
        labels = [int(t) for t in label_tokens]
    except ValueError as exc:
        raise IngestionError(f"{base / label_file}: {exc}") from None
    n = len(labels)
    if "subjects" in spec:
        subjects = _read_lines(base / spec["subjects"])
        if len(subjects) != n:
            raise PairingError(f"{len(subjects)} subject ids but {n} labels")
    else:
        subjects = ["s0"] * n

    domains = []
    for dspec in domain_specs:
        files = dspec["files"]
        if len(files) != n:
            raise PairingError(
                f"domain {dspec['name']!r} lists {len(files)} series but labels has {n}"
            )
        arrays = [_read_numeric_csv(base / f) for f in files]
        shapes = {a.shape for a in arrays}
        if len(shapes) != 1:
            raise IngestionError(f"domain {dspec['name']!r}: series shapes differ {sorted(shapes)}")
        domains.append(DomainDataset(dspec["name"], np.stack(arrays), subjects))

    names = [d.name for d in domains]
    target = spec.get("target", names[0])
    if target not in names:
        raise IngestionError(f"{manifest_path}: target {target!r} not among domains {names}")
    return PairedMultiSourceDataset(
        tuple(domains), labels, names.index(target), tuple(spec.get("label_names", ()))
    )


def write_generic(dataset: PairedMultiSourceDataset, directory) -> Path:
    """Write ``dataset`` in the generic manifest layout; returns the manifest path.

    Values are written with ``repr`` so reloading is bit-exact.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    doms = []
    for d in dataset.domains:
        ddir = directory / d.name
        ddir.mkdir(exist_ok=True)
        files = []
        for n in range(d.N):
            rel = f"{d.name}/{n:06d}.csv"
            with open(directory / rel, "w") as fh:
                for row in d.values[n]:
                    fh.write(",".join(repr(float(x)) for x in row) + "\n")
            files.append(rel)
        doms.append({"name": d.name, "files": files})
    (directory / "labels.txt").write_text("".join(f"{int(c)}\n" for c in dataset.labels))
    (directory / "subjects.txt").write_text("".join(f"{s}\n" for s in dataset.subject_ids))
    manifest = {
        "format": "pairtransfer-manifest",
        "version": 1,
        "domains": doms,
        "labels": "labels.txt",
        "subjects": "subjects.txt",
        "target": dataset.target.name,
        "label_names": list(dataset.label_names),
    }
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1))
    return path


def save_npz(dataset: PairedMultiSourceDataset, path) -> None:
    """Compact binary cache used by the command line tools."""
    arrays = {f"values_{i}": d.values for i, d in enumerate(dataset.domains)}
    np.savez(
        path,
        labels=dataset.labels,
        subjects=np.array(dataset.subject_ids.tolist(), dtype=str),
        names=np.array(dataset.domain_names, dtype=str),
        label_names=np.array(dataset.label_names, dtype=str),
        target_index=np.array(dataset.target_index),
        **arrays,
    )


def load_npz(path) -> PairedMultiSourceDataset:
    with np.load(path, allow_pickle=False) as z:
        names = z["names"].tolist()
        subjects = z["subjects"].tolist()
        domains = tuple(
            DomainDataset(name, z[f"values_{i}"], subjects) for i, name in enumerate(names)
        )
        return PairedMultiSourceDataset(
            domains, z["labels"], int(z["target_index"]), tuple(z["label_names"].tolist())
        )


# ---------------------------------------------------------------------------
# normalization and splits


def minmax_stats(dataset: PairedMultiSourceDataset):
    """Per-domain, per-channel (min, max) arrays of shape (V, K)."""
    lo = np.stack([d.values.min(axis=(0, 2)) for d in dataset.domains])
    hi = np.stack([d.values.max(axis=(0, 2)) for d in dataset.domains])
    return lo, hi


def rescale_minmax(dataset: PairedMultiSourceDataset, reference: PairedMultiSourceDataset | None = None):
    """Map each domain's channels affinely onto [-1, 1].

    Statistics come from ``reference`` when given (pass the training split so
    validation data is scaled without leakage), otherwise from ``dataset``.
    Constant channels map to 0.
    """
    lo, hi = minmax_stats(reference if reference is not None else dataset)
    out = []
    for v, d in enumerate(dataset.domains):
        span = hi[v] - lo[v]
        with np.errstate(divide="ignore", over="ignore"):
            # spans so small that 2/span overflows count as constant
            const = ~np.isfinite(2.0 / span) | (span <= 0)
        scale = 2.0 / np.where(const, 1.0, span)
        x = (d.values - lo[v][None, :, None]) * scale[None, :, None] - 1.0
        x[:, const, :] = 0.0
        if reference is None:
            # the affine map can land an ulp outside [-1, 1]
            x = np.clip(x, -1.0, 1.0)
        out.append(x)
    return dataset.replace_values(out)


def split_by_subject(dataset: PairedMultiSourceDataset, train_subjects, seed=None):
    """Partition series into (train, validation) by subject id.

    ``seed`` is accepted for interface symmetry; the partition is fully
    determined by ``train_subjects``. Use :func:`choose_train_subjects` to
    draw a random subject subset.
    """
    subjects = dataset.subject_ids
    train_subjects = {str(s) for s in train_subjects}
    unknown = train_subjects - set(subjects.tolist())
    if unknown:
        raise SplitError(f"unknown subject ids: {sorted(unknown)}")
    mask = np.array([s in train_subjects for s in subjects], dtype=bool)
    if mask.all():
        raise SplitError("validation partition is empty")
    if not mask.any():
        raise SplitError("training partition is empty")
    idx = np.arange(dataset.N)
    return dataset.take(idx[mask]), dataset.take(idx[~mask])


def choose_train_subjects(dataset: PairedMultiSourceDataset, n_train: int, seed) -> list:
    subjects = sorted(set(dataset.subject_ids.tolist()), key=_natural_key)
    if not 0 < n_train < len(subjects):
        raise SplitError(f"cannot pick {n_train} training subjects out of {len(subjects)}")
    rng = np.random.default_rng(seed)
    pick = rng.choice(len(subjects), size=n_train, replace=False)
    return sorted((subjects[i] for i in pick), key=_natural_key)


def _natural_key(s: str):
    return [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", s)]


def stack_series(series: Sequence) -> np.ndarray:
    """Stack TimeSeries or raw K x T arrays into an (n, K, T) array."""
    return np.stack([s.values if isinstance(s, TimeSeries) else np.asarray(s, float) for s in series])


__all__ = [
    "DSA_DOMAINS",
    "TimeSeries",
    "DomainDataset",
    "PairedMultiSourceDataset",
    "load_dsa_directory",
    "load_generic",
    "write_generic",
    "save_npz",
    "load_npz",
    "minmax_stats",
    "rescale_minmax",
    "split_by_subject",
    "choose_train_subjects",
    "stack_series",
]
