import numpy as np
import pytest

from pairtransfer.timeseries import DomainDataset, PairedMultiSourceDataset


def write_dsa_tree(root, activities=2, subjects=2, segments=2, seed=0):
    """Write a miniature DSA-style tree and return the raw segment arrays by path."""
    rng = np.random.default_rng(seed)
    written = {}
    for a in range(1, activities + 1):
        for p in range(1, subjects + 1):
            d = root / f"a{a:02d}" / f"p{p}"
            d.mkdir(parents=True)
            for s in range(1, segments + 1):
                seg = np.round(rng.normal(size=(125, 45)), 6)
                path = d / f"s{s:02d}.txt"
                path.write_text("\n".join(",".join(f"{v:.6f}" for v in row) for row in seg) + "\n")
                written[path] = seg
    return written


@pytest.fixture
def dsa_tree(tmp_path):
    root = tmp_path / "dsa"
    written = write_dsa_tree(root)
    return root, written


def make_dataset(V=3, N=12, K=2, T=6, L=2, n_subjects=4, seed=0, target_index=0):
    rng = np.random.default_rng(seed)
    labels = np.arange(N) % L
    subjects = [f"p{1 + n % n_subjects}" for n in range(N)]
    domains = tuple(
        DomainDataset(f"d{v}", rng.normal(size=(N, K, T)), subjects) for v in range(V)
    )
    return PairedMultiSourceDataset(domains, labels, target_index)


@pytest.fixture
def small_dataset():
    return make_dataset()
