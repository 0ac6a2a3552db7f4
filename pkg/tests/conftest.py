"""Shared fixtures: the synthetic zero-day scenario used across suites.

Scenario layout (raw units): normal traffic is a two-mode Gaussian mixture;
the known attack wraps the first mode as a sparse shell with a heavy radial
tail (overlapping the normal fringe); the zero-day attack is an isolated
cluster in otherwise empty interior space, far from every training point.
"""

import numpy as np
import pytest

from idstack.dataset import Dataset, dataset_from_arrays
from idstack.splits import SplitDataset, VariantSpec, make_variant

SCENARIO_SEED = 42
SPLIT_SEED = 11
PIPELINE_SEED = 5


def build_scenario(seed: int = SCENARIO_SEED, scale: float = 1.0,
                   name: str = "scenario") -> Dataset:
    rng = np.random.default_rng(seed)
    n_normal = int(7800 * scale)
    n_halo = int(1275 * scale)
    n_tail = int(225 * scale)
    n_b = int(700 * scale)
    n1 = rng.normal([0.0, 0.0], 0.65, (n_normal // 2, 2))
    n2 = rng.normal([8.0, 8.0], 0.45, (n_normal - n_normal // 2, 2))
    radius = np.sqrt(rng.uniform(2.05 ** 2, 3.4 ** 2, n_halo))
    angle = rng.uniform(0, 2 * np.pi, n_halo)
    halo = (np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])
            + rng.normal(0, 0.08, (n_halo, 2)))
    tail_r = np.minimum(2.05 + rng.exponential(0.9, n_tail), 5.8)
    toward_b = np.arctan2(1.0, 7.0)  # keep the tail out of the zero-day corner
    tail_th = toward_b + 0.5 + rng.uniform(0, 2 * np.pi - 1.0, n_tail)
    tail = np.column_stack([tail_r * np.cos(tail_th), tail_r * np.sin(tail_th)])
    zero_day = rng.normal([7.0, 1.0], 0.4, (n_b, 2))
    X = np.vstack([n1, n2, halo, tail, zero_day])
    y = (["normal"] * n_normal + ["fringe"] * (n_halo + n_tail)
         + ["zeroday"] * n_b)
    return dataset_from_arrays(X, y, name)


@pytest.fixture(scope="session")
def scenario_dataset() -> Dataset:
    return build_scenario()


@pytest.fixture(scope="session")
def scenario_variant(scenario_dataset) -> SplitDataset:
    """The zero-day variant: 'zeroday' points appear only at test time."""
    return make_variant(scenario_dataset,
                        VariantSpec(scenario_dataset.name, "zeroday", 0.5, SPLIT_SEED))


@pytest.fixture(scope="session")
def scenario_full_split(scenario_dataset) -> SplitDataset:
    return make_variant(scenario_dataset,
                        VariantSpec(scenario_dataset.name, None, 0.5, SPLIT_SEED))


@pytest.fixture(scope="session")
def small_scenario_variant() -> SplitDataset:
    ds = build_scenario(seed=7, scale=0.12, name="scenario-small")
    return make_variant(ds, VariantSpec(ds.name, "zeroday", 0.5, SPLIT_SEED))


NSL_KDD_COLUMNS = (
    "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes",
    "land", "wrong_fragment", "urgent", "hot", "num_failed_logins",
    "logged_in", "num_compromised", "root_shell", "su_attempted", "num_root",
    "num_file_creations", "num_shells", "num_access_files",
    "num_outbound_cmds", "is_host_login", "is_guest_login", "count",
    "srv_count", "serror_rate", "srv_serror_rate", "rerror_rate",
    "srv_rerror_rate", "same_srv_rate", "diff_srv_rate",
    "srv_diff_host_rate", "dst_host_count", "dst_host_srv_count",
    "dst_host_same_srv_rate", "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate", "dst_host_srv_diff_host_rate",
    "dst_host_serror_rate", "dst_host_srv_serror_rate",
    "dst_host_rerror_rate", "dst_host_srv_rerror_rate",
)

_CLASS_PROFILES = {
    # per class: (share, src_bytes scale, count mean, serror, same_srv)
    "normal": (0.53, 800.0, 20.0, 0.02, 0.9),
    "dos": (0.36, 50.0, 400.0, 0.9, 0.05),
    "probe": (0.09, 10.0, 150.0, 0.3, 0.15),
    "r2l": (0.017, 3000.0, 5.0, 0.05, 0.6),
    "u2r": (0.003, 1500.0, 3.0, 0.01, 0.5),
}


def write_nsl_kdd_like_csv(path, n_rows: int, seed: int = 0) -> None:
    """Synthesize a flattened CSV in the classic 41-feature flow format."""
    rng = np.random.default_rng(seed)
    protocols = np.array(["tcp", "udp", "icmp"])
    services = np.array(["http", "ftp", "smtp", "dns", "telnet"])
    flags = np.array(["SF", "S0", "REJ", "RSTR"])
    classes = list(_CLASS_PROFILES)
    shares = np.array([_CLASS_PROFILES[c][0] for c in classes])
    counts = np.maximum((shares / shares.sum() * n_rows).astype(int), 1)
    counts[0] += n_rows - counts.sum()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(NSL_KDD_COLUMNS) + ",class\n")
        for cls, n in zip(classes, counts):
            _, sb, cnt, serr, same = _CLASS_PROFILES[cls]
            for _ in range(n):
                row = {
                    "duration": f"{rng.exponential(10):.1f}",
                    "protocol_type": rng.choice(protocols),
                    "service": rng.choice(services),
                    "flag": rng.choice(flags),
                    "src_bytes": f"{rng.exponential(sb):.0f}",
                    "dst_bytes": f"{rng.exponential(sb / 2):.0f}",
                    "count": f"{max(rng.normal(cnt, cnt / 4), 0):.0f}",
                    "srv_count": f"{max(rng.normal(cnt / 2, cnt / 6), 0):.0f}",
                    "serror_rate": f"{np.clip(rng.normal(serr, 0.05), 0, 1):.2f}",
                    "srv_serror_rate": f"{np.clip(rng.normal(serr, 0.08), 0, 1):.2f}",
                    "same_srv_rate": f"{np.clip(rng.normal(same, 0.1), 0, 1):.2f}",
                }
                values = [row.get(c, f"{rng.uniform(0, 1):.3f}")
                          for c in NSL_KDD_COLUMNS]
                fh.write(",".join(map(str, values)) + f",{cls}\n")
