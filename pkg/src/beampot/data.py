"""Dataset of (strain, stress, energy, geometry) rows with CSV persistence.

Rows are grouped by the (R, P) tuple of outer radius and inner-to-outer
ratio; loss weights are computed per group and stress component. The CSV
format is plain decimal text at full round-trip precision with the fixed
header

    path_id,step_id,R,P,eps1,eps2,eps3,kappa1,kappa2,kappa3,
    n1,n2,n3,m1,m2,m3,psi

Lines starting with '#' are treated as comments.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CSV_HEADER = (
    "path_id,step_id,R,P,eps1,eps2,eps3,kappa1,kappa2,kappa3,"
    "n1,n2,n3,m1,m2,m3,psi"
)

# relative floor applied to near-zero mean squares when inverting weights
WEIGHT_FLOOR_REL = 1e-12


@dataclass(frozen=True)
class DatasetRow:
    p: np.ndarray  # (6,) strain measures
    q: np.ndarray  # (6,) stress resultants
    psi: float
    radius: float
    ratio: float
    path_id: int
    step_id: int

    def __post_init__(self):
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        if self.p.shape != (6,) or self.q.shape != (6,):
            raise ValueError("p and q must be 6-vectors")
        if not (0.0 <= self.ratio < 1.0 and self.radius > 0.0):
            raise ValueError(f"invalid geometry R={self.radius}, P={self.ratio}")

    @property
    def group(self) -> tuple:
        return (self.radius, self.ratio)


@dataclass
class Dataset:
    rows: list = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def groups(self) -> list:
        seen = {}
        for row in self.rows:
            seen.setdefault(row.group, None)
        return list(seen)

    def path_keys(self) -> list:
        """Unique (R, P, path_id) keys in first-appearance order."""
        seen = {}
        for row in self.rows:
            seen.setdefault((row.radius, row.ratio, row.path_id), None)
        return list(seen)

    def strains(self) -> np.ndarray:
        return np.array([row.p for row in self.rows]).reshape(-1, 6)

    def stresses(self) -> np.ndarray:
        return np.array([row.q for row in self.rows]).reshape(-1, 6)


def write_csv(ds: Dataset, path, comments: list | None = None) -> None:
    with open(path, "w") as fh:
        for line in comments or []:
            fh.write(f"# {line}\n")
        fh.write(CSV_HEADER + "\n")
        for row in ds.rows:
            vals = [
                str(row.path_id),
                str(row.step_id),
                f"{row.radius:.17g}",
                f"{row.ratio:.17g}",
                *[f"{v:.17g}" for v in row.p],
                *[f"{v:.17g}" for v in row.q],
                f"{row.psi:.17g}",
            ]
            fh.write(",".join(vals) + "\n")


def read_csv(path) -> Dataset:
    ds = Dataset()
    with open(path) as fh:
        header_seen = False
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if not header_seen:
                if line != CSV_HEADER:
                    raise ValueError(f"{path}:{lineno}: unexpected header {line!r}")
                header_seen = True
                continue
            parts = line.split(",")
            if len(parts) != 17:
                raise ValueError(f"{path}:{lineno}: expected 17 fields, got {len(parts)}")
            try:
                ds.rows.append(
                    DatasetRow(
                        path_id=int(parts[0]),
                        step_id=int(parts[1]),
                        radius=float(parts[2]),
                        ratio=float(parts[3]),
                        p=np.array([float(v) for v in parts[4:10]]),
                        q=np.array([float(v) for v in parts[10:16]]),
                        psi=float(parts[16]),
                    )
                )
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: malformed row ({exc})") from exc
    return ds


def compute_weights(ds: Dataset) -> dict:
    """Inverse mean-square loss weights per (R, P) group and component.

    w_ij = 1 / max(mean_k q_i^2, floor) over group j, with a floor of
    1e-12 times the group's largest component mean square. Balancing the
    loss this way needs the reciprocal of the mean square magnitude;
    multiplying by the mean square itself would amplify already-large
    components instead of equalizing them.
    """
    if not ds.rows:
        raise ValueError("empty dataset")
    weights = {}
    for group in ds.groups():
        q = np.array([row.q for row in ds.rows if row.group == group])
        msq = (q**2).mean(axis=0)
        top = msq.max()
        if top <= 0.0:
            raise ValueError(f"group {group} has identically zero stresses")
        weights[group] = 1.0 / np.maximum(msq, WEIGHT_FLOOR_REL * top)
    return weights


def split(
    ds: Dataset, frac_val: float = 0.1, frac_test: float = 0.1, seed: int = 0
) -> tuple[Dataset, Dataset, Dataset]:
    """Split at path granularity into (train, val, test); never splits a path."""
    if frac_val < 0 or frac_test < 0 or frac_val + frac_test >= 1.0:
        raise ValueError("fractions must be non-negative and sum below 1")
    keys = ds.path_keys()
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(keys))
    n_val = int(round(frac_val * len(keys)))
    n_test = int(round(frac_test * len(keys)))
    val_keys = {keys[i] for i in order[:n_val]}
    test_keys = {keys[i] for i in order[n_val : n_val + n_test]}

    train, val, test = Dataset(), Dataset(), Dataset()
    for row in ds.rows:
        key = (row.radius, row.ratio, row.path_id)
        if key in val_keys:
            val.rows.append(row)
        elif key in test_keys:
            test.rows.append(row)
        else:
            train.rows.append(row)
    return train, val, test
