"""Seeded synthetic datasets, splits, and forget-set selection.

Datasets are immutable after creation. Generation is a pure function of
the stream, so regenerating with the same seed gives byte-identical data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyClass, ForgetTooLarge
from .numerics import RngStream

CLASSIFICATION = "classification"
REGRESSION = "regression"

# Class means are placed on a sphere of this radius; together with the
# per-cluster spread this sets how much the blobs overlap.
MEAN_RADIUS = 3.0


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray        # (m, n) float64
    labels: np.ndarray          # (m,) int64 class index, or float64 target
    task_kind: str              # CLASSIFICATION or REGRESSION
    num_classes: int            # 0 for regression
    example_ids: np.ndarray     # (m,) unique int64 identifiers

    def __post_init__(self):
        if not (len(self.features) == len(self.labels) == len(self.example_ids)):
            raise ValueError("features, labels, and ids must have equal length")
        if len(np.unique(self.example_ids)) != len(self.example_ids):
            raise ValueError("example ids must be unique")

    @property
    def size(self) -> int:
        return len(self.example_ids)

    @property
    def dims(self) -> int:
        return self.features.shape[1]

    def rows_for(self, ids: np.ndarray) -> np.ndarray:
        """Positional indices of the given example ids, in the given order."""
        order = np.argsort(self.example_ids)
        pos = np.searchsorted(self.example_ids, ids, sorter=order)
        rows = order[pos]
        if not np.array_equal(self.example_ids[rows], ids):
            raise KeyError("unknown example id in selection")
        return rows

    def view(self, ids: np.ndarray) -> "DatasetView":
        return DatasetView(self, np.asarray(ids, dtype=np.int64))


@dataclass(frozen=True)
class DatasetView:
    """A subset of a dataset addressed by example ids."""

    base: Dataset
    ids: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "_rows", self.base.rows_for(self.ids))

    @property
    def features(self) -> np.ndarray:
        return self.base.features[self._rows]

    @property
    def labels(self) -> np.ndarray:
        return self.base.labels[self._rows]

    @property
    def example_ids(self) -> np.ndarray:
        return self.ids

    @property
    def task_kind(self) -> str:
        return self.base.task_kind

    @property
    def num_classes(self) -> int:
        return self.base.num_classes

    @property
    def size(self) -> int:
        return len(self.ids)

    @property
    def dims(self) -> int:
        return self.base.dims


@dataclass(frozen=True)
class SplitPlan:
    train_ids: np.ndarray
    test_ids: np.ndarray
    population_ids: np.ndarray

    def __post_init__(self):
        pools = [self.train_ids, self.test_ids, self.population_ids]
        total = sum(len(p) for p in pools)
        if len(np.unique(np.concatenate(pools))) != total:
            raise ValueError("split id pools must be pairwise disjoint")


RANDOM_SUBSET = "random-subset"
CLASSWISE = "classwise"


@dataclass(frozen=True)
class ForgetSelection:
    strategy: str
    size: int
    forget_ids: np.ndarray
    class_index: int | None = None


def make_blobs(num_classes: int, per_class: int, dims: int, spread: float,
               rng: RngStream, id_offset: int = 0) -> Dataset:
    """Gaussian clusters around class means drawn on a seeded sphere.

    The means are sampled in general position, so they span a simplex
    whose scale (MEAN_RADIUS) against `spread` controls class overlap.
    """
    if num_classes < 1 or per_class < 1 or dims < 1:
        raise ValueError("counts must be >= 1")
    if spread <= 0:
        raise ValueError("spread must be positive")
    g = rng.gen
    means = g.standard_normal((num_classes, dims))
    means *= MEAN_RADIUS / np.linalg.norm(means, axis=1, keepdims=True)
    m = num_classes * per_class
    labels = np.repeat(np.arange(num_classes, dtype=np.int64), per_class)
    feats = means[labels] + spread * g.standard_normal((m, dims))
    # Shuffle so splits taken by position are class-balanced in expectation.
    perm = g.permutation(m)
    return Dataset(
        features=feats[perm],
        labels=labels[perm],
        task_kind=CLASSIFICATION,
        num_classes=num_classes,
        example_ids=np.arange(id_offset, id_offset + m, dtype=np.int64),
    )


def make_regression(m: int, n: int, noise_sd: float, rng: RngStream,
                    id_offset: int = 0) -> Dataset:
    """y = X a* + eps with standard-normal X and a seeded ground truth a*."""
    if m <= n:
        raise ValueError("need m > n (overdetermined system)")
    if noise_sd < 0:
        raise ValueError("noise_sd must be non-negative")
    g = rng.gen
    x = g.standard_normal((m, n))
    coef = g.standard_normal(n)
    y = x @ coef
    if noise_sd > 0:
        y = y + noise_sd * g.standard_normal(m)
    return Dataset(
        features=x,
        labels=y,
        task_kind=REGRESSION,
        num_classes=0,
        example_ids=np.arange(id_offset, id_offset + m, dtype=np.int64),
    )


def select_forget(dataset: Dataset, train_ids: np.ndarray, strategy: str,
                  size: int, rng: RngStream, class_index: int = 0) -> ForgetSelection:
    """Pick the forget set: a uniform strict subset, or one whole class."""
    train_ids = np.asarray(train_ids, dtype=np.int64)
    if strategy == RANDOM_SUBSET:
        if size >= len(train_ids):
            raise ForgetTooLarge(
                f"forget size {size} must be a strict subset of {len(train_ids)} train ids"
            )
        chosen = rng.gen.choice(train_ids, size=size, replace=False) if size else \
            np.empty(0, dtype=np.int64)
        chosen = np.sort(chosen.astype(np.int64))
        return ForgetSelection(strategy=strategy, size=size, forget_ids=chosen)
    if strategy == CLASSWISE:
        labels = dataset.view(train_ids).labels
        chosen = np.sort(train_ids[labels == class_index])
        if len(chosen) == 0:
            raise EmptyClass(f"no training examples of class {class_index}")
        if len(chosen) >= len(train_ids):
            raise ForgetTooLarge("classwise selection would empty the retain set")
        return ForgetSelection(strategy=strategy, size=len(chosen),
                               forget_ids=chosen, class_index=class_index)
    raise ValueError(f"unknown forget strategy: {strategy!r}")


def retain_ids(train_ids: np.ndarray, forget_ids: np.ndarray) -> np.ndarray:
    out = np.setdiff1d(np.asarray(train_ids, dtype=np.int64),
                       np.asarray(forget_ids, dtype=np.int64))
    return out


@dataclass(frozen=True)
class DatasetSpec:
    """Generator settings for one game's data pools."""

    kind: str = "blobs"           # blobs | regression
    num_classes: int = 4
    dims: int = 8
    spread: float = 1.0
    train_size: int = 1000
    test_size: int = 500
    population_size: int = 512
    noise_sd: float = 0.1         # regression only
    regression_features: int = 5  # regression only


def generate_pools(spec: DatasetSpec, rng: RngStream) -> tuple[Dataset, SplitPlan]:
    """Build one dataset holding train/test/population pools.

    The population pool (shadow-model data for the attacker) is drawn from
    the same generator under a disjoint stream, then merged with fresh ids.
    """
    if spec.kind == "blobs":
        main_total = spec.train_size + spec.test_size
        per_class = -(-main_total // spec.num_classes)  # ceil
        main = make_blobs(spec.num_classes, per_class, spec.dims, spec.spread,
                          rng.child("main"))
        if spec.population_size > 0:
            pop_per_class = -(-spec.population_size // spec.num_classes)
            pop = make_blobs(spec.num_classes, pop_per_class, spec.dims,
                             spec.spread, rng.child("population"),
                             id_offset=main.size)
            merged = Dataset(
                features=np.concatenate([main.features, pop.features]),
                labels=np.concatenate([main.labels, pop.labels]),
                task_kind=CLASSIFICATION,
                num_classes=spec.num_classes,
                example_ids=np.concatenate([main.example_ids, pop.example_ids]),
            )
            population = pop.example_ids[: spec.population_size]
        else:
            merged = main
            population = np.empty(0, dtype=np.int64)
        train = main.example_ids[: spec.train_size]
        test = main.example_ids[spec.train_size: spec.train_size + spec.test_size]
        return merged, SplitPlan(train, test, population)
    if spec.kind == "regression":
        total = spec.train_size + spec.test_size
        data = make_regression(total, spec.regression_features, spec.noise_sd,
                               rng.child("main"))
        train = data.example_ids[: spec.train_size]
        test = data.example_ids[spec.train_size:]
        return data, SplitPlan(train, test, np.empty(0, dtype=np.int64))
    raise ValueError(f"unknown dataset kind: {spec.kind!r}")


def dump_table(dataset: Dataset) -> str:
    """Flat text table: header `id,label,f0,...`; 17-significant-digit floats."""
    n = dataset.dims
    lines = ["id,label," + ",".join(f"f{j}" for j in range(n))]
    is_classification = dataset.task_kind == CLASSIFICATION
    for i in range(dataset.size):
        label = (str(int(dataset.labels[i])) if is_classification
                 else format(float(dataset.labels[i]), ".17g"))
        feats = ",".join(format(float(v), ".17g") for v in dataset.features[i])
        lines.append(f"{int(dataset.example_ids[i])},{label},{feats}")
    return "\n".join(lines) + "\n"


def load_table(text: str, task_kind: str = CLASSIFICATION,
               num_classes: int = 0) -> Dataset:
    lines = [ln for ln in text.splitlines() if ln]
    header = lines[0].split(",")
    if header[:2] != ["id", "label"]:
        raise ValueError("bad table header")
    ids, labels, feats = [], [], []
    for ln in lines[1:]:
        parts = ln.split(",")
        ids.append(int(parts[0]))
        labels.append(parts[1])
        feats.append([float(v) for v in parts[2:]])
    if task_kind == CLASSIFICATION:
        label_arr = np.array([int(v) for v in labels], dtype=np.int64)
    else:
        label_arr = np.array([float(v) for v in labels], dtype=np.float64)
    return Dataset(
        features=np.array(feats, dtype=np.float64),
        labels=label_arr,
        task_kind=task_kind,
        num_classes=num_classes,
        example_ids=np.array(ids, dtype=np.int64),
    )
