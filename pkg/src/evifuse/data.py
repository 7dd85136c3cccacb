"""Multi-view datasets: CSV ingestion, synthetic generation, stratified
splitting, per-view standardization, and conflictive-instance injection.

A dataset holds V feature matrices over the same N instances, one-hot labels,
and a per-instance tag recording whether (and how) the instance was made
conflictive: untouched instances are ``normal``; ``noise_view`` instances had
one view corrupted by additive Gaussian noise of some sigma; ``unaligned_view``
instances had one view replaced by the same view of an instance from a
different class. Injection never alters labels, only features and tags, and
every randomized operation is a pure function of its inputs and a seed.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .seeding import derived_rng

__all__ = [
    "Tag",
    "MultiViewDataset",
    "SplitSpec",
    "DataFormatError",
    "load_csv",
    "save_csv",
    "generate_synthetic",
    "inject_noise_views",
    "inject_unaligned_views",
    "split",
    "fit_scaler",
    "apply_scaler",
    "invert_scaler",
]

NORMAL = "normal"
NOISE_VIEW = "noise_view"
UNALIGNED_VIEW = "unaligned_view"

_KINDS = (NORMAL, NOISE_VIEW, UNALIGNED_VIEW)

# Features with train-set std below this are treated as constant and left
# unscaled rather than amplified by a near-zero divisor.
_SCALE_FLOOR = 1e-8


class DataFormatError(ValueError):
    """Raised for malformed CSV input, naming the file and line."""


@dataclass(frozen=True)
class Tag:
    """Conflict annotation for one instance."""

    kind: str = NORMAL
    view: int | None = None
    sigma: float | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown tag kind {self.kind!r}")
        if self.kind == NORMAL and (self.view is not None or self.sigma is not None):
            raise ValueError("normal tags carry no parameters")
        if self.kind != NORMAL and self.view is None:
            raise ValueError(f"{self.kind} tags need a view index")
        if self.kind == NOISE_VIEW and self.sigma is None:
            raise ValueError("noise_view tags need a sigma")

    @property
    def is_conflictive(self) -> bool:
        return self.kind != NORMAL


@dataclass(frozen=True)
class MultiViewDataset:
    """V feature matrices over N shared instances, one-hot labels, tags."""

    views: tuple
    labels: np.ndarray
    tags: tuple

    def __post_init__(self):
        views = tuple(np.ascontiguousarray(v, dtype=np.float64) for v in self.views)
        if not views:
            raise ValueError("need at least one view")
        n = views[0].shape[0]
        if any(v.ndim != 2 or v.shape[0] != n for v in views):
            raise ValueError("all views must be 2-D with the same instance count")
        labels = np.ascontiguousarray(self.labels, dtype=np.float64)
        if labels.ndim != 2 or labels.shape[0] != n or labels.shape[1] < 2:
            raise ValueError("labels must be one-hot rows over >= 2 classes")
        if not np.all((labels == 0.0) | (labels == 1.0)) or not np.all(labels.sum(axis=1) == 1.0):
            raise ValueError("labels must be one-hot")
        tags = tuple(self.tags)
        if len(tags) != n or not all(isinstance(t, Tag) for t in tags):
            raise ValueError("need one Tag per instance")
        for v in views:
            v.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "views", views)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "tags", tags)

    @property
    def n_instances(self) -> int:
        return self.views[0].shape[0]

    @property
    def n_views(self) -> int:
        return len(self.views)

    @property
    def n_classes(self) -> int:
        return self.labels.shape[1]

    @property
    def class_ids(self) -> np.ndarray:
        return self.labels.argmax(axis=1)

    @classmethod
    def from_class_ids(cls, views, class_ids, n_classes=None, tags=None) -> "MultiViewDataset":
        class_ids = np.asarray(class_ids, dtype=np.int64)
        k = int(n_classes) if n_classes is not None else int(class_ids.max()) + 1
        labels = np.zeros((class_ids.size, k))
        labels[np.arange(class_ids.size), class_ids] = 1.0
        if tags is None:
            tags = tuple(Tag() for _ in range(class_ids.size))
        return cls(views=tuple(views), labels=labels, tags=tags)

    def take(self, indices) -> "MultiViewDataset":
        """Row subset in the given index order."""
        indices = np.asarray(indices, dtype=np.int64)
        return MultiViewDataset(
            views=tuple(v[indices] for v in self.views),
            labels=self.labels[indices],
            tags=tuple(self.tags[i] for i in indices),
        )


@dataclass(frozen=True)
class SplitSpec:
    """Train fraction in (0, 1) plus the seed driving the partition."""

    train_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.train_fraction < 1.0):
            raise ValueError("train_fraction must lie strictly between 0 and 1")


# ---------------------------------------------------------------------------
# CSV ingestion and serialization
# ---------------------------------------------------------------------------


def _parse_float_row(line: str, path: str, lineno: int) -> list[float]:
    cells = line.split(",")
    try:
        return [float(c) for c in cells]
    except ValueError:
        for c in cells:
            try:
                float(c)
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: non-numeric cell {c.strip()!r}") from None
        raise


def _read_matrix(path: str) -> np.ndarray:
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if line == "":
                continue
            row = _parse_float_row(line, path, lineno)
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DataFormatError(
                    f"{path}:{lineno}: expected {width} values, got {len(row)}"
                )
            rows.append(row)
    if not rows:
        raise DataFormatError(f"{path}: file is empty")
    return np.array(rows, dtype=np.float64)


def _read_labels(path: str) -> np.ndarray:
    ids = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if line == "":
                continue
            try:
                ids.append(int(line))
            except ValueError:
                raise DataFormatError(
                    f"{path}:{lineno}: expected an integer class id, got {line!r}"
                ) from None
    if not ids:
        raise DataFormatError(f"{path}: file is empty")
    return np.array(ids, dtype=np.int64)


def _read_tags(path: str, n: int) -> tuple:
    tags = [Tag() for _ in range(n)]
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if line == "":
                continue
            cells = line.split(",")
            if len(cells) != 4:
                raise DataFormatError(f"{path}:{lineno}: expected 4 fields, got {len(cells)}")
            try:
                index = int(cells[0])
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: bad instance index {cells[0]!r}") from None
            if not (0 <= index < n):
                raise DataFormatError(f"{path}:{lineno}: index {index} out of range for {n} instances")
            kind = cells[1]
            view = int(cells[2]) if cells[2] != "" else None
            sigma = float(cells[3]) if cells[3] != "" else None
            try:
                tags[index] = Tag(kind=kind, view=view, sigma=sigma)
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from None
    return tuple(tags)


def load_csv(directory) -> MultiViewDataset:
    """Load ``view_0.csv .. view_{V-1}.csv`` plus ``labels.csv``.

    Rows are comma-separated reals without a header, one instance per row;
    labels are one integer class id per row, densified to 0..K-1. A
    ``tags.csv`` written by :func:`save_csv` is honored when present.

    Raises
    ------
    DataFormatError
        Naming file and line for ragged rows, non-numeric cells, empty
        files, or row-count mismatches.
    """
    directory = os.fspath(directory)
    paths = []
    v = 0
    while True:
        path = os.path.join(directory, f"view_{v}.csv")
        if not os.path.exists(path):
            break
        paths.append(path)
        v += 1
    if not paths:
        raise DataFormatError(f"{directory}: no view_0.csv found")
    views = [_read_matrix(p) for p in paths]
    label_path = os.path.join(directory, "labels.csv")
    if not os.path.exists(label_path):
        raise DataFormatError(f"{label_path}: missing labels file")
    raw_ids = _read_labels(label_path)
    n = views[0].shape[0]
    for p, mat in zip(paths, views):
        if mat.shape[0] != n:
            raise DataFormatError(
                f"{p}: {mat.shape[0]} rows, but view_0.csv has {n}"
            )
    if raw_ids.size != n:
        raise DataFormatError(f"{label_path}: {raw_ids.size} labels for {n} instances")
    classes = np.unique(raw_ids)
    if classes.size < 2:
        raise DataFormatError(f"{label_path}: need at least 2 distinct classes")
    dense = np.searchsorted(classes, raw_ids)
    tags_path = os.path.join(directory, "tags.csv")
    tags = _read_tags(tags_path, n) if os.path.exists(tags_path) else None
    return MultiViewDataset.from_class_ids(views, dense, n_classes=classes.size, tags=tags)


def save_csv(dataset: MultiViewDataset, directory) -> None:
    """Write the dataset back to the ``load_csv`` layout plus ``tags.csv``.

    Floats use shortest round-trip formatting, so save/load preserves
    values bit-exactly and regeneration under a fixed seed reproduces
    identical bytes.
    """
    directory = os.fspath(directory)
    os.makedirs(directory, exist_ok=True)
    for v, mat in enumerate(dataset.views):
        with open(os.path.join(directory, f"view_{v}.csv"), "w") as fh:
            for row in mat:
                fh.write(",".join(repr(float(x)) for x in row))
                fh.write("\n")
    with open(os.path.join(directory, "labels.csv"), "w") as fh:
        for cid in dataset.class_ids:
            fh.write(f"{int(cid)}\n")
    with open(os.path.join(directory, "tags.csv"), "w") as fh:
        for i, tag in enumerate(dataset.tags):
            view = "" if tag.view is None else str(tag.view)
            sigma = "" if tag.sigma is None else repr(float(tag.sigma))
            fh.write(f"{i},{tag.kind},{view},{sigma}\n")


# ---------------------------------------------------------------------------
# Synthetic generation
# ---------------------------------------------------------------------------


def generate_synthetic(
    n_views: int,
    n_classes: int,
    n_instances: int,
    dim,
    separation: float,
    seed: int,
) -> MultiViewDataset:
    """Per class and view, an isotropic unit-variance Gaussian cluster whose
    mean is drawn at the given separation scale.

    ``dim`` is one width for all views or a per-view sequence. Labels cycle
    round-robin, so classes are balanced to within one instance. With
    separation 0 all class clusters coincide and accuracy is pinned at
    chance level by construction.
    """
    if n_views < 1 or n_classes < 2 or n_instances < 1:
        raise ValueError("need n_views >= 1, n_classes >= 2, n_instances >= 1")
    if np.ndim(dim) == 0:
        dims = [int(dim)] * n_views
    else:
        dims = [int(d) for d in dim]
    if len(dims) != n_views or any(d < 1 for d in dims):
        raise ValueError("dim must be a positive width or one per view")
    if separation < 0.0:
        raise ValueError("separation must be nonnegative")
    class_ids = np.arange(n_instances) % n_classes
    mean_rng = derived_rng(seed, "synthetic-means")
    noise_rng = derived_rng(seed, "synthetic-noise")
    views = []
    for v in range(n_views):
        means = mean_rng.normal(0.0, separation, (n_classes, dims[v]))
        views.append(means[class_ids] + noise_rng.normal(0.0, 1.0, (n_instances, dims[v])))
    return MultiViewDataset.from_class_ids(views, class_ids, n_classes=n_classes)


# ---------------------------------------------------------------------------
# Conflict injection
# ---------------------------------------------------------------------------


def _writable_views(dataset: MultiViewDataset) -> list[np.ndarray]:
    return [v.copy() for v in dataset.views]


def _select_targets(dataset: MultiViewDataset, fraction: float, rng) -> np.ndarray:
    if not (0.0 <= fraction <= 1.0):
        raise ValueError("fraction must lie in [0, 1]")
    wanted = int(round(fraction * dataset.n_instances))
    normal = np.array(
        [i for i, t in enumerate(dataset.tags) if not t.is_conflictive], dtype=np.int64
    )
    wanted = min(wanted, normal.size)
    if wanted == 0:
        return np.empty(0, dtype=np.int64)
    return np.sort(rng.choice(normal, size=wanted, replace=False))


def inject_noise_views(dataset: MultiViewDataset, fraction: float, sigma: float, seed: int) -> MultiViewDataset:
    """Corrupt one uniformly chosen view of a fraction of instances with
    additive zero-mean Gaussian noise of the given sigma.

    Only currently-normal instances are eligible, labels are untouched, and
    selected instances are tagged ``noise_view`` with the view and sigma.
    """
    if sigma < 0.0:
        raise ValueError("sigma must be nonnegative")
    rng = derived_rng(seed, "noise-injection")
    targets = _select_targets(dataset, fraction, rng)
    if targets.size == 0:
        return dataset
    views = _writable_views(dataset)
    tags = list(dataset.tags)
    for i in targets:
        v = int(rng.integers(dataset.n_views))
        views[v][i] += rng.normal(0.0, sigma, views[v].shape[1])
        tags[i] = Tag(kind=NOISE_VIEW, view=v, sigma=float(sigma))
    return MultiViewDataset(views=tuple(views), labels=dataset.labels, tags=tuple(tags))


def inject_unaligned_views(dataset: MultiViewDataset, fraction: float, seed: int) -> MultiViewDataset:
    """Replace one uniformly chosen view of a fraction of instances with the
    same view of a donor instance from a different class.

    Donor features come from the dataset as given (before this injection),
    labels are untouched, and selected instances are tagged
    ``unaligned_view`` with the swapped view.

    Raises
    ------
    ValueError
        If some selected instance has no donor of a different class.
    """
    rng = derived_rng(seed, "unaligned-injection")
    targets = _select_targets(dataset, fraction, rng)
    if targets.size == 0:
        return dataset
    donors_pool = dataset.views  # pre-injection snapshot
    class_ids = dataset.class_ids
    views = _writable_views(dataset)
    tags = list(dataset.tags)
    for i in targets:
        candidates = np.flatnonzero(class_ids != class_ids[i])
        if candidates.size == 0:
            raise ValueError(
                f"instance {i}: no donor instance of a different class exists"
            )
        v = int(rng.integers(dataset.n_views))
        donor = int(rng.choice(candidates))
        views[v][i] = donors_pool[v][donor]
        tags[i] = Tag(kind=UNALIGNED_VIEW, view=v)
    return MultiViewDataset(views=tuple(views), labels=dataset.labels, tags=tuple(tags))


# ---------------------------------------------------------------------------
# Splitting and standardization
# ---------------------------------------------------------------------------


def split(dataset: MultiViewDataset, spec: SplitSpec):
    """Seed-deterministic class-stratified partition into (train, test).

    Only all-normal datasets may be split; conflict injection applies to the
    test half afterward. Every class contributes at least one instance to
    each side.

    Raises
    ------
    ValueError
        If any instance is already conflictive, or a class has < 2 instances.
    """
    if any(t.is_conflictive for t in dataset.tags):
        raise ValueError("split expects an all-normal dataset; inject conflicts after splitting")
    rng = derived_rng(spec.seed, "split")
    class_ids = dataset.class_ids
    train_idx, test_idx = [], []
    for c in range(dataset.n_classes):
        members = np.flatnonzero(class_ids == c)
        if members.size < 2:
            raise ValueError(f"class {c} has {members.size} instance(s); need >= 2 to split")
        order = rng.permutation(members)
        n_train = int(round(spec.train_fraction * members.size))
        n_train = min(max(n_train, 1), members.size - 1)
        train_idx.extend(order[:n_train])
        test_idx.extend(order[n_train:])
    return dataset.take(np.sort(train_idx)), dataset.take(np.sort(test_idx))


def fit_scaler(dataset: MultiViewDataset):
    """Per-view feature means and scales (stds, floored for constants)."""
    means, scales = [], []
    for mat in dataset.views:
        mu = mat.mean(axis=0)
        sd = mat.std(axis=0)
        means.append(mu)
        scales.append(np.where(sd < _SCALE_FLOOR, 1.0, sd))
    return means, scales


def apply_scaler(dataset: MultiViewDataset, scaler) -> MultiViewDataset:
    """Standardize every view with the given (means, scales); tags/labels kept."""
    means, scales = scaler
    if len(means) != dataset.n_views or len(scales) != dataset.n_views:
        raise ValueError("scaler does not match the dataset's view count")
    views = tuple(
        (mat - mu) / sc for mat, mu, sc in zip(dataset.views, means, scales)
    )
    return MultiViewDataset(views=views, labels=dataset.labels, tags=dataset.tags)


def invert_scaler(dataset: MultiViewDataset, scaler) -> MultiViewDataset:
    """Map standardized views back to original feature units.

    Up to float rounding this undoes ``apply_scaler``; use it before
    persisting a standardized dataset so the files stay in the units every
    consumer (including a later ``apply_scaler``) expects.
    """
    means, scales = scaler
    if len(means) != dataset.n_views or len(scales) != dataset.n_views:
        raise ValueError("scaler does not match the dataset's view count")
    views = tuple(
        mat * sc + mu for mat, mu, sc in zip(dataset.views, means, scales)
    )
    return MultiViewDataset(views=views, labels=dataset.labels, tags=dataset.tags)
