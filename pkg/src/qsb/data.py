"""Training-data containers and their CSV format.

CSV layout: header ``x1,...,xd,y`` with plain decimal numbers.  Replicated
designs carry an extra ``rep_id`` column (placed just before ``y``)
identifying the base point each row replicates.  Readers reject NaN/inf.
"""

import csv
import io
from dataclasses import dataclass, field

import numpy as np


def _check_domain(domain) -> np.ndarray:
    dom = np.asarray(domain, dtype=float)
    if dom.ndim != 2 or dom.shape[1] != 2:
        raise ValueError("domain must be a sequence of (lower, upper) pairs")
    if not np.all(np.isfinite(dom)) or not np.all(dom[:, 0] < dom[:, 1]):
        raise ValueError("domain bounds must be finite with lower < upper")
    return dom


@dataclass(frozen=True)
class Dataset:
    """n design points in a d-dimensional box plus n scalar responses."""

    x: np.ndarray
    y: np.ndarray
    domain: np.ndarray
    require_distinct: bool = True

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        dom = _check_domain(self.domain)
        if x.shape[0] < 1:
            raise ValueError("dataset needs at least one observation")
        if x.shape[0] != y.size:
            raise ValueError(f"{x.shape[0]} rows of x but {y.size} responses")
        if x.shape[1] != dom.shape[0]:
            raise ValueError("dimension of x does not match the domain")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite entries")
        eps = 1e-12 * np.maximum(1.0, np.abs(dom).max(axis=1))
        if np.any(x < dom[:, 0] - eps) or np.any(x > dom[:, 1] + eps):
            raise ValueError("design points fall outside the domain")
        if self.require_distinct and len(np.unique(x, axis=0)) != x.shape[0]:
            raise ValueError("design points must be pairwise distinct")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "domain", dom)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class ReplicatedDataset:
    """n' distinct base points, each observed r times."""

    bases: np.ndarray
    replicates: np.ndarray
    domain: np.ndarray = field(default=None)

    def __post_init__(self):
        bases = np.atleast_2d(np.asarray(self.bases, dtype=float))
        reps = np.atleast_2d(np.asarray(self.replicates, dtype=float))
        if reps.shape[0] != bases.shape[0]:
            raise ValueError("one row of replicates per base point required")
        if reps.shape[1] < 2:
            raise ValueError("replicated designs need at least 2 replicates")
        if not (np.all(np.isfinite(bases)) and np.all(np.isfinite(reps))):
            raise ValueError("dataset contains non-finite entries")
        if len(np.unique(bases, axis=0)) != bases.shape[0]:
            raise ValueError("base points must be pairwise distinct")
        dom = self.domain
        if dom is None:
            dom = np.column_stack([bases.min(axis=0), bases.max(axis=0)])
            span = np.where(dom[:, 1] > dom[:, 0], dom[:, 1] - dom[:, 0], 1.0)
            dom = np.column_stack([dom[:, 0] - 1e-9 * span, dom[:, 1] + 1e-9 * span])
        dom = _check_domain(dom)
        object.__setattr__(self, "bases", bases)
        object.__setattr__(self, "replicates", reps)
        object.__setattr__(self, "domain", dom)

    @property
    def n_bases(self) -> int:
        return self.bases.shape[0]

    @property
    def n_replicates(self) -> int:
        return self.replicates.shape[1]

    @property
    def d(self) -> int:
        return self.bases.shape[1]

    def flatten(self) -> Dataset:
        """All n'*r rows as a plain Dataset (rows are not distinct)."""
        n, r = self.replicates.shape
        x = np.repeat(self.bases, r, axis=0)
        return Dataset(x, self.replicates.ravel(), self.domain, require_distinct=False)


def _parse_float(token: str, where: str) -> float:
    v = float(token)
    if not np.isfinite(v):
        raise ValueError(f"non-finite value {token!r} at {where}")
    return v


def read_dataset_csv(path_or_buf, domain=None) -> Dataset:
    """Read an ``x1,...,xd,y`` CSV.  Without an explicit domain, the
    bounding box of the points (slightly inflated) is used."""
    if isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__"):
        fh = open(path_or_buf, newline="")
        close = True
    else:
        fh, close = path_or_buf, False
    try:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError("empty CSV")
        header = [h.strip() for h in header]
        if header[-1] != "y" or not all(h == f"x{i + 1}" for i, h in enumerate(header[:-1])):
            raise ValueError(f"expected header x1,...,xd,y, got {header}")
        d = len(header) - 1
        rows = []
        for ln, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 1:
                raise ValueError(f"line {ln}: expected {d + 1} fields, got {len(row)}")
            rows.append([_parse_float(tok, f"line {ln}") for tok in row])
    finally:
        if close:
            fh.close()
    if not rows:
        raise ValueError("CSV contains a header but no data rows")
    arr = np.asarray(rows, dtype=float)
    x, y = arr[:, :d], arr[:, d]
    if domain is None:
        lo, hi = x.min(axis=0), x.max(axis=0)
        span = np.where(hi > lo, hi - lo, 1.0)
        domain = np.column_stack([lo - 1e-9 * span, hi + 1e-9 * span])
    return Dataset(x, y, domain, require_distinct=False)


def write_dataset_csv(path_or_buf, data: Dataset) -> None:
    _write_rows(
        path_or_buf,
        [f"x{i + 1}" for i in range(data.d)] + ["y"],
        np.column_stack([data.x, data.y]),
    )


def read_replicated_csv(path_or_buf, domain=None) -> ReplicatedDataset:
    """Read an ``x1,...,xd,rep_id,y`` CSV into a ReplicatedDataset."""
    if isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__"):
        fh = open(path_or_buf, newline="")
        close = True
    else:
        fh, close = path_or_buf, False
    try:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        if header[-2:] != ["rep_id", "y"] or not all(
            h == f"x{i + 1}" for i, h in enumerate(header[:-2])
        ):
            raise ValueError(f"expected header x1,...,xd,rep_id,y, got {header}")
        d = len(header) - 2
        groups = {}
        for ln, row in enumerate(reader, start=2):
            if not row:
                continue
            vals = [_parse_float(tok, f"line {ln}") for tok in row[:d]]
            rep = int(float(row[d]))
            yv = _parse_float(row[d + 1], f"line {ln}")
            groups.setdefault(rep, (vals, []))[1].append(yv)
    finally:
        if close:
            fh.close()
    if not groups:
        raise ValueError("CSV contains a header but no data rows")
    keys = sorted(groups)
    bases = np.asarray([groups[k][0] for k in keys])
    counts = {len(groups[k][1]) for k in keys}
    if len(counts) != 1:
        raise ValueError(f"unequal replicate counts per base: {sorted(counts)}")
    reps = np.asarray([groups[k][1] for k in keys])
    return ReplicatedDataset(bases, reps, domain)


def write_replicated_csv(path_or_buf, data: ReplicatedDataset) -> None:
    n, r = data.replicates.shape
    rows = np.column_stack(
        [
            np.repeat(data.bases, r, axis=0),
            np.repeat(np.arange(n), r),
            data.replicates.ravel(),
        ]
    )
    _write_rows(
        path_or_buf,
        [f"x{i + 1}" for i in range(data.d)] + ["rep_id", "y"],
        rows,
    )


def _write_rows(path_or_buf, header, rows) -> None:
    if isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__"):
        fh = open(path_or_buf, "w", newline="")
        close = True
    else:
        fh, close = path_or_buf, False
    try:
        w = csv.writer(fh)
        w.writerow(header)
        for row in np.asarray(rows):
            w.writerow([repr(float(v)) for v in row])
    finally:
        if close:
            fh.close()


def dataset_to_csv_text(data) -> str:
    buf = io.StringIO()
    if isinstance(data, ReplicatedDataset):
        write_replicated_csv(buf, data)
    else:
        write_dataset_csv(buf, data)
    return buf.getvalue()
