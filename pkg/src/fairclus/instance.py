"""Colored metric instances: data model, loaders, validation, distance queries.

An instance is a finite point set with one color per point and a metric given
either as an explicit distance table or derived from Euclidean coordinates.
All downstream solvers assume the metric axioms hold; validation enforces them
up to an absolute tolerance of ``EPS_D``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, ValidationError

EPS_D = 1e-9  # absolute tolerance for all distance/threshold comparisons

# Euclidean instances larger than this answer distance queries from coords
# instead of materializing the full n x n table.
_CACHE_LIMIT = 2000

# Exhaustive triangle-inequality check up to this size; sampled above.
_EXHAUSTIVE_LIMIT = 200
_SAMPLED_TRIPLES_PER_POINT = 50


@dataclass(frozen=True)
class PointRecord:
    """One point: contiguous 0-based id, color label in [0, m), optional coords."""

    id: int
    color: int
    coords: tuple | None = None


@dataclass(frozen=True)
class MetricInstance:
    """Immutable colored metric space.

    Exactly one of the two metric representations is authoritative: an
    explicit ``dist`` table, or ``coords`` from which Euclidean distances are
    derived (and cached as a table for small instances).
    """

    n: int
    m: int
    colors: np.ndarray  # shape (n,), int
    coords: np.ndarray | None = None  # shape (n, dim) or None
    dist: np.ndarray | None = None  # shape (n, n) or None (large Euclidean)
    color_names: tuple | None = None  # reporting only
    points: tuple = field(default_factory=tuple)

    def distance(self, i: int, j: int) -> float:
        if not (0 <= i < self.n and 0 <= j < self.n):
            raise IndexError(f"point id out of range: ({i}, {j}) with n={self.n}")
        if self.dist is not None:
            return float(self.dist[i, j])
        diff = self.coords[i] - self.coords[j]
        return float(np.sqrt(np.dot(diff, diff)))

    def distance_matrix(self) -> np.ndarray:
        """Full n x n table (computed on demand for large Euclidean instances)."""
        if self.dist is not None:
            return self.dist
        return _euclidean_table(self.coords)

    def points_of_color(self, h: int) -> np.ndarray:
        return np.flatnonzero(self.colors == h)

    def color_counts(self) -> np.ndarray:
        return np.bincount(self.colors, minlength=self.m)


def make_instance(colors, coords=None, dist=None, m=None, color_names=None,
                  validate=True) -> MetricInstance:
    """Build and validate a MetricInstance from raw arrays."""
    colors = np.asarray(colors, dtype=int)
    n = colors.shape[0]
    if n == 0:
        raise ValidationError("instance must contain at least one point")
    if m is None:
        m = int(colors.max()) + 1 if n else 0
    if colors.min(initial=0) < 0 or (n and colors.max() >= m):
        bad = int(np.flatnonzero((colors < 0) | (colors >= m))[0])
        raise ValidationError(
            f"color label {colors[bad]} of point {bad} outside [0, {m})")

    if (coords is None) == (dist is None):
        raise ValidationError("exactly one of coords/dist must be given")

    if coords is not None:
        coords = np.asarray(coords, dtype=float)
        if coords.ndim != 2 or coords.shape[0] != n:
            raise ValidationError(f"coords must be (n, dim), got {coords.shape}")
        if not np.all(np.isfinite(coords)):
            raise ValidationError("coords contain non-finite values")
        table = _euclidean_table(coords) if n <= _CACHE_LIMIT else None
        coords.flags.writeable = False
        if table is not None:
            table.flags.writeable = False
    else:
        table = np.asarray(dist, dtype=float)
        if table.shape != (n, n):
            raise ValidationError(f"dist must be (n, n), got {table.shape}")
        if validate:
            _check_metric_axioms(table)
        table = table.copy()
        table.flags.writeable = False

    pts = tuple(
        PointRecord(i, int(colors[i]),
                    tuple(coords[i]) if coords is not None else None)
        for i in range(n))
    colors = colors.copy()
    colors.flags.writeable = False
    return MetricInstance(n=n, m=int(m), colors=colors, coords=coords,
                          dist=table, color_names=tuple(color_names) if color_names else None,
                          points=pts)


def _euclidean_table(coords: np.ndarray) -> np.ndarray:
    sq = np.sum(coords ** 2, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * coords @ coords.T
    np.maximum(d2, 0.0, out=d2)
    table = np.sqrt(d2)
    np.fill_diagonal(table, 0.0)
    # exact symmetry regardless of float noise in the gram product
    return (table + table.T) / 2.0


def _check_metric_axioms(d: np.ndarray) -> None:
    n = d.shape[0]
    if not np.all(np.isfinite(d)):
        i, j = np.argwhere(~np.isfinite(d))[0]
        raise ValidationError(f"non-finite distance at ({i}, {j})")
    if np.any(d < -EPS_D):
        i, j = np.argwhere(d < -EPS_D)[0]
        raise ValidationError(f"negative distance d({i},{j}) = {d[i, j]}")
    diag = np.abs(np.diag(d))
    if np.any(diag > EPS_D):
        i = int(np.argmax(diag))
        raise ValidationError(f"d({i},{i}) = {d[i, i]} is not 0")
    asym = np.abs(d - d.T)
    if np.any(asym > EPS_D):
        i, j = np.argwhere(asym > EPS_D)[0]
        raise ValidationError(
            f"asymmetric distances d({i},{j}) = {d[i, j]} vs d({j},{i}) = {d[j, i]}")

    if n <= _EXHAUSTIVE_LIMIT:
        # d[i,l] + d[l,j] >= d[i,j] for all triples, vectorized over l
        for l in range(n):
            slack = d[:, l][:, None] + d[l, :][None, :] - d
            if np.any(slack < -EPS_D):
                i, j = np.argwhere(slack < -EPS_D)[0]
                raise ValidationError(
                    "triangle inequality violated for triple "
                    f"({i}, {l}, {j}): d({i},{j}) = {d[i, j]} > "
                    f"d({i},{l}) + d({l},{j}) = {d[i, l] + d[l, j]}")
    else:
        rng = np.random.default_rng(0)
        triples = rng.integers(0, n, size=(_SAMPLED_TRIPLES_PER_POINT * n, 3))
        for i, l, j in triples:
            if d[i, l] + d[l, j] - d[i, j] < -EPS_D:
                raise ValidationError(
                    f"triangle inequality violated for triple ({i}, {l}, {j})")


def load_instance(source, format: str, colors_source=None) -> MetricInstance:
    """Load an instance from a byte/text stream or path.

    Formats: ``json`` (keys n, m, colors, and coords or dist),
    ``csv-points`` (header ``id,color,x0,x1,...``), and ``csv-matrix``
    (n rows of n reals; requires a companion ``colors_source``).
    """
    text = read_text_source(source)
    if format == "json":
        return _load_json(text)
    if format == "csv-points":
        return _load_csv_points(text)
    if format == "csv-matrix":
        if colors_source is None:
            raise ParseError("csv-matrix format requires a colors companion file")
        return _load_csv_matrix(text, read_text_source(colors_source))
    raise ParseError(f"unknown instance format: {format!r}")


def read_text_source(source) -> str:
    """Text from a path, PathLike, bytes, raw string, or file object."""
    import os
    if isinstance(source, os.PathLike):
        source = os.fspath(source)
    if isinstance(source, (str, bytes)) and "\n" not in str(source)[:500] \
            and _looks_like_path(source):
        with open(source, "rb") as fh:
            return fh.read().decode("utf-8")
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str):
        return source
    data = source.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def _looks_like_path(source) -> bool:
    import os
    try:
        return os.path.exists(source)
    except (TypeError, ValueError):
        return False


def _load_json(text: str) -> MetricInstance:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON instance: {exc}") from exc
    for key in ("n", "m", "colors"):
        if key not in obj:
            raise ParseError(f"instance JSON missing required key {key!r}")
    n, m, colors = obj["n"], obj["m"], obj["colors"]
    if len(colors) != n:
        raise ParseError(f"colors has length {len(colors)}, expected n={n}")
    coords = obj.get("coords")
    dist = obj.get("dist")
    if coords is None and dist is None:
        raise ParseError("instance JSON needs one of 'coords' or 'dist'")
    return make_instance(colors, coords=coords, dist=dist, m=m,
                         color_names=obj.get("color_names"))


def _load_csv_points(text: str) -> MetricInstance:
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r and any(cell.strip() for cell in r)]
    if not rows:
        raise ParseError("empty csv-points input")
    header = [c.strip() for c in rows[0]]
    if header[:2] != ["id", "color"]:
        raise ParseError("csv-points header must start with 'id,color'")
    dim = len(header) - 2
    if dim < 1:
        raise ParseError("csv-points needs at least one coordinate column")
    records = []
    try:
        for r in rows[1:]:
            records.append((int(r[0]), int(r[1]), [float(v) for v in r[2:2 + dim]]))
    except (ValueError, IndexError) as exc:
        raise ParseError(f"malformed csv-points row: {exc}") from exc
    records.sort(key=lambda t: t[0])
    ids = [t[0] for t in records]
    if ids != list(range(len(records))):
        raise ValidationError("point ids must form a contiguous 0-based range")
    colors = [t[1] for t in records]
    coords = [t[2] for t in records]
    return make_instance(colors, coords=coords)


def _load_csv_matrix(text: str, colors_text: str) -> MetricInstance:
    try:
        rows = [[float(v) for v in line.replace(",", " ").split()]
                for line in text.splitlines() if line.strip()]
    except ValueError as exc:
        raise ParseError(f"malformed csv-matrix row: {exc}") from exc
    try:
        colors = [int(v) for v in colors_text.replace(",", " ").split()]
    except ValueError as exc:
        raise ParseError(f"malformed colors file: {exc}") from exc
    n = len(rows)
    if any(len(r) != n for r in rows):
        raise ParseError("csv-matrix must be square")
    if len(colors) != n:
        raise ParseError(f"colors file has {len(colors)} entries, expected {n}")
    return make_instance(colors, dist=rows)


def pairwise_distance_set(inst: MetricInstance) -> np.ndarray:
    """Sorted distinct distance values of the instance, always including 0."""
    d = inst.distance_matrix()
    vals = np.unique(d)
    if vals[0] != 0.0:
        vals = np.concatenate(([0.0], vals))
    return vals


def random_instance(n: int, m: int, seed: int, dim: int = 2,
                    color_dist=None) -> MetricInstance:
    """Seeded random instance: uniform coords in the unit cube, i.i.d. colors."""
    if n < 1 or m < 1 or dim < 1:
        raise ValidationError(f"invalid generator parameters n={n}, m={m}, dim={dim}")
    if color_dist is None:
        color_dist = [1.0 / m] * m
    color_dist = np.asarray(color_dist, dtype=float)
    if color_dist.shape != (m,) or np.any(color_dist < 0):
        raise ValidationError("color distribution must be m nonnegative weights")
    total = color_dist.sum()
    if total <= 0:
        raise ValidationError("color distribution must have positive mass")
    rng = np.random.default_rng(seed)
    coords = rng.uniform(0.0, 1.0, size=(n, dim))
    colors = rng.choice(m, size=n, p=color_dist / total)
    return make_instance(colors, coords=coords, m=m)


def instance_to_dict(inst: MetricInstance) -> dict:
    """JSON-ready representation (coords preferred when available)."""
    obj = {"n": inst.n, "m": inst.m, "colors": inst.colors.tolist()}
    if inst.coords is not None:
        obj["coords"] = inst.coords.tolist()
    else:
        obj["dist"] = inst.dist.tolist()
    if inst.color_names:
        obj["color_names"] = list(inst.color_names)
    return obj
