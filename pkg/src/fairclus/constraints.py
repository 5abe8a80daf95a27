"""Fairness specifications and checkers.

Two constraint families act on a clustering: per-cluster color-ratio bounds
with an additive violation budget, and per-color center-count bounds on the
chosen center set. Ratio bounds are held as exact fractions so that integer
count comparisons never fail on float noise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction

import numpy as np

from .errors import ParseError, ValidationError
from .instance import MetricInstance

OBJECTIVES = ("center", "median", "means")


def as_fraction(value) -> Fraction:
    """Exact rational from int, Fraction, 'p/q' string, or decimal float."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, str):
        return Fraction(value)
    if isinstance(value, (float, np.floating)):
        # decimal round-trip: a user writing 0.4 means 2/5, not the binary float
        return Fraction(Decimal(repr(float(value))))
    raise ValidationError(f"cannot interpret {value!r} as a ratio bound")


@dataclass(frozen=True)
class GroupFairnessSpec:
    """Per-color ratio window [lower_h, upper_h] plus additive budget rho."""

    lower: tuple
    upper: tuple
    rho: int = 0

    def __post_init__(self):
        lower = tuple(as_fraction(v) for v in self.lower)
        upper = tuple(as_fraction(v) for v in self.upper)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if len(lower) != len(upper):
            raise ValidationError("lower/upper ratio arrays differ in length")
        for h, (lo, up) in enumerate(zip(lower, upper)):
            if not (0 <= lo <= up <= 1):
                raise ValidationError(
                    f"ratio bounds for color {h} must satisfy 0 <= {lo} <= {up} <= 1")
        if self.rho < 0:
            raise ValidationError("violation budget rho must be nonnegative")
        if sum(lower) > 1:
            raise ValidationError("sum of lower ratio bounds exceeds 1")
        if sum(upper) < 1:
            raise ValidationError("sum of upper ratio bounds is below 1")

    @property
    def m(self) -> int:
        return len(self.lower)

    def lower_floats(self) -> np.ndarray:
        return np.array([float(v) for v in self.lower])

    def upper_floats(self) -> np.ndarray:
        return np.array([float(v) for v in self.upper])


@dataclass(frozen=True)
class CenterDiversitySpec:
    """Per-color center-count window [L_h, U_h] for a size-k center set."""

    lower: tuple
    upper: tuple
    k: int

    def __post_init__(self):
        lower = tuple(int(v) for v in self.lower)
        upper = tuple(int(v) for v in self.upper)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if len(lower) != len(upper):
            raise ValidationError("center-count bound arrays differ in length")
        for h, (lo, up) in enumerate(zip(lower, upper)):
            if lo < 0 or lo > up:
                raise ValidationError(
                    f"center-count bounds for color {h} must satisfy 0 <= {lo} <= {up}")
        if not (sum(lower) <= self.k <= sum(upper)):
            raise ValidationError(
                f"need sum(L) <= k <= sum(U), got {sum(lower)} <= {self.k} <= {sum(upper)}")

    @property
    def m(self) -> int:
        return len(self.lower)


@dataclass(frozen=True)
class Clustering:
    """Centers plus a total assignment of every point to one center."""

    centers: tuple
    assignment: tuple
    objective: str
    cost: float

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ValidationError(f"unknown objective {self.objective!r}")
        cset = set(self.centers)
        for j, c in enumerate(self.assignment):
            if c not in cset:
                raise ValidationError(f"point {j} assigned to non-center {c}")

    def members(self, center: int) -> list:
        return [j for j, c in enumerate(self.assignment) if c == center]

    def to_dict(self) -> dict:
        return {
            "centers": list(self.centers),
            "assignment": list(self.assignment),
            "objective": self.objective,
            "cost": self.cost,
        }

    @staticmethod
    def from_dict(obj: dict) -> "Clustering":
        try:
            return Clustering(tuple(obj["centers"]), tuple(obj["assignment"]),
                              obj["objective"], float(obj["cost"]))
        except KeyError as exc:
            raise ParseError(f"clustering JSON missing key {exc}") from exc


def clustering_cost(inst: MetricInstance, assignment, objective: str) -> float:
    """max / sum / sum-of-squares of point-to-assigned-center distances."""
    d = inst.distance_matrix()
    dists = np.array([d[assignment[j], j] for j in range(inst.n)])
    if objective == "center":
        return float(dists.max()) if len(dists) else 0.0
    if objective == "median":
        return float(dists.sum())
    if objective == "means":
        return float((dists ** 2).sum())
    raise ValidationError(f"unknown objective {objective!r}")


def make_clustering(inst, centers, assignment, objective) -> Clustering:
    cost = clustering_cost(inst, tuple(assignment), objective)
    return Clustering(tuple(sorted(centers)), tuple(assignment), objective, cost)


def check_cluster_group_fair(inst: MetricInstance, cluster, gf: GroupFairnessSpec,
                             rho=None) -> bool:
    """Exact Def.-style check: l_h |C| - rho <= |C ∩ P_h| <= u_h |C| + rho."""
    members = list(cluster)
    if not members:
        raise ValidationError("group fairness is undefined on an empty cluster")
    if rho is None:
        rho = gf.rho
    size = len(members)
    counts = np.bincount(inst.colors[members], minlength=gf.m)
    for h in range(gf.m):
        if counts[h] < gf.lower[h] * size - rho:
            return False
        if counts[h] > gf.upper[h] * size + rho:
            return False
    return True


def gf_violation(inst: MetricInstance, clustering: Clustering,
                 gf: GroupFairnessSpec) -> float:
    """Smallest rho* >= 0 making every cluster group fair; exact, returned as float."""
    worst = Fraction(0)
    for c in clustering.centers:
        members = clustering.members(c)
        if not members:
            raise ValidationError(f"cluster of center {c} is empty")
        size = len(members)
        counts = np.bincount(inst.colors[members], minlength=gf.m)
        for h in range(gf.m):
            worst = max(worst,
                        gf.lower[h] * size - int(counts[h]),
                        int(counts[h]) - gf.upper[h] * size)
    return float(worst)


def check_ds(inst: MetricInstance, centers, ds: CenterDiversitySpec) -> bool:
    """True iff L_h <= |centers ∩ P_h| <= U_h for every color."""
    centers = list(centers)
    counts = np.bincount(inst.colors[centers], minlength=ds.m) if centers else \
        np.zeros(ds.m, dtype=int)
    return all(ds.lower[h] <= counts[h] <= ds.upper[h] for h in range(ds.m))


@dataclass(frozen=True)
class PrecheckReport:
    ok: bool
    failures: tuple

    def __str__(self):
        return "ok" if self.ok else "; ".join(self.failures)


def feasibility_precheck(inst: MetricInstance, gf: GroupFairnessSpec,
                         ds: CenterDiversitySpec) -> PrecheckReport:
    """Diagnose the necessary feasibility conditions; never raises."""
    failures = []
    if not (sum(ds.lower) <= ds.k <= sum(ds.upper)):
        failures.append(
            f"center-count bounds cannot host k: sum(L)={sum(ds.lower)}, "
            f"k={ds.k}, sum(U)={sum(ds.upper)}")
    counts = inst.color_counts()
    for h in range(min(ds.m, inst.m)):
        if counts[h] < ds.lower[h]:
            name = inst.color_names[h] if inst.color_names else str(h)
            failures.append(
                f"insufficient points of color {name}: have {counts[h]}, "
                f"need at least {ds.lower[h]} centers")
    if sum(gf.lower) > 1:
        failures.append("lower ratios exceed 1")
    if sum(gf.upper) < 1:
        failures.append("upper ratios sum below 1")
    if inst.n < ds.k:
        failures.append(f"fewer points ({inst.n}) than clusters ({ds.k})")
    if gf.m != inst.m or ds.m != inst.m:
        failures.append(
            f"spec color count mismatch: instance m={inst.m}, "
            f"gf m={gf.m}, ds m={ds.m}")
    return PrecheckReport(ok=not failures, failures=tuple(failures))


def exact_gf_spec(inst: MetricInstance, rho: int = 0) -> GroupFairnessSpec:
    """Exact preservation of ratios: lower_h = upper_h = |P_h| / n."""
    counts = inst.color_counts()
    ratios = tuple(Fraction(int(c), inst.n) for c in counts)
    return GroupFairnessSpec(lower=ratios, upper=ratios, rho=rho)


def default_ds_profile(inst: MetricInstance, k: int) -> CenterDiversitySpec:
    """Exact center-count profile (L=U) apportioning k by color frequency.

    Largest-remainder apportionment capped by actual color counts; always
    feasible when k <= n.
    """
    if k > inst.n:
        raise ValidationError(f"k={k} exceeds n={inst.n}")
    counts = inst.color_counts()
    quota = [Fraction(k * int(c), inst.n) for c in counts]
    base = [min(int(q), int(c)) for q, c in zip(quota, counts)]
    remaining = k - sum(base)
    order = sorted(range(inst.m), key=lambda h: (-(quota[h] - int(quota[h])), h))
    idx = 0
    while remaining > 0:
        h = order[idx % inst.m]
        if base[h] < counts[h]:
            base[h] += 1
            remaining -= 1
        idx += 1
        if idx > 10 * inst.m * (k + 1):
            raise ValidationError("cannot apportion centers among colors")
    return CenterDiversitySpec(lower=tuple(base), upper=tuple(base), k=k)


def load_fairness_spec(source, inst: MetricInstance | None = None):
    """Read (gf, ds) specs from JSON.

    Schema: {"gf": {"lower": [..], "upper": [..], "rho": int},
             "ds": {"lower": [..], "upper": [..]}, "k": int,
             "exact_gf": bool}.
    ``exact_gf`` replaces the gf block with exact ratio preservation and
    requires the instance.
    """
    if isinstance(source, dict):
        obj = source
    else:
        from .instance import read_text_source
        try:
            obj = json.loads(read_text_source(source))
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid fairness spec JSON: {exc}") from exc

    if "k" not in obj or "ds" not in obj:
        raise ParseError("fairness spec JSON requires 'k' and 'ds'")
    k = int(obj["k"])
    ds_obj = obj["ds"]
    ds = CenterDiversitySpec(lower=tuple(ds_obj["lower"]),
                             upper=tuple(ds_obj["upper"]), k=k)

    if obj.get("exact_gf"):
        if inst is None:
            raise ParseError("exact_gf requires the instance to derive ratios")
        rho = int(obj.get("gf", {}).get("rho", 0))
        gf = exact_gf_spec(inst, rho=rho)
    else:
        if "gf" not in obj:
            raise ParseError("fairness spec JSON requires 'gf' unless exact_gf is set")
        gf_obj = obj["gf"]
        gf = GroupFairnessSpec(lower=tuple(gf_obj["lower"]),
                               upper=tuple(gf_obj["upper"]),
                               rho=int(gf_obj.get("rho", 0)))
    return gf, ds
