"""Instance data model and benchmark-file ingestion.

Vertices are indexed 0..n with 0 the depot and 1..n the customers.  All
per-vertex arrays (prices, cost-matrix axes) use that indexing, so
``prices[0]`` is always 0.  Arc costs are stored per carrier as a dense
(n+1)x(n+1) float matrix; the bundled loaders produce the same symmetric
Euclidean matrix for every carrier, but the data model allows asymmetric
per-carrier costs.

Two capacity regimes are supported: a per-carrier bound on the number of
offered items (``ItemBudget``) and a per-carrier route-duration limit
(``RouteDuration``).
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .tolerances import COST_TOL

# Default seed for price generation; fixed so that regenerated benchmark
# prices are reproducible across runs of this artifact.
DEFAULT_PRICE_SEED = 101

PathLike = Union[str, Path]


class InstanceError(ValueError):
    """Raised for malformed instance files or inconsistent instance data."""


@dataclass(frozen=True)
class ItemBudget:
    """Per-carrier cap on the number of items the leader may offer."""

    budgets: tuple[int, ...]

    @property
    def kind(self) -> str:
        return "item_budget"


@dataclass(frozen=True)
class RouteDuration:
    """Per-carrier upper bound on the follower's route duration."""

    limits: tuple[float, ...]

    @property
    def kind(self) -> str:
        return "route_duration"


CapacityMode = Union[ItemBudget, RouteDuration]


@dataclass(frozen=True)
class Instance:
    """A complete bilevel profitable-tour instance.

    Attributes:
        n: number of customers (vertices 1..n; vertex 0 is the depot).
        costs: per-carrier arc costs, shape (carriers, n+1, n+1).
        prices: per-vertex item prices, shape (n+1,), prices[0] == 0.
        carriers: number of followers.
        capacity_mode: ItemBudget or RouteDuration.
        margins: sorted fractional margins in (0, 1) available to the leader.
        coords: optional vertex coordinates, shape (n+1, 2).
    """

    n: int
    costs: np.ndarray
    prices: np.ndarray
    carriers: int
    capacity_mode: CapacityMode
    margins: tuple[float, ...] = ()
    coords: Optional[np.ndarray] = None
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        costs = np.ascontiguousarray(np.asarray(self.costs, dtype=float))
        if costs.ndim == 2:
            costs = np.repeat(costs[None, :, :], self.carriers, axis=0)
        prices = np.ascontiguousarray(np.asarray(self.prices, dtype=float))
        coords = self.coords
        if coords is not None:
            coords = np.ascontiguousarray(np.asarray(coords, dtype=float))
            coords.setflags(write=False)
        costs.setflags(write=False)
        prices.setflags(write=False)
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "coords", coords)

    # -- accessors -------------------------------------------------------

    @property
    def customers(self) -> range:
        return range(1, self.n + 1)

    @property
    def is_duration_mode(self) -> bool:
        return isinstance(self.capacity_mode, RouteDuration)

    def budget(self, k: int) -> int:
        mode = self.capacity_mode
        if not isinstance(mode, ItemBudget):
            raise InstanceError("instance has no item budgets (duration mode)")
        return mode.budgets[k]

    def t_max(self, k: int) -> float:
        mode = self.capacity_mode
        if not isinstance(mode, RouteDuration):
            raise InstanceError("instance has no duration limits (budget mode)")
        return mode.limits[k]

    @property
    def m_min(self) -> float:
        return self.margins[0]

    @property
    def m_max(self) -> float:
        return self.margins[-1]

    # -- validation ------------------------------------------------------

    def validate(self, require_metric: bool = True) -> None:
        """Check structural invariants; raises InstanceError on failure.

        ``require_metric=False`` skips the per-carrier triangle-inequality
        check (needed for hand-built fixtures with non-metric costs; the
        branch-and-cut cut families assume metric costs in general).
        """
        m = self.n + 1
        if self.costs.shape != (self.carriers, m, m):
            raise InstanceError(
                f"costs shape {self.costs.shape} != {(self.carriers, m, m)}")
        if self.prices.shape != (m,):
            raise InstanceError(f"prices shape {self.prices.shape} != ({m},)")
        if self.coords is not None and self.coords.shape != (m, 2):
            raise InstanceError(f"coords shape {self.coords.shape} != ({m}, 2)")
        if self.carriers < 1:
            raise InstanceError("need at least one carrier")
        if np.any(self.costs < -COST_TOL):
            raise InstanceError("negative arc cost")
        if np.any(np.abs(np.diagonal(self.costs, axis1=1, axis2=2)) > COST_TOL):
            raise InstanceError("nonzero cost diagonal")
        if np.any(self.prices[1:] <= 0):
            raise InstanceError("prices must be strictly positive")
        if abs(self.prices[0]) > 0:
            raise InstanceError("depot price must be 0")
        for mg in self.margins:
            if not (0.0 < mg < 1.0):
                raise InstanceError(f"margin {mg} outside (0, 1)")
        if list(self.margins) != sorted(set(self.margins)):
            raise InstanceError("margins must be strictly ascending")
        mode = self.capacity_mode
        if isinstance(mode, ItemBudget):
            if len(mode.budgets) != self.carriers:
                raise InstanceError("one budget per carrier required")
            for b in mode.budgets:
                if not (0 <= b < self.n):
                    raise InstanceError(f"budget {b} violates b < n = {self.n}")
        else:
            if len(mode.limits) != self.carriers:
                raise InstanceError("one duration limit per carrier required")
            for t in mode.limits:
                if t <= 0:
                    raise InstanceError(f"duration limit {t} must be positive")
        if require_metric:
            for k in range(self.carriers):
                check_triangle_inequality(self.costs[k], carrier=k)

    # -- serialization ---------------------------------------------------

    def to_json_dict(self, include_costs: Optional[bool] = None) -> dict:
        """Canonical JSON form: vertices, costs digest, prices, mode, margins.

        Full cost matrices are included only when no coordinates are stored
        (otherwise the matrices are reconstructible from the coordinates).
        """
        if include_costs is None:
            include_costs = self.coords is None
        mode = self.capacity_mode
        if isinstance(mode, ItemBudget):
            mode_dict = {"type": "item_budget", "budgets": list(mode.budgets)}
        else:
            mode_dict = {"type": "route_duration",
                         "limits": [float(t) for t in mode.limits]}
        out = {
            "format_version": 1,
            "name": self.name,
            "n": self.n,
            "carriers": self.carriers,
            "prices": [float(p) for p in self.prices],
            "capacity_mode": mode_dict,
            "margins": [float(m) for m in self.margins],
            "costs_digest": costs_digest(self.costs),
        }
        if self.coords is not None:
            out["coords"] = [[float(x), float(y)] for x, y in self.coords]
        if include_costs:
            out["costs"] = [[[float(c) for c in row] for row in mat]
                            for mat in self.costs]
        return out

    def dump_json(self, path: PathLike, include_costs: Optional[bool] = None) -> None:
        text = json.dumps(self.to_json_dict(include_costs), sort_keys=True, indent=1)
        Path(path).write_text(text + "\n", encoding="utf-8")

    @classmethod
    def from_json_dict(cls, data: dict, require_metric: bool = True) -> "Instance":
        n = int(data["n"])
        carriers = int(data["carriers"])
        coords = None
        if "coords" in data:
            coords = np.asarray(data["coords"], dtype=float)
        if "costs" in data:
            costs = np.asarray(data["costs"], dtype=float)
        elif coords is not None:
            costs = np.repeat(euclidean_costs(coords)[None], carriers, axis=0)
        else:
            raise InstanceError("instance JSON needs 'costs' or 'coords'")
        mode_dict = data["capacity_mode"]
        if mode_dict["type"] == "item_budget":
            mode: CapacityMode = ItemBudget(tuple(int(b) for b in mode_dict["budgets"]))
        elif mode_dict["type"] == "route_duration":
            mode = RouteDuration(tuple(float(t) for t in mode_dict["limits"]))
        else:
            raise InstanceError(f"unknown capacity mode {mode_dict['type']!r}")
        inst = cls(
            n=n,
            costs=costs,
            prices=np.asarray(data["prices"], dtype=float),
            carriers=carriers,
            capacity_mode=mode,
            margins=tuple(float(m) for m in data.get("margins", [])),
            coords=coords,
            name=str(data.get("name", "")),
        )
        inst.validate(require_metric=require_metric)
        return inst

    @classmethod
    def load_json(cls, path: PathLike, require_metric: bool = True) -> "Instance":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls.from_json_dict(data, require_metric=require_metric)


@dataclass(frozen=True)
class FixedCompensation:
    """Fixed per-carrier, per-item compensations 0 < pbar[k, i] < p_i."""

    pbar: np.ndarray  # shape (carriers, n+1); column 0 unused (= 0)

    def __post_init__(self):
        pbar = np.ascontiguousarray(np.asarray(self.pbar, dtype=float))
        pbar.setflags(write=False)
        object.__setattr__(self, "pbar", pbar)

    def validate(self, instance: Instance) -> None:
        if self.pbar.shape != (instance.carriers, instance.n + 1):
            raise InstanceError(
                f"compensation shape {self.pbar.shape} != "
                f"{(instance.carriers, instance.n + 1)}")
        pb = self.pbar[:, 1:]
        if np.any(pb <= 0) or np.any(pb >= instance.prices[None, 1:]):
            raise InstanceError("compensations must satisfy 0 < pbar < price")

    @classmethod
    def from_margin(cls, instance: Instance, margin: float) -> "FixedCompensation":
        """Uniform-margin compensations pbar = (1 - margin) * price."""
        pbar = np.repeat(((1.0 - margin) * instance.prices)[None],
                         instance.carriers, axis=0)
        pbar[:, 0] = 0.0
        comp = cls(pbar)
        comp.validate(instance)
        return comp


# ---------------------------------------------------------------------------
# elementary constructions


def euclidean_costs(coords: np.ndarray) -> np.ndarray:
    """Symmetric Euclidean distance matrix over the given vertex coordinates.

    No rounding is applied; distances are full double precision.
    """
    pts = np.asarray(coords, dtype=float)
    diff = pts[:, None, :] - pts[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=2))


def check_triangle_inequality(cost: np.ndarray, carrier: int = 0,
                              tol: float = COST_TOL) -> None:
    """Raise InstanceError if c[i,j] > c[i,l] + c[l,j] for some triple."""
    m = cost.shape[0]
    for mid in range(m):
        detour = cost[:, mid:mid + 1] + cost[mid:mid + 1, :]
        bad = cost > detour + tol
        if np.any(bad):
            i, j = np.argwhere(bad)[0]
            raise InstanceError(
                f"carrier {carrier}: triangle inequality violated: "
                f"c[{i},{j}]={cost[i, j]:.6g} > c[{i},{mid}]+c[{mid},{j}]"
                f"={detour[i, j]:.6g}")


def generate_prices(n: int, seed: int = DEFAULT_PRICE_SEED) -> np.ndarray:
    """Deterministic pseudo-random integer prices in [1, 100].

    Returns a vertex-indexed vector of length n+1 with entry 0 (the depot)
    set to 0.  The same (n, seed) always yields the same vector.  Zero is
    excluded so that every item carries a strictly positive price.
    """
    if n < 1:
        raise InstanceError("need n >= 1 customers")
    rng = np.random.default_rng(seed)
    prices = np.zeros(n + 1)
    prices[1:] = rng.integers(1, 101, size=n).astype(float)
    return prices


def default_budget(n: int, carriers: int) -> tuple[int, ...]:
    """Per-carrier item budget ceil(n / carriers) + 2, clamped below n.

    The clamp keeps the structural assumption b < n intact on small
    instances; a warning is emitted when it fires.
    """
    if carriers < 1:
        raise InstanceError("need at least one carrier")
    b = math.ceil(n / carriers) + 2
    if b >= n:
        warnings.warn(
            f"budget {b} >= n = {n}; clamping to {n - 1}", stacklevel=2)
        b = n - 1
    return (b,) * carriers


def margin_profit(instance: Instance, m: float, i: int) -> tuple[float, float]:
    """Split price p_i into (platform profit m*p_i, compensation p_i - m*p_i)."""
    if not any(abs(m - mm) <= 1e-12 for mm in instance.margins):
        raise InstanceError(f"margin {m} not in margin set {instance.margins}")
    p_mi = m * float(instance.prices[i])
    return p_mi, float(instance.prices[i]) - p_mi


def margin_profit_table(instance: Instance) -> tuple[np.ndarray, np.ndarray]:
    """Arrays (p_m, pbar_m) of shape (|margins|, n+1): p_m = m * p, pbar = p - p_m."""
    marg = np.asarray(instance.margins, dtype=float)
    p_m = marg[:, None] * instance.prices[None, :]
    return p_m, instance.prices[None, :] - p_m


def costs_digest(costs: np.ndarray) -> str:
    """Stable sha256 digest of a cost tensor (used in instance dumps)."""
    payload = np.ascontiguousarray(costs, dtype=float).tobytes()
    return "sha256:" + hashlib.sha256(payload).hexdigest()


# ---------------------------------------------------------------------------
# benchmark-file loaders


def _numeric_fields(line: str) -> list[float]:
    try:
        return [float(tok) for tok in line.replace(";", " ").split()]
    except ValueError as exc:
        raise InstanceError(f"non-numeric field in line {line!r}") from exc


def load_chao(path: PathLike, price_seed: int = DEFAULT_PRICE_SEED,
              margins: Sequence[float] = ()) -> Instance:
    """Load a team-orienteering benchmark file (Chao layout).

    Expected layout: three header lines ``n <count>``, ``m <vehicles>``,
    ``tmax <limit>`` followed by one ``x y score`` line per vertex.  The
    first vertex is the start depot and the last one the end depot; the end
    depot is dropped (one-depot setting), so the instance has count-2
    customers.  The score column is discarded and prices are regenerated
    deterministically from ``price_seed``.  The result is always in
    route-duration mode with the file's tmax for every vehicle.
    """
    lines = [ln.strip() for ln in Path(path).read_text(encoding="utf-8").splitlines()
             if ln.strip()]
    if len(lines) < 4:
        raise InstanceError(f"{path}: truncated file")
    header: dict[str, float] = {}
    for ln in lines[:3]:
        parts = ln.split()
        if len(parts) != 2:
            raise InstanceError(f"{path}: malformed header line {ln!r}")
        try:
            header[parts[0].lower().lstrip("#")] = float(parts[1])
        except ValueError as exc:
            raise InstanceError(f"{path}: bad header value in {ln!r}") from exc
    for key in ("n", "m", "tmax"):
        if key not in header:
            raise InstanceError(f"{path}: header lacks '{key}'")
    total = int(header["n"])
    vehicles = int(header["m"])
    t_max = header["tmax"]
    if t_max <= 0:
        raise InstanceError(f"{path}: tmax must be positive, got {t_max}")
    if vehicles < 1:
        raise InstanceError(f"{path}: vehicle count must be >= 1")
    body = lines[3:]
    if len(body) != total:
        raise InstanceError(
            f"{path}: declared {total} vertices but found {len(body)} lines")
    rows = [_numeric_fields(ln) for ln in body]
    for row in rows:
        if len(row) < 3:
            raise InstanceError(f"{path}: vertex line with fewer than 3 fields")
    # drop the end depot (last line); first line is the single depot
    pts = np.asarray([[r[0], r[1]] for r in rows[:-1]], dtype=float)
    n = total - 2
    if n < 1:
        raise InstanceError(f"{path}: no customers after removing depots")
    inst = Instance(
        n=n,
        costs=np.repeat(euclidean_costs(pts)[None], vehicles, axis=0),
        prices=generate_prices(n, price_seed),
        carriers=vehicles,
        capacity_mode=RouteDuration((t_max,) * vehicles),
        margins=tuple(margins),
        coords=pts,
        name=Path(path).stem,
    )
    inst.validate()
    return inst


def load_solomon(path: PathLike, carriers: int, n_customers: Optional[int] = None,
                 price_seed: int = DEFAULT_PRICE_SEED,
                 margins: Sequence[float] = ()) -> Instance:
    """Load a Solomon VRPTW file (R101 layout), item-budget mode.

    Time windows, demands and the fleet section are ignored; only the
    coordinates of the depot (customer 0) and the first ``n_customers``
    customers are used.  ``carriers`` is supplied by the caller and the
    per-carrier budgets follow :func:`default_budget`.  Prices are
    regenerated deterministically from ``price_seed``.
    """
    if carriers < 1:
        raise InstanceError("carriers must be >= 1")
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    idx = None
    for pos, ln in enumerate(lines):
        if ln.strip().upper().startswith("CUST"):
            idx = pos + 1
            break
    if idx is None:
        raise InstanceError(f"{path}: malformed header (no CUSTOMER table)")
    rows = []
    for ln in lines[idx:]:
        if not ln.strip():
            continue
        fields = _numeric_fields(ln)
        if len(fields) < 3:
            raise InstanceError(f"{path}: malformed customer row {ln!r}")
        rows.append(fields)
    if not rows or int(rows[0][0]) != 0:
        raise InstanceError(f"{path}: missing depot row (customer 0)")
    if n_customers is not None:
        if n_customers < 1 or n_customers > len(rows) - 1:
            raise InstanceError(
                f"{path}: cannot take {n_customers} customers from "
                f"{len(rows) - 1}")
        rows = rows[:n_customers + 1]
    pts = np.asarray([[r[1], r[2]] for r in rows], dtype=float)
    n = len(rows) - 1
    inst = Instance(
        n=n,
        costs=np.repeat(euclidean_costs(pts)[None], carriers, axis=0),
        prices=generate_prices(n, price_seed),
        carriers=carriers,
        capacity_mode=ItemBudget(default_budget(n, carriers)),
        margins=tuple(margins),
        coords=pts,
        name=Path(path).stem,
    )
    inst.validate()
    return inst
