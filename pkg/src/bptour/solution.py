"""Solution containers shared by the solver, heuristic and CLI."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .instances import FixedCompensation, Instance
from .oracles import PtpResult, Route


@dataclass(frozen=True)
class LeaderDecision:
    """Offered item sets per carrier; for margin decisions, one margin per item."""

    offers: tuple[frozenset[int], ...]
    margins: Optional[tuple[Mapping[int, float], ...]] = None

    def __post_init__(self):
        seen: set[int] = set()
        for k, items in enumerate(self.offers):
            if seen & items:
                raise ValueError("offered item sets must be disjoint")
            seen |= items
            if self.margins is not None and set(self.margins[k]) != set(items):
                raise ValueError(f"carrier {k}: margins must cover the offer")

    @property
    def carriers(self) -> int:
        return len(self.offers)

    def prize_vector(self, instance: Instance, k: int,
                     compensation: Optional[FixedCompensation] = None) -> np.ndarray:
        """Vertex-indexed compensation offered to carrier k (0 off-offer)."""
        prizes = np.zeros(instance.n + 1)
        if self.margins is not None:
            for i in self.offers[k]:
                prizes[i] = (1.0 - self.margins[k][i]) * instance.prices[i]
        else:
            if compensation is None:
                raise ValueError("fixed-compensation decision needs pbar")
            for i in self.offers[k]:
                prizes[i] = compensation.pbar[k, i]
        return prizes


@dataclass(frozen=True)
class FollowerResponse:
    """One carrier's reaction: accepted items, route, and both profits."""

    accepted: frozenset[int]
    route: Route
    value: float
    leader_value: float

    @classmethod
    def empty(cls) -> "FollowerResponse":
        return cls(frozenset(), Route.empty(), 0.0, 0.0)

    @classmethod
    def from_ptp(cls, result: PtpResult) -> "FollowerResponse":
        return cls(result.accepted, result.route, result.value,
                   result.leader_value)


@dataclass(frozen=True)
class BilevelSolution:
    decision: LeaderDecision
    responses: tuple[FollowerResponse, ...]

    def __post_init__(self):
        if len(self.responses) != self.decision.carriers:
            raise ValueError("one response per carrier required")
        for k, resp in enumerate(self.responses):
            if not resp.accepted <= self.decision.offers[k]:
                raise ValueError(f"carrier {k} accepted unoffered items")

    @property
    def objective(self) -> float:
        return float(sum(r.leader_value for r in self.responses))

    @classmethod
    def empty(cls, carriers: int, with_margins: bool = False) -> "BilevelSolution":
        margins = tuple({} for _ in range(carriers)) if with_margins else None
        return cls(LeaderDecision(tuple(frozenset() for _ in range(carriers)),
                                  margins),
                   tuple(FollowerResponse.empty() for _ in range(carriers)))

    def to_json_dict(self) -> dict:
        carriers = []
        for k, resp in enumerate(self.responses):
            entry = {
                "offered": sorted(self.decision.offers[k]),
                "accepted": sorted(resp.accepted),
                "route": list(resp.route.vertices),
                "follower_profit": resp.value,
                "leader_profit": resp.leader_value,
            }
            if self.decision.margins is not None:
                entry["margins"] = {str(i): m for i, m
                                    in sorted(self.decision.margins[k].items())}
            carriers.append(entry)
        return {"objective": self.objective, "carriers": carriers}
