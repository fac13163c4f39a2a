"""Core value types for position-auction markets.

A market instance is n bidders facing m independent position auctions.
Auction j has slots[j] slots whose click weights pos[j] are strictly
positive and nonincreasing; bidder i values a click in auction j at
values[i, j].  All types are immutable after construction and carry
float64 numpy arrays marked read-only.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Optional, Sequence

import numpy as np


class AuctionFormat(enum.Enum):
    VCG = "VCG"
    GSP = "GSP"
    FPA = "FPA"


class SignalKind(enum.Enum):
    RESERVE = "reserve"
    BOOST = "boost"


def _as_matrix(a: Any, n: int, m: int, name: str) -> np.ndarray:
    # always copy so freezing never makes the caller's array read-only
    arr = np.array(a, dtype=np.float64, order="C")
    if arr.shape != (n, m):
        raise ValueError(f"{name} must have shape ({n}, {m}), got {arr.shape}")
    arr.setflags(write=False)
    return arr


def _as_vector(a: Any, name: str) -> np.ndarray:
    arr = np.array(a, dtype=np.float64, order="C")
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """n bidders, m position auctions, per-auction slot counts and click weights.

    pos is a tuple of m arrays; pos[j] has length slots[j].  The weight of
    a hypothetical slot past the last one is 0 by convention everywhere.
    """

    n: int
    m: int
    slots: tuple[int, ...]
    values: np.ndarray
    pos: tuple[np.ndarray, ...]

    def __init__(self, n: int, m: int, slots: Sequence[int], values: Any, pos: Sequence[Any]):
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "m", int(m))
        object.__setattr__(self, "slots", tuple(int(s) for s in slots))
        object.__setattr__(self, "values", _as_matrix(values, self.n, self.m, "values"))
        object.__setattr__(self, "pos", tuple(_as_vector(p, f"pos[{j}]") for j, p in enumerate(pos)))

    @cached_property
    def issues(self) -> tuple[str, ...]:
        """Itemized invariant violations; empty means the instance is valid."""
        out: list[str] = []
        if self.n < 1:
            out.append("n must be at least 1")
        if self.m < 0:
            out.append("m must be nonnegative")
        if len(self.slots) != self.m:
            out.append(f"slots has length {len(self.slots)}, expected m={self.m}")
        if len(self.pos) != self.m:
            out.append(f"pos has length {len(self.pos)}, expected m={self.m}")
        if not np.all(np.isfinite(self.values)):
            out.append("values must be finite")
        if np.any(self.values < 0):
            out.append("values must be nonnegative")
        for j, s in enumerate(self.slots):
            if s < 1:
                out.append(f"auction {j}: slot count must be at least 1")
                continue
            if s > self.n:
                out.append(f"auction {j}: more slots than bidders ({s} > {self.n})")
            if j < len(self.pos):
                p = self.pos[j]
                if len(p) != s:
                    out.append(f"auction {j}: pos has length {len(p)}, expected {s}")
                if not np.all(np.isfinite(p)):
                    out.append(f"auction {j}: pos must be finite")
                elif np.any(p <= 0):
                    out.append(f"auction {j}: pos must be strictly positive")
                elif np.any(np.diff(p) > 0):
                    out.append(f"auction {j}: pos not nonincreasing")
        return tuple(out)

    def require_valid(self) -> None:
        if self.issues:
            raise ValueError("invalid instance: " + "; ".join(self.issues))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ProblemInstance):
            return NotImplemented
        return (
            self.n == other.n
            and self.m == other.m
            and self.slots == other.slots
            and np.array_equal(self.values, other.values)
            and all(np.array_equal(a, b) for a, b in zip(self.pos, other.pos))
        )

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "slots": list(self.slots),
            "values": self.values.tolist(),
            "pos": [p.tolist() for p in self.pos],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemInstance":
        return cls(d["n"], d["m"], d["slots"], d["values"], d["pos"])


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    issues: tuple[str, ...]


def validate_instance(instance: ProblemInstance) -> ValidationResult:
    """Check every structural invariant and return the itemized findings."""
    issues = instance.issues
    return ValidationResult(ok=not issues, issues=issues)


@dataclass(frozen=True, eq=False)
class MechanismConfig:
    """Pricing rule plus per-(bidder, auction) reserve prices and additive boosts.

    A bidder is eligible in auction j only when her bid meets her reserve;
    eligible bidders are ranked by bid + boost.
    """

    format: AuctionFormat
    reserves: np.ndarray
    boosts: np.ndarray

    def __init__(self, format: AuctionFormat, n: int, m: int,
                 reserves: Any = None, boosts: Any = None):
        object.__setattr__(self, "format", AuctionFormat(format))
        z = np.zeros((n, m))
        object.__setattr__(self, "reserves", _as_matrix(z if reserves is None else reserves, n, m, "reserves"))
        object.__setattr__(self, "boosts", _as_matrix(z if boosts is None else boosts, n, m, "boosts"))

    @property
    def n(self) -> int:
        return self.reserves.shape[0]

    @property
    def m(self) -> int:
        return self.reserves.shape[1]

    @cached_property
    def issues(self) -> tuple[str, ...]:
        out = []
        for name, a in (("reserves", self.reserves), ("boosts", self.boosts)):
            if not np.all(np.isfinite(a)):
                out.append(f"{name} must be finite")
            elif np.any(a < 0):
                out.append(f"{name} must be nonnegative")
        return tuple(out)

    def require_valid(self) -> None:
        if self.issues:
            raise ValueError("invalid mechanism config: " + "; ".join(self.issues))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MechanismConfig):
            return NotImplemented
        return (
            self.format == other.format
            and np.array_equal(self.reserves, other.reserves)
            and np.array_equal(self.boosts, other.boosts)
        )

    def to_dict(self) -> dict:
        return {
            "format": self.format.value,
            "reserves": self.reserves.tolist(),
            "boosts": self.boosts.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict, n: Optional[int] = None, m: Optional[int] = None) -> "MechanismConfig":
        reserves = d.get("reserves")
        boosts = d.get("boosts")
        if reserves is not None:
            arr = np.asarray(reserves, dtype=np.float64)
            n, m = arr.shape
        elif boosts is not None:
            arr = np.asarray(boosts, dtype=np.float64)
            n, m = arr.shape
        if n is None or m is None:
            raise ValueError("mechanism config without matrices needs explicit n and m")
        return cls(AuctionFormat(d["format"]), n, m, reserves, boosts)


@dataclass(frozen=True, eq=False)
class BidProfile:
    """One bid per bidder per auction."""

    bids: np.ndarray

    def __init__(self, bids: Any):
        arr = np.array(bids, dtype=np.float64, order="C")
        if arr.ndim != 2:
            raise ValueError("bids must be an n x m matrix")
        arr.setflags(write=False)
        object.__setattr__(self, "bids", arr)

    @property
    def n(self) -> int:
        return self.bids.shape[0]

    @property
    def m(self) -> int:
        return self.bids.shape[1]

    @cached_property
    def issues(self) -> tuple[str, ...]:
        if not np.all(np.isfinite(self.bids)):
            return ("bids must be finite",)
        if np.any(self.bids < 0):
            return ("bids must be nonnegative",)
        return ()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BidProfile):
            return NotImplemented
        return np.array_equal(self.bids, other.bids)

    def to_dict(self) -> dict:
        return {"bids": self.bids.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "BidProfile":
        return cls(d["bids"])


@dataclass(frozen=True, eq=False)
class Outcome:
    """Allocation and payments produced by clearing.

    winners[j][k] is the bidder holding slot k of auction j, or -1 when the
    slot went unfilled (fewer eligible bidders than slots).  payments[i, j]
    is bidder i's total payment in auction j; zero for non-winners.
    """

    winners: tuple[np.ndarray, ...]
    payments: np.ndarray

    def __init__(self, winners: Sequence[Any], payments: Any):
        ws = []
        for w in winners:
            arr = np.array(w, dtype=np.int64, order="C")
            arr.setflags(write=False)
            ws.append(arr)
        object.__setattr__(self, "winners", tuple(ws))
        pay = np.array(payments, dtype=np.float64, order="C")
        pay.setflags(write=False)
        object.__setattr__(self, "payments", pay)

    def allocation_triples(self) -> list[tuple[int, int, int]]:
        """(bidder, auction, slot) for every filled slot, ordered by (auction, slot)."""
        out = []
        for j, w in enumerate(self.winners):
            for k, i in enumerate(w):
                if i >= 0:
                    out.append((int(i), j, k))
        return out

    def slot_of(self, i: int, j: int) -> Optional[int]:
        hits = np.nonzero(self.winners[j] == i)[0]
        return int(hits[0]) if hits.size else None

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Outcome):
            return NotImplemented
        return (
            len(self.winners) == len(other.winners)
            and all(np.array_equal(a, b) for a, b in zip(self.winners, other.winners))
            and np.array_equal(self.payments, other.payments)
        )

    def to_dict(self) -> dict:
        return {
            "allocation": [list(t) for t in self.allocation_triples()],
            "payments": self.payments.tolist(),
            "slots": [int(len(w)) for w in self.winners],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Outcome":
        payments = np.asarray(d["payments"], dtype=np.float64)
        slots = d.get("slots")
        if slots is None:
            m = payments.shape[1]
            slots = [0] * m
            for _, j, k in d["allocation"]:
                slots[j] = max(slots[j], k + 1)
        winners = [np.full(s, -1, dtype=np.int64) for s in slots]
        for i, j, k in d["allocation"]:
            winners[j][k] = i
        return cls(winners, payments)


@dataclass(frozen=True, eq=False)
class AgentState:
    """Per-bidder objective mix and uniform bid multiplier.

    lambdas[i] in [0, 1] interpolates between a value maximizer (0) and a
    utility maximizer (1); multipliers[i] > 0 scales bidder i's values into
    uniform bids.
    """

    lambdas: np.ndarray
    multipliers: np.ndarray

    def __init__(self, lambdas: Any, multipliers: Any):
        object.__setattr__(self, "lambdas", _as_vector(lambdas, "lambdas"))
        object.__setattr__(self, "multipliers", _as_vector(multipliers, "multipliers"))

    @cached_property
    def issues(self) -> tuple[str, ...]:
        out = []
        if self.lambdas.shape != self.multipliers.shape:
            out.append("lambdas and multipliers must have equal length")
        if np.any(self.lambdas < 0) or np.any(self.lambdas > 1):
            out.append("lambdas must lie in [0, 1]")
        if np.any(self.multipliers <= 0) or not np.all(np.isfinite(self.multipliers)):
            out.append("multipliers must be positive and finite")
        return tuple(out)

    def require_valid(self) -> None:
        if self.issues:
            raise ValueError("invalid agent state: " + "; ".join(self.issues))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AgentState):
            return NotImplemented
        return np.array_equal(self.lambdas, other.lambdas) and np.array_equal(
            self.multipliers, other.multipliers
        )

    def to_dict(self) -> dict:
        return {"lambdas": self.lambdas.tolist(), "multipliers": self.multipliers.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "AgentState":
        return cls(d["lambdas"], d["multipliers"])


@dataclass(frozen=True)
class SignalConfig:
    """Quality level for approximate value signals.

    gamma in [0, 1] is the signal accuracy: a reserve signal lands in
    [gamma * v, v) and a boost signal in [gamma * scale * v, scale * v).
    boost_scale is the multiplicative scale applied to boost signals and is
    ignored for reserves.
    """

    gamma: float
    kind: SignalKind
    boost_scale: Optional[float] = None

    def __post_init__(self) -> None:
        if not (0.0 <= self.gamma <= 1.0):
            raise ValueError("gamma must lie in [0, 1]")
        if self.kind == SignalKind.BOOST:
            if self.boost_scale is None or self.boost_scale <= 0:
                raise ValueError("boost signals need a positive boost_scale")

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "kind": self.kind.value,
            "boost_scale": self.boost_scale,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SignalConfig":
        return cls(d["gamma"], SignalKind(d["kind"]), d.get("boost_scale"))


def dumps(obj: Any, **kwargs: Any) -> str:
    """Serialize any of the value types above to a JSON string."""
    return json.dumps(obj.to_dict(), **kwargs)


def save_json(obj: Any, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(obj.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_json(cls: type, path: str) -> Any:
    with open(path) as fh:
        return cls.from_dict(json.load(fh))
