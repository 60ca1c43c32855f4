"""Perfect-set oracles feeding the embedding engine.

An oracle stands for a perfect set P and answers two queries: ``anchor()``
returns some point of P, and ``two_points(I, depth)`` returns two distinct
points of P strictly inside a basic interval known to meet P.  Returned
points must not be basic-interval endpoints at any level up to the requested
depth, which for an exact rational x means x * depth! is not an integer.
The builder re-checks that contract on every returned pair and retries with
an increasing ``attempt`` before giving up, so oracles only need to vary
their choice deterministically with ``attempt``.

All catalog oracles produce exact rational points whose expansions terminate
strictly beyond the requested depth; that single property makes them interior
at every level the caller may inspect.
"""

from __future__ import annotations

import json
from abc import ABC, abstractmethod
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import factorial
from pathlib import Path

from .ekset import BasicInterval
from .errors import DomainError, OracleError, ParseError
from .fns import FnsNumber, from_rational

__all__ = [
    "CantorOracle",
    "DigitRestrictionOracle",
    "FiniteTreeOracle",
    "PerfectSetOracle",
    "PointHandle",
    "TranslatedOracle",
    "catalog",
    "resolve_oracle",
]

_FRONTIER_LIMIT = 20_000


@dataclass(frozen=True)
class PointHandle:
    """An exact point of an oracle's set; yields canonical digits on demand."""

    value: Fraction

    def digits(self, depth: int) -> FnsNumber:
        return from_rational(self.value, depth)

    def shifted(self, offset: Fraction) -> "PointHandle":
        return PointHandle(self.value + offset)


class PerfectSetOracle(ABC):
    """Abstract capability standing for a perfect set."""

    name: str = "oracle"

    @abstractmethod
    def anchor(self) -> PointHandle:
        """Some point of the set."""

    @abstractmethod
    def two_points_between(
        self, lo: Fraction, hi: Fraction, depth: int, attempt: int = 0
    ) -> tuple[PointHandle, PointHandle]:
        """Two distinct points strictly inside the open interval (lo, hi).

        The open-interval form exists so that translated oracles can forward
        queries; ``two_points`` is the basic-interval surface built on it.
        """

    def two_points(
        self, interval: BasicInterval, depth: int, attempt: int = 0
    ) -> tuple[PointHandle, PointHandle]:
        """Two distinct points of the set in the interior of ``interval``."""
        return self.two_points_between(interval.lower, interval.upper, depth, attempt)


def _not_endpoint_up_to(value: Fraction, depth: int) -> bool:
    # x is interior at every level <= depth iff its denominator divides no j!
    # with j <= depth, which reduces to a single divisibility check.
    return factorial(depth) % value.denominator != 0


class DigitRestrictionOracle(PerfectSetOracle):
    """All x whose factorial digits lie in prescribed per-position sets.

    ``allowed(n)`` must contain 0 at every position (so admissible prefixes
    extend to terminating rational members) and at least two digits at
    infinitely many positions (so the set is perfect).  Both are contracts of
    the rule, checked as far as they are exercised.
    """

    def __init__(self, allowed, name: str = "digit-restriction"):
        self._allowed = allowed
        self.name = name

    def _digits_at(self, n: int) -> tuple[int, ...]:
        digits = tuple(sorted(set(self._allowed(n))))
        if not digits or digits[0] != 0:
            raise OracleError(f"{self.name}: rule must allow digit 0 at position {n}")
        if digits[-1] > n - 1:
            raise OracleError(f"{self.name}: rule exceeds digit range at position {n}")
        return digits

    def _next_branching(self, start: int) -> int:
        for n in range(max(start, 2), max(start, 2) + 512):
            if len(self._digits_at(n)) >= 2:
                return n
        raise OracleError(f"{self.name}: no branching position found from {start}")

    def anchor(self) -> PointHandle:
        b = self._next_branching(2)
        digit = next(d for d in self._digits_at(b) if d != 0)
        return PointHandle(Fraction(digit, factorial(b)))

    def _fit_prefix(self, lo: Fraction, hi: Fraction) -> tuple[tuple[int, ...], Fraction]:
        """First admissible prefix whose interval sits strictly inside (lo, hi)."""
        level_cap = 2
        while Fraction(1, factorial(level_cap)) >= hi - lo:
            level_cap += 1
        level_cap += 56
        frontier = [((), Fraction(0))]
        for level in range(2, level_cap + 1):
            unit = Fraction(1, factorial(level))
            nxt = []
            for prefix, plower in frontier:
                for d in self._digits_at(level):
                    lower = plower + d * unit
                    upper = lower + unit
                    if lower >= hi or upper <= lo:
                        continue
                    if lo < lower and upper < hi:
                        return prefix + (d,), lower
                    nxt.append((prefix + (d,), lower))
            if not nxt:
                raise OracleError(f"{self.name}: window ({lo}, {hi}) misses the set")
            if len(nxt) > _FRONTIER_LIMIT:
                raise OracleError(f"{self.name}: window search exploded at level {level}")
            frontier = nxt
        raise OracleError(f"{self.name}: no admissible interval inside ({lo}, {hi})")

    def two_points_between(self, lo, hi, depth, attempt=0):
        prefix, plower = self._fit_prefix(lo, hi)
        level = len(prefix) + 1
        branch = self._next_branching(level + 1)
        terminal = self._next_branching(max(depth + attempt, branch) + 1)
        u_branch = next(d for d in self._digits_at(branch) if d != 0)
        u_terminal = next(d for d in self._digits_at(terminal) if d != 0)
        tail = Fraction(u_terminal, factorial(terminal))
        first = PointHandle(plower + tail)
        second = PointHandle(plower + Fraction(u_branch, factorial(branch)) + tail)
        return first, second


class CantorOracle(PerfectSetOracle):
    """The middle-thirds Cantor set scaled affinely onto [lo, hi].

    Points are taken from the ternary construction pieces; descending extra
    levels along right children pushes the 3-adic denominator valuation past
    that of depth!, which keeps the returned rationals off every basic
    interval endpoint the caller may inspect.
    """

    def __init__(self, lo: Fraction = Fraction(0), hi: Fraction = Fraction(1)):
        if not lo < hi:
            raise DomainError(f"empty carrier [{lo}, {hi}]")
        self.lo = Fraction(lo)
        self.hi = Fraction(hi)
        self.scale = self.hi - self.lo
        self.name = "cantor-scaled"

    def anchor(self) -> PointHandle:
        return PointHandle(self.lo)

    def _to_unit(self, x: Fraction) -> Fraction:
        return (x - self.lo) / self.scale

    def _from_unit(self, x: Fraction) -> Fraction:
        return self.lo + self.scale * x

    def _fit_piece(self, alpha: Fraction, beta: Fraction) -> tuple[int, int]:
        """First construction piece [t/3^m, (t+1)/3^m] strictly inside (alpha, beta)."""
        level_cap = 1
        while Fraction(1, 3**level_cap) >= beta - alpha:
            level_cap += 1
        level_cap += 88
        frontier = [(0, 0)]
        for m in range(1, level_cap + 1):
            base = Fraction(1, 3**m)
            nxt = []
            for _, t in frontier:
                for t_child in (3 * t, 3 * t + 2):
                    lower = t_child * base
                    upper = lower + base
                    if lower >= beta or upper <= alpha:
                        continue
                    if alpha < lower and upper < beta:
                        return m, t_child
                    nxt.append((m, t_child))
            if not nxt:
                raise OracleError(f"{self.name}: window ({alpha}, {beta}) misses the set")
            if len(nxt) > _FRONTIER_LIMIT:
                raise OracleError(f"{self.name}: window search exploded at level {m}")
            frontier = nxt
        raise OracleError(f"{self.name}: no piece inside ({alpha}, {beta})")

    def _point_from_piece(self, m: int, t: int, depth: int, attempt: int) -> PointHandle:
        fact = factorial(depth)
        # Legendre: 3-adic valuation of depth!.
        v3 = 0
        power = 3
        while power <= depth:
            v3 += depth // power
            power *= 3
        j = v3 + 1 + attempt
        for _ in range(64):
            t_deep = t * 3**j + (3**j - 1)  # j right-children steps; t_deep = 2 mod 3
            value = self._from_unit(Fraction(t_deep, 3 ** (m + j)))
            if fact % value.denominator != 0:
                return PointHandle(value)
            j += 1
        raise OracleError(f"{self.name}: could not steer clear of endpoints")

    def two_points_between(self, lo, hi, depth, attempt=0):
        alpha, beta = self._to_unit(lo), self._to_unit(hi)
        m, t = self._fit_piece(alpha, beta)
        first = self._point_from_piece(m + 1, 3 * t, depth, attempt)
        second = self._point_from_piece(m + 1, 3 * t + 2, depth, attempt)
        return first, second


class FiniteTreeOracle(PerfectSetOracle):
    """A perfect-set stand-in backed by an explicit finite refinable tree.

    The tree lists basic-interval prefixes with one point witness each.  The
    oracle can only hand out stored witnesses, so it serves queries up to the
    depth the file resolves and fails honestly beyond that.  Witness quality
    is *not* filtered here; the builder's contract check decides, which is
    what lets deliberately bad files exercise the rejection path.
    """

    def __init__(self, root_witness: Fraction, nodes, name: str = "finite-tree"):
        self._root_witness = Fraction(root_witness)
        self._witnesses = tuple(sorted({Fraction(w) for _, w in nodes}))
        self.name = name

    def anchor(self) -> PointHandle:
        return PointHandle(self._root_witness)

    def two_points_between(self, lo, hi, depth, attempt=0):
        inside = [w for w in self._witnesses if lo < w < hi]
        pairs = list(combinations(inside, 2))
        if attempt >= len(pairs):
            raise OracleError(
                f"{self.name}: stored witnesses exhausted for ({lo}, {hi})"
            )
        a, b = pairs[attempt]
        return PointHandle(a), PointHandle(b)

    @classmethod
    def from_json_dict(cls, data: dict, name: str = "finite-tree") -> "FiniteTreeOracle":
        nodes: list[tuple[BasicInterval, Fraction]] = []

        def walk(node: dict, parent: BasicInterval | None) -> None:
            try:
                prefix = tuple(node["prefix"])
                interval = BasicInterval(len(prefix) + 1 if prefix else 1, prefix)
                witness = Fraction(node["witness"])
            except (KeyError, TypeError, ValueError, ZeroDivisionError, DomainError) as exc:
                raise ParseError(f"bad oracle tree node: {exc}") from exc
            if parent is not None and not interval.extends(parent):
                raise ParseError(
                    f"node {prefix} does not refine its parent {parent.prefix}"
                )
            if not interval.lower <= witness <= interval.upper:
                raise ParseError(f"witness {witness} outside its interval {prefix}")
            nodes.append((interval, witness))
            for child in node.get("children", ()):
                walk(child, interval)

        if "root" not in data:
            raise ParseError("oracle tree file needs a 'root' node")
        walk(data["root"], None)
        return cls(nodes[0][1], nodes, name=name)

    @classmethod
    def from_file(cls, path: str | Path) -> "FiniteTreeOracle":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ParseError(f"cannot read oracle file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ParseError(f"oracle file {path} is not valid JSON: {exc}") from exc
        return cls.from_json_dict(data, name=f"file:{path.name}")


class TranslatedOracle(PerfectSetOracle):
    """The set of a base oracle shifted by an exact rational offset."""

    def __init__(self, base: PerfectSetOracle, offset: Fraction):
        self.base = base
        self.offset = Fraction(offset)
        self.name = f"{base.name}+({self.offset})"

    def anchor(self) -> PointHandle:
        return self.base.anchor().shifted(self.offset)

    def two_points_between(self, lo, hi, depth, attempt=0):
        a, b = self.base.two_points_between(
            lo - self.offset, hi - self.offset, depth, attempt
        )
        return a.shifted(self.offset), b.shifted(self.offset)


def _even_digits(n: int) -> tuple[int, ...]:
    return tuple(range(0, n, 2))


def _binary_digits(n: int) -> tuple[int, ...]:
    return (0, 1)


def _top_digits(n: int) -> tuple[int, ...]:
    return (0,) if n == 2 else (0, n - 2)


def catalog() -> dict[str, PerfectSetOracle]:
    """Built-in oracles, keyed by their command-line names."""
    return {
        "cantor-scaled": CantorOracle(),
        "digits-binary": DigitRestrictionOracle(_binary_digits, "digits-binary"),
        "digits-even": DigitRestrictionOracle(_even_digits, "digits-even"),
        "digits-top": DigitRestrictionOracle(_top_digits, "digits-top"),
    }


def resolve_oracle(spec: str) -> PerfectSetOracle:
    """Turn a catalog name or ``file:PATH`` spec into an oracle."""
    if spec.startswith("file:"):
        return FiniteTreeOracle.from_file(spec[len("file:") :])
    oracles = catalog()
    if spec not in oracles:
        known = ", ".join(sorted(oracles))
        raise DomainError(f"unknown oracle {spec!r}; known: {known}, or file:PATH")
    return oracles[spec]
