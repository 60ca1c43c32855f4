"""The capped-digit compact nullset and its basic-interval tree.

The target set (an Erdos-Kakutani style construction) keeps every factorial
digit at most n - 2, one below the maximal digit of its position; this forces
the position-2 digit to zero.  The set is compact, has Lebesgue measure zero,
and still meets a translate of every perfect set, which is what the
construction modules certify at finite depth.

Basic intervals are the closed sets of reals sharing a digit prefix.  Level n
consists of n! nonoverlapping intervals of length 1/n! that tile [0, 1].
Levels 0 and 1 both denote [0, 1] because digit indexing starts at position 2;
collapsing them keeps the tree arithmetic uniform.  Intervals are closed and
share endpoints, so "contains in its interior" tests are strict inequalities
on exact rationals.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from math import factorial

from .errors import DomainError, InfeasiblePositionError
from .fns import EndpointClass, FnsNumber

__all__ = [
    "BasicInterval",
    "children",
    "clearing_digit",
    "digit_cap",
    "in_ek_set",
    "interval_of",
    "measure_bound",
]


@dataclass(frozen=True)
class BasicInterval:
    """The closed interval of reals whose first digits equal ``prefix``.

    A level-n interval (n >= 2) is named by the digit prefix (d_2, ..., d_n)
    and equals [sum(d_j / j!), sum(d_j / j!) + 1/n!].  Levels 0 and 1 carry an
    empty prefix and denote [0, 1].
    """

    level: int
    prefix: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.level < 0:
            raise DomainError(f"level {self.level} is negative")
        expected = max(self.level - 1, 0)
        if len(self.prefix) != expected:
            raise DomainError(
                f"level {self.level} needs a prefix of length {expected}, "
                f"got {len(self.prefix)}"
            )
        for n, d in zip(range(2, self.level + 1), self.prefix):
            if not isinstance(d, int) or not 0 <= d <= n - 1:
                raise DomainError(f"digit {d!r} at position {n} outside 0..{n - 1}")

    @cached_property
    def lower(self) -> Fraction:
        acc = Fraction(0)
        for n in range(self.level, 1, -1):
            acc = (acc + self.prefix[n - 2]) / n
        return acc

    @property
    def length(self) -> Fraction:
        return Fraction(1, factorial(self.level))

    @property
    def upper(self) -> Fraction:
        return self.lower + self.length

    def classify_point(self, x: Fraction | int) -> EndpointClass | None:
        """Role of x relative to this interval; None when x lies outside."""
        value = Fraction(x)
        if value < self.lower or value > self.upper:
            return None
        if value == self.lower:
            return EndpointClass.LOWER_ENDPOINT
        if value == self.upper:
            return EndpointClass.UPPER_ENDPOINT
        return EndpointClass.INTERIOR

    def strictly_contains(self, x: Fraction | int) -> bool:
        return self.classify_point(x) is EndpointClass.INTERIOR

    def extends(self, ancestor: "BasicInterval") -> bool:
        """True when this interval is the same as or nested inside ``ancestor``."""
        if self.level < ancestor.level:
            return False
        return self.prefix[: len(ancestor.prefix)] == ancestor.prefix

    def child(self, digit: int) -> "BasicInterval":
        if self.level == 0:
            if digit != 0:
                raise DomainError("the level-0 interval has a single child")
            return BasicInterval(1, ())
        return BasicInterval(self.level + 1, self.prefix + (digit,))

    def to_json_dict(self) -> dict:
        return {"level": self.level, "prefix": list(self.prefix)}

    @classmethod
    def from_json_dict(cls, data: dict) -> "BasicInterval":
        return cls(int(data["level"]), tuple(data["prefix"]))


def interval_of(x: FnsNumber, level: int) -> BasicInterval:
    """The level-``level`` basic interval whose prefix matches x."""
    if level > x.depth:
        raise DomainError(f"level {level} exceeds depth {x.depth}")
    if level < 0:
        raise DomainError(f"level {level} is negative")
    return BasicInterval(level, x.digits[: max(level - 1, 0)])


def children(interval: BasicInterval) -> tuple[BasicInterval, ...]:
    """The next-level basic intervals inside ``interval``, left to right.

    A level-n interval splits into the n + 1 level-(n + 1) intervals obtained
    by appending each digit 0..n; the level-0 interval has the level-1
    interval as its single (identical) child.
    """
    if interval.level == 0:
        return (BasicInterval(1, ()),)
    return tuple(
        BasicInterval(interval.level + 1, interval.prefix + (d,))
        for d in range(interval.level + 1)
    )


def digit_cap(position: int) -> int:
    """Largest digit the target set allows at a position (n - 2)."""
    if position < 2:
        raise DomainError(f"position {position} outside the digit range")
    return position - 2


def in_ek_set(x: FnsNumber) -> bool:
    """Depth-truncated membership: every digit satisfies d_n <= n - 2.

    Failing at depth N means failing at every greater depth; membership of
    the underlying infinite object is certified position by position by the
    construction modules.
    """
    return all(d <= n - 2 for n, d in x.positions())


def clearing_digit(position: int, digit_values) -> int:
    """Least y in 0..n-2 with v + y notin {n-2, n-1} for every given v.

    Each value v rules out at most the two digits n-2-v and n-1-v, so a safe
    y exists whenever 2 * len(digit_values) < n - 1; the builders guarantee
    that margin.  Raises :class:`InfeasiblePositionError` otherwise, which
    signals an upstream invariant violation, not bad data.
    """
    values = sorted(set(digit_values))
    if not values:
        raise DomainError(f"no digit values supplied for position {position}")
    for v in values:
        if not 0 <= v <= position - 1:
            raise DomainError(f"digit {v} at position {position} outside 0..{position - 1}")
    blocked = (position - 2, position - 1)
    for y in range(position - 1):
        if all(v + y not in blocked for v in values):
            return y
    raise InfeasiblePositionError(position)


def measure_bound(depth: int) -> Fraction:
    """Total length of the level-``depth`` intervals meeting the target set.

    Equals the product of (n - 1)/n over positions 2..depth, which telescopes
    to 1/depth and witnesses that the set is null.
    """
    if depth < 2:
        raise DomainError(f"depth must be at least 2, got {depth}")
    total = Fraction(1)
    for n in range(2, depth + 1):
        total *= Fraction(n - 1, n)
    return total
