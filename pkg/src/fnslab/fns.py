"""Exact arithmetic in the factorial number system.

A number x in [0, 1) is written as sum(d_n / n!) over positions n = 2, 3, ...,
where the digit at position n ranges over 0..n-1 (the base grows with the
position).  Every rational in [0, 1) has a terminating expansion, and the
greedy, truncating expansion is the canonical one used everywhere here.
Numbers whose expansion terminates by depth N are exactly the endpoints of
the level-N basic intervals; they get no second, tail-maximal representation,
they get flagged by :func:`classify_endpoint` instead.

All arithmetic is exact.  Digit operations are plain integer arithmetic and
values are :class:`fractions.Fraction`; no floats appear anywhere.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from math import factorial

from .errors import AdditionOverflowError, DomainError

__all__ = [
    "CarryTrace",
    "EndpointClass",
    "FnsNumber",
    "add",
    "carry_identity_holds",
    "classify_endpoint",
    "from_rational",
    "has_chained_carry",
    "to_rational",
]


@dataclass(frozen=True)
class FnsNumber:
    """A finite canonical digit sequence (d_2, ..., d_N).

    The depth N is implicit in the number of digits: ``digits[i]`` is the
    digit at position i + 2, and 0 <= d_n <= n - 1 holds at every position.
    """

    digits: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.digits:
            raise DomainError("a digit sequence needs at least position 2")
        for n, d in self.positions():
            if not isinstance(d, int) or not 0 <= d <= n - 1:
                raise DomainError(f"digit {d!r} at position {n} outside 0..{n - 1}")

    @property
    def depth(self) -> int:
        return len(self.digits) + 1

    def digit(self, n: int) -> int:
        if not 2 <= n <= self.depth:
            raise DomainError(f"position {n} outside 2..{self.depth}")
        return self.digits[n - 2]

    def positions(self):
        """Iterate (position, digit) pairs from position 2 upward."""
        return zip(range(2, len(self.digits) + 2), self.digits)

    def to_json_dict(self) -> dict:
        return {"depth": self.depth, "digits": list(self.digits)}

    @classmethod
    def from_json_dict(cls, data: dict) -> "FnsNumber":
        digits = tuple(data["digits"])
        number = cls(digits)
        if number.depth != data["depth"]:
            raise DomainError(
                f"declared depth {data['depth']} does not match {len(digits)} digits"
            )
        return number


@dataclass(frozen=True)
class CarryTrace:
    """Carry bits and result digits of one addition.

    ``carries[i]`` is the carry out of position i + 2, so the tuple runs over
    positions 2..N+1.  The final entry is the carry entering from beyond the
    truncation depth and is 0 by convention: both summands are canonical at
    the same depth, so the true infinite-tail carry vanishes.
    """

    depth: int
    carries: tuple[int, ...]
    result_digits: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.carries) != self.depth:
            raise DomainError("carry trace must cover positions 2..N+1")
        if self.carries[-1] != 0:
            raise DomainError("no carry may enter beyond the truncation depth")

    def carry(self, n: int) -> int:
        """Carry bit out of position n, for n in 2..N+1."""
        if not 2 <= n <= self.depth + 1:
            raise DomainError(f"carry position {n} outside 2..{self.depth + 1}")
        return self.carries[n - 2]

    def to_json_list(self) -> list[int]:
        return list(self.carries)


def to_rational(x: FnsNumber) -> Fraction:
    """Exact value sum(d_n / n!) of a digit sequence."""
    acc = Fraction(0)
    for n in range(x.depth, 1, -1):
        acc = (acc + x.digits[n - 2]) / n
    return acc


def from_rational(x: Fraction | int, depth: int) -> FnsNumber:
    """Greedy expansion of a rational in [0, 1) to the given depth.

    The result satisfies value(result) <= x < value(result) + 1/depth!; when
    the expansion of x terminates by ``depth`` the residual is zero and the
    expansion is exact.
    """
    if depth < 2:
        raise DomainError(f"depth must be at least 2, got {depth}")
    value = Fraction(x)
    if not 0 <= value < 1:
        raise DomainError(f"{value} outside [0, 1)")
    digits = []
    remainder = value
    for n in range(2, depth + 1):
        remainder *= n
        d = int(remainder)  # floor: remainder is nonnegative
        digits.append(d)
        remainder -= d
    return FnsNumber(tuple(digits))


def add(q: FnsNumber, y: FnsNumber) -> tuple[FnsNumber, CarryTrace]:
    """Add two canonical digit sequences of equal depth.

    Carries propagate right to left.  No carry enters beyond the truncation
    depth, and position n emits a carry exactly when q_n + y_n plus the
    incoming carry reaches n.  The result is the canonical expansion of
    value(q) + value(y) together with its full carry trace.

    Raises :class:`AdditionOverflowError` when the sum reaches 1, i.e. a
    carry would leave position 2.
    """
    if q.depth != y.depth:
        raise DomainError(f"depth mismatch: {q.depth} vs {y.depth}")
    n_top = q.depth
    carries = [0] * n_top  # positions 2..N+1, last entry stays 0
    out = [0] * (n_top - 1)
    carry = 0
    for n in range(n_top, 1, -1):
        s = q.digits[n - 2] + y.digits[n - 2] + carry
        carry = 1 if s >= n else 0
        out[n - 2] = s - n * carry
        carries[n - 2] = carry
    if carry:
        raise AdditionOverflowError(
            "sum reached 1: carry out of position 2 has nowhere to go"
        )
    result = FnsNumber(tuple(out))
    return result, CarryTrace(n_top, tuple(carries), result.digits)


def carry_identity_holds(q: FnsNumber, y: FnsNumber, trace: CarryTrace) -> bool:
    """Check result_n == q_n + y_n - n*carry_n + carry_{n+1} at every position."""
    if q.depth != y.depth or trace.depth != q.depth:
        return False
    for n in range(2, q.depth + 1):
        expected = q.digit(n) + y.digit(n) - n * trace.carry(n) + trace.carry(n + 1)
        if trace.result_digits[n - 2] != expected:
            return False
    return True


def has_chained_carry(q: FnsNumber, y: FnsNumber, trace: CarryTrace) -> bool:
    """True when some carry bit depends on the incoming carry.

    Unchained means carry_n == (q_n + y_n >= n) at every position; a
    translation built from a valid certificate always produces unchained
    carries, so the verifier asserts the negation of this predicate.
    """
    for n in range(2, q.depth + 1):
        if trace.carry(n) != (1 if q.digit(n) + y.digit(n) >= n else 0):
            return True
    return False


class EndpointClass(enum.Enum):
    """Role of a point relative to level-N basic-interval endpoints."""

    INTERIOR = "interior"
    LOWER_ENDPOINT = "lower-endpoint"
    UPPER_ENDPOINT = "upper-endpoint"


def classify_endpoint(x: FnsNumber | Fraction | int, depth: int) -> EndpointClass:
    """Classify x in [0, 1) against the level-``depth`` interval endpoints.

    The endpoints at level N are the multiples of 1/N!.  A terminating x is
    the left endpoint of the interval starting at x and simultaneously the
    right endpoint of the adjacent interval ending there; the canonical
    (greedy) reading is the lower role, which is what this function reports.
    Interval-relative roles, including the upper one, come from
    :meth:`fnslab.ekset.BasicInterval.classify_point`.
    """
    if depth < 2:
        raise DomainError(f"depth must be at least 2, got {depth}")
    value = to_rational(x) if isinstance(x, FnsNumber) else Fraction(x)
    if not 0 <= value < 1:
        raise DomainError(f"{value} outside [0, 1)")
    if (value * factorial(depth)).denominator == 1:
        return EndpointClass.LOWER_ENDPOINT
    return EndpointClass.INTERIOR
