"""Embedding a translated perfect-set fragment into the capped-digit set.

The engine runs in four stages, each independently checkable:

1. ``normalize_input`` translates the oracle so its anchor lands at 1/240,
   strictly inside the first level-5 interval (0, 1/120).
2. ``build_tree`` grows a dyadic system of basic-interval families
   I_{l_0}, I_{l_1}, ...: every member holds a point of the set in its
   interior, every member has exactly two successors one level-family down,
   and the levels grow fast (l_k >= 2^(k+2) + 1, with l_0 = 5 and
   l_{k+1} = max(separation level, 2^(k+3) + 1)).
3. ``select_translation`` picks digits y_n, zero through position 5, and at
   every later position the least digit that steers each realized branch
   digit v clear of {n-2, n-1}.  The level growth keeps at most 2^(k+2)
   digits blocked out of n-1 choices, so the pick always exists.
4. ``verify_certificate`` re-derives everything: the tree conditions, the
   per-position symbolic safety (v + y_n notin {n-2, n-1}), and exact sample
   additions whose every digit must stay at or below its cap.  The symbolic
   check makes the carry at each position independent of the incoming carry,
   which the numeric check asserts explicitly.

Adding y then keeps every branch point of the tree inside the target set, so
the translate by -(shift + y) of the target set covers the embedded fragment
of the original input.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial

from . import fns
from .ekset import BasicInterval, clearing_digit, in_ek_set, interval_of
from .errors import (
    DomainError,
    OracleContractError,
    ParseError,
    SeparationLimitError,
    VerificationError,
)
from .fns import EndpointClass, FnsNumber, classify_endpoint
from .oracles import PerfectSetOracle, PointHandle, TranslatedOracle

__all__ = [
    "ANCHOR_TARGET",
    "EmbedResult",
    "IntervalTree",
    "PositionProof",
    "SampleCheck",
    "TranslationCertificate",
    "VerificationReport",
    "audit_tree",
    "build_tree",
    "digit_support",
    "embed",
    "normalize_input",
    "select_translation",
    "verify_certificate",
]

ANCHOR_TARGET = Fraction(1, 240)
BASE_LEVEL = 5


@dataclass(frozen=True)
class IntervalTree:
    """The dyadic system of basic-interval families built by the recursion.

    ``families[k]`` holds the 2^k level-``levels[k]`` intervals sorted left to
    right, ``witnesses[k]`` the matching interior points of the (translated)
    input set, and ``successors[k][i]`` the two indices in ``families[k+1]``
    refining member i of ``families[k]``.
    """

    levels: tuple[int, ...]
    families: tuple[tuple[BasicInterval, ...], ...]
    witnesses: tuple[tuple[Fraction, ...], ...]
    successors: tuple[tuple[tuple[int, int], ...], ...]

    @property
    def height(self) -> int:
        return len(self.levels) - 1

    @property
    def depth(self) -> int:
        return self.levels[-1]

    @property
    def leaves(self) -> tuple[BasicInterval, ...]:
        return self.families[-1]

    def leaf_numbers(self) -> tuple[FnsNumber, ...]:
        """Each leaf prefix as a depth-``depth`` digit sequence."""
        return tuple(FnsNumber(leaf.prefix) for leaf in self.leaves)


@dataclass(frozen=True)
class PositionProof:
    """Safety record for one position: v + y notin {n-2, n-1} for all v."""

    position: int
    y: int
    support: tuple[int, ...]
    forbidden: tuple[int, ...]

    def to_json_dict(self) -> dict:
        return {
            "n": self.position,
            "y": self.y,
            "support": list(self.support),
            "forbidden": list(self.forbidden),
        }


@dataclass(frozen=True)
class SampleCheck:
    """One exact addition q + y recorded digit by digit."""

    q: tuple[int, ...]
    sum: tuple[int, ...]
    carries: tuple[int, ...]

    def to_json_dict(self) -> dict:
        return {"q": list(self.q), "sum": list(self.sum), "carries": list(self.carries)}


@dataclass(frozen=True)
class TranslationCertificate:
    """Finite, independently checkable evidence that (input + shift) + y
    lands inside the capped-digit set, position by position, to ``depth``.

    ``supports[n - 2]`` is the set of digits the certified object can realize
    at position n (after the shift); the tree flavour also records the level
    sequence, the slalom flavour the original allowed sets and the width
    policy values it was checked against.
    """

    kind: str
    depth: int
    shift: Fraction
    y: tuple[int, ...]
    supports: tuple[tuple[int, ...], ...]
    proofs: tuple[PositionProof, ...]
    samples: tuple[SampleCheck, ...]
    levels: tuple[int, ...] | None = None
    slalom_allowed: tuple[tuple[int, ...], ...] | None = None
    f_values: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if len(self.y) != self.depth - 1:
            raise DomainError("y must carry one digit per position 2..depth")
        if len(self.supports) != self.depth - 1:
            raise DomainError("supports must cover positions 2..depth")

    def y_number(self) -> FnsNumber:
        return FnsNumber(self.y)

    def support(self, n: int) -> tuple[int, ...]:
        return self.supports[n - 2]

    def translate(self) -> Fraction:
        """The translate x = -(shift + y): target-set + x covers the input."""
        return -(self.shift + fns.to_rational(self.y_number()))

    def to_json_dict(self) -> dict:
        data = {
            "kind": self.kind,
            "depth": self.depth,
            "shift": f"{self.shift.numerator}/{self.shift.denominator}",
            "y": list(self.y),
            "supports": {str(n): list(self.supports[n - 2]) for n in range(2, self.depth + 1)},
            "proofs": [p.to_json_dict() for p in self.proofs],
            "samples": [s.to_json_dict() for s in self.samples],
        }
        if self.levels is not None:
            data["levels"] = list(self.levels)
        if self.slalom_allowed is not None:
            data["slalom"] = {
                "allowed": {
                    str(n): list(self.slalom_allowed[n - 2])
                    for n in range(2, self.depth + 1)
                }
            }
        if self.f_values is not None:
            data["f"] = list(self.f_values)
        return data

    @classmethod
    def from_json_dict(cls, data: dict) -> "TranslationCertificate":
        try:
            kind = data["kind"]
            depth = int(data["depth"])
            shift = Fraction(data["shift"])
            y = tuple(int(d) for d in data["y"])
            supports = tuple(
                tuple(int(v) for v in data["supports"][str(n)])
                for n in range(2, depth + 1)
            )
            proofs = tuple(
                PositionProof(
                    int(p["n"]),
                    int(p["y"]),
                    tuple(int(v) for v in p["support"]),
                    tuple(int(v) for v in p["forbidden"]),
                )
                for p in data["proofs"]
            )
            samples = tuple(
                SampleCheck(
                    tuple(int(d) for d in s["q"]),
                    tuple(int(d) for d in s["sum"]),
                    tuple(int(c) for c in s["carries"]),
                )
                for s in data["samples"]
            )
            levels = tuple(int(l) for l in data["levels"]) if "levels" in data else None
            allowed = None
            if "slalom" in data:
                allowed = tuple(
                    tuple(int(v) for v in data["slalom"]["allowed"][str(n)])
                    for n in range(2, depth + 1)
                )
            f_values = tuple(int(v) for v in data["f"]) if "f" in data else None
        except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
            raise ParseError(f"malformed certificate: {exc}") from exc
        try:
            return cls(
                kind=kind,
                depth=depth,
                shift=shift,
                y=y,
                supports=supports,
                proofs=proofs,
                samples=samples,
                levels=levels,
                slalom_allowed=allowed,
                f_values=f_values,
            )
        except DomainError as exc:
            raise ParseError(f"inconsistent certificate: {exc}") from exc


@dataclass(frozen=True)
class VerificationReport:
    """Every fact a verification pass established, in check order."""

    ok: bool
    facts: tuple[str, ...]

    def count(self, stage: str) -> int:
        return sum(1 for f in self.facts if f.startswith(stage + ":"))


def normalize_input(oracle: PerfectSetOracle) -> tuple[PerfectSetOracle, Fraction]:
    """Translate the oracle so its anchor sits at 1/240.

    The translated anchor then lies in (0, 1/120), interior at every level up
    to 5, so the recursion can start at the first level-5 interval.  Returns
    the translated oracle and the shift applied; the final answer translates
    back through that shift.
    """
    anchor = oracle.anchor()
    shift = ANCHOR_TARGET - anchor.value
    translated = oracle if shift == 0 else TranslatedOracle(oracle, shift)
    if classify_endpoint(translated.anchor().value, BASE_LEVEL) is not EndpointClass.INTERIOR:
        raise OracleContractError("normalized anchor is not interior at level 5")
    return translated, shift


def _contract_issue(
    a: PointHandle, b: PointHandle, interval: BasicInterval, depth: int
) -> str | None:
    if a.value == b.value:
        return f"points coincide at {a.value}"
    for p in (a, b):
        if not interval.strictly_contains(p.value):
            return f"point {p.value} not strictly inside {interval.prefix}"
        if factorial(depth) % p.value.denominator == 0:
            return f"point {p.value} is a basic-interval endpoint by level {depth}"
    return None


def build_tree(
    oracle: PerfectSetOracle,
    height: int,
    *,
    max_separation_depth: int = 64,
    max_point_retries: int = 8,
) -> IntervalTree:
    """Run the level recursion against a normalized oracle.

    The anchor fixes the single level-5 starting interval.  Each step asks
    the oracle for two fresh interior points per current member, finds the
    minimal level separating all of them, and records their intervals at
    l_{k+1} = max(separation level, 2^(k+3) + 1).  Every returned point is
    validated against the oracle contract, with bounded retries.
    """
    if height < 0:
        raise DomainError(f"height must be nonnegative, got {height}")
    anchor = oracle.anchor()
    if not 0 < anchor.value < Fraction(1, 120):
        raise DomainError(
            f"oracle is not normalized: anchor {anchor.value} outside (0, 1/120)"
        )
    if classify_endpoint(anchor.value, BASE_LEVEL) is not EndpointClass.INTERIOR:
        raise DomainError("oracle is not normalized: anchor not interior at level 5")

    levels = [BASE_LEVEL]
    families = [(interval_of(anchor.digits(BASE_LEVEL), BASE_LEVEL),)]
    witnesses = [(anchor.value,)]
    successors: list[tuple[tuple[int, int], ...]] = []

    for k in range(height):
        depth_request = max(max_separation_depth, 2 ** (k + 3) + 1)
        points: list[PointHandle] = []
        parent_of: list[int] = []
        for index, interval in enumerate(families[k]):
            issue = "no attempt made"
            for attempt in range(max_point_retries):
                pair = oracle.two_points(interval, depth_request, attempt)
                issue = _contract_issue(*pair, interval, depth_request)
                if issue is None:
                    points.extend(pair)
                    parent_of.extend((index, index))
                    break
            else:
                raise OracleContractError(
                    f"{oracle.name}: two_points on {interval.prefix} kept violating "
                    f"the contract ({issue})"
                )

        expansions = [p.digits(depth_request).digits for p in points]
        separation = levels[k] + 1
        while len({e[: separation - 1] for e in expansions}) < len(points):
            separation += 1
            if separation > max_separation_depth:
                raise SeparationLimitError(
                    f"points not separated by level {max_separation_depth}"
                )
        next_level = max(separation, 2 ** (k + 3) + 1)

        members = [
            BasicInterval(next_level, expansions[i][: next_level - 1])
            for i in range(len(points))
        ]
        order = sorted(range(len(points)), key=lambda i: members[i].lower)
        family = tuple(members[i] for i in order)
        family_witnesses = tuple(points[i].value for i in order)
        pairs: dict[int, list[int]] = {}
        for slot, i in enumerate(order):
            pairs.setdefault(parent_of[i], []).append(slot)
        successor_row = tuple(
            tuple(pairs[parent]) for parent in range(len(families[k]))
        )
        for parent, (one, two) in enumerate(successor_row):
            if not (
                family[one].extends(families[k][parent])
                and family[two].extends(families[k][parent])
            ):
                raise OracleContractError(
                    f"{oracle.name}: returned points escaped their interval"
                )

        levels.append(next_level)
        families.append(family)
        witnesses.append(family_witnesses)
        successors.append(successor_row)

    return IntervalTree(
        levels=tuple(levels),
        families=tuple(families),
        witnesses=tuple(witnesses),
        successors=tuple(successors),
    )


def digit_support(tree: IntervalTree, n: int) -> set[int]:
    """The set of position-n digits realized by the tree's leaf prefixes.

    For l_k < n <= l_{k+1} this is determined by the level-n ancestors of the
    family members, so its size is at most 2^(k+1); below the base level the
    anchor interval forces digit zero.
    """
    if not 2 <= n <= tree.depth:
        raise DomainError(f"position {n} outside 2..{tree.depth}")
    return {leaf.prefix[n - 2] for leaf in tree.leaves}


def _position_proof(n: int, support: tuple[int, ...]) -> PositionProof:
    forbidden = sorted(
        d
        for d in ({n - 2 - v for v in support} | {n - 1 - v for v in support})
        if 0 <= d <= n - 2
    )
    return PositionProof(n, clearing_digit(n, support), support, tuple(forbidden))


def select_translation(
    tree: IntervalTree, shift: Fraction = Fraction(0)
) -> TranslationCertificate:
    """Pick the translation digits for a built tree and record the evidence.

    Digits through position 5 are zero; at every later position the least
    digit avoiding {n-2-v, n-1-v} over the realized branch digits v is taken,
    which both makes the choice deterministic and keeps certificates small.
    ``shift`` is the pre-translation recorded for mapping the answer back to
    the oracle's original coordinates.
    """
    depth = tree.depth
    supports = tuple(
        tuple(sorted(digit_support(tree, n))) for n in range(2, depth + 1)
    )
    y = [0] * (depth - 1)
    proofs = []
    for n in range(6, depth + 1):
        proof = _position_proof(n, supports[n - 2])
        proofs.append(proof)
        y[n - 2] = proof.y
    y_number = FnsNumber(tuple(y))
    samples = []
    for q in tree.leaf_numbers():
        total, trace = fns.add(q, y_number)
        samples.append(SampleCheck(q.digits, total.digits, trace.carries))
    return TranslationCertificate(
        kind="tree-embedding",
        depth=depth,
        shift=Fraction(shift),
        y=tuple(y),
        supports=supports,
        proofs=tuple(proofs),
        samples=tuple(samples),
        levels=tree.levels,
    )


def audit_tree(tree: IntervalTree) -> list[str]:
    """Check the three tree conditions verbatim, plus structural sanity.

    Returns the list of established facts; raises
    :class:`VerificationError` (stage ``structure``) on the first violation.
    """

    def fail(message: str) -> None:
        raise VerificationError(message, stage="structure")

    facts = []
    if tree.levels[0] != BASE_LEVEL:
        fail(f"l_0 is {tree.levels[0]}, not {BASE_LEVEL}")
    for k, level in enumerate(tree.levels):
        if level < 2 ** (k + 2) + 1:
            fail(f"level l_{k} = {level} below the bound {2 ** (k + 2) + 1}")
        if k and level <= tree.levels[k - 1]:
            fail(f"levels not increasing at k = {k}")
    facts.append(f"structure: levels {tree.levels} satisfy l_k >= 2^(k+2)+1")

    if not (len(tree.families) == len(tree.levels) == len(tree.witnesses)):
        fail("family, level and witness counts disagree")
    if len(tree.successors) != len(tree.levels) - 1:
        fail("successor map does not cover every step")

    for k, family in enumerate(tree.families):
        if len(family) != 2**k:
            fail(f"family {k} has {len(family)} members, expected {2 ** k}")
        for member in family:
            if member.level != tree.levels[k]:
                fail(f"member of family {k} at wrong level {member.level}")
        if list(family) != sorted(family, key=lambda m: m.lower):
            fail(f"family {k} is not sorted")
        for member, witness in zip(family, tree.witnesses[k]):
            if not member.strictly_contains(witness):
                fail(
                    f"witness {witness} not interior to its interval "
                    f"{member.prefix} in family {k}"
                )
        facts.append(
            f"structure: family {k} has 2^{k} members, each holding its witness"
        )

    for k, row in enumerate(tree.successors):
        if len(row) != len(tree.families[k]):
            fail(f"successor row {k} has wrong length")
        seen: set[int] = set()
        for parent_index, pair in enumerate(row):
            if len(pair) != 2 or len(set(pair)) != 2:
                fail(f"member {parent_index} of family {k} lacks two successors")
            for child_index in pair:
                child = tree.families[k + 1][child_index]
                if not child.extends(tree.families[k][parent_index]):
                    fail(
                        f"successor {child.prefix} not inside its parent "
                        f"{tree.families[k][parent_index].prefix}"
                    )
                seen.add(child_index)
        if len(seen) != len(tree.families[k + 1]):
            fail(f"family {k + 1} has members without a parent")
        facts.append(f"structure: every member of family {k} has exactly two successors")
    return facts


def _selected_indices(count: int, wanted: int | None) -> list[int]:
    if wanted is None or wanted >= count:
        return list(range(count))
    wanted = max(wanted, 2) if count >= 2 else 1
    if wanted == 1:
        return [0]
    step = (count - 1) / (wanted - 1)
    return sorted({round(i * step) for i in range(wanted)})


def verify_certificate(
    tree: IntervalTree,
    certificate: TranslationCertificate,
    samples: int | None = None,
) -> VerificationReport:
    """Re-derive a certificate from its tree and check it twice over.

    The symbolic pass recomputes every digit support and confirms that
    v + y_n avoids {n-2, n-1} at every position; the numeric pass re-adds
    ``samples`` leaf points exactly (always including the leftmost and the
    rightmost branch), confirming membership digit by digit, the per-position
    carry identity, agreement with the recorded sample data, and that no
    carry chains into another.

    Raises :class:`VerificationError` on the first failure, naming the stage
    and position; returns the full report otherwise.
    """
    facts = audit_tree(tree)

    if certificate.kind != "tree-embedding":
        raise VerificationError(
            f"certificate kind {certificate.kind!r} does not match a tree",
            stage="structure",
        )
    if certificate.depth != tree.depth:
        raise VerificationError(
            f"certificate depth {certificate.depth} != tree depth {tree.depth}",
            stage="structure",
        )
    if certificate.levels != tree.levels:
        raise VerificationError("certificate levels do not match the tree", stage="structure")
    facts.append("structure: certificate matches the tree's depth and levels")

    for n in range(2, tree.depth + 1):
        derived = tuple(sorted(digit_support(tree, n)))
        recorded = certificate.support(n)
        if recorded != derived:
            raise VerificationError(
                f"support at position {n} is {recorded}, tree realizes {derived}",
                stage="symbolic",
                position=n,
            )
        y_n = certificate.y[n - 2]
        if n <= 5:
            if derived != (0,):
                raise VerificationError(
                    f"position {n} realizes digits {derived}, expected only 0",
                    stage="symbolic",
                    position=n,
                )
            if y_n != 0:
                raise VerificationError(
                    f"y_{n} = {y_n} must be 0 through position 5",
                    stage="symbolic",
                    position=n,
                )
        else:
            if not 0 <= y_n <= n - 2:
                raise VerificationError(
                    f"y_{n} = {y_n} outside 0..{n - 2}", stage="symbolic", position=n
                )
            for v in derived:
                if v + y_n in (n - 2, n - 1):
                    raise VerificationError(
                        f"y_{n} = {y_n} hits the blocked digits for branch digit {v}",
                        stage="symbolic",
                        position=n,
                    )
        facts.append(f"symbolic: position {n} support {derived} cleared by y = {y_n}")

    leaf_digit_set = {leaf.prefix for leaf in tree.leaves}
    recorded_samples = {s.q: s for s in certificate.samples}
    for q_digits in recorded_samples:
        if q_digits not in leaf_digit_set:
            raise VerificationError(
                "certificate records a sample that is not a leaf of the tree",
                stage="numeric",
            )
    for extreme in (tree.leaves[0].prefix, tree.leaves[-1].prefix):
        if extreme not in recorded_samples:
            raise VerificationError(
                "leftmost/rightmost branch missing from the recorded samples",
                stage="numeric",
            )
    facts.append("numeric: recorded samples are leaves and include both extremes")

    y_number = certificate.y_number()
    indices = _selected_indices(len(tree.leaves), samples)
    for index in indices:
        q = FnsNumber(tree.leaves[index].prefix)
        total, trace = fns.add(q, y_number)
        recorded = recorded_samples.get(q.digits)
        if recorded is not None and (
            recorded.sum != total.digits or recorded.carries != trace.carries
        ):
            raise VerificationError(
                f"recorded sample for leaf {index} disagrees with the exact sum",
                stage="numeric",
                position=index,
            )
        if not in_ek_set(total):
            raise VerificationError(
                f"leaf {index}: q + y leaves the target set", stage="numeric", position=index
            )
        if not fns.carry_identity_holds(q, y_number, trace):
            raise VerificationError(
                f"leaf {index}: carry identity fails", stage="numeric", position=index
            )
        if fns.has_chained_carry(q, y_number, trace):
            raise VerificationError(
                f"leaf {index}: a carry chained into the next position",
                stage="numeric",
                position=index,
            )
        facts.append(f"numeric: leaf {index} lands in the set with clean carries")
    return VerificationReport(True, tuple(facts))


@dataclass(frozen=True)
class EmbedResult:
    """Everything one full pipeline run produces."""

    tree: IntervalTree
    certificate: TranslationCertificate
    report: VerificationReport
    shift: Fraction


def embed(
    oracle: PerfectSetOracle,
    height: int,
    *,
    samples: int | None = None,
    max_separation_depth: int = 64,
    max_point_retries: int = 8,
) -> EmbedResult:
    """normalize -> build -> select -> verify, bundled."""
    translated, shift = normalize_input(oracle)
    tree = build_tree(
        translated,
        height,
        max_separation_depth=max_separation_depth,
        max_point_retries=max_point_retries,
    )
    certificate = select_translation(tree, shift=shift)
    report = verify_certificate(tree, certificate, samples=samples)
    return EmbedResult(tree, certificate, report, shift)
