"""Three-valued truth values for queries answered over sets of candidate worlds."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class Truth(str, Enum):
    TRUE = "TRUE"
    FALSE = "FALSE"
    UNKNOWN = "UNKNOWN"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class TernaryVerdict:
    """A truth value together with the evidence behind it.

    ``satisfied_fraction`` is the share of consulted worlds in which the
    queried fact holds; ``member_count`` is how many worlds were consulted
    (0 when the verdict comes straight from asserted text, see
    :func:`kbens.kb.assertion_oracle`).
    """

    value: Truth
    satisfied_fraction: float
    member_count: int

    @classmethod
    def from_fraction(
        cls, fraction: float, member_count: int, quorum_slack: float = 0.0
    ) -> "TernaryVerdict":
        """Apply the unanimity rule: TRUE iff every world agrees the fact
        holds, FALSE iff no world does, UNKNOWN otherwise.

        ``quorum_slack`` relaxes strict unanimity to a (1 - slack) quorum on
        either side; the default 0 keeps the all/none/some reading.
        """
        if not 0.0 <= fraction <= 1.0:
            raise ValueError(f"satisfied fraction out of range: {fraction!r}")
        if not 0.0 <= quorum_slack < 0.5:
            raise ValueError(f"quorum slack must lie in [0, 0.5): {quorum_slack!r}")
        if fraction >= 1.0 - quorum_slack:
            value = Truth.TRUE
        elif fraction <= quorum_slack:
            value = Truth.FALSE
        else:
            value = Truth.UNKNOWN
        return cls(value=value, satisfied_fraction=float(fraction), member_count=member_count)
