"""The closed three-way stance label set and its parsing rules."""

from __future__ import annotations

from enum import Enum


class Stance(Enum):
    SUPPORTING = "supporting"
    DENYING = "denying"
    QUESTIONING = "questioning"


# fixed precedence for argmax and tie-breaking: supporting > denying > questioning
STANCE_ORDER = (Stance.SUPPORTING, Stance.DENYING, Stance.QUESTIONING)

_ALIASES = {
    "s": Stance.SUPPORTING,
    "support": Stance.SUPPORTING,
    "supporting": Stance.SUPPORTING,
    "d": Stance.DENYING,
    "deny": Stance.DENYING,
    "denying": Stance.DENYING,
    "q": Stance.QUESTIONING,
    "question": Stance.QUESTIONING,
    "questioning": Stance.QUESTIONING,
}


class LabelParseError(ValueError):
    pass


def parse_stance(raw: str) -> Stance:
    key = str(raw).strip().lower()
    try:
        return _ALIASES[key]
    except KeyError:
        raise LabelParseError(
            f"unknown stance label {raw!r}; accepted: s/d/q, support/deny/question, "
            "supporting/denying/questioning"
        ) from None
