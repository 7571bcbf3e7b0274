"""The 10-code, two-layer HFACS 8.0 subset (unsafe acts and preconditions)."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable


class Layer(enum.Enum):
    UNSAFE_ACT = "UnsafeAct"
    PRECONDITION = "Precondition"


@dataclass(frozen=True)
class HfacsCode:
    code: str
    layer: Layer
    display_name: str
    definition: str

    def __str__(self) -> str:
        return self.code


class InvalidLabel(ValueError):
    """A label string contains a token outside the taxonomy."""

    def __init__(self, token: str, row: int | None = None):
        self.token = token
        self.row = row
        where = f" at row {row}" if row is not None else ""
        super().__init__(f"invalid HFACS code {token!r}{where}")


_CODES: tuple[HfacsCode, ...] = (
    HfacsCode("AE100", Layer.UNSAFE_ACT, "Performance/Skill Based Errors",
              "Errors in execution of routine, highly practiced tasks: stick-and-rudder "
              "control, checklist slips, distraction-induced lapses in technique."),
    HfacsCode("AE200", Layer.UNSAFE_ACT, "Judgment/Decision-making Errors",
              "Intentional choices that prove inadequate for the situation: poor risk "
              "assessment, continuing into deteriorating conditions, wrong course of action."),
    HfacsCode("AD000", Layer.UNSAFE_ACT, "Known Deviations",
              "Willful departures from rules, regulations, or procedures the pilot knew "
              "applied, such as flying below minimums or without a required rating."),
    HfacsCode("PC100", Layer.PRECONDITION, "Adverse Mental States",
              "Mental conditions that degrade performance: complacency, fixation, "
              "distraction, overconfidence, stress, loss of situational awareness."),
    HfacsCode("PC200", Layer.PRECONDITION, "Adverse Physiological States",
              "Medical or physiological conditions that degrade performance: fatigue, "
              "hypoxia, spatial disorientation, impairment by drugs or alcohol."),
    HfacsCode("PC300", Layer.PRECONDITION, "Physical/Mental Limitations",
              "Situations exceeding the pilot's capabilities: limited experience, "
              "insufficient reaction time, visual or sensory limits."),
    HfacsCode("PE100", Layer.PRECONDITION, "Physical Environment",
              "Operational and ambient conditions: weather, icing, wind, terrain, "
              "lighting, density altitude."),
    HfacsCode("PE200", Layer.PRECONDITION, "Technological Environment",
              "Design of equipment, controls, displays, automation, or aircraft systems "
              "that contributes to the event."),
    HfacsCode("PP100", Layer.PRECONDITION, "Planning Conditions",
              "Inadequate preflight planning: fuel, weight and balance, route, weather "
              "briefing, or crew coordination."),
    HfacsCode("PT100", Layer.PRECONDITION, "Training Conditions",
              "Deficiencies in initial, recurrent, or type-specific training and "
              "proficiency that contribute to the event."),
)

_BY_NAME: dict[str, HfacsCode] = {c.code: c for c in _CODES}

CODE_NAMES: tuple[str, ...] = tuple(c.code for c in _CODES)
UNDERREPRESENTED: frozenset[str] = frozenset({"AD000", "PC200", "PE200"})


def all_codes() -> list[HfacsCode]:
    """The 10 codes in canonical order: unsafe acts first, then preconditions."""
    return list(_CODES)


def get_code(name: str) -> HfacsCode:
    try:
        return _BY_NAME[name]
    except KeyError:
        raise InvalidLabel(name) from None


def is_valid_code(token: str) -> bool:
    return token in _BY_NAME


class LabelSet(frozenset):
    """An unordered, deduplicated set of HFACS code strings.

    Iteration is unordered like any frozenset; use ``ordered()`` or ``str()``
    for the canonical rendering.
    """

    def __new__(cls, codes: Iterable[str] = ()):
        codes = frozenset(codes)
        for c in codes:
            if c not in _BY_NAME:
                raise InvalidLabel(c)
        return super().__new__(cls, codes)

    def ordered(self) -> list[str]:
        return [c for c in CODE_NAMES if c in self]

    def __str__(self) -> str:
        return " ".join(self.ordered())

    def __repr__(self) -> str:
        return f"LabelSet({{{', '.join(self.ordered())}}})"


def parse_label_string(s: str, row: int | None = None) -> LabelSet:
    """Parse a whitespace-separated ground-truth label string.

    Every token must be a valid code; duplicates collapse.
    """
    tokens = s.split()
    for tok in tokens:
        if not is_valid_code(tok):
            raise InvalidLabel(tok, row)
    return LabelSet(tokens)


def serialize_labels(labels: Iterable[str]) -> str:
    return str(LabelSet(labels))
