"""Closed sentence grammar for synthetic captions.

The generator renders events with it, the recount and the rule-based extractor
parse them back, so parsing is exact over a world's vocabulary.
"""

import re
from typing import Dict, List, Optional

from pydantic import BaseModel

from app.schemas.harness import ObjectSpec, PersonSpec, WorldSpec


class ParsedSentence(BaseModel):
    kind: str  # activity | placement | person_intro | ownership
    subject: str
    activity: Optional[str] = None
    companion: Optional[str] = None
    location: Optional[str] = None
    object: Optional[str] = None


def _alternation(values: List[str]) -> str:
    # longest first so that no alternative shadows a longer one
    return "|".join(re.escape(v) for v in sorted(set(values), key=lambda v: (-len(v), v)))


class SentenceGrammar:
    def __init__(self, spec: WorldSpec):
        self.spec = spec
        self.by_present = {activity.present: activity for activity in spec.activities}
        persons = _alternation([p.name for p in spec.persons])
        locations = _alternation([loc.name for loc in spec.locations])
        presents = _alternation(list(self.by_present))
        objects = _alternation([o.name for o in spec.objects]) or "(?!)"
        self._activity = re.compile(
            rf"^(?P<subject>{persons}) (?P<present>{presents})"
            rf"(?: with (?P<companion>{persons}))? in the (?P<location>{locations})\.$"
        )
        self._placement = re.compile(
            rf"^(?P<subject>{persons}) puts the (?P<object>{objects}) "
            rf"in the (?P<location>{locations})\.$"
        )
        self._intro = re.compile(
            rf"^(?P<subject>{persons}) is an? \w+ housemate from .+ with .+\.$"
        )
        self._ownership = re.compile(rf"^(?P<subject>{persons}) owns the (?P<object>{objects})\.$")

    @staticmethod
    def activity(person: str, present: str, location: str, companion: Optional[str] = None) -> str:
        together = f" with {companion}" if companion else ""
        return f"{person} {present}{together} in the {location}."

    @staticmethod
    def placement(person: str, obj: str, location: str) -> str:
        return f"{person} puts the {obj} in the {location}."

    @staticmethod
    def person_intro(person: PersonSpec) -> str:
        article = "an" if person.gender[:1].lower() in "aeiou" else "a"
        return (
            f"{person.name} is {article} {person.gender} housemate from {person.hometown} "
            f"with {person.appearance}."
        )

    @staticmethod
    def ownership(obj: ObjectSpec) -> str:
        return f"{obj.owner} owns the {obj.name}."

    def parse(self, sentence: str) -> Optional[ParsedSentence]:
        sentence = sentence.strip()
        match = self._activity.match(sentence)
        if match:
            groups = match.groupdict()
            return ParsedSentence(
                kind="activity",
                subject=groups["subject"],
                activity=self.by_present[groups["present"]].name,
                companion=groups["companion"],
                location=groups["location"],
            )
        match = self._placement.match(sentence)
        if match:
            return ParsedSentence(kind="placement", **match.groupdict())
        match = self._intro.match(sentence)
        if match:
            return ParsedSentence(kind="person_intro", subject=match.group("subject"))
        match = self._ownership.match(sentence)
        if match:
            return ParsedSentence(kind="ownership", **match.groupdict())
        return None

    def objects(self) -> Dict[str, ObjectSpec]:
        return {obj.name: obj for obj in self.spec.objects}
