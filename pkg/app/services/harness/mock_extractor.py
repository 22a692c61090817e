"""Deterministic extraction client for harness captions.

It reads the chunk text back out of a rendered extraction prompt, parses every
line with the closed sentence grammar and answers with the delimiter records a
well-behaved model would emit.
"""

import logging
from typing import List, Optional

from app.models.enums import EntityType
from app.prompts.extraction_prompts import INPUT_TEXT_END, INPUT_TEXT_START
from app.schemas.extraction import (
    DelimiterConfig,
    EntityRec,
    ExtractionRecord,
    KeywordsRec,
    RelationRec,
)
from app.schemas.harness import WorldSpec
from app.services.extraction.record_parser import serialize_records
from app.services.harness.grammar import ParsedSentence, SentenceGrammar
from app.utils.text_utils import display_name

logger = logging.getLogger(__name__)


class RuleBasedExtractionClient:
    provider = "mock"

    def __init__(self, spec: WorldSpec, delimiters: Optional[DelimiterConfig] = None):
        self.spec = spec
        self.delimiters = delimiters or DelimiterConfig()
        self.grammar = SentenceGrammar(spec)
        self.locations = {loc.name: loc for loc in spec.locations}
        self.objects = self.grammar.objects()
        self.calls = 0

    @staticmethod
    def input_text(prompt: str) -> str:
        # the in-prompt example also contains the start marker, so take the last one
        start = prompt.rfind(INPUT_TEXT_START)
        if start < 0:
            return ""
        start += len(INPUT_TEXT_START)
        end = prompt.find(INPUT_TEXT_END, start)
        return prompt[start : end if end >= 0 else len(prompt)]

    def _person(self, name: str, description: str, **attributes: str) -> EntityRec:
        return EntityRec(
            name=name, entity_type=EntityType.PERSON, description=description, attributes=attributes
        )

    def _location(self, name: str) -> EntityRec:
        return EntityRec(
            name=display_name(name),
            entity_type=EntityType.LOCATION,
            description=self.locations[name].description,
            attributes={"name": display_name(name)},
        )

    def _object(self, name: str) -> EntityRec:
        spec = self.objects[name]
        return EntityRec(
            name=display_name(name),
            entity_type=EntityType.OBJECT,
            description=f"The {name} belongs to {spec.owner}.",
            attributes={"type": spec.type, "color": spec.color, "owner": spec.owner},
        )

    def _activity_records(self, parsed: ParsedSentence, sentence: str, anchor: str):
        activity = self.spec.activity(parsed.activity)
        event = display_name(activity.name)
        location = display_name(parsed.location)
        records: List[ExtractionRecord] = [
            self._person(parsed.subject, sentence),
            EntityRec(
                name=event,
                entity_type=EntityType.EVENT,
                description=f"{parsed.subject} {activity.present} in the {parsed.location}.",
                attributes={
                    "start_time": anchor,
                    "subject": parsed.subject,
                    "location": location,
                },
            ),
            self._location(parsed.location),
        ]
        if parsed.companion:
            records.append(self._person(parsed.companion, sentence))
        records += [
            RelationRec(
                source=parsed.subject,
                target=event,
                description=f"{parsed.subject} {activity.present}.",
                keywords=["activity"],
                strength=8.0,
            ),
            RelationRec(
                source=event,
                target=location,
                description=f"{event} takes place in the {parsed.location}.",
                keywords=["venue"],
                strength=6.0,
            ),
            RelationRec(
                source=parsed.subject,
                target=location,
                description=f"{parsed.subject} is in the {parsed.location}.",
                keywords=["presence"],
                strength=5.0,
            ),
        ]
        if parsed.companion:
            records.append(
                RelationRec(
                    source=parsed.subject,
                    target=parsed.companion,
                    description=f"{parsed.subject} {activity.present} with {parsed.companion}.",
                    keywords=["companionship"],
                    strength=4.0,
                )
            )
        return records

    def _placement_records(self, parsed: ParsedSentence, sentence: str):
        obj = display_name(parsed.object)
        location = display_name(parsed.location)
        return [
            self._person(parsed.subject, sentence),
            self._object(parsed.object),
            self._location(parsed.location),
            RelationRec(
                source=parsed.subject,
                target=obj,
                description=f"{parsed.subject} handles the {parsed.object}.",
                keywords=["handling"],
                strength=7.0,
            ),
            RelationRec(
                source=obj,
                target=location,
                description=f"The {parsed.object} is put in the {parsed.location}.",
                keywords=["placement"],
                strength=7.0,
            ),
        ]

    def records_for(self, sentence: str, anchor: str) -> List[ExtractionRecord]:
        parsed = self.grammar.parse(sentence)
        if parsed is None:
            return []
        if parsed.kind == "activity":
            return self._activity_records(parsed, sentence, anchor)
        if parsed.kind == "placement":
            return self._placement_records(parsed, sentence)
        if parsed.kind == "person_intro":
            person = self.spec.person(parsed.subject)
            return [
                self._person(
                    person.name,
                    sentence,
                    gender=person.gender,
                    appearance=person.appearance,
                    hometown=person.hometown,
                )
            ]
        return [
            self._object(parsed.object),
            self._person(parsed.subject, f"{parsed.subject} owns the {parsed.object}."),
            RelationRec(
                source=parsed.subject,
                target=display_name(parsed.object),
                description=f"{parsed.subject} owns the {parsed.object}.",
                keywords=["ownership"],
                strength=9.0,
            ),
        ]

    def complete(self, prompt: str) -> str:
        self.calls += 1
        lines = [line.strip() for line in self.input_text(prompt).splitlines() if line.strip()]
        if not lines:
            return self.delimiters.completion_delimiter
        anchor, sentences = lines[0], lines[1:]
        records: List[ExtractionRecord] = []
        names = []
        for sentence in sentences:
            found = self.records_for(sentence, anchor)
            if not found:
                logger.debug(f"No grammar rule matches {sentence!r}")
            records += found
            names += [display_name(r.name) for r in found if isinstance(r, EntityRec)]
        if not records:
            return self.delimiters.completion_delimiter
        records.append(KeywordsRec(keywords=sorted(set(names))))
        return serialize_records(records, self.delimiters)
