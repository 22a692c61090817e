import logging
import random
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from pydantic import ValidationError

from app.models.enums import DayPart
from app.schemas.documents import Segment, SourceDocument
from app.schemas.harness import (
    ActivityTemplate,
    GoldEvent,
    GoldLog,
    LocationSpec,
    ObjectSpec,
    PersonSpec,
    WorldSpec,
)
from app.schemas.timeline import Timestamp
from app.services.harness.grammar import SentenceGrammar
from app.utils.exceptions import ConfigException
from app.utils.timeline import daypart_of

logger = logging.getLogger(__name__)

INTRO_STEP_SECONDS = 5
MAX_STAGGER_SECONDS = 5


def default_world_spec(seed: int = 0, days: int = 7) -> WorldSpec:
    """Six housemates, twelve objects, eight rooms."""
    # fmt: off
    persons = [
        PersonSpec(name="Alice", gender="female", appearance="curly red hair",
                   hometown="Leeds", habits=["play the piano", "make coffee"]),
        PersonSpec(name="Bob", gender="male", appearance="a grey beard",
                   hometown="Bristol", habits=["cook breakfast", "watch a movie"]),
        PersonSpec(name="Chen", gender="male", appearance="round glasses",
                   hometown="Suzhou", habits=["work on the laptop", "read a book"]),
        PersonSpec(name="Dana", gender="female", appearance="a green raincoat",
                   hometown="Austin", habits=["water the plants", "do yoga"]),
        PersonSpec(name="Emeka", gender="male", appearance="a shaved head",
                   hometown="Lagos", habits=["play cards", "eat lunch"]),
        PersonSpec(name="Farah", gender="female", appearance="silver earrings",
                   hometown="Amman", habits=["do the laundry", "read a book"]),
    ]
    # fmt: on
    objects = [
        ObjectSpec(name="yellow mug", type="mug", color="yellow", owner="Alice"),
        ObjectSpec(name="red scarf", type="scarf", color="red", owner="Alice"),
        ObjectSpec(name="blue notebook", type="notebook", color="blue", owner="Bob"),
        ObjectSpec(name="black headphones", type="headphones", color="black", owner="Bob"),
        ObjectSpec(name="green water bottle", type="water bottle", color="green", owner="Chen"),
        ObjectSpec(name="silver camera", type="camera", color="silver", owner="Chen"),
        ObjectSpec(name="orange umbrella", type="umbrella", color="orange", owner="Dana"),
        ObjectSpec(name="white sneakers", type="sneakers", color="white", owner="Dana"),
        ObjectSpec(name="brown wallet", type="wallet", color="brown", owner="Emeka"),
        ObjectSpec(name="purple backpack", type="backpack", color="purple", owner="Emeka"),
        ObjectSpec(name="pink phone case", type="phone case", color="pink", owner="Farah"),
        ObjectSpec(name="gold watch", type="watch", color="gold", owner="Farah"),
    ]
    locations = [
        LocationSpec(name="kitchen", description="A bright kitchen with a gas stove."),
        LocationSpec(name="living room", description="A living room with a large sofa."),
        LocationSpec(name="garden", description="A small garden with potted herbs."),
        LocationSpec(name="study", description="A quiet study lined with bookshelves."),
        LocationSpec(name="dining room", description="A dining room with a long oak table."),
        LocationSpec(name="balcony", description="A narrow balcony facing the street."),
        LocationSpec(name="music room", description="A music room with an upright piano."),
        LocationSpec(name="laundry room", description="A laundry room with two machines."),
    ]
    m, a, e = DayPart.MORNING, DayPart.AFTERNOON, DayPart.EVENING
    # fmt: off
    activities = [
        ActivityTemplate(name="cook breakfast", present="cooks breakfast", location="kitchen",
                         recurrence={m: 0.25}),
        ActivityTemplate(name="make coffee", present="makes coffee", location="kitchen",
                         recurrence={m: 0.3, a: 0.1}),
        ActivityTemplate(name="play the piano", present="plays the piano",
                         location="music room", recurrence={a: 0.15, e: 0.15}),
        ActivityTemplate(name="water the plants", present="waters the plants",
                         location="garden", recurrence={m: 0.15, e: 0.1}),
        ActivityTemplate(name="read a book", present="reads a book", location="study",
                         recurrence={a: 0.15, e: 0.2}),
        ActivityTemplate(name="watch a movie", present="watches a movie",
                         location="living room", arity=2, recurrence={e: 0.2}),
        ActivityTemplate(name="eat lunch", present="eats lunch", location="dining room",
                         arity=2, recurrence={a: 0.3}),
        ActivityTemplate(name="do the laundry", present="does the laundry",
                         location="laundry room", recurrence={m: 0.1, a: 0.1}),
        ActivityTemplate(name="do yoga", present="does yoga", location="balcony",
                         recurrence={m: 0.15, e: 0.1}),
        ActivityTemplate(name="play cards", present="plays cards", location="dining room",
                         arity=2, recurrence={e: 0.15}),
        ActivityTemplate(name="work on the laptop", present="works on the laptop",
                         location="study", recurrence={m: 0.2, a: 0.25}),
    ]
    # fmt: on
    return WorldSpec(
        seed=seed,
        days=days,
        persons=persons,
        objects=objects,
        locations=locations,
        activities=activities,
    )


def _slots_by_daypart(spec: WorldSpec) -> Dict[DayPart, List[int]]:
    start = spec.day_start_hour * 3600
    end = spec.day_end_hour * 3600
    slots: Dict[DayPart, List[int]] = defaultdict(list)
    for second in range(start, end, spec.slot_seconds):
        slots[daypart_of(Timestamp(day=1, seconds_of_day=second))].append(second)
    return {part: slots[part] for part in DayPart if slots[part]}


def _intro_segments(spec: WorldSpec) -> List[Segment]:
    sentences = [SentenceGrammar.person_intro(person) for person in spec.persons]
    sentences += [SentenceGrammar.ownership(obj) for obj in spec.objects]
    first = max(0, spec.day_start_hour * 3600 - 60 - INTRO_STEP_SECONDS * len(sentences))
    return [
        Segment(
            timestamp=Timestamp(day=1, seconds_of_day=first + INTRO_STEP_SECONDS * i),
            text=sentence,
        )
        for i, sentence in enumerate(sentences)
    ]


def _plan_day(spec: WorldSpec, rng: random.Random, slots: Dict[DayPart, List[int]]):
    """Sampled (slot second, draft event) pairs for one day, in sampling order."""
    planned: List[Tuple[int, dict]] = []
    names = [person.name for person in spec.persons]
    for person in spec.persons:
        for part, part_slots in slots.items():
            for activity in spec.activities:
                probability = activity.recurrence.get(part, 0.0)
                if activity.name in person.habits:
                    probability = min(1.0, probability * spec.habit_boost)
                if probability <= 0.0 or rng.random() >= probability:
                    continue
                slot = rng.choice(part_slots)
                companion = None
                if activity.arity == 2:
                    companion = rng.choice([n for n in names if n != person.name])
                planned.append(
                    (
                        slot,
                        {
                            "kind": "activity",
                            "subject": person.name,
                            "location": activity.location,
                            "activity": activity.name,
                            "companion": companion,
                            "effects": {f"{person.name}.location": activity.location},
                        },
                    )
                )
            for obj in spec.objects:
                if obj.owner != person.name or rng.random() >= spec.placement_rate:
                    continue
                slot = rng.choice(part_slots)
                location = rng.choice(spec.locations).name
                planned.append(
                    (
                        slot,
                        {
                            "kind": "placement",
                            "subject": person.name,
                            "location": location,
                            "object": obj.name,
                            "effects": {f"{obj.name}.location": location},
                        },
                    )
                )
    return planned


def render_event(spec: WorldSpec, event: GoldEvent) -> str:
    if event.kind == "placement":
        return SentenceGrammar.placement(event.subject, event.object, event.location)
    present = spec.activity(event.activity).present
    return SentenceGrammar.activity(event.subject, present, event.location, event.companion)


def generate_world(spec: WorldSpec) -> Tuple[List[SourceDocument], GoldLog]:
    """Seeded simulation of ``spec.days`` days; one caption segment per event."""
    rng = random.Random(spec.seed)
    slots = _slots_by_daypart(spec)
    docs: List[SourceDocument] = []
    events: List[GoldEvent] = []
    for day in range(1, spec.days + 1):
        planned = _plan_day(spec, rng, slots)
        by_slot: Dict[int, List[dict]] = defaultdict(list)
        for slot, draft in planned:
            by_slot[slot].append(draft)
        segments = _intro_segments(spec) if day == 1 else []
        for slot in sorted(by_slot):
            drafts = by_slot[slot]
            step = max(1, min(MAX_STAGGER_SECONDS, spec.slot_seconds // len(drafts)))
            for offset, draft in enumerate(drafts):
                timestamp = Timestamp(day=day, seconds_of_day=slot + offset * step)
                event = GoldEvent(timestamp=timestamp, **draft)
                events.append(event)
                segments.append(Segment(timestamp=timestamp, text=render_event(spec, event)))
        if segments:
            docs.append(SourceDocument(doc_id=f"day{day}", segments=segments))
    logger.info(f"Generated {len(events)} events over {spec.days} days (seed {spec.seed})")
    return docs, GoldLog(events=events)


def recount_events(docs: List[SourceDocument], spec: WorldSpec) -> GoldLog:
    """Rebuild the event log from caption text alone."""
    grammar = SentenceGrammar(spec)
    events = []
    for doc in docs:
        for segment in doc.segments:
            parsed = grammar.parse(segment.text)
            if parsed is None or parsed.kind not in ("activity", "placement"):
                continue
            if parsed.kind == "activity":
                effects = {f"{parsed.subject}.location": parsed.location}
            else:
                effects = {f"{parsed.object}.location": parsed.location}
            events.append(
                GoldEvent(
                    timestamp=segment.timestamp,
                    kind=parsed.kind,
                    subject=parsed.subject,
                    location=parsed.location,
                    activity=parsed.activity,
                    companion=parsed.companion,
                    object=parsed.object,
                    effects=effects,
                )
            )
    events.sort(key=lambda event: event.timestamp.key)
    return GoldLog(events=events)


def world_state(gold: GoldLog, t: Timestamp) -> Dict[str, str]:
    """Effects applied in order up to and including ``t``."""
    state: Dict[str, str] = {}
    for event in gold.events:
        if event.timestamp > t:
            break
        state.update(event.effects)
    return state


def load_world_spec(path: Optional[str], seed: int = 0) -> WorldSpec:
    """World vocabulary from a JSON document, or the default six-person world."""
    if not path:
        return default_world_spec(seed=seed)
    try:
        return WorldSpec.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigException(f"Cannot read world spec {path}: {e}")
    except ValidationError as e:
        raise ConfigException(f"Invalid world spec {path}: {e}")
