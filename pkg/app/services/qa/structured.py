"""Deterministic answers for first/last/count/where/usually/after questions.

Classification is pattern based. Resolution reads a graph view that is already
filtered at the query time, so every cited timestamp is at or before it.
"""

import logging
import re
from collections import Counter
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.models.enums import (
    AnswerConfidence,
    AnswerPath,
    DayPart,
    ElementKind,
    EntityType,
    RelativeKind,
    StructuredKind,
)
from app.schemas.graph import EntityNode, RelationEdge, TemporalGraph
from app.schemas.qa import Answer, SourceRef, StructuredTemporalQuery
from app.schemas.timeline import RelativeExpr, TimeWindow, Timestamp
from app.services.graph.temporal_graph import node_id_for
from app.services.retrieval.embeddings import EmbeddingProvider
from app.utils.exceptions import EngineException, UnresolvableException
from app.utils.text_utils import name_key
from app.utils.timeline import day_window, daypart_of, format_timestamp, resolve_relative

logger = logging.getLogger(__name__)

_NAME = r"(?P<subject>[A-Z][\w'\-]*(?: [A-Z][\w'\-]*)*)"
_END = r"\s*\?*\s*$"
_ARTICLE = r"(?:the |a |an |his |her |their )?"

_PATTERNS: List[Tuple[StructuredKind, "re.Pattern"]] = [
    (
        StructuredKind.WHERE_LAST_SEEN,
        re.compile(
            rf"^\s*(?i:where did) {_NAME} (?i:last (?:put|leave|place)) "
            rf"{_ARTICLE}(?P<object>.+?){_END}"
        ),
    ),
    (
        StructuredKind.WHERE_LAST_SEEN,
        re.compile(rf"^\s*(?i:where (?:was|is) ){_NAME}(?i: last seen)?{_END}"),
    ),
    (
        StructuredKind.AFTER_EVENT,
        re.compile(
            rf"^\s*(?i:what did) {_NAME} (?i:do (?:right )?after) (?:\w+ )?"
            rf"(?i:last) (?i:went to )?(?P<object>.+?){_END}"
        ),
    ),
    (
        StructuredKind.FIRST_OCCURRENCE,
        re.compile(rf"^\s*(?i:when did) {_NAME} (?i:first) (?P<object>.+?){_END}"),
    ),
    (
        StructuredKind.FIRST_OCCURRENCE,
        re.compile(rf"^\s*(?i:when was the first time) {_NAME} (?P<object>.+?){_END}"),
    ),
    (
        StructuredKind.LAST_OCCURRENCE,
        re.compile(rf"^\s*(?i:when did) {_NAME} (?i:last) (?P<object>.+?){_END}"),
    ),
    (
        StructuredKind.LAST_OCCURRENCE,
        re.compile(rf"^\s*(?i:when was the last time) {_NAME} (?P<object>.+?){_END}"),
    ),
    (
        StructuredKind.COUNT_OCCURRENCES,
        re.compile(
            rf"^\s*(?i:how many times did) {_NAME} (?P<object>.+?)"
            rf"(?: (?i:on day\s*)(?P<day>\d+)| (?P<relative>(?i:today|yesterday)))?{_END}"
        ),
    ),
    (
        StructuredKind.USUAL_VALUE,
        re.compile(
            rf"^\s*(?i:what does) {_NAME} (?i:usually do)"
            rf"(?: (?i:in the) (?P<daypart>(?i:morning|afternoon|evening))| (?i:at night))?{_END}"
        ),
    ),
]


def classify_structured(question: str) -> Optional[StructuredTemporalQuery]:
    """The structured form of ``question``, or None when no pattern applies."""
    for kind, pattern in _PATTERNS:
        match = pattern.match(question)
        if not match:
            continue
        groups = match.groupdict()
        query = StructuredTemporalQuery(kind=kind, subject=groups["subject"])
        if groups.get("object"):
            query.object = groups["object"].strip()
        if groups.get("day"):
            query.day = int(groups["day"])
        if groups.get("relative"):
            query.relative = RelativeExpr(kind=RelativeKind(groups["relative"].lower()))
        if kind == StructuredKind.USUAL_VALUE:
            if groups.get("daypart"):
                query.daypart = DayPart(groups["daypart"].lower())
            elif "night" in question.lower():
                query.daypart = DayPart.NIGHT
        return query
    return None


class StructuredResolver:
    def __init__(
        self,
        view: TemporalGraph,
        t_q: Timestamp,
        embedder: Optional[EmbeddingProvider] = None,
        match_threshold: float = 0.5,
    ):
        self.view = view
        self.t_q = t_q
        self.embedder = embedder
        self.match_threshold = match_threshold

    def _best_by_embedding(
        self, name: str, candidates: Sequence[EntityNode]
    ) -> Optional[EntityNode]:
        if self.embedder is None or not candidates:
            return None
        ordered = sorted(candidates, key=lambda node: node.node_id)
        vectors = self.embedder.embed([name] + [node.name for node in ordered])
        scores = vectors[1:] @ vectors[0]
        best = int(np.argmax(scores))
        if scores[best] >= self.match_threshold:
            return ordered[best]
        return None

    def find(
        self,
        name: str,
        types: Sequence[EntityType],
        candidates: Optional[Sequence[EntityNode]] = None,
    ) -> Optional[EntityNode]:
        """Normalized-name lookup among ``types``, then the embedding fallback."""
        if candidates is None:
            for entity_type in types:
                node = self.view.nodes.get(node_id_for(entity_type, name))
                if node is not None:
                    return node
            candidates = [n for n in self.view.nodes.values() if n.entity_type in types]
        else:
            candidates = [n for n in candidates if n.entity_type in types]
            key = name_key(name)
            for node in sorted(candidates, key=lambda n: n.node_id):
                if name_key(node.name) == key:
                    return node
        return self._best_by_embedding(name, candidates)

    def subject(self, q: StructuredTemporalQuery) -> EntityNode:
        node = self.find(q.subject, [EntityType.PERSON, EntityType.OBJECT, EntityType.LOCATION])
        if node is None:
            raise UnresolvableException(f"no entity matches {q.subject!r} at {self.t_q}")
        return node

    def neighbors(self, node: EntityNode, entity_type: EntityType) -> Dict[str, RelationEdge]:
        """Edges from ``node`` to neighbours of ``entity_type``, keyed by neighbour id."""
        found = {}
        for edge in self.view.edges_of(node.node_id):
            other = self.view.nodes[edge.other_end(node.node_id)]
            if other.entity_type == entity_type:
                found[other.node_id] = edge
        return found

    def event_edge(self, subject: EntityNode, phrase: str) -> Tuple[EntityNode, RelationEdge]:
        events = self.neighbors(subject, EntityType.EVENT)
        candidates = [self.view.nodes[node_id] for node_id in events]
        event = self.find(phrase, [EntityType.EVENT], candidates)
        if event is None:
            raise UnresolvableException(f"{subject.name} has no event matching {phrase!r}")
        return event, events[event.node_id]

    def window(self, q: StructuredTemporalQuery) -> Optional[TimeWindow]:
        if q.window is not None:
            return q.window
        if q.day is not None:
            return day_window(q.day)
        day_relative = (RelativeKind.TODAY, RelativeKind.YESTERDAY)
        if q.relative is not None and q.relative.kind in day_relative:
            try:
                return resolve_relative(q.relative, self.t_q, [])
            except EngineException as e:
                raise UnresolvableException(e.message)
        return None

    def _answer(
        self,
        text: str,
        cited: List[Timestamp],
        sources: List[Tuple[str, ElementKind]],
        ambiguous: bool = False,
    ) -> Answer:
        return Answer(
            text=text,
            cited_timestamps=sorted(set(cited)),
            sources=[SourceRef(element_id=i, kind=kind) for i, kind in sources],
            confidence=AnswerConfidence.RESOLVED,
            path=AnswerPath.STRUCTURED,
            ambiguous=ambiguous,
        )

    def occurrence(self, q: StructuredTemporalQuery) -> Answer:
        subject = self.subject(q)
        if q.object:
            event, edge = self.event_edge(subject, q.object)
            stamps, sources = edge.timestamps, [(edge.edge_id, ElementKind.EDGE)]
            sources.append((event.node_id, ElementKind.NODE))
        else:
            stamps, sources = subject.timestamps, [(subject.node_id, ElementKind.NODE)]
        if not stamps:
            raise UnresolvableException(f"no observations of {q.subject!r}")
        chosen = stamps[0] if q.kind == StructuredKind.FIRST_OCCURRENCE else stamps[-1]
        return self._answer(format_timestamp(chosen), [chosen], sources)

    def count(self, q: StructuredTemporalQuery) -> Answer:
        subject = self.subject(q)
        if not q.object:
            raise UnresolvableException("count questions need an activity")
        event, edge = self.event_edge(subject, q.object)
        window = self.window(q)
        stamps = [t for t in edge.timestamps if window is None or window.contains(t)]
        if not stamps:
            raise UnresolvableException(f"no {event.name!r} observations in the window")
        sources = [(edge.edge_id, ElementKind.EDGE), (event.node_id, ElementKind.NODE)]
        return self._answer(str(len(stamps)), stamps, sources)

    def where_last_seen(self, q: StructuredTemporalQuery) -> Answer:
        subject = self.subject(q)
        target = subject
        if q.object:
            owned = [self.view.nodes[i] for i in self.neighbors(subject, EntityType.OBJECT)]
            target = self.find(q.object, [EntityType.OBJECT], owned) or self.find(
                q.object, [EntityType.OBJECT]
            )
            if target is None:
                raise UnresolvableException(f"no object matches {q.object!r}")
        locations = self.neighbors(target, EntityType.LOCATION)
        if not locations:
            raise UnresolvableException(f"{target.name} has no location observations")
        # latest observation first, smallest id on equal timestamps
        location_id, edge = min(
            locations.items(),
            key=lambda item: (-item[1].timestamps[-1].absolute_seconds, item[0]),
        )
        location = self.view.nodes[location_id]
        sources = [(edge.edge_id, ElementKind.EDGE), (location_id, ElementKind.NODE)]
        return self._answer(location.name, [edge.timestamps[-1]], sources)

    def usual_value(self, q: StructuredTemporalQuery) -> Answer:
        subject = self.subject(q)
        matches: Dict[str, List[Timestamp]] = {}
        for event_id, edge in self.neighbors(subject, EntityType.EVENT).items():
            stamps = [
                t for t in edge.timestamps if q.daypart is None or daypart_of(t) == q.daypart
            ]
            if stamps:
                matches[event_id] = stamps
        if not matches:
            raise UnresolvableException(f"no activities of {subject.name} match")
        counts = Counter({event_id: len(stamps) for event_id, stamps in matches.items()})
        top = max(counts.values())
        tied = sorted(
            (event_id for event_id, count in counts.items() if count == top),
            key=lambda event_id: (matches[event_id][0], event_id),
        )
        winner = tied[0]
        edge = self.neighbors(subject, EntityType.EVENT)[winner]
        sources = [(edge.edge_id, ElementKind.EDGE), (winner, ElementKind.NODE)]
        return self._answer(
            self.view.nodes[winner].name, matches[winner], sources, ambiguous=len(tied) > 1
        )

    def after_event(self, q: StructuredTemporalQuery) -> Answer:
        subject = self.subject(q)
        if not q.object:
            raise UnresolvableException("after questions need a reference activity")
        reference, reference_edge = self.event_edge(subject, q.object)
        anchor = reference_edge.timestamps[-1]
        following: Optional[Tuple[Timestamp, str]] = None
        for event_id, edge in self.neighbors(subject, EntityType.EVENT).items():
            later = next((t for t in edge.timestamps if t > anchor), None)
            if later is not None and (following is None or (later, event_id) < following):
                following = (later, event_id)
        if following is None:
            raise UnresolvableException(f"nothing recorded after {reference.name} at {anchor}")
        t, event_id = following
        sources = [
            (reference_edge.edge_id, ElementKind.EDGE),
            (self.neighbors(subject, EntityType.EVENT)[event_id].edge_id, ElementKind.EDGE),
            (event_id, ElementKind.NODE),
        ]
        return self._answer(self.view.nodes[event_id].name, [anchor, t], sources)

    def resolve(self, q: StructuredTemporalQuery) -> Answer:
        handlers = {
            StructuredKind.FIRST_OCCURRENCE: self.occurrence,
            StructuredKind.LAST_OCCURRENCE: self.occurrence,
            StructuredKind.COUNT_OCCURRENCES: self.count,
            StructuredKind.WHERE_LAST_SEEN: self.where_last_seen,
            StructuredKind.USUAL_VALUE: self.usual_value,
            StructuredKind.AFTER_EVENT: self.after_event,
        }
        return handlers[q.kind](q)


def resolve_structured(
    q: StructuredTemporalQuery,
    view: TemporalGraph,
    t_q: Timestamp,
    embedder: Optional[EmbeddingProvider] = None,
    match_threshold: float = 0.5,
) -> Answer:
    """Answer ``q`` from a view filtered at ``t_q``; raises ``UnresolvableException``."""
    return StructuredResolver(view, t_q, embedder, match_threshold).resolve(q)
