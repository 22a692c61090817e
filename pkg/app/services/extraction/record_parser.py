"""Parser for the delimiter-based record format returned by extraction clients.

Model output is untrusted: every problem is recorded as a ParseFault and the
offending record is skipped, the batch is never aborted.
"""

import logging
import math
from typing import Callable, Dict, List, Optional

from app.constants.egocentric_schema import MISSING_VALUE
from app.models.enums import EntityType, RecordKind
from app.schemas.extraction import (
    DelimiterConfig,
    EgocentricSchema,
    EntityRec,
    ExtractionParseResult,
    ExtractionRecord,
    KeywordsRec,
    ParseFault,
    RelationRec,
)
from app.utils.exceptions import EngineException, RecordSerializationException
from app.utils.text_utils import name_key, normalize_name
from app.utils.timeline import parse_timestamp

logger = logging.getLogger(__name__)

# Field count including the leading tag
RECORD_ARITY = {
    RecordKind.ENTITY: 5,
    RecordKind.RELATIONSHIP: 6,
    RecordKind.CONTENT_KEYWORDS: 2,
}

SNIPPET_LENGTH = 80


class _RecordFault(Exception):
    pass


def _clean_field(value: str) -> str:
    return value.strip().strip('"').strip()


def _split_keywords(value: str) -> List[str]:
    return [kw for kw in (_clean_field(part) for part in value.split(",")) if kw]


def parse_attributes(
    text: str, schema_keys: List[str], faults: Optional[List[str]] = None
) -> Dict[str, str]:
    """Parse ``attr1:value1|attr2:value2``; problems are appended to ``faults`` when given."""
    faults = faults if faults is not None else []
    attributes: Dict[str, str] = {}
    for pair in text.split("|"):
        if not pair.strip():
            continue
        key, separator, value = pair.partition(":")
        key, value = _clean_field(key).lower(), _clean_field(value)
        if not separator:
            faults.append(f"attribute {pair.strip()!r} has no ':'")
            continue
        if key not in schema_keys:
            faults.append(f"unknown attribute key {key!r}")
            continue
        if not value or value.lower() == MISSING_VALUE.lower():
            continue
        attributes[key] = value
    return attributes


def _parse_entity(fields: List[str], schema: EgocentricSchema, warnings: List[str]) -> EntityRec:
    name = normalize_name(fields[1])
    if not name:
        raise _RecordFault("empty entity name")
    entity_type = schema.lookup_type(fields[2])
    if entity_type is None:
        raise _RecordFault(f"unknown entity type {_clean_field(fields[2])!r}")
    attributes = parse_attributes(fields[4], schema.keys_for(entity_type), warnings)
    if entity_type == EntityType.EVENT and "start_time" in attributes:
        try:
            attributes["start_time"] = str(parse_timestamp(attributes["start_time"]))
        except EngineException:
            warnings.append(f"start_time {attributes['start_time']!r} is not a timestamp")
    return EntityRec(
        name=name,
        entity_type=entity_type,
        description=_clean_field(fields[3]),
        attributes=attributes,
    )


def _parse_relation(fields: List[str]) -> RelationRec:
    source, target = normalize_name(fields[1]), normalize_name(fields[2])
    if not source or not target:
        raise _RecordFault("empty relationship endpoint")
    if name_key(source) == name_key(target):
        raise _RecordFault(f"self relationship on {source!r}")
    raw_strength = _clean_field(fields[5])
    try:
        strength = float(raw_strength)
    except ValueError:
        raise _RecordFault(f"strength {raw_strength!r} is not a number")
    if not math.isfinite(strength):
        raise _RecordFault(f"strength {raw_strength!r} is not finite")
    return RelationRec(
        source=source,
        target=target,
        description=_clean_field(fields[3]),
        keywords=_split_keywords(fields[4]),
        strength=strength,
    )


def _parse_record(
    piece: str, config: DelimiterConfig, schema: EgocentricSchema, warnings: List[str]
) -> ExtractionRecord:
    body = piece.strip()
    if len(body) < 2 or body[0] != "(" or body[-1] != ")":
        raise _RecordFault("record is not parenthesized")
    fields = body[1:-1].split(config.tuple_delimiter)
    tag = fields[0].strip()
    if len(tag) < 2 or tag[0] != '"' or tag[-1] != '"':
        raise _RecordFault("record tag is not quoted")
    try:
        kind = RecordKind(tag[1:-1].strip().lower())
    except ValueError:
        raise _RecordFault(f"unknown record tag {tag}")
    if len(fields) != RECORD_ARITY[kind]:
        raise _RecordFault(
            f"{kind.value} record has {len(fields) - 1} fields, expected {RECORD_ARITY[kind] - 1}"
        )
    if kind == RecordKind.ENTITY:
        return _parse_entity(fields, schema, warnings)
    if kind == RecordKind.RELATIONSHIP:
        return _parse_relation(fields)
    return KeywordsRec(keywords=_split_keywords(fields[1]))


def split_records(text: str, config: DelimiterConfig) -> List[str]:
    """Non-blank record pieces up to the completion delimiter."""
    body = text.split(config.completion_delimiter, 1)[0]
    return [piece for piece in body.split(config.record_delimiter) if piece.strip()]


def parse_extraction_output(
    text: str, config: DelimiterConfig, schema: EgocentricSchema
) -> ExtractionParseResult:
    result = ExtractionParseResult()
    for index, piece in enumerate(split_records(text, config)):
        warnings: List[str] = []
        try:
            record = _parse_record(piece, config, schema, warnings)
        except _RecordFault as fault:
            result.faults.append(
                ParseFault(
                    record_index=index, reason=str(fault), snippet=piece.strip()[:SNIPPET_LENGTH]
                )
            )
            continue
        result.records.append(record)
        result.warnings.extend(
            ParseFault(record_index=index, reason=reason, snippet=piece.strip()[:SNIPPET_LENGTH])
            for reason in warnings
        )
    if result.faults:
        logger.debug(f"Dropped {len(result.faults)} malformed extraction records")
    return result


def _check_field(
    name: str,
    value: str,
    forbidden: List[str],
    canonical: Callable[[str], str] = _clean_field,
    required: bool = False,
) -> str:
    """Reject values the parser would not read back unchanged."""
    if any(token in value for token in forbidden):
        raise RecordSerializationException(name, value)
    if canonical(value) != value:
        raise RecordSerializationException(name, value, "has surrounding quotes or whitespace")
    if required and not value:
        raise RecordSerializationException(name, value, "is empty")
    return value


def _check_keywords(keywords: List[str], forbidden: List[str]) -> List[str]:
    return [_check_field("keywords", kw, forbidden + [","], required=True) for kw in keywords]


def serialize_record(record: ExtractionRecord, config: DelimiterConfig) -> str:
    """Render one record in the delimiter format; inverse of the parser."""
    forbidden = config.all()
    sep = config.tuple_delimiter
    if isinstance(record, EntityRec):
        pairs = []
        for key, value in record.attributes.items():
            _check_field(f"attributes.{key}", value, forbidden + ["|"], required=True)
            if value.lower() == MISSING_VALUE.lower():
                raise RecordSerializationException(
                    f"attributes.{key}", value, "is the missing marker"
                )
            pairs.append(f"{key}:{value}")
        fields = [
            _check_field("name", record.name, forbidden, normalize_name, required=True),
            record.entity_type.value,
            _check_field("description", record.description, forbidden),
            "|".join(pairs),
        ]
    elif isinstance(record, RelationRec):
        keywords = _check_keywords(record.keywords, forbidden)
        fields = [
            _check_field("source", record.source, forbidden, normalize_name, required=True),
            _check_field("target", record.target, forbidden, normalize_name, required=True),
            _check_field("description", record.description, forbidden),
            ", ".join(keywords),
            repr(float(record.strength)),
        ]
    else:
        keywords = _check_keywords(record.keywords, forbidden)
        fields = [", ".join(keywords)]
    tag = f'"{record.kind.value}"'
    return "(" + sep.join([tag] + fields) + ")"


def serialize_records(records: List[ExtractionRecord], config: DelimiterConfig) -> str:
    body = f"\n{config.record_delimiter}\n".join(serialize_record(r, config) for r in records)
    return f"{body}\n{config.completion_delimiter}"
