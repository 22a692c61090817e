from enum import Enum


class EntityType(Enum):
    PERSON = "person"
    LOCATION = "location"
    OBJECT = "object"
    EVENT = "event"


class RelativeKind(Enum):
    YESTERDAY = "yesterday"
    TODAY = "today"
    LAST_TIME = "last_time"
    FIRST_TIME = "first_time"
    AGO = "ago"


class DayPart(Enum):
    NIGHT = "night"
    MORNING = "morning"
    AFTERNOON = "afternoon"
    EVENING = "evening"


class RecordKind(Enum):
    ENTITY = "entity"
    RELATIONSHIP = "relationship"
    CONTENT_KEYWORDS = "content_keywords"


class ElementKind(Enum):
    NODE = "node"
    EDGE = "edge"
    CHUNK = "chunk"


class ExportFormat(Enum):
    JSONL = "jsonl"
    DOT = "dot"
    CYPHER = "cypher"


class StructuredKind(Enum):
    FIRST_OCCURRENCE = "first_occurrence"
    LAST_OCCURRENCE = "last_occurrence"
    COUNT_OCCURRENCES = "count_occurrences"
    WHERE_LAST_SEEN = "where_last_seen"
    USUAL_VALUE = "usual_value"
    AFTER_EVENT = "after_event"


class AnswerPath(Enum):
    STRUCTURED = "structured"
    DELEGATED = "delegated"


class AnswerConfidence(Enum):
    RESOLVED = "resolved"
    DELEGATED = "delegated"
    UNANSWERABLE = "unanswerable"


class QuestionCategory(Enum):
    ENTITY_LOG = "EntityLog"
    EVENT_RECALL = "EventRecall"
    HABIT_INSIGHT = "HabitInsight"
    TASK_DEPENDENCY = "TaskDependency"
    ENTITY_TRACKING = "EntityTracking"


class ClientProvider(Enum):
    MOCK = "mock"
    OPENAI = "openai"
