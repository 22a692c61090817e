from app.models.enums import EntityType

# Attribute keys per entity type, in prompt-rendering order.
EGOCENTRIC_ATTRIBUTES = {
    EntityType.PERSON: [
        "name",
        "gender",
        "appearance",
        "preferences",
        "dislikes",
        "habits",
        "hometown",
    ],
    EntityType.LOCATION: ["name", "description"],
    EntityType.OBJECT: [
        "name",
        "type",
        "color",
        "size",
        "condition",
        "owner",
        "purchase_information",
    ],
    EntityType.EVENT: ["name", "description", "start_time", "subject", "object", "location"],
}

MISSING_VALUE = "None"
STUB_ENTITY_TYPE = EntityType.OBJECT
SUMMARY_CHUNK_ID = "summary"
