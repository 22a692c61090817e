from typing import Optional

from app.prompts.extraction_prompts import (
    DEFAULT_EXTRACTION_EXAMPLE,
    ENTITY_EXTRACTION_PROMPT_TEMPLATE,
)
from app.schemas.documents import Chunk
from app.schemas.extraction import DelimiterConfig, EgocentricSchema


def render_examples(config: DelimiterConfig, examples: Optional[str] = None) -> str:
    rendered = DEFAULT_EXTRACTION_EXAMPLE if examples is None else examples
    # only the delimiter placeholders are substituted; other braces stay literal
    for name in ("tuple_delimiter", "record_delimiter", "completion_delimiter"):
        rendered = rendered.replace("{" + name + "}", getattr(config, name))
    return rendered


def render_extraction_prompt(
    chunk: Chunk,
    schema: EgocentricSchema,
    config: DelimiterConfig,
    language: str = "English",
    examples: Optional[str] = None,
) -> str:
    # The anchor line lets the extractor ground start_time attributes.
    input_text = f"{chunk.anchor}\n{chunk.text}"
    return ENTITY_EXTRACTION_PROMPT_TEMPLATE.format(
        language=language,
        entity_types=", ".join(schema.type_names()),
        entity_attributes=schema.attributes_line(),
        tuple_delimiter=config.tuple_delimiter,
        record_delimiter=config.record_delimiter,
        completion_delimiter=config.completion_delimiter,
        examples=render_examples(config, examples),
        input_text=input_text,
    )
