import json
import logging
import re
from typing import List, Optional

from app.prompts import format_prompt
from app.prompts.keyword_prompts import KEYWORD_EXTRACTION_PROMPT
from app.schemas.retrieval import KeywordResult
from app.services.llm_clients import CompletionClient
from app.utils.exceptions import ClientFailureException

logger = logging.getLogger(__name__)

# fmt: off
STOPWORDS = {
    "a", "about", "after", "again", "all", "am", "an", "and", "any", "are", "as", "at", "be",
    "been", "before", "being", "but", "by", "can", "could", "did", "do", "does", "doing",
    "during", "each", "first", "for", "from", "had", "has", "have", "he", "her", "hers", "him",
    "his", "how", "i", "if", "in", "into", "is", "it", "its", "last", "many", "me", "most",
    "much", "my", "of", "on", "or", "our", "she", "should", "so", "some", "than", "that", "the",
    "their", "them", "then", "there", "these", "they", "this", "those", "time", "times", "to",
    "usually", "was", "we", "were", "what", "when", "where", "which", "while", "who", "whom",
    "why", "will", "with", "would", "you", "your",
}
# fmt: on

_QUOTED = re.compile(r"\"([^\"]+)\"|'([^']+)'")
_TOKEN = re.compile(r"[A-Za-z0-9][A-Za-z0-9'\-]*")


def _add(target: List[str], value: str):
    if value and value not in target:
        target.append(value)


def heuristic_keywords(query: str) -> KeywordResult:
    """Quoted phrases, capitalized runs and multi-word content runs are low level;
    remaining single content words are high level."""
    high: List[str] = []
    low: List[str] = []
    for match in _QUOTED.finditer(query):
        _add(low, (match.group(1) or match.group(2)).strip())
    unquoted = _QUOTED.sub(" . ", query)

    run: List[str] = []
    capitalized: List[str] = []

    def flush_run():
        if len(run) > 1:
            _add(low, " ".join(run))
        elif run:
            _add(high, run[0])
        run.clear()

    def flush_capitalized():
        if capitalized:
            _add(low, " ".join(capitalized))
        capitalized.clear()

    for piece in re.split(r"([,.;:?!()])", unquoted):
        for token in _TOKEN.findall(piece):
            lowered = token.lower()
            if lowered in STOPWORDS or len(lowered) < 2:
                flush_run()
                flush_capitalized()
            elif token[0].isupper():
                flush_run()
                capitalized.append(token)
            else:
                flush_capitalized()
                run.append(lowered)
        flush_run()
        flush_capitalized()
    return KeywordResult(high_level=high, low_level=low)


def _parse_reply(reply: str) -> Optional[KeywordResult]:
    start, end = reply.find("{"), reply.rfind("}")
    if start < 0 or end <= start:
        return None
    try:
        obj = json.loads(reply[start : end + 1])
    except json.JSONDecodeError:
        return None
    if not isinstance(obj, dict):
        return None
    lists = []
    for key in ("high_level_keywords", "low_level_keywords"):
        values = obj.get(key, [])
        if not isinstance(values, list):
            return None
        lists.append([str(v).strip() for v in values if str(v).strip()])
    return KeywordResult(high_level=lists[0], low_level=lists[1])


def extract_keywords(query: str, client: Optional[CompletionClient] = None) -> KeywordResult:
    if not query.strip():
        return KeywordResult()
    if client is None:
        return heuristic_keywords(query)
    try:
        reply = client.complete(format_prompt(KEYWORD_EXTRACTION_PROMPT, query=query))
    except ClientFailureException as e:
        logger.warning(f"Keyword client failed, using heuristic keywords: {e.message}")
        return heuristic_keywords(query).model_copy(update={"fallback": True})
    parsed = _parse_reply(reply)
    if parsed is None:
        logger.warning("Keyword client reply was not a keyword object, using heuristic keywords")
        return heuristic_keywords(query).model_copy(update={"fallback": True})
    return parsed
