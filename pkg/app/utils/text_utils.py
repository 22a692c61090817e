import hashlib
import re
from typing import Iterable

_WHITESPACE = re.compile(r"\s+")
_SENTENCE_END = re.compile(r"(?<=[.!?])\s")
_WORD = re.compile(r"[0-9a-z]+(?:'[a-z]+)?")


def normalize_name(name: str) -> str:
    """Trim quotes and whitespace and collapse internal runs; casing is kept as emitted."""
    return _WHITESPACE.sub(" ", name.strip().strip('"').strip())


def name_key(name: str) -> str:
    return normalize_name(name).casefold()


def display_name(phrase: str) -> str:
    phrase = normalize_name(phrase)
    return phrase[:1].upper() + phrase[1:]


def stable_hash(*parts: str, length: int = 16) -> str:
    digest = hashlib.sha1("\x1f".join(parts).encode("utf-8")).hexdigest()
    return digest[:length]


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def first_sentence(text: str) -> str:
    text = text.strip()
    if not text:
        return ""
    return _SENTENCE_END.split(text, maxsplit=1)[0].strip()


def words(text: str) -> list:
    return _WORD.findall(text.lower())


def join_nonempty(parts: Iterable[str], separator: str = " ") -> str:
    return separator.join(part for part in parts if part)
