import logging
from typing import Dict, Optional

from openai import OpenAI
from portkey_ai import PORTKEY_GATEWAY_URL, createHeaders

from app.config import ENV, OPENAI_API_KEY, PORTKEY_API_KEY
from app.utils.exceptions import ClientFailureException

logger = logging.getLogger(__name__)


def get_headers(role: str) -> Dict[str, str]:
    return createHeaders(
        api_key=PORTKEY_API_KEY,
        virtual_key=OPENAI_API_KEY,
        metadata={"env": ENV, "role": role},
    )


def get_openai_client(
    role: str, base_url: Optional[str] = None, timeout: float = 60.0, max_retries: int = 0
) -> OpenAI:
    """OpenAI client routed through the Portkey gateway when a Portkey key is configured."""
    if base_url:
        return OpenAI(
            api_key=OPENAI_API_KEY or "unused",
            base_url=base_url,
            timeout=timeout,
            max_retries=max_retries,
        )
    if PORTKEY_API_KEY:
        return OpenAI(
            api_key=OPENAI_API_KEY or "unused",
            base_url=PORTKEY_GATEWAY_URL,
            default_headers=get_headers(role),
            timeout=timeout,
            max_retries=max_retries,
        )
    if not OPENAI_API_KEY:
        raise ClientFailureException(f"{role}: OPENAI_API_KEY is not set")
    return OpenAI(api_key=OPENAI_API_KEY, timeout=timeout, max_retries=max_retries)
