"""
Декораторы для логирования операций
"""

import functools
import logging
import time
from typing import Callable, Any


logger = logging.getLogger("photonmux.actions")


def _describe(value: Any) -> str | None:
    """Краткое описание аргумента для строки лога"""
    short = getattr(value, "short", None)
    if callable(short):
        return short()
    if isinstance(value, (int, float, str)) and not isinstance(value, bool):
        return repr(value)
    if isinstance(value, (tuple, list)) and len(value) <= 8:
        return repr(tuple(value))
    return None


def log_action(func: Callable) -> Callable:
    @functools.wraps(func)
    def wrapper(*args, **kwargs) -> Any:
        action = func.__name__.upper()

        parts = []
        for value in args:
            text = _describe(value)
            if text is not None:
                parts.append(text)
        for key, value in kwargs.items():
            text = _describe(value)
            if text is not None:
                parts.append(f"{key}={text}")
        log_message = f"{action} {' '.join(parts)}".rstrip()

        started = time.perf_counter()
        try:
            result = func(*args, **kwargs)
            elapsed_ms = (time.perf_counter() - started) * 1000
            logger.info(f"{log_message} result=OK elapsed_ms={elapsed_ms:.1f}")
            return result
        except Exception as e:
            error_msg = str(e).replace("'", "")
            logger.error(f"{log_message} result=ERROR error='{error_msg}'")
            raise

    return wrapper
