"""Stdin helpers for commands that accept a piped page dump.

This is the input-side companion to :mod:`lib.output`, which reconfigures
``stdout`` / ``stderr`` to UTF-8 on Windows at import time. ``sys.stdin``'s
text decoder is fixed at interpreter startup, so the only reliable fix on
the input side is to read through our own UTF-8 decoder wrapped around
``sys.stdin.buffer``.
"""

import io
import sys

# Accessibility dumps of long listing pages run to a few hundred KB.
MAX_STDIN_CHARS = 4_000_000


class InputTooLarge(ValueError):
    """Piped input exceeded the character cap."""


def read_stdin_utf8(max_chars: int | None = None) -> str:
    """Read piped stdin as text, forcing UTF-8 regardless of host locale.

    Args:
        max_chars: Optional cap on the number of decoded characters to read.
            ``None`` reads until EOF.

    Returns:
        The decoded text, with universal newline translation applied
        (``\\r\\n`` / ``\\r`` → ``\\n``).

    Raises:
        UnicodeDecodeError: if the stdin bytes are not valid UTF-8.

    ``read(max_chars)`` on the wrapper returns whole characters, so the cap
    never splits a multi-byte sequence. ``detach()`` releases
    ``sys.stdin.buffer`` without closing it.
    """
    wrapper = io.TextIOWrapper(sys.stdin.buffer, encoding="utf-8")
    try:
        if max_chars is None:
            return wrapper.read()
        return wrapper.read(max_chars)
    finally:
        wrapper.detach()


def read_dump(source: str, max_chars: int = MAX_STDIN_CHARS) -> str:
    """Read a page dump from a file path, or from stdin when ``source`` is ``-``.

    Raises:
        InputTooLarge: if stdin holds more than ``max_chars`` characters.
    """
    if source != "-":
        with open(source, encoding="utf-8") as f:
            return f.read()
    text = read_stdin_utf8(max_chars + 1)
    if len(text) > max_chars:
        raise InputTooLarge(f"Input exceeds {max_chars} characters")
    return text
