"""Tests for ``lib.input`` - the UTF-8 stdin reader and page-dump loading."""

import sys
from io import BytesIO
from unittest.mock import patch

import pytest

from lib.input import InputTooLarge, read_dump, read_stdin_utf8


def _fake_stdin(buffer_bytes: bytes, *, text_read_raises: bool = False):
    """Stand-in for ``sys.stdin`` whose ``.buffer`` exposes ``buffer_bytes``.

    With ``text_read_raises`` set, the text-mode ``.read()`` fails loudly, which
    proves the helper only touches ``.buffer``.
    """

    class _FakeStdin:
        buffer = BytesIO(buffer_bytes)
        encoding = "cp1252"  # simulate a Windows-misconfigured text wrapper

        def read(self, *_args, **_kwargs):
            if text_read_raises:
                raise AssertionError("read_stdin_utf8 must only read sys.stdin.buffer")
            return self.buffer.read().decode(self.encoding)

    return _FakeStdin()


class TestReadStdinUtf8:
    """``read_stdin_utf8`` must decode UTF-8 regardless of the host locale."""

    def test_returns_empty_string_for_empty_stdin(self):
        with patch.object(sys, "stdin", _fake_stdin(b"")):
            assert read_stdin_utf8() == ""

    def test_decodes_page_labels(self):
        payload = "RootWebArea [1] 'Projects · Dashboard · GitLab'\n\tlink [2] 'Größe → 5 €'"
        with patch.object(sys, "stdin", _fake_stdin(payload.encode("utf-8"))):
            assert read_stdin_utf8() == payload

    def test_max_chars_caps_read(self):
        with patch.object(sys, "stdin", _fake_stdin(b"abcdef")):
            assert read_stdin_utf8(max_chars=3) == "abc"

    def test_max_chars_counts_characters_not_bytes(self):
        """A multi-byte character at the cap must not be split mid-sequence."""
        payload = ("ä" * 200).encode("utf-8")
        with patch.object(sys, "stdin", _fake_stdin(payload)):
            result = read_stdin_utf8(max_chars=150)
        assert result == "ä" * 150

    def test_translates_windows_newlines(self):
        with patch.object(sys, "stdin", _fake_stdin(b"RootWebArea [1] 'a'\r\n\tlink [2] 'b'\r\n")):
            assert read_stdin_utf8() == "RootWebArea [1] 'a'\n\tlink [2] 'b'\n"

    def test_invalid_utf8_raises_unicode_decode_error(self):
        with patch.object(sys, "stdin", _fake_stdin(b"\xff\xfe\xfd")):
            with pytest.raises(UnicodeDecodeError):
                read_stdin_utf8()

    def test_does_not_touch_text_mode_stdin_read(self):
        payload = "Größe"
        with patch.object(sys, "stdin", _fake_stdin(payload.encode("utf-8"), text_read_raises=True)):
            assert read_stdin_utf8() == payload


class TestReadDump:
    def test_reads_file(self, tmp_path):
        path = tmp_path / "page.txt"
        path.write_text("RootWebArea [1] 'Ünïcode'", encoding="utf-8")
        assert read_dump(str(path)) == "RootWebArea [1] 'Ünïcode'"

    def test_dash_reads_stdin(self):
        with patch.object(sys, "stdin", _fake_stdin(b"RootWebArea [1] 'a'")):
            assert read_dump("-") == "RootWebArea [1] 'a'"

    def test_stdin_cap(self):
        with patch.object(sys, "stdin", _fake_stdin(b"x" * 11)):
            with pytest.raises(InputTooLarge, match="10 characters"):
                read_dump("-", max_chars=10)

    def test_stdin_exactly_at_cap(self):
        with patch.object(sys, "stdin", _fake_stdin(b"x" * 10)):
            assert read_dump("-", max_chars=10) == "x" * 10

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_dump(str(tmp_path / "absent.txt"))
