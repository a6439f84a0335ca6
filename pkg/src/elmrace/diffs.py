"""Strict unified-diff parsing and application.

The parser accepts exactly: an optional ``---``/``+++`` file header pair,
then one or more ``@@ -start[,count] +start[,count] @@`` hunks in ascending,
non-overlapping order whose body line counts match the header counts.
Anything else — trailing garbage, bad prefixes, count mismatches — is a
`DiffParseError`.

Application is context-exact: every context and deletion line must match the
source at its stated position byte for byte (including presence of a trailing
newline, via the ``\\ No newline at end of file`` marker).  A mismatch raises
`DiffApplyError`.  There is no fuzz and no searching.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

_HUNK_RE = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@(?: .*)?$")
_NO_NEWLINE = "\\ No newline at end of file"


class DiffError(Exception):
    """Base class for diff failures."""


class DiffParseError(DiffError):
    def __init__(self, message: str, line_no: int) -> None:
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class DiffApplyError(DiffError):
    pass


@dataclass(frozen=True)
class HunkLine:
    op: str            # " ", "-" or "+"
    text: str          # content without the newline
    newline: bool = True


@dataclass(frozen=True)
class Hunk:
    old_start: int
    old_count: int
    new_start: int
    new_count: int
    lines: tuple[HunkLine, ...]


@dataclass(frozen=True)
class UnifiedDiff:
    old_name: str | None
    new_name: str | None
    hunks: tuple[Hunk, ...]


def parse_unified_diff(text: str) -> UnifiedDiff:
    if text.strip() == "":
        # the empty diff is the identity patch
        return UnifiedDiff(None, None, ())
    lines = text.split("\n")
    # a single trailing newline leaves one empty tail element; drop it
    if lines and lines[-1] == "":
        lines.pop()
    i = 0
    old_name = new_name = None
    if i < len(lines) and lines[i].startswith("--- "):
        old_name = lines[i][4:]
        i += 1
        if i >= len(lines) or not lines[i].startswith("+++ "):
            raise DiffParseError("'---' header without matching '+++'", i + 1)
        new_name = lines[i][4:]
        i += 1
    hunks: list[Hunk] = []
    prev_old_end = 0
    while i < len(lines):
        m = _HUNK_RE.match(lines[i])
        if not m:
            raise DiffParseError(f"expected hunk header, got {lines[i]!r}", i + 1)
        header_line = i + 1
        old_start = int(m.group(1))
        old_count = int(m.group(2)) if m.group(2) is not None else 1
        new_start = int(m.group(3))
        new_count = int(m.group(4)) if m.group(4) is not None else 1
        if old_start == 0 and old_count != 0:
            raise DiffParseError("old start 0 requires an empty old range", header_line)
        if new_start == 0 and new_count != 0:
            raise DiffParseError("new start 0 requires an empty new range", header_line)
        i += 1
        body: list[HunkLine] = []
        seen_old = seen_new = 0
        while i < len(lines) and (seen_old < old_count or seen_new < new_count):
            raw = lines[i]
            if raw == _NO_NEWLINE:
                if not body:
                    raise DiffParseError("newline marker before any hunk line", i + 1)
                body[-1] = HunkLine(body[-1].op, body[-1].text, newline=False)
                i += 1
                continue
            if raw == "":
                op, content = " ", ""   # tolerate stripped empty context lines
            else:
                op, content = raw[0], raw[1:]
            if op == " ":
                seen_old += 1
                seen_new += 1
            elif op == "-":
                seen_old += 1
            elif op == "+":
                seen_new += 1
            else:
                raise DiffParseError(f"bad hunk line prefix {raw[0]!r}", i + 1)
            body.append(HunkLine(op, content))
            i += 1
        # trailing no-newline marker for the hunk's last line
        if i < len(lines) and lines[i] == _NO_NEWLINE:
            if not body:
                raise DiffParseError("newline marker before any hunk line", i + 1)
            body[-1] = HunkLine(body[-1].op, body[-1].text, newline=False)
            i += 1
        if seen_old != old_count or seen_new != new_count:
            raise DiffParseError(
                f"hunk body has {seen_old}/{seen_new} old/new lines, "
                f"header promised {old_count}/{new_count}",
                header_line,
            )
        effective_start = old_start if old_count > 0 else old_start + 1
        if effective_start <= prev_old_end:
            raise DiffParseError("hunks overlap or are out of order", header_line)
        prev_old_end = old_start + old_count - 1 if old_count > 0 else old_start
        hunks.append(Hunk(old_start, old_count, new_start, new_count, tuple(body)))
    if not hunks:
        raise DiffParseError("no hunks found", len(lines) + 1)
    return UnifiedDiff(old_name, new_name, tuple(hunks))


def _source_lines(source: str) -> list[str]:
    """Split into lines that keep their trailing newline (last may lack one)."""
    return source.splitlines(keepends=True) if source else []


def _render(line: HunkLine) -> str:
    return line.text + ("\n" if line.newline else "")


def apply_diff(source: str, diff: UnifiedDiff) -> str:
    src = _source_lines(source)
    out: list[str] = []
    cursor = 0  # index into src of the next line not yet consumed
    for hunk in diff.hunks:
        # position of the first old line this hunk touches (0-based); a pure
        # insertion at old_start=N goes after line N
        anchor = hunk.old_start - 1 if hunk.old_count > 0 else hunk.old_start
        if anchor < cursor or anchor > len(src):
            raise DiffApplyError(f"hunk at -{hunk.old_start} out of range")
        out.extend(src[cursor:anchor])
        cursor = anchor
        for line in hunk.lines:
            if line.op == "+":
                out.append(_render(line))
                continue
            if cursor >= len(src):
                raise DiffApplyError(
                    f"hunk at -{hunk.old_start} runs past end of source"
                )
            if src[cursor] != _render(line):
                raise DiffApplyError(
                    f"context mismatch at source line {cursor + 1}: "
                    f"expected {_render(line)!r}, found {src[cursor]!r}"
                )
            if line.op == " ":
                out.append(src[cursor])
            cursor += 1
    out.extend(src[cursor:])
    return "".join(out)


def apply_diff_text(source: str, diff_text: str) -> str:
    """Parse then apply; any `DiffError` means the diff is not valid for `source`."""
    return apply_diff(source, parse_unified_diff(diff_text))
