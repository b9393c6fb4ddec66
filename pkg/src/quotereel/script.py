"""Quote-encoded teaser scripts: parsing, validation, and serialization.

Two encodings exist. The direct-quote (DQ) form wraps quoted text in
`<SOQ>...<EOQ>` pairs; the indirect-quote (IDQ) form marks insertion points
with a bare `<QUOTE>` token that retrieval resolves later.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Union

from .errors import ParseError

SOQ = "<SOQ>"
EOQ = "<EOQ>"
QUOTE = "<QUOTE>"

DQ = "dq"
IDQ = "idq"

_DQ_MARKERS = (SOQ, EOQ)
_IDQ_MARKERS = (QUOTE,)


@dataclass(frozen=True)
class Narration:
    text: str


@dataclass(frozen=True)
class QuotePlaceholder:
    """The bare `<QUOTE>` token awaiting fulfillment. Carries no text."""


@dataclass(frozen=True)
class DirectQuote:
    text: str
    resolved_clip_id: Optional[str] = None


ScriptElement = Union[Narration, QuotePlaceholder, DirectQuote]


def _scan_markers(text: str, markers: tuple[str, ...]) -> list[tuple[int, int, str]]:
    """Recognized marker occurrences as (start, end, token), in order.

    An occurrence counts only when at least one side touches a boundary:
    string edge, whitespace, or another marker candidate. Occurrences buried
    inside a word (letters on both sides) stay literal text.
    """
    pattern = re.compile("|".join(re.escape(m) for m in markers))
    cands = [(m.start(), m.end(), m.group()) for m in pattern.finditer(text)]
    starts = {s for s, _, _ in cands}
    ends = {e for _, e, _ in cands}
    recognized = []
    for s, e, tok in cands:
        left = s == 0 or text[s - 1].isspace() or s in ends
        right = e == len(text) or text[e].isspace() or e in starts
        if left or right:
            recognized.append((s, e, tok))
    return recognized


def _dangerous_occurrence(text: str, markers: tuple[str, ...]) -> Optional[str]:
    """First marker in `text` that would re-tokenize after serialization.

    Serialization surrounds element texts with spaces or markers, so an
    occurrence is unsafe when either side is a text edge or whitespace.
    """
    pattern = re.compile("|".join(re.escape(m) for m in markers))
    for m in pattern.finditer(text):
        s, e = m.start(), m.end()
        left = s == 0 or text[s - 1].isspace()
        right = e == len(text) or text[e].isspace()
        if left or right:
            return m.group()
    return None


def _check_element_text(text: str, kind: str, encoding: str) -> None:
    if not text.strip():
        raise ValueError(f"{kind} text must be non-empty")
    # quotes only ever serialize in DQ form; narrations follow the script encoding
    markers = _DQ_MARKERS if kind == "direct quote" else (
        _DQ_MARKERS if encoding == DQ else _IDQ_MARKERS
    )
    bad = _dangerous_occurrence(text, markers)
    if bad is not None:
        raise ValueError(f"{kind} text contains reserved marker {bad}")


@dataclass(frozen=True)
class Script:
    """An ordered quote-encoded script for one documentary."""

    doc_id: str
    elements: tuple[ScriptElement, ...]
    encoding: str

    def __post_init__(self):
        if self.encoding not in (DQ, IDQ):
            raise ValueError(f"unknown encoding {self.encoding!r}")
        if not self.elements:
            raise ValueError("script must have at least one element")
        prev_was_narration = False
        for el in self.elements:
            if isinstance(el, Narration):
                if prev_was_narration:
                    raise ValueError("adjacent narrations must be merged")
                _check_element_text(el.text, "narration", self.encoding)
                prev_was_narration = True
                continue
            prev_was_narration = False
            if isinstance(el, QuotePlaceholder):
                if self.encoding == DQ:
                    raise ValueError("DQ scripts cannot contain quote placeholders")
            elif isinstance(el, DirectQuote):
                if self.encoding == IDQ and el.resolved_clip_id is None:
                    raise ValueError(
                        "IDQ scripts cannot carry direct quotes of unresolved origin"
                    )
                _check_element_text(el.text, "direct quote", self.encoding)
            else:
                raise ValueError(f"unknown element {el!r}")

    @classmethod
    def build(cls, doc_id: str, elements, encoding: str) -> "Script":
        """Construct a script, merging adjacent narrations with single spaces."""
        merged: list[ScriptElement] = []
        for el in elements:
            if (
                isinstance(el, Narration)
                and merged
                and isinstance(merged[-1], Narration)
            ):
                merged[-1] = Narration(merged[-1].text + " " + el.text)
            else:
                merged.append(el)
        return cls(doc_id=doc_id, elements=tuple(merged), encoding=encoding)


def _parse(text: str, doc_id: str, encoding: str) -> Script:
    if not text.strip():
        raise ParseError("empty script")
    markers = _DQ_MARKERS if encoding == DQ else _IDQ_MARKERS
    tokens = _scan_markers(text, markers)

    elements: list[ScriptElement] = []

    def flush_narration(lo: int, hi: int) -> None:
        chunk = text[lo:hi].strip()
        if chunk:
            elements.append(Narration(chunk))

    if encoding == IDQ:
        pos = 0
        for s, e, _tok in tokens:
            flush_narration(pos, s)
            elements.append(QuotePlaceholder())
            pos = e
        flush_narration(pos, len(text))
    else:
        pos = 0
        open_at: Optional[int] = None
        for s, e, tok in tokens:
            if tok == SOQ:
                if open_at is not None:
                    raise ParseError(f"nested {SOQ}", offset=s)
                flush_narration(pos, s)
                open_at = s
                pos = e
            else:
                if open_at is None:
                    raise ParseError(f"{EOQ} without matching {SOQ}", offset=s)
                body = text[pos:s].strip()
                if not body:
                    raise ParseError("empty quote body", offset=open_at)
                elements.append(DirectQuote(body))
                open_at = None
                pos = e
        if open_at is not None:
            raise ParseError(f"unbalanced {SOQ}", offset=open_at)
        flush_narration(pos, len(text))

    if not elements:
        raise ParseError("empty script")
    return Script(doc_id=doc_id, elements=tuple(elements), encoding=encoding)


def parse_dq(text: str, doc_id: str = "") -> Script:
    """Parse a direct-quote script: `<SOQ>...<EOQ>` pairs around quoted text.

    Markers must balance and never nest; an empty quote body is rejected.
    Errors carry the character offset of the offending marker.
    """
    return _parse(text, doc_id, DQ)


def parse_idq(text: str, doc_id: str = "") -> Script:
    """Parse an indirect-quote script: bare `<QUOTE>` placeholder tokens."""
    return _parse(text, doc_id, IDQ)


def serialize(script: Script, encoding: Optional[str] = None) -> str:
    """Render a script back to marker text.

    Defaults to the script's own encoding; pass DQ to re-wrap resolved quotes
    in `<SOQ>/<EOQ>`. Placeholders cannot serialize to DQ (they carry no
    text), and direct quotes cannot serialize to IDQ (the `<QUOTE>` token
    would drop their text).
    """
    target = script.encoding if encoding is None else encoding
    if target not in (DQ, IDQ):
        raise ValueError(f"unknown encoding {target!r}")
    target_markers = _DQ_MARKERS if target == DQ else _IDQ_MARKERS
    parts = []
    for i, el in enumerate(script.elements):
        if isinstance(el, Narration):
            bad = _dangerous_occurrence(el.text, target_markers)
            if bad is not None:
                raise ValueError(f"element {i}: narration contains reserved marker {bad}")
            parts.append(el.text)
        elif isinstance(el, QuotePlaceholder):
            if target == DQ:
                raise ValueError(f"element {i}: unresolved placeholder cannot serialize to DQ")
            parts.append(QUOTE)
        else:
            if target == IDQ:
                raise ValueError(f"element {i}: direct quote text cannot serialize to IDQ")
            parts.append(f"{SOQ}{el.text}{EOQ}")
    return " ".join(parts)


def count_quotes(script: Script) -> int:
    """Number of quote elements (placeholders plus direct quotes)."""
    return sum(
        1 for el in script.elements if isinstance(el, (QuotePlaceholder, DirectQuote))
    )
