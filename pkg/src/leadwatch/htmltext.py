"""HTML to plain text with boilerplate elements dropped."""

from __future__ import annotations

import re
from html.parser import HTMLParser

# content of these elements never reaches the output text
SKIP_TAGS = frozenset(
    {"script", "style", "noscript", "template", "nav", "header", "footer", "aside", "form", "svg", "iframe", "head"}
)
BLOCK_TAGS = frozenset(
    {
        "address", "article", "blockquote", "br", "dd", "div", "dl", "dt", "figcaption", "figure",
        "h1", "h2", "h3", "h4", "h5", "h6", "hr", "li", "main", "ol", "p", "pre", "section",
        "table", "tbody", "td", "th", "thead", "tr", "ul", "body", "html", "caption",
    }
)
VOID_TAGS = frozenset({"area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "source", "track", "wbr"})

_TAG_LIKE = re.compile(r"<(?=[^\W\d_]|[/!?])")


class _TextCollector(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        # open non-void elements; an end tag closes everything opened after its match
        self.open: list[str] = []
        self.skipping = 0
        self.lines: list[str] = []
        self.current: list[str] = []
        self.title_parts: list[str] | None = None
        self.title = ""
        self.h1_parts: list[str] | None = None
        self.first_h1 = ""

    def _break(self) -> None:
        line = " ".join("".join(self.current).split())
        if line:
            self.lines.append(line)
        self.current = []

    def handle_starttag(self, tag: str, attrs) -> None:
        if tag == "title" and not self.title:
            self.title_parts = []
        elif tag == "h1" and not self.first_h1 and self.h1_parts is None:
            self.h1_parts = []
        if tag == "body" and "head" in self.open:
            # </head> is optional in HTML
            self._close("head")
        if tag in BLOCK_TAGS and not self.skipping:
            self._break()
        if tag in VOID_TAGS:
            return
        self.open.append(tag)
        if tag in SKIP_TAGS:
            self.skipping += 1

    def handle_startendtag(self, tag: str, attrs) -> None:
        if tag in BLOCK_TAGS and not self.skipping:
            self._break()

    def _close(self, tag: str) -> None:
        idx = len(self.open) - 1 - self.open[::-1].index(tag)
        for t in self.open[idx:]:
            if t in SKIP_TAGS:
                self.skipping -= 1
        del self.open[idx:]

    def handle_endtag(self, tag: str) -> None:
        if tag == "title" and self.title_parts is not None:
            self.title = " ".join("".join(self.title_parts).split())
            self.title_parts = None
        elif tag == "h1" and self.h1_parts is not None:
            self.first_h1 = " ".join("".join(self.h1_parts).split())
            self.h1_parts = None
        if tag in self.open:
            self._close(tag)
        if tag in BLOCK_TAGS and not self.skipping:
            self._break()

    def handle_data(self, data: str) -> None:
        if self.title_parts is not None:
            self.title_parts.append(data)
        if self.h1_parts is not None:
            self.h1_parts.append(data)
        if not self.skipping:
            self.current.append(data)

    def close(self) -> None:
        super().close()
        self._break()
        if self.title_parts is not None:
            self.title = " ".join("".join(self.title_parts).split())
        if self.h1_parts is not None and not self.first_h1:
            self.first_h1 = " ".join("".join(self.h1_parts).split())


def _defang(text: str) -> str:
    return _TAG_LIKE.sub("< ", text)


def extract_text(html: str) -> tuple[str, str]:
    """Return ``(title, text)`` for an HTML document.

    Total: any string is accepted and malformed markup degrades gracefully.
    Block elements become line breaks; whitespace inside a line is collapsed.
    """
    if not html:
        return "", ""
    parser = _TextCollector()
    parser.feed(html)
    parser.close()
    title = parser.title or parser.first_h1
    return _defang(title), _defang("\n".join(parser.lines))


def word_count(text: str) -> int:
    return len(text.split())
