"""Markdown rendering for result tables and reference documents."""
from typing import List, Optional, Sequence

import markdown
from markdown.core import Markdown


class MarkdownConverter:
    """Renders Markdown tables and reports as HTML."""

    def __init__(self, extensions: Optional[List[str]] = None):
        """Initialize the markdown converter.

        Args:
            extensions: Markdown extensions to load. Defaults to tables and fenced code.
        """
        self.extensions = extensions or ["tables", "fenced_code"]
        self.md: Markdown = markdown.Markdown(extensions=self.extensions)

    def convert(self, content: str) -> str:
        """Convert markdown content to HTML.

        The converter is reset first, so one instance can render many
        documents.

        Args:
            content: The markdown content to convert.

        Returns:
            The HTML representation of the markdown content.
        """
        self.md.reset()
        result = self.md.convert(content)
        assert isinstance(result, str)  # Runtime check for mypy
        return result

    def reset(self) -> None:
        """Reset the markdown converter instance."""
        self.md.reset()

    @staticmethod
    def render_table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
        """Markdown pipe table for ``header`` and ``rows``."""
        lines = [
            "| " + " | ".join(header) + " |",
            "|" + "|".join("---" for _ in header) + "|",
        ]
        for row in rows:
            lines.append("| " + " | ".join(row) + " |")
        return "\n".join(lines) + "\n"
