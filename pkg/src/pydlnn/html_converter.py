"""Reading tables back out of rendered HTML."""

from dataclasses import dataclass
from typing import List, Optional

from bs4 import BeautifulSoup


@dataclass
class HtmlTable:
    """One ``<table>`` with the heading that precedes it."""

    title: Optional[str]
    header: List[str]
    rows: List[List[str]]


class HtmlConverter:
    """Extracts tables from HTML produced by :class:`MarkdownConverter`."""

    HEADING_TAGS = ["h1", "h2", "h3", "h4"]

    @classmethod
    def extract_tables(cls, html_content: str) -> List[HtmlTable]:
        """Every table in document order.

        Args:
            html_content: The HTML content to scan

        Returns:
            Tables with cell text stripped of surrounding whitespace
        """
        soup = BeautifulSoup(html_content, "html.parser")
        tables = []
        for table in soup.find_all("table"):
            heading = table.find_previous(cls.HEADING_TAGS)
            header = [cls._cell_text(th) for th in table.find_all("th")]
            rows = []
            for tr in table.find_all("tr"):
                cells = [cls._cell_text(td) for td in tr.find_all("td")]
                if cells:
                    rows.append(cells)
            tables.append(
                HtmlTable(
                    title=heading.get_text(strip=True) if heading else None,
                    header=header,
                    rows=rows,
                )
            )
        return tables

    @staticmethod
    def _cell_text(element: BeautifulSoup) -> str:
        return element.get_text(" ", strip=True)
