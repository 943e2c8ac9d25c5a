import re
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # makes builders importable

GOLDEN_DIR = Path(__file__).parent / "golden"

_ISLAND_RE = re.compile(
    r'<script id="flow-data" type="application/json">(.*?)</script>', re.S
)


def extract_island(html_text):
    """The JSON data island of a rendered Sankey document."""
    m = _ISLAND_RE.search(html_text)
    if m is None:
        raise AssertionError("no flow-data island in document")
    return m.group(1)


@pytest.fixture
def golden_dir():
    return GOLDEN_DIR
