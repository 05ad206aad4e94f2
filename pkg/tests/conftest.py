"""Shared fixtures: the worked five-transition protocol and tmp files."""

import pytest

from popproto import parse_protocol

# Five transitions over {d1,d2,d3} (drainable) and {g1,g2} (carriers).
# Declaration order matters: tests refer to transitions by this index.
WORKED_TEXT = """\
states: d1 d2 d3 g1 g2
transition: d1 d3 -> g1 d2
transition: g1 d2 -> g1 d3
transition: g1 d3 -> g1 g1
transition: g2 g2 -> g1 g1
transition: g1 g1 -> g2 g2
"""

# One state that can only be consumed two-at-a-time: no drain ordering.
UNORDERABLE_TEXT = """\
states: d1 g
transition: d1 d1 -> d1 g
"""


@pytest.fixture(scope="session")
def worked():
    return parse_protocol(WORKED_TEXT)


@pytest.fixture()
def worked_file(tmp_path):
    path = tmp_path / "worked.pp"
    path.write_text(WORKED_TEXT)
    return path


@pytest.fixture()
def unorderable_file(tmp_path):
    path = tmp_path / "unorderable.pp"
    path.write_text(UNORDERABLE_TEXT)
    return path
