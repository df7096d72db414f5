import os
import sys

import pytest
from hypothesis import strategies as st

sys.path.insert(0, os.path.dirname(__file__))

KEY_POOL = [f"k{i:02d}" for i in range(12)] + ["1.1.1.1", "é", "日本", "Z"]

keys = st.sampled_from(KEY_POOL)
small_vals = st.integers(-4, 4).filter(lambda v: v != 0)
triple_lists = st.lists(st.tuples(keys, keys, small_vals), max_size=40)

ACCEPTANCE_LINES = []


@pytest.fixture
def tmp_tsv(tmp_path):
    return tmp_path / "edges.tsv"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
