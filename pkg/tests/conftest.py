import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dialfilter.corpus import Corpus, Utterance, UtterancePair  # noqa: E402

# criterion number -> (passed, detail); filled in by test_acceptance
ACCEPTANCE = {}


def make_pair(pid, x, y):
    return UtterancePair(pid, Utterance.from_text(x), Utterance.from_text(y))


def make_corpus(rows):
    return Corpus(tuple(make_pair(i, x, y) for i, (x, y) in enumerate(rows)))


@pytest.fixture
def toy_dir(tmp_path):
    """A private copy of the bundled toy dataset."""
    import shutil

    from dialfilter.synthetic import bundled_toy_dir

    dst = tmp_path / "toy"
    shutil.copytree(bundled_toy_dir(), dst)
    return dst


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {num}: {detail}")
