import pytest

from irtestbed.analysis import AnalyzerConfig
from irtestbed.index import Document, build_index

PLAIN = AnalyzerConfig(lowercase=True, stopwords=frozenset(), stemmer="none")

TOY = {"d1": "a a b", "d2": "a c", "d3": "c c"}


@pytest.fixture
def plain():
    return PLAIN


@pytest.fixture
def toy_docs():
    return [Document(d, t) for d, t in TOY.items()]


@pytest.fixture
def toy_index(toy_docs):
    return build_index(toy_docs, PLAIN)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE: list[str] = []


def record_criterion(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title} ({detail})"
    ACCEPTANCE.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
