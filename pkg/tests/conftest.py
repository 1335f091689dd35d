from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"
CORPUS3 = FIXTURES / "corpus3"
CORPUS5 = FIXTURES / "corpus5"
SEEDED = FIXTURES / "seeded"


def write_app(root: Path, name: str, files: dict[str, str], metadata: str | None = None,
              manifest: str | None = None) -> Path:
    app = root / name
    for rel, text in files.items():
        p = app / "src" / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)
    if metadata is not None:
        (app / "metadata").write_text(metadata)
    if manifest is not None:
        (app / "manifest").write_text(manifest)
    return app


@pytest.fixture
def tmp_corpus(tmp_path):
    return tmp_path / "corpus"


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
