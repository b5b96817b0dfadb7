import os

import pytest

os.environ.setdefault("SOURCE_DATE_EPOCH", "1700000000")

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::" not in report.nodeid:
        return
    if report.when == "call" or report.outcome != "passed":
        # parametrized cases roll up into one line per criterion
        name = report.nodeid.split("::")[-1].split("[")[0]
        ok = report.outcome == "passed" and _ACCEPTANCE.get(name, True)
        _ACCEPTANCE[name] = ok


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        label = name.removeprefix("test_").replace("_", " ")
        tr.write_line(f"{'PASS' if _ACCEPTANCE[name] else 'FAIL'}  {label}")


@pytest.fixture
def cli(tmp_path, monkeypatch):
    """Run the CLI in-process; returns (exit code, stdout, stderr)."""
    from qpic.cli import main

    def run(*argv):
        import io
        from contextlib import redirect_stderr, redirect_stdout

        out, err = io.StringIO(), io.StringIO()
        with redirect_stdout(out), redirect_stderr(err):
            try:
                code = main([str(a) for a in argv])
            except SystemExit as exc:
                code = exc.code
        return code, out.getvalue(), err.getvalue()

    return run
