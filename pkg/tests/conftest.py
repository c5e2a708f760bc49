from __future__ import annotations

import numpy as np
import pytest

from factorlens.data_table import ACTIVE, DataTable, finance_scenario, synth_fixture

_CRITERIA: list[tuple[str, bool]] = []


def pytest_runtest_logreport(report):
    name = dict(report.user_properties).get("criterion")
    if name is None:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        _CRITERIA.append((name, report.passed))


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok in _CRITERIA:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}")


@pytest.fixture(autouse=True)
def _record_criterion(request, record_property):
    m = request.node.get_closest_marker("criterion")
    if m is not None:
        record_property("criterion", m.args[0])


def make_table(values, col_roles=None, row_roles=None, cols=None, rows=None) -> DataTable:
    values = np.asarray(values, dtype=float)
    n, m = values.shape
    return DataTable(
        entity_labels=tuple(rows or [(f"R{i}", f"Row {i}") for i in range(n)]),
        attribute_labels=tuple(cols or [f"C{j}" for j in range(m)]),
        values=values,
        attribute_roles=tuple(col_roles or [ACTIVE] * m),
        entity_roles=tuple(row_roles or [ACTIVE] * n),
    )


@pytest.fixture(scope="session")
def finance_table() -> DataTable:
    return synth_fixture(finance_scenario(), seed=0)


@pytest.fixture
def diag2() -> DataTable:
    return make_table([[1, 0], [0, 1]])
