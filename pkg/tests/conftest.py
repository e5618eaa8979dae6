import pytest

from dpfed.costmodel import PublicInfo
from dpfed.relational import build_dag
from dpfed.sensitivity import SensitivityConfig, propagate_sensitivity
from dpfed.synthetic import gen_synthetic, health_spec


@pytest.fixture(scope="session")
def health():
    """The n = 256, selectivity 0.1, m = 4 health tables and their declared bounds."""
    db, catalog = gen_synthetic(health_spec(256, 0.1, 4))
    return db, catalog["multiplicities"]


@pytest.fixture(scope="session")
def small_health():
    db, catalog = gen_synthetic(health_spec(32, 0.25, 2, seed=3))
    return db, catalog["multiplicities"]


def annotate(query, db, multiplicities):
    """Bind a query document, fill sensitivities and return it with the public info."""
    dag = build_dag(query, db.schemas)
    dag = propagate_sensitivity(dag, SensitivityConfig(multiplicities, db.table_sizes))
    return dag, PublicInfo.from_database(db)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
