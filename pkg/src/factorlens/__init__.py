"""Correspondence analysis with supplementary points, Ward and EII-mixture
clustering of the factor coordinates, and file reports."""

__version__ = "0.1.0"

from .ca_engine import (  # noqa: E402
    CaResult,
    SupplementaryPoint,
    analyze,
    chi2_row_distance,
    contributions,
    cos2,
    inertia_percent,
    project_supplementary,
)
from .data_table import (  # noqa: E402
    ClusterScenario,
    DataTable,
    Profile,
    RoleAssignment,
    TableError,
    column_profile,
    load_csv,
    finance_scenario,
    row_profile,
    save_csv,
    synth_fixture,
)

__all__ = [
    "CaResult",
    "ClusterScenario",
    "DataTable",
    "Profile",
    "RoleAssignment",
    "SupplementaryPoint",
    "TableError",
    "analyze",
    "chi2_row_distance",
    "column_profile",
    "contributions",
    "cos2",
    "inertia_percent",
    "load_csv",
    "finance_scenario",
    "project_supplementary",
    "row_profile",
    "save_csv",
    "synth_fixture",
]
