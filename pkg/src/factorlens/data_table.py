"""Entity x attribute tables with active/supplementary role tags.

A :class:`DataTable` holds every entity (row) and attribute (column) read
from a CSV file together with a role tag for each. Only the block of active
rows x active columns enters the correspondence analysis; supplementary
rows and columns are carried along so they can be projected afterwards.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

ACTIVE = "active"
SUPPLEMENTARY = "supplementary"

_MISSING = {"", "na", "nan", "n/a", "null", "-"}


class TableError(ValueError):
    """Raised when a table cannot be read or fails validation."""


@dataclass(frozen=True)
class RoleAssignment:
    """Which columns (and rows) are active or supplementary.

    ``active=None`` means every column not listed as supplementary is active.
    """

    active: tuple[str, ...] | None = None
    supplementary: tuple[str, ...] = ()
    supplementary_rows: tuple[str, ...] = ()
    full_names: bool = False

    def __post_init__(self):
        if self.active is not None:
            object.__setattr__(self, "active", tuple(self.active))
        object.__setattr__(self, "supplementary", tuple(self.supplementary))
        object.__setattr__(self, "supplementary_rows", tuple(self.supplementary_rows))
        if self.active is not None:
            both = sorted(set(self.active) & set(self.supplementary))
            if both:
                raise TableError(
                    f"columns listed as both active and supplementary: {', '.join(both)}"
                )


@dataclass(frozen=True, eq=False)
class DataTable:
    """Validated, read-only entity x attribute table.

    Attributes
    ----------
    entity_labels : tuple of (short_label, full_name)
    attribute_labels : tuple of str
    values : ndarray, shape (n_entities, n_attributes)
        NaN marks a missing supplementary cell.
    attribute_roles, entity_roles : tuple of {"active", "supplementary"}
    warnings : tuple of str
        Diagnostics recorded during cleaning (dropped rows, skipped columns).
    ground_truth : tuple of int, optional
        Planted group of each entity, set only by :func:`synth_fixture`.
    """

    entity_labels: tuple[tuple[str, str], ...]
    attribute_labels: tuple[str, ...]
    values: np.ndarray
    attribute_roles: tuple[str, ...]
    entity_roles: tuple[str, ...]
    warnings: tuple[str, ...] = ()
    ground_truth: tuple[int, ...] | None = None
    _active_rows: np.ndarray = field(init=False, repr=False)
    _active_cols: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(
            self, "entity_labels", tuple((str(a), str(b)) for a, b in self.entity_labels)
        )
        object.__setattr__(self, "attribute_labels", tuple(map(str, self.attribute_labels)))
        object.__setattr__(self, "attribute_roles", tuple(self.attribute_roles))
        object.__setattr__(self, "entity_roles", tuple(self.entity_roles))
        object.__setattr__(self, "warnings", tuple(self.warnings))
        rows = np.flatnonzero([r == ACTIVE for r in self.entity_roles])
        cols = np.flatnonzero([r == ACTIVE for r in self.attribute_roles])
        rows.setflags(write=False)
        cols.setflags(write=False)
        object.__setattr__(self, "_active_rows", rows)
        object.__setattr__(self, "_active_cols", cols)
        self._validate()

    def _validate(self):
        n, m = self.values.shape
        if len(self.entity_labels) != n or len(self.entity_roles) != n:
            raise TableError("entity labels/roles do not match the number of rows")
        if len(self.attribute_labels) != m or len(self.attribute_roles) != m:
            raise TableError("attribute labels/roles do not match the number of columns")
        for role in (*self.entity_roles, *self.attribute_roles):
            if role not in (ACTIVE, SUPPLEMENTARY):
                raise TableError(f"unknown role {role!r}")
        shorts = [s for s, _ in self.entity_labels]
        if len(set(shorts)) != len(shorts):
            dup = sorted({s for s in shorts if shorts.count(s) > 1})
            raise TableError(f"duplicate entity labels: {', '.join(dup)}")
        if len(set(self.attribute_labels)) != m:
            raise TableError("duplicate attribute labels")
        if len(self._active_rows) < 2 or len(self._active_cols) < 2:
            raise TableError("need at least 2 active rows and 2 active columns")
        act_cols = self.values[:, self._active_cols]
        if np.isnan(act_cols).any():
            raise TableError("missing value in an active column")
        if not np.isfinite(act_cols).all():
            raise TableError("non-finite value in an active column")
        if (act_cols < 0).any():
            raise TableError("negative active value")
        block = self.active_block
        for i, row in zip(self._active_rows, block):
            if not math.fsum(row) > 0:
                raise TableError(f"empty active row: {self.entity_labels[i][0]}")
        for j, col in zip(self._active_cols, block.T):
            if not math.fsum(col) > 0:
                raise TableError(f"empty active column: {self.attribute_labels[j]}")
        if self.ground_truth is not None and len(self.ground_truth) != n:
            raise TableError("ground truth length does not match the number of rows")

    # -- views ---------------------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def short_labels(self) -> tuple[str, ...]:
        return tuple(s for s, _ in self.entity_labels)

    @property
    def active_rows(self) -> np.ndarray:
        return self._active_rows

    @property
    def active_cols(self) -> np.ndarray:
        return self._active_cols

    @property
    def active_block(self) -> np.ndarray:
        """Active rows x active columns, the only cells that define the metric."""
        return self.values[np.ix_(self._active_rows, self._active_cols)]

    @property
    def grand_total(self) -> float:
        return math.fsum(self.active_block.ravel())

    @property
    def active_row_labels(self) -> tuple[str, ...]:
        return tuple(self.entity_labels[i][0] for i in self._active_rows)

    @property
    def active_col_labels(self) -> tuple[str, ...]:
        return tuple(self.attribute_labels[j] for j in self._active_cols)

    @property
    def supplementary_col_labels(self) -> tuple[str, ...]:
        return tuple(
            a for a, r in zip(self.attribute_labels, self.attribute_roles) if r == SUPPLEMENTARY
        )

    @property
    def supplementary_row_labels(self) -> tuple[str, ...]:
        return tuple(
            e[0] for e, r in zip(self.entity_labels, self.entity_roles) if r == SUPPLEMENTARY
        )

    def entity_index(self, label: str) -> int:
        try:
            return self.short_labels.index(label)
        except ValueError:
            raise KeyError(f"unknown entity {label!r}") from None

    def attribute_index(self, label: str) -> int:
        try:
            return self.attribute_labels.index(label)
        except ValueError:
            raise KeyError(f"unknown attribute {label!r}") from None

    def same_as(self, other: "DataTable") -> bool:
        """Content equality (labels, roles and values, NaN-aware)."""
        return (
            self.entity_labels == other.entity_labels
            and self.attribute_labels == other.attribute_labels
            and self.attribute_roles == other.attribute_roles
            and self.entity_roles == other.entity_roles
            and self.values.shape == other.values.shape
            and bool(np.array_equal(self.values, other.values, equal_nan=True))
        )


@dataclass(frozen=True)
class Profile:
    """A row or column divided by its total.

    ``parent_mass`` is the row (column) total over the grand total. It is
    ``None`` for supplementary profiles, which carry no mass.
    """

    weights: np.ndarray
    parent_mass: float | None


# -- profiles ----------------------------------------------------------------


def row_profile(t: DataTable, i: int) -> Profile:
    """Profile of entity ``i`` over the active columns."""
    n = t.shape[0]
    if not 0 <= i < n:
        raise IndexError(f"entity index {i} out of range [0, {n})")
    row = t.values[i, t.active_cols]
    total = math.fsum(row)
    if not total > 0:
        raise ValueError(f"zero row sum for entity {t.entity_labels[i][0]}")
    mass = total / t.grand_total if t.entity_roles[i] == ACTIVE else None
    return Profile(weights=row / total, parent_mass=mass)


def column_profile(t: DataTable, j: int) -> Profile:
    """Profile of attribute ``j`` over the active rows.

    Supplementary columns may hold negative entries; their profile is still
    defined as long as the total over active rows is positive.
    """
    m = t.shape[1]
    if not 0 <= j < m:
        raise IndexError(f"attribute index {j} out of range [0, {m})")
    col = t.values[t.active_rows, j]
    if np.isnan(col).any():
        raise ValueError(f"column {t.attribute_labels[j]!r} has missing values")
    total = math.fsum(col)
    if not total > 0:
        raise ValueError(f"nonpositive column total for {t.attribute_labels[j]!r}")
    mass = total / t.grand_total if t.attribute_roles[j] == ACTIVE else None
    return Profile(weights=col / total, parent_mass=mass)


# -- CSV ingestion -------------------------------------------------------------


def _parse_cell(text: str, where: str) -> float:
    s = text.strip()
    if s.lower() in _MISSING:
        return math.nan
    try:
        return float(s)
    except ValueError:
        raise TableError(f"malformed CSV: non-numeric value {text!r} at {where}") from None


def load_csv(path: str | Path, config: RoleAssignment | None = None) -> DataTable:
    """Read and validate a table.

    The first column holds entity short labels; with ``config.full_names``
    the second column holds full names. Remaining columns are numeric.

    Rows with a missing active value, and rows whose active cells are all
    zero, are dropped and reported in ``DataTable.warnings``. A supplementary
    column with missing values is kept but flagged; projecting it is refused.
    """
    config = config or RoleAssignment()
    path = Path(path)
    if not path.is_file():
        raise TableError(f"no such file: {path}")
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except (csv.Error, UnicodeDecodeError) as exc:
        raise TableError(f"malformed CSV: {exc}") from None
    rows = [r for r in rows if any(c.strip() for c in r)]
    if not rows:
        raise TableError("malformed CSV: missing header row")
    header = [h.strip() for h in rows[0]]
    n_lead = 2 if config.full_names else 1
    if len(header) <= n_lead:
        raise TableError("malformed CSV: header has no attribute columns")
    attrs = header[n_lead:]
    if len(set(attrs)) != len(attrs):
        raise TableError("malformed CSV: duplicate column names in header")

    named = set(config.supplementary) | set(config.active or ())
    unknown = sorted(named - set(attrs))
    if unknown:
        raise TableError(f"role assignment names unknown columns: {', '.join(unknown)}")
    supp = set(config.supplementary)
    if config.active is None:
        roles = [SUPPLEMENTARY if a in supp else ACTIVE for a in attrs]
        keep_cols = list(range(len(attrs)))
    else:
        wanted = set(config.active) | supp
        keep_cols = [j for j, a in enumerate(attrs) if a in wanted]
        roles = [ACTIVE if attrs[j] in config.active else SUPPLEMENTARY for j in keep_cols]
    attrs = [attrs[j] for j in keep_cols]

    labels: list[tuple[str, str]] = []
    data: list[list[float]] = []
    for lineno, r in enumerate(rows[1:], start=2):
        if len(r) != len(header):
            raise TableError(
                f"malformed CSV: line {lineno} has {len(r)} fields, expected {len(header)}"
            )
        short = r[0].strip()
        full = r[1].strip() if config.full_names else short
        cells = r[n_lead:]
        data.append([_parse_cell(cells[j], f"line {lineno}, column {header[n_lead + j]!r}")
                     for j in keep_cols])
        labels.append((short, full))

    shorts = [s for s, _ in labels]
    if len(set(shorts)) != len(shorts):
        dup = sorted({s for s in shorts if shorts.count(s) > 1})
        raise TableError(f"duplicate entity labels: {', '.join(dup)}")
    unknown_rows = sorted(set(config.supplementary_rows) - set(shorts))
    if unknown_rows:
        raise TableError(f"supplementary rows not in table: {', '.join(unknown_rows)}")

    values = np.array(data, dtype=np.float64).reshape(len(data), len(attrs))
    act = np.array([r == ACTIVE for r in roles])
    if (values[:, act] < 0).any():
        raise TableError("negative active value")

    warnings: list[str] = []
    keep = np.ones(len(labels), dtype=bool)
    sup_rows = set(config.supplementary_rows)
    for i, (short, _) in enumerate(labels):
        row = values[i, act]
        if np.isnan(row).any():
            keep[i] = False
            warnings.append(f"dropped row {short!r}: missing active value")
        elif short not in sup_rows and not math.fsum(row) > 0:
            keep[i] = False
            warnings.append(f"dropped row {short!r}: all active values are zero")
    for j in np.flatnonzero(~act):
        if np.isnan(values[keep, j]).any():
            warnings.append(f"projection skipped for column {attrs[j]!r}: missing values")
    for w in warnings:
        logger.warning(w)

    labels = [lab for lab, k in zip(labels, keep) if k]
    entity_roles = [SUPPLEMENTARY if s in sup_rows else ACTIVE for s, _ in labels]
    return DataTable(
        entity_labels=tuple(labels),
        attribute_labels=tuple(attrs),
        values=values[keep],
        attribute_roles=tuple(roles),
        entity_roles=tuple(entity_roles),
        warnings=tuple(warnings),
    )


def _fmt(x: float) -> str:
    if math.isnan(x):
        return ""
    if x == int(x) and abs(x) < 2**53:
        return str(int(x))
    return repr(float(x))


def save_csv(t: DataTable, path: str | Path, full_names: bool = False) -> None:
    """Write ``t`` so that :func:`load_csv` with the same roles reads it back unchanged."""
    path = Path(path)
    header = ["label"] + (["name"] if full_names else []) + list(t.attribute_labels)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for (short, full), row in zip(t.entity_labels, t.values):
            w.writerow([short] + ([full] if full_names else []) + [_fmt(x) for x in row])


def role_assignment_of(t: DataTable, full_names: bool = False) -> RoleAssignment:
    """The role assignment that reproduces ``t``'s roles on reload."""
    return RoleAssignment(
        active=t.active_col_labels,
        supplementary=t.supplementary_col_labels,
        supplementary_rows=t.supplementary_row_labels,
        full_names=full_names,
    )


def skipped_columns(t: DataTable) -> tuple[str, ...]:
    """Supplementary columns whose projection is skipped because of missing values."""
    sub = t.values[t.active_rows]
    return tuple(
        t.attribute_labels[j]
        for j, r in enumerate(t.attribute_roles)
        if r == SUPPLEMENTARY and np.isnan(sub[:, j]).any()
    )


# -- synthetic fixtures ------------------------------------------------------------

FINANCE_ACTIVE = (
    "Funding council grants",
    "Research grants and contracts",
    "Tuition fees",
    "Overseas fees",
    "Other income",
    "Endowment and investment income",
    "Total staff costs",
    "Total borrowing",
)
FINANCE_SUPPLEMENTARY = (
    "Net surplus as % of income",
    "Funding council grants as % of income",
    "Total staff costs as % of income",
    "Total borrowings as % of income",
)

# Composition templates over FINANCE_ACTIVE for the three planted groups.
_FINANCE_TEMPLATES = {
    "research": (0.17, 0.22, 0.07, 0.05, 0.07, 0.04, 0.34, 0.04),
    "teaching": (0.23, 0.02, 0.20, 0.04, 0.06, 0.02, 0.35, 0.08),
    "niche": (0.12, 0.03, 0.13, 0.07, 0.11, 0.02, 0.30, 0.22),
}


@dataclass(frozen=True)
class ClusterScenario:
    """Recipe for a table with planted groups.

    Each group has a composition template (a profile over the attributes).
    Entity profiles scatter isotropically around their template in the
    chi-squared metric with standard deviation ``noise`` per dimension.
    Without explicit templates, random ones are drawn so that templates sit
    about ``separation * noise`` apart.
    """

    group_sizes: tuple[int, ...]
    n_attributes: int = 8
    noise: float = 0.02
    separation: float = 10.0
    templates: tuple[tuple[float, ...], ...] | None = None
    attribute_names: tuple[str, ...] | None = None
    group_names: tuple[str, ...] | None = None
    mass_scale: float = 1e5
    supplementary: bool = False

    def __post_init__(self):
        object.__setattr__(self, "group_sizes", tuple(int(s) for s in self.group_sizes))
        if len(self.group_sizes) < 1:
            raise ValueError("need at least one group (k >= 1)")
        if any(s < 1 for s in self.group_sizes):
            raise ValueError("group sizes must be positive")
        if self.noise < 0:
            raise ValueError("noise level must be nonnegative")
        if self.n_attributes < 2:
            raise ValueError("need at least 2 attributes")
        if self.templates is not None:
            if len(self.templates) != len(self.group_sizes):
                raise ValueError("one template per group required")
            if any(len(tp) != self.n_attributes for tp in self.templates):
                raise ValueError("template length must equal n_attributes")
        if self.attribute_names is not None and len(self.attribute_names) != self.n_attributes:
            raise ValueError("attribute_names length must equal n_attributes")

    @property
    def k(self) -> int:
        return len(self.group_sizes)


def finance_scenario(n: int = 155, noise: float = 0.03) -> ClusterScenario:
    """Three planted groups over the eight financial attributes, plus the four
    derived percentage attributes as supplementary columns.

    Groups: research-heavy (~20%), teaching-led (~45%), and a borrowing-heavy
    business/niche group (rest).
    """
    n_research = round(0.2 * n)
    n_teaching = round(0.45 * n)
    sizes = (n_research, n_teaching, n - n_research - n_teaching)
    return ClusterScenario(
        group_sizes=sizes,
        n_attributes=len(FINANCE_ACTIVE),
        noise=noise,
        templates=tuple(_FINANCE_TEMPLATES.values()),
        attribute_names=FINANCE_ACTIVE,
        group_names=tuple(_FINANCE_TEMPLATES),
        supplementary=True,
    )


def _random_templates(scenario: ClusterScenario, centre: np.ndarray, rng) -> np.ndarray:
    s = np.sqrt(centre)
    radius = scenario.separation * scenario.noise / math.sqrt(2.0)
    out = []
    for _ in range(scenario.k):
        u = rng.standard_normal(scenario.n_attributes)
        u -= (u @ s) * s
        u /= np.linalg.norm(u)
        out.append(centre + s * radius * u if scenario.k > 1 else centre.copy())
    t = np.clip(np.array(out), 1e-3, None)
    return t / t.sum(axis=1, keepdims=True)


def synth_fixture(scenario: ClusterScenario, seed: int = 0) -> DataTable:
    """Generate a table with planted, recoverable groups.

    Deterministic for a fixed ``(scenario, seed)``. Entity ``E001`` onwards are
    emitted group by group; the planted group (1-based) of each entity is
    stored in ``DataTable.ground_truth``.
    """
    rng = np.random.default_rng(seed)
    sizes = np.array(scenario.group_sizes)
    if scenario.templates is None:
        templates = _random_templates(scenario, np.full(scenario.n_attributes, 1.0 / scenario.n_attributes), rng)
    else:
        templates = np.asarray(scenario.templates, dtype=np.float64)
        if (templates < 0).any():
            raise ValueError("templates must be nonnegative")
        templates = templates / templates.sum(axis=1, keepdims=True)
    # expected column margin; the metric the noise is isotropic in
    centre = (sizes[:, None] * templates).sum(axis=0) / sizes.sum()
    s = np.sqrt(centre)

    truth = np.repeat(np.arange(1, scenario.k + 1), sizes)
    n = len(truth)
    eps = rng.standard_normal((n, scenario.n_attributes)) * scenario.noise
    eps -= np.outer(eps @ s, s)
    prof = templates[truth - 1] + s * eps
    prof = np.clip(prof, 1e-4, None)
    prof /= prof.sum(axis=1, keepdims=True)
    mass = scenario.mass_scale * np.exp(0.5 * rng.standard_normal(n))
    values = np.round(mass[:, None] * prof)
    values[values.sum(axis=1) == 0, 0] = 1.0

    names = scenario.attribute_names or tuple(f"A{j + 1}" for j in range(scenario.n_attributes))
    roles = [ACTIVE] * scenario.n_attributes
    if scenario.supplementary:
        values, names, roles = _with_derived_columns(values, names, roles, rng)
    labels = tuple((f"E{i + 1:03d}", f"Entity {i + 1}") for i in range(n))
    return DataTable(
        entity_labels=labels,
        attribute_labels=tuple(names),
        values=values,
        attribute_roles=tuple(roles),
        entity_roles=(ACTIVE,) * n,
        ground_truth=tuple(int(g) for g in truth),
    )


def _with_derived_columns(values, names, roles, rng):
    """Append the four percentage-of-income attributes."""
    income = values[:, :6].sum(axis=1)
    staff, borrowing = values[:, 6], values[:, 7]
    other_costs = income * rng.uniform(0.30, 0.40, size=len(income))
    surplus = income - staff - other_costs
    derived = np.column_stack([
        100.0 * surplus / income,
        100.0 * values[:, 0] / income,
        100.0 * staff / income,
        100.0 * borrowing / income,
    ])
    derived = np.round(derived, 2)
    return (
        np.hstack([values, derived]),
        tuple(names) + FINANCE_SUPPLEMENTARY,
        list(roles) + [SUPPLEMENTARY] * len(FINANCE_SUPPLEMENTARY),
    )


def save_ground_truth(t: DataTable, path: str | Path) -> None:
    if t.ground_truth is None:
        raise ValueError("table carries no ground truth")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", "group"])
        for (short, _), g in zip(t.entity_labels, t.ground_truth):
            w.writerow([short, g])

