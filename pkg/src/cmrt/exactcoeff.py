"""Exact rational coefficient tables for the reconstruction kernels.

Two families of odd polynomials on [0, 1] are generated by induction on the
order ``k``::

    A_{2k,2i}(t)     = sum_{j=1}^{k+i}   A_j(2k, 2i)     t^(2j-1),  0 <= i <= k
    B_{2k-1,2i-1}(t) = sum_{j=1}^{k+i-1} B_j(2k-1, 2i-1) t^(2j-1),  1 <= i <= k

Tables are keyed by ``(k, i)``: ``tables.a[k, i]`` holds the coefficient
tuple of ``A_{2k,2i}`` and ``tables.b[k, i]`` that of ``B_{2k-1,2i-1}``.
All arithmetic is exact (``fractions.Fraction``); floats appear only when a
kernel is handed to :mod:`cmrt.kernels`.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from fractions import Fraction
from types import MappingProxyType
from typing import Mapping

Rational = Fraction

DEFAULT_ORDER = 12

Key = tuple[int, int]
Coeffs = tuple[Fraction, ...]


class MissingEntryError(KeyError):
    """A required lower-order table entry is absent."""


# Low-order values as they are usually tabulated (strings, exact).
# B/5/3 is listed with a leading -2/3 there; the recurrence gives -5/3.
REFERENCE_VALUES: Mapping[str, tuple[str, ...]] = MappingProxyType({
    "B/1/1": ("-2",),
    "A/2/0": ("-4",),
    "A/2/2": ("-2", "2"),
    "B/3/1": ("6", "-12"),
    "B/3/3": ("1", "-2", "1"),
    "A/4/0": ("8", "-24"),
    "A/4/2": ("4", "-16", "12"),
    "A/4/4": ("1/3", "-1", "1", "-1/3"),
    "B/5/1": ("-10", "60", "-60"),
    "B/5/3": ("-2/3", "10", "-15", "20/3"),
    "B/5/5": ("-1/12", "1/3", "-1/2", "1/3", "-1/12"),
})

_DISCREPANCIES = (
    # (entry, 1-based coefficient index, tabulated value)
    ("B/5/3", 1, "-2/3"),
)


def a_label(k: int, i: int) -> str:
    return f"A/{2 * k}/{2 * i}"


def b_label(k: int, i: int) -> str:
    return f"B/{2 * k - 1}/{2 * i - 1}"


@dataclass(frozen=True, eq=False)
class CoeffTables:
    """Immutable A/B coefficient tables.

    ``max_order`` is the largest ``k`` for which every ``A_{2k,.}`` and
    ``B_{2k-1,.}`` row is present. ``b`` may additionally hold the rows of
    order ``max_order + 1`` (after :func:`step_b`, before :func:`step_a`).
    """

    a: Mapping[Key, Coeffs]
    b: Mapping[Key, Coeffs]
    max_order: int

    def __post_init__(self):
        object.__setattr__(self, "a", MappingProxyType(dict(self.a)))
        object.__setattr__(self, "b", MappingProxyType(dict(self.b)))

    def A(self, k: int, i: int) -> Coeffs:
        try:
            return self.a[k, i]
        except KeyError:
            raise MissingEntryError(f"{a_label(k, i)} not in tables (max_order={self.max_order})") from None

    def B(self, k: int, i: int) -> Coeffs:
        try:
            return self.b[k, i]
        except KeyError:
            raise MissingEntryError(f"{b_label(k, i)} not in tables (max_order={self.max_order})") from None

    def entries(self) -> dict[str, Coeffs]:
        """All rows keyed by label, in (order, index) order."""
        out = {}
        for k in range(1, self.max_order + 2):
            for i in range(1, k + 1):
                if (k, i) in self.b:
                    out[b_label(k, i)] = self.b[k, i]
            for i in range(0, k + 1):
                if (k, i) in self.a:
                    out[a_label(k, i)] = self.a[k, i]
        return out

    def discrepancies(self) -> list[dict]:
        """Entries that differ from :data:`REFERENCE_VALUES`, with both values."""
        out = []
        rows = self.entries()
        for label, j, printed in _DISCREPANCIES:
            if label in rows:
                out.append({
                    "entry": label,
                    "j": j,
                    "tabulated": printed,
                    "computed": str(rows[label][j - 1]),
                    "resolution": "recurrence value kept; independent symbolic integration agrees with it",
                })
        return out


def base_tables() -> CoeffTables:
    """Order-1 tables: ``B_{1,1} = -2t``, ``A_{2,0} = -4t``, ``A_{2,2} = -2t + 2t^3``."""
    return CoeffTables(
        a={(1, 0): (Fraction(-4),), (1, 1): (Fraction(-2), Fraction(2))},
        b={(1, 1): (Fraction(-2),)},
        max_order=1,
    )


def step_b(tables: CoeffTables, k: int) -> CoeffTables:
    """Add the rows ``B_{2k+1, 2i-1}``, ``i = 1..k+1``."""
    if k < 1 or tables.max_order < k:
        raise MissingEntryError(f"step_b({k}) needs complete tables through order {k}, have {tables.max_order}")
    A, B = tables.A, tables.B

    def term(j, i, m):
        # (2j-1) B_m(2j-1, 2i-1) + A_m(2j, 2(i-1))
        return (2 * j - 1) * B(j, i)[m - 1] + A(j, i - 1)[m - 1]

    new_b = dict(tables.b)

    row = [-sum(term(j, 1, m) for j in range(m, k + 1)) / (k + 1 - m) for m in range(1, k + 1)]
    row.append(sum(term(j, 1, m) / (k + 1 - m) for j in range(1, k + 1) for m in range(1, j + 1)) - 2 * (2 * k + 1))
    new_b[k + 1, 1] = tuple(row)

    for i in range(2, k + 1):
        diag = A(i - 1, i - 1)
        row = []
        for m in range(1, 2 * i - 1):
            row.append(-(sum(term(j, i, m) for j in range(i, k + 1)) + diag[m - 1]) / (k + i - m))
        for m in range(2 * i - 1, k + i):
            row.append(-sum(term(j, i, m) for j in range(m - i + 1, k + 1)) / (k + i - m))
        row.append(
            sum(term(j, i, m) / (k + i - m) for j in range(i, k + 1) for m in range(1, j + i))
            + sum(diag[m - 1] / (k + i - m) for m in range(1, 2 * i - 1))
        )
        new_b[k + 1, i] = tuple(row)

    diag = A(k, k)
    row = [-diag[m - 1] / (2 * k + 1 - m) for m in range(1, 2 * k + 1)]
    row.append(sum(diag[m - 1] / (2 * k + 1 - m) for m in range(1, 2 * k + 1)))
    new_b[k + 1, k + 1] = tuple(row)

    return CoeffTables(a=tables.a, b=new_b, max_order=tables.max_order)


def step_a(tables: CoeffTables, k: int) -> CoeffTables:
    """Add the rows ``A_{2(k+1), 2i}``, ``i = 0..k+1``.

    Needs every row through order ``k`` plus the ``B_{2k+1,.}`` rows.
    """
    if k < 1 or tables.max_order < k or not all((k + 1, i) in tables.b for i in range(1, k + 2)):
        raise MissingEntryError(f"step_a({k}) needs order-{k} tables and the B rows of order {k + 1}")
    A, B = tables.A, tables.B
    new_a = dict(tables.a)

    row = [-sum(2 * j * A(j, 0)[m - 1] for j in range(m, k + 1)) / (k - m + 1) for m in range(1, k + 1)]
    row.append(-4 * (k + 1) ** 2 + sum(2 * j * A(j, 0)[m - 1] / (k - m + 1) for m in range(1, k + 1) for j in range(m, k + 1)))
    new_a[k + 1, 0] = tuple(row)

    for i in range(1, k + 1):
        diag = B(i, i)

        def term(j, m):
            # B_m(2j+1, 2i-1) - 2j A_m(2j, 2i)
            return B(j + 1, i)[m - 1] - 2 * j * A(j, i)[m - 1]

        row = []
        for m in range(1, 2 * i):
            # the diagonal row B_{2i-1,2i-1} enters once, not once per j
            row.append((sum(term(j, m) for j in range(i, k + 1)) + diag[m - 1]) / (k + i - m + 1))
        for m in range(2 * i, k + i + 1):
            row.append(sum(term(j, m) for j in range(m - i, k + 1)) / (k + i - m + 1))
        row.append(
            -sum(term(j, m) / (k + i - m + 1) for j in range(i, k + 1) for m in range(1, j + i + 1))
            - sum(diag[m - 1] / (k + i - m + 1) for m in range(1, 2 * i))
        )
        new_a[k + 1, i] = tuple(row)

    diag = B(k + 1, k + 1)
    row = [diag[m - 1] / (2 * k - m + 2) for m in range(1, 2 * k + 2)]
    row.append(-sum(diag[m - 1] / (2 * k - m + 2) for m in range(1, 2 * k + 2)))
    new_a[k + 1, k + 1] = tuple(row)

    return CoeffTables(a=new_a, b=tables.b, max_order=k + 1)


def build_tables(n_max: int = DEFAULT_ORDER) -> CoeffTables:
    """Tables through order ``n_max``, computed b-row then a-row per order."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    tables = base_tables()
    for k in range(1, n_max):
        tables = step_a(step_b(tables, k), k)
    return tables


def z_coefficients(tables: CoeffTables, n: int, i: int) -> Coeffs:
    """Coefficients ``z_j(2n, 2i)``, ``j = 1..n+i``, of ``Z_{n,i} = sum_{k=i}^n A_{2k,2i}``.

    The ``k = 0`` term (``A_{0,0}``) is zero, so ``Z_{0,0}`` is the empty
    polynomial.
    """
    if n < 0 or not 0 <= i <= n:
        raise IndexError(f"need 0 <= i <= n, got n={n}, i={i}")
    if n > tables.max_order:
        raise MissingEntryError(f"Z_{{{n},{i}}} needs tables through order {n}, have {tables.max_order}")
    out = []
    for j in range(1, n + i + 1):
        out.append(sum((tables.A(k, i)[j - 1] for k in range(max(i, j - i, 1), n + 1)), Fraction(0)))
    return tuple(out)


def endpoint_sums(tables: CoeffTables) -> dict[str, Fraction]:
    """Value at ``t = 1`` of every kernel row (sum of its coefficients)."""
    return {label: sum(c, Fraction(0)) for label, c in tables.entries().items()}


# ---------------------------------------------------------------------------
# serialization


def tables_to_dict(tables: CoeffTables) -> dict:
    return {
        "max_order": tables.max_order,
        "entries": {label: [str(c) for c in coeffs] for label, coeffs in tables.entries().items()},
        "known_discrepancies": tables.discrepancies(),
    }


def tables_from_dict(doc: Mapping) -> CoeffTables:
    a, b = {}, {}
    for label, coeffs in doc["entries"].items():
        fam, order, index = label.split("/")
        order, index = int(order), int(index)
        row = tuple(Fraction(c) for c in coeffs)
        if fam == "A":
            a[order // 2, index // 2] = row
        elif fam == "B":
            b[(order + 1) // 2, (index + 1) // 2] = row
        else:
            raise ValueError(f"bad entry label {label!r}")
    return CoeffTables(a=a, b=b, max_order=int(doc["max_order"]))


def write_json(tables: CoeffTables, path) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(tables_to_dict(tables), fh, indent=1)
        fh.write("\n")


def read_json(path) -> CoeffTables:
    with open(path) as fh:
        return tables_from_dict(json.load(fh))


def write_csv(tables: CoeffTables, path) -> None:
    """One row per coefficient: ``family,order,index,j,value`` (value exact)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["family", "order", "index", "j", "value"])
        for label, coeffs in tables.entries().items():
            fam, order, index = label.split("/")
            for j, c in enumerate(coeffs, start=1):
                w.writerow([fam, order, index, j, str(c)])
