"""Bundled example maps: six polynomial maps plus formula-only specs.

The polynomial maps exercise the exact Jacobian machinery and the
image-lattice coverage path; the formula specs exercise the general
semialgebraic path, including genuinely set-valued graphs (the punctured
cone `interval_gap` and the `remark` map whose only point over x = 0 is the
origin).  Boxes are sized so that each map's image over its domain box fits
inside the range box, which keeps graph sampling rejection-friendly.
"""
from __future__ import annotations

from .semialg import (
    MapSpec,
    PolyMap,
    Polynomial,
    atom_eq,
    atom_lt,
    conj,
    disj,
)

__all__ = [
    "polymap_catalog",
    "formula_catalog",
    "catalog",
    "get",
    "SCAN_BUDGETS",
]


def _v(n: int, i: int) -> Polynomial:
    return Polynomial.variable(n, i)


def _pm_spec(
    name: str,
    pm: PolyMap,
    x_box: tuple[tuple[float, float], ...],
    y_box: tuple[tuple[float, float], ...],
) -> MapSpec:
    return pm.as_mapspec(x_box + y_box, name)


def polymap_catalog() -> dict[str, MapSpec]:
    """The six single-valued polynomial maps (n <= 3, m <= 2)."""
    x1 = _v(1, 0)
    square = PolyMap(1, (x1 * x1,))
    cubic = PolyMap(1, (x1 * x1 * x1 - 3.0 * x1,))

    a, b = _v(2, 0), _v(2, 1)
    s2 = a * a + b * b
    circlesq = PolyMap(2, ((s2 - 1.0) * (s2 - 1.0),))
    fold = PolyMap(2, (a * a, b))
    cusp = PolyMap(2, (a * a * a - a * b, b))

    p, q, r = _v(3, 0), _v(3, 1), _v(3, 2)
    ridge = PolyMap(3, (p * p + q * q + r * r, r))

    box1 = ((-1.5, 1.5),)
    box2 = ((-1.5, 1.5), (-1.5, 1.5))
    box3 = ((-1.5, 1.5), (-1.5, 1.5), (-1.5, 1.5))
    return {
        "square1d": _pm_spec("square1d", square, box1, ((-0.5, 2.75),)),
        "cubic1d": _pm_spec("cubic1d", cubic, ((-2.0, 2.0),), ((-2.5, 2.5),)),
        "circlesq": _pm_spec("circlesq", circlesq, box2, ((-0.5, 12.75),)),
        "fold2d": _pm_spec("fold2d", fold, box2, ((-0.5, 2.75), (-2.0, 2.0))),
        "cusp2d": _pm_spec("cusp2d", cusp, box2, ((-6.0, 6.0), (-2.0, 2.0))),
        "ridge3d": _pm_spec("ridge3d", ridge, box3, ((-0.5, 7.0), (-2.0, 2.0))),
    }


def formula_catalog() -> dict[str, MapSpec]:
    """Additional bundled specs: formula-backed graphs (including genuinely
    set-valued counterexamples) plus the wide-domain pair used by the
    asymptotic examples."""
    # single-valued graphs written as equations, no PolyMap attached, so the
    # general coverage path gets exercised on easy ground truth
    x = _v(2, 0)
    y = _v(2, 1)
    identity1d = MapSpec(
        name="identity1d",
        n=1,
        m=1,
        graph=atom_eq(y - x),
        box=((-2.0, 2.0), (-2.5, 2.5)),
    )
    double1d = MapSpec(
        name="double1d",
        n=1,
        m=1,
        graph=atom_eq(y - 2.0 * x),
        box=((-2.0, 2.0), (-4.5, 4.5)),
    )
    x1, x2, y1, y2 = (_v(4, i) for i in range(4))
    identity2d = MapSpec(
        name="identity2d",
        n=2,
        m=2,
        graph=conj(atom_eq(y1 - x1), atom_eq(y2 - x2)),
        box=((-2.0, 2.0), (-2.0, 2.0), (-2.5, 2.5), (-2.5, 2.5)),
    )
    diag23 = MapSpec(
        name="diag23",
        n=2,
        m=2,
        graph=conj(atom_eq(y1 - 2.0 * x1), atom_eq(y2 - 3.0 * x2)),
        box=((-2.0, 2.0), (-2.0, 2.0), (-4.5, 4.5), (-6.5, 6.5)),
    )
    # F(x) = {y: 0 < |y| < |x|}: the value gap at 0 makes sur F(0,0) = 0
    # even though every nearby rate is positive
    interval_gap = MapSpec(
        name="interval_gap",
        n=1,
        m=1,
        graph=conj(atom_lt(-(y * y)), atom_lt(y * y - x * x)),
        box=((-1.0, 1.0), (-1.0, 1.0)),
    )
    # F(0) = {0} and F(x) = the open ||x||-disk minus the horizontal axis:
    # 0 is a critical value reachable only through the graph point (0, 0)
    remark = MapSpec(
        name="remark",
        n=2,
        m=2,
        graph=disj(
            conj(atom_eq(x1), atom_eq(x2), atom_eq(y1), atom_eq(y2)),
            conj(
                atom_lt(y1 * y1 + y2 * y2 - x1 * x1 - x2 * x2),
                atom_lt(-(y2 * y2)),
            ),
        ),
        box=((-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)),
    )
    # y = 1/(1+x^2) over a wide domain: its value at infinity, 0, is the
    # classical asymptotically critical value the shell scan must find
    recip1d = MapSpec(
        name="recip1d",
        n=1,
        m=1,
        graph=atom_eq(y * (x * x + 1.0) - 1.0),
        box=((-300.0, 300.0), (-0.5, 1.5)),
    )
    # identity on the same wide domain: the control with no asymptotically
    # critical values (carries its PolyMap, so shell rates are exact)
    line1d = PolyMap(1, (_v(1, 0),)).as_mapspec(
        ((-300.0, 300.0), (-300.0, 300.0)), "line1d"
    )
    return {
        "identity1d": identity1d,
        "identity2d": identity2d,
        "double1d": double1d,
        "diag23": diag23,
        "interval_gap": interval_gap,
        "remark": remark,
        "recip1d": recip1d,
        "line1d": line1d,
    }


def catalog() -> dict[str, MapSpec]:
    out = polymap_catalog()
    out.update(formula_catalog())
    return out


def get(name: str) -> MapSpec:
    maps = catalog()
    if name not in maps:
        from .errors import InputError

        known = ", ".join(sorted(maps))
        raise InputError(f"unknown catalog map {name!r}; known: {known}")
    return maps[name]


# Scan budgets sized so each map flags a usable critical-value sample: the
# critical sets of ridge3d (a line in a 3-box) and circlesq (a point plus a
# thin ring) occupy tiny volume fractions, so they need more draws.
SCAN_BUDGETS: dict[str, int] = {
    "square1d": 20_000,
    "cubic1d": 20_000,
    "circlesq": 60_000,
    "fold2d": 20_000,
    "cusp2d": 60_000,
    "ridge3d": 2_000_000,
}
