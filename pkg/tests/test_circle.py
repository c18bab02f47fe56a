import random
from fractions import Fraction

import pytest

from circledyn.circle import (
    Arc,
    circle_dist,
    covers_circle,
    lebesgue_number_exact,
    mod1,
    region_subtract,
    region_total,
    split_arc_at_points,
)


def test_mod1_and_dist():
    assert mod1(1.25) == 0.25
    assert mod1(-0.25) == 0.75
    assert mod1(Fraction(7, 3)) == Fraction(1, 3)
    assert circle_dist(0.1, 0.9) == pytest.approx(0.2)
    assert circle_dist(Fraction(1, 8), Fraction(7, 8)) == Fraction(1, 4)
    # the metric never exceeds 1/2
    rng = random.Random(0)
    for _ in range(200):
        assert circle_dist(rng.random(), rng.random()) <= 0.5


def test_arc_basics():
    a = Arc(Fraction(9, 10), Fraction(1, 5))  # wraps through 0
    assert a.hi == Fraction(1, 10)
    assert a.contains_point(Fraction(95, 100))
    assert a.contains_point(Fraction(5, 100))
    assert not a.contains_point(Fraction(1, 2))
    assert a.contains_point(a.lo, closed=True)
    assert not a.contains_point(a.lo, closed=False)
    with pytest.raises(ValueError):
        Arc(0, 0)
    with pytest.raises(ValueError):
        Arc(0, 1.5)


def test_full_circle_arc():
    full = Arc(0, 1)
    assert full.contains_point(0.42)
    assert full.contains_point(0, closed=True)
    assert not full.contains_point(0, closed=False)  # circle minus anchor
    assert full.contains_arc(Arc(0.3, 0.5))


def test_contains_arc_endpoint_sharing():
    a = Arc(Fraction(0), Fraction(1, 2))
    assert a.contains_arc(Arc(Fraction(0), Fraction(1, 4)))
    assert a.contains_arc(Arc(Fraction(1, 4), Fraction(1, 4)))
    assert not a.contains_arc(Arc(Fraction(1, 4), Fraction(3, 8)))


def test_intersect_one_and_two_components():
    a = Arc(Fraction(0), Fraction(1, 2))
    b = Arc(Fraction(2, 5), Fraction(1, 5))
    (only,) = a.intersect(b)
    assert (only.lo, only.length) == (Fraction(2, 5), Fraction(1, 10))
    # interleaving long arcs meet in two components
    c = Arc(Fraction(0), Fraction(3, 4))
    d = Arc(Fraction(1, 2), Fraction(3, 4))
    parts = sorted(c.intersect(d), key=lambda x: x.lo)
    assert len(parts) == 2
    assert (parts[0].lo, parts[0].length) == (Fraction(0), Fraction(1, 4))
    assert (parts[1].lo, parts[1].length) == (Fraction(1, 2), Fraction(1, 4))
    assert a.intersect(Arc(Fraction(1, 2), Fraction(1, 4))) == []


def test_subtract():
    a = Arc(Fraction(0), Fraction(1, 2))
    pieces = a.subtract(Arc(Fraction(1, 8), Fraction(1, 8)))
    assert [(p.lo, p.length) for p in pieces] == [
        (Fraction(0), Fraction(1, 8)),
        (Fraction(1, 4), Fraction(1, 4)),
    ]
    assert region_total(pieces) == Fraction(3, 8)
    # removing a covering arc leaves nothing
    assert a.subtract(Arc(Fraction(0), Fraction(1, 2))) == []
    assert a.subtract(Arc(0, 1)) == []


def test_region_ops_exact_mass():
    region = [Arc(Fraction(0), Fraction(1))]
    rng = random.Random(1)
    removed = Fraction(0)
    for _ in range(50):
        lo = Fraction(rng.randrange(0, 4096), 4096)
        ln = Fraction(rng.randrange(1, 16), 4096)
        before = region_total(region)
        inter = sum(
            (a.length for r in region for a in r.intersect(Arc(lo, ln))),
            Fraction(0),
        )
        region = region_subtract(region, Arc(lo, ln))
        assert region_total(region) == before - inter
        removed += inter
    assert region_total(region) == 1 - removed


def test_split_arc_at_points():
    a = Arc(Fraction(0), Fraction(1))
    pieces = split_arc_at_points(a, [Fraction(1, 4), Fraction(1, 2), Fraction(0)])
    assert [p.length for p in pieces] == [
        Fraction(1, 4),
        Fraction(1, 4),
        Fraction(1, 2),
    ]


def test_covers_circle():
    ok, _ = covers_circle([Arc(Fraction(0), Fraction(3, 5)), Arc(Fraction(1, 2), Fraction(3, 5))])
    assert ok
    ok, witness = covers_circle([Arc(Fraction(0), Fraction(2, 5)), Arc(Fraction(1, 2), Fraction(2, 5))])
    assert not ok
    assert Arc(Fraction(2, 5), Fraction(1, 10)).contains_point(witness) or Arc(
        Fraction(9, 10), Fraction(1, 10)
    ).contains_point(witness)


def test_lebesgue_exact_two_arc_example():
    # arcs (0, 0.6) and (0.5, 1.1 mod 1): both overlaps have length 0.1,
    # the worst points are 0.05 and 0.55, and eta = 0.05 exactly
    arcs = [Arc(Fraction(0), Fraction(3, 5)), Arc(Fraction(1, 2), Fraction(3, 5))]
    assert lebesgue_number_exact(arcs) == Fraction(1, 20)


def test_lebesgue_exact_full_chart():
    assert lebesgue_number_exact([Arc(0, 1)]) == Fraction(1, 2)


def test_lebesgue_gap_returns_nonpositive():
    arcs = [Arc(Fraction(0), Fraction(2, 5)), Arc(Fraction(1, 2), Fraction(2, 5))]
    assert lebesgue_number_exact(arcs) <= 0


def test_lebesgue_matches_brute_force():
    # independent oracle: dense grid evaluation of the containment radius
    rng = random.Random(7)
    for _ in range(10):
        arcs = []
        for _ in range(rng.randrange(2, 5)):
            arcs.append(
                Arc(
                    Fraction(rng.randrange(0, 240), 240),
                    Fraction(rng.randrange(30, 180), 240),
                )
            )
        exact = lebesgue_number_exact(arcs)
        grid = 960
        brute = min(
            max(
                (
                    min(off, a.length - off)
                    if 0 < (off := (Fraction(t, grid) - a.lo) % 1) < a.length
                    else Fraction(0)
                )
                for a in arcs
            )
            for t in range(grid)
        )
        assert exact <= brute
        assert brute - exact <= Fraction(1, grid)
