import random
from fractions import Fraction

import numpy as np
import pytest

from circledyn.circle import Arc, circle_dist, mod1, region_total
from circledyn.errors import ConstructionFailure, InvalidWordError
from circledyn.partition import (
    CountableMarkovPartition,
    PartitionElement,
    TransitionMatrix,
    build_markov_partition,
    build_vitali_family,
    check_bip,
    check_fcp,
    check_fip,
    check_shift_mixing,
    diameter_distortion_constant,
    dynamical_ball,
    full_branch_partition,
    pull_back_ball,
    standard_balls,
    transition_matrix,
    vitali_select,
)
from circledyn.semigroup import (
    GeneratorSystem,
    affine_generator,
    apply_word,
    perturbed_generator,
    verify_locally_expanding,
    word_orbit,
)

TOL10 = 1e-10


def doubling_system():
    return GeneratorSystem([affine_generator(0, 2)], [[1.0]], name="doubling")


def two_gen_system():
    return GeneratorSystem(
        [affine_generator(0, 2), affine_generator(1, 3)],
        [[0.5, 0.5], [0.5, 0.5]],
    )


def perturbed_system(c=0.01):
    return GeneratorSystem(
        [perturbed_generator(0, 2, 0.0, c), perturbed_generator(1, 3, 0.0, -c)],
        [[0.9, 0.1], [0.5, 0.5]],
    )


# ---------------------------------------------------------------------------
# dynamical balls


def test_dynamical_ball_examples():
    sysd = doubling_system()
    # doubling: |y - 0.5| < 0.1 and |2y - 1| < 0.1 pins radius to 0.05
    ball = dynamical_ball(sysd, Fraction(1, 2), (0,), Fraction(1, 10))
    assert ball.arc.lo == Fraction(9, 20)
    assert ball.arc.length == Fraction(1, 10)
    # empty word: plain metric ball
    b0 = dynamical_ball(sysd, Fraction(1, 4), (), Fraction(1, 10))
    assert (b0.arc.lo, b0.arc.length) == (Fraction(3, 20), Fraction(1, 5))
    # three doublings shrink the radius by 2^3
    b3 = dynamical_ball(sysd, Fraction(0), (0, 0, 0), Fraction(1, 10))
    assert b3.arc.length == 2 * Fraction(1, 10) / 8


def test_dynamical_ball_matches_brute_force():
    # independent oracle: grid membership via the defining inequalities
    sysp = perturbed_system()
    rng = random.Random(3)
    for _ in range(5):
        x = rng.random()
        word = tuple(rng.randrange(2) for _ in range(rng.randrange(1, 4)))
        eps = 0.04
        ball = dynamical_ball(sysp, x, word, eps)
        xs_orbit = word_orbit(sysp, word, x)
        grid = 4000
        for t in range(grid):
            y = t / grid
            ys_orbit = word_orbit(sysp, word, y)
            inside = all(
                circle_dist(a, b) < eps for a, b in zip(xs_orbit, ys_orbit)
            )
            near_edge = (
                min(
                    abs(ball.arc.offset_of(y)),
                    abs(ball.arc.offset_of(y) - ball.arc.length),
                    1 - ball.arc.offset_of(y),
                )
                < 2.0 / grid
            )
            if not near_edge:
                assert inside == ball.arc.contains_point(y, closed=False)


def test_pull_back_ball_examples():
    sysd = doubling_system()
    got = pull_back_ball(sysd, Fraction(2, 5), Fraction(1, 10), (0,), Fraction(1, 5))
    assert (got.arc.lo, got.arc.length) == (Fraction(3, 20), Fraction(1, 10))
    # empty word returns the ball itself
    same = pull_back_ball(sysd, 0.4, 0.1, (), 0.4)
    assert float(same.arc.length) == pytest.approx(0.2)
    # tripling branch through x = 0.1
    sys2 = two_gen_system()
    got3 = pull_back_ball(
        sys2, Fraction(3, 10), Fraction(9, 100), (1,), Fraction(1, 10)
    )
    assert (got3.arc.lo, got3.arc.length) == (Fraction(7, 100), Fraction(3, 50))
    with pytest.raises(InvalidWordError):
        pull_back_ball(sysd, 0.9, 0.1, (0,), 0.2)  # f(0.2) = 0.4 != 0.9


def test_pullback_exactness_and_lemma_agreement():
    # forward image of the pullback reproduces the ball; the pure pullback
    # agrees with the constrained dynamical ball (intermediate constraints
    # are implied by contraction)
    rng = random.Random(11)
    for sysx, exact in ((two_gen_system(), True), (perturbed_system(), False)):
        cover = verify_locally_expanding(sysx)
        for _ in range(100):
            x = Fraction(rng.randrange(10**6), 10**6)
            word = tuple(rng.randrange(2) for _ in range(rng.randrange(1, 7)))
            eps = Fraction(rng.randrange(10, 40), 1000)
            assert eps < cover.eta / 2
            y = apply_word(sysx, word, x)
            ball = pull_back_ball(sysx, y, eps, word, x)
            dball = dynamical_ball(sysx, x, word, eps)
            lo_img = apply_word(sysx, word, ball.arc.lo)
            hi_img = apply_word(sysx, word, ball.arc.hi)
            if exact:
                assert ball.arc == dball.arc
                assert lo_img == mod1(y - eps)
                assert hi_img == mod1(y + eps)
            else:
                assert circle_dist(ball.arc.lo, dball.arc.lo) < TOL10
                assert abs(float(ball.arc.length - dball.arc.length)) < TOL10
                assert circle_dist(lo_img, mod1(y - eps)) < TOL10
                assert circle_dist(hi_img, mod1(y + eps)) < TOL10


def test_dynamical_ball_nesting():
    rng = random.Random(13)
    sysx = perturbed_system()
    for _ in range(50):
        x = rng.random()
        word = tuple(rng.randrange(2) for _ in range(5))
        eps = 0.03
        prev = dynamical_ball(sysx, x, (), eps)
        for n in range(1, 6):
            cur = dynamical_ball(sysx, x, word[:n], eps)
            assert prev.arc.contains_arc(cur.arc, tol=1e-14)
            prev = cur


# ---------------------------------------------------------------------------
# distortion constant


def test_distortion_constant_affine_is_one():
    sysx = two_gen_system()
    cover = verify_locally_expanding(sysx)
    assert diameter_distortion_constant(sysx, cover) == 1.0


def test_distortion_constant_perturbed_formula():
    import math

    sysx = perturbed_system(c=0.01)
    cover = verify_locally_expanding(sysx)
    C, alpha = sysx.holder_log_deriv()
    # both charts are the full circle, so gamma caps at the metric diameter
    expected = math.exp(-C * (2 * 0.5) ** alpha / (1 - cover.sigma ** alpha))
    assert diameter_distortion_constant(sysx, cover) == pytest.approx(expected)
    assert diameter_distortion_constant(sysx, cover) <= 1.0


def test_distortion_constant_sigma_zero_limit():
    import math

    sysx = perturbed_system(c=0.01)
    cover = verify_locally_expanding(sysx)
    cover.sigma = 1e-12
    C, alpha = sysx.holder_log_deriv()
    got = diameter_distortion_constant(sysx, cover)
    assert got == pytest.approx(math.exp(-C * 1.0), rel=1e-9)


# ---------------------------------------------------------------------------
# Vitali family and selection


def four_ball_cover():
    return [Arc(mod1(Fraction(j, 4) - Fraction(1, 8)), Fraction(1, 4)) for j in range(4)]


def test_vitali_family_covers_grid():
    sysd = doubling_system()
    cover = verify_locally_expanding(sysd)
    fam = build_vitali_family(sysd, cover, four_ball_cover(), depth=3, cap=8)
    assert fam.complete
    assert all(len(t.word) >= 3 for t in fam.tiles)
    # tiles are exact dyadic pullbacks of the balls
    t = fam.tiles[0]
    assert t.arc.length == Fraction(1, 4) / 2 ** len(t.word)


def test_vitali_family_shrinking_member_property():
    sysd = doubling_system()
    cover = verify_locally_expanding(sysd)
    fam = build_vitali_family(sysd, cover, four_ball_cover(), depth=3, cap=8)
    x = Fraction(3, 10)
    hits = [t for t in fam.tiles if t.arc.contains_point(x)]
    assert hits
    assert min(t.arc.length for t in hits) < Fraction(1, 1000)


def test_vitali_family_empty_when_depth_beyond_cap():
    sysd = doubling_system()
    cover = verify_locally_expanding(sysd)
    fam = build_vitali_family(sysd, cover, four_ball_cover(), depth=5, cap=3)
    assert not fam.tiles
    assert not fam.complete
    assert fam.uncovered_grid


def test_vitali_select_single_ball():
    # radius-1/4 balls: their dyadic pullbacks tile each other exactly
    sysd = doubling_system()
    cover = verify_locally_expanding(sysd)
    balls = [
        Arc(mod1(Fraction(j, 4) - Fraction(1, 4)), Fraction(1, 2)) for j in range(4)
    ]
    fam = build_vitali_family(sysd, cover, balls, depth=3, cap=12)
    sel = vitali_select(balls[0], fam, tol=Fraction(1, 1000))
    assert sel.reached_tol
    assert sel.uncovered_mass < Fraction(1, 1000)
    # disjointness and exact additivity of the selected arcs
    total = region_total([t.arc for t in sel.selected])
    assert total + sel.uncovered_mass == balls[0].length
    arcs = sorted((t.arc for t in sel.selected), key=lambda a: a.lo)
    for a, b in zip(arcs, arcs[1:]):
        assert (b.lo - a.lo) % 1 >= a.length


def test_vitali_select_empty_target():
    sysd = doubling_system()
    cover = verify_locally_expanding(sysd)
    fam = build_vitali_family(sysd, cover, four_ball_cover(), depth=3, cap=5)
    sel = vitali_select([], fam, tol=Fraction(1, 1000))
    assert sel.selected == []
    assert sel.uncovered_mass == 0


# ---------------------------------------------------------------------------
# the full construction


@pytest.fixture(scope="module")
def doubling_partition():
    sysd = doubling_system()
    cover = verify_locally_expanding(sysd)
    return build_markov_partition(
        sysd, cover, eps=Fraction(1, 16), tol=Fraction(1, 1000), depth_cap=20
    )


def test_partition_doubling_structure(doubling_partition):
    part = doubling_partition
    assert len(part.balls) == 48
    assert len(part.cycle) == 48
    assert part.uncovered_mass <= Fraction(1, 1000)
    assert part.element_mass() + part.uncovered_mass == 1
    assert part.exact
    part.validate()


def test_partition_cycle_images_exact(doubling_partition):
    part = doubling_partition
    sysd = part.system
    for j, idx in enumerate(part.cycle):
        e = part.elements[idx]
        target = part.balls[(j + 1) % len(part.balls)]
        lo_img = apply_word(sysd, e.word, e.arc.lo)
        hi_img = apply_word(sysd, e.word, e.arc.hi)
        assert lo_img == target.lo
        assert hi_img == target.hi
        # cycle elements avoid every ball boundary point in their interior
        for q in part.boundary_points():
            assert not e.arc.contains_point(q, closed=False)


def test_partition_markov_property(doubling_partition):
    # independent check of: int(M_i) meets h_i^{-1}(int M_j) implies
    # M_j inside h_i(M_i); with exact arithmetic this is containment in
    # the closed image ball
    part = doubling_partition
    matrix = transition_matrix(part)
    rng = random.Random(7)
    idx = list(range(part.n_elements))
    for i in rng.sample(idx, 25):
        ball = part.balls[part.elements[i].image_ball]
        for j in rng.sample(idx, 25):
            overlap = [
                p
                for p in ball.intersect(part.elements[j].arc)
                if p.length > 0
            ]
            hits = matrix.entry(i, j)
            if hits:
                assert ball.contains_arc(part.elements[j].arc)
            else:
                # no interior overlap: any intersection is at most endpoints
                assert region_total(overlap) == 0 or not ball.contains_arc(
                    part.elements[j].arc
                )


def test_partition_uncovered_monotone_in_cap():
    sysd = doubling_system()
    cover = verify_locally_expanding(sysd)
    p1 = build_markov_partition(
        sysd, cover, eps=Fraction(1, 16), tol=Fraction(1, 5), depth_cap=6,
        exhaust=True,
    )
    p2 = build_markov_partition(
        sysd, cover, eps=Fraction(1, 16), tol=Fraction(1, 5), depth_cap=8,
        exhaust=True,
    )
    assert p2.uncovered_mass < p1.uncovered_mass


def test_partition_cap_failure():
    sysd = doubling_system()
    cover = verify_locally_expanding(sysd)
    with pytest.raises(ConstructionFailure):
        build_markov_partition(
            sysd, cover, eps=Fraction(1, 16), tol=Fraction(1, 10**6), depth_cap=3
        )


def test_partition_two_generators():
    sys2 = two_gen_system()
    cover = verify_locally_expanding(sys2)
    part = build_markov_partition(
        sys2, cover, eps=Fraction(1, 16), tol=Fraction(1, 100), depth_cap=12
    )
    part.validate()
    assert part.uncovered_mass <= Fraction(1, 100)
    assert part.exact
    # words mix both generators and respect the driving matrix trivially
    words = {e.word for e in part.elements}
    assert any(0 in w for w in words) and any(1 in w for w in words)


# ---------------------------------------------------------------------------
# transition matrix and structure flags


def test_transition_matrix_rows(doubling_partition):
    part = doubling_partition
    matrix = transition_matrix(part)
    # rows are determined by the image ball: at most N distinct rows
    assert matrix.q <= len(part.balls)
    # spot-check rows against direct containment scans
    rng = random.Random(5)
    for i in rng.sample(range(part.n_elements), 10):
        ball = part.balls[part.elements[i].image_ball]
        expected = {
            j
            for j in range(part.n_elements)
            if ball.contains_arc(part.elements[j].arc)
        }
        assert set(map(int, matrix.row(i))) == expected
    assert matrix.row_nonempty().all()
    assert matrix.col_nonempty().all()


def test_fip(doubling_partition):
    ok, images = check_fip(doubling_partition)
    assert ok
    assert images == doubling_partition.balls
    # negative control: an element whose image is not a cover ball
    part = doubling_partition
    fake = PartitionElement(
        index=0,
        arc=part.elements[0].arc,
        word=part.elements[0].word,
        image_ball=0,
        los=[part.elements[0].los[0], mod1(part.balls[0].lo + Fraction(1, 7))],
        lens=list(part.elements[0].lens),
    )
    broken = CountableMarkovPartition(
        system=part.system,
        balls=part.balls,
        elements=[fake],
        cycle=[0],
        sigma=part.sigma,
        uncovered_mass=1 - fake.arc.length,
        kind="hand-built",
    )
    ok2, _ = check_fip(broken)
    assert not ok2


def test_fcp_and_bip(doubling_partition):
    part = doubling_partition
    matrix = transition_matrix(part)
    ok, cyc = check_fcp(part, matrix)
    assert ok and cyc == part.cycle
    assert check_bip(matrix, part.cycle)


def test_fcp_negative_control_single_ball():
    # full-branch partition has exactly one cycle element; deleting it
    # breaks the cycle property with every element as witness
    part = full_branch_partition(doubling_system())
    matrix = transition_matrix(part)
    ok, _ = check_fcp(part, matrix)
    assert ok
    part.cycle = []
    ok2, witness = check_fcp(part, matrix)
    assert not ok2
    assert witness == 0


def test_bip_examples():
    full = TransitionMatrix.from_dense(np.ones((3, 3), dtype=bool))
    assert check_bip(full, [0])
    chain = np.zeros((4, 4), dtype=bool)
    for a in range(3):
        chain[a, a + 1] = True
    chain[3, 0] = True  # close the loop so no row is empty
    m = TransitionMatrix.from_dense(chain)
    assert not check_bip(m, [0])  # nothing maps into 0 except state 3
    assert check_bip(m, [0, 1, 2, 3])


def test_shift_mixing_examples(doubling_partition):
    full2 = TransitionMatrix.from_dense(np.ones((2, 2), dtype=bool))
    res = check_shift_mixing(full2, horizon=4)
    assert res.mixing and res.power == 1
    bipartite = TransitionMatrix.from_dense(
        np.array([[False, True], [True, False]])
    )
    res2 = check_shift_mixing(bipartite, horizon=12)
    assert not res2.mixing
    matrix = transition_matrix(doubling_partition)
    res3 = check_shift_mixing(matrix, horizon=10)
    assert res3.mixing
    assert res3.power <= 4


def test_golden_mean_not_full_but_mixing():
    golden = TransitionMatrix.from_dense(np.array([[True, True], [True, False]]))
    res = check_shift_mixing(golden, horizon=8)
    assert res.mixing


# ---------------------------------------------------------------------------
# full-branch partitions


def test_full_branch_doubling():
    part = full_branch_partition(doubling_system())
    assert [e.arc.lo for e in part.elements] == [Fraction(0), Fraction(1, 2)]
    assert all(e.arc.length == Fraction(1, 2) for e in part.elements)
    assert part.uncovered_mass == 0
    matrix = transition_matrix(part)
    assert matrix.to_dense().all()
    ok, _ = check_fip(part)
    assert ok
    part.validate()


def test_full_branch_perturbed():
    sysp = perturbed_system(c=0.01)
    part = full_branch_partition(sysp, 0)
    assert len(part.elements) == 2
    part.validate()
    # branch cuts are genuine preimages of 0
    for e in part.elements:
        img = sysp.gen(0).map(e.arc.lo)
        assert min(img, 1 - img) < 1e-12


def test_perturbed_pipeline_partition_small():
    sysp = perturbed_system(c=0.01)
    cover = verify_locally_expanding(sysp)
    part = build_markov_partition(
        sysp, cover, eps=Fraction(1, 16), tol=Fraction(1, 100), depth_cap=12
    )
    part.validate()
    assert float(part.uncovered_mass) <= 0.01
    matrix = transition_matrix(part)
    ok, _ = check_fcp(part, matrix)
    assert ok
    assert check_bip(matrix, part.cycle)
