import math
import random
from fractions import Fraction

import numpy as np
import pytest

from circledyn.circle import Arc, circle_dist
from circledyn.errors import BoundaryOrbitError, InvalidWordError
from circledyn.induced import (
    analytic_distortion_bound,
    decode,
    distortion_bound_induced,
    encode,
    induce,
    inverse_branches,
    refine_cylinder,
    sample_interior_points,
    verify_inducing_scheme,
)
from circledyn.partition import (
    build_markov_partition,
    full_branch_partition,
    transition_matrix,
)
from circledyn.semigroup import (
    GeneratorSystem,
    affine_generator,
    apply_word,
    perturbed_generator,
    verify_locally_expanding,
)


def doubling_system():
    return GeneratorSystem([affine_generator(0, 2)], [[1.0]])


def perturbed_system(c=0.01):
    return GeneratorSystem(
        [perturbed_generator(0, 2, 0.0, c), perturbed_generator(1, 3, 0.0, -c)],
        [[0.9, 0.1], [0.5, 0.5]],
    )


@pytest.fixture(scope="module")
def branch_induced():
    return induce(full_branch_partition(doubling_system()))


@pytest.fixture(scope="module")
def pipeline_induced():
    sysd = doubling_system()
    cover = verify_locally_expanding(sysd)
    part = build_markov_partition(
        sysd, cover, eps=Fraction(1, 16), tol=Fraction(1, 1000), depth_cap=20
    )
    return induce(part)


@pytest.fixture(scope="module")
def perturbed_induced():
    sysp = perturbed_system()
    cover = verify_locally_expanding(sysp)
    part = build_markov_partition(
        sysp, cover, eps=Fraction(1, 16), tol=Fraction(1, 100), depth_cap=12
    )
    return induce(part)


# ---------------------------------------------------------------------------
# dispatch


def test_apply_dispatch(branch_induced):
    y, i = branch_induced.apply(Fraction(3, 10))
    assert i == 0 and y == Fraction(3, 5)
    y2, i2 = branch_induced.apply(Fraction(7, 10))
    assert i2 == 1 and y2 == Fraction(2, 5)


def test_apply_matches_word_composition(pipeline_induced):
    part = pipeline_induced.partition
    for x in sample_interior_points(part, 20, seed=1):
        y, i = pipeline_induced.apply(x)
        e = part.elements[i]
        assert y == apply_word(part.system, e.word, x)
        assert e.tau == len(e.word)


def test_boundary_point_errors(branch_induced):
    with pytest.raises(BoundaryOrbitError):
        branch_induced.element_of(Fraction(1, 2))
    with pytest.raises(BoundaryOrbitError):
        branch_induced.element_of(Fraction(0))


def test_gap_point_errors(pipeline_induced):
    # truncation leaves uncovered slivers; probing one must fail loudly
    part = pipeline_induced.partition
    from circledyn.circle import region_subtract, split_arc_at_points

    region = split_arc_at_points(
        Arc(Fraction(0), Fraction(1)), part.boundary_points()
    )
    for e in part.elements:
        region = region_subtract(region, e.arc)
    region = [g for g in region if g.length > 0]
    assert region  # tol > 0 so something is uncovered
    with pytest.raises(BoundaryOrbitError):
        pipeline_induced.element_of(region[0].midpoint)


def test_cycle_return_times(pipeline_induced):
    part = pipeline_induced.partition
    for j, idx in enumerate(part.cycle):
        assert part.elements[idx].tau == len(part.elements[idx].word)
        assert part.elements[idx].tau >= 1


# ---------------------------------------------------------------------------
# cylinders


def test_refine_cylinder_single_word(branch_induced):
    part = branch_induced.partition
    cyl = refine_cylinder(branch_induced, (1,))
    assert cyl.arc == part.elements[1].arc
    assert cyl.total_time == 1


def test_refine_cylinder_dyadic(branch_induced):
    # [0, 1]: points of [0,1/2] that map into [1/2,1]: exactly [1/4,1/2]
    cyl = refine_cylinder(branch_induced, (0, 1))
    assert (cyl.arc.lo, cyl.arc.length) == (Fraction(1, 4), Fraction(1, 4))
    # depth-d dyadic cylinders have width 2^-d
    cyl3 = refine_cylinder(branch_induced, (0, 1, 0))
    assert cyl3.arc.length == Fraction(1, 8)
    assert cyl3.total_time == 3


def test_refine_cylinder_decay(pipeline_induced):
    part = pipeline_induced.partition
    rng = random.Random(2)
    for _ in range(20):
        word = [rng.randrange(part.n_elements)]
        for _ in range(9):
            succ = pipeline_induced.matrix.row(word[-1])
            word.append(int(succ[rng.randrange(len(succ))]))
        cyl = refine_cylinder(pipeline_induced, tuple(word))
        taus = sum(part.elements[a].tau for a in word[:-1])
        bound = part.sigma ** taus * float(part.elements[word[-1]].arc.length)
        assert float(cyl.arc.length) <= bound * (1 + 1e-9)


def test_refine_cylinder_rejects_forbidden(branch_induced):
    with pytest.raises(InvalidWordError):
        refine_cylinder(branch_induced, ())
    golden_part = full_branch_partition(doubling_system())
    ind = induce(golden_part)
    # all transitions allowed on the full branch partition, so fabricate
    # a forbidden pair by shrinking the matrix
    import numpy as np

    from circledyn.partition import TransitionMatrix

    m = TransitionMatrix.from_dense(np.array([[True, True], [True, False]]))
    ind_golden = induce(golden_part, matrix=m)
    with pytest.raises(InvalidWordError):
        refine_cylinder(ind_golden, (1, 1))


# ---------------------------------------------------------------------------
# inverse branches


def test_inverse_branches_counts(branch_induced):
    b1 = inverse_branches(branch_induced, 0, 1)
    assert len(b1) == 2  # full shift on two symbols
    b2 = inverse_branches(branch_induced, 0, 2)
    assert len(b2) == 4  # number of allowed 2-paths into element 0
    arcs = sorted((br.arc for br in b2), key=lambda a: a.lo)
    # branch images are pairwise disjoint sub-arcs
    for a, b in zip(arcs, arcs[1:]):
        assert (b.lo - a.lo) % 1 >= a.length
    # each branch inverts the double application of T
    for br in b2:
        x = br.arc.sample(Fraction(1, 3))
        y = x
        for _ in range(2):
            y, _ = branch_induced.apply(y)
        z = br(branch_induced, y)
        assert circle_dist(float(z), float(x)) < 1e-12


def test_inverse_branch_count_matches_matrix_power(branch_induced):
    dense = branch_induced.matrix.to_dense().astype(int)
    for k in (0, 1):
        for depth in (1, 2, 3):
            power = np.linalg.matrix_power(dense, depth)
            assert len(inverse_branches(branch_induced, k, depth)) == power[:, k].sum()


# ---------------------------------------------------------------------------
# H1..H5


def test_inducing_scheme_affine(branch_induced):
    rep = verify_inducing_scheme(branch_induced)
    assert rep.all_ok
    assert rep.h5.detail["max_ratio"] == 1.0  # constant slopes
    assert rep.h5.detail["analytic_k1"] == 1.0
    assert rep.h4.detail["min_abs_deriv"] == 2.0


def test_inducing_scheme_pipeline(pipeline_induced):
    rep = verify_inducing_scheme(pipeline_induced)
    assert rep.all_ok
    # H4 on a return-time-3 element gives slope 8 for the doubling map
    part = pipeline_induced.partition
    taus = {e.tau for e in part.elements}
    if 3 in taus:
        e = next(e for e in part.elements if e.tau == 3)
        from circledyn.semigroup import derivative_along_word

        assert derivative_along_word(part.system, e.word, e.arc.midpoint) == 8


def test_inducing_scheme_perturbed(perturbed_induced):
    rep = verify_inducing_scheme(perturbed_induced)
    assert rep.all_ok
    assert 1.0 < rep.h5.detail["max_ratio"] <= rep.h5.detail["analytic_k1"]


def test_distortion_bound_affine(pipeline_induced):
    rep = distortion_bound_induced(pipeline_induced, n_cylinders=50)
    assert rep.empirical == 1.0
    assert rep.analytic == 1.0
    assert rep.ok


def test_distortion_bound_perturbed(perturbed_induced):
    rep = distortion_bound_induced(perturbed_induced, n_cylinders=100, max_depth=6)
    assert rep.ok
    assert rep.empirical > 1.0
    # analytic constant from the family's Hölder data
    sysp = perturbed_induced.partition.system
    C, alpha = sysp.holder_log_deriv()
    eps2 = perturbed_induced.partition.max_ball_length()
    sigma = perturbed_induced.partition.sigma
    expected = math.exp(C * eps2 ** alpha / (1 - sigma ** alpha))
    assert rep.analytic == pytest.approx(expected)


# ---------------------------------------------------------------------------
# coding


def test_encode_decode_roundtrip(branch_induced):
    # dyadic tiles read off binary digits: x with eventually periodic
    # binary expansion has an eventually periodic itinerary
    x = Fraction(1, 3)  # binary 0.010101...
    word = encode(branch_induced, x, 10)
    assert word == [0, 1] * 5
    dec = decode(branch_induced, word[:8])
    assert dec.arc.contains_point(x)
    assert dec.half_width <= 2.0 ** -9
    # fixed point of the first branch has constant itinerary
    assert encode(branch_induced, Fraction(1, 10), 1)[0] == 0


def test_encode_boundary_error_names_step(branch_induced):
    with pytest.raises(BoundaryOrbitError) as err:
        encode(branch_induced, Fraction(1, 2), 3)
    assert err.value.witness[0] == 0
    with pytest.raises(BoundaryOrbitError) as err2:
        encode(branch_induced, Fraction(1, 4), 5)  # 1/4 -> 1/2 boundary at step 1
    assert err2.value.witness[0] == 1


def test_conjugation_on_random_points(pipeline_induced):
    # encode(T x, d-1) equals the shifted encode(x, d) exactly, and the
    # decoded cylinder contains x with certified width
    part = pipeline_induced.partition
    depth = 12
    pts = sample_interior_points(part, 100, seed=42)
    checked = 0
    for x in pts:
        try:
            word = encode(pipeline_induced, x, depth)
        except BoundaryOrbitError:
            continue  # truncation gap along the orbit: excluded set
        y, _ = pipeline_induced.apply(x)
        assert encode(pipeline_induced, y, depth - 1) == word[1:]
        dec = decode(pipeline_induced, word)
        assert dec.arc.contains_point(x)
        assert float(dec.arc.length) <= dec.width_bound * (1 + 1e-9)
        checked += 1
    assert checked >= 60  # most interior points survive 12 steps


def test_decode_width_bound_doubling(branch_induced):
    word = encode(branch_induced, Fraction(1, 3), 12)
    dec = decode(branch_induced, word)
    part = branch_induced.partition
    assert float(dec.arc.length) == 2.0 ** -12
    assert dec.width_bound == part.sigma_star() ** 12 * part.max_ball_length()
    assert float(dec.arc.length) <= dec.width_bound


def test_markov_image_property(pipeline_induced):
    # N induced steps from a cycle element cover every retained element:
    # chase the cycle images through the balls and check containments
    part = pipeline_induced.partition
    n_balls = len(part.balls)
    covered = set()
    for j, idx in enumerate(part.cycle):
        covered.add((j + 1) % n_balls)
    assert covered == set(range(n_balls))
    # every element lies inside some ball, hence inside the N-step image
    for e in part.elements:
        assert any(
            part.balls[m].contains_arc(e.arc) for m in range(n_balls)
        )


def test_return_time_sum_converges(doubling_partitions_two_caps=None):
    # integrability proxy: sum tau * mass grows but stays bounded in cap
    sysd = doubling_system()
    cover = verify_locally_expanding(sysd)
    parts = [
        build_markov_partition(
            sysd, cover, eps=Fraction(1, 16), tol=Fraction(1, 5), depth_cap=c,
            exhaust=True,
        )
        for c in (6, 8)
    ]
    sums = [
        sum(e.tau * e.arc.length for e in p.elements) for p in parts
    ]
    assert sums[1] > sums[0]
    assert float(sums[1]) < 20.0
