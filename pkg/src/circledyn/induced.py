"""The induced Markov map over a partition: branch dispatch, cylinder
refinement, inverse branches, inducing-scheme verification (H1 to H5),
bounded distortion, and the coding between points and itineraries.

Cylinders are indexed in forward itinerary order: the word (a_0, ..., a_n)
collects the points of element a_0 whose induced orbit visits a_1, ...,
a_n, matching the shift cylinders of the symbolic model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .circle import Arc, mod1, _num
from .errors import BoundaryOrbitError, InvalidWordError, MathFailure
from .partition import check_fcp, check_fip, transition_matrix
from .semigroup import derivative_along_word


@dataclass
class InducedMap:
    """T(x) = h_i(x) on int(M_i), with the return time tau(M_i) = |word|."""

    partition: object
    matrix: object

    def __post_init__(self):
        self._order = sorted(
            range(self.partition.n_elements),
            key=lambda i: self.partition.elements[i].arc.lo,
        )
        self._los = [self.partition.elements[i].arc.lo for i in self._order]
        groups = {}
        for j, e in enumerate(self.partition.elements):
            groups.setdefault(e.image_ball, []).append(j)
        self._image_groups = groups

    @property
    def system(self):
        return self.partition.system

    @property
    def domain_mass(self):
        return self.partition.element_mass()

    def tau(self, i):
        return self.partition.elements[i].tau

    def element_of(self, x):
        """Index of the element whose interior contains x."""
        x = mod1(x)
        import bisect

        pos = bisect.bisect_right(self._los, x) - 1
        for cand in (self._order[pos], self._order[(pos + 1) % len(self._order)],
                     self._order[pos - 1]):
            e = self.partition.elements[cand]
            if e.arc.contains_point(x, closed=False):
                return cand
            if e.arc.contains_point(x, closed=True):
                raise BoundaryOrbitError(
                    f"x = {float(x)} lies on the boundary of element {cand}",
                    witness=float(x),
                )
        raise BoundaryOrbitError(
            f"x = {float(x)} is outside the retained inducing domain",
            witness=float(x),
        )

    def apply(self, x):
        """One induced step; raises on boundary or truncation-gap points."""
        i = self.element_of(x)
        e = self.partition.elements[i]
        y = x
        for s in e.word:
            y = self.system.gen(s).map(y)
        return y, i

    def deriv(self, x):
        i = self.element_of(x)
        return derivative_along_word(self.system, self.partition.elements[i].word, x)

    def log_deriv_on(self, i, x):
        return math.log(
            float(derivative_along_word(
                self.system, self.partition.elements[i].word, x))
        )

    def predecessors(self, j):
        """Elements i with t_{ij} = 1, grouped through the image balls."""
        out = []
        arc = self.partition.elements[j].arc
        for m, ball in enumerate(self.partition.balls):
            if ball.contains_arc(arc, tol=self.partition.float_tol):
                out.extend(self._image_groups.get(m, ()))
        return sorted(set(out))


def induce(partition, matrix=None):
    """Piecewise map with exact branch dispatch by arc membership."""
    if matrix is None:
        matrix = transition_matrix(partition)
    return InducedMap(partition=partition, matrix=matrix)


# ---------------------------------------------------------------------------
# Cylinders


@dataclass(frozen=True)
class Cylinder:
    word: tuple  # forward itinerary over element indices
    arc: Arc
    total_time: int  # sum of return times along the word
    image_ball: int  # ball carried by the final composition

    @property
    def depth(self):
        return len(self.word)


def refine_cylinder(induced, word):
    """Arc of points in element word[0] whose induced orbit visits the
    remaining elements in order; computed by exact inverse-branch pullback
    right to left, asserting the contraction inequality at each step."""
    word = tuple(int(a) for a in word)
    if not word:
        raise InvalidWordError("cylinder word must be nonempty")
    part = induced.partition
    for a, b in zip(word, word[1:]):
        if not induced.matrix.entry(a, b):
            raise InvalidWordError(f"transition {a} -> {b} not allowed")
    tol = part.float_tol
    arc = part.elements[word[-1]].arc
    sigma = part.sigma
    for a in reversed(word[:-1]):
        e = part.elements[a]
        prev_len = arc.length
        arc = e.pull_back_arc(induced.system, arc, tol=tol)
        bound = prev_len * sigma ** e.tau
        if float(arc.length) > float(bound) * (1 + 1e-9):
            raise MathFailure(
                f"cylinder refinement at element {a} contracted only to "
                f"{float(arc.length)} > {float(bound)}"
            )
    return Cylinder(
        word=word,
        arc=arc,
        total_time=sum(part.elements[a].tau for a in word),
        image_ball=part.elements[word[0]].image_ball,
    )


@dataclass(frozen=True)
class InverseBranch:
    word: tuple  # (i_1, ..., i_n): the branch h_{i_n}^-1 o ... o h_{i_1}^-1
    target: int  # source element k the branch is defined on
    arc: Arc     # image cylinder inside element i_n

    def __call__(self, induced, y):
        part = induced.partition
        for i in self.word:
            y = part.elements[i].pull_back_point(induced.system, y,
                                                 tol=part.float_tol)
        return y


def inverse_branches(induced, k, depth):
    """All inverse branches of the depth-fold induced map landing on
    int(M_k), enumerated over allowed reverse paths."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    part = induced.partition
    paths = [[k]]
    for _ in range(depth):
        paths = [[i] + p for p in paths for i in induced.predecessors(p[0])]
    out = []
    for p in paths:
        # p = [i_n, ..., i_1, k] is the forward itinerary of the branch image
        cyl = refine_cylinder(induced, tuple(p))
        out.append(InverseBranch(word=tuple(reversed(p[:-1])), target=k,
                                 arc=cyl.arc))
    return out


# ---------------------------------------------------------------------------
# Inducing-scheme verification


def analytic_distortion_bound(partition):
    """K_1 = exp(C (D_B)^alpha / (1 - sigma^alpha)) from the family's
    log-derivative Hölder data; exactly 1 for affine systems."""
    C, alpha = partition.system.holder_log_deriv()
    if C == 0:
        return 1.0
    D = partition.max_ball_length()
    sigma = partition.sigma
    return math.exp(C * D ** alpha / (1 - sigma ** alpha))


@dataclass
class ConditionReport:
    ok: bool
    detail: dict


@dataclass
class InducingReport:
    h1: ConditionReport
    h2: ConditionReport
    h3: ConditionReport
    h4: ConditionReport
    h5: ConditionReport

    @property
    def all_ok(self):
        return all(r.ok for r in (self.h1, self.h2, self.h3, self.h4, self.h5))


def _h2_margin(induced, e):
    """Largest ladder fraction of the image ball by which the branch of
    h_e extends diffeomorphically beyond the element."""
    part = induced.partition
    system = induced.system
    ball_len = part.balls[e.image_ball].length
    for frac in (Fraction(1, 4), Fraction(1, 8), Fraction(1, 16), Fraction(1, 64)):
        delta = ball_len * frac
        ok = True
        lo, hi = -delta, e.lens[-1] + delta
        for j in range(len(e.word) - 1, -1, -1):
            g = system.gen(e.word[j]).map
            lo = g.invert_delta(e.los[j], lo)
            hi = g.invert_delta(e.los[j], hi)
            # the enlarged step arc must stay strictly monotone for the
            # generator: guaranteed when shorter than one full turn
            if hi - lo >= 1:
                ok = False
                break
        if ok:
            return frac
    return None


def verify_inducing_scheme(induced, grid=8, h3_depth=8, h5_grid=5, seed=7):
    """Certify H1 (FIP and FCP), H2 (diffeomorphic extension margin),
    H3 (generation via cylinder-diameter decay), H4 (uniform expansion),
    and H5 (bounded distortion against the analytic constant)."""
    part = induced.partition
    system = induced.system

    fip_ok, _ = check_fip(part)
    fcp_ok, fcp_witness = check_fcp(part, induced.matrix)
    h1 = ConditionReport(fip_ok and fcp_ok, {
        "fip": fip_ok, "fcp": fcp_ok,
        "fcp_witness": None if fcp_ok else fcp_witness,
    })

    margins = []
    h2_witness = None
    for e in part.elements:
        m = _h2_margin(induced, e)
        if m is None:
            h2_witness = e.index
            break
        margins.append(m)
    h2 = ConditionReport(h2_witness is None, {
        "min_margin": None if not margins else float(min(margins)),
        "witness": h2_witness,
    })

    sigma_star = part.sigma_star()
    d0 = part.max_ball_length()
    rng = np.random.default_rng(seed)
    table = {}
    h3_ok = True
    for _ in range(40):
        word = [int(rng.integers(part.n_elements))]
        for _ in range(h3_depth - 1):
            succ = induced.matrix.row(word[-1])
            word.append(int(succ[rng.integers(len(succ))]))
        for d in range(1, len(word) + 1):
            cyl = refine_cylinder(induced, tuple(word[:d]))
            w = float(cyl.arc.length)
            table[d] = max(table.get(d, 0.0), w)
            if w > sigma_star ** (d - 1) * float(
                part.elements[word[d - 1]].arc.length
            ) * (1 + 1e-9):
                h3_ok = False
    for d, w in table.items():
        if w > sigma_star ** d * d0 * (1 + 1e-9):
            h3_ok = False
    h3 = ConditionReport(h3_ok, {
        "sigma_star": sigma_star, "d0": d0,
        "max_width_by_depth": table,
    })

    min_expansion = math.inf
    h4_witness = None
    for e in part.elements:
        for t in range(grid):
            x = e.arc.sample(Fraction(2 * t + 1, 2 * grid))
            d = float(derivative_along_word(system, e.word, x))
            if d < min_expansion:
                min_expansion = d
                h4_witness = (e.index, float(x))
    h4_ok = min_expansion > 1.0 / part.sigma
    h4 = ConditionReport(h4_ok, {
        "min_abs_deriv": min_expansion,
        "required": 1.0 / part.sigma,
        "at": h4_witness,
    })

    k1 = analytic_distortion_bound(part)
    worst = 1.0
    for e in part.elements:
        vals = []
        for t in range(h5_grid):
            x = e.arc.sample(Fraction(2 * t + 1, 2 * h5_grid))
            vals.append(float(derivative_along_word(system, e.word, x)))
        ratio = max(vals) / min(vals)
        worst = max(worst, ratio)
    h5 = ConditionReport(worst <= k1 * (1 + 1e-9), {
        "max_ratio": worst, "analytic_k1": k1,
    })

    return InducingReport(h1=h1, h2=h2, h3=h3, h4=h4, h5=h5)


@dataclass
class DistortionReport:
    empirical: float
    analytic: float
    samples: int

    @property
    def ok(self):
        return self.empirical <= self.analytic * (1 + 1e-9)


def distortion_bound_induced(induced, n_cylinders=100, max_depth=6, seed=11,
                             points_per_cylinder=4):
    """Empirical distortion sup/inf of |det DT^j| over random cylinders
    against the analytic bound; j runs over 0 .. depth."""
    part = induced.partition
    system = induced.system
    rng = np.random.default_rng(seed)
    worst = 1.0
    for _ in range(n_cylinders):
        depth = int(rng.integers(1, max_depth + 1))
        word = [int(rng.integers(part.n_elements))]
        for _ in range(depth - 1):
            succ = induced.matrix.row(word[-1])
            word.append(int(succ[rng.integers(len(succ))]))
        cyl = refine_cylinder(induced, tuple(word))
        samples = [
            cyl.arc.sample(Fraction(2 * t + 1, 2 * points_per_cylinder))
            for t in range(points_per_cylinder)
        ]
        # generator word of T^j on the cylinder is the concatenation of the
        # element words along the itinerary
        gen_word = []
        for j, a in enumerate(word):
            gen_word.extend(part.elements[a].word)
            vals = [
                float(derivative_along_word(system, tuple(gen_word), x))
                for x in samples
            ]
            worst = max(worst, max(vals) / min(vals))
    return DistortionReport(
        empirical=worst,
        analytic=analytic_distortion_bound(part),
        samples=n_cylinders,
    )


# ---------------------------------------------------------------------------
# Coding


def encode(induced, x, depth):
    """Forward itinerary of x over the partition elements; boundary or
    truncation-gap orbits raise with the offending step."""
    out = []
    y = x
    for t in range(depth):
        try:
            i = induced.element_of(y)
        except BoundaryOrbitError as err:
            raise BoundaryOrbitError(
                f"orbit leaves the coding domain at step {t}: {err}",
                witness=(t, err.witness),
            ) from err
        out.append(i)
        if t + 1 < depth:
            e = induced.partition.elements[i]
            for s in e.word:
                y = induced.system.gen(s).map(y)
    return out


@dataclass(frozen=True)
class Decoded:
    arc: Arc
    point: object
    half_width: float
    width_bound: float


def decode(induced, prefix):
    """Cylinder arc of an itinerary prefix with its midpoint estimate; the
    half-width is a certified error bar and obeys the contraction bound."""
    cyl = refine_cylinder(induced, tuple(prefix))
    part = induced.partition
    bound = part.sigma_star() ** len(prefix) * part.max_ball_length()
    width = float(cyl.arc.length)
    if width > bound * (1 + 1e-9):
        raise MathFailure(
            f"decoded cylinder width {width} exceeds bound {bound}"
        )
    return Decoded(
        arc=cyl.arc,
        point=cyl.arc.midpoint,
        half_width=width / 2,
        width_bound=bound,
    )


def sample_interior_points(partition, count, seed=0, margin=Fraction(1, 64)):
    """Deterministic interior points distributed by element mass.

    Parameters use an odd prime-power denominator, so for affine systems
    the sampled orbits can never collapse onto the (2,3)-adic lattice of
    element endpoints: the points stay outside every T^{-k} boundary set.
    """
    rng = np.random.default_rng(seed)
    masses = np.array([float(e.arc.length) for e in partition.elements])
    masses = masses / masses.sum()
    idx = rng.choice(len(masses), size=count, p=masses)
    q = 5 ** 13
    pts = []
    for i in idx:
        t = margin + (1 - 2 * margin) * Fraction(int(rng.integers(1, q)), q)
        pts.append(partition.elements[int(i)].arc.sample(t))
    return pts
