"""Dynamical balls, Vitali coverings, and truncated countable Markov
partitions with the finite-images and finite-cycle properties.

The partition is materialized up to a word-length cap with an explicit
uncovered-mass budget; every downstream statement carries that budget.
Elements are closed pullbacks of a fixed finite cover of open epsilon
balls, each carrying the generator word realizing it, so the whole object
stays exact for affine systems.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .circle import (
    Arc,
    lebesgue_number_exact,
    mod1,
    region_overlaps,
    region_subtract,
    region_total,
    split_arc_at_points,
    _num,
)
from .errors import ConstructionFailure, InvalidWordError, MathFailure
from .semigroup import (
    SLACK,
    BranchTube,
    tube_ball_lifts,
    tube_extend,
    tube_forward_offsets,
    tube_restrict,
    tube_start,
    word_orbit,
)


# ---------------------------------------------------------------------------
# Dynamical balls


@dataclass(frozen=True)
class DynamicalBall:
    """Points whose orbit along ``word`` stays eps-close to the orbit of
    ``center`` for len(word)+1 steps; realized set is a single arc."""

    center: object
    word: tuple
    eps: object
    arc: Arc
    closed: bool = False

    @property
    def n(self):
        return len(self.word) + 1


def dynamical_ball(system, x, word, eps):
    """Realize B(x, n, w, eps) by intersecting inverse-branch pullbacks of
    the eps-arcs around each orbit point; x itself always survives, so the
    result is a nonempty arc around x."""
    eps = _num(eps)
    x = mod1(x)
    word = tuple(word)
    pts = word_orbit(system, word, x)
    lo_off, hi_off = -eps, eps
    for j in range(len(word) - 1, -1, -1):
        g = system.gen(word[j]).map
        lo_off = g.invert_delta(pts[j], lo_off)
        hi_off = g.invert_delta(pts[j], hi_off)
        lo_off = max(lo_off, -eps)
        hi_off = min(hi_off, eps)
    return DynamicalBall(
        center=x, word=word, eps=eps, arc=Arc(mod1(x + lo_off), hi_off - lo_off)
    )


def pull_back_ball(system, y, eps, word, x, tol=1e-9):
    """Pull the ball B(y, eps) back through the monotone branch of f_w at
    x; requires f_w(x) = y.  By the contraction of inverse branches this
    equals the dynamical (n+1)-ball around x."""
    eps = _num(eps)
    word = tuple(word)
    pts = word_orbit(system, word, x)
    err = (pts[-1] - _num(y)) % 1
    if min(err, 1 - err) > tol:
        raise InvalidWordError(
            f"accessibility violated: f_w(x) = {float(pts[-1])} is not {float(y)}"
        )
    lo_off, hi_off = -eps, eps
    for j in range(len(word) - 1, -1, -1):
        g = system.gen(word[j]).map
        lo_off = g.invert_delta(pts[j], lo_off)
        hi_off = g.invert_delta(pts[j], hi_off)
    return DynamicalBall(
        center=mod1(x), word=word, eps=eps,
        arc=Arc(mod1(x + lo_off), hi_off - lo_off),
    )


def diameter_distortion_constant(system, cover, holder=None):
    """Uniform lower bound K <= 1 on min/max lifted-diameter ratios of
    pulled-back balls: K = exp(-C (2 gamma)^alpha / (1 - sigma^alpha)).

    ``holder`` optionally supplies the (C, alpha) data of the
    log-derivatives; by default the closed-form family bound is used.
    gamma is the largest metric diameter of a chart-neighborhood image.
    """
    C, alpha = holder if holder is not None else system.holder_log_deriv()
    if C == 0:
        return 1.0
    gamma = 0.0
    for chart in cover.charts:
        g = system.gen(chart.symbol).map
        grown = min(1, float(chart.arc.length) + 2 * cover.r)
        image_len = g.lift_delta(chart.arc.lo - cover.r, grown)
        gamma = max(gamma, min(float(image_len), 0.5))
    sigma = cover.sigma
    return math.exp(-C * (2 * gamma) ** alpha / (1 - sigma ** alpha))


# ---------------------------------------------------------------------------
# Partition elements


@dataclass
class PartitionElement:
    """Closed dynamical ball M_i with its word, image ball, and the branch
    anchors (los, lens) of the tube realizing h_i = f_w on it."""

    index: int
    arc: Arc
    word: tuple
    image_ball: int
    los: list
    lens: list

    @property
    def tau(self):
        return len(self.word)

    def image_offset(self, y, tol=0.0):
        """Lift offset of y inside the image arc, clamped within tol."""
        off = (_num(y) - self.los[-1]) % 1
        if off <= self.lens[-1]:
            return off
        if 1 - off <= tol:  # numerically just below the image anchor
            return 0 * off
        if off - self.lens[-1] <= tol:
            return self.lens[-1]
        raise InvalidWordError("point outside the element image")

    def pull_back_arc(self, system, target, tol=0.0):
        """Sub-arc of the element mapping exactly onto ``target``."""
        off = self.image_offset(target.lo, tol=tol)
        hi = off + target.length
        if hi > self.lens[-1]:
            if hi - self.lens[-1] > tol:
                raise InvalidWordError("target arc outside the element image")
            hi = self.lens[-1]
            off = hi - target.length
        tube = BranchTube(word=self.word, los=self.los, lens=self.lens)
        sub = tube_restrict(system, tube, off, hi, width=target.length)
        return sub.domain

    def pull_back_point(self, system, y, tol=0.0):
        off = self.image_offset(y, tol=tol)
        for j in range(len(self.word) - 1, -1, -1):
            off = system.gen(self.word[j]).map.invert_delta(self.los[j], off)
        return mod1(self.los[0] + off)


@dataclass
class CountableMarkovPartition:
    """Truncated countable Markov partition over a finite ball cover.

    ``cycle[j]`` indexes the element whose branch maps its interior onto
    ball j+1 (mod N); ``uncovered_mass`` is the Lebesgue mass of the
    circle not covered by element interiors.
    """

    system: object
    balls: list
    elements: list
    cycle: list
    sigma: float
    uncovered_mass: object
    eps: object = None
    tol: object = None
    depth_cap: int = 0
    kind: str = "pipeline"

    @property
    def exact(self):
        return self.system.exact and all(
            isinstance(b.lo, Fraction) for b in self.balls
        )

    @property
    def float_tol(self):
        return 0 if self.exact else 1e-12

    @property
    def n_elements(self):
        return len(self.elements)

    def containing_balls(self, i):
        arc = self.elements[i].arc
        return [
            m
            for m, b in enumerate(self.balls)
            if b.contains_arc(arc, tol=self.float_tol)
        ]

    def boundary_points(self):
        pts = []
        for b in self.balls:
            pts.append(b.lo)
            pts.append(b.hi)
        return pts

    def element_mass(self):
        return region_total([e.arc for e in self.elements])

    def sigma_star(self):
        """Per-symbol contraction max_i sigma^(tau_i) of the induced map."""
        return max(self.sigma ** e.tau for e in self.elements)

    def max_ball_length(self):
        return max(float(b.length) for b in self.balls)

    def validate(self):
        """Interior disjointness, image exactness, and mass accounting."""
        slack = 0 if self.exact else 5e-13
        order = sorted(range(len(self.elements)), key=lambda i: self.elements[i].arc.lo)
        for a, b in zip(order, order[1:] + order[:1]):
            ea, eb = self.elements[a].arc, self.elements[b].arc
            gap = (eb.lo - ea.lo) % 1
            if gap + slack < ea.length and len(order) > 1:
                raise MathFailure(
                    f"element interiors {a} and {b} overlap", witness=(a, b)
                )
        for e in self.elements:
            ball = self.balls[e.image_ball]
            errs = [
                float((e.los[-1] - ball.lo) % 1),
                float((e.lens[-1] - ball.length)),
            ]
            err = min(errs[0], 1 - errs[0]) + abs(errs[1])
            if err > 1e-10:
                raise MathFailure(
                    f"element {e.index} image differs from its ball by {err}",
                    witness=e.index,
                )
        total = self.element_mass() + self.uncovered_mass
        if abs(float(total) - 1.0) > 1e-9:
            raise MathFailure(f"mass accounting off: {float(total)}")
        return True


# ---------------------------------------------------------------------------
# Vitali families


@dataclass(frozen=True)
class VitaliTile:
    arc: Arc
    word: tuple
    ball: int
    order: int
    los: tuple
    lens: tuple

    @property
    def depth(self):
        return len(self.word)


@dataclass
class VitaliFamily:
    tiles: list
    depth: int
    cap: int
    complete: bool
    uncovered_grid: list


def _start_tubes(system, cover, domain=None):
    tubes = []
    for s in range(system.k):
        if cover.symbol_has_full_chart(s):
            arcs = [domain if domain is not None else Arc(Fraction(0), Fraction(1))]
        else:
            charts = cover.chart_arcs(s)
            if domain is None:
                arcs = list(charts)
            else:
                arcs = [p for ch in charts for p in domain.intersect(ch)]
        tubes.extend(tube_start(system, s, a) for a in arcs)
    return tubes


def _tube_tiles(system, tube, balls, order_start, window_region=None):
    """All ball pullbacks of a tube, optionally restricted to image-lift
    windows covering a target region of the tube domain."""
    tiles = []
    order = order_start
    windows = [None]
    if window_region is not None:
        dom = tube.domain
        windows = []
        for g in window_region:
            for piece in dom.intersect(g):
                off = (piece.lo - dom.lo) % 1
                windows.append(
                    tube_forward_offsets(system, tube, off, off + piece.length)
                )
    for window in windows:
        for j, ball in enumerate(balls):
            for m, start in tube_ball_lifts(system, tube, ball, window=window):
                sub = tube_restrict(system, tube, start, start + ball.length,
                                    width=ball.length)
                tiles.append(
                    VitaliTile(
                        arc=sub.domain,
                        word=tube.word,
                        ball=j,
                        order=order,
                        los=tuple(sub.los),
                        lens=tuple(sub.lens),
                    )
                )
                order += 1
    return tiles


def build_vitali_family(system, cover, balls, depth, cap=None, grid=256,
                        max_tiles=500_000):
    """Enumerate the closed dynamical balls M_{n,j,w} with depth <= n <= cap.

    Each tile records the word, image ball, and realized arc.  A test grid
    is checked for coverage; failures are reported rather than raised (the
    family may legitimately be truncated too early).  In dimension one the
    diameter-versus-measure Vitali bound holds with constant 1 because
    tiles are arcs.
    """
    if cap is None:
        cap = depth
    tiles = []
    if cap >= depth:
        frontier = _start_tubes(system, cover)
        for level in range(1, cap + 1):
            if level >= depth:
                for tube in frontier:
                    tiles.extend(_tube_tiles(system, tube, balls, len(tiles)))
                    if len(tiles) > max_tiles:
                        raise ConstructionFailure(
                            f"vitali family exceeded {max_tiles} tiles"
                        )
            if level < cap:
                nxt = []
                for tube in frontier:
                    for s in system.allowed_next(tube.word[-1]):
                        nxt.extend(tube_extend(system, cover, tube, s))
                frontier = nxt
    uncovered = []
    for t in range(grid):
        x = Fraction(2 * t + 1, 2 * grid)
        if not any(tile.arc.contains_point(x) for tile in tiles):
            uncovered.append(x)
    return VitaliFamily(
        tiles=tiles, depth=depth, cap=cap, complete=not uncovered,
        uncovered_grid=uncovered,
    )


@dataclass
class VitaliSelection:
    selected: list
    uncovered_mass: object
    reached_tol: bool


def _clean_region(region, exact):
    """Drop float slivers below representable scale; their mass is
    reported as permanently uncovered."""
    if exact:
        return region, Fraction(0)
    dropped = 0.0
    kept = []
    for g in region:
        if g.length <= 1e-14:
            dropped += float(g.length)
        else:
            kept.append(g)
    return kept, dropped


def _take_tile(region, arc, tol):
    """Remove a tile from the region; returns the clipped arc actually
    removed, or None when the tile does not fit inside one region arc."""
    for i, g in enumerate(region):
        if g.contains_arc(arc, tol=tol):
            if tol:
                pieces = g.intersect(arc)
                if not pieces:
                    return None, region
                clipped = max(pieces, key=lambda p: p.length)
            else:
                clipped = arc
            new_region = region[:i] + g.subtract(clipped) + region[i + 1:]
            return clipped, new_region
    return None, region


def vitali_select(target, family, tol=1e-3, float_tol=0):
    """Greedy largest-first disjoint selection inside an open target set.

    ``target`` is an arc or list of arcs.  Ties break by enumeration
    order.  Stops once the uncovered mass inside the target drops below
    ``tol``; flags the result when the family is too shallow to reach it.
    """
    region = list(target) if isinstance(target, (list, tuple)) else [target]
    selected = []
    tiles = sorted(family.tiles, key=lambda t: (-t.arc.length, t.order))
    mass = region_total(region)
    for tile in tiles:
        if mass < tol:
            break
        clipped, region = _take_tile(region, tile.arc, float_tol)
        if clipped is not None:
            selected.append(tile)
            mass = mass - clipped.length
    return VitaliSelection(
        selected=selected, uncovered_mass=mass, reached_tol=bool(mass < tol)
    )


# ---------------------------------------------------------------------------
# Cycle elements and the full construction


def _tile_admissible(arc, forbidden, occupied, tol):
    probe = -tol if tol else 0
    for q in forbidden:
        if arc.contains_point(q, closed=False, tol=probe):
            return False
    for occ in occupied:
        if arc.intersect(occ):
            if tol:
                # ignore overlaps at float-rounding scale
                if all(p.length <= 1e-12 for p in arc.intersect(occ)):
                    continue
            return False
    return True


def find_cycle_element(system, cover, source, target, forbidden, occupied,
                       horizon):
    """Shortest-word monotone branch over a sub-arc of ``source`` mapping
    exactly onto ``target``, avoiding forbidden boundary points and
    occupied arcs.  Returns the restricted tube or None."""
    tol = 0 if system.exact else 1e-12
    frontier = _start_tubes(system, cover, domain=source)
    for _ in range(horizon):
        for tube in frontier:
            for m, start in tube_ball_lifts(system, tube, target):
                sub = tube_restrict(system, tube, start, start + target.length,
                                    width=target.length)
                if _tile_admissible(sub.domain, forbidden, occupied, tol):
                    return sub
        nxt = []
        for tube in frontier:
            for s in system.allowed_next(tube.word[-1]):
                nxt.extend(tube_extend(system, cover, tube, s))
        frontier = nxt
    return None


def standard_balls(eps):
    """N = ceil(3/eps) equally spaced open eps-balls."""
    eps = _num(eps)
    n = math.ceil(3 / eps)
    return [Arc(mod1(Fraction(j, n) - eps), 2 * eps) for j in range(n)]


# deterministic tractability caps for the gap-directed tiling stage
MAX_TUBES_PER_LEVEL = 64
MAX_TUBE_MISSES_PER_GAP = 48


def _first_tile_in_gap(system, tube, balls, gap, float_tol):
    """First (ball order, lift order) pullback tile of the tube lying
    inside the gap, or None.

    A pullback of a ball through this branch has length about
    ball_length / (average slope); branches whose tiles cannot fit the
    gap are rejected on that one comparison before any pullback work.
    """
    slope = tube.lens[-1] / tube.lens[0]
    predicted = balls[0].length / slope
    if predicted * (1 - 1e-3) > gap.length:
        return None
    dom = tube.domain
    pieces = [gap] if dom.length == 1 else dom.intersect(gap)
    for piece in pieces:
        off = (piece.lo - dom.lo) % 1
        window = tube_forward_offsets(system, tube, off, off + piece.length)
        for j, ball in enumerate(balls):
            for m, start in tube_ball_lifts(system, tube, ball, window=window):
                sub = tube_restrict(system, tube, start, start + ball.length,
                                    width=ball.length)
                if gap.contains_arc(sub.domain, tol=float_tol):
                    return j, sub
    return None


def _fill_gaps_level(system, frontier, balls, region, elements, min_tile,
                     float_tol):
    """One level of gap-directed tiling: visit gaps in circle order, place
    the first fitting pullback tile from the earliest word offering one,
    and requeue the remainders until nothing at this level fits."""
    from collections import deque

    queue = deque(sorted(region, key=lambda g: g.lo))
    done = []
    dropped = 0 if float_tol == 0 else 0.0
    while queue:
        gap = queue.popleft()
        if float_tol and gap.length <= 1e-14:
            dropped += float(gap.length)
            continue
        if gap.length < min_tile * 0.5:
            done.append(gap)
            continue
        misses = 0
        hit = None
        for tube in frontier:
            found = _first_tile_in_gap(system, tube, balls, gap, float_tol)
            if found is not None:
                hit = found
                break
            misses += 1
            if misses >= MAX_TUBE_MISSES_PER_GAP:
                break
        if hit is None:
            done.append(gap)
            continue
        j, sub = hit
        tile = sub.domain
        if float_tol:
            clipped = max(gap.intersect(tile), key=lambda p: p.length)
        else:
            clipped = tile
        elements.append(
            PartitionElement(
                index=len(elements),
                arc=tile,
                word=sub.word,
                image_ball=j,
                los=list(sub.los),
                lens=list(sub.lens),
            )
        )
        for rest in gap.subtract(clipped):
            queue.append(rest)
    return sorted(done, key=lambda g: g.lo), dropped


def build_markov_partition(system, cover, eps, tol=Fraction(1, 1000),
                           depth_cap=18, horizon=10, min_depth=None,
                           exhaust=False):
    """Assemble the truncated countable Markov partition.

    Steps: fix the ball cover, pin one cycle element per ball mapping onto
    the next ball, then tile the remaining open set with pullback tiles,
    level by level (shorter words first, largest tile first inside each
    gap), until the uncovered mass is below ``tol``.  With ``exhaust`` the
    tiling keeps refining up to the depth cap even after reaching tol.
    """
    eps = _num(eps)
    tol = _num(tol)
    if not eps <= cover.eta / 6:
        raise ValueError(f"need eps <= eta/6 = {cover.eta / 6}, got {float(eps)}")
    balls = standard_balls(eps)
    if not system.exact:
        # keep the whole geometry in one numeric type
        balls = [Arc(float(b.lo), float(b.length)) for b in balls]
    N = len(balls)
    beta = lebesgue_number_exact(balls)
    if beta <= 0:
        raise ConstructionFailure("ball cover has no Lebesgue number")
    float_tol = 0 if system.exact else 1e-12

    boundary = []
    for b in balls:
        boundary.extend((b.lo, b.hi))

    # cycle elements: ball j hosts a branch onto ball j+1 (mod N)
    cycle_tubes = []
    occupied = []
    for j in range(N):
        target = balls[(j + 1) % N]
        sub = find_cycle_element(
            system, cover, balls[j], target, boundary, occupied, horizon
        )
        if sub is None:
            raise ConstructionFailure(
                f"no mixing witness carries ball {j} onto ball {(j + 1) % N} "
                f"within horizon {horizon}",
                witness=(j, (j + 1) % N),
            )
        cycle_tubes.append(sub)
        occupied.append(sub.domain)

    elements = []
    cycle = []
    for j, sub in enumerate(cycle_tubes):
        e = PartitionElement(
            index=len(elements),
            arc=sub.domain,
            word=sub.word,
            image_ball=(j + 1) % N,
            los=list(sub.los),
            lens=list(sub.lens),
        )
        cycle.append(e.index)
        elements.append(e)

    # open remainder: circle minus ball boundaries minus cycle elements
    base = Arc(Fraction(0), Fraction(1)) if system.exact else Arc(0.0, 1.0)
    region = split_arc_at_points(base, boundary)
    for arc in occupied:
        region = region_subtract(region, arc)
    region, dropped = _clean_region(region, system.exact)

    # level loop: minimum depth chosen so tiles are finer than the ball
    # cover's Lebesgue number (guaranteeing every tile sits inside a ball)
    sigma = cover.sigma
    if min_depth is None:
        min_depth = max(1, math.ceil(math.log(float(beta) / float(2 * eps))
                                     / math.log(sigma)))
    max_deriv = max(g.map.deriv_bounds()[1] for g in system.generators)
    min_ball = min(float(b.length) for b in balls)
    frontier = _start_tubes(system, cover)
    level = 1
    mass = region_total(region) + dropped
    while (exhaust or mass > tol) and level <= depth_cap:
        if level >= min_depth:
            region, extra = _fill_gaps_level(
                system, frontier, balls, region, elements,
                min_tile=min_ball / float(max_deriv) ** level,
                float_tol=float_tol,
            )
            dropped += extra
            mass = region_total(region) + dropped
        if (exhaust or mass > tol) and level < depth_cap:
            nxt = []
            for tube in frontier:
                dom = tube.domain
                if dom.length < 1 and not region_overlaps(region, dom):
                    continue
                for s in system.allowed_next(tube.word[-1]):
                    nxt.extend(tube_extend(system, cover, tube, s))
                if len(nxt) >= MAX_TUBES_PER_LEVEL:
                    break
            frontier = nxt[:MAX_TUBES_PER_LEVEL]
        level += 1

    if mass > tol:
        raise ConstructionFailure(
            f"uncovered mass {float(mass)} above tol {float(tol)} at depth "
            f"cap {depth_cap}",
            witness=float(mass),
        )

    part = CountableMarkovPartition(
        system=system,
        balls=balls,
        elements=elements,
        cycle=cycle,
        sigma=sigma,
        uncovered_mass=mass,
        eps=eps,
        tol=tol,
        depth_cap=depth_cap,
        kind="pipeline",
    )
    part.validate()
    return part


def full_branch_partition(system, gen_index=0):
    """The one-step (tau == 1) Markov structure of a single full-branch
    generator: elements are its monotone branch domains, the single image
    ball is the circle minus the branch cut at 0."""
    g = system.gen(gen_index)
    a = g.degree
    if g.family == "affine":
        cuts = sorted(mod1((m - g.map.b) / a) for m in range(a))
    else:
        b = g.map.b
        cuts = sorted(
            mod1(g.map.invert_delta(0.0, m - b))
            for m in range(math.ceil(b), math.ceil(b) + a)
        )
    ball = Arc(Fraction(0), Fraction(1)) if g.exact else Arc(0.0, 1)
    elements = []
    for t in range(a):
        lo = cuts[t]
        hi = cuts[(t + 1) % a]
        arc = Arc(lo, (hi - lo) % 1)
        elements.append(
            PartitionElement(
                index=t,
                arc=arc,
                word=(gen_index,),
                image_ball=0,
                los=[lo, g.map(lo)],
                lens=[arc.length, g.map.lift_delta(lo, arc.length)],
            )
        )
    lo_d, _ = g.map.deriv_bounds()
    part = CountableMarkovPartition(
        system=system,
        balls=[ball],
        elements=elements,
        cycle=[0],
        sigma=(1 + SLACK) / float(lo_d),
        uncovered_mass=Fraction(0),
        eps=None,
        tol=Fraction(0),
        depth_cap=1,
        kind="full-branch",
    )
    part.validate()
    return part


# ---------------------------------------------------------------------------
# Transition matrix and structure checks


@dataclass
class TransitionMatrix:
    """t_{ij} = 1 iff int(M_i) meets h_i^{-1}(int(M_j)); rows depend only
    on the image ball of i, so the matrix is stored factored: row i is the
    membership set of ball img[i]."""

    n: int
    row_class: np.ndarray     # row class of each state (image ball index)
    class_members: list       # class c -> sorted int array of j with t=1
    _member_sets: list = field(default=None, repr=False)

    def __post_init__(self):
        if self._member_sets is None:
            self._member_sets = [set(map(int, m)) for m in self.class_members]

    @property
    def q(self):
        return len(self.class_members)

    def entry(self, i, j):
        return int(j) in self._member_sets[int(self.row_class[i])]

    def row(self, i):
        return self.class_members[int(self.row_class[i])]

    def successors(self, i):
        return self.row(i)

    def to_dense(self):
        t = np.zeros((self.n, self.n), dtype=bool)
        for i in range(self.n):
            t[i, self.row(i)] = True
        return t

    @classmethod
    def from_dense(cls, dense):
        dense = np.asarray(dense, dtype=bool)
        n = dense.shape[0]
        patterns = {}
        row_class = np.empty(n, dtype=np.int64)
        members = []
        for i in range(n):
            key = dense[i].tobytes()
            if key not in patterns:
                patterns[key] = len(members)
                members.append(np.nonzero(dense[i])[0].astype(np.int64))
            row_class[i] = patterns[key]
        return cls(n=n, row_class=row_class, class_members=members)

    def row_nonempty(self):
        return np.array([len(self.row(i)) > 0 for i in range(self.n)])

    def col_nonempty(self):
        cols = np.zeros(self.n, dtype=bool)
        for m in self.class_members:
            cols[m] = True
        return cols


def transition_matrix(partition):
    """Exact containment test: t_{ij} = 1 iff M_j sits inside the image
    ball of element i (the Markov property reduces overlap to containment)."""
    N = len(partition.balls)
    members = [[] for _ in range(N)]
    for j in range(partition.n_elements):
        for m in partition.containing_balls(j):
            members[m].append(j)
    row_class = np.array(
        [e.image_ball for e in partition.elements], dtype=np.int64
    )
    return TransitionMatrix(
        n=partition.n_elements,
        row_class=row_class,
        class_members=[np.array(sorted(m), dtype=np.int64) for m in members],
    )


def check_fip(partition):
    """Images of element interiors all belong to the finite ball list."""
    images = []
    for e in partition.elements:
        ball = partition.balls[e.image_ball]
        d = (e.los[-1] - ball.lo) % 1
        err = float(min(d, 1 - d)) + abs(float(e.lens[-1] - ball.length))
        if err > 1e-10:
            return False, images
        images.append(ball)
    distinct = {(b.lo, b.length) for b in images}
    allowed = {(b.lo, b.length) for b in partition.balls}
    return distinct <= allowed, partition.balls


def check_fcp(partition, matrix):
    """Every element reaches some cycle element and is reached by one."""
    cyc = partition.cycle
    for ell in range(partition.n_elements):
        into = any(matrix.entry(b, ell) for b in cyc)
        out = any(matrix.entry(ell, b) for b in cyc)
        if not (into and out):
            return False, ell
    return True, cyc


def check_bip(matrix, bset):
    """Big images and preimages relative to the candidate finite set."""
    bset = list(bset)
    for a in range(matrix.n):
        if not any(matrix.entry(b, a) for b in bset):
            return False
        if not any(matrix.entry(a, b) for b in bset):
            return False
    return True


@dataclass
class MixingPower:
    mixing: bool
    power: int | None
    inconclusive: bool


def check_shift_mixing(matrix, horizon=16):
    """Primitivity of the truncated matrix via its row classes.

    reach_t[c] = states reachable in exactly t steps from any state with
    row class c; t^n is all-positive iff every class reaches every state.
    """
    q = matrix.q
    n = matrix.n
    if n == 0:
        return MixingPower(False, None, True)
    reach = np.zeros((q, n), dtype=bool)
    for c in range(q):
        reach[c, matrix.class_members[c]] = True
    U = np.zeros((q, q), dtype=bool)
    for c in range(q):
        U[c, np.unique(matrix.row_class[matrix.class_members[c]])] = True
    flags = []
    cur = reach
    for _ in range(horizon + 1):
        flags.append(bool(cur.all()))
        cur = U @ cur
    for t in range(horizon):
        if flags[t] and flags[t + 1]:
            return MixingPower(True, t + 1, False)
    return MixingPower(False, None, True)
