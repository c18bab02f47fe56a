"""Expanding generator families on the circle and the driven random walk.

A system is a finite list of circle maps (each a local diffeomorphism with
an exact derivative oracle) together with a row-stochastic driving matrix
restricting which generator may follow which.  Two closed-form families
are supported:

* affine:     x -> a x + b (mod 1), integer a >= 2
* perturbed:  x -> a x + b + c sin(2 pi x) (mod 1), monotone when
              a - 2 pi |c| > 0, uniformly expanding when a - 2 pi |c| > 1

Both have exact monotone lifts, so forward images and inverse branches of
arcs can be computed locally (as increments relative to an anchor point on
the orbit) without precision loss at any depth; the affine family stays in
rational arithmetic end to end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .circle import (
    Arc,
    covers_circle,
    lebesgue_number_exact,
    mod1,
    _num,
)
from .errors import (
    ConfigError,
    CoverGapError,
    InvalidWordError,
    NotLocallyExpandingError,
)

TWO_PI = 2 * math.pi

# multiplicative slack keeping certified inequalities strict under floats
SLACK = 1e-6


# ---------------------------------------------------------------------------
# Map families


@dataclass(frozen=True)
class AffineMap:
    """x -> a x + b (mod 1) with integer degree a >= 2."""

    a: int
    b: object

    def __post_init__(self):
        if self.a < 2:
            raise ConfigError(f"affine degree must be >= 2, got {self.a}")
        object.__setattr__(self, "b", _num(self.b))

    def __call__(self, x):
        return mod1(self.a * _num(x) + self.b)

    def deriv(self, x):
        return self.a

    def deriv_bounds(self):
        return self.a, self.a

    def lift_delta(self, x0, dx):
        """F(x0 + dx) - F(x0) for the monotone lift F."""
        return self.a * dx

    def invert_delta(self, x0, dy):
        """dx >= 0 with lift_delta(x0, dx) == dy (exact)."""
        return dy / self.a

    @property
    def exact(self):
        return isinstance(self.b, Fraction)


@dataclass(frozen=True)
class PerturbedMap:
    """x -> a x + b + c sin(2 pi x) (mod 1); local diffeo iff a > 2 pi |c|."""

    a: int
    b: float
    c: float

    def __post_init__(self):
        if self.a < 2:
            raise ConfigError(f"perturbed degree must be >= 2, got {self.a}")
        if self.a - TWO_PI * abs(self.c) <= 0:
            raise ConfigError(
                f"not a local diffeomorphism: a - 2pi|c| = "
                f"{self.a - TWO_PI * abs(self.c)} <= 0"
            )

    def __call__(self, x):
        x = float(x)
        return (self.a * x + self.b + self.c * math.sin(TWO_PI * x)) % 1.0

    def deriv(self, x):
        return self.a + TWO_PI * self.c * math.cos(TWO_PI * float(x))

    def deriv_bounds(self):
        r = TWO_PI * abs(self.c)
        return self.a - r, self.a + r

    def lift_delta(self, x0, dx):
        x0 = float(x0)
        dx = float(dx)
        return self.a * dx + self.c * (
            math.sin(TWO_PI * (x0 + dx)) - math.sin(TWO_PI * x0)
        )

    def invert_delta(self, x0, dy):
        """Solve lift_delta(x0, dx) = dy by safeguarded Newton iteration."""
        x0 = float(x0)
        dy = float(dy)
        lo_slope, hi_slope = self.deriv_bounds()
        lo, hi = sorted((dy / hi_slope, dy / lo_slope))
        dx = dy / self.a
        for _ in range(100):
            err = self.lift_delta(x0, dx) - dy
            if abs(err) <= 1e-15 * (1.0 + abs(dy)):
                return dx
            if err > 0:
                hi = min(hi, dx)
            else:
                lo = max(lo, dx)
            dx = dx - err / self.deriv(x0 + dx)
            if not (lo <= dx <= hi):
                dx = (lo + hi) / 2
        return dx

    @property
    def exact(self):
        return False


@dataclass(frozen=True)
class Generator:
    """One generator: a symbol index plus its circle map."""

    index: int
    family: str  # "affine" | "perturbed"
    map: object

    @property
    def degree(self):
        return self.map.a

    @property
    def exact(self):
        return self.map.exact

    def holder_log_deriv(self):
        """(C, alpha) with |log f'(x) - log f'(y)| <= C d(x, y)^alpha.

        Closed form: sup |d/dx log f'| = 4 pi^2 |c| / (a - 2 pi |c|) with
        alpha = 1; zero for the affine family.
        """
        if self.family == "affine":
            return 0.0, 1.0
        c = abs(self.map.c)
        return (TWO_PI ** 2) * c / (self.map.a - TWO_PI * c), 1.0


def affine_generator(index, a, b=0):
    return Generator(index, "affine", AffineMap(a, b))


def perturbed_generator(index, a, b=0.0, c=0.0):
    return Generator(index, "perturbed", PerturbedMap(a, float(b), float(c)))


# ---------------------------------------------------------------------------
# The driven system


@dataclass
class GeneratorSystem:
    """Generator list plus the row-stochastic driving matrix.

    Symbols are 0-based positions in ``generators``.  ``start`` is the
    distribution of the initial code of the random walk (uniform when
    omitted).
    """

    generators: list
    matrix: np.ndarray
    start: np.ndarray = None
    name: str = "system"
    require_irreducible: bool = True  # relax only for negative controls

    def __post_init__(self):
        k = len(self.generators)
        if k < 1:
            raise ConfigError("need at least one generator")
        P = np.asarray(self.matrix, dtype=float)
        if P.shape != (k, k):
            raise ConfigError(f"driving matrix must be {k}x{k}, got {P.shape}")
        if np.any(P < 0):
            raise ConfigError("driving matrix entries must be nonnegative")
        rowsum = P.sum(axis=1)
        bad = np.nonzero(np.abs(rowsum - 1.0) > 1e-12)[0]
        if bad.size:
            raise ConfigError(
                f"row {bad[0]} of driving matrix sums to {rowsum[bad[0]]!r}, "
                "expected 1 within 1e-12"
            )
        self.matrix = P
        if self.start is None:
            self.start = np.full(k, 1.0 / k)
        else:
            self.start = np.asarray(self.start, dtype=float)
            if self.start.shape != (k,) or abs(self.start.sum() - 1.0) > 1e-12:
                raise ConfigError("start distribution must sum to 1")
        if self.require_irreducible:
            cls = _noncommunicating_class(P)
            if cls is not None:
                raise ConfigError(
                    f"driving matrix is reducible: class {sorted(cls)}"
                )

    @property
    def k(self):
        return len(self.generators)

    @property
    def exact(self):
        return all(g.exact for g in self.generators)

    def gen(self, symbol):
        if not 0 <= symbol < self.k:
            raise InvalidWordError(f"symbol {symbol} out of range 0..{self.k - 1}")
        return self.generators[symbol]

    def allowed_next(self, symbol):
        return [j for j in range(self.k) if self.matrix[symbol, j] > 0]

    def driving_admissible(self, word):
        return all(self.matrix[a, b] > 0 for a, b in zip(word, word[1:]))

    def holder_log_deriv(self):
        """Worst-case Hölder data of log-derivatives over the family."""
        pairs = [g.holder_log_deriv() for g in self.generators]
        return max(c for c, _ in pairs), min(a for _, a in pairs)


def _noncommunicating_class(P):
    """None if P is irreducible, else a set of states breaking reachability."""
    k = P.shape[0]
    adj = P > 0
    for i in range(k):
        seen = {i}
        stack = [i]
        while stack:
            u = stack.pop()
            for v in np.nonzero(adj[u])[0]:
                if v not in seen:
                    seen.add(int(v))
                    stack.append(int(v))
        if len(seen) != k:
            return seen
    return None


# ---------------------------------------------------------------------------
# Words


def apply_word(system, word, x):
    """Left-to-right composition f_{w[-1]} o ... o f_{w[0]} at x (mod 1)."""
    y = mod1(x)
    for s in word:
        y = system.gen(s).map(y)
    return y


def word_orbit(system, word, x):
    """[x, f_{w0}(x), ..., f_w(x)]; length len(word)+1."""
    pts = [mod1(x)]
    for s in word:
        pts.append(system.gen(s).map(pts[-1]))
    return pts


def derivative_along_word(system, word, x):
    """Product of generator derivatives along the orbit of x.

    Equals |det D f_w(x)| in dimension one; 1 for the empty word.
    """
    d = 1
    y = mod1(x)
    for s in word:
        g = system.gen(s)
        d = d * g.map.deriv(y)
        y = g.map(y)
    return d


# ---------------------------------------------------------------------------
# Expanding cover


@dataclass(frozen=True)
class Chart:
    arc: Arc
    symbol: int


@dataclass
class ExpandingCover:
    """Charts V_i with assigned maps, certified 1/|f'| < sigma on
    r-neighborhoods of the charts, and a Lebesgue number eta < r/2."""

    charts: list
    sigma: float
    r: float
    eta: float
    grid: int

    def chart_arcs(self, symbol):
        return [c.arc for c in self.charts if c.symbol == symbol]

    def symbol_has_full_chart(self, symbol):
        return any(c.arc.length == 1 for c in self.charts if c.symbol == symbol)

    def point_in_chart(self, symbol, x, closed=False):
        return any(
            c.arc.contains_point(x, closed=closed)
            for c in self.charts
            if c.symbol == symbol
        )


def verify_locally_expanding(system, grid=4096):
    """Certify the locally-expanding property on a grid and build a cover.

    Every grid point needs some generator with derivative > 1; charts are
    maximal grid runs where a generator beats the halfway threshold, sigma
    is the grid maximum of 1/f' over r-neighborhoods of the charts (times
    a safety slack), and eta the exact Lebesgue number capped below r/2.
    """
    k = system.k
    xs = np.arange(grid) / grid
    derivs = np.empty((k, grid))
    for i, g in enumerate(system.generators):
        if g.family == "affine":
            derivs[i, :] = g.map.a
        else:
            derivs[i, :] = g.map.a + TWO_PI * g.map.c * np.cos(TWO_PI * xs)

    best = derivs.max(axis=0)
    worst_idx = int(best.argmin())
    m_star = float(best[worst_idx])
    if m_star <= 1.0:
        raise NotLocallyExpandingError(
            f"no generator expands at x = {xs[worst_idx]} "
            f"(best derivative {m_star})",
            witness=float(xs[worst_idx]),
        )

    full = [bool(np.all(derivs[i] > 1.0)) for i in range(k)]
    if all(full):
        charts = [Chart(Arc(Fraction(0), Fraction(1)), i) for i in range(k)]
        r = 1.0
        sigma = float((1.0 / derivs.min()) * (1 + SLACK))
        eta_exact = Fraction(1, 2)
    else:
        thresh = 1.0 + (m_star - 1.0) / 2
        charts = []
        masks = {}
        for i in range(k):
            if full[i]:
                charts.append(Chart(Arc(Fraction(0), Fraction(1)), i))
            else:
                masks[i] = derivs[i] > thresh
                charts.extend(Chart(a, i) for a in _mask_to_arcs(masks[i], grid))
        ok, witness = covers_circle([c.arc for c in charts])
        if not ok:
            raise CoverGapError(
                f"expansion charts leave a gap near x = {float(witness)}",
                witness=float(witness),
            )
        r, sigma = _pick_margin(derivs, full, masks, grid)
        eta_exact = lebesgue_number_exact([c.arc for c in charts])
        if eta_exact <= 0:
            raise CoverGapError("chart cover has no positive Lebesgue number")
    if sigma >= 1.0:
        raise NotLocallyExpandingError(
            f"could not certify a contraction bound < 1 (sigma = {sigma})"
        )
    eta = min(float(eta_exact), r / 2) / (1 + SLACK)
    return ExpandingCover(charts=charts, sigma=sigma, r=r, eta=eta, grid=grid)


def _mask_to_arcs(mask, grid):
    """Maximal circular runs of True grid cells as arcs."""
    if mask.all():
        return [Arc(Fraction(0), Fraction(1))]
    if not mask.any():
        return []
    idx = np.nonzero(mask)[0]
    runs = []
    start = prev = int(idx[0])
    for t in idx[1:]:
        t = int(t)
        if t == prev + 1:
            prev = t
        else:
            runs.append((start, prev))
            start = prev = t
    runs.append((start, prev))
    if len(runs) > 1 and runs[0][0] == 0 and runs[-1][1] == grid - 1:
        s, _ = runs.pop()
        a, b = runs.pop(0)
        runs.append((s, b + grid))
        runs.sort()
    return [Arc(Fraction(a, grid), Fraction(b - a + 1, grid)) for a, b in runs]


def _pick_margin(derivs, full, masks, grid):
    """Largest r from a halving ladder with grid sigma(r) still < 1.

    The r-neighborhood of a chart is realized by dilating its grid mask
    by ceil(r * grid) cells.
    """
    k = derivs.shape[0]
    for r in (0.05, 0.025, 0.0125, 2.0 / grid):
        m = math.ceil(r * grid)
        worst = 0.0
        for i in range(k):
            if i not in masks:
                # full chart: its r-neighborhood is the whole circle
                worst = max(worst, float(np.max(1.0 / derivs[i])))
                continue
            dil = masks[i].copy()
            for shift in range(1, m + 1):
                dil |= np.roll(masks[i], shift)
                dil |= np.roll(masks[i], -shift)
            worst = max(worst, float(np.max(1.0 / derivs[i][dil])))
        sigma = worst * (1 + SLACK)
        if sigma < 1.0:
            return r, sigma
    raise NotLocallyExpandingError("no margin r certifies sigma < 1 on the grid")


def lebesgue_number(cover):
    """Lebesgue number of the chart cover, capped strictly below r/2."""
    eta_exact = lebesgue_number_exact([c.arc for c in cover.charts])
    if eta_exact <= 0:
        raise CoverGapError("charts do not cover the circle")
    return min(float(eta_exact), cover.r / 2) / (1 + SLACK)


# ---------------------------------------------------------------------------
# Admissibility


@dataclass(frozen=True)
class Admissibility:
    ok: bool
    reason: str | None = None  # "driving-forbidden" | "geometry-forbidden"
    witness: object = None

    def __bool__(self):
        return self.ok


def itinerary_holds(system, cover, word, x):
    """x in V_{w0} and f_{w<=j}(x) in V_{w_{j+1}} for every j."""
    pts = word_orbit(system, word, x)
    return all(
        cover.point_in_chart(s, pts[j], closed=False) for j, s in enumerate(word)
    )


def is_admissible(system, cover, word):
    """Check a word against the driving matrix and the chart geometry.

    The witness search subdivides the first symbol's charts into a
    uniform grid of 2^10 points and refines once with cell midpoints; in
    dimension one itinerary sets are finite unions of arcs, so the search
    is sound at the documented resolution.
    """
    word = tuple(word)
    for s in word:
        system.gen(s)  # range check
    if not word:
        return Admissibility(True)
    if not system.driving_admissible(word):
        return Admissibility(False, reason="driving-forbidden")
    n0 = 1024
    for arc in cover.chart_arcs(word[0]):
        for t in range(n0):
            x = arc.sample(Fraction(2 * t + 1, 2 * n0))
            if itinerary_holds(system, cover, word, x):
                return Admissibility(True, witness=x)
        for t in range(2 * n0):
            x = arc.sample(Fraction(2 * t + 1, 4 * n0))
            if itinerary_holds(system, cover, word, x):
                return Admissibility(True, witness=x)
    return Admissibility(False, reason="geometry-forbidden")


# ---------------------------------------------------------------------------
# Random walk


@dataclass
class RandomWalkTrace:
    seed: int
    start_symbol: int
    points: np.ndarray     # x_0 .. x_n
    symbols: np.ndarray    # i_1 .. i_n (applied generators)
    log_deriv: np.ndarray  # cumulative sums of log f'_{i_t}(x_{t-1})


def sample_walk(system, seed, length, x0):
    """Drive the walk: i_{t+1} ~ P[i_t], x_{t+1} = f_{i_{t+1}}(x_t).

    Deterministic given the seed (inverse-CDF draws from a PCG64 stream).
    """
    if length < 0:
        raise ValueError("length must be >= 0")
    rng = np.random.default_rng(seed)
    start_cdf = np.cumsum(system.start)
    cdfs = np.cumsum(system.matrix, axis=1)
    cur = min(
        int(np.searchsorted(start_cdf, rng.random(), side="right")), system.k - 1
    )
    start_symbol = cur
    points = np.empty(length + 1)
    points[0] = float(mod1(x0))
    symbols = np.empty(length, dtype=np.int64)
    logd = np.empty(length)
    acc = 0.0
    for t in range(length):
        nxt = min(
            int(np.searchsorted(cdfs[cur], rng.random(), side="right")),
            system.k - 1,
        )
        g = system.gen(nxt)
        acc += math.log(float(g.map.deriv(points[t])))
        points[t + 1] = g.map(points[t])
        symbols[t] = nxt
        logd[t] = acc
        cur = nxt
    return RandomWalkTrace(
        seed=seed,
        start_symbol=start_symbol,
        points=points,
        symbols=symbols,
        log_deriv=logd,
    )


# ---------------------------------------------------------------------------
# Branch tubes: monotone images of a domain arc along a word, anchored well
# enough to pull sub-arcs of the image back to the domain at full precision.


@dataclass
class BranchTube:
    """A monotone branch of f_w over a domain arc.

    ``los[j]`` is the left endpoint of the step-j arc (a circle point) and
    ``lens[j]`` the lift length of that arc; the last length may exceed 1
    when the image wraps around the circle.  Invariants:
    los[j+1] = f_{w[j]}(los[j]) and lens[j+1] = lift increment of lens[j].
    """

    word: tuple
    los: list
    lens: list

    @property
    def domain(self):
        return Arc(self.los[0], min(self.lens[0], 1))

    @property
    def image_len(self):
        return self.lens[-1]

    def image_arc(self):
        return Arc(self.los[-1], min(self.lens[-1], 1))


def tube_start(system, symbol, domain_arc):
    """Length-1 tube for one symbol over a domain sub-arc of its chart."""
    g = system.gen(symbol)
    return BranchTube(
        word=(symbol,),
        los=[domain_arc.lo, g.map(domain_arc.lo)],
        lens=[domain_arc.length, g.map.lift_delta(domain_arc.lo, domain_arc.length)],
    )


def tube_restrict(system, tube, off_lo, off_hi, width=None):
    """Sub-tube over image-lift offsets [off_lo, off_hi] of the last step.

    ``width`` optionally carries the exact window length; when endpoint
    offsets collapse below float resolution the width is propagated
    through the derivative instead (first order, exact for affine maps).
    """
    n = len(tube.word)
    w = off_hi - off_lo if width is None else width
    offsets = [(off_lo, w)]
    a = off_lo
    for j in range(n - 1, -1, -1):
        g = system.gen(tube.word[j]).map
        a2 = g.invert_delta(tube.los[j], a)
        b2 = g.invert_delta(tube.los[j], a + w)
        w2 = b2 - a2
        if not w2 > 0:
            w2 = w / g.deriv(mod1(tube.los[j] + a2))
        a, w = a2, w2
        offsets.append((a, w))
    offsets.reverse()
    los = [mod1(tube.los[j] + offsets[j][0]) for j in range(n + 1)]
    lens = [offsets[j][1] for j in range(n + 1)]
    return BranchTube(word=tube.word, los=los, lens=lens)


def tube_forward_offsets(system, tube, dom_lo, dom_hi):
    """Image-lift offsets of the domain offsets [dom_lo, dom_hi]."""
    a, b = dom_lo, dom_hi
    for j, s in enumerate(tube.word):
        g = system.gen(s).map
        a = g.lift_delta(tube.los[j], a)
        b = g.lift_delta(tube.los[j], b)
    return a, b


def _window_lifts(base, length, total, window=None):
    """Integer m with [base+m, base+m+length] inside [0, total] (and
    meeting the window when given)."""
    lo_m = 0
    hi_m = math.floor(total - base - length)
    if window is not None:
        a, b = window
        lo_m = max(lo_m, math.ceil(a - length - base))
        hi_m = min(hi_m, math.floor(b - base))
    return range(lo_m, hi_m + 1)


def tube_extend(system, cover, tube, symbol):
    """All sub-tubes of ``tube`` extended by one more symbol.

    The current image is intersected with the new symbol's charts (every
    wraparound copy when the image is longer than the circle), each piece
    is pulled back through the whole tube, and the new image appended.
    """
    g = system.gen(symbol)
    zero = 0 * tube.image_len
    if cover.symbol_has_full_chart(symbol):
        pieces = [(zero, tube.image_len)]
    else:
        pieces = []
        img = tube.image_arc()
        for chart in cover.chart_arcs(symbol):
            if tube.image_len >= 1:
                base = (chart.lo - tube.los[-1]) % 1
                for m in _window_lifts(base, chart.length, tube.image_len):
                    pieces.append((base + m, base + m + chart.length))
            else:
                for piece in img.intersect(chart):
                    off = (piece.lo - tube.los[-1]) % 1
                    pieces.append((off, off + piece.length))
    out = []
    for off_lo, off_hi in sorted(pieces):
        sub = (
            tube
            if off_lo == zero and off_hi == tube.image_len
            else tube_restrict(system, tube, off_lo, off_hi)
        )
        last_lo, last_len = sub.los[-1], sub.lens[-1]
        out.append(
            BranchTube(
                word=sub.word + (symbol,),
                los=sub.los + [g.map(last_lo)],
                lens=sub.lens + [g.map.lift_delta(last_lo, last_len)],
            )
        )
    return out


def tube_ball_lifts(system, tube, ball, window=None):
    """Lift positions of ``ball`` fully inside the tube image.

    Returns a list of (m, start_offset) pairs; with ``window = (a, b)``
    only lifts meeting that image-lift range are produced (used to target
    uncovered gaps).
    """
    base = (ball.lo - tube.los[-1]) % 1
    return [
        (m, base + m)
        for m in _window_lifts(base, ball.length, tube.image_len, window)
    ]


def tube_pullback(system, tube, target, lift_offset=None):
    """Restrict the tube so its image is exactly (one lift of) ``target``."""
    off = (target.lo - tube.los[-1]) % 1 if lift_offset is None else lift_offset
    if off + target.length > tube.image_len:
        raise InvalidWordError("target arc does not fit inside the tube image")
    return tube_restrict(system, tube, off, off + target.length,
                         width=target.length)


# ---------------------------------------------------------------------------
# Topological mixing


@dataclass
class MixingCertificate:
    scale: object
    horizon: int
    net: list            # net arcs (diameter = scale)
    witnesses: dict      # (u_index, v_index) -> word
    unresolved: list     # [(u_index, v_index), ...]

    @property
    def complete(self):
        return not self.unresolved


def net_arcs(scale):
    scale = _num(scale)
    n = math.ceil(1 / scale)
    return [Arc(Fraction(m, n), Fraction(1, n)) for m in range(n)]


def propagate_tubes(system, cover, start_arc, horizon, stop=None):
    """BFS tubes from ``start_arc`` along driving-admissible words.

    Words are visited shortest first, then lexicographically.  With a
    ``stop`` predicate the first tube satisfying it is returned (or None);
    otherwise all tubes up to the horizon are returned, where tubes whose
    image wraps the circle twice are not refined further (their image
    already contains a full lift of every arc).
    """
    frontier = []
    for s in range(system.k):
        if cover.symbol_has_full_chart(s):
            arcs = [start_arc]
        else:
            arcs = [
                piece
                for chart in cover.chart_arcs(s)
                for piece in start_arc.intersect(chart)
            ]
        frontier.extend(tube_start(system, s, a) for a in arcs)
    tubes = []
    for _ in range(horizon):
        nxt = []
        for tube in frontier:
            if stop is not None:
                if stop(tube):
                    return tube
            else:
                tubes.append(tube)
                if tube.image_len >= 2:
                    continue
            for s in system.allowed_next(tube.word[-1]):
                nxt.extend(tube_extend(system, cover, tube, s))
        frontier = nxt
    if stop is not None:
        for tube in frontier:
            if stop(tube):
                return tube
        return None
    tubes.extend(frontier)
    return tubes


def check_topological_mixing(system, cover, scale, horizon):
    """Search witness words carrying each net arc U onto a ball about each
    net arc V.

    A pair (U, V) is resolved by a monotone branch over a sub-arc of U
    whose image contains the ball B of radius ``scale`` around the center
    of V; the pullback cylinder of B through that branch then lies inside
    U.  Partial certificates list the unresolved pairs.
    """
    scale = _num(scale)
    if not scale < cover.eta / 2:
        raise ValueError(f"scale must be < eta/2 = {cover.eta / 2}")
    net = net_arcs(scale)
    balls = [Arc(mod1(v.midpoint - scale), 2 * scale) for v in net]
    witnesses = {}
    unresolved = []
    for ui, u in enumerate(net):
        tubes = propagate_tubes(system, cover, u, horizon)
        for vi, ball in enumerate(balls):
            found = None
            for tube in tubes:
                if tube.image_len >= 1 + ball.length or tube_ball_lifts(
                    system, tube, ball
                ):
                    found = tube.word
                    break
            if found is not None:
                witnesses[(ui, vi)] = found
            else:
                unresolved.append((ui, vi))
    return MixingCertificate(
        scale=scale, horizon=horizon, net=net, witnesses=witnesses,
        unresolved=unresolved,
    )
