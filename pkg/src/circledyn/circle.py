"""Arithmetic on the unit circle R/Z: points, arcs, arc regions.

Everything here is duck-typed over ``float`` and ``fractions.Fraction``.
Systems whose maps have rational coefficients can therefore run the whole
partition pipeline in exact rational arithmetic, while generic systems fall
back to floats with explicit tolerances.

An :class:`Arc` is the closed arc [lo, lo + length] traversed
counterclockwise; whether an operation treats it as open or closed is
chosen per call.  ``length == 1`` is the full circle anchored at ``lo``
(its open version is the circle minus the anchor point, which is exactly
the image of one full monotone branch of a covering map).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction


def _num(x):
    # ints are exact; promote them so downstream division stays exact
    return Fraction(x) if isinstance(x, int) else x


def mod1(x):
    """Reduce a point to [0, 1).  Exact for Fraction input."""
    return _num(x) % 1


def circle_dist(x, y):
    """Arclength metric d(x, y) = min(|x-y|, 1-|x-y|) on R/Z.  d <= 1/2."""
    d = (_num(x) - y) % 1
    return min(d, 1 - d)


@dataclass(frozen=True)
class Arc:
    """Closed arc [lo, lo+length] on the circle, 0 < length <= 1."""

    lo: object
    length: object

    def __post_init__(self):
        lo = mod1(self.lo)
        length = _num(self.length)
        if not (0 < length <= 1):
            raise ValueError(f"arc length must be in (0, 1], got {length}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "length", length)

    @property
    def hi(self):
        return mod1(self.lo + self.length)

    @property
    def midpoint(self):
        return mod1(self.lo + self.length / 2)

    def offset_of(self, x):
        """Position of x in arc coordinates, in [0, 1)."""
        return (_num(x) - self.lo) % 1

    def contains_point(self, x, closed=True, tol=0):
        off = self.offset_of(x)
        if 2 * off > 1 + self.length:  # fold the far region to negative side
            off = off - 1
        if closed:
            return -tol <= off <= self.length + tol
        return tol < off < self.length - tol

    def contains_arc(self, other, tol=0):
        """True iff other is a sub-arc (shared endpoints allowed + tol)."""
        if self.length == 1:
            return True
        off = self.offset_of(other.lo)
        if 2 * off > 1 + self.length:
            off = off - 1
        return off >= -tol and off + other.length <= self.length + tol

    def intersect(self, other):
        """Intersection as a list of 0, 1 or 2 arcs."""
        if self.length == 1:
            return [other]
        if other.length == 1:
            return [self]
        d = self.offset_of(other.lo)
        out = []
        for start in (d, d - 1):
            a = max(start, 0)
            b = min(start + other.length, self.length)
            if b > a:
                out.append(Arc(self.lo + a, b - a))
        return out

    def subtract(self, other):
        """Closure of self minus other, as a list of arcs."""
        if other.length == 1:
            return []
        d = self.offset_of(other.lo)
        cuts = []
        for start in (d, d - 1):
            a = max(start, 0)
            b = min(start + other.length, self.length)
            if b > a:
                cuts.append((a, b))
        cuts.sort()
        out = []
        pos = 0 * self.length
        for a, b in cuts:
            piece = a - pos
            if piece > 0:
                out.append(Arc(self.lo + pos, piece))
            pos = max(pos, b)
        rem = self.length - pos
        if rem > 0:
            out.append(Arc(self.lo + pos, rem))
        return out

    def sample(self, t):
        """Point at parameter t in [0, 1] along the arc."""
        return mod1(self.lo + t * self.length)

    def __repr__(self):
        return f"Arc({self.lo!s}, {self.length!s})"


# ---------------------------------------------------------------------------
# Regions: sorted lists of pairwise disjoint arcs.


def region_total(region):
    total = Fraction(0)
    for a in region:
        total = total + a.length
    return total


def region_subtract(region, arc):
    out = []
    for a in region:
        out.extend(a.subtract(arc))
    return out


def region_intersect(region, arc):
    out = []
    for a in region:
        out.extend(a.intersect(arc))
    return out


def region_overlaps(region, arc):
    return any(a.intersect(arc) for a in region)


def split_arc_at_points(arc, points):
    """Cut an arc at every interior point in ``points``; sorted pieces."""
    offs = sorted(
        {arc.offset_of(p) for p in points if 0 < arc.offset_of(p) < arc.length}
    )
    pieces = []
    prev = 0 * arc.length
    for off in offs:
        pieces.append(Arc(arc.lo + prev, off - prev))
        prev = off
    pieces.append(Arc(arc.lo + prev, arc.length - prev))
    return pieces


def covers_circle(arcs):
    """Whether the union of arcs is all of R/Z.

    Returns (True, None) or (False, witness) where witness is a point of
    an uncovered gap.
    """
    if any(a.length == 1 for a in arcs):
        return True, None
    if not arcs:
        return False, Fraction(0)
    # cut every arc at 0 so the problem becomes interval union on [0, 1]
    segs = []
    for a in arcs:
        lo, ln = a.lo, a.length
        if lo + ln <= 1:
            segs.append((lo, lo + ln))
        else:
            segs.append((lo, _num(1)))
            segs.append((0 * ln, lo + ln - 1))
    segs.sort()
    pos = segs[0][0]
    if pos > 0:
        return False, pos / 2
    for a, b in segs:
        if a > pos:
            return False, (pos + a) / 2
        pos = max(pos, b)
    if pos < 1:
        return False, (pos + 1) / 2
    return True, None


def _containment_radius(arc, x):
    """Radius of the largest metric ball around x inside the arc."""
    if arc.length == 1:
        return Fraction(1, 2)
    off = arc.offset_of(x)
    if not (0 < off < arc.length):
        return 0 * arc.length
    return min(off, arc.length - off)


def lebesgue_number_exact(arcs):
    """Exact Lebesgue number of an arc cover of the circle.

    Largest eta such that every metric ball of radius eta lies inside some
    arc; computed by evaluating the piecewise-linear containment-radius
    envelope at its candidate local minima (arc endpoints, midpoints, and
    descending/ascending crossings between pairs of arcs).  Returns a
    value <= 0 when the arcs fail to cover the circle.
    """
    if not arcs:
        return Fraction(0)
    if any(a.length == 1 for a in arcs):
        return Fraction(1, 2)
    candidates = []
    for a in arcs:
        candidates.extend((a.lo, a.hi, a.midpoint))
    for a in arcs:
        hi_a = a.lo + a.length  # lift of the right endpoint
        for b in arcs:
            off = (b.lo - hi_a) % 1  # representative of b.lo after hi_a
            candidates.append(mod1(hi_a + (off - 1) / 2))
    return min(max(_containment_radius(a, x) for a in arcs) for x in candidates)
