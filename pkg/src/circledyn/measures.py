"""Absolutely continuous invariant measures of the induced map, the
Rokhlin entropy integral, the driving chain's Perron vector, and the
lifted stationary measure of the random walk with its diagnostics.

Measures on the circle are piecewise-constant densities over a dyadic bin
grid.  Transport is exact piecewise-affine arithmetic for affine families
(the whole chain then runs in rational arithmetic) and sub-split
first-order transport with a quantified error for perturbed families.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .circle import Arc, mod1, _num
from .errors import BoundaryOrbitError, ConfigError, MathFailure
from .semigroup import (
    BranchTube,
    _noncommunicating_class,
    derivative_along_word,
    tube_forward_offsets,
)


def _zero_weights(bins, exact):
    return [Fraction(0)] * bins if exact else [0.0] * bins


def _spread_arc(arc, mass, out):
    """Distribute ``mass`` uniformly over the bins meeting ``arc``."""
    if mass == 0:
        return
    m = len(out)
    length = arc.length
    if length >= 1:
        share = mass / m
        for k in range(m):
            out[k] += share
        return
    lo = arc.lo * m
    k = math.floor(lo)
    pos = lo - k
    remaining = length * m  # arc length in bin units
    density = mass / length
    while remaining > 0:
        take = min(1 - pos, remaining)
        out[k % m] += density * take / m
        remaining -= take
        pos = 0
        k += 1


def _bin_pieces(arc, bins, exact):
    """Split an arc at bin boundaries: [(bin index, piece arc, fraction of
    that bin's mass the piece carries)]."""
    mf = _num(bins) if exact else float(bins)
    out = []
    lo = arc.lo * bins
    k = math.floor(lo)
    pos = lo - k
    remaining = arc.length * bins
    while remaining > 0:
        take = min(1 - pos, remaining)
        out.append((k % bins, Arc(mod1((k + pos) / mf), take / mf), take))
        remaining -= take
        pos = 0
        k += 1
    return out


def _push_arc_mass(system, symbol, arc, mass, out, subdiv):
    """Push a uniform-mass arc through one generator and spread it; for
    inexact systems the arc is pre-split so first-order transport stays
    below bin resolution."""
    if mass == 0:
        return
    g = system.gen(symbol).map
    if system.exact:
        img_len = g.lift_delta(arc.lo, arc.length)
        _spread_arc(Arc(g(arc.lo), min(img_len, 1)), mass, out)
        return
    q = max(subdiv, min(64, math.ceil(float(arc.length) * len(out))))
    for t in range(q):
        sub_lo = mod1(arc.lo + arc.length * t / q)
        sub_len = arc.length / q
        img_len = g.lift_delta(sub_lo, sub_len)
        _spread_arc(Arc(g(sub_lo), min(img_len, 1.0)), mass / q, out)


def _bin_arc(k, m, exact):
    if exact:
        return Arc(Fraction(k, m), Fraction(1, m))
    return Arc(k / m, 1.0 / m)


@dataclass
class UlamDensity:
    """Piecewise-constant probability density over ``bins`` dyadic bins."""

    bins: int
    weights: list  # per-bin masses summing to 1

    def __post_init__(self):
        total = sum(self.weights)
        if abs(float(total) - 1.0) > 1e-12:
            raise MathFailure(f"density mass {float(total)} not normalized")

    @property
    def exact(self):
        return isinstance(self.weights[0], Fraction)

    def density_values(self):
        return np.array([float(w) * self.bins for w in self.weights])

    @property
    def min_density(self):
        return float(min(self.weights)) * self.bins

    @property
    def max_density(self):
        return float(max(self.weights)) * self.bins

    def mass_on(self, arc):
        return sum(
            self.weights[k] * take
            for k, _, take in _bin_pieces(arc, self.bins, self.exact)
        )


def _validate_bins(bins):
    if bins < 64 or bins & (bins - 1):
        raise ConfigError(f"bins must be a power of two >= 64, got {bins}")


def _tv(a, b):
    return 0.5 * float(sum(abs(x - y) for x, y in zip(a, b)))


@dataclass
class AcipResult:
    density: UlamDensity
    c0_empirical: float
    tv_changes: list
    converged: bool
    transported_mass: list  # mass retained by each pushforward


def push_forward_induced(induced, weights, subdiv=4):
    """One transport step of the induced map: mass on each element flows
    onto its image ball; mass on truncation gaps is dropped."""
    part = induced.partition
    bins = len(weights)
    exact = part.exact and isinstance(weights[0], Fraction)
    out = _zero_weights(bins, exact)
    for e in part.elements:
        tube = BranchTube(word=e.word, los=e.los, lens=e.lens)
        for k, piece, take in _bin_pieces(e.arc, bins, exact):
            mass = weights[k] * take
            if mass == 0:
                continue
            q = 1 if part.system.exact else max(
                subdiv, min(64, math.ceil(float(piece.length) * bins))
            )
            for t in range(q):
                sub_lo = mod1(piece.lo + piece.length * t / q)
                off = (sub_lo - e.arc.lo) % 1
                a, b = tube_forward_offsets(
                    part.system, tube, off, off + piece.length / q
                )
                img = Arc(mod1(e.los[-1] + a), min(b - a, 1))
                _spread_arc(img, mass / q, out)
    return out


def ulam_matrix_induced(induced, bins, subdiv=4):
    """Dense bins-by-bins transport matrix of the induced map: column k is
    the pushforward of the k-th bin's unit mass."""
    part = induced.partition
    M = np.zeros((bins, bins))
    for e in part.elements:
        tube = BranchTube(word=e.word, los=e.los, lens=e.lens)
        for k, piece, take in _bin_pieces(e.arc, bins, False):
            q = max(subdiv, min(64, math.ceil(float(piece.length) * bins)))
            col = [0.0] * bins
            for t in range(q):
                sub_lo = mod1(piece.lo + piece.length * t / q)
                off = (sub_lo - e.arc.lo) % 1
                a, b = tube_forward_offsets(
                    part.system, tube, off, off + piece.length / q
                )
                img = Arc(mod1(e.los[-1] + a), min(b - a, 1))
                _spread_arc(img, take / q, col)
            M[:, k] += col
    return M


def ulam_matrix_generator(system, symbol, bins, subdiv=4):
    """Dense transport matrix of one full generator map."""
    M = np.zeros((bins, bins))
    exact = False
    for k in range(bins):
        col = [0.0] * bins
        _push_arc_mass(system, symbol, _bin_arc(k, bins, exact), 1.0, col,
                       subdiv)
        M[:, k] = col
    return M


def acip_pushforward(induced, bins=512, n_iter=40, tv_tol=1e-3, subdiv=4):
    """Cesàro average of pushforwards of Lebesgue under the induced map.

    Exact piecewise-affine transport for affine families (the doubling
    map reproduces Lebesgue bit for bit); sub-split transport otherwise.
    Reports the empirical density band and the iteration-to-iteration
    total-variation changes.
    """
    _validate_bins(bins)
    if n_iter < 1:
        raise ValueError("n_iter must be >= 1")
    part = induced.partition
    exact = part.exact
    cur = [Fraction(1, bins) if exact else 1.0 / bins] * bins
    acc = list(cur)
    tv_changes = []
    masses = [1.0]
    converged = n_iter == 1
    M = None if exact else ulam_matrix_induced(induced, bins, subdiv=subdiv)
    for _ in range(1, n_iter):
        if exact:
            nxt = push_forward_induced(induced, cur, subdiv=subdiv)
        else:
            nxt = list(M @ np.asarray(cur))
        tv_changes.append(_tv(nxt, cur))
        masses.append(float(sum(nxt)))
        for k in range(bins):
            acc[k] += nxt[k]
        cur = nxt
        if tv_tol is not None and tv_changes[-1] <= tv_tol:
            converged = True
            break
    total = sum(acc)
    weights = [w / total for w in acc]
    density = UlamDensity(bins=bins, weights=weights)
    return AcipResult(
        density=density,
        c0_empirical=(
            math.inf if density.min_density == 0
            else density.max_density / density.min_density
        ),
        tv_changes=tv_changes,
        converged=converged,
        transported_mass=masses,
    )


def rokhlin_entropy(induced, density, subdiv=4):
    """Metric entropy via the Jacobian integral: the density-weighted log
    derivative summed per element (exact per-element for affine slopes)."""
    part = induced.partition
    system = part.system
    total = 0.0
    for e in part.elements:
        if system.exact:
            slope = 1
            for s in e.word:
                slope *= system.gen(s).map.a
            total += float(density.mass_on(e.arc)) * math.log(slope)
        else:
            for k, piece, take in _bin_pieces(e.arc, density.bins, False):
                mass = float(density.weights[k]) * take
                for t in range(subdiv):
                    x = piece.sample((2 * t + 1) / (2 * subdiv))
                    total += (
                        mass / subdiv
                        * math.log(float(derivative_along_word(system, e.word, x)))
                    )
    return total


def birkhoff_average(induced, observable, x, n):
    """Partial Birkhoff averages of an observable along the induced orbit."""
    sums = np.empty(n)
    acc = 0.0
    y = x
    for t in range(n):
        acc += float(observable(y))
        sums[t] = acc / (t + 1)
        if t + 1 < n:
            y, _ = induced.apply(y)
    return sums


def birkhoff_spread(induced, observable, n, starts=10, seed=23):
    """Spread of Birkhoff averages across random interior starts; a small
    spread is the ergodicity diagnostic."""
    from .induced import sample_interior_points

    finals = []
    pts = sample_interior_points(induced.partition, 4 * starts, seed=seed)
    for x in pts:
        if len(finals) == starts:
            break
        try:
            finals.append(birkhoff_average(induced, observable, x, n)[-1])
        except BoundaryOrbitError:
            continue
    if len(finals) < 2:
        raise MathFailure("not enough boundary-avoiding orbits for the spread")
    return float(max(finals) - min(finals)), finals


@dataclass
class PerronVector:
    p: np.ndarray
    residual: float


def perron_vector(P, tol=1e-12, max_iter=200_000):
    """Left eigenvector p with p P = p by damped power iteration from the
    uniform start; reducible chains are rejected with a witness class."""
    P = np.asarray(P, dtype=float)
    rowsum = P.sum(axis=1)
    if np.any(np.abs(rowsum - 1.0) > 1e-12):
        raise ConfigError("matrix is not row-stochastic")
    cls = _noncommunicating_class(P)
    if cls is not None:
        raise ConfigError(f"matrix is reducible: class {sorted(cls)}")
    k = P.shape[0]
    p = np.full(k, 1.0 / k)
    for _ in range(max_iter):
        nxt = 0.5 * p + 0.5 * (p @ P)
        nxt /= nxt.sum()
        done = np.max(np.abs(nxt - p)) < 1e-16
        p = nxt
        if done:
            break
    residual = float(np.max(np.abs(p @ P - p)))
    if residual > tol:
        raise MathFailure(f"Perron iteration stalled at residual {residual}")
    return PerronVector(p=p, residual=residual)


@dataclass
class FiberedMeasure:
    """Measure on symbols x circle: one binned component per symbol."""

    bins: int
    fibers: list  # k lists of per-bin masses; total mass 1

    @property
    def k(self):
        return len(self.fibers)

    @property
    def exact(self):
        return isinstance(self.fibers[0][0], Fraction)

    def symbol_masses(self):
        return [sum(f) for f in self.fibers]

    def total_mass(self):
        return sum(sum(f) for f in self.fibers)

    def validate(self):
        if abs(float(self.total_mass()) - 1.0) > 1e-12:
            raise MathFailure(
                f"fibered measure mass {float(self.total_mass())} not 1"
            )
        return True


def lift_measure(induced, density, p, deficit_tol=1e-2, subdiv=4):
    """Tower lift of the induced invariant measure to a stationary
    candidate for the walk.

    Each element's mass is pushed along the prefixes of its word below the
    return time, the accumulated tower measure is normalized by
    Q = sum tau(M) mu(M), and symbols receive it in Perron proportions.
    """
    part = induced.partition
    system = part.system
    bins = density.bins
    exact = density.exact and part.exact
    deficit = 1 - float(part.element_mass())
    if deficit > deficit_tol:
        raise MathFailure(
            f"truncation mass deficit {deficit} exceeds {deficit_tol}",
            witness=deficit,
        )
    tower = _zero_weights(bins, exact)
    q_norm = Fraction(0) if exact else 0.0
    for e in part.elements:
        mass_e = density.mass_on(e.arc)
        q_norm = q_norm + e.tau * mass_e
        level = [
            (piece, density.weights[k] * take)
            for k, piece, take in _bin_pieces(e.arc, density.bins, exact)
            if density.weights[k] * take != 0
        ]
        for arc, m in level:
            _spread_arc(arc, m, tower)
        for s in e.word[:-1]:
            g = system.gen(s).map
            nxt = []
            for arc, m in level:
                img = Arc(g(arc.lo), min(g.lift_delta(arc.lo, arc.length), 1))
                nxt.append((img, m))
                _push_arc_mass(system, s, arc, m, tower, subdiv)
            level = nxt
    if exact:
        pv = [Fraction(float(x)) for x in np.asarray(p, dtype=float)]
    else:
        pv = [float(x) for x in np.asarray(p, dtype=float)]
    fibers = [[w * (pi / q_norm) for w in tower] for pi in pv]
    out = FiberedMeasure(bins=bins, fibers=fibers)
    out.validate()
    return out


def stochastic_image(system, measure, subdiv=4, gen_matrices=None):
    """(f_* m)_j = sum_i pi_ij (f_j)_* m_i computed binwise.

    ``gen_matrices`` optionally carries precomputed generator transport
    matrices for the float path (reused across fixed-point iterations).
    """
    bins = measure.bins
    exact = measure.exact and system.exact
    P = system.matrix
    out = []
    if not exact and gen_matrices is None:
        gen_matrices = [
            ulam_matrix_generator(system, j, bins, subdiv)
            for j in range(system.k)
        ]
    for j in range(system.k):
        if exact:
            fj = _zero_weights(bins, exact)
            for i in range(system.k):
                pij = P[i, j]
                if pij == 0:
                    continue
                pij = Fraction(float(pij))
                for k in range(bins):
                    w = measure.fibers[i][k]
                    if w == 0:
                        continue
                    _push_arc_mass(
                        system, j, _bin_arc(k, bins, exact), pij * w, fj, subdiv
                    )
        else:
            mixed = np.zeros(bins)
            for i in range(system.k):
                if P[i, j]:
                    mixed += P[i, j] * np.asarray(measure.fibers[i], dtype=float)
            fj = list(gen_matrices[j] @ mixed)
        out.append(fj)
    return FiberedMeasure(bins=bins, fibers=out)


def check_stationary(system, measure, subdiv=4):
    """Max over fibers of the total-variation distance between m and its
    stochastic image; exactly zero for jointly invariant affine systems."""
    image = stochastic_image(system, measure, subdiv=subdiv)
    if measure.exact and system.exact:
        return max(
            float(sum(abs(x - y) for x, y in zip(image.fibers[j],
                                                 measure.fibers[j]))) / 2
            for j in range(system.k)
        )
    return max(
        _tv(image.fibers[j], measure.fibers[j]) for j in range(system.k)
    )


@dataclass
class SkewReport:
    max_z: float
    cells: int
    chains: int
    steps: int
    band: float
    ok: bool


def skew_invariance_check(system, measure, chains=200, steps=200, seed=101,
                          coarse=16, band=6.0):
    """Monte-Carlo invariance test of the skew product: orbits started
    from m must occupy symbol-by-bin cells at the rates m prescribes.

    Counts are compared on a coarse grid against a binomial z-band (set
    generously because successive orbit cells are correlated)."""
    rng = np.random.default_rng(seed)
    k = system.k
    bins = measure.bins
    fibers = np.array([[float(w) for w in f] for f in measure.fibers])
    probs = fibers.flatten() / fibers.sum()
    counts = np.zeros((k, coarse))
    cdfs = np.cumsum(system.matrix, axis=1)
    # affine orbits are iterated in exact rationals: float bit-shifting
    # would collapse every orbit onto 0 within ~53 steps
    q_den = 5 ** 13
    for _ in range(chains):
        cell = int(rng.choice(len(probs), p=probs))
        sym, b = divmod(cell, bins)
        if system.exact:
            x = Fraction(b * q_den + int(rng.integers(1, q_den)), bins * q_den)
        else:
            x = (b + rng.random()) / bins
        for _ in range(steps):
            counts[sym, int(x * coarse) % coarse] += 1
            sym = min(int(np.searchsorted(cdfs[sym], rng.random(), "right")), k - 1)
            x = system.gen(sym).map(x)
    total = counts.sum()
    factor = bins // coarse
    expected = fibers.reshape(k, coarse, factor).sum(axis=2)
    expected = expected / expected.sum()
    max_z = 0.0
    for s in range(k):
        for c in range(coarse):
            pexp = expected[s, c]
            var = total * pexp * (1 - pexp)
            if var > 0:
                z = abs(counts[s, c] - total * pexp) / math.sqrt(var)
                max_z = max(max_z, z)
    return SkewReport(
        max_z=float(max_z), cells=k * coarse, chains=chains, steps=steps,
        band=band, ok=bool(max_z <= band),
    )


def stationary_fixed_point(system, bins=512, tol=1e-12, max_iter=5000,
                           subdiv=4):
    """Iterate the stochastic image to convergence: the genuine stationary
    fibered measure at bin resolution (diagnostic companion to the lift)."""
    _validate_bins(bins)
    pv = perron_vector(system.matrix).p
    fibers = [[float(pv[i]) / bins] * bins for i in range(system.k)]
    m = FiberedMeasure(bins=bins, fibers=fibers)
    gen_matrices = None
    if not (m.exact and system.exact):
        gen_matrices = [
            ulam_matrix_generator(system, j, bins, subdiv)
            for j in range(system.k)
        ]
    for _ in range(max_iter):
        nxt = stochastic_image(system, m, subdiv=subdiv,
                               gen_matrices=gen_matrices)
        delta = max(_tv(nxt.fibers[j], m.fibers[j]) for j in range(system.k))
        m = nxt
        if delta <= tol:
            break
    return m
