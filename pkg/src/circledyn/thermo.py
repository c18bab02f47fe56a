"""Thermodynamic formalism on the truncated countable Markov chain:
variations and Hölder fitting, periodic-orbit partition functions, the
Gurevich-Sarig pressure, truncated transfer operators with their Gibbs
measures, Gibbs certificates, potential projection, and equilibrium
residuals.

Potentials evaluate on finite cylinder words.  A potential with finite
memory m is exact once words reach length m; unbounded-memory potentials
(projections of functions on the circle) carry a quantified tail bound
inherited from cylinder-diameter decay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConvergenceFailure,
    InvalidWordError,
    MathFailure,
    NonInvariantMeasureError,
)
from .induced import refine_cylinder
from .partition import check_shift_mixing

NEG_INF = float("-inf")


# ---------------------------------------------------------------------------
# Potentials


@dataclass(frozen=True)
class ConstantPotential:
    c: float
    memory: int = 1

    def value(self, word):
        return float(self.c)

    def var_bound(self, n):
        return 0.0

    def tail(self, n):
        return 0.0


@dataclass(frozen=True)
class MemoryOnePotential:
    """phi(i) = g[i_0]."""

    values: tuple
    memory: int = 1

    def value(self, word):
        return float(self.values[word[0]])

    def var_bound(self, n):
        return 0.0 if n >= 2 else None

    def tail(self, n):
        return 0.0


@dataclass(frozen=True)
class TablePotential:
    """Finite-memory potential backed by a callable on length-m windows."""

    memory: int
    fn: object

    def value(self, word):
        return float(self.fn(tuple(word[: self.memory])))

    def var_bound(self, n):
        return 0.0 if n >= self.memory + 1 else None

    def tail(self, n):
        return 0.0


@dataclass(frozen=True)
class CallablePotential:
    """Unbounded-memory potential for tests: evaluates on any finite word,
    with an optional declared variation modulus."""

    fn: object
    modulus: object = None
    memory: int | None = None

    def value(self, word):
        return float(self.fn(tuple(word)))

    def var_bound(self, n):
        return None if self.modulus is None else float(self.modulus(n))

    def tail(self, n):
        if self.modulus is None:
            return None
        # crude geometric-free tail: sum the modulus until negligible
        total = 0.0
        for k in range(n + 1, n + 200):
            v = float(self.modulus(k))
            total += v
            if v < 1e-18:
                break
        return total


@dataclass(frozen=True)
class ProjectedPotential:
    """psi on the inducing domain evaluated at cylinder midpoints.

    The depth-n uncertainty is K (cylinder diameter)^alpha; the variation
    profile is geometric with ratio sigma_star^alpha.
    """

    induced: object
    psi: object
    K: float
    alpha: float
    memory: int | None = None

    def value(self, word):
        cyl = refine_cylinder(self.induced, tuple(word))
        return float(self.psi(cyl.arc.midpoint))

    def uncertainty(self, word):
        cyl = refine_cylinder(self.induced, tuple(word))
        return self.K * float(cyl.arc.length) ** self.alpha

    def var_bound(self, n):
        part = self.induced.partition
        width = part.sigma_star() ** n * part.max_ball_length()
        return self.K * width ** self.alpha

    def tail(self, n):
        part = self.induced.partition
        r = part.sigma_star() ** self.alpha
        return self.var_bound(n + 1) / (1 - r)


def project_potential(induced, psi, holder):
    """Lift a piecewise Hölder function of the circle to the symbolic
    model; ``holder`` is its (K, alpha) continuity data."""
    K, alpha = holder
    part = induced.partition
    for e in part.elements:
        v = float(psi(e.arc.midpoint))
        if not math.isfinite(v):
            raise MathFailure(f"potential not finite on element {e.index}")
    return ProjectedPotential(induced=induced, psi=psi, K=float(K),
                              alpha=float(alpha))


def log_deriv_potential(induced, t=1.0):
    """-t log|T'| as a shift potential; exact memory-1 for affine systems."""
    part = induced.partition
    system = part.system
    if system.exact:
        vals = []
        for e in part.elements:
            slope = 1
            for s in e.word:
                slope *= system.gen(s).map.a
            vals.append(-t * math.log(slope))
        return MemoryOnePotential(values=tuple(vals))
    from .semigroup import derivative_along_word

    def psi(x):
        i = induced.element_of(x)
        return -t * math.log(
            float(derivative_along_word(system, part.elements[i].word, x))
        )

    C, alpha = system.holder_log_deriv()
    # |log T'| along a word sums the per-step moduli: bounded by C/(1-sigma)
    K = abs(t) * C / (1 - part.sigma)
    return ProjectedPotential(induced=induced, psi=psi, K=K, alpha=alpha)


def coordinate_potential(induced):
    """psi(x) = x read through the coding (Lipschitz with constant 1)."""
    return ProjectedPotential(
        induced=induced, psi=lambda x: float(x), K=1.0, alpha=1.0
    )


# ---------------------------------------------------------------------------
# Variations


@dataclass
class VariationEstimate:
    n: int
    lower: float
    upper: float | None
    exact: bool

    @property
    def value(self):
        return self.lower if self.exact else (
            self.upper if self.upper is not None else self.lower
        )


def _allowed_words(matrix, length, budget=None):
    stack = [(i,) for i in range(matrix.n)]
    out = []
    while stack:
        w = stack.pop()
        if len(w) == length:
            out.append(w)
            if budget is not None and len(out) > budget:
                raise MathFailure(f"word enumeration exceeded budget {budget}")
            continue
        for j in matrix.row(w[-1]):
            stack.append(w + (int(j),))
    return out


def variation(phi, n, matrix, sample_budget=2000, seed=5):
    """n-th variation sup over pairs agreeing on the first n symbols.

    Exact for finite-memory potentials (full enumeration when affordable);
    otherwise a sampled lower bound paired with the modulus upper bound.
    """
    if n < 2:
        raise ValueError("variations start at n = 2")
    m = phi.memory
    if m is not None and m <= n:
        return VariationEstimate(n=n, lower=0.0, upper=0.0, exact=True)
    if m is not None:
        words = _allowed_words(matrix, m, budget=500_000)
        groups = {}
        for w in words:
            key = w[:n]
            v = phi.value(w)
            lo, hi = groups.get(key, (math.inf, -math.inf))
            groups[key] = (min(lo, v), max(hi, v))
        var = max((hi - lo for lo, hi in groups.values()), default=0.0)
        return VariationEstimate(n=n, lower=var, upper=var, exact=True)
    # unbounded memory: sample word pairs sharing a prefix of length n
    rng = np.random.default_rng(seed)
    depth = n + 8
    best = 0.0
    for _ in range(sample_budget):
        w = [int(rng.integers(matrix.n))]
        while len(w) < depth:
            succ = matrix.row(w[-1])
            w.append(int(succ[rng.integers(len(succ))]))
        w2 = list(w[:n])
        while len(w2) < depth:
            succ = matrix.row(w2[-1])
            w2.append(int(succ[rng.integers(len(succ))]))
        best = max(best, abs(phi.value(tuple(w)) - phi.value(tuple(w2))))
    return VariationEstimate(n=n, lower=best, upper=phi.var_bound(n), exact=False)


@dataclass
class VariationProfile:
    ns: list
    values: list
    exact: bool


def variation_profile(phi, matrix, n_max, **kw):
    ests = [variation(phi, n, matrix, **kw) for n in range(2, n_max + 1)]
    return VariationProfile(
        ns=[e.n for e in ests],
        values=[e.value for e in ests],
        exact=all(e.exact for e in ests),
    )


@dataclass
class HolderFit:
    summable: bool
    locally_holder: bool
    C: float | None
    theta: float | None
    geometric_residual: float | None = None
    power_exponent: float | None = None


def fit_holder(profile):
    """Geometric versus power-law diagnosis of a variation profile.

    Fits log var_n against n (geometric) and against log n (power law);
    the better fit decides summability, and the locally-Hölder flag holds
    iff the fitted geometric envelope dominates every measured entry.
    """
    if len(profile.ns) < 5:
        raise ValueError("need the profile measured to n_max >= 6")
    ns = np.array(profile.ns, dtype=float)
    vs = np.array(profile.values, dtype=float)
    pos = vs > 0
    if not pos.any():
        return HolderFit(True, True, 0.0, 0.0, 0.0, None)
    ns, vs = ns[pos], vs[pos]
    logv = np.log(vs)
    geo = np.polyfit(ns, logv, 1)
    geo_res = float(np.max(np.abs(np.polyval(geo, ns) - logv)))
    pow_ = np.polyfit(np.log(ns), logv, 1)
    pow_res = float(np.max(np.abs(np.polyval(pow_, np.log(ns)) - logv)))
    theta = math.exp(geo[0])
    C = math.exp(geo[1])
    if geo_res <= pow_res:
        summable = theta < 1
    else:
        summable = -pow_[0] > 1 + 1e-9
    holder = (
        geo_res <= pow_res
        and theta < 1
        and bool(np.all(vs <= C * theta ** ns * (1 + 1e-6)))
    )
    return HolderFit(
        summable=bool(summable),
        locally_holder=bool(holder),
        C=C if holder else None,
        theta=theta if holder else None,
        geometric_residual=geo_res,
        power_exponent=float(-pow_[0]),
    )


# ---------------------------------------------------------------------------
# Partition functions


def periodic_words(matrix, base, n, budget=2_000_000):
    """All allowed n-periodic words starting at ``base`` (depth-first)."""
    out = []
    stack = [(base,)]
    while stack:
        w = stack.pop()
        if len(w) == n:
            if matrix.entry(w[-1], base):
                out.append(w)
                if len(out) > budget:
                    raise MathFailure(
                        f"periodic-word enumeration exceeded budget {budget}"
                    )
            continue
        for j in matrix.row(w[-1]):
            stack.append(w + (int(j),))
    return out


def _phi_n_periodic(phi, word, eval_pad=8):
    """Birkhoff sum of phi along the n-periodic word (cyclic windows)."""
    n = len(word)
    m = phi.memory
    depth = m if m is not None else n + eval_pad
    ext = tuple(word[(k % n)] for k in range(n + depth))
    total = 0.0
    for k in range(n):
        total += phi.value(ext[k:k + depth])
    return total


@dataclass
class LogZ:
    n: int
    log_value: float | None  # None when there are no periodic words
    count: int
    uncertainty: float


def partition_function(matrix, phi, base, n, budget=2_000_000, eval_pad=8):
    """Z_n(phi, base): exact weighted sum over allowed n-periodic words.

    Finite-memory potentials make the cyclic evaluation exact; otherwise
    each Birkhoff term carries the depth-(n+pad) tail uncertainty.
    """
    words = periodic_words(matrix, base, n, budget=budget)
    if not words:
        return LogZ(n=n, log_value=None, count=0, uncertainty=0.0)
    sums = np.array([_phi_n_periodic(phi, w, eval_pad) for w in words])
    m = sums.max()
    log_z = float(m + math.log(np.exp(sums - m).sum()))
    tail = phi.tail(n + eval_pad)
    unc = 0.0 if tail is None else n * tail
    return LogZ(n=n, log_value=log_z, count=len(words), uncertainty=unc)


def _memory_one_values(phi, n_states):
    if isinstance(phi, MemoryOnePotential):
        return np.array(phi.values, dtype=float)
    if isinstance(phi, ConstantPotential):
        return np.full(n_states, float(phi.c))
    return None


def log_z_matrix(matrix, phi, base, n_max):
    """log Z_n for n = 1..n_max via scaled transfer-matrix powers; memory-1
    potentials only (project or recode first)."""
    g = _memory_one_values(phi, matrix.n)
    if g is None:
        raise InvalidWordError(
            "matrix-power partition functions need a memory-1 potential"
        )
    eg = np.exp(g - g.max())
    shift = float(g.max())
    v = np.zeros(matrix.n)
    v[base] = 1.0
    out = []
    log_scale = 0.0
    q = len(matrix.class_members)
    member_idx = matrix.class_members
    for n in range(1, n_max + 1):
        sums = np.empty(q)
        for c in range(q):
            sums[c] = v[member_idx[c]].sum()
        v = eg * sums[matrix.row_class]
        norm = v.sum()
        if norm == 0:
            out.append(LogZ(n=n, log_value=None, count=0, uncertainty=0.0))
            continue
        v = v / norm
        log_scale += math.log(norm) + shift
        z = v[base]
        out.append(
            LogZ(
                n=n,
                log_value=None if z <= 0 else float(log_scale + math.log(z)),
                count=-1,
                uncertainty=0.0,
            )
        )
    return out


@dataclass
class PressureReport:
    base: int
    base2: int | None
    n_max: int
    log_zs: list
    pressure: float
    slope_residual: float
    cross_discrepancy: float | None
    mixing_certified: bool
    uncertainty: float


def _fit_slope(log_zs, n_max):
    pts = [
        (z.n, z.log_value)
        for z in log_zs
        if z.log_value is not None and z.n >= math.ceil(n_max / 2)
    ]
    if len(pts) < 2:
        raise MathFailure("not enough nonzero partition functions to fit")
    ns = np.array([p[0] for p in pts], dtype=float)
    ys = np.array([p[1] for p in pts], dtype=float)
    coef = np.polyfit(ns, ys, 1)
    resid = float(np.max(np.abs(np.polyval(coef, ns) - ys)))
    return float(coef[0]), resid


def gurevich_pressure(matrix, phi, base=0, n_max=16, method="auto",
                      budget=2_000_000, horizon=None):
    """Pressure as the fitted slope of log Z_n over the upper half of the
    range, cross-checked from a second base state.

    ``method`` is "enumerate", "matrix", or "auto" (matrix powers when the
    potential has memory <= 1, else enumeration).
    """
    mixing = check_shift_mixing(matrix, horizon=horizon or max(16, 2 * matrix.q))
    use_matrix = method == "matrix" or (
        method == "auto" and _memory_one_values(phi, matrix.n) is not None
        and matrix.n > 64
    )

    def series(b):
        if use_matrix:
            return log_z_matrix(matrix, phi, b, n_max)
        return [
            partition_function(matrix, phi, b, n, budget=budget)
            for n in range(1, n_max + 1)
        ]

    zs = series(base)
    if all(z.log_value is None for z in zs):
        raise MathFailure(f"no periodic words through base state {base}")
    slope, resid = _fit_slope(zs, n_max)
    base2 = next(
        (b for b in range(matrix.n) if b != base), None
    )
    cross = None
    if base2 is not None:
        zs2 = series(base2)
        try:
            slope2, _ = _fit_slope(zs2, n_max)
            cross = abs(slope - slope2)
        except MathFailure:
            base2 = None
    unc = max((z.uncertainty / max(z.n, 1) for z in zs
               if z.log_value is not None), default=0.0)
    return PressureReport(
        base=base,
        base2=base2,
        n_max=n_max,
        log_zs=zs,
        pressure=slope,
        slope_residual=resid,
        cross_discrepancy=cross,
        mixing_certified=bool(mixing.mixing),
        uncertainty=unc,
    )


# ---------------------------------------------------------------------------
# Transfer operator and Gibbs measures


@dataclass
class TransferOperator:
    """Truncated Ruelle operator L[i][j] = exp(g(i)) t_{ij} with its
    leading triple; P = log(eigenvalue)."""

    matrix: object
    g: np.ndarray
    eigenvalue: float
    right: np.ndarray  # u with L u = lam u
    left: np.ndarray   # v with v L = lam v
    residual: float

    @property
    def pressure(self):
        return math.log(self.eigenvalue)

    def stationary(self):
        p = self.right * self.left
        return p / p.sum()

    def transition_row(self, i):
        js = self.matrix.row(i)
        w = math.exp(self.g[i]) * self.right[js] / (
            self.eigenvalue * self.right[i]
        )
        return js, w


def _apply_L(matrix, eg, v):
    q = len(matrix.class_members)
    sums = np.empty(q)
    for c in range(q):
        sums[c] = v[matrix.class_members[c]].sum()
    return eg * sums[matrix.row_class]


def _apply_LT(matrix, eg, u):
    s = eg * u
    class_sums = np.zeros(len(matrix.class_members))
    np.add.at(class_sums, matrix.row_class, s)
    out = np.zeros(matrix.n)
    for c, members in enumerate(matrix.class_members):
        out[members] += class_sums[c]
    return out


def transfer_gibbs(matrix, phi, tol=1e-12, max_iter=200_000):
    """Leading eigendata of the truncated transfer operator by power
    iteration, and the induced Gibbs cylinder measure.

    Requires a memory <= 1 potential (recode or project first); refuses
    non-primitive truncations up front.
    """
    g = _memory_one_values(phi, matrix.n)
    if g is None:
        raise InvalidWordError("transfer operator needs a memory-1 potential")
    mix = check_shift_mixing(matrix, horizon=max(32, 2 * matrix.q))
    if not mix.mixing:
        raise ConvergenceFailure(
            "truncated matrix is not primitive within the tested horizon",
            witness=mix,
        )
    shift = float(g.max())
    eg = np.exp(g - shift)
    u = np.full(matrix.n, 1.0 / matrix.n)
    v = np.full(matrix.n, 1.0 / matrix.n)
    for _ in range(max_iter):
        u_new = _apply_L(matrix, eg, u)
        u_new /= u_new.sum()
        v_new = _apply_LT(matrix, eg, v)
        v_new /= v_new.sum()
        delta = max(np.max(np.abs(u_new - u)), np.max(np.abs(v_new - v)))
        u, v = u_new, v_new
        if delta < 1e-16:
            break
    Lu = _apply_L(matrix, eg, u)
    lam_scaled = float(Lu @ u / (u @ u))
    res_u = float(np.max(np.abs(Lu - lam_scaled * u)))
    vL = _apply_LT(matrix, eg, v)
    res_v = float(np.max(np.abs(vL - lam_scaled * v)))
    residual = max(res_u, res_v) / lam_scaled
    if residual > tol:
        raise ConvergenceFailure(
            f"power iteration stalled at residual {residual}",
            witness=residual,
        )
    lam = lam_scaled * math.exp(shift)
    op = TransferOperator(
        matrix=matrix, g=g, eigenvalue=lam, right=u, left=v,
        residual=residual,
    )
    return op, CylinderMeasure(operator=op)


@dataclass
class CylinderMeasure:
    """mu[a_0..a_{n-1}] = v(a_0) exp(sum g(a_k), k<n-1) u(a_{n-1}) /
    (lam^{n-1} <v, u>) for the leading triple (lam, u, v)."""

    operator: TransferOperator

    def log_weight(self, word):
        op = self.operator
        word = tuple(int(a) for a in word)
        for a, b in zip(word, word[1:]):
            if not op.matrix.entry(a, b):
                return NEG_INF
        n = len(word)
        inner = float(op.left @ op.right)
        s = math.log(op.left[word[0]]) + math.log(op.right[word[-1]])
        s += sum(float(op.g[a]) for a in word[:-1])
        s -= (n - 1) * math.log(op.eigenvalue) + math.log(inner)
        return s

    def weight(self, word):
        lw = self.log_weight(word)
        return 0.0 if lw == NEG_INF else math.exp(lw)

    @property
    def pressure(self):
        return self.operator.pressure


@dataclass
class GibbsCertificate:
    P: float
    B: float
    depth: int
    cylinders: int
    worst_word: tuple
    sampled: bool
    infinite: bool = False


def verify_gibbs(measure, matrix, phi, P, depth, budget=200_000, seed=3):
    """Worst cylinder ratio mu[w] / exp(phi_n(w) - n P) over all (or a
    seeded sample of) allowed cylinders up to the given depth."""
    g = _memory_one_values(phi, matrix.n)
    total = matrix.n
    sampled = False
    words = []
    for n in range(1, depth + 1):
        level = []
        if not sampled:
            stack = [(i,) for i in range(matrix.n)]
            while stack:
                w = stack.pop()
                if len(w) == n:
                    level.append(w)
                    continue
                for j in matrix.row(w[-1]):
                    stack.append(w + (int(j),))
                if len(level) + len(stack) > budget:
                    sampled = True
                    break
        if sampled:
            rng = np.random.default_rng(seed + n)
            level = []
            for _ in range(min(budget // depth, 5000)):
                w = [int(rng.integers(matrix.n))]
                while len(w) < n:
                    succ = matrix.row(w[-1])
                    w.append(int(succ[rng.integers(len(succ))]))
                level.append(tuple(w))
        words.extend(level)
    best_abs = 0.0
    worst_word = None
    for w in words:
        lw = measure.log_weight(w)
        if lw == NEG_INF:
            return GibbsCertificate(
                P=P, B=math.inf, depth=depth, cylinders=len(words),
                worst_word=w, sampled=sampled, infinite=True,
            )
        if g is not None:
            phin = float(g[list(w)].sum())
        else:
            # Birkhoff sum approximated on word suffixes
            phin = sum(phi.value(w[k:]) for k in range(len(w)))
        ratio = lw - (phin - len(w) * P)
        if abs(ratio) >= best_abs:
            best_abs = abs(ratio)
            worst_word = w
    return GibbsCertificate(
        P=P, B=math.exp(best_abs), depth=depth, cylinders=len(words),
        worst_word=worst_word, sampled=sampled,
    )


# ---------------------------------------------------------------------------
# Equilibrium checks


@dataclass
class EquilibriumReport:
    entropy: float
    integral: float
    pressure: float
    residual: float  # P - (h + int phi); ~0 for the Gibbs measure


def markov_entropy(p, rows):
    """-sum_i p_i sum_j pi_ij log pi_ij for rows = {i: (js, weights)}."""
    h = 0.0
    for i, (js, w) in rows.items():
        w = np.asarray(w)
        mask = w > 0
        h -= float(p[i] * (w[mask] * np.log(w[mask])).sum())
    return h


def equilibrium_check(measure, matrix, phi, P, tol=1e-9):
    """P - (h_mu + int phi dmu) for a Markov measure given by cylinder
    weights; raises when the depth-2 weights are not shift-invariant."""
    n = matrix.n
    p = np.array([measure.weight((i,)) for i in range(n)])
    if abs(p.sum() - 1.0) > 1e-9:
        raise NonInvariantMeasureError(f"depth-1 weights sum to {p.sum()}")
    flow_in = np.zeros(n)
    rows = {}
    for i in range(n):
        js = matrix.row(i)
        w2 = np.array([measure.weight((i, int(j))) for j in js])
        np.add.at(flow_in, js, w2)
        if p[i] > 0:
            rows[i] = (js, w2 / p[i])
    bad = int(np.argmax(np.abs(flow_in - p)))
    if abs(flow_in[bad] - p[bad]) > tol:
        raise NonInvariantMeasureError(
            f"mass balance fails at state {bad}: inflow {flow_in[bad]} vs "
            f"weight {p[bad]}",
            witness=bad,
        )
    h = markov_entropy(p, rows)
    g = _memory_one_values(phi, n)
    if g is not None:
        integral = float(p @ g)
    else:
        integral = sum(
            p[i] * phi.value((i,)) for i in range(n) if p[i] > 0
        )
    return EquilibriumReport(
        entropy=h, integral=integral, pressure=P,
        residual=P - (h + integral),
    )


@dataclass
class MarkovMeasure:
    """Explicit stationary Markov measure used for perturbation probes."""

    p: np.ndarray
    rows: dict  # i -> (js, transition weights)

    def weight(self, word):
        word = tuple(int(a) for a in word)
        w = float(self.p[word[0]])
        for a, b in zip(word, word[1:]):
            js, probs = self.rows[a]
            pos = np.nonzero(js == b)[0]
            if not pos.size:
                return 0.0
            w *= float(probs[pos[0]])
        return w


def perturbed_markov_measures(operator, count=20, scale=0.25, seed=17):
    """Stationary Markov measures with the Gibbs support, obtained by
    multiplicative noise on the Gibbs transition rows; the variational
    principle makes every one of them strictly suboptimal."""
    matrix = operator.matrix
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        rows = {}
        for i in range(matrix.n):
            js, w = operator.transition_row(i)
            noisy = w * np.exp(scale * rng.standard_normal(len(w)))
            noisy = noisy / noisy.sum()
            rows[i] = (js, noisy)
        # stationary vector of the perturbed chain by power iteration
        p = np.full(matrix.n, 1.0 / matrix.n)
        for _ in range(20_000):
            nxt = np.zeros(matrix.n)
            for i in range(matrix.n):
                js, w = rows[i]
                nxt[js] += p[i] * w
            nxt_sum = nxt.sum()
            nxt /= nxt_sum
            if np.max(np.abs(nxt - p)) < 1e-14:
                p = nxt
                break
            p = nxt
        out.append(MarkovMeasure(p=p, rows=rows))
    return out


def markov_measure_score(mm, phi, matrix):
    """h + int phi for an explicit Markov measure."""
    h = markov_entropy(mm.p, mm.rows)
    g = _memory_one_values(phi, matrix.n)
    if g is not None:
        integral = float(mm.p @ g)
    else:
        integral = sum(
            mm.p[i] * phi.value((i,)) for i in range(matrix.n) if mm.p[i] > 0
        )
    return h + integral
