"""Weak-L^p machinery and empirical inequality checks.

Discrete measure = counting measure times cell_measure, and every quantity
here is computed from physical-space samples, so Chebyshev-type relations
between the quasinorms and the L^p norms are exact statements about the same
finite sample set rather than approximations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fields import (
    DegenerateFieldError,
    SpectralField,
    TorusGrid,
    VectorField,
    band_limit,
    from_physical,
    h1_seminorm,
    lp_norm,
    random_scalar_field,
    sobolev_norm,
    to_physical,
)

__all__ = [
    "DistributionFunction",
    "QuasiNormReport",
    "InequalityRatioReport",
    "distribution_function",
    "weak_lp_quasinorm",
    "weak_quasinorm_samples",
    "bmo_seminorm",
    "k_functional",
    "interpolation_quasinorm",
    "check_ladyzhenskaya",
    "check_weak_ladyzhenskaya",
    "check_bernstein",
    "check_bmo_interpolation",
    "check_weak_strong_interpolation",
    "inverse_distance_field",
    "corpus_exponent",
    "corpus_scalar_field",
]


@dataclass(frozen=True)
class DistributionFunction:
    """Measures d_f(alpha) = mu{|f| > alpha} on an ascending threshold list."""

    thresholds: np.ndarray
    measures: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.thresholds, dtype=np.float64)
        m = np.asarray(self.measures, dtype=np.float64)
        if t.size == 0:
            raise ValueError("threshold list is empty")
        if np.any(t < 0) or np.any(np.diff(t) < 0):
            raise ValueError("thresholds must be ascending and nonnegative")
        if np.any(np.diff(m) > 0):
            raise ValueError("measures must be non-increasing in alpha")
        t.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "thresholds", t)
        object.__setattr__(self, "measures", m)


@dataclass(frozen=True)
class QuasiNormReport:
    """Weak-L^p value sup_alpha alpha * d_f(alpha)^{1/p} with its witness.

    witness_measure is the closed superlevel measure mu{|f| >= witness_alpha}.
    The supremum over alpha is a left limit at the witness level, so the
    closed measure (not the strict d_f, which drops by the tie mass) is what
    reproduces the value: value = witness_alpha * witness_measure^{1/p}.
    """

    p: float
    value: float
    witness_alpha: float
    witness_measure: float

    def __post_init__(self) -> None:
        if not self.p > 1:
            raise ValueError(f"p must exceed 1, got {self.p}")
        if self.value > 0:
            recon = self.witness_alpha * self.witness_measure ** (1.0 / self.p)
            if abs(recon - self.value) > 1e-12 * self.value:
                raise ValueError("witness does not reproduce the quasinorm value")


@dataclass(frozen=True)
class InequalityRatioReport:
    """lhs/rhs for one inequality on one corpus field."""

    lhs: float
    rhs: float
    ratio: float
    corpus_id: str

    def __post_init__(self) -> None:
        if self.rhs > 0 and not math.isfinite(self.ratio):
            raise ValueError("ratio must be finite when rhs > 0")


def _samples(f) -> np.ndarray:
    if isinstance(f, VectorField):
        return np.hypot(to_physical(f.x_comp), to_physical(f.y_comp))
    return to_physical(f)


def distribution_function(f, alphas) -> DistributionFunction:
    """d_f(alpha) = (number of samples with |f| > alpha) * cell_measure."""
    alphas = np.atleast_1d(np.asarray(alphas, dtype=np.float64))
    if alphas.size == 0:
        raise ValueError("threshold list is empty")
    vals = np.sort(np.abs(_samples(f)).ravel())
    counts = vals.size - np.searchsorted(vals, alphas, side="right")
    return DistributionFunction(alphas, counts * f.grid.cell_measure)


def weak_quasinorm_samples(values: np.ndarray, cell_measure: float, p: float) -> QuasiNormReport:
    """Weak-L^p quasinorm of raw sample values with the given cell measure.

    Exact sup over ranks of the sorted samples: with v_1 >= v_2 >= ... the
    candidate at rank j is v_j * (j * cell)^{1/p}; within a block of tied
    values the candidate grows with j, so the argmax always lands at a block
    end and the closed superlevel count at the witness equals that rank.
    """
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")
    v = np.sort(np.abs(np.asarray(values, dtype=np.float64)).ravel())[::-1]
    if v.size == 0 or v[0] == 0.0:
        return QuasiNormReport(p=p, value=0.0, witness_alpha=0.0, witness_measure=0.0)
    ranks = np.arange(1, v.size + 1, dtype=np.float64)
    q = v * (ranks * cell_measure) ** (1.0 / p)
    j = int(np.argmax(q))
    witness = float(v[j])
    measure = float(np.count_nonzero(v >= witness)) * cell_measure
    return QuasiNormReport(p=p, value=float(q[j]), witness_alpha=witness, witness_measure=measure)


def weak_lp_quasinorm(f, p: float) -> QuasiNormReport:
    """Weak-L^p quasinorm of a field from its grid samples."""
    return weak_quasinorm_samples(_samples(f), f.grid.cell_measure, p)


def bmo_seminorm(f: SpectralField) -> float:
    """Mean-oscillation supremum over the dyadic square family.

    Squares of side 2, 4, ..., n cells, anchored at the origin (a periodic
    tiling at every level; no translated squares). O(n^2 log n). The global
    mean is dropped before transforming so that fields differing only in
    their k=0 coefficient give bitwise-identical samples, which makes the
    seminorm exactly shift-invariant.
    """
    n = f.n
    if n & (n - 1) != 0:
        raise ValueError(f"grid size must be a power of two for the dyadic family, got {n}")
    c = f.coeff.copy()
    c[0, 0] = 0.0
    s = to_physical(SpectralField(f.grid, c))
    worst = 0.0
    size = 2
    while size <= n:
        blocks = s.reshape(n // size, size, n // size, size)
        means = blocks.mean(axis=(1, 3), keepdims=True)
        osc = np.abs(blocks - means).mean(axis=(1, 3))
        worst = max(worst, float(osc.max()))
        size *= 2
    return worst


def _rearrangement(f) -> tuple[np.ndarray, float]:
    """Decreasing rearrangement of the samples and the cell measure."""
    v = np.sort(np.abs(_samples(f)).ravel())[::-1]
    return v, f.grid.cell_measure


def k_functional(f, t: float) -> float:
    """K(f, t) for the couple (L1, Linf), computed exactly.

    The optimal split truncates at a level lambda: K = min over lambda of
    sum (|f| - lambda)_+ * cell + t * lambda. The cost is piecewise linear
    and convex in lambda, so the minimum sits at a sample value (or 0) and is
    found by evaluating every breakpoint. Equals the rearrangement integral
    int_0^t f*(s) ds for t up to the domain measure.
    """
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    v, cell = _rearrangement(f)
    prefix = np.concatenate([[0.0], np.cumsum(v)])
    j = np.arange(v.size)
    # cost at lambda = v_j (0-indexed): cells 0..j-1 exceed it
    costs = (prefix[j] - j * v) * cell + t * v
    cost_zero = prefix[-1] * cell  # lambda = 0 keeps all mass in the L1 part
    return float(min(cost_zero, float(costs.min()) if costs.size else cost_zero))


def interpolation_quasinorm(f, theta: float) -> float:
    """sup over t of t^{-theta} K(f, t), grid-converged to 1%.

    The sup is taken over a logarithmic grid on [1e-6, 1e6], doubled in
    density until the value moves by less than 1%.
    """
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    v, cell = _rearrangement(f)
    if v.size == 0 or v[0] == 0.0:
        return 0.0
    prefix = np.concatenate([[0.0], np.cumsum(v)]) * cell
    total = prefix[-1]
    measures = np.arange(1, v.size + 1) * cell

    def k_at(ts: np.ndarray) -> np.ndarray:
        # K(f,t) = int_0^t f*: interpolate the piecewise-linear prefix integral
        out = np.interp(ts, measures, prefix[1:], left=np.nan, right=total)
        small = ts < measures[0]
        out[small] = ts[small] * v[0]
        return out

    points = 8
    last = -np.inf
    while True:
        ts = np.logspace(-6.0, 6.0, 12 * points + 1)
        sup = float(np.max(ts ** (-theta) * k_at(ts)))
        if last > 0 and abs(sup - last) <= 0.01 * sup:
            return sup
        last = sup
        points *= 2
        if points > 4096:
            return sup


def _ratio_report(lhs: float, rhs: float, corpus_id: str) -> InequalityRatioReport:
    ratio = lhs / rhs if rhs > 0 else math.inf if lhs > 0 else 0.0
    return InequalityRatioReport(lhs=lhs, rhs=rhs, ratio=ratio, corpus_id=corpus_id)


def check_ladyzhenskaya(f: SpectralField, corpus_id: str = "") -> InequalityRatioReport:
    """||f||_L4 against ||f||_L2^{1/2} ||f||_H1^{1/2}."""
    l2 = sobolev_norm(f, 0)
    h1 = sobolev_norm(f, 1)
    if h1_seminorm(f) == 0.0:
        raise DegenerateFieldError("constant field: the right-hand side degenerates")
    return _ratio_report(lp_norm(f, 4), math.sqrt(l2) * math.sqrt(h1), corpus_id)


def check_weak_ladyzhenskaya(f: SpectralField, corpus_id: str = "") -> InequalityRatioReport:
    """||f||_L4 against ||f||_{L^{2,inf}}^{1/2} ||grad f||_L2^{1/2}.

    Strengthens the classical form: the weak quasinorm never exceeds the L2
    norm, so this ratio is at least the classical one on every field with
    the same gradient factor.
    """
    grad = h1_seminorm(f)
    if grad == 0.0:
        raise DegenerateFieldError("constant field: the right-hand side degenerates")
    weak = weak_lp_quasinorm(f, 2.0).value
    return _ratio_report(lp_norm(f, 4), math.sqrt(weak) * math.sqrt(grad), corpus_id)


def check_bernstein(f: SpectralField, kappa: float, corpus_id: str = "") -> InequalityRatioReport:
    """Band-limited ||f||_L4 against kappa^{1/2} ||f||_{L^{2,inf}}."""
    outside = f.grid.ksq > kappa * kappa
    scale = float(np.max(np.abs(f.coeff)))
    if scale > 0 and float(np.max(np.abs(f.coeff[outside]), initial=0.0)) > 1e-13 * scale:
        raise ValueError(f"field is not band-limited to |k| <= {kappa}")
    weak = weak_lp_quasinorm(f, 2.0).value
    return _ratio_report(lp_norm(f, 4), math.sqrt(kappa) * weak, corpus_id)


def check_bmo_interpolation(
    f: SpectralField, q: float, p: float, corpus_id: str = ""
) -> tuple[InequalityRatioReport, InequalityRatioReport]:
    """L^p (strong) and L^{p,inf} (weak) against L^{q,inf}^{q/p} BMO^{1-q/p}.

    Returns (strong_report, weak_report); the weak ratio never exceeds the
    strong one since the weak quasinorm is dominated by the L^p norm.
    """
    if not 1.0 < q < p:
        raise ValueError(f"need 1 < q < p, got q={q}, p={p}")
    bmo = bmo_seminorm(f)
    if bmo == 0.0:
        raise DegenerateFieldError("constant field: BMO seminorm is zero")
    weak_q = weak_lp_quasinorm(f, q).value
    rhs = weak_q ** (q / p) * bmo ** (1.0 - q / p)
    strong = _ratio_report(lp_norm(f, p), rhs, corpus_id)
    weak = _ratio_report(weak_lp_quasinorm(f, p).value, rhs, corpus_id)
    return strong, weak


def check_weak_strong_interpolation(
    f: SpectralField, q: float, p: float, r: float, corpus_id: str = ""
) -> InequalityRatioReport:
    """||f||_L^p against quasinorm(q)^{1-alpha} quasinorm(r)^alpha.

    alpha solves (1-alpha)/q + alpha/r = 1/p; for (q, p, r) = (2, 3, 4) that
    gives alpha = 2/3.
    """
    if not 1.0 < q < p < r:
        raise ValueError(f"need 1 < q < p < r, got ({q}, {p}, {r})")
    alpha = (1.0 / p - 1.0 / q) / (1.0 / r - 1.0 / q)
    wq = weak_lp_quasinorm(f, q).value
    wr = weak_lp_quasinorm(f, r).value
    return _ratio_report(lp_norm(f, p), wq ** (1.0 - alpha) * wr**alpha, corpus_id)


# ---------------------------------------------------------------------------
# reference fields and the standard corpus

def inverse_distance_field(grid: TorusGrid) -> SpectralField:
    """Discretized centered 1/|x| with the peak clipped at mesh resolution.

    Samples min-image distance to a center offset half a cell from (1/2, 1/2),
    so the singularity falls between grid points. Raw samples overweight the
    four nearest cells permanently (their counting measure never matches the
    vanishing superlevel area), so values are clipped at the 4n-th largest
    sample. Clipping changes nothing in the continuum limit: every level of
    min(1/|x|, c) above 1/diam contributes the same alpha * (pi alpha^{-2})^{1/2},
    so the weak-L2 quasinorm stays sqrt(pi) for every cap c >= 2.
    """
    n = grid.n
    center = 0.5 + 0.5 / n
    d = np.abs(grid.x - center)
    d = np.minimum(d, 1.0 - d)
    r = np.hypot(d[:, None], d[None, :])
    vals = 1.0 / r
    flat = np.sort(vals.ravel())[::-1]
    cap = flat[4 * n - 1]
    return from_physical(grid, np.minimum(vals, cap))


def corpus_exponent(seed: int) -> float:
    """Spectrum exponent for corpus field `seed`, uniform on [1.1, 3.0]."""
    return float(np.random.default_rng([seed, 0]).uniform(1.1, 3.0))


def corpus_scalar_field(grid: TorusGrid, seed: int) -> SpectralField:
    """Scalar corpus member: seeded random field with the seed's exponent."""
    return random_scalar_field(grid, [seed, 1], corpus_exponent(seed))


BERNSTEIN_KAPPAS = (2.0, 4.0, 8.0, 16.0)


def scalar_inequality_sweep(grid: TorusGrid, seeds) -> dict[str, list[InequalityRatioReport]]:
    """Run every scalar inequality check over the standard corpus.

    Returns one report list per inequality, keyed by a short name; Bernstein
    is swept over kappa in {2, 4, 8, 16} with the field band-limited to each.
    """
    out: dict[str, list[InequalityRatioReport]] = {
        "ladyzhenskaya": [],
        "weak_ladyzhenskaya": [],
        "bmo_strong": [],
        "bmo_weak": [],
        "weak_strong": [],
    }
    for kappa in BERNSTEIN_KAPPAS:
        out[f"bernstein_k{int(kappa)}"] = []
    for seed in seeds:
        f = corpus_scalar_field(grid, seed)
        cid = f"seed={seed}"
        out["ladyzhenskaya"].append(check_ladyzhenskaya(f, cid))
        out["weak_ladyzhenskaya"].append(check_weak_ladyzhenskaya(f, cid))
        strong, weak = check_bmo_interpolation(f, 2.0, 4.0, cid)
        out["bmo_strong"].append(strong)
        out["bmo_weak"].append(weak)
        out["weak_strong"].append(check_weak_strong_interpolation(f, 2.0, 3.0, 4.0, cid))
        for kappa in BERNSTEIN_KAPPAS:
            out[f"bernstein_k{int(kappa)}"].append(
                check_bernstein(band_limit(f, kappa), kappa, cid)
            )
    return out
