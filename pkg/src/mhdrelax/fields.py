"""Spectral fields and operators on the unit torus.

Real-valued fields on [0, 1)^2 are stored as Fourier coefficients with the
unitary convention

    f(x) = sum_k coeff[k] * exp(2*pi*i k.x),   coeff = fft2(samples) / n**2,

so Parseval reads mean(f^2) = sum |coeff|^2 with no stray factors.
Wavenumbers run over {-n/2, ..., n/2 - 1} per axis in FFT ordering; the
unpaired -n/2 row and column have no conjugate partner on the grid and are
pinned to zero, which keeps fields real under odd derivative multipliers and
makes every retained mode |k|_inf <= n/2 - 1 exactly representable in
products (see ``dealiased_product``).

Everything downstream (the Stokes solves, the time stepper, the inequality
checkers) is built on the types and functions defined here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

__all__ = [
    "TorusGrid",
    "SpectralField",
    "VectorField",
    "SobolevIndex",
    "FlowState",
    "DegenerateFieldError",
    "to_physical",
    "from_physical",
    "gradient",
    "divergence",
    "laplacian",
    "perp_gradient",
    "leray_project",
    "sobolev_norm",
    "h1_seminorm",
    "l2_inner",
    "lp_norm",
    "l4_norm_exact",
    "dealiased_product",
    "advective_term",
    "init_field",
    "band_limit",
    "evaluate_on_grid",
    "random_scalar_field",
]

TWO_PI = 2.0 * np.pi
FOUR_PI_SQ = 4.0 * np.pi * np.pi

# Relative tolerances used by construction-time checks. Both sit well above
# double-precision round-off accumulated across a transform pipeline and well
# below anything a genuine bug would produce.
SYMMETRY_RTOL = 1e-10
DIVFREE_RTOL = 1e-10


class DegenerateFieldError(ValueError):
    """An operation's result is undefined for this input (zero/constant field)."""


@dataclass(frozen=True)
class TorusGrid:
    """Uniform n-by-n sample grid on the unit torus [0, 1)^2.

    Parameters
    ----------
    n : int
        Samples per dimension, even and at least 4. Physical samples live at
        x_j = j / n; the retained spectral band is |k|_inf <= n/2 - 1.
    """

    n: int

    def __post_init__(self) -> None:
        n = self.n
        if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
            raise TypeError(f"grid size must be an integer, got {n!r}")
        if n < 4 or n % 2 != 0:
            raise ValueError(f"grid size must be even and >= 4, got {n}")

    @property
    def period(self) -> float:
        return 1.0

    @property
    def cell_measure(self) -> float:
        return 1.0 / (self.n * self.n)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    @cached_property
    def x(self) -> np.ndarray:
        """Sample coordinates along one axis, shape (n,)."""
        x = np.arange(self.n) / self.n
        x.setflags(write=False)
        return x

    @cached_property
    def kx(self) -> np.ndarray:
        """Integer wavenumbers along axis 0, shape (n, 1) for broadcasting."""
        k = np.fft.fftfreq(self.n, d=1.0 / self.n).reshape(self.n, 1)
        k.setflags(write=False)
        return k

    @cached_property
    def ky(self) -> np.ndarray:
        """Integer wavenumbers along axis 1, shape (1, n)."""
        k = np.fft.fftfreq(self.n, d=1.0 / self.n).reshape(1, self.n)
        k.setflags(write=False)
        return k

    @cached_property
    def ksq(self) -> np.ndarray:
        """|k|^2 per mode, shape (n, n)."""
        k2 = self.kx**2 + self.ky**2
        k2.setflags(write=False)
        return k2

    @cached_property
    def inv_ksq(self) -> np.ndarray:
        """1/|k|^2 with the k = 0 entry set to zero (safe Leray/Poisson divisor)."""
        inv = np.zeros(self.shape)
        np.divide(1.0, self.ksq, out=inv, where=self.ksq > 0)
        inv.setflags(write=False)
        return inv


def _reflect(c: np.ndarray) -> np.ndarray:
    """Index map k -> -k (mod n) on both axes."""
    return np.roll(c[::-1, ::-1], 1, axis=(0, 1))


def _hermitianize(c: np.ndarray) -> np.ndarray:
    """Project onto exactly Hermitian-symmetric arrays.

    fft2 of real samples is symmetric only to round-off; averaging with the
    reflected conjugate makes it bitwise symmetric. Multiplier operators and
    field arithmetic are conjugation-equivariant in IEEE arithmetic, so
    symmetry then survives every downstream operation exactly and residual
    fields (differences of near-equal fields) stay valid.
    """
    return 0.5 * (c + np.conj(_reflect(c)))


@dataclass(frozen=True)
class SpectralField:
    """Real scalar field on the torus, stored spectrally.

    ``coeff[i, j]`` multiplies exp(2*pi*i*(k_i x + k_j y)) in FFT index
    ordering. Construction copies the array and checks Hermitian symmetry
    (the field must be real) and that the unpaired Nyquist row/column is
    zero. Build from sample data with :func:`from_physical`.
    """

    grid: TorusGrid
    coeff: np.ndarray

    def __post_init__(self) -> None:
        c = np.array(self.coeff, dtype=np.complex128, copy=True)
        if c.shape != self.grid.shape:
            raise ValueError(
                f"coefficient array has shape {c.shape}, grid wants {self.grid.shape}"
            )
        scale = float(np.max(np.abs(c)))
        if scale > 0.0:
            asym = float(np.max(np.abs(c - np.conj(_reflect(c)))))
            if asym > SYMMETRY_RTOL * scale:
                raise ValueError(
                    "coefficients are not Hermitian-symmetric "
                    f"(asymmetry {asym:.3e} vs scale {scale:.3e}); field would not be real"
                )
            ny = self.grid.n // 2
            edge = max(float(np.max(np.abs(c[ny, :]))), float(np.max(np.abs(c[:, ny]))))
            if edge > SYMMETRY_RTOL * scale:
                raise ValueError("nonzero coefficients on the unpaired Nyquist row/column")
        c.setflags(write=False)
        object.__setattr__(self, "coeff", c)

    @property
    def n(self) -> int:
        return self.grid.n

    def _same_grid(self, other: "SpectralField") -> None:
        if self.grid != other.grid:
            raise ValueError("fields live on different grids")

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._same_grid(other)
        return SpectralField(self.grid, self.coeff + other.coeff)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._same_grid(other)
        return SpectralField(self.grid, self.coeff - other.coeff)

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeff)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.grid, self.coeff * float(scalar))

    __rmul__ = __mul__


@dataclass(frozen=True)
class VectorField:
    """Pair of scalar fields with an optional solenoidal invariant.

    When ``divergence_free`` is set, construction verifies
    |k . coeff(k)| <= 1e-10 * max_k |coeff(k)| over all modes.
    """

    x_comp: SpectralField
    y_comp: SpectralField
    divergence_free: bool = False

    def __post_init__(self) -> None:
        if self.x_comp.grid != self.y_comp.grid:
            raise ValueError("vector components live on different grids")
        if self.divergence_free:
            g = self.grid
            cx, cy = self.x_comp.coeff, self.y_comp.coeff
            scale = float(np.max(np.sqrt(np.abs(cx) ** 2 + np.abs(cy) ** 2)))
            if scale > 0.0:
                worst = float(np.max(np.abs(g.kx * cx + g.ky * cy)))
                if worst > DIVFREE_RTOL * scale:
                    raise ValueError(
                        f"field is not divergence-free: max |k.coeff| = {worst:.3e} "
                        f"against scale {scale:.3e}"
                    )

    @property
    def grid(self) -> TorusGrid:
        return self.x_comp.grid

    @property
    def n(self) -> int:
        return self.x_comp.n

    def component(self, i: int) -> SpectralField:
        return (self.x_comp, self.y_comp)[i]

    @staticmethod
    def _carry_flag(x: SpectralField, y: SpectralField, flag: bool) -> "VectorField":
        """Build with an inherited flag, skipping revalidation.

        Divergence is linear, so a linear combination of flagged fields keeps
        the absolute bound |k.coeff| <= rtol * (sum of parent scales). When the
        combination cancels to round-off, a relative recheck against the tiny
        result would spuriously fail; the inherited absolute guarantee is the
        correct one, so arithmetic trusts it instead of rechecking.
        """
        out = VectorField(x, y, divergence_free=False)
        object.__setattr__(out, "divergence_free", flag)
        return out

    def __add__(self, other: "VectorField") -> "VectorField":
        return self._carry_flag(
            self.x_comp + other.x_comp,
            self.y_comp + other.y_comp,
            self.divergence_free and other.divergence_free,
        )

    def __sub__(self, other: "VectorField") -> "VectorField":
        return self._carry_flag(
            self.x_comp - other.x_comp,
            self.y_comp - other.y_comp,
            self.divergence_free and other.divergence_free,
        )

    def __neg__(self) -> "VectorField":
        return self._carry_flag(-self.x_comp, -self.y_comp, self.divergence_free)

    def __mul__(self, scalar: float) -> "VectorField":
        return self._carry_flag(
            self.x_comp * scalar, self.y_comp * scalar, self.divergence_free
        )

    __rmul__ = __mul__


@dataclass(frozen=True)
class SobolevIndex:
    """Integer Sobolev order s >= -1 (s = -1 is the dual H^{-1} norm)."""

    s: int

    def __post_init__(self) -> None:
        if isinstance(self.s, bool) or not isinstance(self.s, (int, np.integer)):
            raise TypeError(f"Sobolev order must be an integer, got {self.s!r}")
        if self.s < -1:
            raise ValueError(f"Sobolev order must be >= -1, got {self.s}")


@dataclass(frozen=True)
class FlowState:
    """Time-stamped divergence-free magnetic field with physical parameters.

    eta = 0 is accepted as an exploratory (non-resistive) mode.
    """

    t: float
    B: VectorField
    nu: float
    eta: float

    def __post_init__(self) -> None:
        if not self.B.divergence_free:
            raise ValueError("B must be constructed with the divergence_free invariant")
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if self.eta < 0:
            raise ValueError(f"eta must be nonnegative, got {self.eta}")


# ---------------------------------------------------------------------------
# transforms

def to_physical(f: SpectralField) -> np.ndarray:
    """Real samples of f on the grid points x_j = j / n."""
    s = np.fft.ifft2(f.coeff) * (f.n * f.n)
    return np.ascontiguousarray(s.real)


def from_physical(grid: TorusGrid, samples: np.ndarray) -> SpectralField:
    """Spectral representation of real sample data.

    Content on the unpaired Nyquist row/column is discarded; for fields that
    are already band-limited to |k|_inf <= n/2 - 1 the map is inverse to
    :func:`to_physical` up to round-off.
    """
    s = np.asarray(samples, dtype=np.float64)
    if s.shape != grid.shape:
        raise ValueError(f"sample array has shape {s.shape}, grid wants {grid.shape}")
    c = _hermitianize(np.fft.fft2(s) / (grid.n * grid.n))
    ny = grid.n // 2
    c[ny, :] = 0.0
    c[:, ny] = 0.0
    return SpectralField(grid, c)


# ---------------------------------------------------------------------------
# differential operators (multiplier action 2*pi*i*k per mode)

def _dx(grid: TorusGrid, c: np.ndarray) -> np.ndarray:
    return (TWO_PI * 1j) * grid.kx * c


def _dy(grid: TorusGrid, c: np.ndarray) -> np.ndarray:
    return (TWO_PI * 1j) * grid.ky * c


def gradient(f: SpectralField) -> VectorField:
    g = f.grid
    return VectorField(SpectralField(g, _dx(g, f.coeff)), SpectralField(g, _dy(g, f.coeff)))


def divergence(v: VectorField) -> SpectralField:
    g = v.grid
    return SpectralField(g, _dx(g, v.x_comp.coeff) + _dy(g, v.y_comp.coeff))


def laplacian(f):
    """Laplacian of a scalar or vector field; preserves the solenoidal flag."""
    if isinstance(f, VectorField):
        return VectorField(
            laplacian(f.x_comp), laplacian(f.y_comp), divergence_free=f.divergence_free
        )
    g = f.grid
    return SpectralField(g, (-FOUR_PI_SQ) * g.ksq * f.coeff)


def perp_gradient(f: SpectralField) -> VectorField:
    """Rotated gradient (-df/dy, df/dx); exactly solenoidal mode by mode."""
    g = f.grid
    return VectorField(
        SpectralField(g, -_dy(g, f.coeff)),
        SpectralField(g, _dx(g, f.coeff)),
        divergence_free=True,
    )


def leray_project(v: VectorField) -> VectorField:
    """L2-orthogonal projection onto divergence-free fields.

    Mode-wise coeff(k) <- (I - k k^T / |k|^2) coeff(k) for k != 0; the mean
    mode is untouched. Idempotent and self-adjoint. The output carries the
    solenoidal flag as an algebraic guarantee (k . out(k) cancels exactly);
    revalidating it relatively would spuriously fail whenever the input is
    close to a pure gradient and the projection cancels to round-off.
    """
    g = v.grid
    cx, cy = v.x_comp.coeff, v.y_comp.coeff
    dot = (g.kx * cx + g.ky * cy) * g.inv_ksq
    return VectorField._carry_flag(
        SpectralField(g, cx - g.kx * dot),
        SpectralField(g, cy - g.ky * dot),
        True,
    )


# ---------------------------------------------------------------------------
# norms and inner products

def _order(s) -> int:
    if isinstance(s, SobolevIndex):
        return s.s
    return SobolevIndex(s).s


def sobolev_norm(f, s) -> float:
    """H^s norm (sum_k (1 + 4 pi^2 |k|^2)^s |coeff|^2)^{1/2}.

    Accepts a scalar or vector field and an integer order s >= -1 (or a
    :class:`SobolevIndex`); s = 0 is the L2 norm by Parseval.
    """
    if isinstance(f, VectorField):
        return math.hypot(sobolev_norm(f.x_comp, s), sobolev_norm(f.y_comp, s))
    w = (1.0 + FOUR_PI_SQ * f.grid.ksq) ** _order(s)
    return float(np.sqrt(np.sum(w * (f.coeff.real**2 + f.coeff.imag**2))))


def h1_seminorm(f) -> float:
    """Gradient L2 norm (sum_k 4 pi^2 |k|^2 |coeff|^2)^{1/2}."""
    if isinstance(f, VectorField):
        return math.hypot(h1_seminorm(f.x_comp), h1_seminorm(f.y_comp))
    w = FOUR_PI_SQ * f.grid.ksq
    return float(np.sqrt(np.sum(w * (f.coeff.real**2 + f.coeff.imag**2))))


def l2_inner(f, g) -> float:
    """L2 inner product of two real fields (scalar with scalar, vector with vector)."""
    if isinstance(f, VectorField) != isinstance(g, VectorField):
        raise TypeError("cannot pair a scalar field with a vector field")
    if isinstance(f, VectorField):
        return l2_inner(f.x_comp, g.x_comp) + l2_inner(f.y_comp, g.y_comp)
    f._same_grid(g)
    return float(np.real(np.sum(np.conj(f.coeff) * g.coeff)))


def lp_norm(f, p: float) -> float:
    """L^p norm by native grid-sample quadrature (mean |f|^p)^{1/p}.

    For vector fields |f| is the pointwise Euclidean magnitude.
    """
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if isinstance(f, VectorField):
        vals = np.hypot(to_physical(f.x_comp), to_physical(f.y_comp))
    else:
        vals = np.abs(to_physical(f))
    return float(np.mean(vals**p) ** (1.0 / p))


@lru_cache(maxsize=32)
def _index_map(n: int, m: int) -> np.ndarray:
    """Positions of the n-grid wavenumbers inside an m-grid FFT layout (m > n)."""
    k = np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)
    idx = np.mod(k, m)
    idx.setflags(write=False)
    return idx


def _padded_samples(coeff: np.ndarray, n: int, m: int) -> np.ndarray:
    """Samples of the field's trigonometric polynomial on an m-by-m grid."""
    idx = _index_map(n, m)
    big = np.zeros((m, m), dtype=np.complex128)
    big[np.ix_(idx, idx)] = coeff
    return np.fft.ifft2(big).real * (m * m)


def l4_norm_exact(f) -> float:
    """L4 norm with exact quadrature.

    The spectrum is zero-padded to a 2n grid before sampling, so |f|^4 (a
    trigonometric polynomial of degree at most 2n - 4) is integrated exactly.
    This is what makes the H^{-1} bound check a sharp discrete inequality
    rather than one that holds only up to quadrature error.
    """
    if isinstance(f, VectorField):
        n = f.n
        m = 2 * n
        sx = _padded_samples(f.x_comp.coeff, n, m)
        sy = _padded_samples(f.y_comp.coeff, n, m)
        q = (sx * sx + sy * sy) ** 2
    else:
        n = f.n
        m = 2 * n
        s = _padded_samples(f.coeff, n, m)
        q = s**4
    return float(np.mean(q) ** 0.25)


# ---------------------------------------------------------------------------
# dealiased products

def dealiased_product(f: SpectralField, g: SpectralField) -> SpectralField:
    """Pointwise product with coefficients exact on all retained wavenumbers.

    Both factors are zero-padded to a 3n/2 grid, multiplied in physical
    space, and truncated back. Since inputs live in |k|_inf <= n/2 - 1, true
    product frequencies reach at most n - 2 while aliases on the padded grid
    differ by 3n/2 per axis, so no alias lands inside the retained band.
    """
    f._same_grid(g)
    n = f.n
    m = 3 * n // 2
    prod = _padded_samples(f.coeff, n, m) * _padded_samples(g.coeff, n, m)
    big = np.fft.fft2(prod) / (m * m)
    idx = _index_map(n, m)
    c = _hermitianize(big[np.ix_(idx, idx)])
    ny = n // 2
    c[ny, :] = 0.0
    c[:, ny] = 0.0
    return SpectralField(f.grid, c)


def advective_term(a: VectorField, b: VectorField, form: str = "advective") -> VectorField:
    """(a . grad) b with exact dealiasing, or the divergence form div(a x b).

    The divergence form computes d_i (a_i b_j) and agrees with the advective
    form (to round-off) exactly when a is solenoidal, so requesting it with a
    field that does not carry the divergence_free invariant is an error.
    """
    if form not in ("advective", "divergence"):
        raise ValueError(f"unknown form {form!r}")
    if form == "divergence" and not a.divergence_free:
        raise ValueError("divergence form requires a divergence-free advecting field")
    g = a.grid
    if g != b.grid:
        raise ValueError("fields live on different grids")
    comps = []
    for bj in (b.x_comp, b.y_comp):
        if form == "advective":
            dbx = SpectralField(g, _dx(g, bj.coeff))
            dby = SpectralField(g, _dy(g, bj.coeff))
            cj = (
                dealiased_product(a.x_comp, dbx).coeff
                + dealiased_product(a.y_comp, dby).coeff
            )
        else:
            px = dealiased_product(a.x_comp, bj)
            py = dealiased_product(a.y_comp, bj)
            cj = _dx(g, px.coeff) + _dy(g, py.coeff)
        comps.append(SpectralField(g, cj))
    return VectorField(comps[0], comps[1])


# ---------------------------------------------------------------------------
# field constructors

def _shell_representatives(s: int) -> list[tuple[int, int]]:
    """Half-plane representatives of the shell |k|_inf = s, lexicographic.

    Exactly one of each conjugate pair {k, -k}: the modes with k1 > 0 plus
    (0, s). The shell contributes 4 s representatives (8 s modes total).
    """
    reps = [(0, s)]
    for k1 in range(1, s):
        reps.append((k1, -s))
        reps.append((k1, s))
    for k2 in range(-s, s + 1):
        reps.append((s, k2))
    return reps


def _place_conjugate_pairs(c: np.ndarray, reps, values) -> None:
    n = c.shape[0]
    for (k1, k2), v in zip(reps, values):
        c[k1 % n, k2 % n] = v
        c[(-k1) % n, (-k2) % n] = np.conj(v)


def random_scalar_field(grid: TorusGrid, seed, exponent: float) -> SpectralField:
    """Zero-mean random scalar field with |coeff(k)| = |k|^{-exponent}.

    Phases are drawn shell by shell (|k|_inf = 1, 2, ...) in a fixed order,
    so fields with the same seed are nested across grid sizes: a coarse grid
    sees a prefix of the fine grid's draws.
    """
    rng = np.random.default_rng(seed)
    n = grid.n
    c = np.zeros((n, n), dtype=np.complex128)
    for s in range(1, n // 2):
        reps = _shell_representatives(s)
        phases = rng.uniform(0.0, TWO_PI, size=len(reps))
        k = np.array(reps, dtype=np.float64)
        amp = (k[:, 0] ** 2 + k[:, 1] ** 2) ** (-exponent / 2.0)
        _place_conjugate_pairs(c, reps, amp * np.exp(1j * phases))
    return SpectralField(grid, c)


def _random_solenoidal(grid: TorusGrid, seed, exponent: float) -> VectorField:
    rng = np.random.default_rng(seed)
    n = grid.n
    cx = np.zeros((n, n), dtype=np.complex128)
    cy = np.zeros((n, n), dtype=np.complex128)
    for s in range(1, n // 2):
        reps = _shell_representatives(s)
        phases = rng.uniform(0.0, TWO_PI, size=(len(reps), 2))
        k = np.array(reps, dtype=np.float64)
        amp = (k[:, 0] ** 2 + k[:, 1] ** 2) ** (-exponent / 2.0)
        _place_conjugate_pairs(cx, reps, amp * np.exp(1j * phases[:, 0]))
        _place_conjugate_pairs(cy, reps, amp * np.exp(1j * phases[:, 1]))
    raw = VectorField(SpectralField(grid, cx), SpectralField(grid, cy))
    return leray_project(raw)


def taylor_green(grid: TorusGrid) -> VectorField:
    """The cellular field (-sin(2 pi x) cos(2 pi y), cos(2 pi x) sin(2 pi y))."""
    x = grid.x[:, None]
    y = grid.x[None, :]
    psi = np.sin(TWO_PI * x) * np.sin(TWO_PI * y) / TWO_PI
    return perp_gradient(from_physical(grid, psi))


def init_field(
    grid: TorusGrid,
    kind: str,
    seed=None,
    spectrum_exponent: float | None = None,
    path=None,
) -> VectorField:
    """Construct a divergence-free initial field.

    kind = "taylor_green" needs no further arguments; "random_sobolev" needs
    seed and spectrum_exponent (|coeff| ~ |k|^{-exponent}, uniform phases,
    Leray-projected, zero mean, bit-reproducible per seed); "from_file" reads
    a two-component torus snapshot from ``path``.
    """
    if kind == "taylor_green":
        return taylor_green(grid)
    if kind == "random_sobolev":
        if seed is None or spectrum_exponent is None:
            raise ValueError("random_sobolev needs seed and spectrum_exponent")
        return _random_solenoidal(grid, seed, float(spectrum_exponent))
    if kind == "from_file":
        if path is None:
            raise ValueError("from_file needs a snapshot path")
        from .snapshot import read_snapshot

        snap = read_snapshot(path)
        if snap.box is not None:
            raise ValueError("free-space snapshot cannot initialize a torus field")
        if snap.samples.shape[0] != 2:
            raise ValueError(
                f"snapshot holds {snap.samples.shape[0]} components, expected 2"
            )
        if snap.samples.shape[1] != grid.n:
            raise ValueError(
                f"snapshot resolution {snap.samples.shape[1]} does not match grid {grid.n}"
            )
        fx = from_physical(grid, snap.samples[0])
        fy = from_physical(grid, snap.samples[1])
        try:
            return VectorField(fx, fy, divergence_free=True)
        except ValueError as exc:
            raise ValueError(f"malformed snapshot: {exc}") from exc
    raise ValueError(f"unknown init kind {kind!r}")


# ---------------------------------------------------------------------------
# band limiting and off-grid evaluation

def band_limit(f: SpectralField, kappa: float) -> SpectralField:
    """Zero all modes with Euclidean |k| > kappa."""
    mask = f.grid.ksq <= kappa * kappa
    return SpectralField(f.grid, np.where(mask, f.coeff, 0.0))


def evaluate_on_grid(f: SpectralField, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Evaluate the trigonometric polynomial on the tensor grid x cross y.

    Returns shape (len(x), len(y)). Cost is O(len(x) n^2), intended for
    moderate point counts (oracle comparisons, snapshots at offsets).
    """
    k = np.fft.fftfreq(f.n, d=1.0 / f.n)
    ax = np.exp((TWO_PI * 1j) * np.outer(np.asarray(x, float), k))
    ay = np.exp((TWO_PI * 1j) * np.outer(np.asarray(y, float), k))
    return np.real(ax @ f.coeff @ ay.T)
