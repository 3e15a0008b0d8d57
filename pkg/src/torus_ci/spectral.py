"""Periodic field algebra on the unit torus T^2 = [-1/2, 1/2)^2.

Arrays follow one layout everywhere: leading axes are components, the last
two axes are the grid indices (i along x1, j along x2).  Spectral operators
are Fourier multipliers with wavenumbers 2*pi*k, applied through real FFTs.
Odd-order derivative multipliers vanish on Nyquist modes so that real fields
stay real; inputs are expected to be band-limited well below Nyquist.
"""

from __future__ import annotations

import functools
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .errors import BadExponent, NonZeroMean

TWO_PI = 2.0 * np.pi


def workers() -> int:
    """Worker count for FFTs, capped by the TORUS_CI_THREADS environment variable."""
    cap = os.environ.get("TORUS_CI_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = max(1, min(n, int(cap)))
        except ValueError:
            pass
    return n


@dataclass(frozen=True)
class GridSpec:
    """Uniform space-time grid: n1 x n2 nodes on T^2 and n_t nodes on [0, 1]."""

    n1: int = 256
    n2: int = 256
    n_t: int = 65
    t_span: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self) -> None:
        if self.n1 != self.n2:
            raise ValueError("only square grids are supported")
        if self.n1 < 16 or self.n1 & (self.n1 - 1):
            raise ValueError("n1 must be a power of two >= 16")
        if self.n_t < 9:
            raise ValueError("n_t must be >= 9")

    @property
    def h(self) -> float:
        return 1.0 / self.n1

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t_span[0], self.t_span[1], self.n_t)

    @property
    def dt(self) -> float:
        return (self.t_span[1] - self.t_span[0]) / (self.n_t - 1)


class Torus:
    """FFT grid on T^2 with cached multipliers.  Use :func:`torus` to share instances."""

    def __init__(self, n: int):
        if n < 4 or n & (n - 1):
            raise ValueError("grid size must be a power of two")
        self.n = n
        self.h = 1.0 / n
        self.x = -0.5 + np.arange(n) * self.h
        k1 = np.fft.fftfreq(n, d=1.0 / n)
        k2 = np.fft.rfftfreq(n, d=1.0 / n)
        self.k1 = k1[:, None]
        self.k2 = k2[None, :]
        nyq1 = np.abs(self.k1) == n // 2
        nyq2 = np.abs(self.k2) == n // 2
        self.d1 = np.where(nyq1, 0.0, 1j * TWO_PI * self.k1) * np.ones_like(self.k2)
        self.d2 = np.where(nyq2, 0.0, 1j * TWO_PI * self.k2) * np.ones_like(self.k1)
        # Delta = d1^2 + d2^2 with the Nyquist-zeroed multipliers, so that
        # div grad = Delta and curl-perp curl = Delta - grad div hold exactly
        self.lap = (self.d1**2 + self.d2**2).real
        nz = self.lap != 0.0
        self.inv_lap = np.where(nz, 1.0 / np.where(nz, self.lap, 1.0), 0.0)

    # transforms -------------------------------------------------------
    def fft(self, a: np.ndarray) -> np.ndarray:
        return sfft.rfft2(a, axes=(-2, -1), workers=workers())

    def ifft(self, a_hat: np.ndarray) -> np.ndarray:
        return sfft.irfft2(a_hat, s=(self.n, self.n), axes=(-2, -1), workers=workers())

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.x, indexing="ij")

    # multipliers ------------------------------------------------------
    def deriv_multiplier(self, alpha: tuple[int, int]) -> np.ndarray:
        a1, a2 = alpha
        return self.d1**a1 * self.d2**a2

    def apply(self, a: np.ndarray, mult: np.ndarray) -> np.ndarray:
        return self.ifft(self.fft(a) * mult)

    def derivative(self, a: np.ndarray, alpha: tuple[int, int]) -> np.ndarray:
        return self.apply(a, self.deriv_multiplier(alpha))

    def grad(self, f: np.ndarray) -> np.ndarray:
        """Gradient of scalar(s): output gains a trailing component axis of length 2 in front."""
        fh = self.fft(f)
        return self.ifft(np.stack([fh * self.d1, fh * self.d2], axis=-3))

    def div(self, u: np.ndarray) -> np.ndarray:
        """Divergence contracting the last component index: (div M)_i = d_j M_ij."""
        uh = self.fft(u)
        return self.ifft(uh[..., 0, :, :] * self.d1 + uh[..., 1, :, :] * self.d2)

    def curl(self, u: np.ndarray) -> np.ndarray:
        uh = self.fft(u)
        return self.ifft(self.d1 * uh[..., 1, :, :] - self.d2 * uh[..., 0, :, :])

    def perp_grad(self, f: np.ndarray) -> np.ndarray:
        fh = self.fft(f)
        return self.ifft(np.stack([-self.d2 * fh, self.d1 * fh], axis=-3))

    def laplacian(self, a: np.ndarray, power: int = 1) -> np.ndarray:
        return self.apply(a, self.lap**power)

    def mean(self, a: np.ndarray) -> np.ndarray:
        return a.mean(axis=(-2, -1))


@functools.lru_cache(maxsize=8)
def torus(n: int) -> Torus:
    return Torus(n)


def _torus_for(a: np.ndarray) -> Torus:
    if a.shape[-1] != a.shape[-2]:
        raise ValueError("field arrays must end with a square grid")
    return torus(a.shape[-1])


def _l2(a: np.ndarray) -> float:
    return float(np.sqrt(np.mean(magnitude(a) ** 2)))


def _check_mean_zero(a: np.ndarray, tol: float) -> None:
    m = np.abs(a.mean(axis=(-2, -1)))
    scale = _l2(a)
    if np.max(m) > tol * max(scale, 1e-300) and np.max(m) > 0.0:
        raise NonZeroMean(f"mean {np.max(m):.3e} exceeds {tol:g} x norm {scale:.3e}")


# ---------------------------------------------------------------------------
# field containers


@dataclass(frozen=True, eq=False)
class Field2:
    """Real samples of a periodic field; the spectrum is computed lazily and cached."""

    values: np.ndarray
    _spec: dict = field(default_factory=dict, repr=False, compare=False)

    rank: int = 0

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if v.ndim != self.rank + 2:
            raise ValueError(f"expected {self.rank + 2}-d array, got shape {v.shape}")

    @property
    def n(self) -> int:
        return self.values.shape[-1]

    @property
    def spectrum(self) -> np.ndarray:
        if "hat" not in self._spec:
            self._spec["hat"] = torus(self.n).fft(self.values)
        return self._spec["hat"]


@dataclass(frozen=True, eq=False)
class ScalarField2(Field2):
    rank: int = 0


@dataclass(frozen=True, eq=False)
class VectorField2(Field2):
    rank: int = 1


@dataclass(frozen=True, eq=False)
class TensorField2(Field2):
    rank: int = 2

    def asymmetry(self) -> float:
        return float(np.max(np.abs(self.values[0, 1] - self.values[1, 0])))


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    """Slices on a uniform time grid; ``values`` has shape (n_t, *components, n, n)."""

    values: np.ndarray
    dt: float
    t0: float = 0.0

    @property
    def n_t(self) -> int:
        return self.values.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_t)


@dataclass(frozen=True, eq=False)
class NSRState:
    """Sampled Navier-Stokes-Reynolds triple (u, pi, R)."""

    u: SpaceTimeField
    pi: SpaceTimeField
    R: SpaceTimeField

    def check(self, tol: float = 1e-10) -> dict:
        u = self.u.values
        tor = _torus_for(u)
        uh = tor.fft(u)
        divh = uh[:, 0] * tor.d1 + uh[:, 1] * tor.d2
        scale = max(float(np.max(np.abs(uh))), 1e-300)
        R = self.R.values
        return {
            "div_ok": bool(np.max(np.abs(divh)) <= tol * scale),
            "mean_ok": bool(np.max(np.abs(u.mean(axis=(-2, -1)))) <= tol * max(float(np.max(np.abs(u))), 1e-300)),
            "sym_ok": bool(np.max(np.abs(R[:, 0, 1] - R[:, 1, 0])) <= 1e-12 * max(float(np.max(np.abs(R))), 1.0)),
        }


def _vals(a):
    return a.values if isinstance(a, Field2) else np.asarray(a, dtype=float)


def _wrap_like(a, values: np.ndarray):
    if isinstance(a, Field2):
        cls = {0: ScalarField2, 1: VectorField2, 2: TensorField2}[values.ndim - 2]
        return cls(values)
    return values


# ---------------------------------------------------------------------------
# operators


def derivative(f, alpha: tuple[int, int]):
    """Exact Fourier-multiplier derivative d1^alpha1 d2^alpha2."""
    v = _vals(f)
    return _wrap_like(f, _torus_for(v).derivative(v, alpha))


def inverse_laplacian(f, tol: float = 1e-10):
    """Mean-zero solution of Delta g = f."""
    v = _vals(f)
    _check_mean_zero(v, tol)
    tor = _torus_for(v)
    return _wrap_like(f, tor.apply(v, tor.inv_lap))


def leray_project(u):
    """P u = u - grad Delta^{-1} div u; the mean is preserved."""
    v = _vals(u)
    tor = _torus_for(v)
    uh = tor.fft(v)
    divh = uh[..., 0, :, :] * tor.d1 + uh[..., 1, :, :] * tor.d2
    ph = divh * tor.inv_lap
    out = uh - np.stack([tor.d1 * ph, tor.d2 * ph], axis=-3)
    return _wrap_like(u, tor.ifft(out))


def gradient_part(u):
    """grad Delta^{-1} div u, the complement of the Leray projection."""
    v = _vals(u)
    tor = _torus_for(v)
    uh = tor.fft(v)
    ph = (uh[..., 0, :, :] * tor.d1 + uh[..., 1, :, :] * tor.d2) * tor.inv_lap
    return _wrap_like(u, tor.ifft(np.stack([tor.d1 * ph, tor.d2 * ph], axis=-3)))


def sym_antidivergence(u, tol: float = 1e-10):
    """Symmetric R with div R = u:  R = grad v + (grad v)^T - (div v) Id,  v = Delta^{-1} u."""
    v = _vals(u)
    _check_mean_zero(v, tol)
    tor = _torus_for(v)
    vh = tor.fft(v) * tor.inv_lap
    g = [[vh[..., i, :, :] * d for d in (tor.d1, tor.d2)] for i in range(2)]
    div_v = g[0][0] + g[1][1]
    r00 = 2.0 * g[0][0] - div_v
    r11 = 2.0 * g[1][1] - div_v
    r01 = g[0][1] + g[1][0]
    out = tor.ifft(np.stack([np.stack([r00, r01], axis=-3), np.stack([r01, r11], axis=-3)], axis=-4))
    return _wrap_like(u, out)


def bilinear_antidivergence(f, u, tol: float = 1e-10):
    """R(f, u) with div R = f u - mean(f u)."""
    fv, uv = _vals(f), _vals(u)
    _check_mean_zero(uv, tol)
    prod = fv[..., None, :, :] * uv if fv.ndim == uv.ndim - 1 else fv * uv
    prod = prod - prod.mean(axis=(-2, -1), keepdims=True)
    return _wrap_like(u, sym_antidivergence(prod, tol=np.inf))


def bilinear_tensor_antidivergence(v, T, tol: float = 1e-10):
    """Tilde-R(v, T) with div = T v - mean(T v), where (T v)_i = T_ij v_j."""
    vv, Tv = _vals(v), _vals(T)
    _check_mean_zero(Tv, tol)
    prod = np.einsum("...ijxy,...jxy->...ixy", Tv, vv)
    prod = prod - prod.mean(axis=(-2, -1), keepdims=True)
    out = sym_antidivergence(prod, tol=np.inf)
    return TensorField2(out) if isinstance(v, Field2) else out


def magnitude(a: np.ndarray) -> np.ndarray:
    """Pointwise Euclidean (Frobenius) size over all component axes."""
    a = np.asarray(a, dtype=float)
    if a.ndim == 2:
        return np.abs(a)
    return np.sqrt(np.sum(a**2, axis=tuple(range(a.ndim - 2))))


def lebesgue_norm(f, s: float) -> float:
    """Flat-quadrature L^s(T^2) norm of the pointwise magnitude; s = inf gives the max."""
    if not (s >= 1.0):
        raise BadExponent(f"L^s needs s >= 1, got {s}")
    m = magnitude(_vals(f))
    if np.isinf(s):
        return float(m.max())
    if s == 1.0:
        return float(m.mean())
    if s == 2.0:
        return float(np.sqrt(np.mean(m * m)))
    return float(np.mean(m**s) ** (1.0 / s))


def mixed_norm(stf, r: float, s: float) -> float:
    """L^r in time of the L^s(T^2) norms of the slices (flat mean over time nodes)."""
    vals = stf.values if isinstance(stf, SpaceTimeField) else np.asarray(stf)
    per = np.array([lebesgue_norm(sl, s) for sl in vals])
    return time_norm(per, r)


def time_norm(per_slice: np.ndarray, r: float) -> float:
    if not (r >= 1.0):
        raise BadExponent(f"L^r needs r >= 1, got {r}")
    per_slice = np.asarray(per_slice, dtype=float)
    if np.isinf(r):
        return float(per_slice.max())
    return float(np.mean(per_slice**r) ** (1.0 / r))


def sobolev_sigma1_seminorm(u, sigma: float) -> float:
    """Interpolation surrogate ||u||_{L^1}^{1-sigma} ||grad u||_{L^1}^sigma."""
    if not (0.0 < sigma < 1.0):
        raise BadExponent(f"sigma must lie in (0, 1), got {sigma}")
    v = _vals(u)
    tor = _torus_for(v)
    a = lebesgue_norm(v, 1.0)
    b = lebesgue_norm(tor.grad(v), 1.0)
    if a == 0.0 or b == 0.0:
        return 0.0
    return float(a ** (1.0 - sigma) * b**sigma)


# ---------------------------------------------------------------------------
# Navier-Stokes-Reynolds residual


def time_derivative(values: np.ndarray, dt: float) -> np.ndarray:
    """Fourth-order finite differences along axis 0; one-sided stencils at both ends."""
    f = np.asarray(values, dtype=float)
    nt = f.shape[0]
    if nt < 5:
        raise ValueError("need at least 5 time slices")
    out = np.empty_like(f)
    out[2:-2] = (-f[4:] + 8.0 * f[3:-1] - 8.0 * f[1:-3] + f[:-4]) / (12.0 * dt)
    out[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * dt)
    out[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / (12.0 * dt)
    out[-1] = (25.0 * f[-1] - 48.0 * f[-2] + 36.0 * f[-3] - 16.0 * f[-4] + 3.0 * f[-5]) / (12.0 * dt)
    out[-2] = (3.0 * f[-1] + 10.0 * f[-2] - 18.0 * f[-3] + 6.0 * f[-4] - f[-5]) / (12.0 * dt)
    return out


def nsr_slice_residual(u: np.ndarray, dt_u: np.ndarray, pi: np.ndarray | None, R: np.ndarray) -> np.ndarray:
    """dt u + div(u x u) - Delta u + grad pi + div R at one time."""
    tor = _torus_for(u)
    flux = u[:, None] * u[None, :] + R
    uh = tor.fft(u)
    fh = tor.fft(flux)
    res = fh[:, 0] * tor.d1 + fh[:, 1] * tor.d2 - tor.lap * uh
    if pi is not None:
        ph = tor.fft(pi)
        res = res + np.stack([tor.d1 * ph, tor.d2 * ph])
    return dt_u + tor.ifft(res)


def nsr_residual(state: NSRState) -> SpaceTimeField:
    """Residual of the NSR system on every time slice of ``state``."""
    u = state.u.values
    dtu = time_derivative(u, state.u.dt)
    out = np.stack(
        [nsr_slice_residual(u[i], dtu[i], state.pi.values[i], state.R.values[i]) for i in range(u.shape[0])]
    )
    return SpaceTimeField(out, state.u.dt, state.u.t0)


def random_band_limited(n: int, kmax: int, seed: int, components: tuple[int, ...] = (), mean_zero: bool = True) -> np.ndarray:
    """Real random field with Fourier support in |k|_inf <= kmax and unit RMS per component."""
    if not 0 <= kmax < n // 2:
        raise ValueError("kmax must be below the Nyquist index")
    rng = np.random.default_rng(seed)
    tor = torus(n)
    # coefficients drawn on the fixed band only, so the field is grid-independent
    block = components + (2 * kmax + 1, kmax + 1)
    coef = rng.standard_normal(block) + 1j * rng.standard_normal(block)
    spec = np.zeros(components + (n, n // 2 + 1), dtype=complex)
    rows = np.r_[0 : kmax + 1, n - kmax : n]
    spec[..., rows, : kmax + 1] = np.concatenate([coef[..., kmax:, :], coef[..., :kmax, :]], axis=-2)
    if mean_zero:
        spec[..., 0, 0] = 0.0
    out = tor.ifft(spec)
    rms = np.sqrt(np.mean(out**2, axis=(-2, -1), keepdims=True))
    return out / np.where(rms > 0, rms, 1.0)
