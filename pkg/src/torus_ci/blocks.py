"""Intermittent building blocks W_k, Y_k, A_k and their one-dimensional profiles.

Profiles are polynomial pieces with exact rational coefficients, so moments,
L^2 normalizations and antiderivatives are computed without rounding.  Grid
samples are evaluated from the factored bump, which is stable for large m.

Sign convention: blocks travel along -xi_k, i.e. the phase is
x + omega t xi_k / |xi_k|^2.  With this choice div(W_k x W_k) = +d_t Y_k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import numpy.polynomial.polynomial as npoly
from scipy.special import betainc

from .errors import SmoothnessTooLow, UnderResolved
from .spectral import torus

XI = np.array([[1, 0], [0, 1], [1, 1], [1, -1]], dtype=float)
XI_PERP = np.stack([-XI[:, 1], XI[:, 0]], axis=1)
XI_NORM2 = np.sum(XI**2, axis=1)
XI_HAT = XI / np.sqrt(XI_NORM2)[:, None]
XI_PERP_HAT = XI_PERP / np.sqrt(XI_NORM2)[:, None]


def _poly_pow(base: list, k: int) -> np.ndarray:
    return npoly.polypow(np.array([Fraction(c) for c in base], dtype=object), k)


def _integrate(coef: np.ndarray, a: Fraction, b: Fraction) -> Fraction:
    anti = npoly.polyint(coef)
    return Fraction(npoly.polyval(b, anti) - npoly.polyval(a, anti))


# ---------------------------------------------------------------------------
# spatial profiles


@dataclass(frozen=True)
class ProfileSpec:
    """Moment order N and bump exponent m of Phi = c d/dx (1/4 - x^2)^(m+1)."""

    N: int = 0
    m: int | None = None

    def __post_init__(self) -> None:
        if self.N < 0:
            raise ValueError("N must be nonnegative")
        if self.m is None:
            object.__setattr__(self, "m", 2 * self.N + 12)
        if self.m < 2 * self.N + 6:
            raise SmoothnessTooLow(f"m = {self.m} < 2N + 6 = {2 * self.N + 6}")

    @staticmethod
    def for_p(p: float, m: int | None = None) -> "ProfileSpec":
        """N = floor(2(1/p - 1)), computed exactly for rational p."""
        q = Fraction(p).limit_denominator(10**6) if not isinstance(p, Fraction) else p
        return ProfileSpec(N=math.floor(2 * (1 / q - 1)), m=m)


@dataclass(frozen=True)
class Profiles:
    """Phi and phi = Phi^(2N+3), normalized so that int phi^2 = 1.

    ``Phi_exact``/``phi_exact`` hold unnormalized rational coefficients; the
    float evaluators include the normalization ``scale``.
    """

    spec: ProfileSpec
    Phi_exact: np.ndarray
    phi_exact: np.ndarray
    phi_sq_integral: Fraction
    scale: float

    def order(self, name: str) -> int:
        """Derivative order of the profile with respect to (1/4 - x^2)^(m+1)."""
        base = {"Phi": 1, "phi": 2 * self.spec.N + 4}
        if name in base:
            return base[name]
        if name[0] == "d" and name[1:] in base:
            return base[name[1:]] + 1
        raise KeyError(name)

    def eval(self, name: str, x: np.ndarray) -> np.ndarray:
        """Evaluate a profile on R; zero outside (-1/2, 1/2).

        Leibniz rule on (1/2 - x)^M (1/2 + x)^M: the power basis loses about
        ten digits to cancellation for large m.
        """
        x = np.asarray(x, dtype=float)
        inside = np.abs(x) < 0.5
        xc = np.where(inside, x, 0.0)
        M, j = self.spec.m + 1, self.order(name)
        lo, hi = 0.5 - xc, 0.5 + xc
        out = np.zeros_like(xc)
        for i in range(j + 1):
            if i > M or j - i > M:
                continue
            c = math.comb(j, i) * math.perm(M, i) * math.perm(M, j - i) * (-1) ** i
            out += c * lo ** (M - i) * hi ** (M - j + i)
        return np.where(inside, self.scale * out, 0.0)

    def moment(self, j: int) -> Fraction:
        """Exact int x^j phi (unnormalized)."""
        mono = np.array([Fraction(0)] * j + [Fraction(1)], dtype=object)
        return _integrate(npoly.polymul(mono, self.phi_exact), Fraction(-1, 2), Fraction(1, 2))

    def Phi_integral(self) -> Fraction:
        return _integrate(self.Phi_exact, Fraction(-1, 2), Fraction(1, 2))

    def phi_l2sq(self) -> float:
        """int phi^2 after normalization; equals 1 up to one rounding of the scale."""
        return float(self.phi_sq_integral) * self.scale**2


def make_phi(spec: ProfileSpec) -> Profiles:
    bump = _poly_pow([Fraction(1, 4), 0, -1], spec.m + 1)
    Phi = npoly.polyder(bump)
    phi = npoly.polyder(Phi, 2 * spec.N + 3)
    I = _integrate(npoly.polymul(phi, phi), Fraction(-1, 2), Fraction(1, 2))
    return Profiles(spec, Phi, phi, I, 1.0 / math.sqrt(I))


def wrap(x: np.ndarray) -> np.ndarray:
    """Representative of x mod 1 in [-1/2, 1/2)."""
    return x - np.floor(x + 0.5)


def concentrate_periodize(g, mu: float):
    """1-periodic function equal to mu^{1/2} g(mu x) on the fundamental cell."""
    if mu < 1:
        raise ValueError("mu must be >= 1")
    root = math.sqrt(mu)

    def g_mu(x):
        return root * g(mu * wrap(np.asarray(x, dtype=float)))

    return g_mu


def periodic_profile(prof: Profiles, name: str, mu: float, x: np.ndarray) -> np.ndarray:
    """(name)_mu(x) = mu^{1/2} name(mu wrap(x)), vectorized."""
    return math.sqrt(mu) * prof.eval(name, mu * wrap(x))


# ---------------------------------------------------------------------------
# time profiles


@dataclass(frozen=True)
class TimeProfile:
    """g = c (t(1-t))^m_t on (0, 1) with int g^2 = 1; g^2 and its antiderivative are exact."""

    m_t: int = 8
    _c: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def g_exact(self) -> np.ndarray:
        """Unnormalized g; the exact normalization lives in ``c2``."""
        if "g" not in self._c:
            self._c["g"] = _poly_pow([0, 1, -1], self.m_t)
        return self._c["g"]

    @property
    def c2(self) -> Fraction:
        """Square of the normalization constant (rational)."""
        if "c2" not in self._c:
            self._c["c2"] = 1 / _integrate(npoly.polymul(self.g_exact, self.g_exact), Fraction(0), Fraction(1))
        return self._c["c2"]

    @property
    def g2_exact(self) -> np.ndarray:
        if "g2" not in self._c:
            self._c["g2"] = npoly.polymul(self.g_exact, self.g_exact) * self.c2
        return self._c["g2"]

    def _on_unit(self, name: str, y: np.ndarray) -> np.ndarray:
        """g, g' or int_0^y g^2 on (0, 1), in factored form (the expanded
        polynomials cancel catastrophically)."""
        y = np.asarray(y, dtype=float)
        inside = (y > 0.0) & (y < 1.0)
        yc = np.clip(y, 0.0, 1.0)
        m = self.m_t
        c = math.sqrt(self.c2)
        base = yc * (1.0 - yc)
        if name == "g":
            v = c * base**m
        elif name == "dg":
            v = c * m * base ** (m - 1) * (1.0 - 2.0 * yc)
        elif name == "G2":
            return betainc(2 * m + 1, 2 * m + 1, yc)
        else:
            raise KeyError(name)
        return np.where(inside, v, 0.0)

    def g(self, t):
        return self._on_unit("g", t)

    def g_kappa(self, kappa: float, nu: int, t):
        """g_kappa(nu t): 1-periodic extension of kappa^{1/2} g(kappa s), evaluated at s = nu t."""
        s = np.mod(nu * np.asarray(t, dtype=float), 1.0)
        return math.sqrt(kappa) * self._on_unit("g", kappa * s)

    def dg_kappa(self, kappa: float, nu: int, t):
        """d/dt of g_kappa(nu t)."""
        s = np.mod(nu * np.asarray(t, dtype=float), 1.0)
        return nu * kappa**1.5 * self._on_unit("dg", kappa * s)

    def h_kappa(self, kappa: float, nu: int, t):
        """h_kappa(nu t) with h_kappa(s) = int_0^s (g_kappa^2 - 1)."""
        s = np.mod(nu * np.asarray(t, dtype=float), 1.0)
        return self._on_unit("G2", kappa * s) - s

    def int_g2_kappa(self, kappa: int) -> Fraction:
        """Exact int_0^1 g_kappa^2 for integer kappa."""
        k = Fraction(kappa)
        scaled = np.array([c * k ** (i + 1) for i, c in enumerate(self.g2_exact)], dtype=object)
        return _integrate(scaled, Fraction(0), 1 / k)

    def h_bound(self, kappa: float, samples: int = 20001) -> float:
        t = np.linspace(0.0, 1.0, samples)
        return float(np.max(np.abs(self.h_kappa(kappa, 1, t))))

    def bump_breakpoints(self, kappa: float, nu: int) -> list[float]:
        """Times in [0, 1] where g_kappa(nu t) switches on or off."""
        pts = []
        for j in range(nu):
            pts += [j / nu, (j + 1.0 / kappa) / nu]
        return sorted(set(p for p in pts if 0.0 <= p <= 1.0) | {1.0})


def lp_norm_gauss(f, breakpoints, p: float, nodes: int = 64) -> float:
    """(int |f|^p)^{1/p} by Gauss-Legendre on each interval between breakpoints."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    total = 0.0
    for a, b in zip(breakpoints[:-1], breakpoints[1:]):
        if b <= a:
            continue
        t = 0.5 * (b - a) * x + 0.5 * (a + b)
        total += 0.5 * (b - a) * float(np.sum(w * np.abs(f(t)) ** p))
    return total ** (1.0 / p)


# ---------------------------------------------------------------------------
# building blocks


@dataclass(frozen=True)
class BlockParams:
    lam: int = 4
    mu1: float = 2.0
    mu2: float = 4.0
    omega: float = 16.0
    kappa: float = 4.0
    nu: int = 2

    def __post_init__(self) -> None:
        if int(self.lam) != self.lam or self.lam < 1:
            raise ValueError("lambda must be a positive integer")
        if int(self.nu) != self.nu or self.nu < 1:
            raise ValueError("nu must be a positive integer")
        if not (1 <= self.mu1 <= self.mu2):
            raise ValueError("need 1 <= mu1 <= mu2")
        if self.omega <= 0 or self.kappa < 1:
            raise ValueError("need omega > 0 and kappa >= 1")

    def check_resolution(self, n: int) -> None:
        if self.lam * self.mu2 * 8 > n:
            raise UnderResolved(f"lambda mu2 = {self.lam * self.mu2:g} needs n >= {8 * self.lam * self.mu2:g}, got {n}")

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in ("lam", "mu1", "mu2", "omega", "kappa", "nu")}


@dataclass(frozen=True, eq=False)
class BuildingBlocks:
    """Samples of the four blocks at one time; leading axis is k = 1..4."""

    t: float
    n: int
    params: BlockParams
    N: int
    W: np.ndarray  # (4, 2, n, n)
    Y: np.ndarray  # (4, 2, n, n)
    A: np.ndarray  # (4, 2, 2, n, n)
    dtA: np.ndarray  # (4, 2, 2, n, n), analytic time derivative
    dtW: np.ndarray  # (4, 2, n, n), analytic time derivative
    f1: np.ndarray  # (4, n, n) fast factor phi^k_{mu1}(lambda(xi.x + omega t))
    F2: np.ndarray  # (4, n, n) slow-direction potential, A = f1 F2 xi_hat x xi_perp_hat
    masks: np.ndarray  # (4, n, n) bool, open supports

    @property
    def q(self) -> np.ndarray:
        """Scalar profiles with Y_k = q_k xi_k."""
        return np.einsum("kixy,ki->kxy", self.Y, XI) / XI_NORM2[:, None, None]

    @property
    def dtY(self) -> np.ndarray:
        """d_t Y_k = 2 v_k d_t v_k xi_k / omega."""
        v = np.einsum("kixy,ki->kxy", self.W, XI_HAT)
        dv = np.einsum("kixy,ki->kxy", self.dtW, XI_HAT)
        return (2.0 * v * dv / self.params.omega)[:, None] * XI[:, :, None, None]


def _phases(params: BlockParams, n: int, t: float):
    X1, X2 = torus(n).mesh()
    for k in range(4):
        xi, xp = XI[k], XI_PERP[k]
        y1 = xi[0] * X1 + xi[1] * X2 + params.omega * t
        y2 = xp[0] * X1 + xp[1] * X2
        yield k, y1, y2


def make_blocks(params: BlockParams, prof: Profiles, t: float, n: int, check: bool = True) -> BuildingBlocks:
    if check:
        params.check_resolution(n)
    N = prof.spec.N
    lam, mu1, mu2 = params.lam, params.mu1, params.mu2
    W = np.empty((4, 2, n, n))
    Y = np.empty((4, 2, n, n))
    A = np.empty((4, 2, 2, n, n))
    dtA = np.empty((4, 2, 2, n, n))
    dtW = np.empty((4, 2, n, n))
    f1s = np.empty((4, n, n))
    F2s = np.empty((4, n, n))
    masks = np.empty((4, n, n), dtype=bool)
    for k, y1, y2 in _phases(params, n, t):
        shift = (k + 1) * XI_NORM2[k] / 16.0
        z1 = lam * y1 - shift
        z2 = lam * y2
        f1 = periodic_profile(prof, "phi", mu1, z1)
        df1 = params.omega * lam * mu1 * periodic_profile(prof, "dphi", mu1, z1)
        slow_phi = periodic_profile(prof, "phi", mu2, z2)
        slow_Phi = periodic_profile(prof, "Phi", mu2, z2)
        v = f1 * slow_phi
        W[k] = v * XI_HAT[k][:, None, None]
        dtW[k] = (df1 * slow_phi) * XI_HAT[k][:, None, None]
        Y[k] = (v * v / params.omega) * XI[k][:, None, None]
        F2 = slow_Phi / (XI_NORM2[k] ** ((2 * N + 3) / 2.0) * (lam * mu2) ** (2 * N + 3))
        e = np.outer(XI_HAT[k], XI_PERP_HAT[k])[:, :, None, None]
        A[k] = f1 * F2 * e
        dtA[k] = df1 * F2 * e
        f1s[k] = f1
        F2s[k] = F2
        masks[k] = (np.abs(wrap(z1)) < 0.5 / mu1) & (np.abs(wrap(z2)) < 0.5 / mu2)
    return BuildingBlocks(t, n, params, N, W, Y, A, dtA, dtW, f1s, F2s, masks)


def spectral_translate(a: np.ndarray, shift: tuple[float, float]) -> np.ndarray:
    """a(x - shift) via Fourier phase factors."""
    tor = torus(a.shape[-1])
    phase = np.exp(-2j * np.pi * (tor.k1 * shift[0] + tor.k2 * shift[1]))
    return tor.ifft(tor.fft(a) * phase)


def _rel(num: float, den: float) -> float:
    return float(num / den) if den > 0 else float(num)


def verify_block_identities(params: BlockParams, prof: Profiles, n: int, t: float = 0.0) -> dict:
    """Residuals of the block identities at time t and pairwise support overlaps."""
    bb = make_blocks(params, prof, t, n)
    tor = torus(n)
    out: dict = {"flux_identity": [], "mean_W": [], "mean_WW": [], "mean_q": [], "mean_Y": [], "periodicity": []}
    for k in range(4):
        W, Y = bb.W[k], bb.Y[k]
        WW = W[:, None] * W[None, :]
        div_ww = tor.div(WW)
        # d_t Y through the traveling phase: d_t = (omega / |xi|^2) xi . grad
        gY = tor.grad(Y)
        dtY = params.omega / XI_NORM2[k] * (XI[k][0] * gY[:, 0] + XI[k][1] * gY[:, 1])
        scale = float(np.sqrt(np.mean(dtY**2)))
        out["flux_identity"].append(_rel(float(np.sqrt(np.mean((div_ww - dtY) ** 2))), scale))
        out["mean_W"].append(float(np.max(np.abs(W.mean(axis=(-2, -1))))))
        target = np.outer(XI_HAT[k], XI_HAT[k])
        out["mean_WW"].append(float(np.max(np.abs(WW.mean(axis=(-2, -1)) - target))))
        q = np.sum(Y * XI[k][:, None, None], axis=0) / XI_NORM2[k]
        out["mean_q"].append(abs(float(q.mean()) * params.omega - 1.0))
        out["mean_Y"].append(float(np.max(np.abs(Y.mean(axis=(-2, -1)) * params.omega - XI[k]))))
        step = n // params.lam
        per = max(
            float(np.max(np.abs(np.roll(W, step, axis=-2) - W))),
            float(np.max(np.abs(np.roll(W, step, axis=-1) - W))),
        )
        out["periodicity"].append(per)
    # traveling wave: a time step that moves every block by whole cells
    dt = 2.0 / (n * params.omega)
    later = make_blocks(params, prof, t + dt, n)
    tw = []
    for k in range(4):
        shift = tuple(-params.omega * dt * XI[k] / XI_NORM2[k])
        moved = spectral_translate(bb.W[k], shift)
        tw.append(float(np.max(np.abs(moved - later.W[k]))))
    out["traveling_wave"] = tw
    overlaps = {}
    for i in range(4):
        for j in range(i + 1, 4):
            overlaps[f"{i + 1}-{j + 1}"] = int(np.count_nonzero(bb.masks[i] & bb.masks[j]))
    out["support_overlap_nodes"] = overlaps
    # supports agree with nonzero sets: W vanishes off the mask
    out["outside_support_max"] = float(max(np.max(np.abs(bb.W[k][:, ~bb.masks[k]]), initial=0.0) for k in range(4)))
    return out


# ---------------------------------------------------------------------------
# scaling laws

QUANTITIES = ("W", "Y", "A", "dtA", "divAT", "divdivA")


def theoretical_slopes(quantity: str, l: int, s: float, N: int) -> tuple[float, float, float]:
    """Exponents of (lambda, mu1, mu2) in the block estimates."""
    r = 1.0 / s
    m = 2 * N
    table = {
        "W": (l, 0.5 - r, l + 0.5 - r),
        "Y": (l, 1 - r, l + 1 - r),
        "A": (l - (m + 3), 0.5 - r, l - (m + 3) + 0.5 - r),
        "dtA": (l - (m + 2), 1.5 - r, l - (m + 3) + 0.5 - r),
        "divAT": (l - (m + 2), 1.5 - r, l - (m + 3) + 0.5 - r),
        "divdivA": (l - (m + 1), 1.5 - r, l - (m + 2) + 0.5 - r),
    }
    return table[quantity]


def _grad_power(tor, a: np.ndarray, l: int) -> np.ndarray:
    for _ in range(l):
        a = tor.grad(a)
    return a


def block_norms(bb: BuildingBlocks, l: int, s: float) -> dict[str, np.ndarray]:
    """||grad^l Q_k||_{L^s} for every quantity and k; shape (4,) per quantity."""
    from .spectral import lebesgue_norm

    tor = torus(bb.n)
    out = {q: np.empty(4) for q in QUANTITIES}
    for k in range(4):
        A = bb.A[k]
        fields = {
            "W": bb.W[k],
            "Y": bb.Y[k],
            "A": A,
            "dtA": bb.dtA[k],
            "divAT": tor.div(np.swapaxes(A, 0, 1)),
            "divdivA": tor.div(tor.div(A)),
        }
        for q, f in fields.items():
            out[q][k] = lebesgue_norm(_grad_power(tor, f, l), s)
    return out


def measure_scaling(
    prof: Profiles,
    base: BlockParams,
    param: str,
    values: list[float],
    n: int,
    l: int = 0,
    s: float = 2.0,
    t: float = 0.0,
) -> dict:
    """Log-log slopes of every block norm against one swept parameter."""
    if len(values) < 4:
        raise ValueError("need at least 4 sweep values")
    if param not in ("lam", "mu1", "mu2"):
        raise ValueError("param must be lam, mu1 or mu2")
    idx = {"lam": 0, "mu1": 1, "mu2": 2}[param]
    norms = {q: [] for q in QUANTITIES}
    for v in values:
        kw = base.to_json()
        kw[param] = int(v) if param == "lam" else float(v)
        p = BlockParams(**kw)
        p.check_resolution(n)
        bb = make_blocks(p, prof, t, n)
        for q, arr in block_norms(bb, l, s).items():
            norms[q].append(arr)
    logx = np.log(np.asarray(values, dtype=float))
    rows = []
    for q in QUANTITIES:
        y = np.log(np.array(norms[q]))  # (len(values), 4)
        fitted = [float(np.polyfit(logx, y[:, k], 1)[0]) for k in range(4)]
        theory = theoretical_slopes(q, l, s, prof.spec.N)[idx]
        worst = max(fitted, key=lambda f: abs(f - theory))
        rows.append(
            {"quantity": q, "s": s, "l": l, "parameter": param, "theoretical": theory, "fitted": worst, "error": abs(worst - theory)}
        )
    return {"rows": rows, "values": list(values), "n": n}


# ---------------------------------------------------------------------------
# identity suite

BLOCK_TOLERANCES = {"flux_identity": 1e-6, "mean_WW": 1e-4, "mean_W": 1e-8, "mean_q": 1e-6}


def block_suite(params: BlockParams = BlockParams(), n: int = 256, t: float = 0.0, prof: Profiles | None = None) -> dict:
    """Identity residuals against their tolerances plus the support overlap count.

    Disjointness of the four supports is recorded, not asserted: at desk scale
    the shifted bumps can overlap.
    """
    prof = make_phi(ProfileSpec()) if prof is None else prof
    raw = verify_block_identities(params, prof, n, t)
    checks = {}
    for name, tol in BLOCK_TOLERANCES.items():
        worst = float(max(raw[name]))
        if name == "mean_q":
            worst /= params.omega  # |int q - 1/omega|, absolute like the other means
        checks[name] = {"residual": worst, "tolerance": tol, "ok": worst <= tol}
    overlap = int(sum(raw["support_overlap_nodes"].values()))
    checks["support_disjoint"] = {"overlap_nodes": overlap, "ok": overlap == 0, "asserted": False}
    passed = all(c["ok"] for c in checks.values() if c.get("asserted", True))
    return {"params": params.to_json(), "n": n, "t": t, "checks": checks, "raw": raw, "passed": passed}
