"""One convex-integration step for the Navier-Stokes-Reynolds system.

States are lazy: ``state.slice(t, n)`` samples (u, pi, R) at time t on an
n x n grid, so a later step can evaluate an earlier one on a finer grid.
Sign convention: d_t u + div(u x u) - Delta u + grad pi + div R = 0.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction

import numpy as np
import numpy.polynomial.polynomial as npoly

from . import exponents as ex
from .blocks import XI, XI_HAT, XI_NORM2, BlockParams, ProfileSpec, TimeProfile, make_blocks, make_phi
from .errors import BadWindow, NotDivergenceFree, ResolutionExhausted, UnderResolved
from .hardy import hp_quasinorm
from .nash import CutoffSpec, Theta, XI_HAT_OUTER, amplitudes_with_rate, rho, smoothstep7, smoothstep7_rate, trace_split
from .spectral import (
    bilinear_antidivergence,
    bilinear_tensor_antidivergence,
    lebesgue_norm,
    leray_project,
    random_band_limited,
    sobolev_sigma1_seminorm,
    sym_antidivergence,
    torus,
)

M_CONST = 8.0 * math.sqrt(10.0)
FD_STEP = 1e-6
# finite-difference step as a fraction of the fastest time scale of a step
FD_REL = 5e-4
TERM_NAMES = ("R_lin1", "R_lin2", "R_lin3", "R_delta", "R_Y", "R_Q", "R_cross", "R_g", "R_time")


@dataclass(frozen=True, eq=False)
class Slice:
    """(u, pi, R) at one time; R is symmetric, not necessarily traceless."""

    t: float
    u: np.ndarray
    pi: np.ndarray
    R: np.ndarray


def fd_derivative(fun, t: float, h: float = FD_STEP) -> np.ndarray:
    """Fourth-order central difference of an array-valued function of time."""
    return (fun(t - 2 * h) - 8.0 * fun(t - h) + 8.0 * fun(t + h) - fun(t + 2 * h)) / (12.0 * h)


class LazyState:
    """Interface of a sampled NSR solution."""

    #: closed time interval outside of which R vanishes identically
    support: tuple[float, float] = (0.0, 1.0)
    #: times where the fields may lose smoothness (used to split quadratures)
    breakpoints: tuple[float, ...] = ()

    def slice(self, t: float, n: int) -> Slice:
        raise NotImplementedError

    def velocity(self, t: float, n: int) -> np.ndarray:
        return self.slice(t, n).u

    def dR(self, t: float, n: int) -> np.ndarray:
        if not (self.support[0] < t < self.support[1]):
            return np.zeros((2, 2, n, n))
        return fd_derivative(lambda s: self.slice(s, n).R, t)


def _sym_grad(tor, w: np.ndarray) -> np.ndarray:
    g = tor.grad(w)
    return g + np.swapaxes(g, 0, 1)


def _outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[:, None] * b[None, :]


# ---------------------------------------------------------------------------
# scenario


def _smoothstep7_second(x):
    x = np.asarray(x, dtype=float)
    inside = (x > 0.0) & (x < 1.0)
    xc = np.clip(x, 0.0, 1.0)
    return np.where(inside, 420.0 * xc**2 * (1.0 - xc) ** 2 * (1.0 - 2.0 * xc), 0.0)


@dataclass(frozen=True)
class ShearFlow:
    """Exact Navier-Stokes solution A e^{-4 pi^2 k^2 t} (sin 2 pi k x2, 0) with zero pressure."""

    k: int = 1
    amplitude: float = 1.0

    def _decay(self, t: float) -> float:
        return math.exp(-4.0 * math.pi**2 * self.k**2 * t)

    def profile(self, n: int) -> np.ndarray:
        _, X2 = torus(n).mesh()
        return np.stack([self.amplitude * np.sin(2 * math.pi * self.k * X2), np.zeros((n, n))])

    def u(self, t: float, n: int) -> np.ndarray:
        return self._decay(t) * self.profile(n)

    def du(self, t: float, n: int) -> np.ndarray:
        return -4.0 * math.pi**2 * self.k**2 * self.u(t, n)


@dataclass(frozen=True)
class ScenarioConfig:
    """u0 = eta1 v1 + f + eta2 v2 with f = chi(t) F(x) supported in t in [1/3, 2/3].

    F = grad^perp psi for a random band-limited psi, scaled to RMS ``amplitude``.
    ``v_modes``/``v_amplitudes`` set optional shear flows v1, v2 (mode 0 = absent).
    """

    seed: int = 7
    kmax: int = 1
    amplitude: float = 0.01
    chi_power: int = 4
    v_modes: tuple[int, int] = (0, 0)
    v_amplitudes: tuple[float, float] = (1.0, 1.0)


class Scenario(LazyState):
    """Starting triple with R = 0 on [0, 1/4] and [3/4, 1]."""

    def __init__(self, cfg: ScenarioConfig = ScenarioConfig()):
        self.cfg = cfg
        m = cfg.chi_power
        base = npoly.polypow([0.0, 1.0, -1.0], m)
        base = base / npoly.polyval(0.5, base)
        self._chi = [base, npoly.polyder(base) * 3.0, npoly.polyder(base, 2) * 9.0]
        self.v = [ShearFlow(k, a) if k else None for k, a in zip(cfg.v_modes, cfg.v_amplitudes)]
        has_v = any(v is not None for v in self.v)
        self.support = (0.25, 0.75) if has_v else (1.0 / 3.0, 2.0 / 3.0)
        self.breakpoints = (0.25, 1.0 / 3.0, 0.5, 2.0 / 3.0, 0.75)
        self._F: dict[int, np.ndarray] = {}

    # time profiles -----------------------------------------------------
    def chi(self, t: float, order: int = 0) -> float:
        s = 3.0 * (t - 1.0 / 3.0)
        if not (0.0 < s < 1.0):
            return 0.0
        return float(npoly.polyval(s, self._chi[order]))

    @staticmethod
    def eta(t: float, which: int, order: int = 0) -> float:
        """eta1 = 1 on [0, 1/4], 0 from 1/3; eta2 = 0 up to 2/3, 1 on [3/4, 1]."""
        x = 12.0 * (t - 0.25) if which == 0 else 12.0 * (t - 2.0 / 3.0)
        sign = -1.0 if which == 0 else 1.0
        if order == 0:
            s = float(smoothstep7(x))
            return 1.0 - s if which == 0 else s
        if order == 1:
            return sign * 12.0 * float(smoothstep7_rate(x))
        return sign * 144.0 * float(_smoothstep7_second(x))

    # spatial profile ---------------------------------------------------
    def F(self, n: int) -> np.ndarray:
        if n not in self._F:
            tor = torus(n)
            if n < 8 * self.cfg.kmax:
                raise UnderResolved("grid too coarse for the forcing profile")
            psi = random_band_limited(n, self.cfg.kmax, self.cfg.seed)
            F = tor.perp_grad(psi)
            F *= self.cfg.amplitude / math.sqrt(float(np.mean(np.sum(F**2, axis=0))))
            self._F[n] = F
        return self._F[n]

    def f(self, t: float, n: int) -> np.ndarray:
        return self.chi(t) * self.F(n)

    def grad_f_hp_sup(self, p: float, n: int) -> float:
        """sup_t ||grad f||_{H^p}: chi peaks at 1 and the quasinorm is homogeneous."""
        return hp_quasinorm(torus(n).grad(self.F(n)), p)

    def velocity(self, t: float, n: int) -> np.ndarray:
        u = self.f(t, n)
        for j, v in enumerate(self.v):
            if v is not None:
                u = u + self.eta(t, j) * v.u(t, n)
        return u

    def _R(self, t: float, n: int, order: int) -> np.ndarray:
        tor = torus(n)
        F = self.F(n)
        c0, c1, c2 = (self.chi(t, k) for k in range(3))
        FF = _outer(F, F)
        symF = _sym_grad(tor, F)
        if order == 0:
            R = -c0 * c0 * FF + c0 * symF
            src = c1 * F
        else:
            R = -2.0 * c0 * c1 * FF + c1 * symF
            src = c2 * F
        for j, v in enumerate(self.v):
            if v is None:
                continue
            e0, e1, e2 = (self.eta(t, j, k) for k in range(3))
            vu, vd = v.u(t, n), v.du(t, n)
            vv = _outer(vu, vu)
            if order == 0:
                src = src + e1 * vu
                R = R - (e0 * e0 - e0) * vv
            else:
                src = src + e2 * vu + e1 * vd
                R = R - (2.0 * e0 * e1 - e1) * vv - (e0 * e0 - e0) * (_outer(vd, vu) + _outer(vu, vd))
        if np.any(src):
            R = R - sym_antidivergence(src)
        return R

    def slice(self, t: float, n: int) -> Slice:
        pi = np.zeros((n, n))  # shear flows carry no pressure
        return Slice(t, self.velocity(t, n), pi, self._R(t, n, 0))

    def dR(self, t: float, n: int) -> np.ndarray:
        return self._R(t, n, 1)

    def velocity_rate(self, t: float, n: int) -> np.ndarray:
        du = self.chi(t, 1) * self.F(n)
        for j, v in enumerate(self.v):
            if v is not None:
                du = du + self.eta(t, j, 1) * v.u(t, n) + self.eta(t, j) * v.du(t, n)
        return du


def initial_scenario(cfg: ScenarioConfig = ScenarioConfig(), n: int = 64, check: bool = True) -> Scenario:
    """Build the starting state; with ``check`` the forcing is verified divergence- and mean-free."""
    sc = Scenario(cfg)
    if check:
        F = sc.F(n)
        tor = torus(n)
        scale = float(np.max(np.abs(F)))
        if float(np.max(np.abs(tor.div(F)))) > 1e-10 * scale * n or float(np.max(np.abs(F.mean(axis=(-2, -1))))) > 1e-12 * scale:
            raise NotDivergenceFree("forcing profile is not solenoidal and mean-free")
    return sc


# ---------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class StepParams:
    """Desk-mode parameters of one step; ``from_exponents`` gives the lambda-power mode."""

    lam: int = 4
    mu1: float = 2.0
    mu2: float = 4.0
    kappa: float = 4.0
    omega: float = 64.0
    nu: int = 2
    t0: float = 0.25
    tau: float = 1.0 / 16.0
    p: float = 0.8
    sigma: float = 0.5
    s: float = 1.5
    delta: float = 1.0
    eps: float | None = None
    mode: str = "desk"

    def __post_init__(self) -> None:
        if not (0 < self.p < 1 and 0 < self.sigma < 1):
            raise ValueError("p and sigma must lie in (0, 1)")
        if self.s <= 1:
            raise ValueError("s must exceed 1")
        if self.delta <= 0 or self.tau <= 0:
            raise ValueError("delta and tau must be positive")
        CutoffSpec(self.t0, self.tau)
        self.block_params()

    @property
    def N(self) -> int:
        return int(math.floor(2.0 * (1.0 / self.p - 1.0) + 1e-12))

    def block_params(self) -> BlockParams:
        return BlockParams(self.lam, self.mu1, self.mu2, self.omega, self.kappa, self.nu)

    def cutoff(self) -> CutoffSpec:
        return CutoffSpec(self.t0, self.tau)

    def check_resolution(self, n: int) -> None:
        self.block_params().check_resolution(n)

    @property
    def fd_step(self) -> float:
        """Time step for finite differences: the traveling phase moves at
        rate lam omega mu1 and the g bumps switch at rate nu kappa."""
        return FD_REL / max(self.lam * self.omega * self.mu1, self.nu * self.kappa, 1.0)

    def scaled(self, r: int) -> "StepParams":
        """Desk exponents: lam r, kappa r^4, omega r^3, nu r; mu1, mu2 fixed by resolution."""
        if r < 1 or int(r) != r:
            raise ValueError("scale factor must be a positive integer")
        return replace(self, lam=self.lam * r, kappa=self.kappa * r**4, omega=self.omega * r**3, nu=self.nu * r)

    @staticmethod
    def desk(lam: int = 4, **kw) -> "StepParams":
        """Desk defaults scaled from lam = 4."""
        if lam % 4:
            raise ValueError("desk lambda must be a multiple of 4")
        return StepParams(**kw).scaled(lam // 4)

    @staticmethod
    def from_exponents(lam: int, alpha, beta=4, a=5, b=11, gamma=1, check: bool = True, **kw) -> "StepParams":
        """mu1 = lam^alpha, mu2 = lam^(alpha+a), kappa = lam^(2 beta), omega = lam^(alpha+b), nu = lam^gamma."""
        p = kw.get("p", 0.8)
        sigma = kw.get("sigma", 0.5)
        if check:
            q = lambda x: x if isinstance(x, (str, Fraction)) else Fraction(x).limit_denominator(1000)
            feas = ex.feasibility(ex.Q(q(p)), ex.Q(q(sigma)), beta, a, b, gamma)
            if ex.Q(alpha) <= feas.alpha_min:
                raise ValueError(f"alpha = {alpha} violates the exponent inequalities (needs > {feas.alpha_min})")
        al = float(ex.Q(alpha))
        return StepParams(
            lam=lam,
            mu1=lam**al,
            mu2=lam ** (al + float(a)),
            kappa=lam ** (2.0 * float(beta)),
            omega=lam ** (al + float(b)),
            nu=int(lam ** float(gamma)),
            mode="exponents",
            **kw,
        )

    def to_json(self) -> dict:
        d = asdict(self)
        d["N"] = self.N
        return d

    def theory_bounds(self) -> dict[str, float]:
        """Every error bound of the construction with unit constants, at these parameters."""
        q = lambda x: Fraction(x).limit_denominator(1000)
        sb = ex.symbolic_bounds(q(self.p), q(self.sigma), q(self.s))
        args = (self.lam, self.mu1, self.mu2, self.kappa, self.omega, self.nu, self.p)
        return {k: float(sum(m.evaluate(*args) for m in v)) for k, v in sb.items()}


# ---------------------------------------------------------------------------
# one time slice of the step


_PROFILES: dict[int, object] = {}


def _profiles(N: int):
    if N not in _PROFILES:
        _PROFILES[N] = make_phi(ProfileSpec(N=N))
    return _PROFILES[N]


_TIME = TimeProfile()


class StepState(LazyState):
    """(u1, pi1, R1) produced from ``prev`` by one step; every field is evaluated on demand."""

    def __init__(self, prev: LazyState, params: StepParams, eps: float, cache: int = 2):
        self.prev = prev
        self.params = params
        self.eps = eps
        self.theta = Theta(params.cutoff())
        self.prof = _profiles(params.N)
        self.time = _TIME
        lo, hi = params.t0 - params.tau, 1.0 - params.t0 + params.tau
        if prev.support[0] < params.t0 or prev.support[1] > 1.0 - params.t0:
            raise BadWindow(
                f"previous error lives on {prev.support}, outside the plateau [{params.t0}, {1 - params.t0}]"
            )
        bumps = self.time.bump_breakpoints(params.kappa, params.nu)
        active = [prev.support]
        for a, b in zip(bumps[::2], bumps[1::2]):
            if b > lo and a < hi:
                active.append((max(a, lo), min(b, hi)))
        self.support = (min(x[0] for x in active), max(x[1] for x in active))
        pts = set(prev.breakpoints) | set(self.theta.breakpoints()) | set(bumps)
        self.breakpoints = tuple(sorted(p for p in pts if 0.0 <= p <= 1.0))
        self._cache: OrderedDict = OrderedDict()
        self._cache_size = cache

    # scalar time factors ----------------------------------------------
    def _time_factors(self, t: float) -> dict:
        P = self.params
        return {
            "theta": float(self.theta(t)),
            "dtheta": float(self.theta.rate(t)),
            "g": float(self.time.g_kappa(P.kappa, P.nu, t)),
            "dg": float(self.time.dg_kappa(P.kappa, P.nu, t)),
            "h": float(self.time.h_kappa(P.kappa, P.nu, t)),
        }

    def _inactive(self, t: float) -> bool:
        return not (self.support[0] < t < self.support[1])

    def components(self, t: float, n: int, pressure: bool = True, terms: bool = True) -> dict:
        """Every intermediate field of the step at time t (see module docs for names)."""
        key = (float(t), n, pressure, terms)
        if key in self._cache:
            self._cache.move_to_end(key)
            return self._cache[key]
        out = self._components(t, n, pressure, terms)
        self._cache[key] = out
        if len(self._cache) > self._cache_size:
            self._cache.popitem(last=False)
        return out

    def _components(self, t: float, n: int, pressure: bool, terms: bool) -> dict:
        P = self.params
        tor = torus(n)
        prev = self.prev.slice(t, n)
        R0r, half = trace_split(prev.R)
        pi_t0 = prev.pi + half
        tf = self._time_factors(t)
        zero_v = np.zeros((2, n, n))
        out = {"t": t, "u0": prev.u, "R0_ring": R0r, "pi_tilde0": pi_t0, **tf}
        if self._inactive(t) or (tf["theta"] == 0.0 and not np.any(R0r)):
            out.update(w=zero_v, wp=zero_v, wt=zero_v, wg=zero_v, up=zero_v, ut=zero_v, ug=zero_v, u=prev.u)
            if terms:
                out["terms"] = {k: np.zeros((2, 2, n, n)) for k in TERM_NAMES}
                out["R"] = np.zeros((2, 2, n, n))
                out["T_mean_defect"] = 0.0
            if pressure:
                out["pi"] = pi_t0
            return out

        P.check_resolution(n)
        g, dg, h = tf["g"], tf["dg"], tf["h"]
        need_rate = terms or pressure
        dR0r = trace_split(self.prev.dR(t, n))[0] if need_rate else None
        if need_rate:
            a, da = amplitudes_with_rate(R0r, dR0r, self.eps, tf["theta"], tf["dtheta"])
        else:
            a, _ = amplitudes_with_rate(R0r, np.zeros_like(R0r), self.eps, tf["theta"], 0.0)
            da = None
        bb = make_blocks(P.block_params(), self.prof, t, n, check=False)

        sym_A = bb.A + np.swapaxes(bb.A, 1, 2)  # (4, 2, 2, n, n)
        S = np.einsum("kxy,kijxy->ijxy", a, sym_A)
        up = g * np.einsum("kxy,kixy->ixy", a, bb.W)
        Yc = bb.Y - (XI / P.omega)[:, :, None, None]
        a2 = a * a
        ut = -g * g * np.einsum("kxy,kixy->ixy", a2, Yc)
        ug = -(h / P.nu) * tor.div(R0r)

        # w^p = g curl-perp curl Delta^N div S, with curl-perp curl = Delta - grad div
        wp = g * _perp_curl_lapN_div(tor, S, P.N)
        wt = leray_project(ut) - ut.mean(axis=(-2, -1), keepdims=True)
        wg = leray_project(ug)
        w = wp + wt + wg
        u1 = prev.u + w
        out.update(a=a, blocks=bb, S=S, up=up, ut=ut, ug=ug, wp=wp, wt=wt, wg=wg, w=w, u=u1)

        if terms or pressure:
            dS = np.einsum("kxy,kijxy->ijxy", da, sym_A) + np.einsum(
                "kxy,kijxy->ijxy", a, bb.dtA + np.swapaxes(bb.dtA, 1, 2)
            )
            dgS = dg * S + g * dS  # d_t (g sum_k a_k (A_k + A_k^T))
            dga2 = 2.0 * g * dg * a2 + 2.0 * g * g * a * da  # d_t (g^2 a_k^2)
        if terms:
            d = w - up
            T = {}
            T["R_lin1"] = _outer(prev.u, w) + _outer(w, prev.u)
            T["R_lin2"] = _outer(up, d) + _outer(d, up)
            T["R_lin3"] = _outer(d, d)
            T["R_delta"] = _sym_grad(tor, w)
            aW = a[:, None] * bb.W
            tot = aW.sum(axis=0)
            diag = np.einsum("kixy,kjxy->ijxy", aW, aW)
            T["R_cross"] = g * g * (_outer(tot, tot) - diag)
            grad_a2 = tor.grad(a2)  # (4, 2, n, n)
            WW = np.einsum("kixy,kjxy->kijxy", bb.W, bb.W) - np.einsum("kij,xy->kijxy", XI_HAT_OUTER, np.ones((n, n)))
            RQ = np.zeros((2, 2, n, n))
            RY = np.zeros((2, 2, n, n))
            for k in range(4):
                if g != 0.0:
                    RQ += bilinear_tensor_antidivergence(grad_a2[k], WW[k], tol=np.inf)
                if np.any(dga2[k]):
                    RY -= bilinear_antidivergence(dga2[k], Yc[k], tol=np.inf)
            T["R_Q"] = g * g * RQ
            T["R_Y"] = RY
            T["R_g"] = -(h / P.nu) * dR0r
            T["R_time"] = tor.laplacian(dgS, P.N + 1) if np.any(dgS) else np.zeros((2, 2, n, n))
            out["terms"] = T
            out["R"] = -(
                T["R_lin1"] + T["R_lin2"] + T["R_lin3"] - T["R_delta"] + T["R_Q"] + T["R_cross"] + T["R_Y"] + T["R_g"] + T["R_time"]
            )
            # mean bookkeeping: mean(T) - d_t mean(u^t) must vanish
            Tvec = -np.einsum("kxy,kixy->ixy", dga2, Yc) + g * g * np.einsum("kijxy,kjxy->ixy", WW, grad_a2)
            dut = -np.einsum("kxy,kixy->ixy", dga2, Yc) - g * g * np.einsum("kxy,kixy->ixy", a2, bb.dtY)
            out["T_mean_defect"] = float(np.max(np.abs((Tvec - dut).mean(axis=(-2, -1)))))
            out["T_mean_scale"] = float(np.max(np.abs(dut)))
        if pressure:
            r = rho(R0r, self.eps)
            dut = -np.einsum("kxy,kixy->ixy", dga2, Yc) - g * g * np.einsum("kxy,kixy->ixy", a2, bb.dtY)
            dug = -(g * g - 1.0) * tor.div(R0r) - (h / P.nu) * tor.div(dR0r)
            pi2 = g * g * tf["theta"] ** 2 * r
            pi3 = -_div_lapN_div(tor, dgS, P.N)
            Qp = pi2 + pi3 - _inv_lap_div(tor, dut) - _inv_lap_div(tor, dug)
            out["pi"] = pi_t0 - Qp
        return out

    # LazyState interface ------------------------------------------------
    def slice(self, t: float, n: int) -> Slice:
        c = self.components(t, n, pressure=True, terms=True)
        return Slice(t, c["u"], c["pi"], c["R"])

    def velocity(self, t: float, n: int) -> np.ndarray:
        return self.components(t, n, pressure=False, terms=False)["u"]

    def dR(self, t: float, n: int) -> np.ndarray:
        if self._inactive(t):
            return np.zeros((2, 2, n, n))
        return fd_derivative(lambda s: self.components(s, n, pressure=False, terms=True)["R"], t, self.params.fd_step)


def _perp_curl_lapN_div(tor, S: np.ndarray, N: int) -> np.ndarray:
    Sh = tor.fft(S)
    v0 = Sh[0, 0] * tor.d1 + Sh[0, 1] * tor.d2
    v1 = Sh[1, 0] * tor.d1 + Sh[1, 1] * tor.d2
    dv = tor.d1 * v0 + tor.d2 * v1
    lapN = tor.lap**N
    return tor.ifft(np.stack([(tor.lap * v0 - tor.d1 * dv) * lapN, (tor.lap * v1 - tor.d2 * dv) * lapN]))


def _div_lapN_div(tor, S: np.ndarray, N: int) -> np.ndarray:
    Sh = tor.fft(S)
    dd = tor.d1 * (Sh[0, 0] * tor.d1 + Sh[0, 1] * tor.d2) + tor.d2 * (Sh[1, 0] * tor.d1 + Sh[1, 1] * tor.d2)
    return tor.ifft(dd * tor.lap**N)


def _inv_lap_div(tor, v: np.ndarray) -> np.ndarray:
    vh = tor.fft(v)
    return tor.ifft((vh[0] * tor.d1 + vh[1] * tor.d2) * tor.inv_lap)


# ---------------------------------------------------------------------------
# stage functions


def perturbations(state: StepState, t: float, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    c = state.components(t, n, pressure=False, terms=False)
    return c["wp"], c["wt"], c["wg"]


def corrector_split(state: StepState, t: float, n: int) -> dict:
    """(u^p, u^c, u^t, u^cc, u^g, u^ccc) at time t, with relative split residuals."""
    c = state.components(t, n, pressure=False, terms=False)
    tor = torus(n)
    P = state.params
    N = P.N
    zero = np.zeros((2, n, n))
    if "blocks" not in c:
        parts = dict(up=zero, uc=zero, ut=zero, ucc=zero, ug=zero, uccc=zero)
        parts["residuals"] = {"p": 0.0, "t": 0.0, "g": 0.0}
        return parts
    bb, a, g = c["blocks"], c["a"], c["g"]
    uc = np.zeros((2, n, n))
    for k in range(4):
        xi = XI[k]
        F2h = tor.fft(bb.F2[k])
        f2 = tor.ifft(F2h * (-xi[1] * tor.d1 + xi[0] * tor.d2)) / XI_NORM2[k]
        af1 = a[k] * bb.f1[k]
        comm = tor.laplacian(af1 * f2, N + 1) - af1 * tor.laplacian(f2, N + 1)
        uc += comm[None] * xi[:, None, None]
        Ak = bb.A[k]
        divA = tor.div(Ak)
        uc -= tor.grad(tor.laplacian(tor.div(a[k] * divA), N))
        Aga = np.einsum("ijxy,jxy->ixy", Ak, tor.grad(a[k]))
        divaAT = tor.div(a[k] * np.swapaxes(Ak, 0, 1))
        v = Aga + divaAT
        uc += tor.perp_grad(tor.laplacian(tor.curl(v), N))
    uc *= g
    ut, ug = c["ut"], c["ug"]
    ucc = -tor.grad(_inv_lap_div(tor, ut)) - ut.mean(axis=(-2, -1), keepdims=True)
    uccc = -tor.grad(_inv_lap_div(tor, ug))

    def rel(x, y):
        sy = float(np.sqrt(np.mean(y**2)))
        return float(np.sqrt(np.mean(x**2))) / sy if sy > 0 else float(np.sqrt(np.mean(x**2)))

    res = {
        "p": rel(c["wp"] - c["up"] - uc, c["wp"]),
        "t": rel(c["wt"] - ut - ucc, c["wt"]),
        "g": rel(c["wg"] - ug - uccc, c["wg"]),
    }
    return dict(up=c["up"], uc=uc, ut=ut, ucc=ucc, ug=ug, uccc=uccc, residuals=res)


def new_error(state: StepState, t: float, n: int) -> tuple[np.ndarray, np.ndarray, dict]:
    """(R1, pi1, per-term tensors) at time t."""
    c = state.components(t, n)
    return c["R"], c["pi"], c["terms"]


def cross_check(state: StepState, t: float, n: int, h: float | None = None) -> dict:
    """||P(d_t u1 + div(u1 x u1) - Delta u1 + div R1)|| relative to ||div R1||."""
    h = state.params.fd_step if h is None else h
    tor = torus(n)
    c = state.components(t, n)
    u, R = c["u"], c["R"]
    du = fd_derivative(lambda s: state.velocity(s, n), t, h)
    flux = _outer(u, u) + R
    res = du + tor.div(flux) - tor.laplacian(u)
    pres = leray_project(res)
    divR = tor.div(R)
    num = lebesgue_norm(pres, 2.0)
    den = lebesgue_norm(divR, 2.0)
    return {"t": t, "residual": num, "div_R": den, "relative": num / den if den > 0 else num}


# ---------------------------------------------------------------------------
# time quadrature


def gauss_nodes(breakpoints, lo: float, hi: float, per_piece: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [lo, hi] split at the breakpoints."""
    x, wq = np.polynomial.legendre.leggauss(per_piece)
    cuts = sorted({lo, hi} | {b for b in breakpoints if lo < b < hi})
    ts, ws = [], []
    for a, b in zip(cuts[:-1], cuts[1:]):
        ts.append(0.5 * (b - a) * x + 0.5 * (a + b))
        ws.append(0.5 * (b - a) * wq)
    return np.concatenate(ts), np.concatenate(ws)


def ring_l1(state: LazyState, n: int, per_piece: int = 8) -> float:
    """||traceless part of R||_{L^1_{t,x}}."""
    lo, hi = state.support
    ts, ws = gauss_nodes(state.breakpoints, lo, hi, per_piece)
    return float(sum(w * lebesgue_norm(trace_split(state.slice(t, n).R)[0], 1.0) for t, w in zip(ts, ws)))


# ---------------------------------------------------------------------------
# report and driver


@dataclass
class StepReport:
    params: dict
    n: int
    eps: float
    R0_ring_l1: float
    R1_l1: float
    R1_ring_l1: float
    u_diff_l2: float
    l2_bound: float
    grad_hp_sup: float
    w_sigma1_sup: float
    terms_l1: dict
    theory: dict
    cross_check: list
    cross_check_max: float
    split_residuals: dict
    mean_defect_max: float  # relative to sup |d_t u^t|
    support_flags: dict
    delta: float
    quad_nodes: int
    report_version: int = 1
    extras: dict = field(default_factory=dict)

    @property
    def l2_ok(self) -> bool:
        return self.u_diff_l2 <= self.l2_bound

    def to_json(self) -> dict:
        d = asdict(self)
        d["l2_ok"] = self.l2_ok
        return d


@dataclass(frozen=True)
class StepConfig:
    n: int = 256
    per_piece: int = 8
    hp_every: int = 4
    check_times: tuple[float, ...] = (0.52, 0.56, 0.6, 0.64)
    support_times: tuple[float, ...] = (0.05, 0.125, 0.15, 0.9, 0.95)


def step(prev: LazyState, params: StepParams, cfg: StepConfig = StepConfig(), R0_ring_l1: float | None = None) -> tuple[StepState, StepReport]:
    n = cfg.n
    params.check_resolution(n)
    if R0_ring_l1 is None:
        R0_ring_l1 = ring_l1(prev, n, cfg.per_piece)
    eps = params.eps if params.eps is not None else min(R0_ring_l1, params.tau)
    if eps <= 0:
        eps = params.tau
    st = StepState(prev, params, eps)
    lo, hi = st.support
    ts, ws = gauss_nodes(st.breakpoints, lo, hi, cfg.per_piece)

    R1 = Rr = l2sq = 0.0
    terms = {k: 0.0 for k in TERM_NAMES}
    hp_sup = sig_sup = 0.0
    mean_def = 0.0
    tor = torus(n)
    for i, (t, w8) in enumerate(zip(ts, ws)):
        c = st.components(float(t), n, pressure=False, terms=True)
        R1 += w8 * lebesgue_norm(c["R"], 1.0)
        Rr += w8 * lebesgue_norm(trace_split(c["R"])[0], 1.0)
        l2sq += w8 * lebesgue_norm(c["w"], 2.0) ** 2
        for k in TERM_NAMES:
            terms[k] += w8 * lebesgue_norm(c["terms"][k], 1.0)
        if c.get("T_mean_scale", 0.0) > 0:
            mean_def = max(mean_def, c["T_mean_defect"] / c["T_mean_scale"])
        if np.any(c["w"]):
            sig_sup = max(sig_sup, sobolev_sigma1_seminorm(c["w"], params.sigma))
            if i % cfg.hp_every == 0:
                hp_sup = max(hp_sup, hp_quasinorm(tor.grad(c["w"]), params.p))

    checks = [cross_check(st, t, n) for t in cfg.check_times if lo < t < hi]
    split = {"p": 0.0, "t": 0.0, "g": 0.0}
    for t in cfg.check_times:
        if lo < t < hi:
            r = corrector_split(st, t, n)["residuals"]
            split = {k: max(split[k], r[k]) for k in split}
    flags = {}
    for t in cfg.support_times:
        c = st.components(t, n, pressure=False, terms=True)
        flags[f"{t:g}"] = {"w_zero": not np.any(c["w"]), "R_zero": not np.any(c["R"])}
    rep = StepReport(
        params=params.to_json(),
        n=n,
        eps=eps,
        R0_ring_l1=R0_ring_l1,
        R1_l1=R1,
        R1_ring_l1=Rr,
        u_diff_l2=math.sqrt(l2sq),
        l2_bound=M_CONST * math.sqrt(R0_ring_l1) + params.delta,
        grad_hp_sup=hp_sup,
        w_sigma1_sup=sig_sup,
        terms_l1=terms,
        theory=params.theory_bounds(),
        cross_check=checks,
        cross_check_max=max((c["relative"] for c in checks), default=0.0),
        split_residuals=split,
        mean_defect_max=mean_def,
        support_flags=flags,
        delta=params.delta,
        quad_nodes=len(ts),
    )
    return st, rep


@dataclass(frozen=True)
class Schedules:
    """tau_n = 2^{-n-4}, delta_n = C 2^{-n}, t0_{n+1} = t0_n - tau_n, lambda and grid doubling per step.

    ``C=None`` uses min(1, sup_t ||grad f||_{H^p}) / (10 M).
    """

    C: float | None = None
    n0: int = 256
    n_max: int = 512

    def tau(self, j: int) -> float:
        return 2.0 ** (-j - 4)

    def t0(self, j: int) -> float:
        return 0.25 - sum(self.tau(i) for i in range(j))

    def delta(self, j: int, C: float) -> float:
        return C * 2.0 ** (-j)


def iterate(
    scenario: LazyState,
    n_steps: int,
    schedules: Schedules = Schedules(),
    base: StepParams = StepParams(),
    cfg: StepConfig = StepConfig(),
) -> tuple[list[LazyState], list[StepReport]]:
    """Apply ``n_steps`` steps; returns the states (including the start) and step reports."""
    if n_steps > 3:
        raise ValueError("at most 3 desk steps")
    states: list[LazyState] = [scenario]
    reports: list[StepReport] = []
    ring = ring_l1(scenario, schedules.n0, cfg.per_piece)
    if schedules.C is not None:
        C = schedules.C
    elif isinstance(scenario, Scenario):
        C = min(1.0, scenario.grad_f_hp_sup(base.p, schedules.n0)) / (10.0 * M_CONST)
    else:
        raise ValueError("schedule constant C is required for a general starting state")
    for j in range(n_steps):
        n = schedules.n0 * 2**j
        lam = base.lam * 2**j
        if n > schedules.n_max or 8 * lam * base.mu2 > n:
            raise ResolutionExhausted(f"step {j + 1} needs lambda mu2 = {lam * base.mu2:g} on n = {n}")
        params = replace(
            base.scaled(lam // base.lam), t0=schedules.t0(j), tau=schedules.tau(j), delta=schedules.delta(j + 1, C)
        )
        st, rep = step(states[-1], params, StepConfig(**{**asdict(cfg), "n": n}), R0_ring_l1=ring)
        states.append(st)
        reports.append(rep)
        ring = rep.R1_ring_l1
    return states, reports


def frozen_window_defect(states: list[LazyState], n: int, times=(0.0, 0.0625, 0.125)) -> float:
    """max over t <= 1/8 of the spectral difference of u between consecutive iterates."""
    tor = torus(n)
    worst = 0.0
    for t in times:
        ref = tor.fft(states[0].velocity(t, n))
        for s in states[1:]:
            worst = max(worst, float(np.max(np.abs(tor.fft(s.velocity(t, n)) - ref))))
    return worst


def nonvanishing(state: LazyState, scenario: Scenario, p: float, n: int, times=(0.45, 0.5, 0.55)) -> dict:
    """sup_t ||grad u||_{H^p} against sup_t ||grad f||_{H^p} (attained at t = 1/2)."""
    tor = torus(n)
    u_sup = max(hp_quasinorm(tor.grad(state.velocity(t, n)), p) for t in times)
    f_sup = hp_quasinorm(tor.grad(scenario.f(0.5, n)), p)
    return {"u_sup": u_sup, "f_sup": f_sup, "ratio": u_sup / f_sup, "ok": bool(u_sup >= 0.9 * f_sup)}
