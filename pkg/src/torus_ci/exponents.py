"""Exact rational bookkeeping of the lambda-exponents of every error bound.

Each bound is first written as a sum of monomials in the construction
parameters (lambda, mu1, mu2, kappa^{1/2}, omega, nu).  Substituting
mu1 = lambda^alpha, mu2 = lambda^(alpha+a), kappa^{1/2} = lambda^beta,
omega = lambda^(alpha+b), nu = lambda^gamma turns every monomial into a
single power of lambda.  All arithmetic uses ``fractions.Fraction``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import BadExponent

SYMBOLS = ("lam", "mu1", "mu2", "kap", "om", "nu")  # kap stands for kappa^{1/2}

TERMS = (
    "grad_hp",
    "w_sigma1",
    "R_lin1",
    "R_lin2",
    "R_lin3",
    "R_delta",
    "R_Y",
    "R_Q",
    "R_g",
    "R_time",
    "l2_tail",
)

LABELS = {
    "grad_hp": "grad(u1-u0) in H^p",
    "w_sigma1": "u1-u0 in W^{sigma,1}",
    "R_lin1": "R^{lin,1}",
    "R_lin2": "R^{lin,2}",
    "R_lin3": "R^{lin,3}",
    "R_delta": "R^Delta",
    "R_Y": "R^Y",
    "R_Q": "R^Q",
    "R_g": "R^g",
    "R_time": "R^time",
    "l2_tail": "u1-u0 L^2 tail",
}

DEFAULTS = {"beta": Fraction(4), "a": Fraction(5), "b": Fraction(11), "gamma": Fraction(1)}


def Q(x) -> Fraction:
    """Parse an exact rational from int, Fraction or a string like '7/2' or '0.25'."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise BadExponent("booleans are not exponents")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    raise BadExponent(f"exponents must be exact rationals, got {type(x).__name__}")


def fmt(q: Fraction) -> str:
    return str(q)


@dataclass(frozen=True)
class Monomial:
    """Product of parameter powers; ``log`` marks a |log(lambda mu1)|^{1/p} factor."""

    powers: tuple[tuple[str, Fraction], ...]
    log: bool = False

    @staticmethod
    def of(log: bool = False, **powers) -> "Monomial":
        for k in powers:
            if k not in SYMBOLS:
                raise KeyError(k)
        items = tuple(sorted((k, Q(v)) for k, v in powers.items() if Q(v) != 0))
        return Monomial(items, log)

    def __mul__(self, other: "Monomial") -> "Monomial":
        d: dict[str, Fraction] = dict(self.powers)
        for k, v in other.powers:
            d[k] = d.get(k, Fraction(0)) + v
        return Monomial.of(self.log or other.log, **d)

    def __pow__(self, e) -> "Monomial":
        e = Q(e)
        return Monomial.of(self.log, **{k: v * e for k, v in self.powers})

    def lam_exponent(self, alpha: Fraction, beta: Fraction, a: Fraction, b: Fraction, gamma: Fraction) -> Fraction:
        weight = {"lam": Fraction(1), "mu1": alpha, "mu2": alpha + a, "kap": beta, "om": alpha + b, "nu": gamma}
        return sum((weight[k] * v for k, v in self.powers), Fraction(0))

    def evaluate(self, lam: float, mu1: float, mu2: float, kappa: float, omega: float, nu: float, p: float = 1.0) -> float:
        """Numerical value at concrete parameters (kap stands for kappa^{1/2})."""
        vals = {"lam": lam, "mu1": mu1, "mu2": mu2, "kap": math.sqrt(kappa), "om": omega, "nu": nu}
        out = 1.0
        for k, v in self.powers:
            out *= vals[k] ** float(v)
        if self.log:
            out *= abs(math.log(lam * mu1)) ** (1.0 / p)
        return out


M = Monomial.of


def symbolic_bounds(p, sigma, s) -> dict[str, list[Monomial]]:
    """Bounds of every error term before substitution, as sums of monomials."""
    p, sigma, s = Q(p), Q(sigma), Q(s)
    u = 1 - 1 / s
    c = (1 - sigma) / (3 + sigma)
    h = Fraction(1, 2)
    return {
        "R_lin1": [
            M(kap=-1, mu1=1, mu2=-1),
            M(mu1=h, mu2=h, om=-1),
            M(om=-1),
            M(nu=-1),
            M(kap=-1, mu1=-h, mu2=-h),
        ],
        "R_lin2": [M(mu1=1, mu2=-1), M(kap=1, mu1=h, mu2=h, om=-1), M(kap=1, om=-1), M(nu=-1)],
        "R_lin3": [M(mu1=2, mu2=-2), M(kap=2, mu1=1, mu2=1, om=-2), M(kap=2, om=-2), M(nu=-2)],
        "R_delta": [
            M(kap=-1, lam=1, mu1=-h, mu2=h),
            M(lam=1, mu1=u, mu2=1 + u, om=-1),
            M(om=-1),
            M(nu=-1),
        ],
        "R_Y": [M(nu=1, kap=2, om=-1, lam=-1)],
        "R_Q": [M(lam=-1)],
        "R_g": [M(nu=-1)],
        "R_time": [M(nu=1, kap=1, lam=-1, mu1=-h, mu2=-3 * h), M(om=1, mu1=h, kap=-1, mu2=-3 * h)],
        "grad_hp": [
            M(kap=1, lam=1, mu1=h - 2 / p, mu2=3 * h),
            M(kap=2, om=-1, mu1=h, mu2=h),
            M(kap=2, lam=1, mu1=1 - 2 / p, mu2=2, om=-1),
            M(log=True, kap=2, om=-1, lam=2 / p),
            M(nu=-1),
        ],
        "w_sigma1": [
            M(kap=1, lam=sigma, mu1=-h, mu2=sigma - h),
            M(kap=2, om=-1),
            M(kap=2, lam=sigma, mu1=c, mu2=c + sigma, om=-1),
            M(nu=-1),
        ],
        "l2_tail": [M(lam=-h), M(mu1=1, mu2=-1), M(kap=1, mu1=h, mu2=h, om=-1), M(om=-1), M(nu=-1)],
    }


def w_sigma1_unsimplified(sigma) -> list[Monomial]:
    """W^{sigma,1} bound before dropping terms that are small when mu2 >> mu1.

    Built from the Lebesgue and gradient bounds of the three perturbation
    pieces: (X_p + X_c)^{1-sigma} G^sigma for the principal part, the four
    cross products of the temporal corrector in L^q with 1 - 1/q = c, and
    the time-intermittency corrector.
    """
    sigma = Q(sigma)
    c = (1 - sigma) / (3 + sigma)
    h = Fraction(1, 2)
    one_m = 1 - sigma
    x_p = M(kap=1, mu1=-h, mu2=-h)
    x_c = M(kap=1, mu1=h, mu2=-3 * h)
    g_p = M(kap=1, lam=1, mu1=-h, mu2=h)
    t_1 = M(kap=2, mu1=c, mu2=c, om=-1)
    t_2 = M(kap=2, om=-1)
    dt_1 = M(kap=2, lam=1, mu1=c, mu2=1 + c, om=-1)
    dt_2 = M(kap=2, om=-1)
    g = M(nu=-1)
    return [
        x_p**one_m * g_p**sigma,
        x_c**one_m * g_p**sigma,
        t_1**one_m * dt_1**sigma,
        t_2**one_m * dt_2**sigma,
        t_1**one_m * dt_2**sigma,
        t_2**one_m * dt_1**sigma,
        g**one_m * g**sigma,
    ]


@dataclass(frozen=True)
class Summand:
    exponent: Fraction
    log: bool = False


@dataclass(frozen=True)
class ExponentLedger:
    params: dict
    terms: dict = field(default_factory=dict)  # name -> tuple[Summand, ...]
    w_sigma1_pre: tuple = ()

    def exponents(self, name: str) -> list[Fraction]:
        return [t.exponent for t in self.terms[name]]

    def to_json(self) -> dict:
        return {
            "params": {k: fmt(v) for k, v in self.params.items()},
            "terms": {
                name: [{"exponent": fmt(sm.exponent), "log": sm.log} for sm in self.terms[name]] for name in TERMS
            },
            "w_sigma1_unsimplified": [{"exponent": fmt(sm.exponent), "log": sm.log} for sm in self.w_sigma1_pre],
        }

    def table(self) -> str:
        lines = [f"{'term':<26} exponents of lambda"]
        for name in TERMS:
            parts = []
            for sm in self.terms[name]:
                parts.append(("log*" if sm.log else "") + fmt(sm.exponent))
            lines.append(f"{LABELS[name]:<26} " + ", ".join(parts))
        return "\n".join(lines)


def _check_unit(name: str, x: Fraction) -> None:
    if not (0 < x < 1):
        raise BadExponent(f"{name} must lie in (0, 1), got {x}")


def ledger(p, sigma, alpha, beta=None, a=None, b=None, gamma=None, s=None) -> ExponentLedger:
    """Substitute the power-law parameter choices into every bound."""
    p, sigma, alpha = Q(p), Q(sigma), Q(alpha)
    beta = DEFAULTS["beta"] if beta is None else Q(beta)
    a = DEFAULTS["a"] if a is None else Q(a)
    b = DEFAULTS["b"] if b is None else Q(b)
    gamma = DEFAULTS["gamma"] if gamma is None else Q(gamma)
    _check_unit("p", p)
    _check_unit("sigma", sigma)
    if s is None:
        raise BadExponent("s is required")
    s = Q(s)
    if not s > 1:
        raise BadExponent(f"s must exceed 1, got {s}")
    bounds = symbolic_bounds(p, sigma, s)
    sub = dict(alpha=alpha, beta=beta, a=a, b=b, gamma=gamma)
    terms = {
        name: tuple(Summand(m.lam_exponent(**sub), m.log) for m in bounds[name]) for name in TERMS
    }
    pre = tuple(Summand(m.lam_exponent(**sub), m.log) for m in w_sigma1_unsimplified(sigma))
    params = dict(p=p, sigma=sigma, alpha=alpha, beta=beta, a=a, b=b, gamma=gamma, s=s)
    return ExponentLedger(params=params, terms=terms, w_sigma1_pre=pre)


def closed_form_exponents(p, sigma, alpha, s, beta=None, a=None, b=None, gamma=None) -> dict[str, list[Fraction]]:
    """Simplified exponent lists, written directly as functions of alpha.

    Only valid for the default (beta, a, b, gamma) = (4, 5, 11, 1), except the
    W^{sigma,1} entry which is general.  Used to cross-check :func:`ledger`.
    """
    p, sigma, alpha, s = Q(p), Q(sigma), Q(alpha), Q(s)
    beta = DEFAULTS["beta"] if beta is None else Q(beta)
    a = DEFAULTS["a"] if a is None else Q(a)
    b = DEFAULTS["b"] if b is None else Q(b)
    gamma = DEFAULTS["gamma"] if gamma is None else Q(gamma)
    F = Fraction
    c = (1 - sigma) / (3 + sigma)
    return {
        "R_lin1": [F(-9), F(-17, 2), -(alpha + 11), F(-1), -(alpha + F(13, 2))],
        "R_lin2": [F(-5), F(-9, 2), -(alpha + 7), F(-1)],
        "R_lin3": [F(-10), F(-9), -2 * (alpha + 7), F(-2)],
        "R_delta": [F(-1, 2), -5 + (5 + 2 * alpha) * (1 - 1 / s), -(alpha + 11), F(-1)],
        "R_Y": [-(alpha + 3)],
        "R_Q": [F(-1)],
        "R_g": [F(-1)],
        "R_time": [-2 * alpha - F(7, 2), F(-1, 2)],
        "grad_hp": [
            2 * alpha * (1 - 1 / p) + F(25, 2),
            F(-1, 2),
            2 * alpha * (1 - 1 / p) + 8,
            -alpha - 3 + 2 / p,
            F(-1),
        ],
        "w_sigma1": [
            -alpha * (1 - sigma) + beta + sigma + a * (sigma - F(1, 2)),
            2 * beta - alpha - b,
            -alpha * (1 - sigma**2) / (3 + sigma) + 2 * beta + sigma + a * (c + sigma) - b,
            -gamma,
        ],
        "l2_tail": [F(-1, 2), F(-5), F(-9, 2), -(alpha + 11), F(-1)],
    }


def self_consistency(p, sigma, alpha, s) -> dict[str, bool]:
    """Compare the substituted symbolic bounds against the closed forms, term by term."""
    led = ledger(p, sigma, alpha, s=s)
    closed = closed_form_exponents(p, sigma, alpha, s)
    return {name: led.exponents(name) == closed[name] for name in TERMS}


def simplified_dominates(led: ExponentLedger) -> bool:
    """Every unsimplified W^{sigma,1} summand is bounded by some simplified one."""
    post = led.exponents("w_sigma1")
    return all(any(pre.exponent <= e for e in post) for pre in led.w_sigma1_pre)


def assert_all_negative(led: ExponentLedger) -> tuple[bool, list[str]]:
    """Strict negativity of every exponent; returns the flag and the offending summands."""
    offenders = []
    for name in TERMS:
        for i, sm in enumerate(led.terms[name], start=1):
            if not sm.exponent < 0:
                offenders.append(f"{LABELS[name]} summand {i}")
    return (not offenders, offenders)


@dataclass(frozen=True)
class Feasibility:
    """Open lower bound on alpha and the s-window it induces."""

    alpha_min: Fraction
    constraints: dict
    beta: Fraction
    a: Fraction
    b: Fraction
    gamma: Fraction

    def s_max(self, alpha) -> Fraction:
        alpha = Q(alpha)
        if not alpha > self.alpha_min:
            raise BadExponent("alpha must exceed alpha_min")
        slack = self.b - self.a - 1
        return (2 * alpha + self.a) / (2 * alpha + self.a - slack)

    def s_window(self, alpha) -> tuple[Fraction, Fraction]:
        return (Fraction(1), self.s_max(alpha))

    def pick(self, margin=1) -> tuple[Fraction, Fraction]:
        """A concrete feasible pair: alpha = alpha_min + margin, s at the middle of its window."""
        alpha = self.alpha_min + Q(margin)
        lo, hi = self.s_window(alpha)
        return alpha, (lo + hi) / 2

    def to_json(self) -> dict:
        return {"alpha_min": fmt(self.alpha_min), "constraints": {k: fmt(v) for k, v in self.constraints.items()}}


def feasibility(p, sigma, beta=None, a=None, b=None, gamma=None) -> Feasibility:
    """Exact infimum of admissible alpha: the maximum of the four lower bounds."""
    p, sigma = Q(p), Q(sigma)
    _check_unit("p", p)
    _check_unit("sigma", sigma)
    beta = DEFAULTS["beta"] if beta is None else Q(beta)
    a = DEFAULTS["a"] if a is None else Q(a)
    b = DEFAULTS["b"] if b is None else Q(b)
    gamma = DEFAULTS["gamma"] if gamma is None else Q(gamma)
    if not (gamma > 0 and b - a - 1 > 0 and 2 * beta - b < 0):
        raise BadExponent("(beta, a, b, gamma) leave an alpha-independent exponent nonnegative")
    c = (1 - sigma) / (3 + sigma)
    hp_const = beta + 1 + Fraction(3, 2) * a  # constant in the first H^p summand
    cons = {
        "alpha > 2/p": 2 / p,
        "2 alpha (1 - 1/p) + const < 0": hp_const / (2 * (1 / p - 1)),
        "alpha (1 - sigma) > beta + sigma + a (sigma - 1/2)": (beta + sigma + a * (sigma - Fraction(1, 2))) / (1 - sigma),
        "alpha (1 - sigma^2)/(3 + sigma) > 2 beta + sigma + a (c + sigma) - b": (
            (2 * beta + sigma + a * (c + sigma) - b) * (3 + sigma) / (1 - sigma**2)
        ),
    }
    return Feasibility(max(cons.values()), cons, beta, a, b, gamma)
