"""Pointwise Nash decomposition, amplitudes a_k and the time cutoff Theta.

Matrices are arrays of shape (2, 2, ...) with arbitrary trailing axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadWindow, OutOfRange

XI_HAT_OUTER = np.array(
    [
        [[1.0, 0.0], [0.0, 0.0]],
        [[0.0, 0.0], [0.0, 1.0]],
        [[0.5, 0.5], [0.5, 0.5]],
        [[0.5, -0.5], [-0.5, 0.5]],
    ]
)
ISO_SHARE = 0.5
ADMISSIBLE_RADIUS = 1.0 / 8.0


@dataclass(frozen=True, eq=False)
class GammaCoeffs:
    c: np.ndarray  # (4, ...)

    @property
    def gamma(self) -> np.ndarray:
        return np.sqrt(self.c)

    def reconstruct(self) -> np.ndarray:
        return np.einsum("k...,kij->ij...", self.c, XI_HAT_OUTER)


def _coeffs(A: np.ndarray) -> np.ndarray:
    return np.stack(
        [A[0, 0] - ISO_SHARE, A[1, 1] - ISO_SHARE, ISO_SHARE + A[0, 1], ISO_SHARE - A[0, 1]]
    )


def gamma(A: np.ndarray, check: bool = True) -> GammaCoeffs:
    """Explicit c_k with sum_k c_k xi_hat_k x xi_hat_k = A (A symmetric)."""
    A = np.asarray(A, dtype=float)
    if check:
        dev = A - np.eye(2).reshape((2, 2) + (1,) * (A.ndim - 2))
        frob = np.sqrt(np.sum(dev**2, axis=(0, 1)))
        if np.any(frob >= ADMISSIBLE_RADIUS):
            raise OutOfRange(f"|A - I| = {float(np.max(frob)):.4f} >= 1/8")
    c = _coeffs(A)
    if check and np.any(c <= 0.0):
        raise OutOfRange("nonpositive Nash coefficient")
    return GammaCoeffs(c)


def trace_split(R: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(traceless part, tr R / 2)."""
    half = 0.5 * (R[0, 0] + R[1, 1])
    ring = np.array(R, dtype=float, copy=True)
    ring[0, 0] -= half
    ring[1, 1] -= half
    return ring, half


def rho(R_ring: np.ndarray, eps: float) -> np.ndarray:
    if eps <= 0:
        raise ValueError("eps must be positive")
    return 10.0 * np.sqrt(eps**2 + np.sum(np.asarray(R_ring) ** 2, axis=(0, 1)))


def _ell(R_ring: np.ndarray) -> np.ndarray:
    """Linear part of rho c_k in R_ring: c_k rho = rho/2 + ell_k."""
    return np.stack([R_ring[0, 0], R_ring[1, 1], R_ring[0, 1], -R_ring[0, 1]])


def amplitudes(R_ring: np.ndarray, eps: float, theta: float | np.ndarray = 1.0) -> np.ndarray:
    """a_k = Theta rho^{1/2} Gamma_k(I + R_ring / rho); shape (4, ...)."""
    r = rho(R_ring, eps)
    A = np.eye(2).reshape((2, 2) + (1,) * (r.ndim)) + R_ring / r
    g = gamma(A)
    return np.asarray(theta) * np.sqrt(r) * g.gamma


def amplitudes_with_rate(
    R_ring: np.ndarray, dR_ring: np.ndarray, eps: float, theta: float, dtheta: float
) -> tuple[np.ndarray, np.ndarray]:
    """(a_k, d_t a_k) from R_ring and its time derivative.

    Uses a_k = Theta b_k with b_k^2 = rho/2 + ell_k(R_ring) > 0, so the rate is
    exact given d_t R_ring.
    """
    r = rho(R_ring, eps)
    b2 = 0.5 * r + _ell(R_ring)
    if np.any(b2 <= 0.0):
        raise OutOfRange("nonpositive Nash coefficient")
    b = np.sqrt(b2)
    dr = 100.0 * np.sum(R_ring * dR_ring, axis=(0, 1)) / r
    db = (0.5 * dr + _ell(dR_ring)) / (2.0 * b)
    return theta * b, dtheta * b + theta * db


def reconstruction_residual(a: np.ndarray, R_ring: np.ndarray, eps: float, theta: float | np.ndarray = 1.0) -> float:
    """max |sum a_k^2 xi_hat x xi_hat - Theta^2 (rho I + R_ring)|."""
    lhs = np.einsum("k...,kij->ij...", a**2, XI_HAT_OUTER)
    r = rho(R_ring, eps)
    th2 = np.asarray(theta) ** 2
    rhs = th2 * (r * np.eye(2).reshape((2, 2) + (1,) * r.ndim) + R_ring)
    return float(np.max(np.abs(lhs - rhs)))


# ---------------------------------------------------------------------------
# time cutoff


def smoothstep7(x):
    """C^3 step: 0 for x <= 0, 1 for x >= 1."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    return x**4 * (35.0 - 84.0 * x + 70.0 * x**2 - 20.0 * x**3)


def smoothstep7_rate(x):
    x = np.asarray(x, dtype=float)
    inside = (x > 0.0) & (x < 1.0)
    xc = np.clip(x, 0.0, 1.0)
    return np.where(inside, 140.0 * xc**3 * (1.0 - xc) ** 3, 0.0)


@dataclass(frozen=True)
class CutoffSpec:
    """Theta = 0 outside [t0 - tau, 1 - t0 + tau] and 1 on [t0, 1 - t0].

    ``active=False`` gives Theta identically 1.
    """

    t0: float = 0.25
    tau: float = 1.0 / 16.0
    active: bool = True

    def __post_init__(self) -> None:
        if self.active and not (0.0 < self.tau < self.t0 < 0.5):
            raise BadWindow(f"need 0 < tau < t0 < 1/2, got tau={self.tau}, t0={self.t0}")

    def to_json(self) -> dict:
        return {"t0": self.t0, "tau": self.tau, "active": self.active}


@dataclass(frozen=True)
class Theta:
    spec: CutoffSpec

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if not self.spec.active:
            return np.ones_like(t)
        t0, tau = self.spec.t0, self.spec.tau
        return smoothstep7((t - (t0 - tau)) / tau) * smoothstep7(((1.0 - t0 + tau) - t) / tau)

    def rate(self, t):
        t = np.asarray(t, dtype=float)
        if not self.spec.active:
            return np.zeros_like(t)
        t0, tau = self.spec.t0, self.spec.tau
        up = (t - (t0 - tau)) / tau
        down = ((1.0 - t0 + tau) - t) / tau
        return (smoothstep7_rate(up) * smoothstep7(down) - smoothstep7(up) * smoothstep7_rate(down)) / tau

    def breakpoints(self) -> list[float]:
        if not self.spec.active:
            return []
        t0, tau = self.spec.t0, self.spec.tau
        return [t0 - tau, t0, 1.0 - t0, 1.0 - t0 + tau]


def theta_cutoff(spec: CutoffSpec) -> Theta:
    return Theta(spec)
