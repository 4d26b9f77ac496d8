"""Lyapunov estimates for the Michaelis-Menten system with slow product formation.

In the coordinates x = s + c (total substrate) and y = s the system reads

    x' = -k2 (x - y)
    y' = -k1 e0 y + (k1 y + km1)(x - y)

and the slow manifold at k2 = 0 is the graph y = h_plus(x).  The fast block is
one dimensional, so the Lyapunov function is simply V = (y - h_plus(x))**2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
import numpy as np

from .reduce import closed_form_reduction
from .sim import Trajectory, integrate

__all__ = [
    "LyapError",
    "LyapEstimate",
    "SlowProductGeometry",
    "VDecayReport",
    "LongTermReport",
    "lyap_estimate",
    "slow_product_system",
    "simulate_slow_product",
    "verify_V_decay",
    "long_term_check",
    "CONVENTIONS",
]

# eps_L = factor * kappa / gamma; the derivation gives sqrt(2), a shortcut
# statement elsewhere uses 2 (which makes eps_L / e0 equal to eps_PE)
CONVENTIONS = {"sqrt2": math.sqrt(2.0), "2": 2.0}
SLACK = 1.05


class LyapError(ValueError):
    pass


@dataclass(frozen=True)
class SlowProductGeometry:
    k1: float
    km1: float
    e0: float

    @property
    def K_S(self) -> float:
        return self.km1 / self.k1

    def q(self, x):
        a = self.K_S + self.e0 - np.asarray(x, dtype=float)
        return np.sqrt(a * a + 4.0 * self.K_S * np.asarray(x, dtype=float))

    def dq(self, x):
        x = np.asarray(x, dtype=float)
        return (x - self.e0 + self.K_S) / self.q(x)

    def h_plus(self, x):
        return 0.5 * (-(self.K_S + self.e0 - np.asarray(x, dtype=float)) + self.q(x))

    def h_minus(self, x):
        return 0.5 * (-(self.K_S + self.e0 - np.asarray(x, dtype=float)) - self.q(x))

    def V(self, x, y):
        return (np.asarray(y, dtype=float) - self.h_plus(x)) ** 2

    @property
    def q_floor(self) -> float:
        """Lower bound 2 sqrt(K_S e0) of q on x >= 0."""
        return 2.0 * math.sqrt(self.K_S * self.e0)

    @property
    def turning_point(self) -> float | None:
        """Where q' changes sign on x >= 0, if it does."""
        x = self.e0 - self.K_S
        return x if x >= 0 else None


@dataclass(frozen=True)
class LyapEstimate:
    gamma: float
    kappa: float
    eps_L: float
    eps_L_normalized: float
    eps_L_alt: float              # the other convention, for reference
    eps_PE: float
    eps_inf: float
    V0: float
    t_onset: float
    convention: str
    geometry: SlowProductGeometry

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("gamma", "kappa", "eps_L", "eps_L_normalized",
                                            "eps_L_alt", "eps_PE", "eps_inf", "V0",
                                            "t_onset", "convention")}
        g = self.geometry
        d.update(K_S=g.K_S, q_floor=g.q_floor)
        return d


def lyap_estimate(k1: float, km1: float, k2: float, e0: float, s0: float,
                  convention: str = "sqrt2", V0: float | None = None) -> LyapEstimate:
    """Decay rate, drive bound and discrepancy bounds for slow product formation.

    ``k2 = 0`` is allowed (the slow manifold is then invariant); every other
    input must be positive.
    """
    for name, v in (("k1", k1), ("km1", km1), ("e0", e0), ("s0", s0)):
        if not v > 0:
            raise LyapError(f"{name} must be positive, got {v}")
    if not k2 >= 0:
        raise LyapError(f"k2 must be nonnegative, got {k2}")
    if convention not in CONVENTIONS:
        raise LyapError(f"unknown convention {convention!r}; use one of {sorted(CONVENTIONS)}")
    geo = SlowProductGeometry(k1, km1, e0)
    gamma = math.sqrt(k1 * e0 * km1)
    kappa = k2 * e0
    eps_L = CONVENTIONS[convention] * kappa / gamma
    other = "2" if convention == "sqrt2" else "sqrt2"
    eps_PE = 2.0 * k2 / math.sqrt(km1 * k1 * e0)
    eps_inf = (k1 * e0 + km1) / (k1 * e0) * eps_PE
    if V0 is None:
        V0 = float(geo.V(s0, s0))
    floor = (kappa / gamma) ** 2
    if V0 <= floor:
        t_on = 0.0
    elif floor == 0:
        t_on = math.inf
    else:
        t_on = math.log(gamma * gamma * V0 / (kappa * kappa)) / gamma
    return LyapEstimate(gamma, kappa, eps_L, eps_L / e0, CONVENTIONS[other] * kappa / gamma,
                        eps_PE, eps_inf, V0, t_on, convention, geo)


def slow_product_system(k1: float, km1: float, k2: float, e0: float):
    """Right-hand side and Jacobian in (x, y) coordinates."""
    def f(z):
        x, y = z
        return np.array([-k2 * (x - y), -k1 * e0 * y + (k1 * y + km1) * (x - y)])

    def jac(z):
        x, y = z
        return np.array([[-k2, k2],
                         [k1 * y + km1, -k1 * e0 + k1 * (x - y) - (k1 * y + km1)]])
    return f, jac


def simulate_slow_product(k1, km1, k2, e0, s0, T: float, n_out: int = 1000,
                          rtol: float = 1e-10) -> Trajectory:
    f, jac = slow_product_system(k1, km1, k2, e0)
    t_eval = np.linspace(0.0, T, n_out)
    return integrate(f, jac, np.array([s0, s0]), (0.0, T), rtol=rtol, t_eval=t_eval,
                     names=("X", "Y"), meta={"system": "slow_product_xy"})


@dataclass
class VDecayReport:
    n_points: int
    max_ratio: float              # max V / bound over output times
    bound_ok: bool
    onset_ok: bool
    max_sqrtV_after_onset: float | None
    monotone: bool

    @property
    def passed(self) -> bool:
        return self.bound_ok and self.onset_ok

    def as_dict(self) -> dict:
        return dict(self.__dict__, passed=self.passed)


def verify_V_decay(traj: Trajectory, est: LyapEstimate, slack: float = SLACK,
                   atol: float = 1e-14) -> VDecayReport:
    """Check V(t) <= V0 e^{-gamma t} + (kappa/gamma)^2 (1 - e^{-gamma t}) with slack.

    ``atol`` absorbs integration roundoff once V itself is at roundoff level.
    After the onset time sqrt(V) must stay below slack * sqrt(2) kappa / gamma.
    """
    if tuple(traj.names) != ("X", "Y"):
        raise LyapError(f"expected a trajectory in (X, Y) coordinates, got {traj.names}")
    g = est.geometry
    V = g.V(traj["X"], traj["Y"])
    t = traj.t
    e = np.exp(-est.gamma * t)
    floor = (est.kappa / est.gamma) ** 2
    bound = est.V0 * e + floor * (1.0 - e)
    ratio = V / np.maximum(bound, 1e-300)
    bound_ok = bool(np.all(V <= slack * bound + atol))
    after = t >= est.t_onset
    lim = slack * math.sqrt(2.0) * est.kappa / est.gamma
    if after.any():
        m = float(np.sqrt(V[after]).max())
        onset_ok = m <= lim + math.sqrt(atol)
    else:
        m, onset_ok = None, True
    mono = bool(np.all(np.diff(V) <= atol))
    return VDecayReport(len(t), float(ratio.max()), bound_ok, onset_ok, m, mono)


@dataclass
class LongTermReport:
    T: float
    t_onset: float
    max_discrepancy: float        # sup over t >= t_onset of |x_full - x_red| / e0
    bound: float                  # eps_inf
    slack: float = SLACK

    @property
    def passed(self) -> bool:
        return self.max_discrepancy <= self.slack * self.bound

    def as_dict(self) -> dict:
        return dict(self.__dict__, passed=self.passed)


def long_term_check(k1, km1, k2, e0, s0, T: float | None = None, n_out: int = 2000,
                    rtol: float = 1e-10) -> LongTermReport:
    """Full (x, y) system against the reduced total-substrate equation.

    Both start from x = s0; the discrepancy is measured in x after the onset
    time and normalized by e0.
    """
    est = lyap_estimate(k1, km1, k2, e0, s0)
    if T is None:
        # many slow times: the reduced rate at x = 0 is about k2 e0 / (K_S + e0)
        T = 20.0 * (km1 / k1 + e0) / (k2 * e0) if k2 > 0 else 10.0 / est.gamma
    T = float(T)
    full = simulate_slow_product(k1, km1, k2, e0, s0, T, n_out, rtol)
    rm = closed_form_reduction("mm.slowprod.k2.x")
    point = {"k1": k1, "km1": km1, "k2": k2, "e0": e0, "s0": s0}
    f, jac = rm.system(point)
    red = integrate(f, jac, rm.initial(point), (0.0, T), rtol=rtol, t_eval=full.t, names=("X",))
    after = full.t >= min(est.t_onset, T)
    d = np.abs(full["X"][after] - red["X"][after]) / e0
    return LongTermReport(float(T), est.t_onset, float(d.max()), float(est.eps_inf))
