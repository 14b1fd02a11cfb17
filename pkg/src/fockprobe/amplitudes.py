"""First-order transit amplitudes for a ground-state atom crossing the cavity.

For mode ``beta`` and rotating/counter-rotating sign ``s`` the amplitude is the
transit integral

    X_{s,beta} = (k_beta L)^{-1/2} * Integral_0^T exp(i (s Omega + omega_beta) t)
                 * sin(k_beta v t) dt,

with x(t) = v t and T = L / v.  In the dimensionless transit phases
``a = (omega_beta + s Omega) T`` and ``b = beta pi`` it evaluates exactly to

    X = T sqrt(b) * h(a - b) / (a + b),      h(u) = -(u/2) S(u/2)^2 + i S(u),

where S(x) = sin(x)/x.  This rearrangement is algebraically identical to the
textbook ratio ``(1 - (-1)^beta e^{ia}) L v sqrt(b) / ((b v)^2 - L^2 (...)^2)``
but stays numerically stable through the removable singularities a -> +/- b,
so no separate limit branch is required.

Conventions: time dependence exp(+i omega t) exactly as in the defining
integral; no rotating-wave approximation anywhere.  Amplitudes for a < 0
follow from X(-a) = conj(X(a)).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .model import (
    CONSECUTIVE_SMALL_INCREMENTS,
    DEFAULT_POLICY,
    ParameterError,
    ProbeSetup,
    ProbeWarning,
    TruncationPolicy,
    TruncationReport,
)


class ConvergenceError(RuntimeError):
    """Numerical integration or summation failed to reach its tolerance."""


def _check_mode_sign(beta, sign):
    if beta != int(beta) or beta < 1:
        raise ParameterError(f"mode index must be a positive integer, got {beta}")
    if sign not in (+1, -1):
        raise ParameterError(f"sign must be +1 or -1, got {sign!r}")


def _transit_phases(setup: ProbeSetup, beta, sign):
    """Dimensionless phases accumulated over one transit.

    Returns (a, b): a = (omega_beta + sign*Omega) * T for the driving
    exponential, b = beta*pi for the mode envelope.
    """
    T = setup.crossing_time
    omega = setup.mode_frequency(beta)
    return (omega + sign * setup.atom_gap) * T, beta * np.pi


def _sinc(x):
    # sin(x)/x with the removable zero filled in.
    return np.sinc(np.asarray(x) / np.pi)


def _reduced_amplitude(a, b):
    """sqrt(b) * h(a - b) / (a + b) for a >= 0 elementwise; X = T * this."""
    u = a - b
    h = -(u / 2.0) * _sinc(u / 2.0) ** 2 + 1j * _sinc(u)
    return np.sqrt(b) * h / (a + b)


def _closed_array(setup: ProbeSetup, betas, sign) -> np.ndarray:
    """Vectorized closed form over an integer mode array."""
    betas = np.asarray(betas, dtype=float)
    T = setup.crossing_time
    a = (setup.mode_frequency(betas) + sign * setup.atom_gap) * T
    b = betas * np.pi
    pos = np.abs(a)
    out = T * _reduced_amplitude(pos, b)
    out = np.where(a < 0, np.conj(out), out)
    # Parity cancellation is exact, not a rounding-level residue: a == 0 only
    # happens on resonance, where even modes decouple identically.
    exact_zero = (a == 0.0) & (betas.astype(int) % 2 == 0)
    return np.where(exact_zero, 0.0 + 0.0j, out)


def x_closed(setup: ProbeSetup, beta: int, sign: int) -> complex:
    """Closed-form transit amplitude X_{sign,beta} (units of time).

    Exact for all parameters, including the removable denominator zeros and
    the even-mode resonance where it returns exactly 0.
    """
    _check_mode_sign(beta, sign)
    return complex(_closed_array(setup, np.array([beta]), sign)[0])


def x_quadrature(
    setup: ProbeSetup,
    beta: int,
    sign: int,
    quad_tol: float = 1e-10,
    max_intervals: int = 800,
) -> complex:
    """Transit amplitude by adaptive numerical integration (oracle path).

    Integrates the defining oscillatory integral with QUADPACK's sin/cos
    weighted scheme, independent of :func:`x_closed`.  Raises
    :class:`ConvergenceError` when the estimated error exceeds
    ``quad_tol * max(|X|, T)``.
    """
    _check_mode_sign(beta, sign)
    if quad_tol <= 0:
        raise ParameterError(f"quad_tol must be positive, got {quad_tol}")
    a, b = _transit_phases(setup, beta, sign)
    T = setup.crossing_time

    envelope = lambda x: np.sin(b * x)
    if abs(a) < 1e-6:
        # full_output suppresses QUADPACK chatter; the error check below is ours
        re_res = quad(lambda x: np.cos(a * x) * envelope(x), 0.0, 1.0,
                      epsabs=1e-14, epsrel=quad_tol, limit=max_intervals,
                      full_output=1)
        im_res = quad(lambda x: np.sin(a * x) * envelope(x), 0.0, 1.0,
                      epsabs=1e-14, epsrel=quad_tol, limit=max_intervals,
                      full_output=1)
        re, ere = re_res[0], re_res[1]
        im, eim = im_res[0], im_res[1]
    else:
        re_res = quad(envelope, 0.0, 1.0, weight="cos", wvar=abs(a),
                      epsabs=1e-16, epsrel=quad_tol, limit=max_intervals,
                      maxp1=100, full_output=1)
        im_res = quad(envelope, 0.0, 1.0, weight="sin", wvar=abs(a),
                      epsabs=1e-16, epsrel=quad_tol, limit=max_intervals,
                      maxp1=100, full_output=1)
        re, ere = re_res[0], re_res[1]
        im, eim = im_res[0], im_res[1]
        if a < 0:
            im = -im
    value = T * (re + 1j * im) / np.sqrt(b)
    err = T * (ere + eim) / np.sqrt(b)
    if err > quad_tol * max(abs(value), T):
        raise ConvergenceError(
            f"transit-amplitude quadrature (beta={beta}, sign={sign:+d}) "
            f"error estimate {err:.3g} exceeds tolerance"
        )
    return complex(value)


def x_mod_squared(setup: ProbeSetup, beta: int, sign: int) -> float:
    """|X_{sign,beta}|^2, computed from the complex closed form."""
    return abs(x_closed(setup, beta, sign)) ** 2


def x_detuned_leading(setup: ProbeSetup, alpha: int, delta: float) -> complex:
    """Leading-order rotating amplitude of an even mode at small detuning.

    For alpha = 2j and delta = omega_alpha - Omega small, the otherwise
    cancelled amplitude grows linearly: X ~ -i delta L^2 / (v^2 (2 pi j)^{3/2}).
    Intended only for scaling checks against :func:`x_closed`.
    """
    if alpha != int(alpha) or alpha < 1 or alpha % 2 != 0:
        raise ParameterError(f"detuned leading form needs an even mode, got {alpha}")
    j = alpha // 2
    L, v = setup.cavity_length, setup.atom_speed
    return -1j * delta * L * L / (v * v * (2.0 * np.pi * j) ** 1.5)


def _adaptive_abs_squared_sum(setup, alpha, sign, policy):
    """Sum |X_{sign,beta}|^2 over beta != alpha with adaptive termination."""
    total = 0.0
    consecutive = 0
    last_term = 0.0
    beta_last = 0
    converged = False
    chunk = 256
    start = 1
    while start <= policy.max_mode and not converged:
        stop = min(start + chunk - 1, policy.max_mode)
        betas = np.arange(start, stop + 1)
        vals = np.abs(_closed_array(setup, betas, sign)) ** 2
        vals[betas == alpha] = 0.0
        for i, beta in enumerate(betas):
            total += vals[i]
            last_term = vals[i]
            beta_last = int(beta)
            if beta != alpha and total > 0 and vals[i] <= policy.tail_tol * total:
                consecutive += 1
                if consecutive >= CONSECUTIVE_SMALL_INCREMENTS:
                    converged = True
                    break
            elif beta != alpha:
                consecutive = 0
        start = stop + 1
        chunk = min(chunk * 2, 8192)
    # |X|^2 falls off like 1/beta^3, so the integral tail is ~ t_B * B / 2.
    tail = last_term * beta_last / 2.0
    if not converged:
        warnings.warn(
            f"transition mode sum hit max_mode={policy.max_mode} before "
            f"tail_tol={policy.tail_tol:g}; tail estimate {tail:.3g}",
            ProbeWarning,
            stacklevel=3,
        )
    return float(total), TruncationReport(beta_last, float(tail), converged)


def counter_rotating_mode_sum(
    setup: ProbeSetup,
    alpha: int,
    policy: TruncationPolicy = DEFAULT_POLICY,
    modes=None,
):
    """Vacuum-fluctuation sum over modes beta != alpha of |X_{+,beta}|^2.

    With ``modes`` given, sums exactly those modes (no adaptivity); otherwise
    iterates up to the policy cap.  Returns (value, TruncationReport).
    """
    if modes is not None:
        betas = np.array([b for b in modes if b != alpha], dtype=int)
        if betas.size == 0:
            return 0.0, TruncationReport(0, 0.0, True)
        total = float(np.sum(np.abs(_closed_array(setup, betas, +1)) ** 2))
        return total, TruncationReport(len(betas), 0.0, True)
    return _adaptive_abs_squared_sum(setup, alpha, +1, policy)


@dataclass(frozen=True)
class FirstOrderAmplitudes:
    """Closed-form X_{+,beta} and X_{-,beta} per mode, with truncation metadata."""

    per_mode: dict
    report: TruncationReport

    def rotating(self, beta: int) -> complex:
        return self.per_mode[beta][1]

    def counter_rotating(self, beta: int) -> complex:
        return self.per_mode[beta][0]


def collect_first_order(setup: ProbeSetup, modes) -> FirstOrderAmplitudes:
    """Evaluate both signs of the closed form for an explicit mode list."""
    betas = np.array(sorted(set(int(b) for b in modes)), dtype=int)
    if betas.size == 0 or betas[0] < 1:
        raise ParameterError("modes must be a non-empty collection of positive integers")
    plus = _closed_array(setup, betas, +1)
    minus = _closed_array(setup, betas, -1)
    per_mode = {int(b): (complex(p), complex(m)) for b, p, m in zip(betas, plus, minus)}
    return FirstOrderAmplitudes(per_mode, TruncationReport(len(betas), 0.0, True))
