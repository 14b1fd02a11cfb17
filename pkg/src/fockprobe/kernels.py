"""Second-order transit kernels: the nested double-time integrals.

For mode ``beta`` and sign ``s`` the kernel is

    C_{s,beta} = Integral_0^T dt Integral_0^t dt' exp(i (omega_beta + s Omega)(t-t'))
                 * sin(k_beta v t) sin(k_beta v t'),

the object whose diagonal combination fixes the survival amplitude (and hence
the acquired phase) at second order.  In the transit phases a, b of
:mod:`.amplitudes` it evaluates exactly, for a >= 0, to

    C = T^2 * [ b^2 S(u/2)^2 + i (2 b^2 r(u) + 3 b + u) ] / (2 (a + b)^2),

with u = a - b, S(x) = sin(x)/x and r(u) = (u - sin u)/u^2.  As with the
first-order amplitude this form is algebraically identical to the textbook
two-term expression (oscillatory ratio plus imaginary pole term) but remains
stable through the removable singularities a -> +/- b; C(-a) = conj(C(a)).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .amplitudes import ConvergenceError, _check_mode_sign, _sinc
from .model import (
    CONSECUTIVE_SMALL_INCREMENTS,
    DEFAULT_POLICY,
    FieldPreparation,
    ParameterError,
    ProbeSetup,
    ProbeWarning,
    TruncationPolicy,
    TruncationReport,
)


def _sin_deficit(u):
    """(u - sin u) / u^2, series-stabilized near zero."""
    u = np.asarray(u, dtype=float)
    small = np.abs(u) < 0.1
    us = np.where(small, u, 1.0)
    u2 = us * us
    series = us / 6.0 * (1.0 - u2 / 20.0 * (1.0 - u2 / 42.0 * (1.0 - u2 / 72.0)))
    with np.errstate(invalid="ignore", divide="ignore"):
        direct = (u - np.sin(u)) / (u * u)
    return np.where(small, series, direct)


def _reduced_kernel(a, b):
    """C / T^2 for a >= 0 elementwise."""
    u = a - b
    bracket = b * b * _sinc(u / 2.0) ** 2 + 1j * (2.0 * b * b * _sin_deficit(u) + 3.0 * b + u)
    return bracket / (2.0 * (a + b) ** 2)


def _closed_array(setup: ProbeSetup, betas, sign) -> np.ndarray:
    betas = np.asarray(betas, dtype=float)
    T = setup.crossing_time
    a = (setup.mode_frequency(betas) + sign * setup.atom_gap) * T
    b = betas * np.pi
    out = T * T * _reduced_kernel(np.abs(a), b)
    out = np.where(a < 0, np.conj(out), out)
    exact_zero = (a == 0.0) & (betas.astype(int) % 2 == 0)
    return np.where(exact_zero, 0.0 + 0.0j, out)


def c_closed(setup: ProbeSetup, beta: int, sign: int) -> complex:
    """Closed-form kernel C_{sign,beta} (units of time squared).

    Valid on and off resonance (the atom gap enters only through the transit
    phase a); exactly zero for the rotating sign on an even resonant mode.
    """
    _check_mode_sign(beta, sign)
    return complex(_closed_array(setup, np.array([beta]), sign)[0])


def _envelope_overlap_closed(s, b):
    """Inner integral K(s) = int_0^{1-s} sin(b(r+s)) sin(br) dr, elementary form."""
    return 0.5 * (1.0 - s) * np.cos(b * s) - (np.sin(b * (2.0 - s)) - np.sin(b * s)) / (4.0 * b)


def c_quadrature(
    setup: ProbeSetup,
    beta: int,
    sign: int,
    quad_tol: float = 1e-9,
    inner: str = "quad",
    max_intervals: int = 3000,
) -> complex:
    """Kernel by nested numerical integration (oracle path).

    Reduces the ordered double integral with the substitution s = t - t' to

        C = T^2 * Integral_0^1 ds exp(i a s) K(s),
        K(s) = Integral_0^{1-s} sin(b(r+s)) sin(br) dr,

    then integrates the outer oscillation with QUADPACK's weighted scheme and
    the slow inner overlap either numerically (``inner="quad"``, fully
    independent of the closed form) or from its elementary antiderivative
    (``inner="closed"``, fast path).
    """
    _check_mode_sign(beta, sign)
    if quad_tol <= 0:
        raise ParameterError(f"quad_tol must be positive, got {quad_tol}")
    if inner not in ("quad", "closed"):
        raise ParameterError(f"inner must be 'quad' or 'closed', got {inner!r}")
    T = setup.crossing_time
    a = (setup.mode_frequency(beta) + sign * setup.atom_gap) * T
    b = beta * np.pi

    if inner == "closed":
        K = lambda s: _envelope_overlap_closed(s, b)
    else:
        inner_limit = 60 + 10 * beta

        def K(s):
            val, _ = quad(
                lambda r: np.sin(b * (r + s)) * np.sin(b * r),
                0.0,
                1.0 - s,
                epsabs=1e-14,
                epsrel=1e-12,
                limit=inner_limit,
            )
            return val

    aa = abs(a)
    if aa < 1e-6:
        re_res = quad(lambda s: np.cos(aa * s) * K(s), 0.0, 1.0,
                      epsabs=1e-14, epsrel=quad_tol, limit=max_intervals,
                      full_output=1)
        im_res = quad(lambda s: np.sin(aa * s) * K(s), 0.0, 1.0,
                      epsabs=1e-14, epsrel=quad_tol, limit=max_intervals,
                      full_output=1)
        re, ere = re_res[0], re_res[1]
        im, eim = im_res[0], im_res[1]
    else:
        re_res = quad(K, 0.0, 1.0, weight="cos", wvar=aa, epsabs=1e-16,
                      epsrel=quad_tol, limit=max_intervals, maxp1=120, full_output=1)
        im_res = quad(K, 0.0, 1.0, weight="sin", wvar=aa, epsabs=1e-16,
                      epsrel=quad_tol, limit=max_intervals, maxp1=120, full_output=1)
        re, ere = re_res[0], re_res[1]
        im, eim = im_res[0], im_res[1]
    value = T * T * (re + 1j * im)
    err = T * T * (ere + eim)
    if a < 0:
        value = np.conj(value)
    if err > quad_tol * max(abs(value), T * T * 1e-3):
        raise ConvergenceError(
            f"kernel quadrature (beta={beta}, sign={sign:+d}) error estimate "
            f"{err:.3g} exceeds tolerance (achieved {err:.3g})"
        )
    return complex(value)


def c_resonant_nonrel(setup: ProbeSetup, alpha: int) -> complex:
    """Non-relativistic limit of the counter-rotating resonant kernel.

    For even alpha at resonance and v/c << 1:  C_{+,alpha} ~ i L^2 / (4 pi alpha c v).
    Feeds the linear phase-difference estimate.
    """
    if alpha != int(alpha) or alpha < 1 or alpha % 2 != 0:
        raise ParameterError(f"resonant non-relativistic form needs an even mode, got {alpha}")
    L, c, v = setup.cavity_length, setup.light_speed, setup.atom_speed
    return 1j * L * L / (4.0 * np.pi * alpha * c * v)


def mode_sum_offres(
    setup: ProbeSetup,
    prep: FieldPreparation,
    policy: TruncationPolicy = DEFAULT_POLICY,
    modes=None,
):
    """Off-resonant kernel sum  Sum_{beta != alpha} conj(C_{+,beta}) / (k_beta L).

    The n-independent second-order contribution to the survival amplitude.
    Terms fall off like 1/beta^2; summation is in ascending beta (fixed order,
    reproducible) and stops after ten consecutive increments below
    ``policy.tail_tol`` relative, or at ``policy.max_mode`` with a warning.
    Returns (value, TruncationReport); the tail estimate is the 1/beta
    integral extrapolation of the last term.
    """
    alpha = prep.mode
    if modes is not None:
        betas = np.array(sorted(b for b in set(int(m) for m in modes) if b != alpha), dtype=int)
        if betas.size == 0:
            return 0j, TruncationReport(0, 0.0, True)
        terms = np.conj(_closed_array(setup, betas, +1)) / (betas * np.pi)
        return complex(np.sum(terms)), TruncationReport(len(betas), 0.0, True)

    policy.check_covers(prep)
    total = 0j
    consecutive = 0
    last_mag = 0.0
    beta_last = 0
    converged = False
    chunk = 256
    start = 1
    while start <= policy.max_mode and not converged:
        stop = min(start + chunk - 1, policy.max_mode)
        betas = np.arange(start, stop + 1)
        terms = np.conj(_closed_array(setup, betas, +1)) / (betas * np.pi)
        terms[betas == alpha] = 0j
        for i, beta in enumerate(betas):
            total += terms[i]
            if beta == alpha:
                continue
            last_mag = abs(terms[i])
            beta_last = int(beta)
            if abs(total) > 0 and last_mag <= policy.tail_tol * abs(total):
                consecutive += 1
                if consecutive >= CONSECUTIVE_SMALL_INCREMENTS:
                    converged = True
                    break
            else:
                consecutive = 0
        start = stop + 1
        chunk = min(chunk * 2, 8192)
    tail = float(last_mag * beta_last)
    if not converged:
        warnings.warn(
            f"off-resonant kernel sum hit max_mode={policy.max_mode} before "
            f"tail_tol={policy.tail_tol:g}; tail estimate {tail:.3g}",
            ProbeWarning,
            stacklevel=2,
        )
    return complex(total), TruncationReport(beta_last, tail, converged)


@dataclass(frozen=True)
class SecondOrderKernels:
    """Closed-form C_{+,beta} / C_{-,beta} per mode plus the off-resonant sum."""

    per_mode: dict
    mode_sum: complex
    report: TruncationReport

    def rotating(self, beta: int) -> complex:
        return self.per_mode[beta][1]

    def counter_rotating(self, beta: int) -> complex:
        return self.per_mode[beta][0]


def collect_second_order(
    setup: ProbeSetup,
    prep: FieldPreparation,
    policy: TruncationPolicy = DEFAULT_POLICY,
    modes=None,
) -> SecondOrderKernels:
    """Kernels for an explicit mode list (default: up to alpha + 3) plus the mode sum."""
    listed = sorted(set(int(b) for b in modes)) if modes is not None else list(
        range(1, prep.mode + 4)
    )
    betas = np.array(listed, dtype=int)
    if betas.size == 0 or betas[0] < 1:
        raise ParameterError("modes must be a non-empty collection of positive integers")
    plus = _closed_array(setup, betas, +1)
    minus = _closed_array(setup, betas, -1)
    per_mode = {int(b): (complex(p), complex(m)) for b, p, m in zip(betas, plus, minus)}
    total, report = mode_sum_offres(setup, prep, policy, modes=modes)
    return SecondOrderKernels(per_mode, total, report)
