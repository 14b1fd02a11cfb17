"""Physical predictions: transition probability, phase, visibility, resolution.

The survival amplitude after one transit is, to second order in the coupling,

    A(n) = 1 - lambda^2 [ n C_{-,alpha} / (k_alpha L)
                          + Sum_{beta != alpha} conj(C_{+,beta}) / (k_beta L)
                          + (n+1) conj(C_{+,alpha}) / (k_alpha L) ],

and eta = -i Ln A(n) on the principal branch.  The measurable interferometric
phase is gamma = Re(eta) = arg A(n); the fringe visibility factor is
exp(-|Im eta|).  Phase differences between photon numbers are evaluated from
the single Ln of the amplitude ratio, never by subtracting two rounded phases.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .amplitudes import counter_rotating_mode_sum, x_closed
from .kernels import c_closed, mode_sum_offres
from .model import (
    DEFAULT_POLICY,
    FieldPreparation,
    ParameterError,
    ProbeSetup,
    ProbeWarning,
    TruncationPolicy,
    TruncationReport,
)

# Perturbative-regime guard on the transition probability.
P_EXCITE_GUARD = 1e-4

# |eta| beyond this is inside the principal-branch ambiguity zone.
BRANCH_WARN = math.pi / 2

VALIDITY_OK = 0.1
VALIDITY_MARGINAL = 1.0


class BranchError(RuntimeError):
    """Survival amplitude left the principal-branch safe half-plane."""


def validity(setup: ProbeSetup, prep: FieldPreparation) -> float:
    """Perturbation-validity estimator (lambda/Omega) * n * (L/v).

    Quoted with the transit time in the setup's own units; classification via
    :func:`classify_validity`.  Zero coupling or zero photons give 0.
    """
    return setup.coupling_ratio * prep.photons * setup.crossing_time


def classify_validity(value: float) -> str:
    if value < VALIDITY_OK:
        return "ok"
    if value < VALIDITY_MARGINAL:
        return "marginal"
    return "invalid"


def _warn_validity(value: float) -> None:
    label = classify_validity(value)
    if label != "ok":
        warnings.warn(
            f"validity estimator {value:.3g} is {label} (perturbative trust "
            f"requires < {VALIDITY_MARGINAL:g}, comfortable below {VALIDITY_OK:g})",
            ProbeWarning,
            stacklevel=3,
        )


@dataclass(frozen=True)
class TransitionBreakdown:
    """Transition probability and its three physical contributions."""

    total: float
    rotating: float          # photon absorption from the probed mode
    counter_rotating: float  # emission into the probed mode
    vacuum: float            # fluctuations of all other modes
    report: TruncationReport


def transition_components(
    setup: ProbeSetup,
    alpha: int,
    policy: TruncationPolicy = DEFAULT_POLICY,
    modes=None,
):
    """n-independent pieces of the transition probability for mode alpha."""
    xm2 = abs(x_closed(setup, alpha, -1)) ** 2
    xp2 = abs(x_closed(setup, alpha, +1)) ** 2
    vac, report = counter_rotating_mode_sum(setup, alpha, policy, modes=modes)
    return xm2, xp2, vac, report


def transition_probability(
    setup: ProbeSetup,
    prep: FieldPreparation,
    policy: TruncationPolicy = DEFAULT_POLICY,
    modes=None,
) -> TransitionBreakdown:
    """Excitation probability lambda^2 [ |X-|^2 n + |X+|^2 (n+1) + vacuum sum ].

    ``modes`` restricts the vacuum sum to an explicit mode set (used when
    comparing against a truncated evolution); otherwise the sum is adaptive
    under ``policy``.  Warns when the result exceeds the perturbative guard.
    """
    lam2 = setup.coupling**2
    xm2, xp2, vac, report = transition_components(setup, prep.mode, policy, modes)
    rotating = float(lam2 * xm2 * prep.photons)
    counter = float(lam2 * xp2 * (prep.photons + 1))
    vacuum = float(lam2 * vac)
    total = rotating + counter + vacuum
    if total > P_EXCITE_GUARD:
        warnings.warn(
            f"transition probability {total:.3g} above perturbative guard "
            f"{P_EXCITE_GUARD:g}",
            ProbeWarning,
            stacklevel=2,
        )
    return TransitionBreakdown(total, rotating, counter, vacuum, report)


@dataclass(frozen=True)
class PhaseComponents:
    """Second-order survival-amplitude ingredients for a probed mode.

    All pieces already divided by the corresponding k L; multiply by
    lambda^2 and the photon-number weights to get the amplitude deficit.
    """

    rotating_kernel: complex         # C_{-,alpha} / (k_alpha L)
    counter_rotating_kernel: complex  # conj(C_{+,alpha}) / (k_alpha L)
    offres_sum: complex              # Sum_{beta != alpha} conj(C_{+,beta}) / (k_beta L)
    report: TruncationReport


def phase_components(
    setup: ProbeSetup,
    alpha: int,
    policy: TruncationPolicy = DEFAULT_POLICY,
    modes=None,
) -> PhaseComponents:
    """Evaluate the kernel combinations once; reuse across photon numbers."""
    kL = alpha * math.pi
    cm = c_closed(setup, alpha, -1) / kL
    cp = np.conj(c_closed(setup, alpha, +1)) / kL
    prep = FieldPreparation(mode=alpha, photons=0)
    total, report = mode_sum_offres(setup, prep, policy, modes=modes)
    return PhaseComponents(complex(cm), complex(cp), complex(total), report)


def survival_amplitude(components: PhaseComponents, setup: ProbeSetup, n: int) -> complex:
    """A(n) = 1 - lambda^2 [ n C_- + offres + (n+1) conj(C_+) ] (all over kL)."""
    lam2 = setup.coupling**2
    bracket = (
        n * components.rotating_kernel
        + components.offres_sum
        + (n + 1) * components.counter_rotating_kernel
    )
    return 1.0 - lam2 * bracket


def _eta_from_amplitude(amplitude: complex):
    if amplitude.real <= 0.0:
        raise BranchError(
            f"survival amplitude {amplitude:.6g} has non-positive real part; "
            "principal-branch phase extraction is ambiguous"
        )
    eta = -1j * cmath.log(amplitude)
    if abs(eta) > BRANCH_WARN:
        warnings.warn(
            f"|eta| = {abs(eta):.3g} inside principal-branch ambiguity zone "
            f"(> pi/2)",
            ProbeWarning,
            stacklevel=3,
        )
    gamma = eta.real
    vis = math.exp(-abs(eta.imag))
    return eta, gamma, vis


@dataclass(frozen=True)
class EtaPhase:
    """Complex eta with its derived phase and visibility."""

    eta: complex
    gamma: float
    visibility: float
    amplitude: complex
    report: TruncationReport


def eta_phase(
    setup: ProbeSetup,
    prep: FieldPreparation,
    policy: TruncationPolicy = DEFAULT_POLICY,
    modes=None,
) -> EtaPhase:
    """Principal-branch eta = -i Ln A(n) with gamma = Re eta, visibility = exp(-|Im eta|).

    Raises :class:`BranchError` if the amplitude's real part is non-positive;
    warns when |eta| > pi/2.
    """
    comps = phase_components(setup, prep.mode, policy, modes)
    amplitude = survival_amplitude(comps, setup, prep.photons)
    eta, gamma, vis = _eta_from_amplitude(amplitude)
    return EtaPhase(eta, gamma, vis, amplitude, comps.report)


@dataclass(frozen=True)
class ProbeOutcome:
    """Everything one transit predicts for a given preparation."""

    p_excite: float
    eta: complex
    gamma: float
    visibility: float
    validity: float
    transition: TransitionBreakdown
    phase: EtaPhase


def probe_outcome(
    setup: ProbeSetup,
    prep: FieldPreparation,
    policy: TruncationPolicy = DEFAULT_POLICY,
    modes=None,
) -> ProbeOutcome:
    """Bundle transition probability, phase, visibility and validity."""
    val = validity(setup, prep)
    _warn_validity(val)
    trans = transition_probability(setup, prep, policy, modes)
    phase = eta_phase(setup, prep, policy, modes)
    return ProbeOutcome(
        p_excite=trans.total,
        eta=phase.eta,
        gamma=phase.gamma,
        visibility=phase.visibility,
        validity=val,
        transition=trans,
        phase=phase,
    )


def delta_gamma_exact(
    setup: ProbeSetup,
    alpha: int,
    n: int,
    m: int,
    policy: TruncationPolicy = DEFAULT_POLICY,
    modes=None,
    components: PhaseComponents | None = None,
) -> float:
    """gamma(n+m) - gamma(n) from the single Ln of the amplitude ratio.

    Evaluating arg(A(n+m) / A(n)) avoids the catastrophic cancellation of
    subtracting two separately rounded phases at small coupling.  Pass
    ``components`` to reuse kernel evaluations across rows.
    """
    if m < 0 or n < 0:
        raise ParameterError("photon numbers must be non-negative")
    if m == 0:
        return 0.0
    comps = components if components is not None else phase_components(setup, alpha, policy, modes)
    a_hi = survival_amplitude(comps, setup, n + m)
    a_lo = survival_amplitude(comps, setup, n)
    for amp in (a_hi, a_lo):
        if amp.real <= 0.0:
            raise BranchError(
                f"survival amplitude {amp:.6g} has non-positive real part; "
                "phase difference is branch-ambiguous"
            )
    return float(np.angle(a_hi / a_lo))


def delta_gamma_linear(setup: ProbeSetup, alpha: int, m: int) -> float:
    """Few-photon phase-difference estimate lambda^2 L^2 m / (4 pi^2 alpha^2 c v).

    Follows from the non-relativistic resonant kernel; independent of n and
    invariant under rescaling L at fixed lambda/Omega and v with the gap
    tracking resonance.
    """
    if alpha != int(alpha) or alpha < 1 or alpha % 2 != 0:
        raise ParameterError(f"linear estimate holds for even modes, got {alpha}")
    lam = setup.coupling
    L, c, v = setup.cavity_length, setup.light_speed, setup.atom_speed
    return lam * lam * L * L * m / (4.0 * math.pi**2 * alpha**2 * c * v)


def resolution_curve(
    setup: ProbeSetup,
    alpha: int,
    m_list,
    n_range,
    policy: TruncationPolicy = DEFAULT_POLICY,
):
    """Rows (n, m, delta_gamma) over a photon-number grid.

    Rows are ordered by n then m.  A row whose phase extraction fails the
    branch guard gets NaN and a warning instead of aborting the table.
    """
    comps = phase_components(setup, alpha, policy)
    rows = []
    for n in n_range:
        for m in m_list:
            try:
                dg = delta_gamma_exact(setup, alpha, int(n), int(m), policy, components=comps)
            except BranchError as exc:
                warnings.warn(f"row (n={n}, m={m}): {exc}", ProbeWarning, stacklevel=2)
                dg = float("nan")
            rows.append((int(n), int(m), dg))
    return rows


def resolution_threshold(
    setup: ProbeSetup,
    alpha: int,
    resolution_floor: float = 1e-4,
    policy: TruncationPolicy = DEFAULT_POLICY,
    n_cap: int = 10**7,
):
    """Largest n with delta_1 gamma(n) >= resolution_floor, or None if already below at n=0.

    Uses the monotone decrease of the single-photon phase difference; the scan
    stops at ``n_cap`` or at the branch-guard boundary, whichever comes first.
    """
    comps = phase_components(setup, alpha, policy)

    def dg1(n):
        return delta_gamma_exact(setup, alpha, n, 1, policy, components=comps)

    if dg1(0) < resolution_floor:
        return None
    lo = 0
    hi = 1
    while hi <= n_cap:
        try:
            if dg1(hi) < resolution_floor:
                break
        except BranchError:
            break
        lo = hi
        hi *= 2
    else:
        return n_cap
    hi = min(hi, n_cap)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        try:
            above = dg1(mid) >= resolution_floor
        except BranchError:
            above = False
        if above:
            lo = mid
        else:
            hi = mid
    return lo


def fringe(
    setup: ProbeSetup,
    prep_known: FieldPreparation,
    prep_unknown: FieldPreparation,
    reference_phase: float = 0.0,
    policy: TruncationPolicy = DEFAULT_POLICY,
):
    """Balanced two-port interferometer outputs for the two cavity arms.

    P+- = (1 +- V cos(dgamma + phi)) / 2 with V the product of the arm
    visibilities and dgamma = gamma(unknown) - gamma(known).  The pair always
    sums to 1.
    """
    for prep in (prep_known, prep_unknown):
        _warn_validity(validity(setup, prep))
    if prep_known.mode == prep_unknown.mode:
        comps = phase_components(setup, prep_known.mode, policy)
        a_known = survival_amplitude(comps, setup, prep_known.photons)
        a_unknown = survival_amplitude(comps, setup, prep_unknown.photons)
        _, _, vis_known = _eta_from_amplitude(a_known)
        _, _, vis_unknown = _eta_from_amplitude(a_unknown)
        dgamma = float(np.angle(a_unknown / a_known))
    else:
        known = eta_phase(setup, prep_known, policy)
        unknown = eta_phase(setup, prep_unknown, policy)
        vis_known, vis_unknown = known.visibility, unknown.visibility
        dgamma = unknown.gamma - known.gamma
    contrast = vis_known * vis_unknown
    p_plus = 0.5 * (1.0 + contrast * math.cos(dgamma + reference_phase))
    p_minus = 1.0 - p_plus
    return p_plus, p_minus
