"""Command-line front end.

Every data-producing subcommand reads a config file (see configs/ for
samples), writes CSV to --output (or stdout), and -- when writing to a file --
drops a JSON manifest next to it recording the resolved configuration and all
warnings.  Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 validity-guard violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
import warnings
from pathlib import Path

from . import __version__
from .amplitudes import ConvergenceError, x_closed, x_quadrature
from .config import ConfigError, parse_config
from .kernels import c_closed, c_quadrature, mode_sum_offres
from .model import ParameterError, prepare_field
from .observables import (
    BranchError,
    _eta_from_amplitude,
    classify_validity,
    fringe,
    phase_components,
    probe_outcome,
    resolution_curve,
    resolution_threshold,
    survival_amplitude,
    transition_probability,
    validity,
)
from .oracle import convergence_scan, default_truncation, evolve
from .sweeps import _fmt, preset_spec, run_sweep, spec_from_config

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2
EXIT_VALIDITY = 3


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="config file (key = value lines)")
    common.add_argument("--output", type=Path, help="CSV destination (default: stdout)")
    common.add_argument("--threads", type=int, default=1, help="row-level worker threads")
    common.add_argument("--quiet", action="store_true", help="suppress progress chatter")
    common.add_argument(
        "--force",
        action="store_true",
        help="proceed even when the validity estimator classifies the run as invalid",
    )

    parser = argparse.ArgumentParser(
        prog="fockprobe",
        description="Transit amplitudes, phases, and verification for cavity Fock-state probing",
    )
    parser.add_argument("--version", action="version", version=f"fockprobe {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("amplitudes", parents=[common],
                       help="first-order transit amplitudes per mode")
    p.add_argument("--mode", type=int, action="append", required=True,
                   help="mode index (repeatable)")
    p.add_argument("--sign", choices=["+", "-", "both"], default="both")
    p.add_argument("--quadrature-check", action="store_true",
                   help="also integrate numerically and report the deviation")
    p.add_argument("--quad-tol", type=float, default=1e-10)

    p = sub.add_parser("kernels", parents=[common],
                       help="second-order transit kernels per mode")
    p.add_argument("--mode", type=int, action="append", required=True)
    p.add_argument("--sign", choices=["+", "-", "both"], default="both")
    p.add_argument("--quadrature-check", action="store_true")
    p.add_argument("--quad-tol", type=float, default=1e-9)
    p.add_argument("--mode-sum", action="store_true",
                   help="also evaluate the off-resonant kernel sum")

    sub.add_parser("transition", parents=[common],
                   help="excitation probability with its three contributions")

    sub.add_parser("phase", parents=[common],
                   help="p_excite, gamma, visibility, validity for the configured preparation")

    p = sub.add_parser("resolution", parents=[common],
                       help="phase difference delta_gamma over a photon-number grid")
    p.add_argument("--m", type=int, action="append", help="photon difference (repeatable)")
    p.add_argument("--n-max", type=int, default=100)
    p.add_argument("--n-step", type=int, default=1)
    p.add_argument("--floor", type=float, default=1e-4,
                   help="resolution floor for the threshold report (rad)")

    p = sub.add_parser("fringe", parents=[common],
                       help="two-port interferometer output probabilities")
    p.add_argument("--unknown-photons", type=int, required=True,
                   help="photon number in the unknown arm")
    p.add_argument("--phi", type=float, action="append",
                   help="reference phase (repeatable; default 0)")

    p = sub.add_parser("verify", parents=[common],
                       help="closed forms against the exactly evolved truncated system")
    p.add_argument("--modes", type=int, default=None,
                   help="highest retained mode (default: probed + 1)")
    p.add_argument("--headroom", type=int, default=4)
    p.add_argument("--others-max", type=int, default=2)
    p.add_argument("--tol", type=float, default=1e-10, help="integrator tolerance")
    p.add_argument("--scan", choices=["modes", "headroom", "integ_tol"],
                   help="run a convergence scan along one axis instead")

    p = sub.add_parser("sweep", parents=[common], help="run a configured or preset sweep")
    p.add_argument("--preset", choices=["fig3", "fig4", "fig5"],
                   help="shipped sweep preset")

    return parser


def _require_config(args):
    if args.config is None:
        raise ConfigError("this command needs --config")
    return parse_config(args.config)


def _signs(flag: str):
    return {"+": [+1], "-": [-1], "both": [+1, -1]}[flag]


def _emit(args, header, rows, resolved, command, extra=None, messages=()):
    text = io.StringIO()
    writer = csv.writer(text, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(cell) for cell in row])
    if args.output is None:
        sys.stdout.write(text.getvalue())
        return
    args.output.parent.mkdir(parents=True, exist_ok=True)
    args.output.write_text(text.getvalue(), encoding="utf-8")
    manifest = {
        "tool": "fockprobe",
        "version": __version__,
        "command": command,
        "config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in sorted(resolved.resolved.items())},
        "defaults_applied": {k: (list(v) if isinstance(v, tuple) else v)
                              for k, v in sorted(resolved.defaults_applied.items())},
        "columns": list(header),
        "row_count": len(rows),
        "warnings": list(messages),
    }
    if extra:
        manifest.update(extra)
    Path(str(args.output) + ".manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _guard_validity(args, resolved):
    value = validity(resolved.setup, resolved.prep)
    if classify_validity(value) == "invalid" and not args.force:
        sys.stderr.write(
            f"validity estimator {value:.3g} >= 1: perturbative output untrusted "
            "(rerun with --force to proceed)\n"
        )
        raise SystemExit(EXIT_VALIDITY)


def _cmd_amplitudes(args) -> int:
    resolved = _require_config(args)
    header = ["beta", "sign", "re_closed", "im_closed", "re_quad", "im_quad", "abs_err"]
    rows = []
    for beta in sorted(set(args.mode)):
        for sign in _signs(args.sign):
            closed = x_closed(resolved.setup, beta, sign)
            if args.quadrature_check:
                quadv = x_quadrature(resolved.setup, beta, sign, quad_tol=args.quad_tol)
                rows.append([beta, f"{sign:+d}", closed.real, closed.imag,
                             quadv.real, quadv.imag, abs(closed - quadv)])
            else:
                rows.append([beta, f"{sign:+d}", closed.real, closed.imag, "", "", ""])
    _emit(args, header, rows, resolved, "amplitudes")
    return EXIT_OK


def _cmd_kernels(args) -> int:
    resolved = _require_config(args)
    header = ["beta", "sign", "re_closed", "im_closed", "re_quad", "im_quad"]
    rows = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        for beta in sorted(set(args.mode)):
            for sign in _signs(args.sign):
                closed = c_closed(resolved.setup, beta, sign)
                if args.quadrature_check:
                    quadv = c_quadrature(resolved.setup, beta, sign, quad_tol=args.quad_tol)
                    rows.append([beta, f"{sign:+d}", closed.real, closed.imag,
                                 quadv.real, quadv.imag])
                else:
                    rows.append([beta, f"{sign:+d}", closed.real, closed.imag, "", ""])
        extra = None
        if args.mode_sum:
            total, report = mode_sum_offres(resolved.setup, resolved.prep, resolved.policy)
            extra = {"mode_sum": {"re": total.real, "im": total.imag,
                                  **report.as_dict()}}
            if not args.quiet:
                sys.stderr.write(
                    f"mode sum over beta != {resolved.prep.mode}: {total!r} "
                    f"({report.modes_evaluated} modes, tail ~ {report.tail_estimate:.3g})\n"
                )
    messages = sorted({str(w.message) for w in caught})
    _emit(args, header, rows, resolved, "kernels", extra=extra, messages=messages)
    return EXIT_OK


def _cmd_transition(args) -> int:
    resolved = _require_config(args)
    _guard_validity(args, resolved)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        breakdown = transition_probability(resolved.setup, resolved.prep, resolved.policy)
    header = ["p_excite", "rotating", "counter_rotating", "vacuum"]
    rows = [[breakdown.total, breakdown.rotating, breakdown.counter_rotating,
             breakdown.vacuum]]
    messages = sorted({str(w.message) for w in caught})
    _emit(args, header, rows, resolved, "transition",
          extra={"truncation": breakdown.report.as_dict()}, messages=messages)
    return EXIT_OK


def _cmd_phase(args) -> int:
    resolved = _require_config(args)
    _guard_validity(args, resolved)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        outcome = probe_outcome(resolved.setup, resolved.prep, resolved.policy)
    header = ["p_excite", "gamma", "visibility", "validity"]
    rows = [[outcome.p_excite, outcome.gamma, outcome.visibility, outcome.validity]]
    messages = sorted({str(w.message) for w in caught})
    _emit(args, header, rows, resolved, "phase",
          extra={"truncation": outcome.phase.report.as_dict()}, messages=messages)
    return EXIT_OK


def _cmd_resolution(args) -> int:
    resolved = _require_config(args)
    _guard_validity(args, resolved)
    m_list = sorted(set(args.m)) if args.m else [1]
    n_range = range(0, args.n_max + 1, args.n_step)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rows = resolution_curve(resolved.setup, resolved.prep.mode, m_list, n_range,
                                resolved.policy)
        threshold = resolution_threshold(resolved.setup, resolved.prep.mode,
                                         resolution_floor=args.floor,
                                         policy=resolved.policy)
    header = ["n", "m", "delta_gamma"]
    messages = sorted({str(w.message) for w in caught})
    if not args.quiet:
        sys.stderr.write(
            f"largest n resolving a single photon at floor {args.floor:g} rad: "
            f"{threshold}\n"
        )
    _emit(args, header, rows, resolved, "resolution",
          extra={"resolution_floor": args.floor, "threshold_n": threshold},
          messages=messages)
    return EXIT_OK


def _cmd_fringe(args) -> int:
    resolved = _require_config(args)
    _guard_validity(args, resolved)
    unknown = prepare_field(resolved.setup, resolved.prep.mode, args.unknown_photons)
    phis = args.phi if args.phi else [0.0]
    header = ["phi", "p_plus", "p_minus"]
    rows = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        for phi in phis:
            p_plus, p_minus = fringe(resolved.setup, resolved.prep, unknown, phi,
                                     resolved.policy)
            rows.append([phi, p_plus, p_minus])
    messages = sorted({str(w.message) for w in caught})
    _emit(args, header, rows, resolved, "fringe",
          extra={"unknown_photons": args.unknown_photons}, messages=messages)
    return EXIT_OK


def _cmd_verify(args) -> int:
    resolved = _require_config(args)
    _guard_validity(args, resolved)
    setup, prep, policy = resolved.setup, resolved.prep, resolved.policy
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if args.scan:
            rows_dicts, converged = convergence_scan(setup, prep, args.scan,
                                                     integ_tol=args.tol,
                                                     headroom=args.headroom,
                                                     others_max=args.others_max)
            header = ["axis", "value", "gamma", "p_excite", "norm_drift", "dimension"]
            rows = [[d["axis"], d["value"], d["gamma"], d["p_excite"],
                     d["norm_drift"], d["dimension"]] for d in rows_dicts]
            summary = "PASS: scan converged" if converged else "FAIL: scan not converged"
            extra = {"scan_converged": converged}
        else:
            trunc = default_truncation(prep, max_mode=args.modes,
                                       headroom=args.headroom,
                                       others_max=args.others_max)
            kept = [b for b, _ in trunc.modes]
            result = evolve(setup, prep, trunc, integ_tol=args.tol)
            pert_p = transition_probability(setup, prep, policy, modes=kept).total
            comps = phase_components(setup, prep.mode, policy, modes=kept)
            amp = survival_amplitude(comps, setup, prep.photons)
            eta, gamma, vis = _eta_from_amplitude(amp)
            pairs = [
                ("p_excite", pert_p, result.p_excite_numeric),
                ("gamma", gamma, result.eta_numeric.real),
                ("im_eta", eta.imag, result.eta_numeric.imag),
            ]
            header = ["observable", "perturbative", "oracle", "abs_dev", "rel_dev"]
            rows = []
            for name, pert, orac in pairs:
                dev = abs(pert - orac)
                rel = dev / max(abs(orac), 1e-300)
                rows.append([name, pert, orac, dev, rel])
            # Second order is trustworthy when the mismatch is far below the
            # signal itself; flag otherwise.
            ok = abs(gamma - result.eta_numeric.real) <= 0.05 * max(abs(gamma), 1e-300)
            ok = ok and result.norm_drift <= 10.0 * args.tol
            summary = ("PASS" if ok else "FAIL") + (
                f": gamma dev {abs(gamma - result.eta_numeric.real):.3e}, "
                f"norm drift {result.norm_drift:.3e}"
            )
            extra = {
                "oracle": {
                    "norm_drift": result.norm_drift,
                    "overlap_sq": abs(result.overlap) ** 2,
                    **result.step_report,
                },
                "kept_modes": kept,
            }
    messages = sorted({str(w.message) for w in caught})
    _emit(args, header, rows, resolved, "verify", extra=extra, messages=messages)
    # keep stdout parseable when it carries the CSV
    stream = sys.stdout if args.output is not None else sys.stderr
    stream.write(summary + "\n")
    return EXIT_OK if summary.startswith("PASS") else EXIT_NUMERIC


def _cmd_sweep(args) -> int:
    if args.preset:
        if args.output is None:
            raise ConfigError("sweep needs --output")
        spec = preset_spec(args.preset, args.output)
    else:
        resolved = _require_config(args)
        if args.output is None:
            raise ConfigError("sweep needs --output")
        spec = spec_from_config(resolved, args.output)
    _guard_validity_spec(args, spec)
    started = time.monotonic()
    csv_path, manifest_path = run_sweep(spec, threads=max(1, args.threads))
    if not args.quiet:
        sys.stderr.write(
            f"wrote {csv_path} and {manifest_path.name} in "
            f"{time.monotonic() - started:.2f}s\n"
        )
    return EXIT_OK


def _guard_validity_spec(args, spec) -> None:
    value = validity(spec.setup, spec.prep)
    if classify_validity(value) == "invalid" and not args.force:
        sys.stderr.write(
            f"validity estimator {value:.3g} >= 1: perturbative output untrusted "
            "(rerun with --force to proceed)\n"
        )
        raise SystemExit(EXIT_VALIDITY)


_HANDLERS = {
    "amplitudes": _cmd_amplitudes,
    "kernels": _cmd_kernels,
    "transition": _cmd_transition,
    "phase": _cmd_phase,
    "resolution": _cmd_resolution,
    "fringe": _cmd_fringe,
    "verify": _cmd_verify,
    "sweep": _cmd_sweep,
}


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help/--version, 2 for usage errors; fold the
        # latter into the configuration-error code.
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return _HANDLERS[args.command](args)
    except (ConfigError, ParameterError) as exc:
        sys.stderr.write(f"configuration error: {exc}\n")
        return EXIT_CONFIG
    except (ConvergenceError, BranchError) as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERIC
    except SystemExit as exc:
        if isinstance(exc.code, int):
            return exc.code
        raise


if __name__ == "__main__":
    sys.exit(main())
