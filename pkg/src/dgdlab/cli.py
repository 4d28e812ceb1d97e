"""Command-line interface.

Subcommands::

    dgdlab run <config>             execute the experiment sweep
    dgdlab validate <config>        load, validate, print a validation report
    dgdlab spectra <config>         print the mixing-matrix spectral summary
    dgdlab diagnose <config> --at <state-file>
                                    evaluate diagnostics at a stacked state
    dgdlab escape-compare <config>  baseline-vs-noisy escape comparison

``<config>`` is a TOML file path, or the name of a builtin experiment
(e.g. ``paper-sec5``). Global flags: ``--seed`` overrides the master
seed, ``--output-dir`` the output directory, ``--audit`` enables the
locality/equivalence audit, ``--wide-columns`` adds per-agent CSV
columns.

Exit codes: 0 success, 2 configuration/validation failure, 1 runtime
failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import (
    ConfigError,
    ExperimentConfig,
    builtin_config,
    load_config,
    load_state_file,
    with_overrides,
)
from .csvio import fmt
from .diagnostics import (
    LipschitzUnavailableError,
    RegularityParams,
    bound_report_table,
    coercivity_probe,
    consensus_distance_check,
    mean_curvature_check,
    mean_gradient_check,
    region_membership,
    step_size_caps,
)
from .objective import (
    classify_stationary,
    f_grad,
    f_hess,
    q_grad,
    q_hess_min_eig,
    q_value,
    with_lipschitz,
)
from .experiment import escape_compare, run_experiment
from .mixing import consensus_average
from .problems import EXPERIMENT_PRESETS

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def _resolve_config(arg: str) -> ExperimentConfig:
    path = Path(arg)
    if path.exists():
        return load_config(path)
    if arg in EXPERIMENT_PRESETS:
        return builtin_config(arg)
    raise ConfigError(
        f"{arg!r} is neither a config file nor a builtin experiment "
        f"(builtins: {sorted(EXPERIMENT_PRESETS)})"
    )


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    return with_overrides(
        cfg,
        master_seed=args.seed,
        output_dir=args.output_dir,
        audit=args.audit or None,
        wide_columns=getattr(args, "wide_columns", False) or None,
    )


def _cmd_validate(args) -> int:
    cfg = _apply_overrides(_resolve_config(args.config), args)
    p = cfg.problem
    spectral = p.mixing.spectral
    print(f"config ok: {cfg.name}", file=sys.stderr)
    print(
        f"  problem: {p.num_agents} agents, dimension {p.dim}, "
        f"{len(p.graph.edges)} edges",
        file=sys.stderr,
    )
    lam2 = "n/a" if spectral.lambda_2 is None else fmt(spectral.lambda_2)
    print(
        f"  mixing: valid; lambda_2={lam2}, lambda_min={fmt(spectral.lambda_min)}",
        file=sys.stderr,
    )
    print(
        f"  variants: {', '.join(cfg.variants)}; seeds: {len(cfg.seeds)}",
        file=sys.stderr,
    )
    for probe in coercivity_probe(p):
        status = "ok" if probe.margin > 0 else "NOT COERCIVE on probe shell"
        print(
            f"  coercivity probe agent {probe.agent + 1}: min shell value "
            f"{probe.min_shell_value:.4g} vs center {probe.center_value:.4g} "
            f"[{status}]",
            file=sys.stderr,
        )
    return EXIT_OK


def _cmd_spectra(args) -> int:
    cfg = _resolve_config(args.config)
    spectral = cfg.problem.mixing.spectral
    print("eigenvalues:", " ".join(fmt(v) for v in spectral.eigenvalues))
    lam2 = "n/a" if spectral.lambda_2 is None else fmt(spectral.lambda_2)
    gap = "n/a" if spectral.spectral_gap is None else fmt(spectral.spectral_gap)
    print(f"lambda_max: {fmt(spectral.lambda_max)}")
    print(f"lambda_2:   {lam2}")
    print(f"lambda_min: {fmt(spectral.lambda_min)}")
    print(f"spectral gap (1 - lambda_2): {gap}")
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = _apply_overrides(_resolve_config(args.config), args)
    summary = run_experiment(cfg)
    print(summary.report_text, end="")
    print(f"wrote {summary.summary_path}")
    return EXIT_OK


def _cmd_escape_compare(args) -> int:
    cfg = _apply_overrides(_resolve_config(args.config), args)
    cmp = escape_compare(cfg)
    dgd = "-" if cmp.dgd_escape is None else str(cmp.dgd_escape)
    print(f"DGD escape iteration: {dgd} (final dist {fmt(cmp.dgd_final_dist)})")
    print(
        "NDGD escape iterations:",
        " ".join("-" if e is None else str(e) for e in cmp.ndgd_escapes),
    )
    med = "-" if cmp.ndgd_median is None else f"{cmp.ndgd_median:g}"
    print(f"NDGD median escape: {med}")
    if cmp.fraction_earlier is not None:
        print(f"fraction of NDGD seeds escaping before DGD: {cmp.fraction_earlier:.2f}")
    return EXIT_OK


def _cmd_diagnose(args) -> int:
    cfg = _apply_overrides(_resolve_config(args.config), args)
    p = cfg.problem
    if args.lipschitz_grad is not None or args.lipschitz_hess is not None:
        p = with_lipschitz(p, args.lipschitz_grad, args.lipschitz_hess)
    state = load_state_file(args.at, p.num_agents, p.dim)
    alpha = cfg.alpha
    qv = q_value(p, alpha, state)
    qg = float(np.linalg.norm(q_grad(p, alpha, state)))
    lam = q_hess_min_eig(p, alpha, state)
    print(f"q_value:        {fmt(qv)}")
    print(f"||q_grad||:     {fmt(qg)}")
    print(f"min Q-curvature: {fmt(lam)}")
    q_class = classify_stationary(qg, lam)
    print(f"Q classification: {q_class.kind.value}")
    mean = consensus_average(state)
    fg = float(np.linalg.norm(f_grad(p, mean)))
    fh = float(np.linalg.eigvalsh(f_hess(p, mean))[0])
    f_class = classify_stationary(fg, fh)
    print(
        f"at consensus mean ({', '.join(fmt(v) for v in mean)}): "
        f"||f_grad||={fmt(fg)}, min f-curvature={fmt(fh)}, "
        f"classification {f_class.kind.value}"
    )
    reports = list(consensus_distance_check(p, alpha, state))
    try:
        reports.append(mean_gradient_check(p, alpha, state))
        reports.append(mean_curvature_check(p, alpha, state))
    except LipschitzUnavailableError as exc:
        print(f"gradient/curvature bounds unavailable: {exc}")
    print(bound_report_table(reports))
    try:
        caps = step_size_caps(p, args.zeta)
        print(
            f"step-size caps (zeta={args.zeta}): smoothness {fmt(caps.cap_sqrt2)}, "
            f"spectral/confidence {fmt(caps.cap_spectral)}"
        )
        print(f"  note: {caps.note}")
    except LipschitzUnavailableError as exc:
        print(f"step-size caps unavailable: {exc}")
    if args.epsilon is not None:
        params = RegularityParams(
            epsilon=args.epsilon,
            gamma=args.gamma,
            mu=args.mu,
            delta=args.delta,
            alpha=alpha,
        )
        membership = region_membership(p, params, state)
        print(
            f"region membership: large_gradient={membership.large_gradient}, "
            f"negative_curvature={membership.negative_curvature}, "
            f"near_minimizer(partial)={membership.near_minimizer_partial}"
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dgdlab",
        description=(
            "simulate fixed step-size distributed gradient descent, with or "
            "without saddle-evading perturbations, over an agent network"
        ),
    )
    parser.add_argument("--seed", type=int, default=None, help="override master seed")
    parser.add_argument(
        "--output-dir", type=str, default=None, help="override output directory"
    )
    parser.add_argument(
        "--audit",
        action="store_true",
        help="track per-agent read sets and update-form equivalence",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute the experiment sweep")
    run_p.add_argument("config")
    run_p.add_argument(
        "--wide-columns",
        action="store_true",
        help="emit per-agent block columns in trajectory CSVs",
    )
    run_p.set_defaults(func=_cmd_run)

    val_p = sub.add_parser("validate", help="validate a config and print a report")
    val_p.add_argument("config")
    val_p.set_defaults(func=_cmd_validate)

    spec_p = sub.add_parser("spectra", help="print the mixing spectral summary")
    spec_p.add_argument("config")
    spec_p.set_defaults(func=_cmd_spectra)

    diag_p = sub.add_parser("diagnose", help="diagnostics at a stacked state")
    diag_p.add_argument("config")
    diag_p.add_argument("--at", required=True, help="state file (m*n numbers)")
    diag_p.add_argument("--zeta", type=float, default=0.1)
    diag_p.add_argument("--lipschitz-grad", type=float, default=None)
    diag_p.add_argument("--lipschitz-hess", type=float, default=None)
    diag_p.add_argument("--epsilon", type=float, default=None)
    diag_p.add_argument("--gamma", type=float, default=1e-3)
    diag_p.add_argument("--mu", type=float, default=1e-3)
    diag_p.add_argument("--delta", type=float, default=1.0)
    diag_p.set_defaults(func=_cmd_diagnose)

    esc_p = sub.add_parser(
        "escape-compare", help="compare baseline and noisy escape iterations"
    )
    esc_p.add_argument("config")
    esc_p.set_defaults(func=_cmd_escape_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
