"""Command-line interface.

Subcommands::

    quadinfo synth   --config CFG --out DIR      write per-(eps, mode) field files
    quadinfo anchor  --config CFG --out DIR      write the calibration file
    quadinfo analyze FIELD [--calibration CAL | --config CFG]
                                                 one results row on stdout
    quadinfo sweep   --config CFG --out DIR      results CSV + plot series
    quadinfo report  --config CFG --out DIR      robustness comparison report

``--config`` takes either a path to a QCFG file or a built-in preset name
(``reference``, ``decoupled``).  Exit status is nonzero iff the run failed
(bad inputs, or more per-point analysis failures than the 10% budget).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import config as config_mod
from . import pipeline, results
from .errors import QuadinfoError
from .fieldfile import read_field_file, write_field_file

log = logging.getLogger("quadinfo")


def _add_common(parser: argparse.ArgumentParser, needs_config: bool):
    parser.add_argument("--config", required=needs_config,
                        help="QCFG file path or preset name")
    parser.add_argument("--out", default=".",
                        help="output directory (default: current)")
    parser.add_argument("--nb", type=int, default=None,
                        help="bins per axis (overrides config)")
    parser.add_argument("--weighting", choices=("intensity", "unit"),
                        default=None, help="histogram weighting mode")
    parser.add_argument("--eps-star", type=float, default=None,
                        dest="eps_star", help="anchor detuning")
    parser.add_argument("--gauge", choices=("per-eps", "anchor"),
                        default=None, help="orientation gauge mode")
    parser.add_argument("--seed", type=int, default=None,
                        help="reserved; the pipeline is deterministic")
    parser.add_argument("--quiet", action="store_true",
                        help="suppress progress output")


def _overrides(args) -> dict:
    return {
        "win.nb": args.nb,
        "hist.weighting": args.weighting,
        "anchor.eps_star": args.eps_star,
        "gauge.mode": args.gauge,
        "run.seed": args.seed,
    }


def _load(args) -> pipeline.RunConfig:
    return config_mod.load_config(args.config, overrides=_overrides(args))


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_synth(args) -> int:
    cfg = _load(args)
    if cfg.model is None or cfg.basis1 is None or cfg.basis2 is None:
        raise QuadinfoError("synth needs a detuning model and two basis specs")
    out = _outdir(args)
    from .field_synth import synth_sweep

    _, fields = synth_sweep(cfg.model, cfg.basis1, cfg.basis2,
                            nx=cfg.nx, ny=cfg.ny)
    count = 0
    for k, fld in enumerate(fields):
        idx = k // 2
        path = out / f"field_e{idx:03d}_{fld.mode}.qfld"
        write_field_file(fld, path)
        count += 1
    log.info("wrote %d field files to %s", count, out)
    return 0


def cmd_anchor(args) -> int:
    cfg = _load(args)
    result_path = _outdir(args) / "calibration.qcal"
    # Run only the calibration part of the pipeline.
    source = pipeline._make_source(cfg)
    eps_star = pipeline._resolve_eps_star(cfg, source)
    import numpy as np

    anchor_idx = int(np.argmin(np.abs(source.eps_values - eps_star)))
    anchor_eps = float(source.eps_values[anchor_idx])
    theta_anchor, flipped, window = pipeline._anchor_frame(
        source.group(anchor_eps), cfg.q_lo, cfg.q_hi, cfg.padding_frac,
        cfg.weighting,
    )
    results.write_calibration(theta_anchor, window, eps_star, anchor_eps,
                              cfg.nb, result_path, anchor_flipped=flipped)
    log.info("calibration written to %s", result_path)
    return 0


def cmd_analyze(args) -> int:
    fld = read_field_file(args.field)
    nb = args.nb
    weighting = args.weighting or "intensity"
    gauge_mode = args.gauge or "per-eps"
    if args.calibration:
        cal = results.read_calibration(args.calibration)
        window = cal.window
        theta_anchor = cal.theta_anchor
        flipped = cal.anchor_flipped
        if nb is None:
            nb = cal.nb
    elif args.config:
        cfg = _load(args)
        source = pipeline._make_source(cfg)
        eps_star = pipeline._resolve_eps_star(cfg, source)
        import numpy as np

        anchor_idx = int(np.argmin(np.abs(source.eps_values - eps_star)))
        anchor_eps = float(source.eps_values[anchor_idx])
        theta_anchor, flipped, window = pipeline._anchor_frame(
            source.group(anchor_eps), cfg.q_lo, cfg.q_hi, cfg.padding_frac,
            cfg.weighting,
        )
        weighting = args.weighting or cfg.weighting
        gauge_mode = args.gauge or cfg.gauge_mode
        if nb is None:
            nb = cfg.nb
    else:
        raise QuadinfoError("analyze needs --calibration or --config")
    if nb is None:
        nb = 500
    outcome = pipeline.analyze_field(
        fld, window, nb=nb, weighting=weighting, gauge_mode=gauge_mode,
        theta_anchor=theta_anchor, anchor_flipped=flipped,
    )
    rec = pipeline.SweepRecord(
        eps=fld.eps if fld.eps is not None else float("nan"),
        mode=fld.mode or "field",
        theta=outcome.theta_used,
        lam=fld.lam,
        measures=outcome.measures,
        clamped_pct=outcome.clamped_pct,
        isotropic_fallback=outcome.isotropic_fallback,
    )
    print(results.CSV_HEADER)
    print(results.format_record(rec))
    return 0


def cmd_sweep(args) -> int:
    cfg = _load(args)
    out = _outdir(args)
    result = pipeline.run_sweep(cfg)
    csv_path = results.write_results_csv(result, out / "results.csv")
    series = results.emit_plot_data(result, out / "series")
    log.info("results in %s plus %d series files", csv_path, len(series))
    return 0


def cmd_report(args) -> int:
    cfg = _load(args)
    out = _outdir(args)
    report = pipeline.robustness_suite(cfg)
    path = results.write_robustness_report(report, out / "robustness.csv")
    log.info("robustness report in %s", path)
    for e in report.entries:
        log.info("nb=%d weighting=%s %s: argmax=%s prominence=%.4g",
                 e.nb, e.weighting, e.mode, e.argmax_mi_eps, e.prominence)
    ok = (report.argmax_stable_across_nb and report.weighting_shares_argmax
          and report.weighted_prominence_ge_unit)
    log.info("argmax stable across NB: %s", report.argmax_stable_across_nb)
    log.info("weightings share argmax: %s", report.weighting_shares_argmax)
    log.info("weighted prominence >= unit: %s",
             report.weighted_prominence_ge_unit)
    if not ok:
        log.warning("robustness checks failed; see %s", path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quadinfo",
        description="Quadrature-plane information analysis of coupled-mode "
                    "fields",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize and write field files")
    _add_common(p, needs_config=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("anchor", help="calibrate the gauge anchor and window")
    _add_common(p, needs_config=True)
    p.set_defaults(func=cmd_anchor)

    p = sub.add_parser("analyze", help="analyze one field file")
    p.add_argument("field", help="path to a .qfld field file")
    p.add_argument("--calibration", default=None,
                   help="calibration file from 'quadinfo anchor'")
    _add_common(p, needs_config=False)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", help="run the full sweep")
    _add_common(p, needs_config=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="robustness comparison over NB/weighting")
    _add_common(p, needs_config=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except QuadinfoError as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
