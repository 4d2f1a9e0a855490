"""Command-line front end: config parsing, pipeline runs, report emission.

Commands: field, correctors, experiment, sweep, report. Every output is a
pure function of (config file, master seed); the parsed config is archived
next to the outputs. Exit codes: 0 success, 2 validation error, 3 solver
failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import shutil
import sys

import numpy as np

from . import runtime
from .grid import TorusGrid
from .grid.hgf1 import write_field
from .ensemble import (CovarianceSpec, LipschitzMapSpec,
                       sample_coefficient_field, deterministic_field,
                       COV_KINDS)
from .cellsolve import default_spec_for
from .correctors import (solve_first_order, solve_second_order,
                         check_sigma_divergence, gauge_residual,
                         potential_divergence_gap, compute_flux_correction,
                         solve_potential, estimate_rstar, dump_correctors,
                         equationpsi_residuals)
from .experiments import (ExperimentConfig, sweep, write_sweep_csv,
                          write_summary_json, symmetric_a1_study,
                          corrector_growth_study, rstar_tail_study,
                          realization_seed, format_sig)
from .errors import HomoglabError, ValidationError, NoConvergence

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3

DETERMINISTIC_KINDS = ("constant", "laminate", "checkerboard")

_KNOWN_KEYS = {
    "grid": {"d", "n", "l"},
    "ensemble": {"kind", "variance", "lambda", "symmetric", "skew_amplitude",
                 "ell", "diag", "axis", "alpha1", "alpha2", "period",
                 "a1", "a2"},
    "solver": {"rel_tol", "max_iter"},
    "experiment": {"ells", "seeds_per_ell", "master_seed", "ball_radius",
                   "f_radius", "min_ell_factor", "rstar_delta", "ball_tol",
                   "studies", "a1_seeds", "growth_seeds", "tail_seeds",
                   "eps_scale", "growth_radii"},
}


def _parse_length(token: str, L: float) -> float:
    """Length value: plain float, 'p/q' fraction of L, or 'L/q'."""
    token = token.strip()
    if token.upper().startswith("L/"):
        return L / float(token[2:])
    if "/" in token:
        num, den = token.split("/", 1)
        return L * float(num) / float(den)
    return float(token)


def load_config(path) -> dict:
    """Parse and validate the INI config; unknown sections or keys reject."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(path)
    if not read:
        raise ValidationError(f"config file not found: {path}")
    for section in parser.sections():
        if section not in _KNOWN_KEYS:
            raise ValidationError(f"unknown config section [{section}]")
        for key in parser[section]:
            if key not in _KNOWN_KEYS[section]:
                raise ValidationError(
                    f"unknown key {key!r} in section [{section}]")

    def get(section, key, fallback):
        if parser.has_option(section, key):
            return parser.get(section, key)
        return fallback

    cfg = {}
    cfg["d"] = int(get("grid", "d", 3))
    cfg["n"] = int(get("grid", "n", 64))
    cfg["L"] = float(get("grid", "l", 1.0))
    L = cfg["L"]
    cfg["kind"] = get("ensemble", "kind", "gaussian_bump")
    if cfg["kind"] not in COV_KINDS + DETERMINISTIC_KINDS:
        raise ValidationError(
            f"ensemble kind must be one of {COV_KINDS + DETERMINISTIC_KINDS},"
            f" got {cfg['kind']!r}")
    cfg["variance"] = float(get("ensemble", "variance", 1.0))
    cfg["lam"] = float(get("ensemble", "lambda", 0.2))
    cfg["symmetric"] = parser.getboolean("ensemble", "symmetric",
                                         fallback=True)
    cfg["skew_amplitude"] = float(get("ensemble", "skew_amplitude", 0.0))
    ell = get("ensemble", "ell", None)
    cfg["ell"] = _parse_length(ell, L) if ell is not None else None
    cfg["diag"] = [float(t) for t in
                   get("ensemble", "diag", "1").split(",")]
    cfg["axis"] = int(get("ensemble", "axis", 0))
    cfg["alpha1"] = float(get("ensemble", "alpha1", 1.0))
    cfg["alpha2"] = float(get("ensemble", "alpha2", 0.5))
    period = get("ensemble", "period", None)
    cfg["period"] = _parse_length(period, L) if period is not None else None
    cfg["a1"] = float(get("ensemble", "a1", 1.0))
    cfg["a2"] = float(get("ensemble", "a2", 4.0))
    cfg["rel_tol"] = float(get("solver", "rel_tol", 1e-9))
    cfg["max_iter"] = int(get("solver", "max_iter", 1000))
    ells = get("experiment", "ells", None)
    cfg["ells"] = tuple(_parse_length(t, L) for t in ells.split(",")) \
        if ells is not None else ()
    cfg["seeds_per_ell"] = int(get("experiment", "seeds_per_ell", 8))
    cfg["master_seed"] = int(get("experiment", "master_seed", 0))
    ball = get("experiment", "ball_radius", None)
    cfg["ball_radius"] = _parse_length(ball, L) if ball is not None else None
    frad = get("experiment", "f_radius", None)
    cfg["f_radius"] = _parse_length(frad, L) if frad is not None else None
    cfg["min_ell_factor"] = float(get("experiment", "min_ell_factor", 6.0))
    cfg["rstar_delta"] = float(get("experiment", "rstar_delta", 1.0 / 16.0))
    cfg["ball_tol"] = float(get("experiment", "ball_tol", 1e-6))
    studies = get("experiment", "studies", "")
    cfg["studies"] = tuple(s.strip() for s in studies.split(",") if s.strip())
    cfg["a1_seeds"] = int(get("experiment", "a1_seeds", 32))
    cfg["growth_seeds"] = int(get("experiment", "growth_seeds", 16))
    cfg["tail_seeds"] = int(get("experiment", "tail_seeds", 64))
    eps = get("experiment", "eps_scale", None)
    cfg["eps_scale"] = float(eps) if eps is not None else None
    radii = get("experiment", "growth_radii", None)
    cfg["growth_radii"] = [_parse_length(t, L) for t in radii.split(",")] \
        if radii is not None else None
    return cfg


def _experiment_config(cfg: dict, master_seed: int) -> ExperimentConfig:
    ells = cfg["ells"]
    if not ells and cfg["ell"] is not None:
        ells = (cfg["ell"],)
    return ExperimentConfig(
        d=cfg["d"], n=cfg["n"], L=cfg["L"], lam=cfg["lam"],
        symmetric=cfg["symmetric"], skew_amplitude=cfg["skew_amplitude"],
        cov_kind=cfg["kind"] if cfg["kind"] in COV_KINDS else "gaussian_bump",
        variance=cfg["variance"], ells=ells,
        seeds_per_ell=cfg["seeds_per_ell"], master_seed=master_seed,
        ball_radius=cfg["ball_radius"], f_radius=cfg["f_radius"],
        rel_tol=cfg["rel_tol"], max_iter=cfg["max_iter"],
        min_ell_factor=cfg["min_ell_factor"],
        rstar_delta=cfg["rstar_delta"], ball_tol=cfg["ball_tol"])


def _build_field(cfg: dict, seed: int):
    grid = TorusGrid(cfg["d"], cfg["n"], cfg["L"])
    kind = cfg["kind"]
    if kind == "constant":
        diag = cfg["diag"]
        if len(diag) == 1:
            diag = diag * cfg["d"]
        return deterministic_field(grid, "constant", matrix=np.diag(diag))
    if kind == "laminate":
        return deterministic_field(grid, "laminate", axis=cfg["axis"],
                                   alpha1=cfg["alpha1"], alpha2=cfg["alpha2"],
                                   period=cfg["period"])
    if kind == "checkerboard":
        period = cfg["period"] if cfg["period"] is not None else cfg["L"] / 2
        return deterministic_field(grid, "checkerboard", a1=cfg["a1"],
                                   a2=cfg["a2"], period=period)
    if cfg["ell"] is None:
        raise ValidationError(
            "Gaussian ensembles need ensemble.ell (or experiment.ells)")
    cov = CovarianceSpec(kind, cfg["ell"], cfg["variance"])
    mspec = LipschitzMapSpec(cfg["lam"], cfg["symmetric"],
                             cfg["skew_amplitude"])
    return sample_coefficient_field(grid, cov, mspec, seed)


def _default_eps_scale(cfg: dict, a) -> float:
    if cfg["eps_scale"] is not None:
        return cfg["eps_scale"]
    prov = a.provenance
    if "cov" in prov:
        return prov["cov"]["ell"] / cfg["L"]
    if prov.get("kind") in ("laminate", "checkerboard"):
        return prov["period"] / cfg["L"]
    return 1.0


def _json_ready(obj):
    if isinstance(obj, dict):
        return {str(k): _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_json_ready(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(_json_ready(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _archive_config(config_path, out_dir) -> None:
    target = os.path.join(out_dir, "config.ini")
    if os.path.abspath(str(config_path)) != os.path.abspath(target):
        shutil.copyfile(config_path, target)


# -- commands --------------------------------------------------------------------

def cmd_field(cfg: dict, args) -> int:
    a = _build_field(cfg, args.seed)
    out = args.out
    os.makedirs(out, exist_ok=True)
    write_field(os.path.join(out, "coefficient.hgf1"), a.a)
    report = {
        "lam": a.lam,
        "symmetric": a.symmetric,
        "rescale_events": a.rescale_events,
        "min_sym_eig": a.ellipticity.min_sym_eig,
        "max_op_norm": a.ellipticity.max_op_norm,
        "violation_count": a.ellipticity.violation_count,
        "provenance": a.provenance,
        "seed": args.seed,
    }
    _write_json(os.path.join(out, "field_report.json"), report)
    print(f"wrote {out}/coefficient.hgf1 "
          f"(min_sym_eig={format_sig(report['min_sym_eig'])}, "
          f"max_op_norm={format_sig(report['max_op_norm'])})")
    return EXIT_OK


def cmd_correctors(cfg: dict, args) -> int:
    a = _build_field(cfg, args.seed)
    spec = default_spec_for(a, rel_tol=cfg["rel_tol"],
                            max_iter=cfg["max_iter"])
    foc = solve_first_order(a, spec)
    eps = _default_eps_scale(cfg, a)
    soc = solve_second_order(a, foc, eps, spec, with_Psi=True)
    out = args.out
    os.makedirs(out, exist_ok=True)
    if args.dump_fields:
        write_field(os.path.join(out, "coefficient.hgf1"), a.a)
    manifest_path = dump_correctors(out, foc, soc)

    sigma_gaps, sigma_kernel = check_sigma_divergence(a, foc)
    qt_norms = np.empty((a.a.grid.d, a.a.grid.d))
    vol = a.a.grid.cell_volume
    for i in range(a.a.grid.d):
        qt = foc.flux_correction(i)
        for k in range(a.a.grid.d):
            qt_norms[i, k] = np.sqrt(np.sum(qt[k] ** 2) * vol)
    # global scale: per-column ratios blow up on components that are
    # empty except for Nyquist product residue (rough coefficients)
    qt_scale = max(float(np.max(qt_norms)), 1e-300)
    rel_sigma = float(np.max(sigma_gaps) / qt_scale)
    rel_kernel = float(np.max(sigma_kernel) / qt_scale)
    raw_flux = compute_flux_correction(a, foc, soc.psi)
    raw_pot = solve_potential(raw_flux)
    rstar = estimate_rstar(foc, cfg["rstar_delta"])
    weak = equationpsi_residuals(a, foc, soc.psi, count=4, seed=0)
    diagnostics = {
        "sigma_divergence_max_rel": rel_sigma,
        "sigma_kernel_content_rel": rel_kernel,
        "gauge_residual_Psi": gauge_residual(soc.Psi, soc.q1),
        "potential_gap_Psi_vs_q1": potential_divergence_gap(soc.Psi, soc.q1),
        "gauge_residual_raw": gauge_residual(raw_pot, raw_flux),
        "potential_gap_raw": potential_divergence_gap(raw_pot, raw_flux),
        "equationpsi_weak_residual_max": float(np.max(weak)),
        "r_star": rstar.r_star,
        "r_star_capped": rstar.capped,
    }
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    manifest["diagnostics"] = _json_ready(diagnostics)
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote corrector bundle to {out} "
          f"(r_star={format_sig(rstar.r_star)}, "
          f"sigma_div_rel={format_sig(rel_sigma)})")
    return EXIT_OK


def cmd_experiment(cfg: dict, args) -> int:
    out = args.out
    os.makedirs(out, exist_ok=True)
    studies = cfg["studies"] or ("a1",)
    xcfg = _experiment_config(cfg, args.seed)
    ran = []
    if "a1" in studies:
        rep = symmetric_a1_study(xcfg, seeds=cfg["a1_seeds"])
        _write_json(os.path.join(out, "a1_study.json"), rep)
        ran.append(f"a1 (max_z={format_sig(rep['max_z'])}, "
                   f"pass={rep['pass_z']})")
    if "growth" in studies:
        res = corrector_growth_study(xcfg, seeds=cfg["growth_seeds"],
                                     radii=cfg["growth_radii"])
        payload = {
            "radii": res.radii, "psi_means": res.psi_means,
            "psi_stderrs": res.psi_stderrs, "Psi_means": res.Psi_means,
            "Psi_stderrs": res.Psi_stderrs, "phi_means": res.phi_means,
            "phi_stderrs": res.phi_stderrs, "seeds": res.seeds,
            "ell": res.ell, "outside_theorem": res.outside_theorem,
            "all_zero": res.all_zero,
            "fits": {k: {"slope": f.slope, "stderr": f.stderr,
                         "intercept": f.intercept}
                     for k, f in res.fits.items()},
        }
        _write_json(os.path.join(out, "growth_study.json"), payload)
        slopes = ", ".join(f"{k}={format_sig(f.slope)}"
                           for k, f in res.fits.items())
        ran.append(f"growth ({slopes or 'all zero'})")
    if "rstar" in studies:
        rep = rstar_tail_study(xcfg, seeds=cfg["tail_seeds"])
        _write_json(os.path.join(out, "rstar_tail.json"), rep)
        ran.append(f"rstar (tail_quarter={format_sig(rep['tail_quarter'])}, "
                   f"concave={rep['concave_decreasing']})")
    unknown = set(studies) - {"a1", "growth", "rstar"}
    if unknown:
        raise ValidationError(f"unknown studies: {sorted(unknown)}")
    print("ran studies: " + "; ".join(ran))
    return EXIT_OK


def cmd_sweep(cfg: dict, args) -> int:
    xcfg = _experiment_config(cfg, args.seed)
    result = sweep(xcfg, dry_run=args.dry_run)
    out = args.out
    os.makedirs(out, exist_ok=True)
    write_sweep_csv(result, os.path.join(out, "sweep.csv"))
    write_summary_json(result, os.path.join(out, "summary.json"))
    if args.dump_fields and not args.dry_run:
        fields_dir = os.path.join(out, "fields")
        os.makedirs(fields_dir, exist_ok=True)
        for ell_idx, ell in enumerate(xcfg.ells):
            cov = CovarianceSpec(xcfg.cov_kind, ell, xcfg.variance)
            for m in range(xcfg.seeds_per_ell):
                seed = realization_seed(xcfg.master_seed, ell_idx, m)
                a = sample_coefficient_field(xcfg.grid(), cov,
                                             xcfg.map_spec(), seed)
                write_field(os.path.join(
                    fields_dir, f"coefficient_{ell_idx}_{m}.hgf1"), a.a)
    successes = len(result.rows) - result.excluded
    if successes == 0:
        print("no successful realizations", file=sys.stderr)
        return EXIT_VALIDATION
    print(f"wrote {out}/sweep.csv ({successes} rows ok, "
          f"{result.excluded} excluded)")
    for kind, fit in result.exponents.items():
        print(f"  {kind}: slope {format_sig(fit.slope)} "
              f"+- {format_sig(fit.stderr)}")
    return EXIT_OK


_REPORT_TARGETS = {
    # d = 3, integrable covariance (beta = 0) predictions
    "err_Hm1_ball": ("H^-1(B) error", 1.5),
    "err_H1_twoscale2": ("H^1 two-scale error", 1.5),
    "err_L2_ball": ("L^2(B) first-order error", 1.0),
    "err_L2_exp1": ("L^2(B) expansion-1 error", 1.0),
}


def cmd_report(args) -> int:
    with open(args.summary) as fh:
        summary = json.load(fh)
    exponents = summary.get("exponents", {})
    if not exponents:
        print("no successful realizations", file=sys.stderr)
        return EXIT_VALIDATION
    d = summary["config"]["d"]
    print(f"exponent fits (d = {d}, ells = "
          f"{summary['config']['ells']}, "
          f"{summary['config']['seeds_per_ell']} seeds/point)")
    if summary.get("outside_theorem_hypotheses"):
        print("  [outside theorem hypotheses: d < 3 has no prediction "
              "for second-order quantities]")
    header = f"  {'quantity':28s} {'fitted':>10s} {'stderr':>10s} {'target':>7s}"
    print(header)
    for kind, (label, target) in _REPORT_TARGETS.items():
        if kind not in exponents:
            continue
        fit = exponents[kind]
        tgt = f"{target:.1f}" if d >= 3 else "n/a"
        print(f"  {label:28s} {fit['slope']:10.4f} {fit['stderr']:10.4f} "
              f"{tgt:>7s}")
    if summary.get("excluded", 0):
        print(f"  excluded rows: {summary['excluded']}")
    return EXIT_OK


# -- entry point -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="homoglab",
        description="Corrector pipelines and error studies for elliptic "
                    "homogenization on the periodic torus.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="INI config file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="master seed (overrides config)")
        p.add_argument("--threads", type=int, default=None,
                       help="FFT worker threads (default HOMOGLAB_THREADS)")
        p.add_argument("--dump-fields", action="store_true",
                       help="also write sampled coefficient fields as HGF1")
        p.add_argument("--dry-run", action="store_true",
                       help="skip solves; exercise plumbing with synthetic "
                            "errors (sweep only)")

    common(sub.add_parser("field", help="sample one coefficient field"))
    common(sub.add_parser("correctors", help="solve the corrector bundle"))
    common(sub.add_parser("experiment", help="run configured studies"))
    common(sub.add_parser("sweep", help="error sweep over correlation lengths"))
    rep = sub.add_parser("report", help="print exponent table from summary.json")
    rep.add_argument("summary", help="path to summary.json")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            return cmd_report(args)
        if args.threads is not None:
            runtime.set_workers(args.threads)
        else:
            runtime.set_workers(runtime.workers_from_env())
        cfg = load_config(args.config)
        if args.seed is None:
            args.seed = cfg["master_seed"]
        if args.seed < 0:
            raise ValidationError("seed must be >= 0")
        os.makedirs(args.out, exist_ok=True)
        _archive_config(args.config, args.out)
        if args.command == "field":
            return cmd_field(cfg, args)
        if args.command == "correctors":
            return cmd_correctors(cfg, args)
        if args.command == "experiment":
            return cmd_experiment(cfg, args)
        if args.command == "sweep":
            return cmd_sweep(cfg, args)
        raise ValidationError(f"unknown command {args.command!r}")
    except NoConvergence as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except HomoglabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
