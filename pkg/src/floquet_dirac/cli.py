"""Command-line front end.

    floquet-dirac VERB [--config FILE] [--set section.key=value ...] [--dry-run] [--workers N]

Every run prints a one-line JSON summary on stdout and writes its tables
atomically into output.directory.  Exit codes: 0 success, 1 numerical
failure, 2 precondition refusal, 64 usage error, 65 malformed config.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import bloch, dirac, flow, lattice, parallel, projection
from .config import ConfigError, RunConfig, apply_overrides, load
from .potential import FourierPotential, PotentialError, from_rows, make_canonical_honeycomb

VERBS = ("bands", "dirac", "monodromy", "gap", "wkb", "coverage", "evolve", "validate",
         "fold", "effgap", "average", "selftest")

EXIT_OK, EXIT_NUMERIC, EXIT_REFUSED, EXIT_USAGE, EXIT_CONFIG = 0, 1, 2, 64, 65

REFUSALS = (projection.PreconditionError, flow.FlowError, dirac.ForcingError, PotentialError,
            lattice.LatticeError, bloch.NoDiracPointError, bloch.DegenerateConeError)
FAILURES = (flow.AccuracyError, dirac.PropagationError, bloch.BlochError, np.linalg.LinAlgError,
            ArithmeticError)


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# output helpers


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else str(f)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def json_text(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=1) + "\n"


class Run:
    """Per-invocation context: resolved config, output directory, written files."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.out = Path(cfg.output.directory)
        self.files: list[str] = []

    def want(self, fmt: str) -> bool:
        return fmt in self.cfg.output.formats

    def write_csv(self, name: str, header, rows) -> None:
        if self.want("csv"):
            atomic_write(self.out / name, csv_text(header, rows))
            self.files.append(str(self.out / name))

    def write_json(self, name: str, obj) -> None:
        if self.want("json"):
            atomic_write(self.out / name, json_text(obj))
            self.files.append(str(self.out / name))

    # cached dependencies ------------------------------------------------

    def _cache(self, name: str) -> Path:
        return self.out / "cache" / name

    def potential(self) -> FourierPotential:
        p = self.cfg.potential
        if p.name == "canonical":
            return make_canonical_honeycomb(p.V0)
        return from_rows(p.coefficients, name="custom")

    def forcing(self) -> dirac.ForcingProfile:
        f = self.cfg.forcing
        if f.kind == "circular":
            return dirac.circular(f.R, f.omega)
        return dirac.tabulated(np.asarray(f.samples, float), f.T_per)

    def dirac_point(self, cutoff: int) -> bloch.DiracPointData:
        """find_dirac_point, cached by the potential section and cutoff."""
        key = self.cfg.section_hash("potential") + f"-nc{cutoff}"
        path = self._cache(f"dirac-{key}.json")
        basis = bloch.PlaneWaveBasis.ball(cutoff)
        if path.exists():
            c = json.loads(path.read_text())
            return bloch.DiracPointData(
                k_D=np.array(c["k_D"]), band_pair=tuple(c["band_pair"]), E_D=c["E_D"], v_D=c["v_D"],
                phi1=np.array(c["phi1_re"]) + 1j * np.array(c["phi1_im"]),
                phi2=np.array(c["phi2_re"]) + 1j * np.array(c["phi2_im"]),
                degeneracy_residual=c["degeneracy_residual"], basis=basis)
        V = self.potential()
        if not V.symmetry.honeycomb:
            raise projection.PreconditionError(f"potential lacks honeycomb symmetry: {V.symmetry.as_dict()}")
        d = bloch.find_dirac_point(V, basis)
        blob = d.as_summary()
        blob.update(phi1_re=d.phi1.real, phi1_im=d.phi1.imag, phi2_re=d.phi2.real, phi2_im=d.phi2.imag)
        atomic_write(path, json_text(blob))
        return d

    def gap(self, v_D: float, d0: float) -> dirac.GapResult | float:
        """g̃ over the disk |ξ| <= d0, cached by forcing, dirac grid, v_D and d0."""
        dc = self.cfg.dirac
        key = self.cfg.section_hash("forcing") + "-" + json.dumps(
            [dc.n_radial, dc.n_angular, repr(v_D), repr(d0)]).encode().hex()[:24]
        path = self._cache(f"gap-{key}.json")
        if path.exists():
            return json.loads(path.read_text())["g_tilde"]
        res = dirac.gap_over_disk(self.forcing(), v_D, d0, dc.n_radial, dc.n_angular)
        atomic_write(path, json_text({"g_tilde": res.g_tilde, "d0": d0, "v_D": v_D}))
        return res.g_tilde


# --------------------------------------------------------------------------
# verbs


def verb_bands(run: Run) -> dict:
    cfg = run.cfg
    V = run.potential()
    basis = bloch.PlaneWaveBasis.ball(cfg.basis.cutoff)
    table = bloch.band_path(V, bloch.high_symmetry_path(), cfg.dirac.path_samples, cfg.dirac.n_bands, basis)
    header = ["arclength", "kx", "ky"] + [f"E{i + 1}" for i in range(cfg.dirac.n_bands)]
    run.write_csv("bands.csv", header, table)
    return {"n_points": int(table.shape[0]), "basis_dim": basis.dim,
            "E_min": float(table[:, 3].min()), "E_max": float(table[:, -1].max())}


def verb_dirac(run: Run) -> dict:
    cfg = run.cfg
    d = run.dirac_point(cfg.basis.cutoff)
    V = run.potential()
    fit = bloch.fermi_velocity_cone_fit(V, d, cfg.dirac.cone_radii, cfg.dirac.cone_directions)
    out = d.as_summary()
    out.update(v_cone=fit.v_fit, cone_spread=fit.spread,
               v_relative_difference=abs(fit.v_fit - d.v_D) / d.v_D)
    run.write_json("dirac.json", out)
    return out


def verb_monodromy(run: Run) -> dict:
    cfg, sc = run.cfg, run.cfg.supercell
    d = run.dirac_point(sc.cutoff)
    V, forcing = run.potential(), run.forcing()
    k = d.k_D + sc.epsilon * np.asarray(sc.xi, float)
    M = flow.schrodinger_monodromy_bloch(V, forcing, sc.epsilon, k, d.basis, tol=1e-8)
    lam = np.linalg.eigvals(M)
    nu = projection.multiplier_phase(lam)
    order = np.lexsort((lam.imag, nu))
    lam, nu = lam[order], nu[order]
    mu = nu * sc.epsilon / forcing.T_per
    run.write_csv("monodromy_eigs.csv", ["re", "im", "mu"], np.column_stack([lam.real, lam.imag, mu]))
    run.write_json("monodromy.json", {"k": k, "epsilon": sc.epsilon, "re": M.real, "im": M.imag})
    defect = float(np.linalg.norm(M.conj().T @ M - np.eye(M.shape[0]), 2))
    return {"dim": int(M.shape[0]), "k": k.tolist(), "unitarity_defect": defect,
            "window_center": float(np.mod(d.E_D * forcing.T_per / sc.epsilon, 2 * np.pi))}


def _default_d0(run: Run, v_D: float) -> float:
    if run.cfg.dirac.d0 is not None:
        return run.cfg.dirac.d0
    f = run.cfg.forcing
    if f.kind != "circular":
        raise projection.PreconditionError("dirac.d0 must be given for tabulated forcing")
    return 0.25 * dirac.gap_exponent_at_zero(f.R, f.omega, v_D) / v_D


def verb_gap(run: Run) -> dict:
    cfg = run.cfg
    d = run.dirac_point(cfg.basis.cutoff)
    forcing = run.forcing()
    d0 = _default_d0(run, d.v_D)
    res = dirac.gap_over_disk(forcing, d.v_D, d0, cfg.dirac.n_radial, cfg.dirac.n_angular)
    arc = dirac.arc_exponent(res.mu, forcing.T_per)
    run.write_csv("gap.csv", ["xi1", "xi2", "mu", "arc"], np.column_stack([res.xi, res.mu, arc]))
    out = {"g_tilde": res.g_tilde, "d0": d0, "v_D": d.v_D, "argmin_xi": res.argmin_xi.tolist()}
    if forcing.kind == "circular":
        out["mu0_arc"] = dirac.gap_exponent_at_zero(forcing.R, forcing.omega, d.v_D)
    run.write_json("gap.json", out)
    return out


def verb_wkb(run: Run) -> dict:
    dc = run.cfg.dirac
    forcing = run.forcing()
    xs = np.asarray(dc.wkb_xi, float)
    r = np.array([dirac.wkb_residual(x, forcing, dc.wkb_v_D) for x in xs])
    slope = projection.loglog_slope(xs, r)
    run.write_csv("wkb.csv", ["xi", "residual"], np.column_stack([xs, r]))
    return {"slope": slope, "residuals": r.tolist()}


def verb_coverage(run: Run) -> dict:
    dc = run.cfg.dirac
    d0s, fr = dirac.coverage_ladder(run.forcing(), dc.coverage_v_D, dc.coverage_d0_max, dc.coverage_dr,
                                    dc.coverage_angles, dc.coverage_rungs, dc.coverage_bins)
    run.write_csv("coverage.csv", ["d0", "covered_fraction"], np.column_stack([d0s, fr]))
    hit = np.nonzero(fr >= 0.99)[0]
    return {"max_fraction": float(fr.max()), "monotone": bool(np.all(np.diff(fr) >= 0)),
            "d0_at_99": float(d0s[hit[0]]) if hit.size else None}


def _envelope(sc, L, d0) -> flow.WavePacketEnvelope:
    return flow.gaussian_envelope(L, d0, sc.envelope_width, spinor=sc.spinor)


def verb_evolve(run: Run) -> dict:
    sc = run.cfg.supercell
    d = run.dirac_point(sc.cutoff)
    V, forcing = run.potential(), run.forcing()
    eps = sc.grid_epsilon
    N = flow.supercell_size(eps, sc.grid_L)
    grid = flow.SupercellGrid(N, sc.M)
    psi = flow.build_wavepacket(_envelope(sc, sc.grid_L, sc.grid_d0), d, eps, grid)
    T = forcing.T_per / eps
    rows = [(0.0, psi.norm_l2)]
    n0 = psi.norm_l2
    for j in range(sc.horizon_periods):
        psi = flow.evolve(psi, V, forcing, eps, T, sc.dt)
        rows.append(((j + 1) * T, psi.norm_l2))
    run.write_csv("evolve.csv", ["t", "norm"], rows)
    drift = max(abs(r[1] - n0) for r in rows) / n0
    return {"n_cells": N, "grid_points": grid.n ** 2, "t_final": rows[-1][0], "norm_drift": drift}


def verb_validate(run: Run) -> dict:
    sc = run.cfg.supercell
    d = run.dirac_point(sc.cutoff)
    V, forcing = run.potential(), run.forcing()
    curve = flow.validate_effective_dynamics(V, d, forcing, sc.epsilon, _envelope(sc, sc.L, sc.envelope_d0),
                                             sc.horizon_periods, tol=sc.tol)
    run.write_csv("validate.csv", ["t", "error", "norm"], curve.table())
    return {"epsilon": sc.epsilon, "n_cells": curve.n_cells, "error": curve.error.tolist(),
            "max_error": float(curve.error.max())}


def verb_fold(run: Run) -> dict:
    cfg = run.cfg
    d = run.dirac_point(cfg.basis.cutoff)
    dc = cfg.dirac
    delta0 = 0.25 * d.v_D * dc.fold_delta if dc.fold_delta0 is None else dc.fold_delta0
    r = bloch.check_no_fold(run.potential(), d.E_D, dc.fold_delta, delta0, dc.fold_grid, d.basis)
    out = {"holds": r.holds, "worst_gap": r.worst_gap, "worst_k": r.worst_k.tolist(), "samples": r.samples,
           "delta": dc.fold_delta, "delta0": delta0}
    run.write_json("fold.json", out)
    return out


def verb_effgap(run: Run) -> dict:
    cfg, sc, scan = run.cfg, run.cfg.supercell, run.cfg.scan
    d = run.dirac_point(sc.cutoff)
    V, forcing = run.potential(), run.forcing()
    g_tilde = run.gap(d.v_D, scan.d0)
    g = 0.5 * g_tilde if scan.g is None else scan.g
    if g >= g_tilde:
        raise projection.PreconditionError(f"window g = {g} must lie inside the effective gap {g_tilde}")
    window = projection.default_window(d, forcing, sc.epsilon, g)
    rep = projection.effective_gap_scan(V, d, forcing, sc.epsilon, scan.d0, window, scan.L)
    summary = rep.summary()
    summary.update(g_tilde=g_tilde, g=g)
    run.write_json("effgap.json", {"summary": summary, "fibers": [f.as_dict() for f in rep.fibers]})
    rows = []
    for f in rep.fibers:
        for i in range(len(f.nu)):
            rows.append((f.key[0], f.key[1], f.xi[0], f.xi[1], f.nu[i], f.in_window[i], f.control[i],
                         f.bl_fraction[i], f.residual_fraction[i]))
    run.write_csv("effgap.csv", ["key_a", "key_b", "xi1", "xi2", "nu", "in_window", "control",
                                 "bl_fraction", "residual_fraction"], rows)
    return summary


def verb_average(run: Run) -> dict:
    cfg, scan = run.cfg, run.cfg.scan
    d = run.dirac_point(cfg.basis.cutoff)
    rng = np.random.default_rng(scan.seed)
    q = projection.random_trig_polynomial(scan.average_L, scan.average_radius, rng)
    cases = {"one": FourierPotential({(0, 0): 1.0}),
             "density_11": projection.bloch_density(d.phi1, d.phi1, d.basis),
             "density_12": projection.bloch_density(d.phi1, d.phi2, d.basis)}
    rows, worst = [], 0.0
    for eps in scan.eps_list:
        if abs(scan.average_L / eps - round(scan.average_L / eps)) > 1e-9:
            continue
        for name, p in cases.items():
            r = projection.poisson_average(p, q, eps)
            rows.append((name, eps, r.lhs.real, r.lhs.imag, r.rhs.real, r.rhs.imag, r.residual))
            worst = max(worst, r.residual)
    if not rows:
        raise projection.PreconditionError("no epsilon in scan.eps_list is compatible with average_L")
    if run.want("csv"):
        text = "case,epsilon,lhs_re,lhs_im,rhs_re,rhs_im,residual\n" + "".join(
            r[0] + "," + ",".join(_fmt(v) for v in r[1:]) + "\n" for r in rows)
        atomic_write(run.out / "average.csv", text)
        run.files.append(str(run.out / "average.csv"))
    return {"cases": len(rows), "max_residual": worst}


def verb_selftest(run: Run) -> dict:
    from .selftest import run_trivial_suite
    results = run_trivial_suite()
    failed = [name for name, ok, _ in results if not ok]
    run.write_json("selftest.json", [{"name": n, "ok": ok, "detail": det} for n, ok, det in results])
    if failed:
        raise SelftestFailure(failed)
    return {"passed": len(results), "failed": 0}


class SelftestFailure(RuntimeError):
    def __init__(self, failed):
        super().__init__(f"selftest failures: {', '.join(failed)}")
        self.failed = failed


HANDLERS = {
    "bands": verb_bands, "dirac": verb_dirac, "monodromy": verb_monodromy, "gap": verb_gap,
    "wkb": verb_wkb, "coverage": verb_coverage, "evolve": verb_evolve, "validate": verb_validate,
    "fold": verb_fold, "effgap": verb_effgap, "average": verb_average, "selftest": verb_selftest,
}

PLANNED_OUTPUTS = {
    "bands": ["bands.csv"], "dirac": ["dirac.json"], "monodromy": ["monodromy_eigs.csv", "monodromy.json"],
    "gap": ["gap.csv", "gap.json"], "wkb": ["wkb.csv"], "coverage": ["coverage.csv"],
    "evolve": ["evolve.csv"], "validate": ["validate.csv"], "fold": ["fold.json"],
    "effgap": ["effgap.json", "effgap.csv"], "average": ["average.csv"], "selftest": ["selftest.json"],
}


# --------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="floquet-dirac", description="Driven honeycomb Schrödinger / effective Dirac analyses.")
    p.add_argument("verb", help="one of: " + ", ".join(VERBS))
    p.add_argument("--config", "-c", help="YAML run configuration")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE")
    p.add_argument("--dry-run", action="store_true", help="validate and print the plan without computing")
    p.add_argument("--workers", type=int, help=f"worker pool size (fallback: ${parallel.ENV_VAR})")
    p.add_argument("--out", help="override output.directory")
    return p


def _emit(obj) -> None:
    print(json.dumps(_jsonable(obj), sort_keys=True), flush=True)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.verb not in VERBS:
            raise UsageError(f"unknown verb {args.verb!r}")
    except UsageError as exc:
        print(parser.format_usage().rstrip(), file=sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    verb = args.verb
    try:
        cfg = load(args.config)
        overrides = list(args.overrides)
        if args.out:
            overrides.append(f"output.directory={args.out}")
        if overrides:
            cfg = apply_overrides(cfg, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        _emit({"verb": verb, "status": "config_error", "error": str(exc)})
        return EXIT_CONFIG

    if args.workers is not None:
        if args.workers < 1:
            print("error: --workers must be positive", file=sys.stderr)
            return EXIT_USAGE
        parallel.set_workers(args.workers)

    run = Run(cfg)
    if args.dry_run:
        _emit({"verb": verb, "status": "dry_run", "workers": parallel.get_workers(),
               "outputs": [str(run.out / n) for n in PLANNED_OUTPUTS[verb]], "config": cfg.to_dict()})
        return EXIT_OK

    t0 = time.perf_counter()
    try:
        summary = HANDLERS[verb](run)
    except REFUSALS as exc:
        print(f"refused: {exc}", file=sys.stderr)
        _emit({"verb": verb, "status": "refused", "error": str(exc)})
        return EXIT_REFUSED
    except (SelftestFailure, *FAILURES) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        _emit({"verb": verb, "status": "failed", "error": str(exc)})
        return EXIT_NUMERIC
    summary = dict(summary)
    summary.update(verb=verb, status="ok", files=run.files,
                   elapsed_s=round(time.perf_counter() - t0, 3))
    _emit(summary)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
