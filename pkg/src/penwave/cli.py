"""Command-line entry point.

Subcommands: ``transform`` (batch coordinate transforms), ``check-null``
(null-condition classification of form files), ``compat`` (compatibility jets
and the boundary-vanishing report), ``simulate`` (the exterior evolution),
and ``verify`` (named identity/estimate certificates).

Exit codes are fixed for scriptability:

    0  success
    2  parse error (config, form file, input CSV)
    3  domain/config error
    4  stability failure
    5  nonfinite blow-up
    6  coverage error
    7  a requested verdict failed

Every run writes a manifest (structured text) listing the resolved
configuration and all output paths; the manifest is written last via an
atomic rename, so its presence certifies a complete run.
"""

from __future__ import annotations

import argparse
import configparser
import math
import os
import sys
import time
from fractions import Fraction

import numpy as np

from . import __version__, analysis, compat, cylinder, geometry, nullform, solver
from .errors import (
    ConfigError,
    CoverageError,
    DomainError,
    FitError,
    MaskError,
    NaNError,
    OrderError,
    ParseError,
    PenwaveError,
    RangeError,
    StabilityError,
)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_DOMAIN = 3
EXIT_STABILITY = 4
EXIT_NAN = 5
EXIT_COVERAGE = 6
EXIT_VERDICT = 7

_EXIT_BY_ERROR = (
    (ParseError, EXIT_PARSE),
    (StabilityError, EXIT_STABILITY),
    (NaNError, EXIT_NAN),
    (CoverageError, EXIT_COVERAGE),
    # all remaining semantic errors map to the domain code
    ((ConfigError, DomainError, OrderError, RangeError, FitError, MaskError), EXIT_DOMAIN),
)


def _exit_code(exc: PenwaveError) -> int:
    for types, code in _EXIT_BY_ERROR:
        if isinstance(exc, types):
            return code
    return EXIT_DOMAIN


# ---------------------------------------------------------------------------
# configuration


_SCHEMA = {
    "problem": {"nonlinearity", "epsilon", "r_b"},
    "grid": {"dr", "cfl", "t_max", "r_max", "n_t", "n_r"},
    "data": {"center", "width", "f_amp", "g_amp"},
    "output": {"dir", "snapshot_every", "frame_decimation"},
    "verify": {"sigma", "seed", "require_null", "order", "boundary_order", "tol"},
}


def read_config(path) -> configparser.ConfigParser:
    """Parse an INI config, rejecting unknown sections or keys."""
    parser = configparser.ConfigParser()
    try:
        loaded = parser.read(path)
    except configparser.Error as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not loaded:
        raise ParseError(f"config file not found: {path}")
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ParseError(f"{path}: unknown section [{section}]")
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                raise ParseError(f"{path}: unknown key '{key}' in [{section}]")
    return parser


def _getfloat(cfg, section, key, default):
    try:
        return cfg.getfloat(section, key, fallback=default)
    except ValueError as exc:
        raise ParseError(f"[{section}] {key}: {exc}") from exc


def solver_config_from(cfg: configparser.ConfigParser) -> solver.SolverConfig:
    name = cfg.get("problem", "nonlinearity", fallback="zero")
    if name not in compat.BUILTIN_NONLINEARITIES:
        raise ParseError(
            f"unknown nonlinearity '{name}'; "
            f"choose from {sorted(compat.BUILTIN_NONLINEARITIES)}"
        )
    return solver.SolverConfig(
        obs=geometry.ObstacleSpec(_getfloat(cfg, "problem", "r_b", 0.2)),
        nonlinearity=compat.BUILTIN_NONLINEARITIES[name],
        data=solver.DataSpec(
            center=_getfloat(cfg, "data", "center", 1.5),
            width=_getfloat(cfg, "data", "width", 0.25),
            f_amp=_getfloat(cfg, "data", "f_amp", 0.0),
            g_amp=_getfloat(cfg, "data", "g_amp", 1.0),
        ),
        epsilon=_getfloat(cfg, "problem", "epsilon", 0.01),
        dr=_getfloat(cfg, "grid", "dr", 5e-3),
        cfl=_getfloat(cfg, "grid", "cfl", 0.45),
        t_max=_getfloat(cfg, "grid", "t_max", 80.0),
        r_max=_getfloat(cfg, "grid", "r_max", 90.0),
        frame_decimation=int(_getfloat(cfg, "output", "frame_decimation", 1)),
    )


def _empty_config() -> configparser.ConfigParser:
    return configparser.ConfigParser()


# ---------------------------------------------------------------------------
# manifest


class Manifest:
    """Run record: resolved config, outputs, verdicts; atomic final write."""

    def __init__(self, command: str):
        self.command = command
        self.started = time.time()
        self.outputs: list[str] = []
        self.verdicts: dict[str, str] = {}
        self.config: dict[str, str] = {}

    def add_output(self, path) -> str:
        self.outputs.append(str(path))
        return str(path)

    def write(self, outdir) -> str:
        doc = configparser.ConfigParser()
        doc["manifest"] = {
            "command": self.command,
            "version": __version__,
            "wall_clock_s": f"{time.time() - self.started:.3f}",
        }
        doc["config"] = self.config
        doc["outputs"] = {f"path_{i}": p for i, p in enumerate(self.outputs)}
        doc["verdicts"] = self.verdicts
        os.makedirs(outdir, exist_ok=True)
        final = os.path.join(outdir, "manifest.ini")
        tmp = final + ".tmp"
        with open(tmp, "w") as fh:
            doc.write(fh)
        os.replace(tmp, final)
        return final


# ---------------------------------------------------------------------------
# transform


def cmd_transform(args) -> int:
    rows = []
    try:
        data = np.loadtxt(args.input, delimiter=",", ndmin=2)
    except Exception as exc:
        raise ParseError(f"{args.input}: {exc}") from exc
    if data.shape[1] < 2:
        raise ParseError(f"{args.input}: need two columns")
    failures = 0
    for i, (x, y) in enumerate(data[:, :2]):
        try:
            if args.backward:
                mk = geometry.to_minkowski(geometry.EinsteinEvent(T=x, R=y))
                rows.append((x, y, mk.t, mk.r))
            else:
                res = geometry.to_einstein(geometry.MinkowskiEvent(t=x, r=y))
                rows.append((x, y, res.einstein.T, res.einstein.R, res.omega_factor))
        except PenwaveError as exc:
            failures += 1
            print(f"row {i}: {exc}", file=sys.stderr)
            rows.append((x, y) + (math.nan,) * (2 if args.backward else 3))
    manifest = Manifest("transform")
    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, "transformed.csv")
    header = "T,R,t,r" if args.backward else "t,r,T,R,omega"
    np.savetxt(out_path, np.asarray(rows), delimiter=",", header=header, comments="")
    manifest.add_output(out_path)
    manifest.verdicts["rows_failed"] = str(failures)
    manifest.write(args.out)
    return EXIT_OK if failures == 0 else EXIT_DOMAIN


# ---------------------------------------------------------------------------
# check-null


def parse_form_file(path) -> nullform.QuadraticFormSpec | nullform.CubicFormSpec:
    """Read the documented tuple format.

    The first non-comment line is a header ``quadratic N`` or ``cubic N``
    (N = number of components); each further line holds five indices and a
    value: ``I J K j k value`` for quadratic entries s[I,J,K,j,k] or
    ``I J i j k value`` for cubic entries k[I,J,i,j,k].  Values may be
    integers, fractions ``a/b`` (kept exact), or floats.
    """
    kind = None
    n = 0
    entries = []
    exact = True
    with open(path) as fh:
        lines = fh.readlines()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if kind is None:
            parts = line.split()
            if len(parts) != 2 or parts[0] not in ("quadratic", "cubic"):
                raise ParseError(
                    "expected header 'quadratic N' or 'cubic N'", line=lineno
                )
            kind = parts[0]
            try:
                n = int(parts[1])
            except ValueError as exc:
                raise ParseError(f"bad component count: {parts[1]}", line=lineno) from exc
            if n < 1:
                raise ParseError("component count must be positive", line=lineno)
            continue
        parts = line.split()
        if len(parts) != 6:
            raise ParseError(f"expected 6 fields, got {len(parts)}", line=lineno)
        try:
            idx = [int(p) for p in parts[:5]]
        except ValueError as exc:
            raise ParseError(f"bad index in '{line}'", line=lineno) from exc
        val_str = parts[5]
        try:
            value = Fraction(val_str)
        except ValueError:
            try:
                value = float(val_str)
                exact = False
            except ValueError as exc:
                raise ParseError(f"bad value '{val_str}'", line=lineno) from exc
        comp_bound = (n, n, n) if kind == "quadratic" else (n, n)
        deriv_bound = (4, 4) if kind == "quadratic" else (4, 4, 4)
        bounds = comp_bound + deriv_bound
        for k, (i, b) in enumerate(zip(idx, bounds)):
            if not 0 <= i < b:
                raise ParseError(f"index {k} out of range (0..{b - 1})", line=lineno)
        entries.append((idx, value))
    if kind is None:
        raise ParseError("empty form file", line=len(lines) or 1)
    dtype = object if exact else float
    if kind == "quadratic":
        s = np.zeros((n, n, n, 4, 4), dtype=dtype)
        for idx, value in entries:
            s[tuple(idx)] = value if exact else float(value)
        return nullform.QuadraticFormSpec(s=s)
    karr = np.zeros((n, n, 4, 4, 4), dtype=dtype)
    for idx, value in entries:
        karr[tuple(idx)] = value if exact else float(value)
    return nullform.CubicFormSpec(k=karr)


_WITNESS_CANDIDATES = [
    np.array([s, *w])
    for s in (1.0, -1.0)
    for w in ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0),
              (0.6, 0.8, 0.0), (0.0, 0.6, 0.8))
]


def _cone_witness(form) -> tuple[np.ndarray, float]:
    """A light-cone direction where the symbol is largest (deterministic)."""
    best_xi, best = _WITNESS_CANDIDATES[0], 0.0
    for xi in _WITNESS_CANDIDATES:
        if isinstance(form, nullform.QuadraticFormSpec):
            vals = np.einsum("...jk,j,k->...", form.s.astype(float), xi, xi)
        else:
            vals = np.einsum("...ijk,i,j,k->...", form.k.astype(float), xi, xi, xi)
        v = float(np.max(np.abs(vals)))
        if v > best:
            best, best_xi = v, xi
    return best_xi, best


def cmd_check_null(args) -> int:
    if args.builtin:
        dt2 = np.zeros((1, 1, 1, 4, 4), dtype=object)
        dt2[0, 0, 0, 0, 0] = Fraction(1)
        forms = {
            "q0": nullform.q0_spec(exact=True),
            "q01": nullform.qij_spec(0, 1, exact=True),
            "q12": nullform.qij_spec(1, 2, exact=True),
            "dt-squared": nullform.QuadraticFormSpec(s=dt2),
        }
        if args.builtin not in forms:
            raise ParseError(f"unknown builtin '{args.builtin}'; choose from {sorted(forms)}")
        form = forms[args.builtin]
    else:
        form = parse_form_file(args.form)
    if isinstance(form, nullform.QuadraticFormSpec):
        verdict, decomp = nullform.check_null_semilinear(form)
    else:
        verdict, decomp = nullform.check_null_quasilinear(form)
    if verdict:
        lam = np.asarray(decomp.lam).astype(float)
        print(f"null, lambda={lam.ravel()[np.argmax(np.abs(lam))]:g}, "
              f"residual={decomp.residual:.3e}")
    else:
        xi, value = _cone_witness(form)
        print(f"non-null, residual={decomp.residual:.3e}, "
              f"witness xi=({xi[0]:g},{xi[1]:g},{xi[2]:g},{xi[3]:g}) "
              f"symbol={value:.6g}")
    if args.out:
        manifest = Manifest("check-null")
        report = analysis.structured_report(
            "null-classifier", "light-cone-symbol", args.builtin or args.form,
            decomp.residual, nullform.VERDICT_TOL, verdict,
        )
        path = os.path.join(args.out, "null_report.json")
        os.makedirs(args.out, exist_ok=True)
        analysis.write_report(report, path)
        manifest.add_output(path)
        manifest.verdicts["null"] = str(verdict)
        manifest.write(args.out)
    if args.require_null and not verdict:
        return EXIT_VERDICT
    return EXIT_OK


# ---------------------------------------------------------------------------
# compat


def cmd_compat(args) -> int:
    cfg = read_config(args.config)
    scfg = solver_config_from(cfg)
    order = int(_getfloat(cfg, "verify", "order", 4))
    s_order = int(_getfloat(cfg, "verify", "boundary_order", order))
    tol = cfg.getfloat("verify", "tol", fallback=None)
    r_b = scfg.obs.r_b
    f, g = scfg.data.profiles(r_b, scfg.r_max, scfg.dr, scfg.epsilon)
    jet = compat.compute_jet(f, g, scfg.nonlinearity, K=order)
    report = compat.check_compatibility(jet, scfg.obs, s=s_order, tol=tol)
    manifest = Manifest("compat")
    os.makedirs(args.out, exist_ok=True)
    jet_path = os.path.join(args.out, "jet.csv")
    analysis.write_series_csv(
        jet_path,
        ["r"] + [f"psi_{k}" for k in range(order + 1)],
        [f.r] + [jet.psi[k].values for k in range(order + 1)],
    )
    manifest.add_output(jet_path)
    rep_path = os.path.join(args.out, "compat_report.json")
    analysis.write_report(
        analysis.structured_report(
            "boundary-compatibility", "jet-boundary-vanishing", args.config,
            max(abs(v) for v in report.boundary_values), report.tol,
            report.compatible,
        ),
        rep_path,
    )
    manifest.add_output(rep_path)
    manifest.verdicts["compatible"] = str(report.compatible)
    manifest.write(args.out)
    for k, (val, ok) in enumerate(zip(report.boundary_values, report.passed)):
        print(f"order {k}: |psi_{k}(r_b)| = {abs(val):.3e}  "
              f"{'ok' if ok else 'VIOLATED'}")
    return EXIT_OK if report.compatible else EXIT_VERDICT


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    cfg = read_config(args.config)
    scfg = solver_config_from(cfg)
    manifest = Manifest("simulate")
    manifest.config = {
        "nonlinearity": scfg.nonlinearity.name,
        "epsilon": repr(scfg.epsilon),
        "r_b": repr(scfg.obs.r_b),
        "dr": repr(scfg.dr),
        "cfl": repr(scfg.cfl),
        "t_max": repr(scfg.t_max),
        "r_max": repr(scfg.r_max),
    }
    traj = solver.run(scfg)
    every = _getfloat(cfg, "output", "snapshot_every", 5.0)
    for p in solver.write_outputs(traj, args.out, snapshot_every=every):
        manifest.add_output(p)
    manifest.verdicts["completed"] = str(traj.completed)
    manifest.write(args.out)
    print(f"completed t_max={scfg.t_max:g}; outputs in {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def _check_identity_omega(args, rng):
    pts = rng.uniform(0.0, 50.0, size=(10_000, 2))
    worst = 0.0
    for t, r in pts:
        direct = geometry.omega_factor(t, r)
        ev = geometry.to_einstein(geometry.MinkowskiEvent(t=t, r=r)).einstein
        worst = max(worst, abs(direct - (math.cos(ev.T) + math.cos(ev.R))))
    return analysis.structured_report(
        "identity-omega", "conformal-factor-closed-forms", len(pts),
        worst, 1e-12, worst < 1e-12,
    )


def _check_intertwining(args, rng):
    points = cylinder.battery_points()
    worst = max(
        cylinder.intertwining_residual(fn, points, h=1e-3)
        for _, fn in cylinder.TEST_BATTERY
    )
    return analysis.structured_report(
        "intertwining", "conformal-operator-interchange", "battery",
        worst, 1e-4, worst < 1e-4,
    )


def _check_commutator(args, rng):
    points = cylinder.battery_points()
    worst = max(
        cylinder.commutator_residual(fn, points, h=1e-3)
        for _, fn in cylinder.TEST_BATTERY
    )
    return analysis.structured_report(
        "commutator", "timelike-field-commutation", "battery",
        worst, 1e-5, worst < 1e-5,
    )


def _check_boundary_geometry(args, rng):
    obs = geometry.ObstacleSpec(0.2)
    T = np.linspace(1.0, math.pi - 1e-3, 200)
    phi = np.array([geometry.boundary_curve(obs, Tv) for Tv in T])
    ratio = phi / (math.pi - T) ** 2
    slopes = np.array([geometry.boundary_curve_slope(obs, Tv) for Tv in T])
    fd = np.gradient(phi, T)
    rel = np.max(np.abs(slopes - fd)[2:-2] / np.abs(fd[2:-2]))
    ok = ratio.max() / ratio.min() < 10 and np.all(slopes < 0)
    return analysis.structured_report(
        "boundary-geometry", "obstacle-curve-collapse", "r_b=0.2",
        float(ratio.max() / ratio.min()), 10.0, bool(ok and rel < 1e-3),
    )


def _check_vanishing_order(args, rng):
    eps = math.pi * 0.5 ** np.arange(3, 13)
    samples_frame, samples_a = [], []
    for e in eps:
        T = math.pi - e
        R = e / 8.0
        ev = geometry.EinsteinEvent(T=T, R=R)
        fr = geometry.frame_at(geometry.to_minkowski(ev))
        samples_frame.append((e, fr.jac[0, 0]))
        co = nullform.transformed_q0_coefficients(ev)
        samples_a.append((e, co.a[0, 0]))
    s1 = analysis.vanishing_order_fit(samples_frame).exponent
    s2 = analysis.vanishing_order_fit(samples_a).exponent
    return analysis.structured_report(
        "vanishing-order", "tip-degeneration-rate", "R=(pi-T)/8",
        min(s1, s2), 1.9, min(s1, s2) >= 1.9,
    )


def _load_traj(args):
    if args.traj:
        return solver.load_trajectory(args.traj)
    if args.config:
        return solver.run(solver_config_from(read_config(args.config)))
    raise ParseError("this check needs --traj DIR or --config PATH")


def _check_decay(args, rng):
    traj = _load_traj(args)
    cert = analysis.decay_certificate(traj, sigma=args.sigma)
    ok = math.isfinite(cert.C_sup) and cert.plateau_ratio <= 2.0
    return analysis.structured_report(
        "decay", "weighted-supnorm-certificate", args.traj or args.config,
        cert.plateau_ratio, 2.0, ok,
    )


def _check_morawetz(args, rng):
    traj = _load_traj(args)
    m = traj.monitors
    fit = analysis.fit_exponential(analysis.Series(m.t, np.maximum(m.E_local, 1e-300)),
                                   window=(5.0, 30.0))
    ok = fit.rate > 0 and fit.r_squared >= 0.95
    return analysis.structured_report(
        "morawetz", "local-energy-decay", args.traj or args.config,
        fit.rate, 0.0, ok,
    )


def _check_energy(args, rng):
    traj = _load_traj(args)
    field = solver.transform_to_cylinder(traj, solver.CylinderGrid())
    rep = analysis.energy_inequality_check(field)
    return analysis.structured_report(
        "energy", "conformal-energy-inequality", args.traj or args.config,
        rep.slack, 0.02, rep.passed,
    )


def _check_weighted_norms(args, rng):
    traj = _load_traj(args)
    field = solver.transform_to_cylinder(traj, solver.CylinderGrid())
    rep = analysis.weighted_norm_report(field, p=2, sigma=args.sigma)
    return analysis.structured_report(
        "weighted-norms", "mixed-norm-boundedness", args.traj or args.config,
        rep.plateau_ratio, 4.0, rep.bounded,
    )


_CHECKS = {
    "identity-omega": _check_identity_omega,
    "intertwining": _check_intertwining,
    "commutator": _check_commutator,
    "boundary-geometry": _check_boundary_geometry,
    "vanishing-order": _check_vanishing_order,
    "decay": _check_decay,
    "morawetz": _check_morawetz,
    "energy": _check_energy,
    "weighted-norms": _check_weighted_norms,
}


def cmd_verify(args) -> int:
    if args.check not in _CHECKS:
        raise ParseError(f"unknown check '{args.check}'; choose from {sorted(_CHECKS)}")
    rng = np.random.default_rng(args.seed)
    report = _CHECKS[args.check](args, rng)
    print(f"{report['check']}: value={report['value']:.6g} "
          f"threshold={report['threshold']:g} -> {report['verdict']}")
    if args.out:
        manifest = Manifest("verify")
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, f"verify_{args.check}.json")
        analysis.write_report(report, path)
        manifest.add_output(path)
        manifest.verdicts[args.check] = report["verdict"]
        manifest.write(args.out)
    return EXIT_OK if report["verdict"] == "pass" else EXIT_VERDICT


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="penwave",
        description="Conformal-method toolkit for exterior nonlinear waves",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transform", help="batch coordinate transform of CSV rows")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--backward", action="store_true",
                   help="rows are (T,R); map back to (t,r)")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("check-null", help="classify a nonlinearity's form file")
    p.add_argument("--form", help="form file in the tuple format")
    p.add_argument("--builtin", help="named builtin form (q0, q01, q12, dt-squared)")
    p.add_argument("--require-null", action="store_true")
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_check_null)

    p = sub.add_parser("compat", help="compatibility jet + boundary report")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compat)

    p = sub.add_parser("simulate", help="run the exterior evolution")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run a named certificate")
    p.add_argument("--check", required=True)
    p.add_argument("--config")
    p.add_argument("--traj", help="directory written by 'simulate'")
    p.add_argument("--sigma", type=float, default=0.25)
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        loc = f" (line {exc.line})" if getattr(exc, "line", None) else ""
        print(f"error: {exc}{loc}", file=sys.stderr)
        return EXIT_PARSE
    except PenwaveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
