"""Command-line experiment runner.

Each subcommand builds an :class:`ExperimentConfig`, runs it through
:func:`run_experiment` and writes a JSON :class:`~displab.reports.EstimateReport`
(plus CSV tables where useful).  Exit codes: 0 when every invariant asserted
by the run holds, 1 when one fails, 2 on usage or configuration errors.

``DISPLAB_WORKERS`` sets the number of worker processes for runs that map
over independent cases (default 1, i.e. in-process).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields
from importlib import metadata
from pathlib import Path

import numpy as np

from . import exponents as ex
from .reports import EstimateReport, Stopwatch, jsonable, write_csv, write_field, write_json

COMMANDS = ("admissible", "bessel-verify", "transform-check", "evolve", "kernel-decay",
            "strichartz-sweep", "sharpness", "wellposed")


class ConfigError(ValueError):
    """The configuration does not match the schema."""


def _version() -> str:
    try:
        return metadata.version("displab")
    except metadata.PackageNotFoundError:
        return "0+unknown"


@dataclass
class ExperimentConfig:
    """Everything a run depends on; serialized verbatim into its report."""

    command: str
    n: int = 2
    alpha: str = "3/2"
    gamma: str = "0"
    exponents: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; expected one of {COMMANDS}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigError("seed must be an integer")
        for name in ("exponents", "grid", "options", "outputs"):
            if not isinstance(getattr(self, name), dict):
                raise ConfigError(f"{name} must be a mapping")
        self.alpha, self.gamma = str(self.alpha), str(self.gamma)
        self.exponents = {k: str(v) for k, v in self.exponents.items()}
        try:
            self.params
        except (ex.ExponentError, ValueError, ZeroDivisionError) as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def params(self) -> ex.ProblemParams:
        return ex.ProblemParams(int(self.n), ex.as_number(self.alpha), ex.as_number(self.gamma))

    def exponent(self, name: str, default=None):
        if name not in self.exponents:
            if default is None:
                raise ConfigError(f"missing exponent {name!r}")
            return ex.as_number(default)
        return ex.as_number(self.exponents[name])

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict) or not d:
            raise ConfigError("empty configuration")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        if "command" not in d:
            raise ConfigError("configuration needs a 'command'")
        return cls(**d)

    def to_dict(self) -> dict:
        return jsonable(asdict(self))


# ---------------------------------------------------------------------------
# workers


def worker_count() -> int:
    raw = os.environ.get("DISPLAB_WORKERS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"DISPLAB_WORKERS must be an integer, got {raw!r}") from exc
    return max(1, n)


@contextmanager
def worker_pool():
    n = worker_count()
    if n == 1:
        yield None
        return
    with ProcessPoolExecutor(max_workers=n) as pool:
        yield pool


# ---------------------------------------------------------------------------
# runners: each returns (results, rows, passed, warnings)


def _run_admissible(cfg: ExperimentConfig):
    P = cfg.params
    q, p = cfg.exponent("q"), cfg.exponent("p")
    res = {"homogeneous_admissible": ex.check_homogeneous_admissible(P, q, p),
           "necessary_pair": ex.check_necessary_pair(P, ex.ExponentPoint.from_exponents(q, p)),
           "corollary_region": ex.check_corollary_region(P, q, p)}
    if "q_dual" in cfg.exponents:
        qd, pd = cfg.exponent("q_dual"), cfg.exponent("p_dual", cfg.exponents.get("q_dual"))
        tup = ex.ExponentTuple.from_exponents(q, p, qd, pd)
        res["sharp_diagonal"] = ex.check_sharp_diagonal(P, q, qd)
        res["scaling_pair"] = ex.check_scaling_pair(P, tup)
        res["scaling_residual"] = ex.scaling_residual(P, tup)
        res["verdict"] = res["sharp_diagonal"] and res["scaling_pair"] or (
            res["corollary_region"] and res["scaling_pair"])
    else:
        res["verdict"] = res["homogeneous_admissible"]
    # classification only: nothing is asserted
    return res, [], True, []


def _run_bessel(cfg: ExperimentConfig):
    from .bessel import fit_remainder_decay
    nu = float(ex.as_number(cfg.options.get("nu", 0)))
    rmax = float(cfg.options.get("rmax", 500.0))
    fit = fit_remainder_decay(nu, 2.0, rmax)
    res = fit.as_dict()
    passed = fit.slope <= -2.4
    rows = [{"r": c, "peak_abs_E": v} for c, v in zip(fit.bin_centers, fit.bin_peaks)]
    return res, rows, passed, (["remainder vanishes identically"] if fit.identically_zero else [])


def _run_transform(cfg: ExperimentConfig):
    from .radial_transform import Domain, hankel_forward, hankel_inverse
    n = cfg.params.n
    dom = Domain(n, float(cfg.grid.get("r_max", 64.0)), float(cfg.grid.get("rho_max", 12.0)))
    rng = np.random.default_rng(cfg.seed)
    rows = []
    for i in range(int(cfg.options.get("profiles", 5))):
        s, c = rng.uniform(0.6, 1.5), rng.uniform(-0.5, 0.5)
        f = dom.profile(lambda r: np.exp(-0.5 * (r / s) ** 2) * (1 + c * r ** 2))
        g = hankel_forward(f, dom.rho_grid)
        back = hankel_inverse(g, dom.r_grid)
        rows.append({"profile": i, "scale": s, "shape": c,
                     "round_trip": (back - f).l2_norm() / f.l2_norm(),
                     "plancherel": abs(g.l2_norm() / f.l2_norm() - 1)})
    worst = max(max(r["round_trip"], r["plancherel"]) for r in rows)
    return {"max_relative_error": worst, "rng": "numpy.default_rng/PCG64"}, rows, worst <= 1e-6, []


def _run_evolve(cfg: ExperimentConfig):
    from .propagator import SpaceTimeField, evolve_stack
    from .radial_transform import Domain
    P = cfg.params
    dom = Domain(P.n, float(cfg.grid.get("r_max", 64.0)), float(cfg.grid.get("rho_max", 12.0)))
    width = float(cfg.options.get("width", 1.0))
    times = np.asarray(cfg.options.get("times", [0.0, 0.5, 1.0, 2.0]), dtype=float)
    f = dom.profile(lambda r: np.exp(-0.5 * (r / width) ** 2))
    u = SpaceTimeField(P, times, f.grid, evolve_stack(f, times, P))
    dev = [abs(u.frame(i).l2_norm() / f.l2_norm() - 1) for i in range(len(times))]
    if "field_dir" in cfg.outputs:
        write_field(cfg.outputs["field_dir"], u)
    rows = [{"t": t, "l2_deviation": d} for t, d in zip(times, dev)]
    return {"max_l2_deviation": max(dev)}, rows, max(dev) <= 1e-5, []


def _run_kernel(cfg: ExperimentConfig):
    from . import kernels as kn
    P = cfg.params
    jm = int(cfg.options.get("j_max", 8))
    km = int(cfg.options.get("k_max", jm))
    if min(jm, km) < 4:
        raise ConfigError("kernel-decay needs j_max, k_max >= 4 (calibration block 0..3 plus a test block)")
    with worker_pool() as pool:
        rep = kn.dyadic_sup_report(jm, km, P, pool=pool)
    vdc = kn.vdc_slope(P)
    ns = kn.nonstationary_slope(P)
    test = (2, min(jm, km))
    full = rep.calibration_ratio(test)
    off = rep.calibration_ratio(test, min_gap=2)
    res = {"max_normalized": max(c["m"] for c in rep.cells.values()),
           "calibration_ratio": full, "calibration_ratio_off_diagonal": off,
           "slope_fits": {"diagonal_log2": rep.diagonal_slope(2, min(jm, km)), "van_der_corput": vdc.as_dict(),
                          "non_stationary": ns.as_dict()}}
    passed = full <= 3 and vdc.passed and ns.passed
    rows = [{"j": r["j"], "k": r["k"], "sup": r["sup"], "m": r["m"]} for r in rep.rows()]
    return res, rows, passed, []


def _family(cfg: ExperimentConfig):
    from .strichartz_sweep import Generator, TestFamily
    o = cfg.options
    return TestFamily(Generator(o.get("family", "gaussian_scales")), int(o.get("size", 4)),
                      tuple(o.get("ranges", (0.8, 1.25))), float(o.get("width", TestFamily.width)), cfg.seed)


def _run_sweep(cfg: ExperimentConfig):
    from . import strichartz_sweep as sw
    P = cfg.params
    fam = _family(cfg)
    q, p = cfg.exponent("q"), cfg.exponent("p")
    with worker_pool() as pool:
        if "q_dual" in cfg.exponents:
            qd, pd = cfg.exponent("q_dual"), cfg.exponent("p_dual")
            s = sw.inhomogeneous_ratio_sweep(P, q, p, qd, pd, fam, pool=pool)
            predicted = sw.inhomogeneous_drift(P, q, p, qd, pd)
            drift = sw.inhomogeneous_dilation(P, q, p, qd, pd, fam.members()[0])
        else:
            s = sw.homogeneous_ratio_sweep(P, q, p, fam, pool=pool)
            predicted = sw.homogeneous_drift(P, q, p)
            drift = sw.homogeneous_dilation(P, q, p, fam.members()[0])
    res = {"max_ratio": s.max_ratio, "predicted_drift": predicted, "fitted_drift": drift.fitted,
           "drift_error": drift.error, "family": s.family}
    return res, s.rows, drift.error <= 1e-2, s.warnings


def _run_sharpness(cfg: ExperimentConfig):
    from .sharpness import growth_exponent_fit
    fit = growth_exponent_fit(cfg.params, float(cfg.exponent("q")), float(cfg.exponent("p")))
    res = {"q": fit.q, "p": fit.p, "predicted_slope": fit.predicted_slope, "fitted_slope": fit.fitted_slope,
           "verdict": fit.verdict, "residual": fit.residual}
    rows = [{"N": N, "norm": v} for N, v in zip(fit.windows, fit.norms)]
    return res, rows, abs(fit.fitted_slope - fit.predicted_slope) <= 0.05, []


def _potential_from(spec: dict):
    from .wellposed import gaussian_potential
    kind = spec.get("kind", "gaussian")
    if kind != "gaussian":
        raise ConfigError(f"unsupported potential kind {kind!r}")
    V = gaussian_potential(float(spec.get("width", 1.0)), float(spec.get("pulse", 0.5)))
    strength = spec.get("strength", 0.5)
    if isinstance(strength, (list, tuple)):  # [re, im] for complex potentials
        strength = complex(*strength)
    return V.scaled(strength)


def _run_wellposed(cfg: ExperimentConfig):
    from .radial_transform import Domain
    from . import wellposed as wp
    P = cfg.params
    E = wp.WellposedExponents(cfg.exponent("q"), cfg.exponent("p"), cfg.exponent("r"), cfg.exponent("w"))
    verdict = E.verdict(P)
    if not verdict:
        raise ConfigError(f"exponents fail the well-posedness conditions: {list(verdict.failures)}")
    V = _potential_from(cfg.options.get("potential", {}))
    T = float(cfg.options.get("T", 1.0))
    dom = Domain(P.n, float(cfg.grid.get("r_max", 64.0)), float(cfg.grid.get("rho_max", 12.0)))
    width = float(cfg.options.get("width", 1.0))
    f = dom.profile(lambda r: np.exp(-0.5 * (r / width) ** 2))
    u, run = wp.picard_solve(f, V, T, E, P)
    ref = wp.splitstep_reference(f, V, T, float(cfg.options.get("dt", 1e-3)), P, times=u.times)
    errs = wp.frame_errors(u, ref)
    run.reference_residual = float(errs.max())
    pers = wp.persistence_check(u, f, V, E, P)
    res = {"run": run.as_dict(), "persistence": pers.as_dict(),
           "note": "contraction thresholds and constants are empirical fits"}
    passed = run.converged and run.fixed_point_residual <= 1e-6 and errs.max() <= wp.CROSS_ORACLE_TOL
    rows = [{"t": t, "frame_error": e} for t, e in zip(u.times, errs)]
    return res, rows, passed, []


RUNNERS = {
    "admissible": _run_admissible,
    "bessel-verify": _run_bessel,
    "transform-check": _run_transform,
    "evolve": _run_evolve,
    "kernel-decay": _run_kernel,
    "strichartz-sweep": _run_sweep,
    "sharpness": _run_sharpness,
    "wellposed": _run_wellposed,
}


def run_experiment(config: ExperimentConfig | dict) -> EstimateReport:
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_dict(config)
    with Stopwatch() as sw:
        try:
            results, rows, passed, warnings = RUNNERS[cfg.command](cfg)
        except ConfigError:
            raise
        except Exception as exc:  # module error, reported with context
            raise RuntimeError(f"{cfg.command}: {type(exc).__name__}: {exc}") from exc
    report = EstimateReport(cfg.command, cfg.to_dict(), jsonable(results), jsonable(rows), bool(passed),
                            list(warnings), version=_version(), wall_clock=sw.elapsed)
    if "report" in cfg.outputs:
        write_json(cfg.outputs["report"], report)
    if "csv" in cfg.outputs and rows:
        write_csv(cfg.outputs["csv"], report.rows)
    return report


# ---------------------------------------------------------------------------
# argument parsing


def _common(p: argparse.ArgumentParser, *, exps=()):
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--alpha", default="3/2")
    p.add_argument("--gamma", default="0")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", help="JSON report path")
    p.add_argument("--csv", help="CSV table path")
    p.add_argument("--config", help="JSON config file (overrides all other flags)")
    for e in exps:
        p.add_argument(f"--{e.replace('_', '-')}", dest=e)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="displab", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("admissible", help="classify an exponent pair or tuple")
    _common(p, exps=("q", "p", "q_dual", "p_dual"))
    p = sub.add_parser("bessel-verify", help="remainder decay of the Bessel expansion")
    _common(p)
    p.add_argument("--nu", default="0")
    p.add_argument("--rmax", type=float, default=500.0)
    p = sub.add_parser("transform-check", help="Hankel round trip and Plancherel")
    _common(p)
    p.add_argument("--profiles", type=int, default=5)
    p = sub.add_parser("evolve", help="free evolution of a Gaussian")
    _common(p)
    p.add_argument("--times", default="0,0.5,1,2")
    p.add_argument("--field-dir", help="directory for frame CSVs and manifest")
    p = sub.add_parser("kernel-decay", help="sampled kernel sup report")
    _common(p)
    p.add_argument("--j-max", type=int, default=8)
    p.add_argument("--k-max", type=int)
    p = sub.add_parser("strichartz-sweep", help="norm ratio sweeps")
    _common(p, exps=("q", "p", "q_dual", "p_dual"))
    p.add_argument("--family", default="gaussian_scales")
    p.add_argument("--size", type=int, default=4)
    p = sub.add_parser("sharpness", help="window growth of the bump forcing")
    _common(p, exps=("q", "p"))
    p = sub.add_parser("wellposed", help="Picard solve with a potential")
    _common(p, exps=("q", "p", "r", "w"))
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--potential", help="JSON file describing the potential")
    return ap


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    if args.config:
        try:
            d = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        return ExperimentConfig.from_dict(d)
    exps = {k: getattr(args, k) for k in ("q", "p", "q_dual", "p_dual", "r", "w")
            if getattr(args, k, None) is not None}
    opts = {}
    c = args.command
    if c == "bessel-verify":
        opts = {"nu": args.nu, "rmax": args.rmax}
    elif c == "transform-check":
        opts = {"profiles": args.profiles}
    elif c == "evolve":
        opts = {"times": [float(x) for x in args.times.split(",")]}
    elif c == "kernel-decay":
        opts = {"j_max": args.j_max, "k_max": args.k_max if args.k_max is not None else args.j_max}
    elif c == "strichartz-sweep":
        opts = {"family": args.family, "size": args.size}
    elif c == "wellposed":
        opts = {"T": args.T}
        if args.potential:
            try:
                opts["potential"] = json.loads(Path(args.potential).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read potential file: {exc}") from exc
    outputs = {}
    if args.report:
        outputs["report"] = args.report
    if args.csv:
        outputs["csv"] = args.csv
    if getattr(args, "field_dir", None):
        outputs["field_dir"] = args.field_dir
    return ExperimentConfig(c, args.n, args.alpha, args.gamma, exps, {}, opts, outputs, args.seed)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        cfg = config_from_args(args)
        report = run_experiment(cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if "report" not in cfg.outputs:
        print(report.to_json())
    else:
        print(json.dumps({"command": report.name, "passed": report.passed,
                          "report": cfg.outputs["report"]}, sort_keys=True))
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
