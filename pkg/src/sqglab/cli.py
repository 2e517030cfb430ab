"""Command line entry point: ``sqglab <command> [--config PATH] [--out DIR] ...``.

Exit status: 0 success, 1 configuration or usage error, 2 numerical failure
(blow-up, non-convergence), 3 invariant violation reported by a monitor.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import io
from .evolution import BlowUpError, StepperConfig, energy_balance_check, run
from .multipliers import LogSupercritical, from_config
from .spectral import GridSpec, SpectralField, norm, random_field
from .steady import SteadyState, SteadyStateError, manufacture_forcing, newton_krylov_steady, residual, shear_state

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_INVARIANT = 0, 1, 2, 3

log = logging.getLogger("sqglab")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


class InvariantViolation(RuntimeError):
    pass


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 8:
        raise argparse.ArgumentTypeError("grid size must be >= 8")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value configuration file")
    common.add_argument("--out", metavar="DIR", help="output directory (default ./run-<command>)")
    common.add_argument("--seed", type=_u64, metavar="U64", help="override the config seed")
    common.add_argument("--grid", type=_positive_int, metavar="N", help="override grid.n")
    common.add_argument("--quiet", action="store_true", help="suppress progress output")

    p = _Parser(prog="sqglab", description="Forced SQG experiments on the 2-torus.")
    sub = p.add_subparsers(dest="command", metavar="command")
    sub.required = True
    for name, hlp in [
        ("simulate", "run the nonlinear equation"),
        ("steady", "manufacture (or Newton-solve) a shear steady state"),
        ("eigs", "rightmost spectrum of the linearization about the steady state"),
        ("instability", "epsilon-ladder growth and escape-time protocol"),
        ("holder", "Hoelder regularity tracker (log case)"),
        ("verify", "Littlewood-Paley and triangle-weight estimate suites"),
    ]:
        sub.add_parser(name, parents=[common], help=hlp)
    info = sub.add_parser("info", parents=[common], help="print a run manifest")
    info.add_argument("manifest", nargs="?", help="manifest file or run directory (default --out)")
    return p


# ---------------------------------------------------------------------------
# shared builders
# ---------------------------------------------------------------------------

def _grid(cfg) -> GridSpec:
    return GridSpec(int(cfg["grid.n"]))


def _multiplier(cfg):
    return from_config(cfg["multiplier.kind"], cfg["multiplier.gamma"], cfg["multiplier.a"],
                       cfg["multiplier.kappa"])


def _stepper(cfg, **over) -> StepperConfig:
    kw = dict(dt=cfg["stepper.dt"], t_end=cfg["stepper.t_end"], adaptive=cfg["stepper.adaptive"],
              c_cfl=cfg["stepper.c_cfl"], dt_max=cfg["stepper.dt_max"],
              cadence=cfg["stepper.cadence"] or None, snapshot_every=cfg["stepper.snapshot_every"] or None)
    kw.update(over)
    return StepperConfig(**kw)


def _steady(cfg, grid, m) -> SteadyState:
    theta0 = shear_state(cfg["steady.A"], cfg["steady.m"], grid)
    f = manufacture_forcing(theta0, m)
    if not cfg["steady.solve"]:
        return SteadyState(theta0, f, m, residual(theta0, f, m))
    rng = np.random.default_rng(cfg["seed"])
    guess = theta0
    if cfg["steady.perturbation"] > 0:
        guess = theta0 + random_field(grid, rng, decay=3.0, amplitude=cfg["steady.perturbation"])
    return newton_krylov_steady(f, m, guess=guess, tol=cfg["steady.tol"])


def _eigs(cfg, ss, count):
    from .stability import ArnoldiConfig, LinearizedOperator, rightmost_eigenpairs

    op = LinearizedOperator(ss.theta0, ss.m)
    acfg = ArnoldiConfig(mode=cfg["eig.mode"], t_prop=cfg["eig.t_prop"], seed=cfg["seed"] % 2 ** 32)
    return op, rightmost_eigenpairs(op, acfg, count=count)


def _initial(cfg, grid, ss) -> SpectralField:
    rng = np.random.default_rng(cfg["seed"])
    kind = cfg["init.kind"]
    kcut = cfg["init.kcut"] or None
    if kind == "zero":
        return SpectralField.zeros(grid)
    if kind == "random":
        return random_field(grid, rng, decay=cfg["init.decay"], kcut=kcut, amplitude=cfg["init.amplitude"])
    if kind == "sup":
        th = random_field(grid, rng, decay=cfg["init.decay"], kcut=kcut)
        return th * (cfg["init.amplitude"] / norm(th, "sup"))
    if kind == "shear":
        pert = random_field(grid, rng, decay=cfg["init.decay"], kcut=kcut, amplitude=cfg["init.amplitude"])
        return ss.theta0 + pert
    raise io.ConfigError(f"unknown init.kind {kind!r}; expected zero, random, sup or shear")


def _forcing(cfg, grid, m):
    kind = cfg["forcing.kind"]
    if kind == "none":
        return None, None
    if kind == "shear":
        ss = _steady(cfg, grid, m)
        return ss.f, ss
    raise io.ConfigError(f"unknown forcing.kind {kind!r}; expected none or shear")


class _Run:
    """Output directory bookkeeping; the manifest is written last."""

    def __init__(self, out: Path, command: str, cfg: dict, quiet: bool):
        self.out, self.command, self.cfg, self.quiet = out, command, cfg, quiet
        self.outputs: list[str] = []
        self.results: dict = {}

    def path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.out / name

    def say(self, msg: str):
        if not self.quiet:
            print(msg)

    def finish(self):
        return io.write_manifest(self.out, self.command, self.cfg, self.outputs, self.results)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(r: _Run):
    cfg = r.cfg
    grid, m = _grid(cfg), _multiplier(cfg)
    f, ss = _forcing(cfg, grid, m)
    theta0 = _initial(cfg, grid, ss)
    rec = run(theta0, f, m, _stepper(cfg))
    io.write_csv(r.path("series.csv"), rec.columns(), rec.rows())
    io.save_snapshot(r.path("final.snap"), rec.final, rec.meta["t_final"])
    resid = energy_balance_check(rec)
    drift = float(np.max(np.abs(rec.array("mean"))))
    r.results.update(energy_residual=resid, mean_drift=drift, steps=rec.meta.get("steps"))
    r.say(f"t_final={rec.meta['t_final']:.6g}  energy residual/unit time={resid:.3e}  mean drift={drift:.3e}")
    if resid > cfg["monitor.energy_tol"]:
        raise InvariantViolation(f"energy balance residual {resid:.3e} exceeds {cfg['monitor.energy_tol']:.1e}")
    if drift > 1e-10:
        raise InvariantViolation(f"mean drifted by {drift:.3e}")


def cmd_steady(r: _Run):
    cfg = r.cfg
    grid, m = _grid(cfg), _multiplier(cfg)
    ss = _steady(cfg, grid, m)
    io.save_snapshot(r.path("theta0.snap"), ss.theta0)
    io.save_snapshot(r.path("forcing.snap"), ss.f)
    io.write_csv(r.path("steady.csv"), ["iteration", "residual"],
                 [[i, v] for i, v in enumerate(ss.history or (ss.residual,))])
    r.results.update(residual=ss.residual, iterations=ss.iterations)
    r.say(f"steady state residual={ss.residual:.3e} after {ss.iterations} Newton iterations")
    scale = max(1.0, norm(ss.f))
    if ss.residual > 1e-8 * scale:
        raise InvariantViolation(f"steady residual {ss.residual:.3e} too large")


def cmd_eigs(r: _Run):
    cfg = r.cfg
    grid, m = _grid(cfg), _multiplier(cfg)
    ss = _steady(cfg, grid, m)
    _, pairs = _eigs(cfg, ss, cfg["eig.count"])
    rows = []
    for i, p in enumerate(pairs):
        rows.append([i, p.mu.real, p.mu.imag, p.residual])
        io.save_snapshot(r.path(f"eig{i}_re.snap"), p.phi_re)
        io.save_snapshot(r.path(f"eig{i}_im.snap"), p.phi_im)
        r.say(f"mu[{i}] = {p.mu.real:+.12g} {p.mu.imag:+.12g}i   residual {p.residual:.2e}")
    io.write_csv(r.path("eigs.csv"), ["index", "mu_re", "mu_im", "residual"], rows)
    r.results["eigenvalues"] = [{"mu": [p.mu.real, p.mu.imag], "residual": p.residual} for p in pairs]


def cmd_instability(r: _Run):
    from .instability import InstabilityConfig, run_ladder

    cfg = r.cfg
    grid, m = _grid(cfg), _multiplier(cfg)
    ss = _steady(cfg, grid, m)
    _, pairs = _eigs(cfg, ss, 1)
    pair = pairs[0]
    if pair.growth_rate <= 0:
        raise io.ConfigError(f"steady state is linearly stable (rightmost mu = {pair.mu:.6g}); no ladder to run")
    st = StepperConfig(dt=cfg["stepper.dt"], adaptive=True, c_cfl=cfg["stepper.c_cfl"],
                       dt_max=cfg["stepper.dt_max"], cadence=cfg["stepper.cadence"] or 0.05)
    icfg = InstabilityConfig(cfg["ladder.epsilons"], pair, ss, rho_esc=cfg["escape.rho"], stepper=st,
                             sat_window=cfg["escape.sat_window"])
    res = run_ladder(icfg, keep_records=False)
    io.write_csv(r.path("instability.csv"), res.columns(), res.rows())
    fit_cols = ["slope", "intercept", "r2", "lambda", "inv_lambda", "c0", "c2", "sat_ratio"]
    io.write_csv(r.path("fit.csv"), fit_cols,
                 [[res.slope, res.intercept, res.r2, res.lam, 1.0 / res.lam, res.c0, res.c2, res.sat_ratio()]])
    r.results.update(lam=res.lam, slope=res.slope, c0=res.c0, sat_ratio=res.sat_ratio())
    r.say(f"lambda={res.lam:.8g}  escape slope={res.slope:.8g} (1/lambda={1 / res.lam:.8g})  "
          f"saturation ratio={res.sat_ratio():.4g}")


def cmd_holder(r: _Run):
    from .regularity import XiSchedule, h_set, tracked_run

    cfg = r.cfg
    grid, m = _grid(cfg), _multiplier(cfg)
    if not isinstance(m, LogSupercritical):
        raise io.ConfigError("holder tracking needs multiplier.kind = log")
    f, ss = _forcing(cfg, grid, m)
    theta0 = _initial(cfg, grid, ss)
    sched = XiSchedule(cfg["schedule.xi0"], cfg["schedule.alpha"], m.a, m.kappa, cfg["schedule.c0"])
    hs = h_set(grid, cfg["holder.n_radii"], cfg["holder.n_angles"])
    tr = tracked_run(theta0, f, m, sched, hs, t_factor=cfg["holder.t_factor"], c0_scan=cfg["schedule.c0_scan"],
                     c_cfl=cfg["stepper.c_cfl"], dt_max=cfg["stepper.dt_max"])
    rec, rep = tr.record, tr.report
    io.write_csv(r.path("holder.csv"), rep.columns(), rep.csv_rows())
    io.write_csv(r.path("series.csv"), rec.columns(), rec.rows())
    io.save_snapshot(r.path("final.snap"), rec.final, rec.meta["t_final"])
    r.results.update(M=tr.bounds.M, t_star=sched.t_star, c0_threshold=rep.c0_threshold,
                     hk_growth=rep.hk_growth, flags=rep.flags)
    r.say(f"T*={sched.t_star:.6g}  M^2={tr.bounds.M ** 2:.6g}  max g={max(x.g for x in rep.rows):.6g}  "
          f"H3 growth={rep.hk_growth}")
    if any(x.crossing for x in rep.rows):
        raise InvariantViolation("; ".join(rep.flags))


LP_PAIRS = [("commutator", 5 / 3, 2 / 3), ("product", 2 / 3, 5 / 3), ("commutator", 1.0, 0.5),
            ("product", 0.5, 1.0)]


def cmd_verify(r: _Run):
    from .estimates import EnsembleSpec, TripleScan, flatness, lp_lemma_ratio, triangle_weight_scan

    cfg = r.cfg
    grids = [int(g) for g in cfg["verify.grids"]]
    base = max(grids)
    lp_rows, flat = [], {}
    for lemma, a1, a2 in LP_PAIRS:
        tabs = []
        for n in grids:
            ens = EnsembleSpec(cfg["verify.count"], GridSpec(n), max(a1, a2) + 2.0, cfg["seed"], base_n=base)
            tab = lp_lemma_ratio(lemma, a1, a2, ens)
            tabs.append(tab)
            lp_rows += [[lemma, a1, a2, n, j, v] for j, v in tab.rows()]
        key = f"{lemma}({a1:.4g},{a2:.4g})"
        flat[key] = flatness(tabs[0], tabs[-1])
        r.say(f"{key}: l2 flatness {flat[key]:.4f}  trend slope {tabs[-1].trend_slope():+.3f}")
    io.write_csv(r.path("lp.csv"), ["lemma", "a1", "a2", "n", "j", "max_ratio"], lp_rows)
    tri_rows = []
    for case in ("frac", "log"):
        for nmax in cfg["verify.nmax"]:
            sr = triangle_weight_scan(TripleScan(int(nmax), case, cfg["multiplier.gamma"], cfg["multiplier.a"],
                                                 cfg["multiplier.kappa"]))
            tri_rows.append([case, sr.n_max, sr.worst, sr.ray_limit])
            r.say(f"triangle {case} N_max={sr.n_max}: worst {sr.worst:.6f} (ray limit {sr.ray_limit:.6f})")
    io.write_csv(r.path("triangle.csv"), ["case", "N_max", "worst_constant", "ray_limit"], tri_rows)
    r.results["lp_flatness"] = flat
    bad = {k: v for k, v in flat.items() if v > 0.1}
    if bad:
        raise InvariantViolation(f"LP ratio tables not flat across grids: {bad}")
    over = [row for row in tri_rows if row[2] > row[3] * (1 + 1e-12)]
    if over:
        raise InvariantViolation(f"triangle constant above its ray limit: {over}")


def cmd_info(args) -> int:
    target = args.manifest or args.out
    if target is None:
        print("sqglab info: give a manifest path or --out DIR", file=sys.stderr)
        return EXIT_CONFIG
    try:
        man = io.read_manifest(target)
    except (OSError, ValueError) as exc:
        print(f"sqglab info: cannot read manifest: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    d = man.data
    print(f"config_hash {d['config_hash']}")
    if not args.quiet:
        print(f"command     {d.get('command')}")
        print(f"seed        {d.get('seed')}")
        print(f"grid        {d.get('grid')}")
        print(f"multiplier  {d.get('multiplier')}")
        print(f"created     {d.get('created_utc')}")
        for name in d.get("outputs", []):
            print(f"output      {name}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "steady": cmd_steady,
    "eigs": cmd_eigs,
    "instability": cmd_instability,
    "holder": cmd_holder,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    if args.command == "info":
        return cmd_info(args)
    try:
        cfg = io.load_config(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.grid is not None:
            cfg["grid.n"] = args.grid
        out = Path(args.out or f"run-{args.command}")
        out.mkdir(parents=True, exist_ok=True)
        if (out / "manifest.json").exists():
            raise io.ConfigError(f"{out} already holds a manifest; choose a fresh --out directory")
        r = _Run(out, args.command, cfg, args.quiet)
    except (io.ConfigError, OSError) as exc:
        print(f"sqglab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    status = EXIT_OK
    try:
        COMMANDS[args.command](r)
    except io.ConfigError as exc:
        print(f"sqglab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BlowUpError, SteadyStateError, _eigen_error()) as exc:
        print(f"sqglab: numerical failure: {exc}", file=sys.stderr)
        status = EXIT_NUMERIC
    except InvariantViolation as exc:
        print(f"sqglab: invariant violation: {exc}", file=sys.stderr)
        status = EXIT_INVARIANT
    except ValueError as exc:
        print(f"sqglab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    r.results["exit_status"] = status
    r.finish()
    return status


def _eigen_error():
    from .stability import EigenSolverError

    return EigenSolverError


if __name__ == "__main__":
    sys.exit(main())
