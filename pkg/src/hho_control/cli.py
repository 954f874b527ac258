"""Experiment harness: configs, convergence runs, CSV/Markdown/TSV emission.

`hho-control run` builds one mesh per level, solves the selected scheme,
collects the error record and writes `report.csv`, `report.md` and plot-ready
TSV data.  Output is byte-deterministic for a fixed configuration.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import presets as presets_mod
from .control_constrained import PgdConfig, solve_wc1, solve_wc2
from .control_unconstrained import (solve_uc1, solve_uc2, solve_uc31,
                                    solve_uc32)
from .errors import (QUANTITIES, ConvergenceReport, ErrorRecord, energy_error,
                     l2_error_control, l2_error_reconstruction)
from .hho_core import HhoSpace
from .mesh import make_cartesian, make_voronoi, write_mesh


class ConfigError(ValueError):
    """Invalid experiment configuration."""


SCHEMES = ("uc1", "uc2", "uc31", "uc32", "wc1", "wc2")
MESH_FAMILIES = ("cartesian", "voronoi")

CSV_HEADER = ("level,h,n_cells,err_u_l2,rate_u,err_y_energy,rate_y,"
              "err_phi_energy,rate_phi,err_y_l2_recon,rate_y_recon,"
              "err_phi_l2_recon,rate_phi_recon,iters")

_RATE_OF = {"err_u_l2": "rate_u", "err_y_energy": "rate_y",
            "err_phi_energy": "rate_phi", "err_y_l2_recon": "rate_y_recon",
            "err_phi_l2_recon": "rate_phi_recon"}


@dataclass
class ExperimentConfig:
    scheme: str
    degree: int
    mesh_family: str = "cartesian"
    levels: list = field(default_factory=lambda: [4, 8, 16, 32])
    preset: str = ""
    lam: float | None = None
    bounds: tuple | None = None
    exact_y: str | None = None
    exact_phi: str | None = None
    pgd: PgdConfig = field(default_factory=PgdConfig)
    output_dir: str = "out"
    rng_seed: int = 42
    lloyd_iters: int = 10

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.mesh_family not in MESH_FAMILIES:
            raise ConfigError(f"unknown mesh family {self.mesh_family!r}")
        if not self.levels:
            raise ConfigError("levels must be nonempty")
        if any(int(n) < 1 for n in self.levels):
            raise ConfigError("levels must be positive integers")
        k = self.degree
        if self.scheme == "uc31" and k not in (0, 1):
            raise ConfigError("uc31 supports degree k in {0, 1} only")
        if self.scheme == "uc32" and k < 2:
            raise ConfigError("uc32 requires degree k >= 2")
        if self.scheme == "wc1" and k != 0:
            raise ConfigError("wc1 is defined for degree k = 0 only")
        if self.scheme == "wc2" and k != 1:
            raise ConfigError("wc2 uses the fixed mixed space V^{1+} (k = 1)")
        if k < 0:
            raise ConfigError("degree must be nonnegative")
        if self.scheme in ("wc1", "wc2") and self.bounds is None \
                and not self._preset_has_bounds():
            raise ConfigError("bounds required for constrained schemes")
        if self.scheme.startswith("uc") and self.bounds is not None:
            raise ConfigError("bounds are not admissible for unconstrained schemes")

    def _preset_has_bounds(self):
        if not self.preset:
            return False
        try:
            return presets_mod.get_preset(self.preset).bounds is not None
        except presets_mod.PresetError:
            return False

    def build_problem(self):
        if self.exact_y or self.exact_phi:
            if not (self.exact_y and self.exact_phi):
                raise ConfigError("inline problems need both exact_y and exact_phi")
            y = presets_mod.parse_expression(self.exact_y)
            phi = presets_mod.parse_expression(self.exact_phi)
            lam = 1e-2 if self.lam is None else self.lam
            return presets_mod.make_problem(y, phi, lam, bounds=self.bounds)
        if not self.preset:
            raise ConfigError("a preset id or inline exact functions are required")
        return presets_mod.problem_from_preset(self.preset, lam=self.lam,
                                               bounds=self.bounds)


def _parse_bool(text):
    if text.lower() in ("1", "true", "yes", "on"):
        return True
    if text.lower() in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"invalid boolean {text!r}")


def validate_config(text):
    """Parse a flat `key = value` document into an ExperimentConfig."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not key or not value:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value

    known = {"scheme", "degree", "mesh_family", "levels", "preset", "lambda",
             "bounds", "exact_y", "exact_phi", "output_dir", "rng_seed",
             "lloyd_iters", "pgd_max_iters", "pgd_tol", "pgd_theta"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config field(s): {', '.join(sorted(unknown))}")
    if "scheme" not in raw or "degree" not in raw:
        raise ConfigError("config requires at least 'scheme' and 'degree'")

    def geti(key, default):
        try:
            return int(raw[key]) if key in raw else default
        except ValueError:
            raise ConfigError(f"field {key!r} must be an integer") from None

    def getf(key, default):
        try:
            return float(raw[key]) if key in raw else default
        except ValueError:
            raise ConfigError(f"field {key!r} must be a real number") from None

    levels = [4, 8, 16, 32]
    if "levels" in raw:
        try:
            levels = [int(tok) for tok in raw["levels"].split(",") if tok.strip()]
        except ValueError:
            raise ConfigError("field 'levels' must be comma-separated integers") \
                from None
    bounds = None
    if "bounds" in raw:
        toks = [tok for tok in raw["bounds"].split(",") if tok.strip()]
        if len(toks) != 2:
            raise ConfigError("field 'bounds' must be 'u_a, u_b'")
        try:
            bounds = (float(toks[0]), float(toks[1]))
        except ValueError:
            raise ConfigError("field 'bounds' must be two real numbers") from None
        if not bounds[0] < bounds[1]:
            raise ConfigError("bounds must satisfy u_a < u_b")

    pgd = PgdConfig(max_iters=geti("pgd_max_iters", 500),
                    tol=getf("pgd_tol", 1e-10),
                    step=getf("pgd_theta", 0.5))
    return ExperimentConfig(
        scheme=raw["scheme"], degree=geti("degree", 0),
        mesh_family=raw.get("mesh_family", "cartesian"), levels=levels,
        preset=raw.get("preset", ""), lam=getf("lambda", None),
        bounds=bounds, exact_y=raw.get("exact_y"), exact_phi=raw.get("exact_phi"),
        pgd=pgd, output_dir=raw.get("output_dir", "out"),
        rng_seed=geti("rng_seed", 42), lloyd_iters=geti("lloyd_iters", 10))


def _build_mesh(cfg, level):
    if cfg.mesh_family == "cartesian":
        return make_cartesian(level)
    return make_voronoi(level, rng_seed=cfg.rng_seed, lloyd_iters=cfg.lloyd_iters)


def _solve_level(cfg, mesh, prob):
    k = cfg.degree
    if cfg.scheme in ("uc1", "uc2"):
        space = HhoSpace(mesh, k, dirichlet=True)
        sol = (solve_uc1 if cfg.scheme == "uc1" else solve_uc2)(space, prob)
    elif cfg.scheme == "uc31":
        space = HhoSpace(mesh, k, dirichlet=True)
        sol = solve_uc31(space, prob)
    elif cfg.scheme == "uc32":
        space = HhoSpace(mesh, k, cell_degree=k + 1, dirichlet=True)
        sol = solve_uc32(space, prob)
    elif cfg.scheme == "wc1":
        space = HhoSpace(mesh, 0, dirichlet=True)
        sol = solve_wc1(space, prob, cfg.pgd)
    else:
        space = HhoSpace(mesh, 1, cell_degree=2, dirichlet=True)
        sol = solve_wc2(space, prob, cfg.pgd)
    return space, sol


def run_level(cfg, prob, level):
    """Solve one refinement level and measure all reported errors."""
    mesh = _build_mesh(cfg, level)
    space, sol = _solve_level(cfg, mesh, prob)
    exact = prob.exact
    return ErrorRecord(
        level=level, h=mesh.max_diameter(), n_cells=mesh.n_cells,
        err_u_l2=l2_error_control(sol, exact.u),
        err_y_energy=energy_error(space, sol.y, exact.y),
        err_phi_energy=energy_error(space, sol.phi, exact.phi),
        err_y_l2_recon=l2_error_reconstruction(space, sol.y, exact.y),
        err_phi_l2_recon=l2_error_reconstruction(space, sol.phi, exact.phi),
        iters=getattr(sol, "iterations", None))


def _fmt(x):
    if x is None:
        return ""
    if x != x or x in (float("inf"), float("-inf")):
        return "inf" if x > 0 else "-inf"
    return format(x, ".16g")


def _csv_rows(records, rates):
    rows = [CSV_HEADER]
    for i, r in enumerate(records):
        cells = [str(r.level), _fmt(r.h), str(r.n_cells)]
        for q in QUANTITIES:
            cells.append(_fmt(getattr(r, q)))
            cells.append(_fmt(rates[q][i - 1]) if i > 0 else "")
        cells.append("" if r.iters is None else str(r.iters))
        rows.append(",".join(cells))
    return rows


def _markdown_table(records, rates):
    head = ["level", "h", "n_cells"]
    for q in QUANTITIES:
        head += [q, _RATE_OF[q]]
    head.append("iters")
    lines = ["| " + " | ".join(head) + " |",
             "|" + "---|" * len(head)]
    for i, r in enumerate(records):
        cells = [str(r.level), _fmt(r.h), str(r.n_cells)]
        for q in QUANTITIES:
            cells.append(_fmt(getattr(r, q)))
            cells.append(_fmt(rates[q][i - 1]) if i > 0 else "")
        cells.append("" if r.iters is None else str(r.iters))
        lines.append("| " + " | ".join(cells) + " |")
    return lines


def write_report(report, out_dir, incomplete=False):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = _csv_rows(report.records, report.rates)
    if incomplete:
        rows.append("# INCOMPLETE")
    (out / "report.csv").write_text("\n".join(rows) + "\n")
    (out / "report.md").write_text(
        "\n".join(_markdown_table(report.records, report.rates)) + "\n")
    combined = ["h\t" + "\t".join(QUANTITIES)]
    for r in report.records:
        combined.append("\t".join([_fmt(r.h)] + [_fmt(getattr(r, q))
                                                 for q in QUANTITIES]))
    (out / "plotdata.tsv").write_text("\n".join(combined) + "\n")
    for q in QUANTITIES:
        series = ["h\t" + q]
        series += [f"{_fmt(r.h)}\t{_fmt(getattr(r, q))}" for r in report.records]
        (out / f"plotdata_{q}.tsv").write_text("\n".join(series) + "\n")


def run_experiment(cfg):
    """Run every level of a configured study and write the reports."""
    prob = cfg.build_problem()
    records = []
    try:
        for level in cfg.levels:
            records.append(run_level(cfg, prob, level))
    except Exception:
        report = ConvergenceReport(records)
        write_report(report, cfg.output_dir, incomplete=True)
        raise
    report = ConvergenceReport(records)
    write_report(report, cfg.output_dir)
    return report


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------

def _add_run_parser(sub):
    p = sub.add_parser("run", help="run a convergence study")
    p.add_argument("--config", help="path to a key = value config document")
    p.add_argument("--scheme", choices=SCHEMES)
    p.add_argument("--degree", type=int)
    p.add_argument("--mesh", choices=MESH_FAMILIES, default=None)
    p.add_argument("--levels", help="comma-separated resolutions, e.g. 4,8,16,32")
    p.add_argument("--preset", default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--bounds", help="u_a,u_b for constrained schemes")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--lloyd", type=int, default=None)
    p.add_argument("--pgd-tol", type=float, default=None)
    p.add_argument("--pgd-theta", type=float, default=None)
    p.add_argument("--pgd-max-iters", type=int, default=None)


def _config_from_args(args):
    if args.config:
        text = Path(args.config).read_text()
        cfg = validate_config(text)
        # command-line values override the document
        if args.out:
            cfg.output_dir = args.out
        return cfg
    if args.scheme is None or args.degree is None:
        raise ConfigError("either --config or --scheme/--degree are required")
    levels = [4, 8, 16, 32]
    if args.levels:
        levels = [int(tok) for tok in args.levels.split(",") if tok.strip()]
    bounds = None
    if args.bounds:
        toks = args.bounds.split(",")
        if len(toks) != 2:
            raise ConfigError("--bounds expects 'u_a,u_b'")
        bounds = (float(toks[0]), float(toks[1]))
    pgd = PgdConfig(
        max_iters=args.pgd_max_iters if args.pgd_max_iters else 500,
        tol=args.pgd_tol if args.pgd_tol else 1e-10,
        step=args.pgd_theta if args.pgd_theta else 0.5)
    return ExperimentConfig(
        scheme=args.scheme, degree=args.degree,
        mesh_family=args.mesh or "cartesian", levels=levels,
        preset=args.preset or "", lam=args.lam, bounds=bounds, pgd=pgd,
        output_dir=args.out or "out",
        rng_seed=args.seed if args.seed is not None else 42,
        lloyd_iters=args.lloyd if args.lloyd is not None else 10)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="hho-control",
        description="convergence studies for HHO optimal-control schemes")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run_parser(sub)
    sub.add_parser("presets", help="list available problem presets")
    pm = sub.add_parser("mesh", help="generate a mesh file")
    pm.add_argument("--family", choices=MESH_FAMILIES, required=True)
    pm.add_argument("--cells", type=int, required=True,
                    help="grid resolution n (cartesian) or seed count (voronoi)")
    pm.add_argument("--seed", type=int, default=42)
    pm.add_argument("--lloyd", type=int, default=10)
    pm.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    try:
        if args.command == "presets":
            for pid in presets_mod.preset_ids():
                print(f"{pid}: {presets_mod.get_preset(pid).description}")
            for alias, target in (("uc2-default", "uc1-default"),
                                  ("wc1-default", "wc-default"),
                                  ("wc2-default", "wc-default")):
                print(f"{alias}: alias of {target}")
            return 0
        if args.command == "mesh":
            if args.family == "cartesian":
                mesh = make_cartesian(args.cells)
            else:
                mesh = make_voronoi(args.cells, rng_seed=args.seed,
                                    lloyd_iters=args.lloyd)
            Path(args.out).write_text(write_mesh(mesh))
            return 0
        cfg = _config_from_args(args)
        report = run_experiment(cfg)
        for line in _markdown_table(report.records, report.rates):
            print(line)
        return 0
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
