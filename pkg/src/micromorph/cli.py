"""Command-line front end: INI config parsing, model dispatch and file
emission.

Exit codes: 0 success, 1 solver failure, 2 invalid material parameters,
3 config error.
"""
from __future__ import annotations

import argparse
import configparser
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import coercivity, green
from .assembly import (assemble_further_relaxed, assemble_gauge,
                       assemble_gauge_load, assemble_load, assemble_relaxed,
                       dump_matrix_market)
from .constitutive import (IsotropicParams, iso_to_tensors, special_case_params,
                           validate_gauge, validate_relaxed)
from .dislocation import alpha_from_field, einstein_symmetry_check
from .mesh import build_box_mesh
from .polynomials import PolyMat3
from .solver import SolverError, solve
from .spaces import DiscreteField, build_spaces, eval_curl_P, eval_P
from .tensors import alpha_from_nye, nye_from_alpha
from .vtk_io import write_vtk

EXIT_OK = 0
EXIT_SOLVER = 1
EXIT_PARAMS = 2
EXIT_CONFIG = 3

MODELS = ("relaxed", "further_relaxed", "gauge")
LOAD_PRESETS = ("zero", "constant", "trig_bubble", "poly_bubble")

_SCHEMA = {
    "model": {"kind"},
    "mesh": {"n", "bounds"},
    "params": {"mu_e", "lambda_e", "mu_c", "mu_h", "lambda_h", "a1", "a2", "a3"},
    "loads": {"f", "f_amplitude", "m", "m_amplitude", "sigma0", "sigma0_amplitude"},
    "solver": {"tol", "max_iter"},
    "output": {"dir", "matrix_market"},
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    model: str
    n: tuple
    bounds: tuple
    params: IsotropicParams
    f_preset: str = "zero"
    f_amplitude: np.ndarray = None
    m_preset: str = "zero"
    m_amplitude: np.ndarray = None
    sigma0_preset: str = "zero"
    sigma0_amplitude: np.ndarray = None
    tol: float = 1e-10
    max_iter: int | None = None
    out_dir: str = "out"
    matrix_market: bool = False
    extra: dict = field(default_factory=dict)


def _floats(raw, count, what):
    try:
        vals = [float(v) for v in raw.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"malformed number in {what}: {raw!r}") from exc
    if len(vals) != count:
        raise ConfigError(f"{what} needs {count} numbers, got {len(vals)}")
    return vals


def parse_config(path) -> RunConfig:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(comment_prefixes=("#",), inline_comment_prefixes=("#",))
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc

    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key in cp[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {section}.{key}")

    def need(section, key):
        if not cp.has_option(section, key):
            raise ConfigError(f"missing required key {section}.{key}")
        return cp.get(section, key)

    model = need("model", "kind").strip()
    if model not in MODELS:
        raise ConfigError(f"model.kind must be one of {MODELS}, got {model!r}")

    n = tuple(int(v) for v in _floats(need("mesh", "n"), 3, "mesh.n"))
    if min(n) < 1:
        raise ConfigError("mesh.n entries must be >= 1")
    if cp.has_option("mesh", "bounds"):
        b = _floats(cp.get("mesh", "bounds"), 6, "mesh.bounds")
        bounds = (tuple(b[:3]), tuple(b[3:]))
    else:
        bounds = ((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))

    def fparam(key, default=None):
        if cp.has_option("params", key):
            return _floats(cp.get("params", key), 1, f"params.{key}")[0]
        if default is None:
            raise ConfigError(f"missing required key params.{key}")
        return default

    params = IsotropicParams(
        mu_e=fparam("mu_e"), lambda_e=fparam("lambda_e"), mu_c=fparam("mu_c", 0.0),
        mu_h=fparam("mu_h", 0.0), lambda_h=fparam("lambda_h", 0.0),
        a1=fparam("a1"), a2=fparam("a2"), a3=fparam("a3"))

    cfg = RunConfig(model=model, n=n, bounds=bounds, params=params)

    def preset(key, amp_key, count):
        name = cp.get("loads", key, fallback="zero").strip()
        if name not in LOAD_PRESETS:
            raise ConfigError(f"unknown load preset loads.{key} = {name!r}")
        amp = None
        if cp.has_option("loads", amp_key):
            amp = np.array(_floats(cp.get("loads", amp_key), count, f"loads.{amp_key}"))
        elif name != "zero":
            raise ConfigError(f"loads.{amp_key} required for preset {name!r}")
        return name, amp

    if cp.has_section("loads"):
        cfg.f_preset, cfg.f_amplitude = preset("f", "f_amplitude", 3)
        cfg.m_preset, cfg.m_amplitude = preset("m", "m_amplitude", 9)
        cfg.sigma0_preset, cfg.sigma0_amplitude = preset("sigma0", "sigma0_amplitude", 9)

    if cp.has_option("solver", "tol"):
        cfg.tol = _floats(cp.get("solver", "tol"), 1, "solver.tol")[0]
    if cp.has_option("solver", "max_iter"):
        cfg.max_iter = int(_floats(cp.get("solver", "max_iter"), 1, "solver.max_iter")[0])
    if cp.has_option("output", "dir"):
        cfg.out_dir = cp.get("output", "dir").strip()
    if cp.has_option("output", "matrix_market"):
        raw = cp.get("output", "matrix_market").strip().lower()
        if raw not in ("true", "false", "0", "1", "yes", "no"):
            raise ConfigError(f"output.matrix_market must be boolean, got {raw!r}")
        cfg.matrix_market = raw in ("true", "1", "yes")
    return cfg


# ---------------------------------------------------------------------------
# built-in analytic load presets
# ---------------------------------------------------------------------------

def _bubble_trig(x, bounds):
    lo, hi = np.asarray(bounds[0]), np.asarray(bounds[1])
    s = (np.asarray(x) - lo) / (hi - lo)
    return float(np.prod(np.sin(np.pi * s)))


def _bubble_poly(x, bounds):
    lo, hi = np.asarray(bounds[0]), np.asarray(bounds[1])
    s = (np.asarray(x) - lo) / (hi - lo)
    return float(np.prod(s * (1.0 - s)))


def load_callable(preset, amplitude, shape, bounds):
    if preset == "zero" or amplitude is None:
        return None
    amp = np.asarray(amplitude, dtype=float).reshape(shape)
    if preset == "constant":
        return lambda x: amp
    if preset == "trig_bubble":
        return lambda x: amp * _bubble_trig(x, bounds)
    if preset == "poly_bubble":
        return lambda x: amp * _bubble_poly(x, bounds)
    raise ConfigError(f"unknown preset {preset!r}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _validate_params(cfg: RunConfig, out):
    report = validate_gauge(cfg.params) if cfg.model == "gauge" \
        else validate_relaxed(cfg.params)
    if report.valid:
        print(f"parameters valid ({report.regime})", file=out)
        return EXIT_OK
    print("invalid parameters; violated conditions:", file=out)
    for v in report.violated:
        print(f"  {v}", file=out)
    return EXIT_PARAMS


def cmd_validate(cfg: RunConfig, args, out=sys.stdout):
    return _validate_params(cfg, out)


def cmd_solve(cfg: RunConfig, args, out=sys.stdout):
    code = _validate_params(cfg, out)
    if code != EXIT_OK:
        return code
    os.makedirs(cfg.out_dir, exist_ok=True)
    mesh = build_box_mesh(cfg.n, cfg.bounds)
    spaces = build_spaces(mesh)
    T = iso_to_tensors(cfg.params)
    threads = args.threads
    try:
        if cfg.model == "gauge":
            e_space = spaces[1]
            A = assemble_gauge(e_space, T, threads=threads)
            sigma0 = load_callable(cfg.sigma0_preset, cfg.sigma0_amplitude,
                                   (3, 3), cfg.bounds)
            b = assemble_gauge_load(e_space, sigma0) if sigma0 is not None \
                else np.zeros(A.dimension)
            rep = solve(A, b, tol=cfg.tol, max_iter=cfg.max_iter)
            e_h = DiscreteField(e_space, rep.x)
            fields = {
                "elastic_distortion": np.array([eval_P(e_h, t, [0.25] * 4)
                                                for t in range(mesh.num_tets)]),
                "dislocation_density": alpha_from_field(e_h, "from_e").values,
            }
            u_out = np.zeros((len(mesh.vertices), 3))
        else:
            assemble = assemble_relaxed if cfg.model == "relaxed" \
                else assemble_further_relaxed
            A = assemble(spaces, T, threads=threads)
            f = load_callable(cfg.f_preset, cfg.f_amplitude, (3,), cfg.bounds)
            M = load_callable(cfg.m_preset, cfg.m_amplitude, (3, 3), cfg.bounds)
            b = assemble_load(spaces, f=f, M=M, threads=threads)
            rep = solve(A, b, tol=cfg.tol, max_iter=cfg.max_iter)
            nu = spaces[0].n_dofs
            u_h = DiscreteField(spaces[0], rep.x[:nu])
            p_h = DiscreteField(spaces[1], rep.x[nu:])
            u_out = np.zeros((len(mesh.vertices), 3))
            for v in range(len(mesh.vertices)):
                pos = spaces[0].vertex_dof[v]
                if pos >= 0:
                    u_out[v] = u_h.coefficients[3 * pos:3 * pos + 3]
            fields = {
                "micro_distortion": np.array([eval_P(p_h, t, [0.25] * 4)
                                              for t in range(mesh.num_tets)]),
                "curl_P": np.array([eval_curl_P(p_h, t)
                                    for t in range(mesh.num_tets)]),
                "dislocation_density": alpha_from_field(p_h, "from_P").values,
            }
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    vtk_path = os.path.join(cfg.out_dir, "solution.vtk")
    write_vtk(vtk_path, mesh, point_vectors={"displacement": u_out},
              cell_tensors=fields)
    summary = os.path.join(cfg.out_dir, "summary.csv")
    with open(summary, "w") as fh:
        fh.write("model,dofs,iterations,relative_residual,energy\n")
        fh.write(f"{cfg.model},{A.dimension},{rep.iterations},"
                 f"{rep.relative_residual:.12g},{rep.energy:.12g}\n")
    if cfg.matrix_market:
        dump_matrix_market(os.path.join(cfg.out_dir, "system.mtx"), A)
    print(f"solved {cfg.model}: {A.dimension} dofs, energy {rep.energy:.12g}, "
          f"residual {rep.relative_residual:.3e}", file=out)
    print(f"wrote {vtk_path} and {summary}", file=out)
    return EXIT_OK


def cmd_constants(cfg: RunConfig, args, out=sys.stdout):
    kinds = coercivity.INEQUALITY_KINDS if args.spec == "all" else (args.spec,)
    for kind in kinds:
        if kind not in coercivity.INEQUALITY_KINDS:
            print(f"unknown inequality spec {kind!r}", file=sys.stderr)
            return EXIT_CONFIG
    code = _validate_params(cfg, out)
    if code != EXIT_OK:
        return code
    os.makedirs(cfg.out_dir, exist_ok=True)
    ns = args.levels or [2, 4, 8]
    rows = []
    for kind in kinds:
        try:
            rows.extend(coercivity.monotonicity_study(
                kind, ns=ns, params=cfg.params, threads=args.threads))
        except SolverError as exc:
            print(f"eigensolver failure on {kind}: {exc}", file=sys.stderr)
            return EXIT_SOLVER
    path = os.path.join(cfg.out_dir, "constants.csv")
    with open(path, "w") as fh:
        fh.write(coercivity.study_to_csv(rows))
    print(f"wrote {path}", file=out)
    return EXIT_OK


def cmd_green(cfg: RunConfig, args, out=sys.stdout):
    os.makedirs(cfg.out_dir, exist_ok=True)
    p = cfg.params
    if args.what == "lengths":
        rows = ["case,l1_sq,l2_sq,l3_sq,l4_sq,imaginary"]

        def fmt(ls):
            vals = ["" if v is None else f"{v:.12g}" for v in ls.values()]
            imag = any(ls.imaginary(k) for k in (1, 2, 3, 4) if ls.defined(k))
            return ",".join(vals) + f",{str(imag).lower()}"

        try:
            rows.append("generic," + fmt(green.lengths(p)))
            for case in ("Edelen", "PopovKroener", "Einstein", "StrainGradient"):
                d = 1.0 if case == "PopovKroener" else None
                ls = green.special_case_lengths(case, p.a1, p, d=d)
                rows.append(f"{case}," + fmt(ls))
        except ValueError as exc:
            print(f"invalid parameters for length table: {exc}", file=sys.stderr)
            return EXIT_PARAMS
        path = os.path.join(cfg.out_dir, "lengths.csv")
        with open(path, "w") as fh:
            fh.write("\n".join(rows) + "\n")
        print(f"wrote {path}", file=out)
        return EXIT_OK

    # ray sampling of the Green tensor
    try:
        ray = [float(v) for v in args.ray.split(",")]
    except (AttributeError, ValueError):
        print("--ray expects x0,y0,z0,dx,dy,dz,n", file=sys.stderr)
        return EXIT_CONFIG
    if len(ray) != 7:
        print("--ray expects 7 comma-separated values", file=sys.stderr)
        return EXIT_CONFIG
    x0 = np.array(ray[:3])
    dx = np.array(ray[3:6])
    count = int(ray[6])
    if count < 1 or np.linalg.norm(dx) == 0:
        print("--ray needs n >= 1 and a nonzero direction", file=sys.stderr)
        return EXIT_CONFIG
    header = ["r"] + [f"G{i}{j}{k}{l}" for i in range(3) for j in range(3)
                      for k in range(3) for l in range(3)]
    rows = [",".join(header)]
    try:
        for step in range(1, count + 1):
            x = x0 + step * dx
            G = green.green_tensor(x, p)
            r = float(np.linalg.norm(x))
            rows.append(",".join([f"{r:.12g}"] + [f"{v:.12g}" for v in G.ravel()]))
    except ValueError as exc:
        print(f"invalid parameters for the Green tensor: {exc}", file=sys.stderr)
        return EXIT_PARAMS
    path = os.path.join(cfg.out_dir, "green_ray.csv")
    with open(path, "w") as fh:
        fh.write("\n".join(rows) + "\n")
    print(f"wrote {path}", file=out)
    return EXIT_OK


def cmd_nye(args, out=sys.stdout):
    try:
        vals = [float(v) for v in args.matrix.replace(",", " ").split()]
    except ValueError:
        print("--matrix expects 9 numbers", file=sys.stderr)
        return EXIT_CONFIG
    if len(vals) != 9:
        print("--matrix expects 9 numbers", file=sys.stderr)
        return EXIT_CONFIG
    alpha = np.array(vals).reshape(3, 3)
    kappa = nye_from_alpha(alpha)
    back = alpha_from_nye(kappa)
    err = float(np.max(np.abs(back - alpha)))
    print("kappa = " + " ".join(f"{v:.12g}" for v in kappa.ravel()), file=out)
    print("alpha(kappa) = " + " ".join(f"{v:.12g}" for v in back.ravel()), file=out)
    print(f"roundtrip max error = {err:.3e}", file=out)
    return EXIT_OK


def cmd_einstein_check(cfg: RunConfig, args, out=sys.stdout):
    os.makedirs(cfg.out_dir, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    x = np.array([0.3, -0.2, 0.5])
    rows = ["family,max_skew_norm,verdict"]
    worst_all = 0.0
    for _ in range(args.samples):
        P = PolyMat3.random(rng, degree=3)
        worst_all = max(worst_all, einstein_symmetry_check((-6.0, 6.0, 1.0), P, x))
    rows.append(f"einstein_all_P,{worst_all:.3e},"
                f"{'symmetric' if worst_all <= 1e-12 else 'NOT_symmetric'}")
    worst_sym = 0.0
    for _ in range(args.samples):
        P = PolyMat3.random(rng, degree=3).sym()
        worst_sym = max(worst_sym, einstein_symmetry_check((1.0, -1.0, 0.7), P, x))
    rows.append(f"a1_eq_minus_a2_sym_P,{worst_sym:.3e},"
                f"{'symmetric' if worst_sym <= 1e-12 else 'NOT_symmetric'}")
    best_counter = 0.0
    for _ in range(args.samples):
        P = PolyMat3.random(rng, degree=3).sym()
        best_counter = max(best_counter,
                           einstein_symmetry_check((1.0, 1.0, 0.0), P, x))
    rows.append(f"counterexample_a1_eq_a2,{best_counter:.3e},"
                f"{'asymmetric' if best_counter > 1e-3 else 'UNEXPECTEDLY_symmetric'}")
    path = os.path.join(cfg.out_dir, "einstein_check.csv")
    with open(path, "w") as fh:
        fh.write("\n".join(rows) + "\n")
    ok = worst_all <= 1e-12 and worst_sym <= 1e-12 and best_counter > 1e-3
    print(f"wrote {path}", file=out)
    return EXIT_OK if ok else EXIT_SOLVER


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="micromorph",
                                 description="relaxed micromorphic and "
                                             "dislocation gauge toolbox")
    ap.add_argument("--config", help="INI config file")
    ap.add_argument("--threads", type=int, default=1,
                    help="worker threads for assembly (1 = bitwise reproducible)")
    ap.add_argument("--out", help="output directory (overrides [output] dir)")
    sub = ap.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", help="check material parameters for the model")
    sub.add_parser("solve", help="assemble and solve the configured problem")

    c = sub.add_parser("constants", help="discrete coercivity constants")
    c.add_argument("spec", help="inequality kind or 'all'")
    c.add_argument("--levels", type=int, nargs="+",
                   help="mesh resolutions, default 2 4 8")

    g = sub.add_parser("green", help="characteristic lengths / Green samples")
    g.add_argument("what", choices=("lengths", "ray"))
    g.add_argument("--ray", help="x0,y0,z0,dx,dy,dz,n")

    n = sub.add_parser("nye", help="Nye-map roundtrip of a 3x3 matrix")
    n.add_argument("--matrix", required=True, help="9 numbers, row major")

    e = sub.add_parser("einstein-check", help="moment-stress symmetry families")
    e.add_argument("--samples", type=int, default=25)
    e.add_argument("--seed", type=int, default=0)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "nye":
        return cmd_nye(args)
    if args.config is None:
        print("--config is required for this command", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out:
        cfg.out_dir = args.out
    handlers = {
        "validate": cmd_validate,
        "solve": cmd_solve,
        "constants": cmd_constants,
        "green": cmd_green,
        "einstein-check": cmd_einstein_check,
    }
    return handlers[args.command](cfg, args)


if __name__ == "__main__":
    sys.exit(main())
