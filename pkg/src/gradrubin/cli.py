"""Command-line front end: ``gradrubin {solve2d,shell3d,verify} --config PATH``.

Exit codes: 0 success, 1 configuration or compatibility error, 2 the solve
did not converge or failed numerically, 3 a verification check failed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import jsonschema
import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .current2d import OperatorError
from .elliptic2d import SolverError
from .geometry import Domain2D, GeometryError, RadialBumpMap, make_grid
from .gradrubin2d import (AdmissibilityError, ConvergenceError, SolverConfig,
                          reference_potential_field, solve_fixed_point)
from .divcurl2d import CompatibilityError, DivCurlSolver, reference_field_2d
from .shell3d import BoundarySH, TangentialSH, linear_sweep3d
from .suites import SUITES
from .transport2d import TransportError

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGENCE, EXIT_VERIFY = 0, 1, 2, 3

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_FOURIER_MODES = {"type": "array", "items": {
    "type": "object", "additionalProperties": False, "required": ["k"],
    "properties": {"k": {"type": "integer", "minimum": 0}, "cos": _NUM, "sin": _NUM}}}
_SH_MODES = {"type": "array", "items": {
    "type": "object", "additionalProperties": False, "required": ["l", "m"],
    "properties": {"l": {"type": "integer", "minimum": 0}, "m": {"type": "integer"},
                   "re": _NUM, "im": _NUM}}}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "domain": {
            "type": "object", "additionalProperties": False, "required": ["type", "L"],
            "properties": {
                "type": {"enum": ["annulus", "mapped", "shell"]},
                "L": {"type": "number", "exclusiveMinimum": 1},
                "map": {
                    "type": "object", "additionalProperties": False, "required": ["eps"],
                    "properties": {
                        "type": {"enum": ["radial_bump"]},
                        "eps": _NUM,
                        "cutoff": {"enum": ["inner", "outer"]},
                        "harmonics": {"type": "object", "additionalProperties": {
                            "type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}}}}}},
        "discretization": {
            "type": "object", "additionalProperties": False,
            "properties": {"K": {"type": "integer", "minimum": 1},
                           "N_r": {"type": "integer", "minimum": 16},
                           "l_max": {"type": "integer", "minimum": 1},
                           "fd_order": {"enum": [2, 4, 6, 8]}}},
        "boundary": {
            "type": "object", "additionalProperties": False,
            "properties": {"f_inner": _FOURIER_MODES, "f_outer": _FOURIER_MODES,
                           "g": _FOURIER_MODES, "balance_flux": {"type": "boolean"},
                           "f_inner_sh": _SH_MODES, "f_outer_sh": _SH_MODES,
                           "g_grad_sh": _SH_MODES, "g_curl_sh": _SH_MODES}},
        "solver": {
            "type": "object", "additionalProperties": False,
            "properties": {"tol_fixed_point": _POS, "tol_residual": _POS,
                           "max_iter": {"type": "integer", "minimum": 1},
                           "damping": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                           "perturbation_size": _POS,
                           "mode": {"enum": ["fixed_J", "pressure_J"]},
                           "J": _NUM, "reuse_operator": {"type": "boolean"}}},
        "verify": {
            "type": "object", "additionalProperties": False,
            "properties": {"L": {"type": "number", "exclusiveMinimum": 1},
                           "K": {"type": "integer", "minimum": 1},
                           "N_r": {"type": "integer", "minimum": 16},
                           "k_max": {"type": "integer", "minimum": 1},
                           "l_max": {"type": "integer", "minimum": 1},
                           "delta": _NUM,
                           "eps_values": {"type": "array", "items": _POS, "minItems": 2}}},
        "output": {
            "type": "object", "additionalProperties": False,
            "properties": {"prefix": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"}}},
    },
}


class ConfigError(ValueError):
    pass


# deterministic serialization

def _fmt(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    return format(x, ".17g")


def dumps(obj, indent: int = 0) -> str:
    """JSON with sorted keys and floats printed to 17 significant digits."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent + 1)}"
                 for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(pad + dumps(v, indent + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt(float(obj))
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist(), indent)
    return json.dumps(str(obj))


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def load_config(path: str | Path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(map(str, exc.absolute_path)) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from exc
    return cfg


class Writer:
    """Writes artifacts with a provenance header into the output directory."""

    def __init__(self, out: Path, cfg: dict, command: str):
        self.out = out
        self.prefix = cfg.get("output", {}).get("prefix", command)
        self.meta = {"version": __version__, "config_sha256": config_hash(cfg),
                     "command": command}
        out.mkdir(parents=True, exist_ok=True)

    def json(self, name: str, payload: dict) -> Path:
        p = self.out / f"{self.prefix}_{name}.json"
        p.write_text(dumps({"meta": self.meta, **payload}) + "\n")
        return p

    def csv(self, name: str, columns: list[str], rows: np.ndarray) -> Path:
        p = self.out / f"{self.prefix}_{name}.csv"
        lines = [f"# gradrubin {self.meta['version']}",
                 f"# config_sha256 {self.meta['config_sha256']}",
                 ",".join(columns)]
        lines += [",".join(_fmt(float(v)) for v in row) for row in rows]
        p.write_text("\n".join(lines) + "\n")
        return p


# 2D

def _domain(cfg: dict) -> Domain2D:
    d = cfg["domain"]
    if d["type"] == "shell":
        raise ConfigError("solve2d needs an annulus or mapped domain")
    if d["type"] == "mapped":
        m = d.get("map")
        if m is None:
            raise ConfigError("mapped domain needs a map block")
        return Domain2D(float(d["L"]), RadialBumpMap(m["eps"], d["L"], m.get("harmonics"),
                                                     m.get("cutoff", "inner")))
    return Domain2D(float(d["L"]))


def _fourier(modes, th) -> np.ndarray:
    out = np.zeros_like(th)
    for md in modes or []:
        out += md.get("cos", 0.0) * np.cos(md["k"] * th) + md.get("sin", 0.0) * np.sin(md["k"] * th)
    return out


def _solver_config(cfg: dict) -> SolverConfig:
    disc = cfg.get("discretization", {})
    s = cfg.get("solver", {})
    kw = {k: s[k] for k in ("tol_fixed_point", "tol_residual", "max_iter", "damping",
                            "perturbation_size", "mode", "J", "reuse_operator") if k in s}
    return SolverConfig(K=disc.get("K", 16), N_r=disc.get("N_r", 128),
                        fd_order=disc.get("fd_order", 6), **kw)


def boundary_data_2d(cfg: dict, domain: Domain2D, grid):
    """Reference traces plus configured perturbation modes."""
    b = cfg.get("boundary", {})
    solver = DivCurlSolver(domain, grid)
    B0 = (reference_field_2d(domain, grid) if domain.is_exact_annulus
          else reference_potential_field(solver))
    th = grid.phi
    fm = B0.normal_trace("inner") + _fourier(b.get("f_inner"), th)
    fp = B0.normal_trace("outer") + _fourier(b.get("f_outer"), th)
    if b.get("balance_flux", False):
        dl_in, dl_out = solver.dl["inner"], solver.dl["outer"]
        imbalance = np.mean(fm * dl_in + fp * dl_out) * 2 * np.pi
        fp = fp - imbalance / (np.mean(dl_out) * 2 * np.pi)
    return (fm, fp), _fourier(b.get("g"), th)


def cmd_solve2d(cfg: dict, out: Path) -> int:
    domain = _domain(cfg)
    scfg = _solver_config(cfg)
    grid = make_grid(domain, scfg.N_r, scfg.K)
    f, g = boundary_data_2d(cfg, domain, grid)
    w = Writer(out, cfg, "solve2d")
    try:
        B, p, rep = solve_fixed_point(f, g, scfg, domain, grid=grid)
    except ConvergenceError as exc:
        w.json("report", exc.report.as_dict())
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    rr, tt = grid.mesh()
    b_r, b_phi = B.polar()
    j = rep.current.values
    w.csv("fields", ["r", "phi", "B_r", "B_phi", "j", "p"],
          np.column_stack([a.ravel() for a in (rr, tt, b_r, b_phi, j, p.values)]))
    w.csv("pressure", ["r", "phi", "p"],
          np.column_stack([a.ravel() for a in (rr, tt, p.values)]))
    w.json("report", rep.as_dict())
    print(f"converged in {rep.n_iterations} iterations; "
          f"contraction {rep.contraction_factor()}; loop defect {p.loop_defect:.3e}")
    return EXIT_OK


# 3D

def _sh(modes, l_max: int) -> BoundarySH:
    d = {}
    for md in modes or []:
        if abs(md["m"]) > md["l"] or md["l"] > l_max:
            raise ConfigError(f"invalid spherical-harmonic mode ({md['l']}, {md['m']})")
        d[(md["l"], md["m"])] = complex(md.get("re", 0.0), md.get("im", 0.0))
    return BoundarySH.from_modes(l_max, d)


def cmd_shell3d(cfg: dict, out: Path) -> int:
    if cfg["domain"]["type"] != "shell":
        raise ConfigError("shell3d needs a shell domain")
    L = float(cfg["domain"]["L"])
    disc = cfg.get("discretization", {})
    l_max = disc.get("l_max", 16)
    N_r = disc.get("N_r", 256)
    b = cfg.get("boundary", {})
    f = (_sh(b.get("f_inner_sh"), l_max), _sh(b.get("f_outer_sh"), l_max))
    g = TangentialSH(_sh(b.get("g_grad_sh"), l_max), _sh(b.get("g_curl_sh"), l_max))
    profiles, diag = linear_sweep3d(f, g, L, l_max, N_r)
    w = Writer(out, cfg, "shell3d")
    rows = []
    for (l, m), P in sorted(profiles.items()):
        for i, r in enumerate(P.r):
            rows.append([l, m, r, P.br[i].real, P.br[i].imag, P.b1[i].real, P.b1[i].imag,
                         P.b2[i].real, P.b2[i].imag])
    w.csv("profiles", ["l", "m", "r", "br_re", "br_im", "b1_re", "b1_im", "b2_re", "b2_im"],
          np.array(rows))
    w.json("diagnostics", {"L": L, "l_max": l_max, "N_r": N_r, **diag.as_dict()})
    print(f"sweep done; trace error {diag.trace_error:.3e}, curl residual {diag.curl_residual:.3e}")
    return EXIT_OK


# verification

_SUITE_KEYS = {
    "multipliers2d": ("L", "K", "N_r"),
    "symbol2d": ("L", "k_max", "N_r"),
    "kernels": (),
    "multipliers3d": ("l_max",),
    "symbol3d": ("l_max",),
    "mapped2d": ("L", "K", "N_r", "eps_values", "delta"),
    "fixedpoint2d": ("L", "K", "N_r", "delta"),
    "trivial2d": ("L", "K", "N_r"),
    "jacobian2d": ("L", "K", "N_r"),
    "grid_convergence": ("L", "K"),
}


def cmd_verify(suite: str, cfg: dict, out: Path) -> int:
    v = cfg.get("verify", {})
    kw = {k: (tuple(v[k]) if isinstance(v[k], list) else v[k])
          for k in _SUITE_KEYS[suite] if k in v}
    result = SUITES[suite](**kw)
    w = Writer(out, cfg, f"verify_{suite}")
    w.json("report", result.as_dict(timing=False))
    w.json("timing", result.timing_dict())
    for c in result.checks:
        print(c.line())
    return EXIT_OK if result.passed else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gradrubin", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"gradrubin {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--threads", type=int, default=None, help="cap on BLAS/LAPACK threads")
        sp.add_argument("--out", default=".", help="output directory")
    common(sub.add_parser("solve2d", help="2D Grad-Rubin fixed point"))
    common(sub.add_parser("shell3d", help="linearized sweep on the spherical shell"))
    sv = sub.add_parser("verify", help="run a verification suite")
    sv.add_argument("suite", choices=sorted(SUITES))
    common(sv)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
        out = Path(args.out)
        with threadpool_limits(limits=args.threads):
            if args.command == "solve2d":
                return cmd_solve2d(cfg, out)
            if args.command == "shell3d":
                return cmd_shell3d(cfg, out)
            return cmd_verify(args.suite, cfg, out)
    except (ConfigError, CompatibilityError, GeometryError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TransportError, OperatorError, SolverError, AdmissibilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
