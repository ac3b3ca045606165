"""Batch driver: ``qdouble run config.json`` plus quick ``gsd``, ``smatrix`` and ``audit`` commands."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from .channels import Channel
from .errors import CapacityError, ConfigError, QDoubleError
from .groups import FiniteGroup, build_group, count_anyons, count_torus_gsd, fusion_rules
from .lattice import (
    Region,
    TorusLattice,
    annulus_tripartition,
    block_region,
    dual_path_ribbon,
    open_ribbon,
    plaquette_ribbon,
    standard_ribbons,
    vertex_ribbon,
    xi_x,
    xi_y,
)
from .operators import ground_state, sector_orbit
from .states import ClassicalDiagonal, PureEnsemble, cmi

SCHEMA_VERSION = 1
EXPERIMENTS = ("gsd", "smatrix", "fusion", "decohere", "symmetry-audit", "anomaly", "swssb", "cmi-profile", "extremal")

log = logging.getLogger("qdouble")

EXIT_OK, EXIT_CONFIG, EXIT_CAPACITY, EXIT_CHECK = 0, 1, 2, 3


# ----------------------------------------------------------------------------- config


@dataclass
class ExperimentSpec:
    name: str
    params: dict = field(default_factory=dict)


@dataclass
class ExperimentConfig:
    group: object
    lattice: tuple[int, int]
    experiments: list[ExperimentSpec]
    output: str | None = None
    tolerance: float = dg.STRONG_TOL

    @classmethod
    def from_json(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        if "group" not in data:
            raise ConfigError("config needs a 'group' entry")
        exps = []
        for item in data.get("experiments", []):
            spec = ExperimentSpec(item) if isinstance(item, str) else ExperimentSpec(item.get("name", ""), dict(item))
            spec.params.pop("name", None)
            if spec.name not in EXPERIMENTS:
                raise ConfigError(f"unknown experiment {spec.name!r}; choose from {', '.join(EXPERIMENTS)}")
            exps.append(spec)
        if not exps:
            raise ConfigError("config lists no experiments")
        return cls(
            data["group"],
            parse_lattice(data.get("lattice", [2, 2])),
            exps,
            data.get("output"),
            float(data.get("tolerance", dg.STRONG_TOL)),
        )

    def to_json(self) -> dict:
        return {
            "group": self.group,
            "lattice": list(self.lattice),
            "experiments": [{"name": e.name, **e.params} for e in self.experiments],
            "output": self.output,
            "tolerance": self.tolerance,
        }


def parse_lattice(value) -> tuple[int, int]:
    try:
        if isinstance(value, str):
            lx, ly = (int(t) for t in value.lower().split("x"))
        else:
            lx, ly = (int(t) for t in value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"cannot parse lattice {value!r}; use '3x3' or [3, 3]") from exc
    return lx, ly


def parse_ribbon(lat: TorusLattice, name: str):
    """Ribbon by name: xi_x[:row], xi_y[:col], vertex[:v], plaquette[:p], plaquette_outward[:p],
    open:v0:v1, dual:v:p_from:p_to."""
    head, *args = name.split(":")
    nums = [int(a) for a in args]
    makers = {
        "xi_x": lambda: xi_x(lat, *nums),
        "xi_y": lambda: xi_y(lat, *nums),
        "vertex": lambda: vertex_ribbon(lat, nums[0] if nums else 0),
        "plaquette": lambda: plaquette_ribbon(lat, nums[0] if nums else 0),
        "plaquette_outward": lambda: plaquette_ribbon(lat, nums[0] if nums else 0, outward=True),
        "open": lambda: open_ribbon(lat, nums[0], nums[1]),
        "dual": lambda: dual_path_ribbon(lat, *nums),
    }
    if head not in makers:
        raise ConfigError(f"unknown ribbon {name!r}")
    try:
        return makers[head]()
    except (IndexError, TypeError) as exc:
        raise ConfigError(f"ribbon {name!r} is missing arguments") from exc


def _class_by_rep(group: FiniteGroup, rep: int):
    return group.classes[group.class_of[int(rep)]]


def _irrep_by_label(group: FiniteGroup, label: str):
    for r in group.irreps:
        if r.label == label:
            return r
    raise ConfigError(f"group {group.name} has no irrep {label!r}")


def _cplx(z) -> list[float]:
    return [float(np.real(z)), float(np.imag(z))]


def _sector(params: dict) -> tuple[int, int]:
    a, b = params.get("sector", [0, 0])
    return int(a), int(b)


# ----------------------------------------------------------------------------- experiments


def exp_gsd(group, lat, params, tol):
    formula = count_torus_gsd(group)
    values = {"count_torus_gsd": formula, "anyon_count": count_anyons(group)}
    ok = formula == values["anyon_count"]
    if params.get("brute_force", True):
        try:
            values["brute_force_gsd"] = dg.brute_force_gsd(group, lat)
            ok = ok and values["brute_force_gsd"] == formula
        except CapacityError as exc:
            values["brute_force_gsd"] = None
            values["brute_force_note"] = str(exc)
    return values, ok


def exp_smatrix(group, lat, params, tol):
    md = dg.s_matrix(group)
    values = md.to_json()
    ok = md.unitarity_deviation <= 1e-8 and md.electric_magnetic_deviation <= 1e-10 and md.symmetry_deviation <= 1e-10
    return values, ok


def exp_fusion(group, lat, params, tol):
    rules = fusion_rules(group)
    dims = {r.label: r.dim for r in group.irreps}
    ok = sum(d * d for d in dims.values()) == group.order
    table = {f"{a}x{b}": "+".join(v) for (a, b), v in rules.items()}
    return {"dimensions": dims, "rules": table}, ok


def _initial_state(group, lat, params):
    return PureEnsemble.pure(ground_state(lat, group, _sector(params)))


def _channel(params) -> Channel | None:
    spec = params.get("channel", "z")
    if spec in (None, "none"):
        return None
    if isinstance(spec, str):
        spec = {"kind": spec}
    return Channel.from_json(spec)


def _state_summary(rho) -> dict:
    out = {"representation": rho.kind, "trace": rho.trace()}
    if isinstance(rho, ClassicalDiagonal):
        out["n_configs"] = int(len(rho.keys))
    if isinstance(rho, PureEnsemble):
        out["n_members"] = len(rho.members)
    try:
        out["entropy"] = rho.entropy()
        out["purity"] = rho.purity()
    except QDoubleError as exc:
        out["entropy_note"] = str(exc)
    return out


def exp_decohere(group, lat, params, tol):
    rho = _initial_state(group, lat, params)
    ch = _channel(params)
    if ch is not None:
        rho = ch.apply(rho)
    values = _state_summary(rho)
    return values, abs(values["trace"] - 1.0) <= 1e-9


def exp_symmetry_audit(group, lat, params, tol):
    rho = _initial_state(group, lat, params)
    ch = _channel(params)
    if ch is not None:
        rho = ch.apply(rho)
    if ch is not None and ch.kind == "z" and isinstance(rho, PureEnsemble):
        rho = rho.dephased()
    small = min(lat.lx, lat.ly) < 3
    e_names = params.get("electric_ribbons", ["xi_x", "xi_y", "plaquette", "vertex"])
    m_names = params.get("magnetic_ribbons", ["vertex"] if small else ["vertex", "plaquette_outward"])
    verdicts = dg.symmetry_audit(
        rho,
        group,
        [parse_ribbon(lat, n) for n in e_names],
        [parse_ribbon(lat, n) for n in m_names],
        tol,
        int(params.get("transversal_shift", 0)),
    )
    ok = all(v.verdict != "strong" or v.residual <= v.tolerance for v in verdicts)
    return {"state": _state_summary(rho), "verdicts": [v.to_json() for v in verdicts]}, ok


def _anomaly_ribbons(lat, params):
    p_in = int(params.get("plaquette", 0))
    v = int(params.get("vertex", lat.plaquette_edges(p_in)[0] // 2))
    quads, _ = lat.around_vertex(v)
    if p_in not in quads:
        raise ConfigError(f"vertex {v} is not a corner of plaquette {p_in}")
    p_out = next(q for q in quads if q != p_in)
    return plaquette_ribbon(lat, p_in), dual_path_ribbon(lat, v, p_out, p_in)


def exp_anomaly(group, lat, params, tol):
    rho = _initial_state(group, lat, params).dephased()
    xi, eta = _anomaly_ribbons(lat, params)
    reps = [_irrep_by_label(group, params["irrep"])] if "irrep" in params else group.irreps
    classes = [_class_by_rep(group, params["class"])] if "class" in params else group.classes[1:]
    rows = []
    for rep in reps:
        for cls in classes:
            try:
                res = dg.anomaly_phase(rho, group, rep, cls, xi, eta)
                rows.append({"irrep": rep.label, "class": cls.representative, **res.to_json()})
            except QDoubleError as exc:
                rows.append({"irrep": rep.label, "class": cls.representative, "error": str(exc)})
    ok = all("error" in r or abs(r["scaled_ratio"][0] - r["character_at_representative"][0]) <= 1e-9 for r in rows)
    return {"closed": xi.name, "open": eta.name, "phases": rows}, ok


def exp_swssb(group, lat, params, tol):
    pure = _initial_state(group, lat, params)
    rho = pure.dephased()
    _, eta = _anomaly_ribbons(lat, params)
    if "ribbon" in params:
        eta = parse_ribbon(lat, params["ribbon"])
    classes = [_class_by_rep(group, params["class"])] if "class" in params else group.classes
    rows = []
    for cls in classes:
        row = {"class": cls.representative}
        try:
            row["fidelity_decohered"] = dg.swssb_fidelity(rho, group, cls, eta)
            row["fidelity_pure"] = dg.swssb_fidelity(pure, group, cls, eta)
        except QDoubleError as exc:
            row["error"] = str(exc)
        rows.append(row)
    return {"open": eta.name, "rows": rows}, True


def exp_cmi_profile(group, lat, params, tol):
    rho = _initial_state(group, lat, params).dephased()
    seed_spec = params.get("seed", "plaquette")
    seed = block_region(lat, 0, 0, 1, 1, "plaquette") if seed_spec == "plaquette" else Region(tuple(seed_spec), "seed")
    rows = []
    for w in params.get("widths", [1, 2]):
        try:
            part = annulus_tripartition(lat, seed, int(w))
        except QDoubleError as exc:
            rows.append({"width": w, "error": str(exc)})
            continue
        if not part.c.edges:
            rows.append({"width": w, "error": "region C is empty"})
            continue
        rows.append({"width": w, "sizes": [len(part.a), len(part.b), len(part.c)], "cmi": cmi(rho, part)})
    ok = all(r.get("cmi", 0.0) <= 1e-10 for r in rows if r["width"] >= 2)
    return {"rows": rows}, ok


def exp_extremal(group, lat, params, tol):
    rep = dg.extremal_analysis(group, lat, int(params.get("width", 2)))
    ok = (
        rep.overlap_deviation <= 1e-10
        and all(v <= 1e-10 for v in rep.marginal_deviation.values())
        and all(c <= 1e-10 for c in rep.cmi)
        and all(m["ok"] for m in rep.mixture_checks)
        and rep.n_extremal == count_torus_gsd(group)
    )
    return rep.to_json(), ok


RUNNERS = {
    "gsd": exp_gsd,
    "smatrix": exp_smatrix,
    "fusion": exp_fusion,
    "decohere": exp_decohere,
    "symmetry-audit": exp_symmetry_audit,
    "anomaly": exp_anomaly,
    "swssb": exp_swssb,
    "cmi-profile": exp_cmi_profile,
    "extremal": exp_extremal,
}


# ----------------------------------------------------------------------------- driver


def _clean(obj):
    """JSON-safe, deterministic representation."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(round(float(obj), 12)) + 0.0
    if isinstance(obj, complex):
        return _cplx(obj)
    return obj


def run_config(cfg: ExperimentConfig) -> tuple[dict, int]:
    """Run every experiment; returns (report, exit status)."""
    started = datetime.now(timezone.utc).isoformat()
    try:
        group = build_group(cfg.group)
        lat = TorusLattice(*cfg.lattice)
    except QDoubleError as exc:
        raise ConfigError(str(exc)) from exc
    records, timings, status = [], {}, EXIT_OK
    for i, spec in enumerate(cfg.experiments):
        t0 = time.perf_counter()
        record = {"name": spec.name, "inputs": spec.params, "tolerance": cfg.tolerance}
        try:
            values, ok = RUNNERS[spec.name](group, lat, spec.params, cfg.tolerance)
            record.update(values=values, ok=bool(ok))
            if not ok:
                status = max(status, EXIT_CHECK)
        except CapacityError as exc:
            record.update(error={"type": "capacity", "message": str(exc)}, ok=False)
            status = EXIT_CAPACITY
        except ConfigError:
            raise
        except QDoubleError as exc:
            record.update(error={"type": type(exc).__name__, "message": str(exc)}, ok=False)
            status = max(status, EXIT_CHECK)
        timings[f"{i}:{spec.name}"] = int(round((time.perf_counter() - t0) * 1000))
        records.append(record)
    report = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg.to_json(),
        "group": {"name": group.name, "order": group.order},
        "lattice": [lat.lx, lat.ly],
        "experiments": records,
        # everything run-dependent lives here so the rest is byte-reproducible
        "timestamp": {"started": started, "runtime_ms": timings},
    }
    return _clean(report), status


def format_table(report: dict) -> str:
    lines = []
    for rec in report["experiments"]:
        flag = "ok" if rec.get("ok") else "FAIL"
        lines.append(f"{rec['name']:<16} {flag}")
        vals = rec.get("values", {})
        if rec["name"] == "gsd":
            for k in ("count_torus_gsd", "anyon_count", "brute_force_gsd"):
                lines.append(f"  {k:<18} {vals.get(k)}")
        elif rec["name"] == "fusion":
            for k, v in vals["rules"].items():
                lines.append(f"  {k:<12} = {v}")
        elif rec["name"] == "smatrix":
            names = vals["labels"]
            w = max(len(n) for n in names) + 1
            lines.append(" " * (w + 2) + "".join(f"{n:>{w + 6}}" for n in names))
            for n, row in zip(names, vals["s_real"]):
                lines.append(f"  {n:<{w}}" + "".join(f"{x:>{w + 6}.4f}" for x in row))
        elif rec["name"] == "symmetry-audit":
            for v in vals["verdicts"]:
                lines.append(f"  {v['operator']:<34} {v['verdict']:<7} residual {v['residual']:.3e}")
        elif rec["name"] == "anomaly":
            for r in vals["phases"]:
                if "error" in r:
                    lines.append(f"  {r['irrep']:<6} C{r['class']:<3} {r['error']}")
                else:
                    lines.append(
                        f"  {r['irrep']:<6} C{r['class']:<3} ratio {r['ratio'][0]:+.6f}  d*ratio {r['scaled_ratio'][0]:+.6f}"
                    )
        elif "error" in rec:
            lines.append(f"  {rec['error']['message']}")
    return "\n".join(lines)


def _write(report: dict, path: str | None) -> None:
    text = json.dumps(report, indent=2, sort_keys=True)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


def _merge_flags(data: dict, args) -> dict:
    for key in ("group", "lattice", "output"):
        flag = getattr(args, key, None)
        if flag is None:
            continue
        if key in data and data[key] != flag:
            log.warning("config value %s=%r overrides command-line %r", key, data[key], flag)
        else:
            data[key] = flag
    return data


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qdouble", description="Quantum double D(G) simulator")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run experiments from a JSON config")
    run.add_argument("config")
    run.add_argument("--group")
    run.add_argument("--lattice")
    run.add_argument("--output")
    run.add_argument("--table", action="store_true", help="print an aligned text summary to stderr")

    for name, helptext in (("gsd", "ground-state degeneracy"), ("smatrix", "modular S-matrix"), ("fusion", "Rep(G) fusion table")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--group", required=True)
        sp.add_argument("--lattice", default="2x2")
        sp.add_argument("--output")
        sp.add_argument("--table", action="store_true")

    au = sub.add_parser("audit", help="symmetry audit of a decohered ground state")
    au.add_argument("--group", required=True)
    au.add_argument("--lattice", default="2x2")
    au.add_argument("--channel", default="z", choices=["z", "x", "none"])
    au.add_argument("--edges", help="comma-separated edge list (default: all for z, edge 0 for x)")
    au.add_argument("--output")
    au.add_argument("--table", action="store_true")
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            try:
                data = json.loads(Path(args.config).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
            data = _merge_flags(data, args)
        elif args.command == "audit":
            if args.channel == "none":
                channel = "none"
            else:
                edges = [int(e) for e in args.edges.split(",")] if args.edges else ("all" if args.channel == "z" else [0])
                channel = {"kind": args.channel, "edges": edges}
            data = {"group": args.group, "lattice": args.lattice, "output": args.output,
                    "experiments": [{"name": "symmetry-audit", "channel": channel}]}
        else:
            data = {"group": args.group, "lattice": args.lattice, "output": args.output, "experiments": [args.command]}
        cfg = ExperimentConfig.from_json(data)
        report, status = run_config(cfg)
    except ConfigError as exc:
        print(json.dumps({"schema_version": SCHEMA_VERSION, "error": {"type": "config", "message": str(exc)}}), file=sys.stderr)
        return EXIT_CONFIG
    except CapacityError as exc:
        print(json.dumps({"schema_version": SCHEMA_VERSION, "error": {"type": "capacity", "message": str(exc)}}), file=sys.stderr)
        return EXIT_CAPACITY
    _write(report, cfg.output)
    if getattr(args, "table", False):
        print(format_table(report), file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
