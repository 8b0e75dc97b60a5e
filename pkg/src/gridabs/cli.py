"""Command-line front end: predict, optimize, abstract, compare, certify.

Configuration is a single JSON file; command-line flags override the matching
config entries.  Exit codes: 0 success, 2 configuration error, 3 infeasible
constraints, 4 optimizer non-convergence, 5 integration blow-up.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import abstraction, models, numat, optimizer, predictor, report
from .growth import check_growth_monotone, to_predictor_term
from .optimizer import BoxBounds, DivergenceError, InfeasibleRegion, Objective


class ConfigError(ValueError):
    """Invalid or missing configuration; messages carry the dotted field path."""


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _require(mapping, key: str, path: str):
    if not isinstance(mapping, dict) or key not in mapping:
        raise ConfigError(f"{path} is required")
    return mapping[key]


def _vector(value, path: str) -> np.ndarray:
    try:
        return numat.as_vector(value, None, path)
    except ValueError as e:
        raise ConfigError(str(e)) from None


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    return cfg


def _model_spec(cfg: dict) -> models.ModelSpec:
    m = _require(cfg, "model", "model")
    name = _require(m, "name", "model.name")
    if not isinstance(name, str):
        raise ConfigError("model.name must be a string")
    growth = m.get("growth", {}) or {}
    try:
        return models.ModelSpec(
            name=name,
            params=m.get("params", {}) or {},
            inputs=_require(m, "inputs", "model.inputs"),
            tau=float(_require(m, "tau", "model.tau")),
            w=m.get("w"),
            z=m.get("z"),
            growth_L=growth.get("L"),
            growth_v=growth.get("v"),
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(f"model: {e}") from None


def _plant(cfg: dict):
    spec = _model_spec(cfg)
    try:
        plant = models.lookup(spec)
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"model: {e}") from None
    if spec.z is None:
        z = np.zeros(plant.n)
    else:
        z = _vector(spec.z, "model.z")
        if z.size != plant.n or np.any(z < 0.0):
            raise ConfigError("model.z must be a nonnegative state-dimension vector")
    return plant, z


def _domain(cfg: dict):
    d = _require(cfg, "domain", "domain")
    lb = _vector(_require(d, "lb", "domain.lb"), "domain.lb")
    ub = _vector(_require(d, "ub", "domain.ub"), "domain.ub")
    if lb.size != ub.size or np.any(ub <= lb):
        raise ConfigError("domain.lb/domain.ub must satisfy lb < ub componentwise")
    periodic = d.get("periodic")
    if periodic is not None and len(periodic) != lb.size:
        raise ConfigError("domain.periodic must match the state dimension")
    return lb, ub, periodic


def _grid(cfg: dict) -> abstraction.UniformGrid:
    lb, ub, periodic = _domain(cfg)
    g = _require(cfg, "grid", "grid")
    try:
        if "eta" in g:
            eta = _vector(g["eta"], "grid.eta")
            return abstraction.UniformGrid.from_eta(lb, ub, eta, periodic)
        if "subdivisions" in g:
            return abstraction.UniformGrid.from_subdivisions(lb, ub, g["subdivisions"], periodic)
    except ValueError as e:
        raise ConfigError(f"grid: {e}") from None
    raise ConfigError("grid.eta or grid.subdivisions is required")


def _gamma(cfg: dict) -> float:
    lb, ub, _ = _domain(cfg)
    g = _require(cfg, "grid", "grid")
    if "volume_gamma" in g:
        return float(g["volume_gamma"])
    volume = float(np.prod(ub - lb))
    if "target_cells" in g:
        target = float(g["target_cells"])
        if target < 1.0:
            raise ConfigError("grid.target_cells must be >= 1")
        return math.log(volume / target)
    if "eta" in g:
        eta = _vector(g["eta"], "grid.eta")
        if np.any(eta <= 0.0):
            raise ConfigError("grid.eta must be positive")
        return float(np.sum(np.log(eta)))
    raise ConfigError("grid.volume_gamma, grid.target_cells, or grid.eta is required")


def _box(cfg: dict, n: int) -> BoxBounds | None:
    opt = cfg.get("optimize", {}) or {}
    lower = opt.get("box_lower")
    upper = opt.get("box_upper")
    if lower is None and upper is None:
        return None
    lower = [None] * n if lower is None else list(lower)
    upper = [None] * n if upper is None else list(upper)
    if len(lower) != n or len(upper) != n:
        raise ConfigError("optimize.box_lower/box_upper must have one entry per dimension")
    for b in list(lower) + list(upper):
        if b is not None and float(b) <= 0.0:
            raise ConfigError("box bounds are grid parameters and must be positive")
    try:
        return BoxBounds.from_eta(lower, upper)
    except ValueError as e:
        raise ConfigError(f"optimize: {e}") from None


def _append_csv(path: str, header: str, row: str):
    need_header = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", encoding="ascii", newline="\n") as fh:
        if need_header:
            fh.write(header + "\n")
        fh.write(row + "\n")


def _substeps(cfg: dict, plant) -> int:
    sub = cfg.get("substeps")
    if sub is None:
        return abstraction.default_substeps(plant.tau)
    sub = int(sub)
    if sub < 1:
        raise ConfigError("substeps must be >= 1")
    return sub


def _write_stats_sidecar(path: str, grid, stats: abstraction.AbstractionStats):
    payload = {
        "n": grid.n,
        "m": [int(c) for c in grid.counts],
        "inputs": stats.num_inputs,
        "total_transitions": stats.total_transitions,
        "blocked_pairs": stats.blocked_pairs,
        "per_input_transitions": stats.per_input_transitions,
    }
    with open(path + ".stats.json", "w", encoding="ascii", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def cmd_predict(cfg: dict, args) -> int:
    plant, z = _plant(cfg)
    grid = _grid(cfg)
    if grid.n != plant.n:
        raise ConfigError("domain dimension does not match the model")
    terms = [to_predictor_term(gb, z) for gb in plant.growth]
    per_input = [predictor.predict_single(t, grid.eta) for t in terms]
    family = predictor.predict_family(terms, grid.eta)
    total = predictor.predict_abstraction_total(terms, grid.eta, grid.num_cells)
    for i, e in enumerate(per_input):
        print(f"E[input {i}] = {e:.12g}")
    print(f"E_family_per_cell = {family:.12g}")
    print(f"cells = {grid.num_cells}")
    print(f"predicted_total = {total:.12g}")
    csv_path = args.csv or (cfg.get("output", {}) or {}).get("csv_path")
    if csv_path:
        n = grid.n
        header = ",".join(f"eta_{i + 1}" for i in range(n)) + ",cells,per_cell,predicted_total"
        row = (
            ",".join(_fmt(v) for v in grid.eta)
            + f",{grid.num_cells},{_fmt(family)},{_fmt(total)}"
        )
        _append_csv(csv_path, header, row)
    return 0


def cmd_optimize(cfg: dict, args) -> int:
    plant, z = _plant(cfg)
    lb, ub, _ = _domain(cfg)
    if lb.size != plant.n:
        raise ConfigError("domain dimension does not match the model")
    gamma = _gamma(cfg)
    obj = Objective.from_growth(plant.growth, z)
    box = _box(cfg, plant.n)
    opt = cfg.get("optimize", {}) or {}
    tol = float(opt.get("tol", 1e-10))
    max_iter = int(opt.get("max_iter", 500))
    sol = optimizer.minimize(obj, gamma, box=box, tol=tol, max_iter=max_iter)
    volume = float(np.prod(ub - lb))
    cells = volume / math.exp(gamma)
    print(f"certificate: {sol.certificate}")
    print(f"converged: {sol.converged}")
    print(f"iterations: {sol.iterations}")
    print(f"kkt_residual: {sol.kkt_residual:.6g}")
    print("eta_star = " + " ".join(f"{v:.12g}" for v in sol.eta_star))
    print(f"E_family_per_cell = {sol.value:.12g}")
    print(f"cells_at_volume = {cells:.12g}")
    print(f"predicted_total = {sol.value * cells:.12g}")
    subdivisions = np.maximum(1, np.rint((ub - lb) / sol.eta_star).astype(np.int64))
    eta_snap = (ub - lb) / subdivisions
    terms = obj.terms
    family_snap = predictor.predict_family(terms, eta_snap)
    cells_snap = int(np.prod(subdivisions))
    print("snapped_subdivisions = " + " ".join(str(int(k)) for k in subdivisions))
    print("snapped_eta = " + " ".join(f"{v:.12g}" for v in eta_snap))
    print(f"snapped_cells = {cells_snap}")
    print(f"snapped_predicted_total = {family_snap * cells_snap:.12g}")
    if not sol.converged:
        print(
            f"optimizer did not converge within {max_iter} iterations "
            f"(kkt_residual {sol.kkt_residual:.6g})",
            file=sys.stderr,
        )
        return 4
    return 0


def cmd_abstract(cfg: dict, args) -> int:
    plant, z = _plant(cfg)
    grid = _grid(cfg)
    if grid.n != plant.n:
        raise ConfigError("domain dimension does not match the model")
    substeps = _substeps(cfg, plant)
    threads = args.threads or cfg.get("threads") or os.cpu_count() or 1
    trans_path = args.transitions or (cfg.get("output", {}) or {}).get("transitions_path")
    sink = None
    if trans_path:
        sink = abstraction.TransitionWriter(trans_path, grid, len(plant.inputs))
    try:
        stats = abstraction.build_abstraction(
            grid, plant, z, substeps=substeps, sink=sink, threads=int(threads)
        )
    finally:
        if sink is not None:
            sink.close()
    if trans_path:
        _write_stats_sidecar(trans_path, grid, stats)
    print(f"cells = {stats.num_cells}")
    print(f"inputs = {stats.num_inputs}")
    for i, t in enumerate(stats.per_input_transitions):
        print(f"transitions[input {i}] = {t}")
    print(f"total_transitions = {stats.total_transitions}")
    print(f"blocked_pairs = {stats.blocked_pairs}")
    print(f"wall_time_s = {stats.wall_time_s:.3f}")
    if trans_path:
        print(f"transitions_file = {trans_path} ({os.path.getsize(trans_path)} bytes)")
    return 0


def cmd_compare(cfg: dict, args) -> int:
    plant, z = _plant(cfg)
    grid = _grid(cfg)
    if grid.n != plant.n:
        raise ConfigError("domain dimension does not match the model")
    terms = [to_predictor_term(gb, z) for gb in plant.growth]
    predicted = predictor.predict_abstraction_total(terms, grid.eta, grid.num_cells)
    substeps = _substeps(cfg, plant)
    threads = args.threads or cfg.get("threads") or os.cpu_count() or 1
    trans_path = args.transitions or (cfg.get("output", {}) or {}).get("transitions_path")
    sink = None
    if trans_path:
        sink = abstraction.TransitionWriter(trans_path, grid, len(plant.inputs))
    try:
        stats = abstraction.build_abstraction(
            grid, plant, z, substeps=substeps, sink=sink, threads=int(threads)
        )
    finally:
        if sink is not None:
            sink.close()
    if trans_path:
        _write_stats_sidecar(trans_path, grid, stats)
    rep = abstraction.compare_counts(predicted, stats.total_transitions)
    print(f"predicted = {rep.predicted:.12g}")
    print(f"actual = {rep.actual:.12g}")
    print(f"rel_err = {rep.rel_err:.6g}")
    print(f"blocked_pairs = {stats.blocked_pairs}")
    print(f"wall_time_s = {stats.wall_time_s:.3f}")
    out = cfg.get("output", {}) or {}
    csv_path = args.csv or out.get("csv_path")
    n = grid.n
    if csv_path:
        header = ",".join(f"eta_{i + 1}" for i in range(n)) + ",predicted,actual,rel_err"
        row = (
            ",".join(_fmt(v) for v in grid.eta)
            + f",{_fmt(rep.predicted)},{_fmt(rep.actual)},{_fmt(rep.rel_err)}"
        )
        _append_csv(csv_path, header, row)
    plot_path = args.plot or out.get("plot_path")
    if plot_path:
        rows = []
        if csv_path and os.path.exists(csv_path):
            with open(csv_path, "r", encoding="ascii") as fh:
                lines = [ln.strip() for ln in fh if ln.strip()]
            for ln in lines[1:]:
                parts = ln.split(",")
                rows.append({"predicted": float(parts[n]), "actual": float(parts[n + 1])})
        else:
            rows.append({"predicted": rep.predicted, "actual": rep.actual})
        report.render_compare_figure(rows, plot_path)
        print(f"figure = {plot_path}")
    return 0


def cmd_certify(cfg: dict, args) -> int:
    plant, z = _plant(cfg)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    details = optimizer.certificate_details(plant.growth, z)
    witness = None
    for i, d in enumerate(details):
        flags = " ".join(f"{k}={v}" for k, v in d.items())
        monotone = check_growth_monotone(plant.growth[i], seed=seed)
        print(f"input {i}: {flags} growth_monotone={monotone}")
        if witness is None and any(d.values()):
            route = next(k for k, v in d.items() if v)
            witness = (i, route)
    cert = optimizer.uniqueness_certificate(list(plant.growth), z)
    if cert == optimizer.UNIQUE_GUARANTEED and witness is not None:
        print(f"certificate: {cert} (witness: input {witness[0]} via {witness[1]})")
    else:
        print(f"certificate: {cert}")
    return 0


_COMMANDS = {
    "predict": cmd_predict,
    "optimize": cmd_optimize,
    "abstract": cmd_abstract,
    "compare": cmd_compare,
    "certify": cmd_certify,
}


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="gridabs",
        description="Grid abstractions: predict transition counts, optimize the "
        "grid aspect ratio at fixed cell volume, build and compare abstractions.",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON configuration")
        p.add_argument("--threads", type=int, default=None, help="worker threads for builds")
        p.add_argument("--seed", type=int, default=None, help="seed for sampled self-checks")
        p.add_argument("--csv", default=None, help="append a summary row to this CSV file")
        p.add_argument("--transitions", default=None, help="write the transition file here")
        p.add_argument("--plot", default=None, help="render the comparison figure here")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except InfeasibleRegion as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return 3
    except DivergenceError as e:
        print(f"non-convergence: {e}", file=sys.stderr)
        return 4
    except abstraction.IntegrationBlowup as e:
        ctx = ""
        if e.cell_flat is not None:
            ctx = f" (cell {e.cell_flat}, input {e.input_index})"
        print(f"integration blow-up: {e}{ctx}", file=sys.stderr)
        return 5


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
