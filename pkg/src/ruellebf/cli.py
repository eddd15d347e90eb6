"""Command-line front end.

One JSON config document drives every run; see README for the schema. All
floating-point output is locale-independent scientific notation with 17
significant digits, grid points are emitted in input order regardless of
worker completion order, and identical configs produce byte-identical
output files.

Exit codes: 0 success, 1 config error, 2 model invalid, 3 numerical
non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import bf_engine, feynman, flat_zeta, graded_core, orbits as orbits_mod

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_MODEL = 2
EXIT_NONCONVERGENT = 3


class ConfigError(ValueError):
    def __init__(self, path, message):
        super().__init__(f"config error at {path}: {message}")
        self.path = path


class ModelError(ValueError):
    pass


def _fmt(x: float) -> str:
    return format(float(x), ".16e")


def _require(cond, path, message):
    if not cond:
        raise ConfigError(path, message)


def _load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError("<file>", f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON: {exc}")
    _require(isinstance(cfg, dict), "<root>", "config must be a JSON object")
    return cfg


def _parse_rep(cfg) -> orbits_mod.Representation:
    rep = cfg.get("rep", {"trivial": True})
    _require(isinstance(rep, dict) and len(rep) == 1, "rep", "need {'trivial': true} or {'character': theta}")
    if "trivial" in rep:
        return orbits_mod.Representation("trivial")
    if "character" in rep:
        theta = rep["character"]
        _require(isinstance(theta, (int, float)), "rep.character", "angle must be a number")
        return orbits_mod.Representation("character", float(theta))
    raise ConfigError("rep", f"unknown representation {list(rep)[0]!r}")


def _parse_truncation(cfg):
    trunc = cfg.get("truncation", {})
    _require(isinstance(trunc, dict), "truncation", "must be an object")
    n_max = trunc.get("n_max", 8)
    l_max = trunc.get("L_max", 12.0)
    k_ord = trunc.get("K", 8)
    for name, value in (("n_max", n_max), ("K", k_ord)):
        _require(isinstance(value, int) and value > 0, f"truncation.{name}", "must be a positive integer")
    _require(isinstance(l_max, (int, float)) and l_max > 0, "truncation.L_max", "must be positive")
    return int(n_max), float(l_max), int(k_ord)


def _parse_grid(cfg):
    grid = cfg.get("grid", [])
    _require(isinstance(grid, list), "grid", "must be a list")
    out = []
    for i, entry in enumerate(grid):
        if isinstance(entry, (int, float)):
            out.append(complex(entry))
        elif isinstance(entry, list) and len(entry) == 2 and all(isinstance(x, (int, float)) for x in entry):
            out.append(complex(entry[0], entry[1]))
        else:
            raise ConfigError(f"grid[{i}]", "entries are numbers or [re, im] pairs")
    return out


def _parse_model(cfg, rep):
    model = cfg.get("model")
    _require(isinstance(model, dict) and len(model) == 1, "model",
             "exactly one of catmap | spectrum_file | matrix required")
    kind = next(iter(model))
    body = model[kind]
    if kind == "catmap":
        _require(isinstance(body, dict), "model.catmap", "must be an object")
        a = body.get("A")
        _require(isinstance(a, list) and len(a) == 4 and all(isinstance(x, int) for x in a),
                 "model.catmap.A", "need 4 integers (row major)")
        roof = body.get("roof", 1.0)
        _require(isinstance(roof, (int, float)) and roof > 0, "model.catmap.roof", "must be positive")
        try:
            toral = orbits_mod.HyperbolicToralModel(((a[0], a[1]), (a[2], a[3])), float(roof), rep)
        except ValueError as exc:
            raise ModelError(str(exc))
        return "catmap", toral
    if kind == "spectrum_file":
        _require(isinstance(body, str), "model.spectrum_file", "must be a path string")
        return "spectrum", body
    if kind == "matrix":
        _require(isinstance(body, dict), "model.matrix", "must be an object")
        d = body.get("d")
        _require(isinstance(d, list) and d and all(isinstance(r, list) for r in d),
                 "model.matrix.d", "must be a matrix (list of rows)")
        iota = body.get("iota")
        split_cfg = body.get("graded_split")
        try:
            cx = graded_core.ToyBFComplex(np.array(d, dtype=complex),
                                          None if iota is None else np.array(iota, dtype=complex))
            split = None
            if split_cfg is not None:
                _require(isinstance(split_cfg, list), "model.matrix.graded_split",
                         "must be a list of [degree, size] pairs")
                blocks, at = [], 0
                for pair in split_cfg:
                    _require(isinstance(pair, list) and len(pair) == 2, "model.matrix.graded_split",
                             "entries are [degree, size]")
                    deg, size = int(pair[0]), int(pair[1])
                    blocks.append((deg, cx.L0[at:at + size, at:at + size]))
                    at += size
                _require(at == cx.n, "model.matrix.graded_split", "sizes must sum to the dimension")
                split = tuple(blocks)
            bf = bf_engine.MatrixBFModel(cx, split)
        except (ValueError, graded_core.SingularBlockError) as exc:
            raise ModelError(str(exc))
        return "matrix", bf
    raise ConfigError("model", f"unknown model source {kind!r}")


def _orbit_data(kind, model, rep, n_max):
    """(orbits, m, model_id); raises ModelError for invalid dynamics."""
    if kind == "catmap":
        ok, _ = orbits_mod.anosov_check(model)
        if not ok:
            raise ModelError("not Anosov: an eigenvalue lies on the unit circle")
        orbs = orbits_mod.enumerate_prime_orbits(model, n_max)
        a = model.A
        rep_tag = "trivial" if rep.kind == "trivial" else f"character{rep.character_angle!r}"
        model_id = f"catmap[{a[0][0]},{a[0][1]},{a[1][0]},{a[1][1]}]|roof={model.roof!r}|{rep_tag}"
        return orbs, 1, model_id
    if kind == "spectrum":
        try:
            orbs = orbits_mod.load_length_spectrum(model)
        except FileNotFoundError:
            raise ConfigError("model.spectrum_file", f"file not found: {model}")
        except orbits_mod.SpectrumFormatError as exc:
            raise ModelError(str(exc))
        m = orbs[0].m if orbs else 1
        return orbs, m, f"spectrum:{model}"
    raise ConfigError("model", "this command needs an orbit model (catmap or spectrum_file)")


def _matrix_model_id(bf) -> str:
    digest = hashlib.sha256(np.ascontiguousarray(bf.complex.L0).tobytes()).hexdigest()
    return f"matrix:{digest[:12]}"


def _emit(rows, columns, fmt, out_path, meta=None):
    """Serialize rows deterministically; CSV appends meta as comment lines."""
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_cell(row[c]) for c in columns])
        for key, value in (meta or {}).items():
            buf.write(f"# {key}: {_format_cell(value)}\n")
        payload = buf.getvalue()
    else:
        doc = {"rows": rows}
        if meta:
            doc["meta"] = meta
        payload = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(payload)
    else:
        sys.stdout.write(payload)


def _format_cell(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        return _fmt(value)
    return value


def _map_grid(func, grid, threads):
    if threads <= 1 or len(grid) <= 1:
        return [func(z) for z in grid]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, grid))


def cmd_orbits(cfg, fmt, out_path, threads):
    rep = _parse_rep(cfg)
    n_max, _, _ = _parse_truncation(cfg)
    kind, model = _parse_model(cfg, rep)
    orbs, m, model_id = _orbit_data(kind, model, rep, n_max)
    rows = []
    for orbit in orbs:
        rows.append({
            "period": orbit.period if orbit.period is not None else -1,
            "length": orbit.length,
            "multiplicity": orbit.multiplicity,
            "m": orbit.m,
            "trace_P": float(np.trace(orbit.poincare)),
            "det_P": float(np.linalg.det(orbit.poincare)),
            "rho_re": float(orbit.rho[0, 0].real),
            "rho_im": float(orbit.rho[0, 0].imag),
        })
    meta = {"model_id": model_id}
    if kind == "catmap":
        counts = orbits_mod.prime_orbit_counts(model, n_max)
        consistent = True
        for n in range(1, n_max + 1):
            total = sum(d * counts[d] for d in range(1, n + 1) if n % d == 0)
            consistent = consistent and total == orbits_mod.fixed_point_count(model, n)
        meta["sieve_consistent"] = consistent
    columns = ["period", "length", "multiplicity", "m", "trace_P", "det_P", "rho_re", "rho_im"]
    _emit(rows, columns, fmt, out_path, meta)
    return EXIT_OK


def cmd_zeta(cfg, fmt, out_path, threads):
    rep = _parse_rep(cfg)
    n_max, l_max, _ = _parse_truncation(cfg)
    kind, model = _parse_model(cfg, rep)
    orbs, m, model_id = _orbit_data(kind, model, rep, n_max)
    grid = _parse_grid(cfg)
    _require(bool(grid), "grid", "a non-empty lambda grid is required")
    chunks = _map_grid(lambda lam: flat_zeta.zeta_grid_rows(orbs, m, [lam], l_max), grid, threads)
    rows = [row for chunk in chunks for row in chunk]
    if orbs and all(math.isinf(r["tail_bound"]) for r in rows if r["k"] == -1):
        sys.stderr.write("all grid points diverge (every tail bound is infinite)\n")
        return EXIT_NONCONVERGENT
    columns = ["re_lambda", "im_lambda", "k", "re_logzeta", "im_logzeta", "tail_bound", "L_max", "defect"]
    _emit(rows, columns, fmt, out_path, {"model_id": model_id})
    return EXIT_OK


def _bridge_rows_orbit(orbs, m, model_id, grid, l_max, lambda0, k_ord, threads):
    def one(hbar):
        res = bf_engine.zeta_expectation_bridge(orbs, m, hbar, l_max, lambda0, k_ord)
        flag = "radius_violation" if res.series_diverges else ""
        shared = {"model_id": model_id, "hbar_re": hbar.real, "hbar_im": hbar.imag, "K": k_ord, "flag": flag}
        return [
            dict(shared, route="det",
                 series_value_re=res.series_value.real, series_value_im=res.series_value.imag,
                 closed_form_re=res.det_value.real, closed_form_im=res.det_value.imag,
                 defect=res.defect_series_det),
            dict(shared, route="orbit",
                 series_value_re=res.series_value.real, series_value_im=res.series_value.imag,
                 closed_form_re=res.euler_value.real, closed_form_im=res.euler_value.imag,
                 defect=abs(res.series_value - res.euler_value)),
        ]
    return _map_grid(one, grid, threads)


def _bridge_rows_matrix(bf, model_id, grid, k_ord, threads):
    def one(hbar):
        shared = {"model_id": model_id, "hbar_re": hbar.real, "hbar_im": hbar.imag, "K": k_ord}
        closed = bf_engine.closed_form_expectation(bf, hbar)
        try:
            res = bf_engine.expectation_value(bf, hbar, k_ord)
            return [dict(shared, route="det", flag="",
                         series_value_re=res.series_value.real, series_value_im=res.series_value.imag,
                         closed_form_re=closed.real, closed_form_im=closed.imag,
                         defect=res.defect)]
        except bf_engine.ConvergenceRadiusError:
            return [dict(shared, route="det", flag="radius_violation",
                         series_value_re=None, series_value_im=None,
                         closed_form_re=closed.real, closed_form_im=closed.imag,
                         defect=None)]
    return _map_grid(one, grid, threads)


def cmd_bridge(cfg, fmt, out_path, threads):
    rep = _parse_rep(cfg)
    n_max, l_max, k_ord = _parse_truncation(cfg)
    kind, model = _parse_model(cfg, rep)
    grid = _parse_grid(cfg)
    _require(bool(grid), "grid", "a non-empty hbar grid is required")
    lambda0 = cfg.get("lambda0", 3.0)
    _require(isinstance(lambda0, (int, float)), "lambda0", "must be a number")
    if kind == "matrix":
        chunks = _bridge_rows_matrix(model, _matrix_model_id(model), grid, k_ord, threads)
    else:
        orbs, m, model_id = _orbit_data(kind, model, rep, n_max)
        chunks = _bridge_rows_orbit(orbs, m, model_id, grid, l_max, float(lambda0), k_ord, threads)
    rows = [row for chunk in chunks for row in chunk]
    columns = ["model_id", "hbar_re", "hbar_im", "K", "route", "flag",
               "series_value_re", "series_value_im", "closed_form_re", "closed_form_im", "defect"]
    _emit(rows, columns, fmt, out_path)
    return EXIT_OK


def cmd_partition(cfg, fmt, out_path, threads):
    rep = _parse_rep(cfg)
    kind, model = _parse_model(cfg, rep)
    _require(kind == "matrix", "model", "the partition command needs a matrix model")
    grid = _parse_grid(cfg)
    _require(bool(grid), "grid", "a non-empty hbar grid is required")
    cx = model.complex
    scale = max(1.0, float(np.max(np.abs(cx.L0)))) ** cx.n

    def one(hbar):
        value = graded_core.toy_bf_partition(cx, hbar)
        return {
            "hbar_re": hbar.real,
            "hbar_im": hbar.imag,
            "partition": value,
            "resonance_hit": bool(value < 1e-9 * scale),
        }

    rows = _map_grid(one, grid, threads)
    _emit(rows, ["hbar_re", "hbar_im", "partition", "resonance_hit"], fmt, out_path,
          {"model_id": _matrix_model_id(model)})
    return EXIT_OK


def cmd_diagrams(cfg, fmt, out_path, threads):
    rep = _parse_rep(cfg)
    _, _, k_ord = _parse_truncation(cfg)
    kind, model = _parse_model(cfg, rep)
    lambda0 = complex(cfg.get("lambda0", 0.0))
    gi = gt = None
    if kind == "matrix":
        prop = bf_engine.regularized_propagator(model, 0.0, math.inf, lambda0)
        n = model.complex.n
        ext = cfg.get("external", {})
        a_vec = np.array(ext.get("A", [1.0] * n), dtype=complex)
        b_vec = np.array(ext.get("B", [1.0] * n), dtype=complex)
        _require(a_vec.shape == (n,) and b_vec.shape == (n,), "external", f"vectors must have length {n}")
        gi = bf_engine.gamma_int(model, prop, a_vec, b_vec, k_ord)
        gt = bf_engine.gamma_tr(model, lambda0, k_ord + 1)
    rows = []
    for order in range(1, k_ord + 1):
        for graph in feynman.enumerate_connected_quadratic(order):
            is_chain = bool(graph.tails)
            power = order if is_chain else order + 1
            row = {
                "order": order,
                "kind": "chain" if is_chain else "cycle",
                "n_vertices": graph.n_vertices,
                "n_edges": len(graph.edges),
                "n_tails": len(graph.tails),
                "aut_order": feynman.automorphism_order(graph.without_tail_labels()),
                "hbar_power": power,
                "coeff_re": math.nan,
                "coeff_im": math.nan,
            }
            if kind == "matrix":
                series = gi if is_chain else gt
                if power <= series.order:
                    c = series.coefficient(power)
                    row["coeff_re"], row["coeff_im"] = c.real, c.imag
            rows.append(row)
    columns = ["order", "kind", "n_vertices", "n_edges", "n_tails", "aut_order",
               "hbar_power", "coeff_re", "coeff_im"]
    _emit(rows, columns, fmt, out_path)
    return EXIT_OK


COMMANDS = {
    "orbits": cmd_orbits,
    "zeta": cmd_zeta,
    "bridge": cmd_bridge,
    "diagrams": cmd_diagrams,
    "partition": cmd_partition,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ruelle-bf",
        description="Ruelle zeta functions from orbit sums and BF-type diagram series",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="path to the JSON run configuration")
    parser.add_argument("--out", default=None, help="output file (default: stdout)")
    parser.add_argument("--format", default="csv", choices=["csv", "json"])
    parser.add_argument("--threads", type=int, default=1)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args.config)
        return COMMANDS[args.command](cfg, args.format, args.out, max(1, args.threads))
    except ConfigError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_CONFIG
    except ModelError as exc:
        sys.stderr.write(f"model invalid: {exc}\n")
        return EXIT_MODEL
    except (bf_engine.IRDivergenceError, feynman.ConvergenceError) as exc:
        sys.stderr.write(f"non-convergent: {exc}\n")
        return EXIT_NONCONVERGENT


if __name__ == "__main__":
    sys.exit(main())
