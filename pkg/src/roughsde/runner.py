"""Experiment orchestration: flat INI configs, deterministic artifacts, CLI.

Every experiment writes three files into the output directory: a manifest
with the full resolved config and content hashes, a results.csv with one row
per atomic measurement, and a summary.json with the headline statistics.
Identical configs produce byte-identical outputs.

Exit codes: 0 success, 2 invalid config (message names the field), 3 runtime
overflow (message names the step).
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from ._kernels import backend
from .bounds import bound_check, build_ledger, greedy_partition
from .calculus import lemma_coeffs
from .errors import SchemeOverflowError
from .fbm import Grid, GridPath, HurstParams, cameron_martin_direction, sample_fbm, \
    sample_fbm_pair
from .fields import BANK_IDS, vector_field_bank
from .lift import ControlTable, build_cross, build_q, lift_piecewise_linear
from .scheme import SchemeConfig, coupled_refinement_errors, euler_run
from .trees import branch_stats, coefficient, enumerate_tree
from .variational import directional_derivative_run, fd_oracle, xi_run

__all__ = ["ExperimentConfig", "ConfigError", "run", "main", "vector_field_bank"]

KINDS = ("simulate", "converge", "malliavin-check", "bound-check", "tree-dump",
         "ledger-dump")

ENV_PREFIX = "ROUGHSDE_"


class ConfigError(ValueError):
    """Invalid experiment configuration; message names the offending field."""


@dataclass
class ExperimentConfig:
    kind: str
    options: dict = dc_field(default_factory=dict)

    def get(self, section: str, key: str, cast, default=None, required=False):
        raw = self.options.get(section, {}).get(key)
        if raw is None:
            if required:
                raise ConfigError(f"missing required field [{section}] {key}")
            return default
        try:
            return cast(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"field [{section}] {key}: {exc}") from exc


def _parse_floats(raw: str):
    return [float(tok) for tok in str(raw).replace(",", " ").split()]


def _parse_ints(raw: str):
    return [int(tok) for tok in str(raw).replace(",", " ").split()]


def load_config(path: str | None, overrides: dict | None = None,
                kind: str | None = None) -> ExperimentConfig:
    """Read an INI file, apply ROUGHSDE_SECTION__KEY env vars, then overrides."""
    parser = configparser.ConfigParser()
    if path is not None:
        read = parser.read(path)
        if not read:
            raise ConfigError(f"config file not found: {path}")
    options = {s: dict(parser.items(s)) for s in parser.sections()}
    for name, value in os.environ.items():
        if not name.startswith(ENV_PREFIX) or "__" not in name:
            continue
        section, key = name[len(ENV_PREFIX):].split("__", 1)
        options.setdefault(section.lower(), {})[key.lower()] = value
    for (section, key), value in (overrides or {}).items():
        options.setdefault(section, {})[key] = value
    resolved_kind = kind or options.get("experiment", {}).get("kind")
    if resolved_kind not in KINDS:
        raise ConfigError(
            f"field [experiment] kind: got {resolved_kind!r}, expected one of {KINDS}"
        )
    return ExperimentConfig(kind=resolved_kind, options=options)


def _model(cfg: ExperimentConfig):
    H = cfg.get("model", "h", float, required=True)
    p = cfg.get("model", "p", float)
    hurst = HurstParams(H, p) if p is not None else HurstParams.default(H)
    T = cfg.get("model", "t", float, default=1.0)
    bank = cfg.get("model", "bank", str, default="sincos-m2d2")
    if bank not in BANK_IDS:
        raise ConfigError(f"field [model] bank: unknown id {bank!r}")
    vf = vector_field_bank(bank)
    a = cfg.get("model", "a", _parse_floats, default=[0.1, -0.2])
    if len(a) != vf.out_shape[0]:
        raise ConfigError(
            f"field [model] a: needs {vf.out_shape[0]} entries, got {len(a)}"
        )
    return hurst, T, bank, vf, np.asarray(a)


def _map_seeds(fn, seeds, threads: int):
    """Run fn over seeds, merging results in seed order (deterministic)."""
    if threads <= 1:
        return [fn(s) for s in seeds]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, seeds))


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


def _exp_simulate(cfg: ExperimentConfig, seed: int, threads: int):
    hurst, T, bank, vf, a = _model(cfg)
    n = cfg.get("simulate", "n", int, default=256)
    paths = cfg.get("simulate", "paths", int, default=1)
    grid = Grid(T, n)
    d = vf.out_shape[1]
    rows = []
    for s in range(paths):
        x = sample_fbm(grid, hurst, d, seed=seed + s)
        y = euler_run(SchemeConfig(vf, a, hurst, grid), x)
        for k in range(n + 1):
            row = {"seed": seed + s, "k": k, "t": grid.times[k]}
            row.update({f"x{j}": x.values[k, j] for j in range(d)})
            row.update({f"y{i}": y.values[k, i] for i in range(len(a))})
            rows.append(row)
    summary = {"kind": "simulate", "n": n, "paths": paths, "bank": bank,
               "H": hurst.H, "T": T}
    return rows, summary


def _exp_converge(cfg: ExperimentConfig, seed: int, threads: int):
    hurst, T, bank, vf, a = _model(cfg)
    levels = cfg.get("converge", "levels", _parse_ints,
                     default=[128, 256, 512, 1024, 2048, 4096])
    mc = cfg.get("converge", "mc", int, default=200)
    scheme_cfg = SchemeConfig(vf, a, hurst, Grid(T, max(levels)))
    rows, summary = coupled_refinement_errors(scheme_cfg, levels, mc, seed)
    summary.update({"kind": "converge", "H": hurst.H, "bank": bank,
                    "target_rate": 2 * hurst.H - 0.5})
    return rows, summary


def _exp_malliavin(cfg: ExperimentConfig, seed: int, threads: int):
    hurst, T, bank, vf, a = _model(cfg)
    n_list = cfg.get("malliavin", "n_list", _parse_ints, default=[32, 64, 128])
    seeds = cfg.get("malliavin", "seeds", int, default=20)
    anchors = cfg.get("malliavin", "anchors", _parse_floats,
                      default=[0.25, 0.5, 0.75])
    eps = cfg.get("malliavin", "eps", float, default=1e-4)
    orders = cfg.get("malliavin", "orders", _parse_ints, default=[1, 2])
    d = vf.out_shape[1]
    rows = []

    def one_seed(s):
        out = []
        for n in n_list:
            grid = Grid(T, n)
            scheme_cfg = SchemeConfig(vf, a, hurst, grid)
            x = sample_fbm(grid, hurst, d, seed=s)
            y = euler_run(scheme_cfg, x)
            for frac in anchors:
                hbar = cameron_martin_direction(frac * T, grid, hurst.H)
                zs = directional_derivative_run(max(orders), scheme_cfg, y, x, hbar)
                for order in orders:
                    fd = fd_oracle(order, scheme_cfg, x, hbar, eps)
                    z = zs[order - 1]
                    dev = float(np.max(np.abs(z - fd)) / (1.0 + np.max(np.abs(z))))
                    out.append({"seed": s, "n": n, "anchor": frac, "order": order,
                                "rel_dev": dev})
        return out

    for chunk in _map_seeds(one_seed, range(seed, seed + seeds), threads):
        rows.extend(chunk)
    worst = max(r["rel_dev"] for r in rows)
    summary = {"kind": "malliavin-check", "H": hurst.H, "bank": bank, "eps": eps,
               "max_rel_dev": worst}
    return rows, summary


def _exp_bound(cfg: ExperimentConfig, seed: int, threads: int):
    hurst, T, bank, vf, a = _model(cfg)
    n_list = cfg.get("bound", "n_list", _parse_ints, default=[64, 128, 256])
    seeds = cfg.get("bound", "seeds", int, default=20)
    orders = cfg.get("bound", "orders", _parse_ints, default=[1, 2])
    k_config = cfg.get("bound", "k_config", float, default=1.0)
    depth = max(orders)
    ledger = build_ledger(vf, depth, hurst.p)
    d = vf.out_shape[1]
    finest = max(n_list)
    rows = []

    def one_seed(s):
        out = []
        x_f, b_f = sample_fbm_pair(Grid(T, finest), hurst, d, seed=s)
        for n in n_list:
            grid = Grid(T, n)
            x = x_f.restrict(finest // n)
            b = b_f.restrict(finest // n)
            scheme_cfg = SchemeConfig(vf, a, hurst, grid)
            y = euler_run(scheme_cfg, x)
            xi = xi_run(depth, scheme_cfg, y, x, b)
            lw = lift_piecewise_linear(
                GridPath(grid, np.concatenate([x.values, b.values], axis=1)))
            q = build_q(lift_piecewise_linear(x), hurst)
            qb = build_q(lift_piecewise_linear(b), hurst)
            omega = ControlTable(lw, q, qb, hurst)
            part = greedy_partition(omega, ledger.alpha, grid)
            for L in orders:
                diag = bound_check(L, xi, part, omega, ledger, k_config,
                                   scheme_cfg, x, b)
                diag["seed"] = s
                out.append(diag)
        return out

    for chunk in _map_seeds(one_seed, range(seed, seed + seeds), threads):
        rows.extend(chunk)
    summary = {"kind": "bound-check", "H": hurst.H, "p": hurst.p, "bank": bank,
               "alpha": ledger.alpha, "K_config": k_config}
    for L in orders:
        rho_by_n = {}
        defect_by_n = {}
        for n in n_list:
            sel = [r for r in rows if r["L"] == L and r["n"] == n]
            rho_by_n[str(n)] = max(r["rho"] for r in sel)
            defect_by_n[str(n)] = max(r["defect_margin_K2"] for r in sel)
        ratio = max(rho_by_n.values()) / min(rho_by_n.values())
        summary[f"L{L}"] = {
            "rho_by_n": rho_by_n,
            "rho_max_over_min": ratio,
            "defect_margin_K2_by_n": defect_by_n,
        }
    return rows, summary


def _exp_tree_dump(cfg: ExperimentConfig, seed: int, threads: int):
    depth = cfg.get("tree", "depth", int, required=True)
    rows = []
    for branch in enumerate_tree(depth):
        st = branch_stats(branch)
        c = coefficient(depth, branch)
        rows.append({
            "labels": json.dumps(list(branch)),
            "ell": json.dumps(list(st.ell)),
            "alpha": st.alpha,
            "coefficient": str(Fraction(c)),
        })
    summary = {"kind": "tree-dump", "depth": depth, "count": len(rows)}
    return rows, summary


def _exp_ledger_dump(cfg: ExperimentConfig, seed: int, threads: int):
    hurst, T, bank, vf, a = _model(cfg)
    order = cfg.get("ledger", "order", int, default=2)
    ledger = build_ledger(vf, order, hurst.p)
    flat = ledger.as_dict()
    rows = [{"constant": name, "value": json.dumps(value)}
            for name, value in flat.items()]
    summary = {"kind": "ledger-dump", "bank": bank, **flat}
    return rows, summary


_EXPERIMENTS = {
    "simulate": _exp_simulate,
    "converge": _exp_converge,
    "malliavin-check": _exp_malliavin,
    "bound-check": _exp_bound,
    "tree-dump": _exp_tree_dump,
    "ledger-dump": _exp_ledger_dump,
}


# ---------------------------------------------------------------------------
# Artifact writing
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _rows_to_csv(rows) -> str:
    if not rows:
        return ""
    cols = list(rows[0].keys())
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for row in rows:
        writer.writerow([_fmt(row.get(c, "")) for c in cols])
    return buf.getvalue()


def _json_dumps(data) -> str:
    def default(o):
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        raise TypeError(f"not JSON serializable: {type(o)}")

    return json.dumps(data, indent=2, sort_keys=True, default=default) + "\n"


def run(cfg: ExperimentConfig, out_dir: str | None, seed: int | None = None,
        threads: int = 1, echo=None) -> dict:
    """Execute an experiment and (optionally) persist its artifacts."""
    base_seed = seed if seed is not None else cfg.get("experiment", "seed", int,
                                                      default=1000)
    rows, summary = _EXPERIMENTS[cfg.kind](cfg, base_seed, threads)
    summary["seed"] = base_seed
    if cfg.kind == "tree-dump" and echo is not None:
        for row in rows:
            echo(json.dumps({"labels": json.loads(row["labels"]),
                             "ell": json.loads(row["ell"]),
                             "alpha": row["alpha"],
                             "coefficient": row["coefficient"]}))
    if cfg.kind == "ledger-dump" and echo is not None:
        echo(_json_dumps(summary).rstrip("\n"))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_text = _rows_to_csv(rows)
        summary_text = _json_dumps(summary)
        (out / "results.csv").write_text(csv_text)
        (out / "summary.json").write_text(summary_text)
        manifest = {
            "version": __version__,
            "kernel_backend": backend(),
            "kind": cfg.kind,
            "seed": base_seed,
            "config": cfg.options,
            "outputs": {
                "results.csv": hashlib.sha256(csv_text.encode()).hexdigest(),
                "summary.json": hashlib.sha256(summary_text.encode()).hexdigest(),
            },
        }
        (out / "manifest.json").write_text(_json_dumps(manifest))
    return summary


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roughsde",
        description="Scheme, derivative, and bound experiments for fBm-driven SDEs",
    )
    parser.add_argument("kind", nargs="?", choices=KINDS,
                        help="experiment kind (else taken from the config file)")
    parser.add_argument("--config", help="INI config file")
    parser.add_argument("--seed", type=int, help="base seed override")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--depth", type=int, help="tree-dump depth")
    parser.add_argument("--bank", help="vector field bank id")
    parser.add_argument("--order", type=int, help="ledger-dump derivative order")
    parser.add_argument("--H", type=float, dest="hurst", help="Hurst index")
    parser.add_argument("--p", type=float, help="variation exponent")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    overrides = {}
    if args.depth is not None:
        overrides[("tree", "depth")] = str(args.depth)
    if args.bank is not None:
        overrides[("model", "bank")] = args.bank
    if args.order is not None:
        overrides[("ledger", "order")] = str(args.order)
    if args.hurst is not None:
        overrides[("model", "h")] = str(args.hurst)
    if args.p is not None:
        overrides[("model", "p")] = str(args.p)
    if args.kind in ("tree-dump", "ledger-dump") and args.hurst is None \
            and args.config is None:
        overrides.setdefault(("model", "h"), "0.4")
    try:
        cfg = load_config(args.config, overrides, kind=args.kind)
        run(cfg, args.out, seed=args.seed, threads=args.threads, echo=print)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SchemeOverflowError as exc:
        print(f"overflow: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
