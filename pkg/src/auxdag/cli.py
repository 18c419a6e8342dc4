"""Batch front end: scenario simulation, fitting, evaluation, benchmark tables.

Subcommands
-----------
simulate  write one scenario's datasets (target + auxiliary CSVs), truth edge
          lists, and role labels to a directory
fit       run the layer engine on CSV inputs, write layers / edges / diagnostics
eval      score estimate edge lists against truth edge lists
bench     replicate a benchmark table (mean and SD per method and case)

All outputs are plain text: CSV datasets, 1-based `parent child weight` edge
lists, flat key=value metric records, and aligned summary tables. Replications
run in worker processes with per-replication derived seeds and are merged in
deterministic order, so records are identical for any --jobs value.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .engine import MultiDomainDataset, TransferConfig, fit as engine_fit
from .errors import (
    AuxDagError,
    DataFormatError,
    InvalidScenario,
    IoError,
    ShapeError,
)
from .metrics import compute_report
from .precision import SolverOptions
from .similarity import WeightedDag, topological_layers
from .synth import ScenarioSpec, gen_aux_suite, gen_target, sample_sem

METHOD_ORDER = ("single", "global", "local")
CASE_ORDER = ("aux1", "aux2")
TABLE_IDS = {
    "ex1-unif": ("hub", "uniform"),
    "ex1-t9": ("hub", "student_t9"),
    "ex2-unif": ("scalefree", "uniform"),
    "ex2-t9": ("scalefree", "student_t9"),
}
METRIC_KEYS = ("tpr", "fdr", "f1", "mcc", "shd", "hm", "re_b")

CONFIG_KEYS = {
    "mode", "alpha", "c0", "c1", "c2", "lambda0", "lambda1", "lambda2",
    "xi", "voting", "h_param", "support_tol", "seed", "sweep_dtype",
    "max_iter", "rel_tol",
}
SCENARIO_KEYS = {"example", "case", "noise", "n", "p", "omega", "seed"}


# ==== small text I/O helpers ====


def _write_text(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e


def _read_kv(path: Path) -> dict[str, str]:
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e
    out: dict[str, str] = {}
    for i, line in enumerate(lines, start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        if "=" not in s:
            raise DataFormatError(f"{path}:{i}: expected key=value, got {line!r}")
        key, _, value = s.partition("=")
        out[key.strip()] = value.strip()
    return out


def _parse_bool(s: str, ctx: str) -> bool:
    low = s.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise DataFormatError(f"{ctx}: expected a boolean, got {s!r}")


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _record_line(rec: dict) -> str:
    return " ".join(f"{k}={_fmt(v)}" for k, v in rec.items())


def _load_csv(path: Path) -> np.ndarray:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            first = fh.readline()
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e
    fields = first.strip().split(",")
    skip = 0
    try:
        [float(f) for f in fields]
    except ValueError:
        skip = 1
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)
    except ValueError as e:
        raise DataFormatError(f"{path}: {e}") from e
    return data


def _save_csv(path: Path, arr: np.ndarray):
    header = ",".join(f"x{j + 1}" for j in range(arr.shape[1]))
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savetxt(path, arr, delimiter=",", fmt="%.17g", header=header, comments="")
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e


def _write_edges(path: Path, edges, p: int):
    lines = [f"# p={p}"]
    for parent, child, w in edges:
        lines.append(f"{parent + 1} {child + 1} {w:.17g}")
    _write_text(path, "\n".join(lines) + "\n")


def _read_edges(path: Path, p_hint: int | None = None):
    """Edge list file -> (p, list of 0-based (parent, child, weight))."""
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e
    p = p_hint
    triples = []
    for i, line in enumerate(lines, start=1):
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            if "p=" in s and p is None:
                try:
                    p = int(s.split("p=")[1].split()[0])
                except (ValueError, IndexError):
                    pass
            continue
        parts = s.split()
        if len(parts) != 3:
            raise DataFormatError(f"{path}:{i}: expected 'parent child weight', got {line!r}")
        try:
            parent, child, w = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError as e:
            raise DataFormatError(f"{path}:{i}: {e}") from e
        if parent < 1 or child < 1:
            raise DataFormatError(f"{path}:{i}: node indices are 1-based")
        triples.append((parent - 1, child - 1, w))
    if p is None:
        p = 1 + max((max(a, b) for a, b, _ in triples), default=0)
    return p, triples


def _dag_triples(dag: WeightedDag):
    children, parents = np.nonzero(dag.b)
    order = np.lexsort((children, parents))
    return [(int(parents[i]), int(children[i]), float(dag.b[children[i], parents[i]])) for i in order]


def _b_from_edges(p: int, triples) -> np.ndarray:
    b = np.zeros((p, p))
    for parent, child, w in triples:
        if parent >= p or child >= p:
            raise DataFormatError(f"edge ({parent + 1},{child + 1}) exceeds p={p}")
        b[child, parent] = w
    return b


def _write_layers(path: Path, layers):
    lines = ["# one line per layer, bottom (leaf) layer first; 1-based node ids"]
    for layer in layers.layers:
        lines.append(" ".join(str(j + 1) for j in layer))
    _write_text(path, "\n".join(lines) + "\n")


def _write_json(path: Path, obj):
    _write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


# ==== config / scenario assembly ====


def _scenario_from_file(path: Path, seed_override: int | None) -> ScenarioSpec:
    kv = _read_kv(path)
    unknown = set(kv) - SCENARIO_KEYS
    if unknown:
        raise DataFormatError(f"{path}: unknown scenario keys {sorted(unknown)}")
    kwargs: dict = {}
    for key in ("example", "case", "noise"):
        if key in kv:
            kwargs[key] = kv[key]
    for key in ("n", "p", "omega", "seed"):
        if key in kv:
            try:
                kwargs[key] = int(kv[key])
            except ValueError as e:
                raise DataFormatError(f"{path}: key {key}: {e}") from e
    if seed_override is not None:
        kwargs["seed"] = seed_override
    return ScenarioSpec(**kwargs)


def _config_from_sources(config_path: Path | None, args) -> TransferConfig:
    kv = _read_kv(config_path) if config_path else {}
    unknown = set(kv) - CONFIG_KEYS
    if unknown:
        raise DataFormatError(f"{config_path}: unknown config keys {sorted(unknown)}")

    def _float(key):
        if key in kv:
            try:
                return float(kv[key])
            except ValueError as e:
                raise DataFormatError(f"{config_path}: key {key}: {e}") from e
        return None

    kwargs: dict = {}
    if "mode" in kv:
        kwargs["mode"] = kv["mode"]
    for key in ("alpha", "c0", "c1", "c2", "lambda0", "lambda1", "lambda2",
                "xi", "h_param", "support_tol"):
        v = _float(key)
        if v is not None:
            kwargs[key] = v
    if "voting" in kv:
        kwargs["voting"] = _parse_bool(kv["voting"], f"{config_path}: voting")
    if "seed" in kv:
        kwargs["seed"] = int(kv["seed"])
    if "sweep_dtype" in kv:
        kwargs["sweep_dtype"] = kv["sweep_dtype"]
    solver_kwargs = {}
    if "max_iter" in kv:
        solver_kwargs["max_iter"] = int(kv["max_iter"])
    if "rel_tol" in kv:
        solver_kwargs["rel_tol"] = float(kv["rel_tol"])
    if solver_kwargs:
        kwargs["solver"] = SolverOptions(**solver_kwargs)

    # command-line flags override file values
    for key in ("mode", "alpha", "c0", "c1", "c2", "lambda0", "lambda1",
                "lambda2", "xi", "h_param", "support_tol", "seed"):
        v = getattr(args, key, None)
        if v is not None:
            kwargs[key] = v
    if getattr(args, "voting", False):
        kwargs["voting"] = True
    try:
        return TransferConfig(**kwargs)
    except ValueError as e:
        raise InvalidScenario(str(e)) from e


# ==== instance generation shared by simulate and bench ====


def _generate_instance(example: str, noise: str, n: int, p: int, omega: int,
                       cases, rng: np.random.Generator):
    """Target DAG, the requested suites, and sampled data, in a fixed rng order."""
    base = ScenarioSpec(example=example, case="aux1", noise=noise, n=n, p=p, omega=omega)
    target = gen_target(base, rng)
    suites = {}
    for case in cases:
        scen = ScenarioSpec(example=example, case=case, noise=noise, n=n, p=p, omega=omega)
        suites[case] = gen_aux_suite(target, scen, rng)
    x_target = sample_sem(target, target.noise, n, rng)
    samples = {
        case: [sample_sem(dag, target.noise, omega * n, rng) for dag, _ in suites[case]]
        for case in cases
    }
    return target, suites, samples, x_target


# ==== simulate ====


def cmd_simulate(args) -> int:
    scenario = _scenario_from_file(Path(args.scenario), args.seed)
    out = Path(args.out)
    rng = np.random.default_rng(np.random.SeedSequence(scenario.seed))
    target, suites, samples, x_target = _generate_instance(
        scenario.example, scenario.noise, scenario.n, scenario.p, scenario.omega,
        (scenario.case,), rng,
    )
    suite = suites[scenario.case]
    aux_samples = samples[scenario.case]

    files = []
    _save_csv(out / "target.csv", x_target.values)
    files.append("target.csv")
    _write_edges(out / "target_truth.txt", _dag_triples(target), scenario.p)
    files.append("target_truth.txt")

    label_lines = []
    for k, ((dag, label), x_k) in enumerate(zip(suite, aux_samples), start=1):
        stem = f"aux{k:02d}"
        _save_csv(out / f"{stem}.csv", x_k.values)
        _write_edges(out / f"{stem}_truth.txt", _dag_triples(dag), scenario.p)
        files.extend([f"{stem}.csv", f"{stem}_truth.txt"])
        nodes = ",".join(str(j + 1) for j in label.nodes)
        label_lines.append(f"{stem} role={label.role} nodes={nodes}")
    _write_text(out / "labels.txt", "\n".join(label_lines) + "\n")
    files.append("labels.txt")

    manifest = {
        "command": "simulate",
        "version": __version__,
        "scenario": {
            "example": scenario.example, "case": scenario.case, "noise": scenario.noise,
            "n": scenario.n, "p": scenario.p, "omega": scenario.omega, "seed": scenario.seed,
        },
        "files": files,
    }
    _write_json(out / "manifest.json", manifest)
    print(f"wrote {len(files)} files to {out}")
    return 0


# ==== fit ====


def cmd_fit(args) -> int:
    config = _config_from_sources(Path(args.config) if args.config else None, args)
    target_raw = _load_csv(Path(args.target))
    aux_raws = [_load_csv(Path(a)) for a in (args.aux or [])]
    for k, a in enumerate(aux_raws):
        if a.shape[1] != target_raw.shape[1]:
            raise ShapeError(
                f"auxiliary file {args.aux[k]} has {a.shape[1]} columns, target has {target_raw.shape[1]}"
            )
    data = MultiDomainDataset.from_arrays(target_raw, aux_raws)
    est = engine_fit(data, config)

    out = Path(args.out)
    _write_layers(out / "layers.txt", est.layers)
    _write_edges(out / "edges.txt", est.edges(), data.p)
    _write_json(out / "diagnostics.json", est.diagnostics.to_dict())
    manifest = {
        "command": "fit",
        "version": __version__,
        "target": str(args.target),
        "aux": list(args.aux or []),
        "mode": config.mode,
        "files": ["layers.txt", "edges.txt", "diagnostics.json"],
    }
    _write_json(out / "manifest.json", manifest)
    print(f"layers: {[len(l) for l in est.layers.layers]} nodes per layer (bottom first)")
    print(f"edges: {sum(len(s) for s in est.parent_sets)}")
    print(f"wrote layers.txt, edges.txt, diagnostics.json to {out}")
    return 0


# ==== eval ====


def _metric_summary(records: list[dict]) -> dict:
    summary: dict = {"records": len(records)}
    for key in METRIC_KEYS:
        values = [r[key] for r in records if key in r]
        if not values:
            continue
        arr = np.asarray(values, dtype=float)
        summary[f"{key}_mean"] = float(arr.mean())
        summary[f"{key}_sd"] = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return summary


def cmd_eval(args) -> int:
    est_paths = [Path(x) for x in args.estimate]
    truth_paths = [Path(x) for x in args.truth]
    if len(truth_paths) == 1:
        truth_paths = truth_paths * len(est_paths)
    if len(truth_paths) != len(est_paths):
        raise DataFormatError(
            f"{len(est_paths)} estimates but {len(truth_paths)} truth files"
        )
    records = []
    for i, (ep, tp) in enumerate(zip(est_paths, truth_paths)):
        p_t, truth_triples = _read_edges(tp, args.p)
        p_e, est_triples = _read_edges(ep, p_t)
        if p_e != p_t:
            raise ShapeError(f"{ep} has p={p_e}, truth {tp} has p={p_t}")
        truth = WeightedDag(p=p_t, b=_b_from_edges(p_t, truth_triples))
        b_est = _b_from_edges(p_e, est_triples)
        report = compute_report(b_est, truth)
        rec = {"estimate": str(ep)} | report.to_record()
        records.append(rec)
    lines = [_record_line(r) for r in records]
    if len(records) > 1:
        lines.append(_record_line({"summary": 1} | _metric_summary(records)))
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out:
        _write_text(Path(args.out), text)
    return 0


# ==== bench ====


def _parse_methods(tokens) -> list[tuple[str, str]]:
    """'single', 'global', 'local', or 'method:case' tokens -> (method, case) grid."""
    if not tokens:
        tokens = ["single", "global", "local"]
    grid: list[tuple[str, str]] = []
    for tok in tokens:
        method, _, case = tok.partition(":")
        if method not in METHOD_ORDER:
            raise InvalidScenario(f"unknown method {method!r}")
        if method == "single":
            grid.append(("single", "-"))
        elif case:
            if case not in CASE_ORDER:
                raise InvalidScenario(f"unknown case {case!r}")
            grid.append((method, case))
        else:
            grid.extend((method, c) for c in CASE_ORDER)
    seen = set()
    out = []
    for mc in grid:
        if mc not in seen:
            seen.add(mc)
            out.append(mc)
    return out


def _run_bench_rep(payload: dict) -> list[dict]:
    """One replication: generate the instance, fit every requested method/case."""
    with threadpool_limits(limits=1):
        example, noise = payload["example"], payload["noise"]
        n, p, omega, rep = payload["n"], payload["p"], payload["omega"], payload["rep"]
        child = np.random.SeedSequence(payload["root_seed"], spawn_key=(payload["omega_index"], rep))
        rng = np.random.default_rng(child)
        cases = CASE_ORDER  # always generate both suites so the stream is method-invariant
        target, suites, samples, x_target = _generate_instance(
            example, noise, n, p, omega, cases, rng
        )
        truth_layers = topological_layers(target).layers

        base_kwargs = dict(payload["config_kwargs"])
        records = []
        for method, case in payload["grid"]:
            config = TransferConfig(mode=method, **base_kwargs)
            if method == "single":
                data = MultiDomainDataset(target=x_target)
            else:
                data = MultiDomainDataset(target=x_target, aux=tuple(samples[case]))
            est = engine_fit(data, config)
            report = compute_report(est.b_hat, target)
            rec = {
                "table": payload["table"], "n": n, "p": p, "omega": omega,
                "rep": rep, "method": method, "case": case,
            }
            rec |= report.to_record()
            rec["layers_match"] = int(est.layers.layers == truth_layers)
            rec["forced"] = est.diagnostics.forced_nodes
            if method == "local":
                rec["fallback_fraction"] = est.diagnostics.fallback_fraction
            records.append(rec)
        return records


def _summary_table(records: list[dict], omega: int) -> str:
    rows = []
    for method in METHOD_ORDER:
        for case in ("-",) + CASE_ORDER:
            group = [
                r for r in records
                if r["omega"] == omega and r["method"] == method and r["case"] == case
            ]
            if not group:
                continue
            cells = [f"{method}/{case}" if case != "-" else method]
            for key in METRIC_KEYS:
                values = [r[key] for r in group if key in r]
                if not values:
                    cells.append("-")
                    continue
                arr = np.asarray(values, dtype=float)
                sd = arr.std(ddof=1) if arr.size > 1 else 0.0
                cells.append(f"{arr.mean():.4f}({sd:.4f})")
            rows.append(cells)
    headers = ["method"] + list(METRIC_KEYS)
    widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(headers)]
    lines = [f"omega={omega}  ({len([r for r in records if r['omega'] == omega])} records)"]
    lines.append("  ".join(h.ljust(w) for h, w in zip(headers, widths)))
    lines.append("  ".join("-" * w for w in widths))
    for cells in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(cells, widths)))
    return "\n".join(lines)


def cmd_bench(args) -> int:
    if args.replay:
        manifest = json.loads(Path(args.replay).read_text(encoding="utf-8"))
        if manifest.get("command") != "bench":
            raise DataFormatError(f"{args.replay} is not a bench manifest")
        b = manifest["bench"]
        args.table, args.n, args.p = b["table"], b["n"], b["p"]
        args.omega, args.reps, args.seed = b["omega"], b["reps"], b["seed"]
        args.methods = b["methods"]
        args.alpha, args.c0, args.c1, args.c2 = b["alpha"], b["c0"], b["c1"], b["c2"]
        args.lambda0, args.lambda1, args.lambda2 = b["lambda0"], b["lambda1"], b["lambda2"]
        args.xi, args.voting, args.h_param = b["xi"], b["voting"], b["h_param"]
    if args.table not in TABLE_IDS:
        raise InvalidScenario(
            f"unknown table id {args.table!r}; expected one of {sorted(TABLE_IDS)}"
        )
    if args.reps < 1:
        raise InvalidScenario(f"reps must be at least 1, got {args.reps}")
    example, noise = TABLE_IDS[args.table]
    omegas = args.omega or [5]
    grid = _parse_methods(args.methods)
    jobs = args.jobs if args.jobs else (os.cpu_count() or 1)

    config_kwargs = {
        "alpha": args.alpha if args.alpha is not None else 0.01,
        "c0": args.c0 if args.c0 is not None else 0.5,
        "c1": args.c1 if args.c1 is not None else 0.5,
        "c2": args.c2 if args.c2 is not None else 0.5,
        "lambda0": args.lambda0, "lambda1": args.lambda1, "lambda2": args.lambda2,
        "xi": args.xi, "voting": bool(args.voting), "h_param": args.h_param,
    }

    payloads = []
    for oi, omega in enumerate(omegas):
        for rep in range(args.reps):
            payloads.append({
                "table": args.table, "example": example, "noise": noise,
                "n": args.n, "p": args.p, "omega": omega, "omega_index": oi,
                "rep": rep, "root_seed": args.seed, "grid": grid,
                "config_kwargs": config_kwargs,
            })

    records: list[dict] = []
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for batch in pool.map(_run_bench_rep, payloads):
            records.extend(batch)
            done = len(records) // len(grid)
            print(f"replication {done}/{len(payloads)} done", flush=True)

    method_rank = {m: i for i, m in enumerate(METHOD_ORDER)}
    case_rank = {"-": 0, "aux1": 1, "aux2": 2}
    records.sort(key=lambda r: (r["omega"], r["rep"], method_rank[r["method"]], case_rank[r["case"]]))

    out = Path(args.out)
    _write_text(out / "records.txt", "\n".join(_record_line(r) for r in records) + "\n")
    tables = [_summary_table(records, omega) for omega in omegas]
    _write_text(out / "summary.txt", "\n\n".join(tables) + "\n")
    manifest = {
        "command": "bench",
        "version": __version__,
        "bench": {
            "table": args.table, "n": args.n, "p": args.p, "omega": list(omegas),
            "reps": args.reps, "seed": args.seed, "methods": args.methods or [],
            "alpha": config_kwargs["alpha"], "c0": config_kwargs["c0"],
            "c1": config_kwargs["c1"], "c2": config_kwargs["c2"],
            "lambda0": args.lambda0, "lambda1": args.lambda1, "lambda2": args.lambda2,
            "xi": args.xi, "voting": bool(args.voting), "h_param": args.h_param,
        },
        "files": ["records.txt", "summary.txt"],
    }
    _write_json(out / "manifest.json", manifest)
    print("\n\n".join(tables))
    print(f"\nwrote records.txt, summary.txt, manifest.json to {out}")
    return 0


# ==== argument parsing ====


def _add_config_flags(sp):
    sp.add_argument("--mode", choices=MODES_CHOICES, default=None)
    sp.add_argument("--alpha", type=float, default=None)
    sp.add_argument("--c0", type=float, default=None)
    sp.add_argument("--c1", type=float, default=None)
    sp.add_argument("--c2", type=float, default=None)
    sp.add_argument("--lambda0", type=float, default=None)
    sp.add_argument("--lambda1", type=float, default=None)
    sp.add_argument("--lambda2", type=float, default=None)
    sp.add_argument("--xi", type=float, default=None)
    sp.add_argument("--voting", action="store_true")
    sp.add_argument("--h-param", dest="h_param", type=float, default=None)
    sp.add_argument("--support-tol", dest="support_tol", type=float, default=None)


MODES_CHOICES = ("single", "global", "local")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="auxdag",
        description="Layer-by-layer DAG learning with auxiliary-domain transfer.",
    )
    ap.add_argument("--version", action="version", version=f"auxdag {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="generate one scenario's datasets")
    sp.add_argument("--scenario", required=True, help="key=value scenario file")
    sp.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(handler=cmd_simulate)

    sp = sub.add_parser("fit", help="fit the layer model to CSV data")
    sp.add_argument("--target", required=True, help="target dataset CSV")
    sp.add_argument("--aux", action="append", default=[], help="auxiliary CSV (repeatable)")
    sp.add_argument("--config", default=None, help="key=value config file")
    sp.add_argument("--seed", type=int, default=None)
    _add_config_flags(sp)
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(handler=cmd_fit)

    sp = sub.add_parser("eval", help="score estimate edge lists against truth")
    sp.add_argument("--estimate", nargs="+", required=True)
    sp.add_argument("--truth", nargs="+", required=True)
    sp.add_argument("--p", type=int, default=None, help="number of nodes when not in the files")
    sp.add_argument("--out", default=None, help="also write records to this file")
    sp.set_defaults(handler=cmd_eval)

    sp = sub.add_parser("bench", help="replicate a benchmark table")
    sp.add_argument("table", nargs="?", default=None, help=f"one of {sorted(TABLE_IDS)}")
    sp.add_argument("--replay", default=None, help="rerun from a bench manifest.json")
    sp.add_argument("--reps", type=int, default=20)
    sp.add_argument("--omega", type=int, action="append", default=None)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--n", type=int, default=100)
    sp.add_argument("--p", type=int, default=100)
    sp.add_argument(
        "--methods", action="append", default=None,
        help="restrict the grid: single, global, local, or method:case (repeatable)",
    )
    sp.add_argument("--jobs", type=int, default=None, help="worker processes (default: cores)")
    _add_config_flags(sp)
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(handler=cmd_bench)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command == "bench" and not args.replay and args.table is None:
        ap.error("bench requires a table id or --replay")
    try:
        return args.handler(args)
    except AuxDagError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
