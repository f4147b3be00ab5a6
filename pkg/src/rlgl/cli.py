"""Command-line front end: ``rlgl {generate,solve,compare,region,diagnose}``.

Graphs are named on the command line as ``kind[:key=value,...]``::

    sbm                      default two-block SBM
    pa:n=500,m=2             preferential attachment
    cycle:n=8 | complete:n=5
    mixture:n=8,eps=0.05     (1 - eps) uniform + eps directed cycle (a chain)
    dataset:harvard500       entry of the dataset manifest
    file:path/to/edges.txt   any edge list (a bare existing path also works)

Generators without an explicit ``seed`` take the run seed, so every seed
of a solve grid is a fresh (graph, heuristic) sample.

Exit codes: 0 success, 1 a run failed, 2 configuration error.
"""
import argparse
import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import analysis, graphs, markov, svg
from .exceptions import InvalidSpec, RLGLError, TooLargeForDenseDiagnostics
from .heuristics import parse_heuristic
from .solver import ConvergenceTrace, StopRule, run

logger = logging.getLogger("rlgl")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2
DEFAULT_HEURISTICS = ("gsd-deg", "theta", "pi")


class ConfigError(Exception):
    pass


# -- graph references -----------------------------------------------------


def _value(text):
    if "x" in text and all(part.isdigit() for part in text.split("x")):
        return [int(part) for part in text.split("x")]
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_graph_arg(text):
    """Turn a ``--graph`` argument into a graph entry dict."""
    if Path(text).is_file():
        return {"path": text}
    kind, _, rest = text.partition(":")
    if kind == "file":
        return {"path": rest}
    if kind == "dataset":
        return {"dataset": rest}
    entry = {"kind": kind}
    for item in filter(None, rest.split(",")):
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"expected key=value in graph argument {text!r}")
        entry[key.strip()] = _value(val.strip())
    return entry


GRAPH_KINDS = ("sbm", "pa", "cycle", "complete", "mixture")


def check_graph_entry(entry):
    if "kind" in entry:
        if entry["kind"] not in GRAPH_KINDS:
            raise ConfigError(f"unknown graph kind {entry['kind']!r}; expected one of {GRAPH_KINDS}")
        if entry["kind"] == "mixture" and not {"n", "eps"} <= entry.keys():
            raise ConfigError("mixture needs n and eps")
    elif not ("dataset" in entry or "path" in entry):
        raise ConfigError(f"cannot interpret graph entry {entry!r}")


def default_manifest():
    return resources.files("rlgl").joinpath("datasets.json")


@dataclass
class BenchConfig:
    """Everything a ``solve`` grid needs; built from a JSON file and/or flags."""

    graphs: list
    heuristics: list
    stop: StopRule = field(default_factory=StopRule)
    seeds: list = field(default_factory=lambda: [0])
    output_dir: str = "rlgl-out"
    trace_stride: int = 1
    lscc: bool = False
    pagerank: float = None
    jobs: int = 1
    fetch: bool = False
    energy: bool = False
    manifest: str = None
    cache_dir: str = None
    start: str = "uniform"

    def __post_init__(self):
        if self.start not in ("uniform", "random"):
            raise ConfigError(f"start must be 'uniform' or 'random', got {self.start!r}")
        if not self.graphs:
            raise ConfigError("no graphs given")
        if not self.heuristics:
            raise ConfigError("no heuristics given")
        if self.pagerank is not None and not 0 < self.pagerank < 1:
            raise ConfigError(f"pagerank damping must lie in (0, 1), got {self.pagerank}")
        if self.trace_stride < 1 or self.jobs < 1:
            raise ConfigError("stride and jobs must be positive")
        if not self.seeds:
            raise ConfigError("no seeds given")


@dataclass
class RunRecord:
    graph: str
    heuristic: str
    seed: int
    final_l1: float
    cost: float
    wall_time: float
    trace_path: str
    converged: bool = False
    steps: int = 0
    stop_reason: str = ""
    error: str = None

    def summary_dict(self):
        # wall time lives in timings.json so that the summary is reproducible
        d = asdict(self)
        del d["wall_time"]
        return d


def resolve_graph(entry, seed, cfg):
    """Build ``(name, chain, meta)`` for one graph entry and run seed."""
    entry = dict(entry)
    meta = {}
    if entry.get("kind") == "mixture":
        n, eps = int(entry["n"]), float(entry["eps"])
        if n < 3 or not 0 <= eps <= 1:
            raise InvalidSpec("mixture needs n >= 3 and eps in [0, 1]")
        cyc = graphs.random_walk_chain(graphs.generate(graphs.DirectedCycle(n)))
        P = markov.mixture_chain(graphs.uniform_chain(n), cyc, eps)
        return f"mixture-{n}-e{eps:g}", P, {"mixture": {"n": n, "eps": eps}}
    if "kind" in entry:
        if entry["kind"] in ("sbm", "pa") and "seed" not in entry:
            entry["seed"] = seed
        spec = graphs.spec_from_dict(entry)
        G = graphs.generate(spec)
        name = graphs.spec_name(spec)
    elif "dataset" in entry:
        manifest = graphs.load_manifest(cfg.manifest or default_manifest())
        if entry["dataset"] not in manifest:
            raise InvalidSpec(f"dataset {entry['dataset']!r} not in manifest")
        d = manifest[entry["dataset"]]
        path = graphs.dataset_cache_file(d, cfg.cache_dir)
        if cfg.fetch:
            path = graphs.fetch_dataset(d, cfg.cache_dir)
        elif not path.exists():
            raise InvalidSpec(f"dataset {d.name!r} is not cached at {path}; pass --fetch")
        G = graphs.load_edge_list(path, d.format)
        name = d.name
    elif "path" in entry:
        G = graphs.load_edge_list(entry["path"], entry.get("format", "auto"))
        name = Path(entry["path"]).name.split(".")[0]
    else:
        raise InvalidSpec(f"cannot interpret graph entry {entry!r}")
    if cfg.lscc:
        G = graphs.largest_scc(G)
        name += "-lscc"
    if cfg.pagerank is not None:
        P = graphs.pagerank_chain(G, cfg.pagerank, patch_dangling=True)
        name += f"-pr{cfg.pagerank:g}"
    else:
        P = graphs.random_walk_chain(G)
    meta["edges"] = G.m
    return name, P, meta


# -- config ---------------------------------------------------------------


def build_config(args):
    raw = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a JSON object")

    def pick(flag, key, default):
        v = getattr(args, flag, None)
        return v if v is not None else raw.get(key, default)

    graph_entries = [parse_graph_arg(g) for g in args.graph] if args.graph else raw.get("graphs", [])
    graph_entries = [parse_graph_arg(g) if isinstance(g, str) else dict(g) for g in graph_entries]
    for g in graph_entries:
        check_graph_entry(g)
    names = args.heuristic if args.heuristic else raw.get("heuristics", list(DEFAULT_HEURISTICS))
    seeds = args.seed if args.seed else raw.get("seeds", [0])
    try:
        heuristics = [parse_heuristic(h) for h in names]
        stop = StopRule(
            tol=pick("tol", "tol", 1e-8),
            max_cost=pick("max_cost", "max_cost", 200.0),
            max_steps=pick("max_steps", "max_steps", None),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return BenchConfig(
        graphs=graph_entries,
        heuristics=heuristics,
        stop=stop,
        seeds=[int(s) for s in seeds],
        output_dir=pick("out", "output_dir", "rlgl-out"),
        trace_stride=int(pick("stride", "trace_stride", 1)),
        lscc=bool(args.lscc or raw.get("lscc", False)),
        pagerank=pick("pagerank", "pagerank", None),
        jobs=int(pick("jobs", "jobs", 1)),
        fetch=bool(args.fetch or raw.get("fetch", False)),
        energy=bool(getattr(args, "energy", False) or raw.get("energy", False)),
        manifest=pick("manifest", "manifest", None),
        cache_dir=pick("cache_dir", "cache_dir", None),
        start=pick("start", "start", "uniform"),
    )


def _atomic_text(path, text):
    graphs._atomic_write(Path(path), text.encode())


# -- commands -------------------------------------------------------------


def cmd_generate(entry, out_path):
    """Write the edge list of a generator entry; returns the graph."""
    if entry.get("kind") in (None, "mixture"):
        raise InvalidSpec("generate needs a generator (sbm, pa, cycle, complete)")
    spec = graphs.spec_from_dict(entry)
    G = graphs.generate(spec)
    graphs.write_edge_list(G, out_path)
    return G


def start_vector(n, seed):
    """Seeded random starting distribution (the same for every heuristic)."""
    x = np.random.default_rng([seed, n]).random(n) + 0.1
    return x / x.sum()


def _solve_one(P, name, h, seed, cfg, out):
    label = h.label
    fname = f"{name}__{label}__seed{seed}.csv"
    try:
        pi = None
        if cfg.energy:
            pi = markov.stationary_dense(P)
        x0 = None
        if cfg.start == "random":
            x0 = start_vector(P.n, seed)
        pi_hat, trace = run(
            P, h.with_seed(seed), x0=x0, stop=cfg.stop, trace_stride=cfg.trace_stride, energy=cfg.energy, pi=pi
        )
    except (RLGLError, ValueError, ArithmeticError, MemoryError) as exc:
        return RunRecord(name, label, seed, float("nan"), 0.0, 0.0, "", error=f"{type(exc).__name__}: {exc}")
    _atomic_text(out / fname, trace.to_csv())
    return RunRecord(
        name, label, seed, trace.l1[-1], trace.cost[-1], trace.wall_time, fname,
        trace.converged, trace.steps[-1], trace.stop_reason,
    )


def cmd_solve(cfg):
    """Run the (graph x heuristic x seed) grid; returns the list of RunRecords.

    Writes one CSV per run, ``summary.json`` (records in grid order) and
    ``timings.json`` (wall times) into ``cfg.output_dir``.
    """
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks, failed = [], []
    for entry in cfg.graphs:
        for seed in cfg.seeds:
            try:
                name, P, _ = resolve_graph(entry, seed, cfg)
            except (RLGLError, ValueError, OSError) as exc:
                label = entry.get("kind") or entry.get("dataset") or entry.get("path")
                for h in cfg.heuristics:
                    failed.append((len(tasks) + len(failed), RunRecord(
                        str(label), h.label, seed, float("nan"), 0.0, 0.0, "",
                        error=f"{type(exc).__name__}: {exc}",
                    )))
                continue
            for h in cfg.heuristics:
                tasks.append((P, name, h, seed))
    with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
        done = list(pool.map(lambda t: _solve_one(*t, cfg, out), tasks))
    # errors from graph construction keep their place in the grid order
    records = list(done)
    for pos, rec in failed:
        records.insert(pos, rec)
    summary = [r.summary_dict() for r in records]
    _atomic_text(out / "summary.json", json.dumps(summary, indent=2) + "\n")
    timings = {r.trace_path or f"{r.graph}__{r.heuristic}__seed{r.seed}": r.wall_time for r in records}
    _atomic_text(out / "timings.json", json.dumps(timings, indent=2) + "\n")
    return records


def load_summary(path):
    path = Path(path)
    with open(path) as fh:
        rows = json.load(fh)
    return [RunRecord(wall_time=0.0, **row) for row in rows], path.parent


def cmd_compare(summary_path, out_svg, graph=None, seed=None):
    """Plot the traces of one graph, one polyline per heuristic."""
    records, base = load_summary(summary_path)
    records = [r for r in records if r.trace_path]
    if graph is None and records:
        graph = records[0].graph
    chosen, seen = [], set()
    for r in records:
        if r.graph != graph or (seed is not None and r.seed != seed) or r.heuristic in seen:
            continue
        seen.add(r.heuristic)
        with open(base / r.trace_path) as fh:
            tr = ConvergenceTrace.from_csv(fh)
        chosen.append((r.heuristic, tr.cost, tr.l1))
    text = svg.convergence_svg(chosen, title=graph)
    _atomic_text(out_svg, text)
    return text


def region_grid(n=100, grid=200, beta_max=1.0):
    lam = np.linspace(0.0, 1.0, grid + 2)[1:-1]
    beta = np.linspace(0.0, beta_max, grid + 1)[1:]
    return analysis.cd_pi_region(n, lam, beta)


def cmd_region(n, grid, out_svg, beta_max=1.0):
    if n < 2:
        raise InvalidSpec("n must be at least 2")
    g = region_grid(n, grid, beta_max)
    text = svg.region_svg(g, title=f"n = {n}")
    _atomic_text(out_svg, text)
    return g


def cmd_diagnose(entry, cfg):
    """Dense irreversibility report for one graph entry."""
    name, P, meta = resolve_graph(entry, cfg.seeds[0], cfg)
    if P.n > markov.DENSE_LIMIT:
        raise TooLargeForDenseDiagnostics(f"n = {P.n} exceeds the dense cap {markov.DENSE_LIMIT}")
    prof = markov.irreversibility_profile(P)
    ok, info = analysis.nearly_reversible_certificate(prof)
    report = {
        "graph": name,
        "n": P.n,
        "nnz": P.nnz,
        "pi": prof.pi.tolist(),
        "mu": prof.mu,
        "eta_inf": prof.eta_inf,
        "eta_2": prof.eta_2,
        "kappa_max": prof.kappa_max,
        "threshold": prof.threshold,
        "reversible": markov.is_reversible(P, prof.pi, tol=1e-10),
        "nearly_reversible": ok,
        "certificate": info,
    }
    if "mixture" in meta:
        n, eps = meta["mixture"]["n"], meta["mixture"]["eps"]
        report["mixture"] = {
            "n": n,
            "eps": eps,
            "eta_closed_form": analysis.cycle_mixture_eta(n, eps),
            "eps_star": analysis.cycle_mixture_threshold(n, "exact"),
            "eps_star_printed_form": analysis.cycle_mixture_threshold(n, "printed"),
        }
    return report


# -- argument parsing -----------------------------------------------------


def _graph_flags(p, multiple=True):
    p.add_argument("--graph", action="append" if multiple else None, help="graph reference (repeatable)")
    p.add_argument("--lscc", action="store_true", default=None, help="restrict to the largest SCC")
    p.add_argument("--pagerank", type=float, metavar="EPS", help="use the PageRank chain with damping EPS")
    p.add_argument("--fetch", action="store_true", default=None, help="allow downloading datasets")
    p.add_argument("--manifest", help="dataset manifest (default: bundled datasets.json)")
    p.add_argument("--cache-dir", help="dataset cache (default: $RLGL_CACHE or ~/.cache/rlgl)")
    p.add_argument("--config", help="JSON config; flags override its keys")


def make_parser():
    parser = argparse.ArgumentParser(prog="rlgl", description="RLGL stationary-distribution benchmarks")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic graph as an edge list")
    p.add_argument("graph", help="generator reference, e.g. sbm or cycle:n=4")
    p.add_argument("--out", required=True)

    p = sub.add_parser("solve", help="run a heuristic grid and write traces")
    _graph_flags(p)
    p.add_argument("--heuristic", action="append", help="heuristic name (repeatable)")
    p.add_argument("--seed", action="append", type=int, help="seed (repeatable)")
    p.add_argument("--tol", type=float)
    p.add_argument("--max-cost", type=float)
    p.add_argument("--max-steps", type=int)
    p.add_argument("--stride", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--jobs", type=int)
    p.add_argument("--energy", action="store_true", default=None, help="also trace the Dirichlet energy")
    p.add_argument("--start", choices=("uniform", "random"), help="starting vector (default uniform)")

    p = sub.add_parser("compare", help="plot residual traces from a summary")
    p.add_argument("summary")
    p.add_argument("--out", required=True)
    p.add_argument("--graph", help="graph name in the summary (default: first)")
    p.add_argument("--seed", type=int)

    p = sub.add_parser("region", help="heatmap of where n CD steps beat one PI step")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--grid", type=int, default=200)
    p.add_argument("--beta-max", type=float, default=1.0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("diagnose", help="irreversibility report as JSON")
    _graph_flags(p, multiple=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the report here instead of stdout")
    return parser


def main(argv=None):
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "generate":
            G = cmd_generate(parse_graph_arg(args.graph), args.out)
            print(f"wrote {G.n} nodes, {G.m} edges to {args.out}")
            return EXIT_OK
        if args.command == "solve":
            cfg = build_config(args)
            t0 = time.perf_counter()
            records = cmd_solve(cfg)
            bad = [r for r in records if r.error]
            for r in bad:
                logger.error("%s / %s / seed %d: %s", r.graph, r.heuristic, r.seed, r.error)
            logger.info("%d runs in %.1fs", len(records), time.perf_counter() - t0)
            print(f"{len(records) - len(bad)}/{len(records)} runs ok; summary in {cfg.output_dir}/summary.json")
            return EXIT_FAILED if bad else EXIT_OK
        if args.command == "compare":
            cmd_compare(args.summary, args.out, args.graph, args.seed)
            return EXIT_OK
        if args.command == "region":
            cmd_region(args.n, args.grid, args.out, args.beta_max)
            return EXIT_OK
        if args.command == "diagnose":
            args.graph = [args.graph] if args.graph else None
            args.heuristic, args.seed = None, [args.seed]
            out = args.out
            args.out = None
            cfg = build_config(args)
            if len(cfg.graphs) != 1:
                raise ConfigError("diagnose takes exactly one graph")
            report = cmd_diagnose(cfg.graphs[0], cfg)
            text = json.dumps(report, indent=2) + "\n"
            if out:
                _atomic_text(out, text)
            else:
                sys.stdout.write(text)
            return EXIT_OK
    except (ConfigError, InvalidSpec) as exc:
        print(f"rlgl: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RLGLError, OSError, ValueError) as exc:
        print(f"rlgl: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
