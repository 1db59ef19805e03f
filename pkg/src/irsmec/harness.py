"""Experiment configuration, paired-seed runs, CSV export and plot data.

Config files are flat INI: sections ``[scenario] [channel] [compute] [game]
[gdm] [solver] [run]`` holding ``key = value`` lines whose keys are the
dataclass field names. Quantities usually quoted in decibels may be given in
dB instead, with a suffixed key (``noise_power_dbm = -114``); they are
converted once at load time.
"""
from __future__ import annotations

import configparser
import csv
import dataclasses as dc
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import ChannelParams
from .compute import ComputeParams
from .diffusion import DiffusionConfig
from .errors import ConfigError
from .game import GameParams
from .instance import SystemConfig, realize
from .scenario import ScenarioConfig
from .solvers import SOLVER_NAMES, SolverConfig, solve

log = logging.getLogger(__name__)

METRICS_HEADER = ["slot", "solver", "seed", "delay", "energy", "qoe", "revenue"]
TRACE_HEADER = ["iter", "solver", "seed", "utility", "reward"]
PANELS = ("delay", "energy", "qoe", "revenue")
DEFAULT_SOLVERS = ("gdmsg", "dopsra", "ergops", "rpsgora", "ropsra")

# (section, dB key) -> (linear field, dB flavour)
_DB_KEYS = {
    ("channel", "ref_pathloss_db"): ("ref_pathloss", "db"),
    ("channel", "rician_factor_db"): ("rician_factor", "db"),
    ("channel", "noise_power_dbm"): ("noise_power", "dbm"),
    ("channel", "direct_loss_db"): ("direct_loss", "db"),
    ("channel", "rician_db"): ("rician_factor", "db"),
    ("channel", "noise_dbm"): ("noise_power", "dbm"),
    ("scenario", "tx_power_dbm"): ("tx_power", "dbm"),
}
_ALIASES = {("channel", "bandwidth_hz"): "bandwidth"}
_SECTIONS = {"scenario": ScenarioConfig, "channel": ChannelParams, "compute": ComputeParams,
             "game": GameParams, "gdm": DiffusionConfig, "solver": SolverConfig}


def _to_linear(kind, value):
    return 10.0 ** (value / 10.0) * (1e-3 if kind == "dbm" else 1.0)


def _to_db(kind, value):
    return 10.0 * math.log10(value / (1e-3 if kind == "dbm" else 1.0))


@dataclass(frozen=True)
class ExperimentConfig:
    system: SystemConfig = field(default_factory=SystemConfig)
    gdm: DiffusionConfig = field(default_factory=DiffusionConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    solvers: tuple = DEFAULT_SOLVERS
    seeds: tuple = tuple(range(20))
    out_dir: str = "results"

    def validate(self):
        self.system.validate()
        self.gdm.validate()
        self.solver.validate()
        unknown = [s for s in self.solvers if s not in SOLVER_NAMES]
        if unknown:
            raise ConfigError("solvers", f"unknown solver(s) {unknown}; choose from {SOLVER_NAMES}")
        if not self.solvers:
            raise ConfigError("solvers", "at least one solver is required")
        if not self.seeds:
            raise ConfigError("seeds", "at least one seed is required")
        return self


def _parse_value(raw, default, name):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(raw)
            return low in ("true", "yes", "1")
        if isinstance(default, tuple):
            return tuple(float(x) if "." in x or "e" in x.lower() else int(x)
                         for x in (p.strip() for p in raw.split(",")) if x)
        if default is None or isinstance(default, int):
            if raw.lower() in ("none", ""):
                return None
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(name, f"cannot parse {raw!r}") from None


def parse_seeds(text):
    """'0-4' or '1,2,7' or a mix such as '0-2,9'."""
    seeds = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if "-" in part:
                lo, hi = part.split("-", 1)
                seeds.extend(range(int(lo), int(hi) + 1))
            else:
                seeds.append(int(part))
        except (TypeError, ValueError):
            raise ConfigError("seeds", f"cannot parse seed list {text!r}") from None
    return tuple(seeds)


def parse_solvers(text):
    return tuple(s.strip().lower() for s in str(text).split(",") if s.strip())


def parse_config(text) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("file", str(exc).splitlines()[0]) from None
    allowed = set(_SECTIONS) | {"run"}
    for sec in cp.sections():
        if sec not in allowed:
            raise ConfigError(sec, "unknown section")
    parts = {}
    for sec, cls in _SECTIONS.items():
        defaults = cls()
        fields = {f.name for f in dc.fields(cls)}
        kwargs = {}
        if cp.has_section(sec):
            for key, raw in cp.items(sec):
                if (sec, key) in _DB_KEYS:
                    name, kind = _DB_KEYS[(sec, key)]
                    if name in kwargs or cp.has_option(sec, name):
                        raise ConfigError(f"{sec}.{name}", "given more than once")
                    kwargs[name] = _to_linear(kind, _parse_value(raw, 0.0, f"{sec}.{key}"))
                elif (sec, key) in _ALIASES:
                    name = _ALIASES[(sec, key)]
                    kwargs[name] = _parse_value(raw, getattr(defaults, name), f"{sec}.{key}")
                elif key in fields:
                    kwargs[key] = _parse_value(raw, getattr(defaults, key), f"{sec}.{key}")
                else:
                    raise ConfigError(f"{sec}.{key}", "unknown key")
        try:
            parts[sec] = cls(**kwargs)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(sec, str(exc)) from None
    run = dict(cp.items("run")) if cp.has_section("run") else {}
    for key in run:
        if key not in ("solvers", "seeds", "out_dir"):
            raise ConfigError(f"run.{key}", "unknown key")
    system = SystemConfig(parts["scenario"], parts["channel"], parts["compute"], parts["game"])
    cfg = ExperimentConfig(
        system, parts["gdm"], parts["solver"],
        parse_solvers(run["solvers"]) if "solvers" in run else DEFAULT_SOLVERS,
        parse_seeds(run["seeds"]) if "seeds" in run else tuple(range(20)),
        run.get("out_dir", "results"))
    return cfg.validate()


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("file", f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)


def _fmt(value):
    if isinstance(value, tuple):
        return ", ".join(_fmt(v) for v in value)
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return value
    return repr(value)


def dump_config(cfg: ExperimentConfig) -> str:
    """Resolved config in linear units; dB-style quantities are echoed as comments."""
    out = io.StringIO()
    blocks = {"scenario": cfg.system.scenario, "channel": cfg.system.channel,
              "compute": cfg.system.compute, "game": cfg.system.game,
              "gdm": cfg.gdm, "solver": cfg.solver}
    echo = {}
    for (sec, key), (name, kind) in _DB_KEYS.items():
        echo.setdefault((sec, name), (key, kind))
    for sec, obj in blocks.items():
        out.write(f"[{sec}]\n")
        for f in dc.fields(obj):
            val = getattr(obj, f.name)
            out.write(f"{f.name} = {_fmt(val)}\n")
            if (sec, f.name) in echo:
                key, kind = echo[(sec, f.name)]
                out.write(f"# {key} = {_to_db(kind, val):.6g}\n")
        out.write("\n")
    out.write("[run]\n")
    out.write(f"solvers = {', '.join(cfg.solvers)}\n")
    out.write(f"seeds = {', '.join(str(s) for s in cfg.seeds)}\n")
    out.write(f"out_dir = {cfg.out_dir}\n")
    return out.getvalue()


# -- running -----------------------------------------------------------------

def run_experiment(cfg: ExperimentConfig, out_dir=None):
    """Solve every (seed, solver) pair on a shared realization; write CSVs.

    Returns the output directory. Rows are ordered by seed, then by the
    configured solver order, then by slot, so reruns are byte-identical.
    """
    cfg.validate()
    out = Path(out_dir or cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "resolved.ini").write_text(dump_config(cfg))
        mfile = open(out / "metrics.csv", "w", newline="")
        tfile = open(out / "trace.csv", "w", newline="")
    except OSError as exc:
        raise ConfigError("out_dir", f"cannot write to {out}: {exc.strerror}") from None
    with mfile, tfile:
        mw, tw = csv.writer(mfile), csv.writer(tfile)
        mw.writerow(METRICS_HEADER)
        tw.writerow(TRACE_HEADER)
        for seed in cfg.seeds:
            inst = realize(cfg.system, seed)
            for name in cfg.solvers:
                res = solve(name, inst, cfg.system, cfg.solver, cfg.gdm, seed)
                o = res.outcome
                cols = [o.delay.sum(-1), o.energy.sum(-1), o.qoe.sum(-1), o.revenue.sum(-1)]
                if not all(np.all(np.isfinite(c)) for c in cols):
                    raise RuntimeError(f"non-finite metrics from {name} on seed {seed}")
                for n in range(inst.num_slots):
                    mw.writerow([n, name, seed, *(repr(float(c[n])) for c in cols)])
                if name != "ropsra" and name != "oracle":
                    for j, (u, r) in enumerate(zip(res.utility_trace, res.reward_trace), start=1):
                        tw.writerow([j, name, seed, repr(float(u)), repr(float(r))])
                log.info("seed %d %-8s U=%.3f iters=%d %.2fs", seed, name, res.utility,
                         res.iterations, res.wall_time)
    return out


def read_metrics(path):
    path = Path(path)
    if path.is_dir():
        path = path / "metrics.csv"
    if not path.exists():
        raise FileNotFoundError(f"missing metrics file {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != METRICS_HEADER:
            raise ValueError(f"unexpected metrics header {header}")
        rows = [(int(r[0]), r[1], int(r[2]), *map(float, r[3:])) for r in reader]
    return rows


def cumulative_table(rows, metric):
    """{solver: array (seeds, slots)} of per-seed cumulative values for one metric."""
    col = METRICS_HEADER.index(metric)
    data = {}
    for row in rows:
        data.setdefault(row[1], {}).setdefault(row[2], {})[row[0]] = row[col]
    table = {}
    for solver, by_seed in data.items():
        seeds = sorted(by_seed)
        slots = sorted(by_seed[seeds[0]])
        arr = np.array([[by_seed[s][n] for n in slots] for s in seeds])
        table[solver] = np.cumsum(arr, axis=1)
    return table


def emit_plot_data(in_dir, out_dir=None):
    """Write one TSV per panel: slot, per-solver mean of cumulative values, per-solver SE."""
    rows = read_metrics(in_dir)
    out = Path(out_dir or (in_dir if Path(in_dir).is_dir() else Path(in_dir).parent))
    out.mkdir(parents=True, exist_ok=True)
    order = list(dict.fromkeys(r[1] for r in rows))
    written = []
    for metric in PANELS:
        table = cumulative_table(rows, metric)
        means = [table[s].mean(0) for s in order]
        ses = [table[s].std(0, ddof=1) / np.sqrt(len(table[s])) if len(table[s]) > 1
               else np.zeros(table[s].shape[1]) for s in order]
        path = out / f"panel_{metric}.tsv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, delimiter="\t")
            w.writerow(["slot", *(f"{s}_mean" for s in order), *(f"{s}_se" for s in order)])
            for n in range(len(means[0])):
                w.writerow([n, *(repr(float(m[n])) for m in means), *(repr(float(e[n])) for e in ses)])
        written.append(path)
    return written


def oracle_check(cfg: ExperimentConfig, seeds=None, threshold=0.9):
    """Compare GDMSG (restricted to the oracle grids) to the exhaustive oracle on a tiny instance.

    The configured system is shrunk to V <= 2, K <= 2, N = 1 so enumeration stays cheap.
    Returns a list of (seed, oracle utility, gdmsg utility, passed).
    """
    sc = cfg.system.scenario
    tiny = dc.replace(sc, num_vehicles=min(sc.num_vehicles, 2),
                      num_elements=min(sc.num_elements, 2), num_slots=1)
    system = dc.replace(cfg.system, scenario=tiny)
    scfg = dc.replace(cfg.solver, phase_grid=cfg.solver.oracle_phase_grid,
                      resource_grid=cfg.solver.oracle_resource_grid)
    results = []
    for seed in (cfg.seeds if seeds is None else seeds):
        inst = realize(system, seed)
        u_o = solve("oracle", inst, system, scfg, cfg.gdm, seed).utility
        u_g = solve("gdmsg", inst, system, scfg, cfg.gdm, seed).utility
        results.append((seed, u_o, u_g, near_optimal(u_g, u_o, threshold)))
    return results


def near_optimal(u, u_opt, threshold=0.9):
    """u >= threshold * u_opt, read as "within (1 - threshold)|u_opt| of the optimum" so that
    the test keeps its meaning when utilities are negative."""
    return u >= u_opt - (1.0 - threshold) * abs(u_opt) - 1e-12
