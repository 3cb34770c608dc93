"""Scenario files, single runs, sweeps and the built-in reproduction tables.

A scenario is one JSON object; see ``docs/scenario-schema.md``. Loading is
fail-closed: unknown keys are rejected, every module invariant is checked,
and any default that was filled in is reported through ``echo``.
"""
from __future__ import annotations

import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Callable

from .collectives import LinkClass
from .errors import ConfigError
from .model import ModelConfig, WorkloadConfig
from .placement import HBM_BANDWIDTH_DEFAULT, ClusterConfig, ParallelismConfig, build_placement
from .step_time import StepBreakdown, Knobs, step_time, steps_to_train
from . import technology as tech

ALPHA_SCALE_UP_DEFAULT = 250e-9
ALPHA_SCALE_OUT_DEFAULT = 2e-6

# section -> key -> default; a default of REQUIRED means the key must be given
REQUIRED = object()
SCHEMA: dict[str, dict] = {
    "model": {
        "layers": REQUIRED, "d_model": REQUIRED, "heads": REQUIRED,
        "seq_len": REQUIRED, "total_experts_base": REQUIRED,
        "active_experts_base": REQUIRED, "granularity_m": 1, "d_ff_base": None,
        "bytes_per_param": 2, "bytes_per_activation": 2,
    },
    "workload": {"global_batch": REQUIRED, "seq_len": None, "total_tokens": REQUIRED},
    "parallelism": {"tp": REQUIRED, "dp": REQUIRED, "pp": REQUIRED,
                    "experts_per_dp_rank": 1, "microbatches": None},
    "cluster": {"total_gpus": REQUIRED, "pod_size": REQUIRED, "flops_per_gpu": REQUIRED,
                "hbm_bandwidth": HBM_BANDWIDTH_DEFAULT, "scale_up_bandwidth": REQUIRED,
                "scale_up_alpha": ALPHA_SCALE_UP_DEFAULT,
                "scale_out_bandwidth": REQUIRED,
                "scale_out_alpha": ALPHA_SCALE_OUT_DEFAULT},
    "knobs": {"efficiency": 1.0, "overlap_fraction": 0.0, "ep_spill": "hierarchical",
              "alpha_scale_up": None, "alpha_scale_out": None},
}
TOP_LEVEL = ("id", "description", "baseline", *SCHEMA, "technologies")


@dataclass(frozen=True)
class Scenario:
    id: str
    model: ModelConfig
    workload: WorkloadConfig
    parallelism: ParallelismConfig
    cluster: ClusterConfig
    knobs: Knobs = Knobs()
    technologies: tuple = ()
    description: str = ""
    baseline: str | None = None

    def evaluate(self) -> StepBreakdown:
        return step_time(self.model, self.parallelism, self.cluster, self.workload, self.knobs)


def _line_col(text: str, pos: int) -> tuple[int, int]:
    line = text.count("\n", 0, pos) + 1
    return line, pos - (text.rfind("\n", 0, pos) + 1) + 1


def _section(raw: dict, name: str, defaults: list) -> dict:
    spec = SCHEMA[name]
    given = raw.get(name, {})
    if not isinstance(given, dict):
        raise ConfigError(name, f"section must be an object, got {type(given).__name__}")
    unknown = sorted(set(given) - set(spec))
    if unknown:
        raise ConfigError(f"{name} keys", f"unknown keys: {', '.join(unknown)}")
    out = {}
    for key, default in spec.items():
        if key in given:
            out[key] = given[key]
        elif default is REQUIRED:
            raise ConfigError(f"{name}.{key}", "is required")
        else:
            out[key] = default
            defaults.append((f"{name}.{key}", default))
    return out


def scenario_from_dict(raw: dict, default_id: str = "scenario",
                       echo: Callable[[str], None] | None = None) -> Scenario:
    """Build and validate a Scenario from parsed JSON."""
    if not isinstance(raw, dict):
        raise ConfigError("scenario", "top level must be a JSON object")
    unknown = sorted(set(raw) - set(TOP_LEVEL))
    if unknown:
        raise ConfigError("scenario keys", f"unknown keys: {', '.join(unknown)}")
    defaults: list = []
    m = _section(raw, "model", defaults)
    w = _section(raw, "workload", defaults)
    p = _section(raw, "parallelism", defaults)
    c = _section(raw, "cluster", defaults)
    k = _section(raw, "knobs", defaults)

    model = ModelConfig(**m)
    if w["seq_len"] is None:
        w["seq_len"] = model.seq_len
    elif w["seq_len"] != model.seq_len:
        raise ConfigError("workload.seq_len == model.seq_len",
                          f"workload uses {w['seq_len']}, model uses {model.seq_len}")
    if not isinstance(w["total_tokens"], int):
        # JSON writes 13e12 as a float; keep token counts exact
        if isinstance(w["total_tokens"], float) and w["total_tokens"].is_integer():
            w["total_tokens"] = int(w["total_tokens"])
        else:
            raise ConfigError("workload.total_tokens",
                              f"must be a whole number, got {w['total_tokens']!r}")
    workload = WorkloadConfig(**w)
    par = ParallelismConfig(**p)
    up_alpha = k["alpha_scale_up"] if k["alpha_scale_up"] is not None else c["scale_up_alpha"]
    out_alpha = k["alpha_scale_out"] if k["alpha_scale_out"] is not None else c["scale_out_alpha"]
    cluster = ClusterConfig(
        total_gpus=c["total_gpus"], pod_size=c["pod_size"],
        scale_up_link=LinkClass(float(c["scale_up_bandwidth"]), float(up_alpha)),
        scale_out_link=LinkClass(float(c["scale_out_bandwidth"]), float(out_alpha)),
        flops_per_gpu=float(c["flops_per_gpu"]), hbm_bandwidth=float(c["hbm_bandwidth"]))
    knobs = Knobs(float(k["efficiency"]), float(k["overlap_fraction"]), k["ep_spill"])
    techs = raw.get("technologies", [])
    if not isinstance(techs, list):
        raise ConfigError("technologies", "must be a list of technology profiles")
    profiles = tuple(tech.TechnologyProfile.from_dict(t) for t in techs)

    # placement and microbatching checks raise ConfigError on violation
    build_placement(cluster, par, model)
    par.microbatches_for(workload)

    sid = raw.get("id", default_id)
    if echo is not None:
        echo(f"{sid}: tp={par.tp}, dp={par.dp}, pp={par.pp}, "
             f"experts_per_dp_rank={par.experts_per_dp_rank}, pod_size={cluster.pod_size}")
        resolved = {"model.d_ff_base": model.d_ff_base,
                    "workload.seq_len": workload.seq_len,
                    "parallelism.microbatches": par.microbatches_for(workload)}
        for key, value in defaults:
            if key.startswith("knobs.alpha_"):
                continue  # unset override: the cluster alpha applies
            echo(f"{sid}: default {key} = {resolved.get(key, value)!r}")
    return Scenario(sid, model, workload, par, cluster, knobs, profiles,
                    raw.get("description", ""), raw.get("baseline"))


def parse_json(text: str, source: str = "<string>"):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        line, col = _line_col(text, exc.pos)
        raise ConfigError("json syntax", f"{source}:{line}:{col}: {exc.msg}") from None


def apply_overrides(raw: dict, overrides: list[str]) -> dict:
    """Apply ``section.key=value`` strings; values are parsed as JSON when possible."""
    raw = json.loads(json.dumps(raw))
    for item in overrides:
        if "=" not in item:
            raise ConfigError("--set", f"expected key=value, got {item!r}")
        path, value = item.split("=", 1)
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError:
            parsed = value
        node = raw
        parts = path.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError("--set", f"{path}: {part} is not a section")
        node[parts[-1]] = parsed
    return raw


def load_scenario(path, overrides: list[str] = (),
                  echo: Callable[[str], None] | None = None) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("scenario file", f"cannot read {path}: {exc.strerror}") from None
    raw = apply_overrides(parse_json(text, str(path)), list(overrides))
    return scenario_from_dict(raw, default_id=path.stem, echo=echo)


def bundled_scenario_paths() -> list[Path]:
    root = resources.files("scaleup_model") / "scenarios"
    return sorted(Path(str(p)) for p in root.iterdir() if p.name.endswith(".json"))


def load_bundled(name: str, **kwargs) -> Scenario:
    root = resources.files("scaleup_model") / "scenarios"
    return load_scenario(Path(str(root / f"{name}.json")), **kwargs)


# -- running ----------------------------------------------------------------

@dataclass(frozen=True)
class ResultRow:
    scenario: str
    breakdown: StepBreakdown
    steps: int
    time_to_train: float
    normalized: float

    COLUMNS = ("scenario", "compute_s", "tp_comm_s", "ep_comm_s", "pp_bubble_s", "dp_sync_s",
               "step_s", "steps", "time_to_train_s", "normalized")

    def values(self) -> list:
        b = self.breakdown
        return [self.scenario, b.compute, b.tp_comm, b.ep_comm, b.pp_bubble, b.dp_sync,
                b.total, self.steps, self.time_to_train, self.normalized]


def run(scenario: Scenario, baseline: ResultRow | None = None) -> ResultRow:
    step = scenario.evaluate()
    steps = steps_to_train(scenario.workload)
    ttt = steps * step.total
    norm = 1.0 if baseline is None else ttt / baseline.time_to_train
    return ResultRow(scenario.id, step, steps, ttt, norm)


def thread_limit() -> int:
    value = os.environ.get("SCALEUP_MODEL_THREADS")
    if not value:
        return min(8, os.cpu_count() or 1)
    try:
        n = int(value)
    except ValueError:
        raise ConfigError("SCALEUP_MODEL_THREADS", f"must be an integer, got {value!r}") from None
    if n < 1:
        raise ConfigError("SCALEUP_MODEL_THREADS", f"must be >= 1, got {n}")
    return n


def sweep(scenarios: list[Scenario], baseline_id: str | None = None) -> list[ResultRow]:
    """Evaluate scenarios concurrently; rows come back in input order."""
    if not scenarios:
        return []
    ids = [s.id for s in scenarios]
    if len(set(ids)) != len(ids):
        raise ConfigError("scenario ids", "ids must be unique within a sweep")
    baseline_id = baseline_id or scenarios[0].id
    if baseline_id not in ids:
        raise ConfigError("baseline", f"{baseline_id!r} is not one of {', '.join(ids)}")
    with ThreadPoolExecutor(max_workers=thread_limit()) as pool:
        raw = list(pool.map(run, scenarios))
    base = raw[ids.index(baseline_id)]
    return [replace(r, normalized=r.time_to_train / base.time_to_train) for r in raw]


# -- output -----------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_csv(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


@dataclass
class Table:
    name: str
    columns: tuple
    rows: list
    checks: list = field(default_factory=list)  # (label, passed, detail)

    def csv(self) -> str:
        return to_csv(self.columns, self.rows)

    @property
    def ok(self) -> bool:
        return all(passed for _, passed, _ in self.checks)


def results_table(name: str, rows: list[ResultRow]) -> Table:
    return Table(name, ResultRow.COLUMNS, [r.values() for r in rows])


# -- reproduction targets ---------------------------------------------------

def _grid(systems: dict[str, str]) -> list[Scenario]:
    return [load_bundled(f"paper_{prefix}_config{c}")
            for prefix in systems.values() for c in range(1, 5)]


def _band(label: str, value: float, lo: float, hi: float) -> tuple:
    return (label, lo <= value <= hi, f"{value:.4f} in [{lo:.3f}, {hi:.3f}]")


def reproduce_table4() -> Table:
    rows = []
    for p in (tech.LPO, tech.CPO, tech.PASSAGE):
        rows.append([p.name, p.in_package_pj_per_bit, p.off_package_pj_per_bit,
                     p.total_pj_per_bit])
    expected = {"lpo": 13.0, "cpo": 12.0, "passage": 4.3}
    checks = [(f"{r[0]} total", r[3] == expected[r[0]], f"{r[3]} pJ/bit") for r in rows]
    return Table("table4", ("technology", "in_package_pj_per_bit", "off_package_pj_per_bit",
                            "total_pj_per_bit"), rows, checks)


def reproduce_fig7() -> Table:
    bw = tech.GPU_SCALEUP_BW
    rows = []
    for p in (tech.LPO, tech.CPO, tech.PASSAGE):
        lp = tech.link_power(bw, p)
        rows.append([p.name, bw, lp.in_package, lp.off_package, lp.total])
    ratio = rows[1][4] / rows[2][4]
    return Table("fig7", ("technology", "bandwidth_bps", "in_package_w", "off_package_w",
                          "total_w"), rows,
                 [_band("cpo/passage power", ratio, 2.79 - 0.05, 2.79 + 0.05)])


def reproduce_fig8_area() -> Table:
    bw, base = tech.GPU_SCALEUP_BW, tech.GPU_PACKAGE_AREA
    rows = []
    for p in (tech.LPO, tech.CPO, tech.PASSAGE):
        rows.append([p.name, bw, tech.optics_area(bw, p), tech.board_area(bw, p),
                     tech.package_expansion_pct(base, bw, p)])
    lpo, cpo, passage = rows
    checks = [
        ("lpo board area", lpo[3] == 23890.0 and lpo[3] > 20000, f"{lpo[3]} sqmm"),
        _band("cpo optics area", cpo[2], 1311 - 5, 1311 + 5),
        ("passage optics area", passage[2] == 200.0, f"{passage[2]} sqmm"),
        _band("cpo package expansion %", cpo[4], 22.9 - 0.5, 22.9 + 0.5),
        _band("passage package expansion %", passage[4], 3.50 - 0.05, 3.50 + 0.05),
    ]
    return Table("fig8-area", ("technology", "bandwidth_bps", "optics_area_sqmm",
                               "board_area_sqmm", "package_expansion_pct"), rows, checks)


def _paired(name: str, alt_prefix: str) -> tuple[Table, list[float], list[ResultRow]]:
    scenarios = _grid({"passage": "passage", "alt": alt_prefix})
    rows = sweep(scenarios, baseline_id="paper_passage_config1")
    ratios = [rows[4 + i].time_to_train / rows[i].time_to_train for i in range(4)]
    return results_table(name, rows), ratios, rows


def reproduce_fig8() -> Table:
    table, ratios, rows = _paired("fig8", "alt512")
    table.checks = [
        _band("alt/passage config 1", ratios[0], 1.4 * 0.8, 1.4 * 1.2),
        _band("alt/passage config 2", ratios[1], 1.4 * 0.8, 1.4 * 1.2),
        _band("alt/passage config 3", ratios[2], 1.3 * 0.8, 1.3 * 1.2),
        _band("alt/passage config 4", ratios[3], 1.3 * 0.8, 1.3 * 1.2),
        _band("passage config 4/config 1", rows[3].normalized, 1.00, 1.10),
    ]
    return table


def reproduce_fig9() -> Table:
    """System-specific pod sizes; the checks also cover the same-radix grid."""
    table, ratios, _ = _paired("fig9", "alt144")
    increasing = all(a < b for a, b in zip(ratios, ratios[1:]))
    table.checks = [(f"fig8 {label}", ok, detail)
                    for label, ok, detail in reproduce_fig8().checks] + [
        _band("alt/passage config 1", ratios[0], 1.6 * 0.8, 1.6 * 1.2),
        _band("alt/passage config 4", ratios[3], 2.7 * 0.8, 2.7 * 1.2),
        ("alt/passage strictly increasing", increasing,
         ", ".join(f"{r:.4f}" for r in ratios)),
    ]
    return table


TARGETS: dict[str, Callable[[], Table]] = {
    "table4": reproduce_table4,
    "fig7": reproduce_fig7,
    "fig8-area": reproduce_fig8_area,
    "fig8": reproduce_fig8,
    "fig9": reproduce_fig9,
}


def reproduce(target: str) -> Table:
    if target not in TARGETS:
        raise KeyError(f"unknown target {target!r}; available: {', '.join(TARGETS)}")
    return TARGETS[target]()


def echo_stderr(msg: str):
    print(msg, file=sys.stderr)

