"""Data ingestion, single-test runs and Monte Carlo experiments.

Seeds are derived hierarchically: master -> cell -> dataset -> replicate,
where a cell is one (null or alternative, n) combination. Every weight pair
is evaluated on the same datasets and the same bootstrap refits, so cells
for different weights are paired comparisons.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .alternatives import CONVENTIONS, POWER_ALTERNATIVES, parse_alternative, sample_alternative
from .bootstrap import BootstrapError, TestReport, derive_seed, run_bootstrap_multi, run_bootstrap_test
from .hermite import BHParams, sample_bhd
from .mle import FitOptions
from .samples import BivariateSample, SampleError
from .statistic import DEFAULT_ORDER, WeightSpec

__all__ = [
    "IngestError",
    "ExperimentError",
    "ExperimentConfig",
    "ResultTable",
    "ingest_pairs",
    "ingest_contingency",
    "load_accidents",
    "run_gof_command",
    "run_type1_experiment",
    "run_power_experiment",
    "emit_table",
    "read_table",
    "format_report",
    "format_table",
    "NULL_GRID",
    "TYPE1_WEIGHTS",
    "POWER_WEIGHTS",
    "RESULT_TABLE_SCHEMA",
]

log = logging.getLogger(__name__)

NULL_GRID = (
    (1.0, 0.8, 0.10, 0.20, 0.0),
    (1.0, 0.8, 0.25, 0.25, 0.0),
    (1.0, 0.8, 0.50, 0.20, 0.0),
    (1.0, 0.8, 0.50, 0.50, 0.0),
    (1.5, 1.0, 0.50, 0.50, 0.0),
    (1.5, 1.0, 0.50, 0.75, 0.0),
    (1.5, 1.0, 0.75, 0.25, 0.0),
    (1.5, 1.0, 1.00, 0.25, 0.0),
    (2.0, 1.0, 0.25, 0.75, 0.0),
    (2.0, 1.0, 0.50, 0.25, 0.0),
    (2.0, 1.0, 0.75, 0.25, 0.0),
)
TYPE1_WEIGHTS = ((0, 0), (1, 0), (0, 1), (1, 1), (5, 1), (1, 5), (5, 5))
POWER_WEIGHTS = ((0, 0), (1, 0), (1, 1), (1, 5), (5, 5))
DATASET_FAILURE_CEILING = 0.02


class IngestError(ValueError):
    pass


class ExperimentError(RuntimeError):
    pass


# --- ingestion


def _data_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line and not line.startswith("#"):
            yield lineno, line


def _parse_count(tok: str, lineno: int) -> int:
    tok = tok.strip()
    try:
        val = int(tok)
    except ValueError:
        raise IngestError(f"line {lineno}: {tok!r} is not an integer") from None
    if val < 0:
        raise IngestError(f"line {lineno}: negative value {val}")
    return val


def ingest_pairs(path) -> BivariateSample:
    """Read ``x,y`` pairs, one per line. A non-numeric first line is a header."""
    pairs = []
    for k, (lineno, line) in enumerate(_data_lines(Path(path).read_text())):
        toks = [t for t in line.replace(";", ",").split(",")]
        if len(toks) != 2:
            raise IngestError(f"line {lineno}: expected 'x,y', got {line!r}")
        if k == 0 and not any(c.isdigit() for c in line):
            continue
        pairs.append((_parse_count(toks[0], lineno), _parse_count(toks[1], lineno)))
    if not pairs:
        raise IngestError("empty sample")
    return BivariateSample.from_pairs(pairs)


def read_contingency_matrix(text: str) -> np.ndarray:
    rows = []
    for lineno, line in _data_lines(text):
        rows.append([_parse_count(t, lineno) for t in line.replace(";", ",").split(",")])
    if not rows:
        raise IngestError("empty contingency table")
    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width:
            raise IngestError(f"ragged contingency table: row {i} has {len(row)} entries, expected {width}")
    return np.array(rows, dtype=np.int64)


def ingest_contingency(path) -> BivariateSample:
    """Expand a count matrix file (rows = Y values 0..R, columns = X values 0..C)."""
    table = read_contingency_matrix(Path(path).read_text())
    if table.sum() == 0:
        raise IngestError("empty sample")
    return BivariateSample.from_contingency(table)


def load_accidents() -> BivariateSample:
    """The bundled two-period accident data (708 subjects)."""
    text = resources.files("hermite_gof").joinpath("data/accidents.csv").read_text()
    return BivariateSample.from_contingency(read_contingency_matrix(text))


# --- single test


def run_gof_command(
    data: BivariateSample,
    a1: float = 1.0,
    a2: float = 0.0,
    B: int = 500,
    seed: int = 0,
    fix_lambda3: bool = False,
    workers: int = 1,
    refit: bool = True,
    quad_order: int = DEFAULT_ORDER,
) -> TestReport:
    opts = FitOptions(fix_lambda3=fix_lambda3)
    return run_bootstrap_test(data, WeightSpec(a1, a2, quad_order), B, seed, opts, workers=workers, refit=refit)


def format_report(rep: TestReport, alpha: float = 0.05) -> str:
    th = rep.theta_hat
    decision = "reject H0" if rep.reject(alpha) else "do not reject H0"
    lines = [
        f"weight (a1, a2)      : ({rep.weight.a1:g}, {rep.weight.a2:g})",
        f"fitted theta (s2=1)  : mu={th.mu:.6g} sigma2={th.sigma2:g} "
        f"lambda1={th.lambda1:.6g} lambda2={th.lambda2:.6g} lambda3={th.lambda3:.6g}",
        f"V_obs                : {rep.v_obs:.6g}",
        f"bootstrap replicates : {rep.B_effective} of {rep.B} (failures {rep.failures})",
        f"p-value              : {rep.p_value:.4f}",
    ]
    for a, c in sorted(rep.critical_values.items()):
        lines.append(f"critical value a={a:<5g}: {c:.6g}")
    lines.append(f"decision at a={alpha:g}   : {decision}")
    return "\n".join(lines)


# --- experiments


@dataclass
class ExperimentConfig:
    """Settings for a type-I error or power experiment.

    ``specs`` holds null parameter vectors (type1) or alternative strings
    such as ``"BB(1;0.41,0.02,0.01)"`` (power). Empty ``specs``, ``n`` or
    ``weights`` fall back to the published grid for the mode: type1 uses the
    eleven null points, n in {30, 50, 70} and seven weight pairs; power uses
    the thirty alternatives, n = 50 and five weight pairs.
    """

    mode: str = "type1"
    specs: list = field(default_factory=list)
    n: list = field(default_factory=list)
    B: int = 500
    reps: int = 1000
    alpha: list = field(default_factory=lambda: [0.05, 0.10])
    weights: list = field(default_factory=list)
    master_seed: int = 0
    workers: int = 1
    fix_lambda3: bool = True
    quad_order: int = DEFAULT_ORDER

    def __post_init__(self):
        if self.mode not in ("type1", "power"):
            raise ValueError(f"mode must be 'type1' or 'power', got {self.mode!r}")
        if not self.specs:
            self.specs = list(NULL_GRID) if self.mode == "type1" else list(POWER_ALTERNATIVES)
        if not self.n:
            self.n = [30, 50, 70] if self.mode == "type1" else [50]
        if not self.weights:
            self.weights = [list(w) for w in (TYPE1_WEIGHTS if self.mode == "type1" else POWER_WEIGHTS)]
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.B < 99:
            raise ValueError("B must be >= 99")
        # validates every spec up front
        self.parsed_specs()

    @classmethod
    def from_json(cls, path, default_mode: str = "type1") -> "ExperimentConfig":
        raw = json.loads(Path(path).read_text())
        if not isinstance(raw, dict):
            raise ValueError("experiment config must be a JSON object")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        raw.setdefault("mode", default_mode)
        return cls(**raw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["specs"] = [list(s) if isinstance(s, (tuple, list)) else s for s in self.specs]
        return d

    def parsed_specs(self) -> list:
        out = []
        for s in self.specs:
            if self.mode == "type1":
                if isinstance(s, str):
                    s = [float(v) for v in s.strip("() ").split(",")]
                out.append(BHParams(*s))
            else:
                out.append(parse_alternative(s) if isinstance(s, str) else s)
        return out

    def weight_specs(self) -> list:
        return [WeightSpec(a1, a2, self.quad_order) for a1, a2 in self.weights]


def _spec_label(spec) -> str:
    if isinstance(spec, BHParams):
        return "(" + ",".join(f"{v:g}" for v in spec.as_array()) + ")"
    return spec.label


def _dataset_task(args):
    spec, n, seed, weights, B, fit_opts = args
    rng = np.random.default_rng(derive_seed(seed, 0))
    if isinstance(spec, BHParams):
        data = sample_bhd(spec, n, rng)
    else:
        data = sample_alternative(spec, n, rng)
    try:
        reports = run_bootstrap_multi(data, weights, B, derive_seed(seed, 1), fit_opts)
    except (BootstrapError, SampleError) as exc:
        log.debug("dataset failed: %s", exc)
        return None
    return [reports[w].p_value for w in weights]


def _run_cells(cfg: ExperimentConfig):
    specs = cfg.parsed_specs()
    weights = cfg.weight_specs()
    fit_opts = FitOptions(fix_lambda3=cfg.fix_lambda3)
    cells = [(i, spec, j, n) for i, spec in enumerate(specs) for j, n in enumerate(cfg.n)]
    tasks = []
    for c, (i, spec, j, n) in enumerate(cells):
        cell_seed = derive_seed(cfg.master_seed, c)
        for r in range(cfg.reps):
            tasks.append((spec, int(n), derive_seed(cell_seed, r), weights, cfg.B, fit_opts))
    if cfg.workers <= 1:
        results = [_dataset_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_dataset_task, tasks, chunksize=max(1, len(tasks) // (8 * cfg.workers))))
    per_cell = [results[c * cfg.reps : (c + 1) * cfg.reps] for c in range(len(cells))]
    return cells, weights, per_cell


def _rate_columns(alphas, pct: bool):
    cols = []
    for a in alphas:
        cols += [f"rate_{a:g}", f"se_{a:g}"]
        if pct:
            cols.append(f"pct_{a:g}")
    return cols


def _build_table(cfg: ExperimentConfig, pct: bool) -> "ResultTable":
    t0 = time.perf_counter()
    cells, weights, per_cell = _run_cells(cfg)
    columns = ["spec", "n", "a1", "a2", "reps", "failures"] + _rate_columns(cfg.alpha, pct)
    rows = []
    for (i, spec, j, n), res in zip(cells, per_cell):
        ok = [r for r in res if r is not None]
        failures = len(res) - len(ok)
        if failures > DATASET_FAILURE_CEILING * len(res) and failures > 0 and len(res) > 1:
            raise ExperimentError(f"{_spec_label(spec)}, n={n}: {failures} of {len(res)} datasets failed")
        if not ok:
            raise ExperimentError(f"{_spec_label(spec)}, n={n}: every dataset failed")
        pvals = np.array(ok)
        for k, w in enumerate(weights):
            row = {"spec": _spec_label(spec), "n": int(n), "a1": w.a1, "a2": w.a2, "reps": len(ok), "failures": failures}
            for a in cfg.alpha:
                rate = float(np.mean(pvals[:, k] <= a))
                row[f"rate_{a:g}"] = rate
                row[f"se_{a:g}"] = math.sqrt(rate * (1 - rate) / len(ok))
                if pct:
                    row[f"pct_{a:g}"] = int(round(100 * rate))
            rows.append(row)
    meta = {
        "mode": cfg.mode,
        "config": cfg.to_dict(),
        "p_value_rule": "add-one",
        "seeding": "master -> cell (spec, n) -> dataset -> replicate, splitmix64 counter derivation",
        "alternative_conventions": dict(CONVENTIONS) if cfg.mode == "power" else None,
        "runtime_seconds": round(time.perf_counter() - t0, 3),
    }
    return ResultTable(columns, rows, meta)


def run_type1_experiment(cfg: ExperimentConfig) -> "ResultTable":
    """Rejection fraction of BH(theta) datasets, for each theta, n, weight and alpha."""
    if cfg.mode != "type1":
        raise ValueError("config mode is not 'type1'")
    return _build_table(cfg, pct=False)


def run_power_experiment(cfg: ExperimentConfig) -> "ResultTable":
    """Rejection fraction under each alternative; also as rounded percentages."""
    if cfg.mode != "power":
        raise ValueError("config mode is not 'power'")
    return _build_table(cfg, pct=True)


# --- result tables

RESULT_TABLE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema", "metadata", "columns", "rows"],
    "properties": {
        "schema": {"const": "hermite_gof.result_table/1"},
        "metadata": {"type": "object"},
        "columns": {"type": "array", "items": {"type": "string"}},
        "rows": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["spec", "n", "a1", "a2", "reps"],
                "properties": {
                    "spec": {"type": "string"},
                    "n": {"type": "integer", "minimum": 1},
                    "a1": {"type": "number", "minimum": 0},
                    "a2": {"type": "number", "minimum": 0},
                    "reps": {"type": "integer", "minimum": 0},
                    "failures": {"type": "integer", "minimum": 0},
                },
                "patternProperties": {
                    "^rate_": {"type": "number", "minimum": 0, "maximum": 1},
                    "^se_": {"type": "number", "minimum": 0},
                    "^pct_": {"type": "integer", "minimum": 0, "maximum": 100},
                },
            },
        },
    },
}


@dataclass
class ResultTable:
    columns: list
    rows: list
    metadata: dict = field(default_factory=dict)

    def cell(self, spec: str, n: int, a1: float, a2: float, column: str):
        for row in self.rows:
            if row["spec"] == spec and row["n"] == n and row["a1"] == a1 and row["a2"] == a2:
                return row[column]
        raise KeyError((spec, n, a1, a2))

    def __eq__(self, other):
        if not isinstance(other, ResultTable):
            return NotImplemented
        return self.columns == other.columns and self.rows == other.rows and self.metadata == other.metadata


def _coerce(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def emit_table(tbl: ResultTable, path, format: str = "csv") -> Path:
    """Write the table. CSV carries the metadata as a leading ``# {json}`` line."""
    path = Path(path)
    if format == "json":
        doc = {"schema": "hermite_gof.result_table/1", "metadata": tbl.metadata, "columns": tbl.columns, "rows": tbl.rows}
        path.write_text(json.dumps(doc, indent=2) + "\n")
    elif format == "csv":
        buf = io.StringIO()
        buf.write("# " + json.dumps(tbl.metadata, sort_keys=True) + "\n")
        writer = csv.DictWriter(buf, fieldnames=tbl.columns, lineterminator="\n")
        writer.writeheader()
        for row in tbl.rows:
            writer.writerow({c: (repr(v) if isinstance(v, float) else v) for c, v in row.items()})
        path.write_text(buf.getvalue())
    else:
        raise ValueError(f"unknown format {format!r}")
    return path


def read_table(path) -> ResultTable:
    path = Path(path)
    text = path.read_text()
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        return ResultTable(doc["columns"], doc["rows"], doc["metadata"])
    lines = text.splitlines()
    meta = {}
    if lines and lines[0].startswith("# "):
        meta = json.loads(lines[0][2:])
        lines = lines[1:]
    reader = csv.reader(lines)
    columns = next(reader)
    rows = [{c: _coerce(v) for c, v in zip(columns, rec)} for rec in reader]
    return ResultTable(columns, rows, meta)


def format_table(tbl: ResultTable) -> str:
    """Plain-text rendering: one block per weight, one line per (spec, n)."""
    rate_cols = [c for c in tbl.columns if c.startswith(("rate_", "pct_"))]
    out = []
    weights = []
    for row in tbl.rows:
        if (row["a1"], row["a2"]) not in weights:
            weights.append((row["a1"], row["a2"]))
    for a1, a2 in weights:
        out.append(f"weight (a1, a2) = ({a1:g}, {a2:g})")
        out.append(f"{'spec':<42}{'n':>5}  " + "  ".join(f"{c:>10}" for c in rate_cols))
        for row in tbl.rows:
            if (row["a1"], row["a2"]) != (a1, a2):
                continue
            vals = "  ".join(
                f"{row[c]:>10d}" if isinstance(row[c], int) else f"{row[c]:>10.3f}" for c in rate_cols
            )
            out.append(f"{row['spec']:<42}{row['n']:>5}  {vals}")
        out.append("")
    return "\n".join(out)
