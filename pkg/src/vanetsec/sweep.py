"""Experiment configs, parameter sweeps, result rows and threshold detection.

A config is a flat list of ``key = value`` lines; ``#`` starts a comment.
Defaults reproduce the full-scale reference setting (unit disk, r = 250 m,
log-normal alpha = 2 and sigma = 4 dB, 5000 trials).
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

from .analytic import DEFAULT_CEILING, analytic_p_succ
from .connectivity import LogNormal, UnitDisk
from .oracle import exact_p_succ_fixed, exact_p_succ_marginal
from .simulation import Estimate, estimate_p_succ
from .topology import Scenario, Topology, parse_topology

__all__ = [
    "ConfigError",
    "SweepSpec",
    "ResultRow",
    "CSV_FIELDS",
    "parse_config",
    "merge_settings",
    "build_spec",
    "run_spec",
    "run_config",
    "rows_to_csv",
    "rows_to_json",
    "read_rows",
    "find_threshold",
]

CSV_FIELDS = (
    "method", "model", "r", "alpha", "sigma", "rho", "L", "pm", "trials",
    "p_succ", "stderr", "ci_low", "ci_high", "seed", "runtime_s",
)


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _floats(text: str) -> tuple[float, ...]:
    items = [t for t in (s.strip() for s in text.split(",")) if t]
    return tuple(float(t) for t in items)


def _choice(*options):
    def parse(text: str) -> str:
        t = text.strip()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {t!r}")
        return t

    return parse


SWEEP_PARAMS = {"malice_prob": "pm", "road_length": "L", "density": "rho"}

# key -> (parser, default)
KEYS: dict[str, tuple[Any, Any]] = {
    "model": (_choice("unit_disk", "log_normal"), "unit_disk"),
    "r": (float, 250.0),
    "alpha": (float, 2.0),
    "sigma": (float, 4.0),
    "L": (float, 3000.0),
    "rho": (float, 0.05),
    "pm": (float, 0.1),
    "method": (_choice("simulation", "analytic", "oracle"), "simulation"),
    "trials": (int, 5000),
    "seed": (int, 1),
    "sweep": (_choice(*SWEEP_PARAMS), None),
    "values": (_floats, ()),
    "workers": (int, 1),
    "timing": (_bool, True),
    "out": (lambda s: tuple(p.strip() for p in s.split(",") if p.strip()), ()),
    # analytic
    "tail_mass": (float, 1e-3),
    "budget": (int, 10_000),
    "grid_step": (float, 1.0),
    "ceiling": (int, DEFAULT_CEILING),
    "beyond_ceiling": (_choice("refuse", "sample"), "refuse"),
    "quadrature": (_bool, False),
    # fixtures
    "topology": (str, None),
    "positions": (_floats, ()),
    "fixed_malice": (_bool, False),
}


def parse_config(text: str) -> dict[str, Any]:
    """Parse ``key = value`` lines into typed settings (only keys that appear)."""
    settings: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        settings[key] = _parse_value(key, value, f"line {lineno}")
    return settings


def _parse_value(key: str, value: Any, where: str) -> Any:
    if key not in KEYS:
        raise ConfigError(f"{where}: unknown key {key!r}")
    if not isinstance(value, str):
        return value
    try:
        return KEYS[key][0](value)
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value for {key!r}: {exc}") from None


@dataclass(frozen=True)
class SweepSpec:
    base: Scenario
    parameter: Optional[str]
    values: tuple[float, ...]
    method: str
    settings: dict

    @property
    def scenarios(self) -> list[Scenario]:
        if self.parameter is None:
            return [self.base]
        field = {"malice_prob": "malice_prob", "road_length": "road_length", "density": "density"}[self.parameter]
        return [dataclasses.replace(self.base, **{field: v}) for v in self.values]


@dataclass(frozen=True)
class ResultRow:
    method: str
    model: str
    r: float
    alpha: Optional[float]
    sigma: Optional[float]
    rho: float
    L: float
    pm: float
    trials: int
    p_succ: float
    stderr: float
    ci_low: float
    ci_high: float
    seed: int
    runtime_s: Optional[float]

    def as_dict(self) -> dict[str, Any]:
        return {f: getattr(self, f) for f in CSV_FIELDS}


def build_spec(settings: dict[str, Any], base_dir: Path | None = None) -> SweepSpec:
    s = {k: default for k, (_, default) in KEYS.items()}
    s.update(settings)
    if s["model"] == "unit_disk":
        model = UnitDisk(s["r"])
    else:
        model = LogNormal(s["r"], s["alpha"], s["sigma"])
    try:
        base = Scenario(s["L"], s["rho"], s["pm"], model)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if s["sweep"] is None and s["values"]:
        raise ConfigError("'values' given without 'sweep'")
    if s["sweep"] is not None and not s["values"]:
        raise ConfigError(f"sweep over {s['sweep']!r} needs a non-empty 'values' list")
    if s["trials"] < 1 or s["budget"] < 1:
        raise ConfigError("trials and budget must be positive")
    spec = SweepSpec(base, s["sweep"], tuple(s["values"]), s["method"], s)
    try:
        spec.scenarios
    except ValueError as exc:
        raise ConfigError(f"bad {s['sweep']} value: {exc}") from None
    if s["topology"] is not None:
        path = Path(s["topology"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        s["_fixture"] = parse_topology(path.read_text())
    if s["method"] == "oracle" and s["topology"] is None and not s["positions"]:
        raise ConfigError("method 'oracle' needs 'positions' or 'topology'")
    return spec


def _evaluate(scenario: Scenario, method: str, s: dict) -> Estimate:
    fixture: Optional[Topology] = s.get("_fixture")
    if method == "simulation":
        topo = None
        if fixture is not None:
            topo = Topology(scenario.road_length, fixture.positions, fixture.malicious)
        return estimate_p_succ(
            scenario,
            s["trials"],
            s["seed"],
            topology=topo,
            resample_malice=topo is not None and not s["fixed_malice"],
        )
    if method == "analytic":
        return analytic_p_succ(
            scenario,
            s["tail_mass"],
            s["budget"],
            s["grid_step"],
            s["seed"],
            quadrature=s["quadrature"],
            ceiling=s["ceiling"],
            beyond_ceiling=s["beyond_ceiling"],
        )
    positions = fixture.positions if fixture is not None else tuple(s["positions"])
    if fixture is not None and s["fixed_malice"]:
        p = exact_p_succ_fixed(Topology(scenario.road_length, positions, fixture.malicious), scenario.model)
    else:
        p = exact_p_succ_marginal(positions, scenario.road_length, scenario.model, scenario.malice_prob)
    return Estimate(p, 0.0, p, p, 1, "oracle", s["seed"])


def _row(scenario: Scenario, method: str, s: dict) -> ResultRow:
    start = time.perf_counter()
    est = _evaluate(scenario, method, s)
    elapsed = time.perf_counter() - start
    m = scenario.model
    log_normal = isinstance(m, LogNormal)
    return ResultRow(
        method=method,
        model=m.kind,
        r=m.range_m,
        alpha=m.path_loss_exponent if log_normal else None,
        sigma=m.shadowing_stddev if log_normal else None,
        rho=scenario.density,
        L=scenario.road_length,
        pm=scenario.malice_prob,
        trials=est.trials,
        p_succ=est.p_succ,
        stderr=est.stderr,
        ci_low=est.ci_low,
        ci_high=est.ci_high,
        seed=est.master_seed,
        runtime_s=round(elapsed, 6) if s["timing"] else None,
    )


def run_spec(spec: SweepSpec) -> list[ResultRow]:
    s = spec.settings
    scenarios = spec.scenarios
    if s["workers"] > 1 and len(scenarios) > 1:
        with ProcessPoolExecutor(max_workers=s["workers"]) as pool:
            return list(pool.map(_row, scenarios, [spec.method] * len(scenarios), [s] * len(scenarios)))
    return [_row(sc, spec.method, s) for sc in scenarios]


def run_config(
    config_text: str, overrides: Optional[dict[str, Any]] = None, base_dir: Path | None = None
) -> list[ResultRow]:
    """Parse a config, apply ``overrides`` (already-typed or raw strings) and run it."""
    return run_spec(build_spec(merge_settings(config_text, overrides), base_dir))


def merge_settings(config_text: str, overrides: Optional[dict[str, Any]] = None) -> dict[str, Any]:
    settings = parse_config(config_text)
    for key, value in (overrides or {}).items():
        settings[key] = _parse_value(key, value, f"--{key}")
    return settings


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows: Iterable[ResultRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for row in rows:
        writer.writerow([_cell(v) for v in row.as_dict().values()])
    return buf.getvalue()


def rows_to_json(rows: Iterable[ResultRow]) -> str:
    return json.dumps([row.as_dict() for row in rows], indent=2) + "\n"


_INT_FIELDS = {"trials", "seed"}
_STR_FIELDS = {"method", "model"}


def read_rows(text: str) -> list[ResultRow]:
    """Load rows back from CSV or JSON text."""
    stripped = text.lstrip()
    if stripped.startswith("["):
        records = json.loads(text)
    else:
        reader = csv.DictReader(io.StringIO(text))
        if tuple(reader.fieldnames or ()) != CSV_FIELDS:
            raise ValueError("CSV header does not match the result schema")
        records = list(reader)
    rows = []
    for rec in records:
        vals = {}
        for f in CSV_FIELDS:
            v = rec.get(f)
            if v is None or v == "":
                vals[f] = None
            elif f in _STR_FIELDS:
                vals[f] = str(v)
            elif f in _INT_FIELDS:
                vals[f] = int(v)
            else:
                vals[f] = float(v)
        rows.append(ResultRow(**vals))
    return rows


def find_threshold(curve: Sequence[tuple[float, float]], epsilon: float = 0.02) -> Optional[float]:
    """Smallest malice probability whose P_succ is within ``epsilon`` of the 0.5 floor."""
    if not curve:
        raise ValueError("empty curve")
    xs = [p for p, _ in curve]
    if any(b < a for a, b in zip(xs, xs[1:])):
        raise ValueError("curve must be sorted by malice probability")
    for pm, ps in curve:
        if abs(ps - 0.5) <= epsilon:
            return pm
    return None
