"""Scenario files: YAML in, validated domain objects out, and back.

Layout::

    budget:  {bandwidth: 1 MHz, cpu: 2 GHz}
    solver:  {scheme: proposed, delta: 1.0e-3, ...}
    loops:
      - T: 10 ms
        rho: 0.01
        alpha: 100
        ul: {se: 10.5}                      # or ul: {channel: {d_km, fc_mhz, noise_dbm, target_snr_db}}
        dl: {channel: {d_km: 3, fc_mhz: 2000, target_snr_db: 46.2}}
        control: {n: 100, log2_det_A: 10, entropy_power: 0.01, det_M_nth_root: 1, trace_sigma_S: 1}
        # or control: {A: "diag(1.2, 4)", B: "identity(4)", Q: "identity(4)", R: "zero(4)", Sigma_v: "diag(0.01, 4)"}

Quantities accept a number in SI units or a string with a unit suffix.
Matrices are dense row-major lists or one of ``diag(value, n)``,
``identity(n)``, ``zero(n)``.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import re
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Union

import numpy as np
import yaml

from .control import ControlMatrices, ControlSummary
from .errors import ScenarioError
from .interloop.solution import SolverConfig
from .model import Budget, ChannelGeometry, LinkSpec, LogBase, LoopSpec, se_from_geometry

log = logging.getLogger(__name__)

SE_CONFLICT_RTOL = 1e-6

_UNITS = {
    "frequency": {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6},
}
_QTY = re.compile(r"^\s*([-+0-9.eE]+)\s*([A-Za-z]*)\s*$")
_SHORT = re.compile(r"^\s*(diag|identity|zero)\s*\(([^)]*)\)\s*$")

CHANNEL_KEYS = {"d_km": "distance_km", "fc_mhz": "carrier_freq_mhz", "noise_dbm": "noise_power_dbm",
                "target_snr_db": "target_snr_db", "log_base": "pathloss_log_base"}
SUMMARY_KEYS = ("n", "log2_det_A", "entropy_power", "det_M_nth_root", "trace_sigma_S")
MATRIX_KEYS = ("A", "B", "Q", "R", "Sigma_v")


@dataclass
class Scenario:
    loops: list[LoopSpec]
    budget: Budget
    solver: SolverConfig = field(default_factory=SolverConfig)
    name: str = "scenario"

    @property
    def num_loops(self) -> int:
        return len(self.loops)


def quantity(value: Any, kind: str, where: str) -> float:
    if isinstance(value, bool):
        raise ScenarioError(f"{where}: expected a {kind}, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        m = _QTY.match(value)
        if m:
            num, unit = m.groups()
            try:
                x = float(num)
            except ValueError:
                raise ScenarioError(f"{where}: cannot read number in {value!r}") from None
            if not unit:
                return x
            scale = _UNITS[kind].get(unit.lower())
            if scale is not None:
                return x * scale
            raise ScenarioError(f"{where}: unit {unit!r} is not a {kind} unit ({', '.join(_UNITS[kind])})")
    raise ScenarioError(f"{where}: expected a {kind}, got {value!r}")


def number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise ScenarioError(f"{where}: expected a number, got {value!r}")
    try:
        return float(value)
    except ValueError:
        raise ScenarioError(f"{where}: expected a number, got {value!r}") from None


def matrix(value: Any, where: str) -> np.ndarray:
    if isinstance(value, str):
        m = _SHORT.match(value)
        if not m:
            raise ScenarioError(f"{where}: unknown matrix shorthand {value!r}")
        kind, args = m.group(1), [a.strip() for a in m.group(2).split(",") if a.strip()]
        try:
            if kind == "diag":
                if len(args) != 2:
                    raise ValueError
                return float(args[0]) * np.eye(int(args[1]))
            if len(args) != 1:
                raise ValueError
            n = int(args[0])
            return np.eye(n) if kind == "identity" else np.zeros((n, n))
        except ValueError:
            raise ScenarioError(f"{where}: bad arguments in {value!r}") from None
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return np.array([[float(value)]])
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ScenarioError(f"{where}: matrix entries must be numbers") from None
    if arr.ndim != 2:
        raise ScenarioError(f"{where}: expected a 2-D row-major list, got shape {arr.shape}")
    return arr


def matrix_to_yaml(m: np.ndarray) -> Union[str, list]:
    n = m.shape[0]
    if m.shape == (n, n) and np.array_equal(m, np.diag(np.diag(m))) and np.all(np.diag(m) == m[0, 0]):
        v = float(m[0, 0])
        if v == 0.0:
            return f"zero({n})"
        if v == 1.0:
            return f"identity({n})"
        return f"diag({v!r}, {n})"
    return [[float(x) for x in row] for row in m]


def _mapping(raw, where):
    if not isinstance(raw, dict):
        raise ScenarioError(f"{where}: expected a mapping, got {type(raw).__name__}")
    return raw


def _check_keys(raw, allowed, where):
    extra = set(raw) - set(allowed)
    if extra:
        raise ScenarioError(f"{where}: unknown field(s) {sorted(extra)}; allowed: {sorted(allowed)}")


def _link(raw, where) -> LinkSpec:
    raw = _mapping(raw, where)
    _check_keys(raw, ("se", "channel"), where)
    geom = None
    if "channel" in raw:
        ch = _mapping(raw["channel"], f"{where}.channel")
        _check_keys(ch, CHANNEL_KEYS, f"{where}.channel")
        for req in ("d_km", "fc_mhz"):
            if req not in ch:
                raise ScenarioError(f"{where}.channel.{req} is required")
        kw = {}
        for k, v in ch.items():
            if k == "log_base":
                try:
                    kw[CHANNEL_KEYS[k]] = LogBase(v)
                except ValueError:
                    raise ScenarioError(f"{where}.channel.log_base must be 'log10' or 'log2', got {v!r}") from None
            else:
                kw[CHANNEL_KEYS[k]] = number(v, f"{where}.channel.{k}")
        try:
            geom = ChannelGeometry(**kw)
        except ScenarioError as ex:
            raise ScenarioError(f"{where}.channel: {ex}") from None
    if "se" in raw:
        se = number(raw["se"], f"{where}.se")
        if geom is not None:
            derived = se_from_geometry(geom)
            if abs(derived - se) > SE_CONFLICT_RTOL * abs(se):
                log.warning("%s: se=%g overrides the %g implied by the channel", where, se, derived)
        try:
            return LinkSpec(se, geom)
        except ScenarioError as ex:
            raise ScenarioError(f"{where}.se: {ex}") from None
    if geom is None:
        raise ScenarioError(f"{where}: give either 'se' or 'channel'")
    return LinkSpec.from_geometry(geom)


def _control(raw, where):
    raw = _mapping(raw, where)
    if set(raw) & set(MATRIX_KEYS):
        _check_keys(raw, MATRIX_KEYS, where)
        missing = [k for k in MATRIX_KEYS if k not in raw]
        if missing:
            raise ScenarioError(f"{where}: missing matrices {missing}")
        mats = {k: matrix(raw[k], f"{where}.{k}") for k in MATRIX_KEYS}
        try:
            return ControlMatrices(**mats)
        except (ValueError, ScenarioError) as ex:
            raise ScenarioError(f"{where}: {ex}") from None
    _check_keys(raw, SUMMARY_KEYS, where)
    missing = [k for k in SUMMARY_KEYS if k not in raw]
    if missing:
        raise ScenarioError(f"{where}: missing fields {missing} (or give matrices {list(MATRIX_KEYS)})")
    vals = {k: number(raw[k], f"{where}.{k}") for k in SUMMARY_KEYS}
    if vals["n"] != int(vals["n"]):
        raise ScenarioError(f"{where}.n must be an integer")
    vals["n"] = int(vals["n"])
    try:
        return ControlSummary(**vals)
    except (ValueError, ScenarioError) as ex:
        raise ScenarioError(f"{where}: {ex}") from None


def _loop(raw, i) -> LoopSpec:
    where = f"loops[{i}]"
    raw = _mapping(raw, where)
    _check_keys(raw, ("T", "rho", "alpha", "ul", "dl", "control", "name"), where)
    for req in ("T", "rho", "alpha", "ul", "dl", "control"):
        if req not in raw:
            raise ScenarioError(f"{where}.{req} is required")
    try:
        return LoopSpec(
            cycle_time_s=quantity(raw["T"], "time", f"{where}.T"),
            extraction_ratio=number(raw["rho"], f"{where}.rho"),
            processing_difficulty=number(raw["alpha"], f"{where}.alpha"),
            ul=_link(raw["ul"], f"{where}.ul"),
            dl=_link(raw["dl"], f"{where}.dl"),
            control=_control(raw["control"], f"{where}.control"),
        )
    except ScenarioError as ex:
        msg = str(ex)
        raise ScenarioError(msg if msg.startswith(where) else f"{where}: {msg}") from None


def _solver(raw) -> SolverConfig:
    raw = _mapping(raw or {}, "solver")
    known = {f.name: f for f in fields(SolverConfig)}
    _check_keys(raw, known, "solver")
    kw = {}
    for k, v in raw.items():
        default = getattr(SolverConfig, k)
        if isinstance(default, str):
            kw[k] = str(v)
        elif isinstance(default, int) and not isinstance(default, bool):
            x = number(v, f"solver.{k}")
            if x != int(x):
                raise ScenarioError(f"solver.{k} must be an integer, got {v!r}")
            kw[k] = int(x)
        elif k.endswith("_s"):
            kw[k] = quantity(v, "time", f"solver.{k}")
        else:
            kw[k] = number(v, f"solver.{k}")
    return SolverConfig(**kw)


def parse_scenario(raw: dict, name: str = "scenario") -> Scenario:
    raw = _mapping(raw, "scenario")
    _check_keys(raw, ("name", "budget", "solver", "loops"), "scenario")
    if "budget" not in raw:
        raise ScenarioError("budget section is required")
    b = _mapping(raw["budget"], "budget")
    _check_keys(b, ("bandwidth", "cpu"), "budget")
    for req in ("bandwidth", "cpu"):
        if req not in b:
            raise ScenarioError(f"budget.{req} is required")
    budget = Budget(quantity(b["bandwidth"], "frequency", "budget.bandwidth"), quantity(b["cpu"], "frequency", "budget.cpu"))
    loops_raw = raw.get("loops")
    if not isinstance(loops_raw, list) or not loops_raw:
        raise ScenarioError("loops must be a non-empty list")
    loops = [_loop(r, i) for i, r in enumerate(loops_raw)]
    return Scenario(loops=loops, budget=budget, solver=_solver(raw.get("solver")), name=str(raw.get("name", name)))


def loads_scenario(text: str, name: str = "scenario") -> Scenario:
    """Parse a scenario from YAML (or JSON) text."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as ex:
        raise ScenarioError(f"{name}: not valid YAML: {ex}") from None
    return parse_scenario(raw, name=name)


def load_scenario(path: Union[str, Path]) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as ex:
        raise ScenarioError(f"cannot read scenario {path}: {ex.strerror}") from None
    return loads_scenario(text, name=path.stem)


def _link_to_dict(link: LinkSpec) -> dict:
    if link.channel is None:
        return {"se": link.spectral_efficiency}
    g = link.channel
    ch = {"d_km": g.distance_km, "fc_mhz": g.carrier_freq_mhz, "noise_dbm": g.noise_power_dbm,
          "target_snr_db": g.target_snr_db, "log_base": g.pathloss_log_base.value}
    out = {"channel": ch}
    if abs(se_from_geometry(g) - link.spectral_efficiency) > SE_CONFLICT_RTOL * link.spectral_efficiency:
        out["se"] = link.spectral_efficiency
    return out


def _control_to_dict(c) -> dict:
    if isinstance(c, ControlSummary):
        return {k: getattr(c, k) for k in SUMMARY_KEYS}
    return {k: matrix_to_yaml(getattr(c, k)) for k in MATRIX_KEYS}


def scenario_to_dict(sc: Scenario) -> dict:
    return {
        "name": sc.name,
        "budget": {"bandwidth": sc.budget.total_bandwidth_hz, "cpu": sc.budget.total_cpu_hz},
        "solver": sc.solver.to_dict(),
        "loops": [
            {
                "T": s.cycle_time_s,
                "rho": s.extraction_ratio,
                "alpha": s.processing_difficulty,
                "ul": _link_to_dict(s.ul),
                "dl": _link_to_dict(s.dl),
                "control": _control_to_dict(s.control),
            }
            for s in sc.loops
        ],
    }


def dump_scenario(sc: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(sc), sort_keys=False, default_flow_style=None)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def digest(sc: Scenario) -> str:
    """Content hash of the scenario (independent of file formatting)."""
    return hashlib.sha256(canonical_json(scenario_to_dict(sc)).encode()).hexdigest()


def with_value(sc: Scenario, dotted: str, value: float) -> Scenario:
    """Copy of ``sc`` with one numeric field replaced, addressed like ``budget.bandwidth``
    or ``loops.2.alpha`` (``loops.*.alpha`` sets every loop)."""
    raw = scenario_to_dict(sc)
    parts = dotted.split(".")
    targets = [raw]
    for i, p in enumerate(parts[:-1]):
        nxt = []
        for t in targets:
            if isinstance(t, list):
                if p == "*":
                    nxt.extend(t)
                    continue
                try:
                    nxt.append(t[int(p)])
                except (ValueError, IndexError):
                    raise ScenarioError(f"parameter {dotted!r}: bad list index {p!r}") from None
            elif isinstance(t, dict) and p in t:
                nxt.append(t[p])
            else:
                raise ScenarioError(f"parameter {dotted!r}: no field {'.'.join(parts[: i + 1])!r}")
        targets = nxt
    last = parts[-1]
    for t in targets:
        if not isinstance(t, dict) or last not in t:
            raise ScenarioError(f"parameter {dotted!r}: no field {last!r}")
        t[last] = value
    return parse_scenario(raw, name=sc.name)


# ---------------------------------------------------------------------------
# built-in scenarios

FOUR_LOOPS = dict(
    n=100,
    log2_det_A=(10.0, 20.0, 30.0, 40.0),
    rho=0.01,
    alpha=(100.0, 200.0, 1000.0, 50.0),
    T=0.01,
    r_ul=(10.5, 9.9, 9.5, 9.2),
    r_dl=(12.2, 12.0, 11.8, 11.6),
    noise_var=0.01,
)
UL_TARGET_SNR_DB = 31.6
DL_TARGET_SNR_DB = 46.2
CARRIER_MHZ = 2000.0


def reference_summary(n: int, log2_det_A: float, noise_var: float = FOUR_LOOPS["noise_var"]) -> ControlSummary:
    """Isotropic noise var * I with unit-weight costs: N = var, |det M|^(1/n) = 1, tr = n var."""
    return ControlSummary(n=n, log2_det_A=log2_det_A, entropy_power=noise_var, det_M_nth_root=1.0,
                          trace_sigma_S=n * noise_var)


def four_loops(r_ul=FOUR_LOOPS["r_ul"], r_dl=FOUR_LOOPS["r_dl"], log2_det_A=FOUR_LOOPS["log2_det_A"],
              alpha=FOUR_LOOPS["alpha"], rho=FOUR_LOOPS["rho"], T=FOUR_LOOPS["T"], n=FOUR_LOOPS["n"]):
    return [
        LoopSpec(T, rho, a, LinkSpec(u), LinkSpec(d), reference_summary(n, e))
        for u, d, e, a in zip(r_ul, r_dl, log2_det_A, alpha)
    ]


def ul_se_for_closed_loop(r_comm: float, rho: float, r_dl: float) -> float:
    """UL SE giving a prescribed closed-loop SE for a given DL SE."""
    if not 0 < r_comm < r_dl:
        raise ScenarioError(f"closed-loop SE {r_comm} must lie in (0, r_dl={r_dl})")
    return r_comm * r_dl / (math.sqrt(r_dl) - math.sqrt(r_comm)) ** 2 / rho


def builtin(name: str) -> Scenario:
    if name == "four-loops":
        return Scenario(four_loops(), Budget(1e6, 2e9), name=name)
    if name == "fig4":
        return Scenario(four_loops(), Budget(500e3, 0.5e9), name=name)
    if name == "adequate-cpu":
        return Scenario(four_loops(), Budget(1e6, 2e11), name=name)
    if name in ("fig9-entropy", "fig9-se"):
        rho, r_dl = FOUR_LOOPS["rho"], 12.0
        if name == "fig9-entropy":
            rc, e = (0.1,) * 4, (10.0, 20.0, 100.0, 200.0)
        else:
            rc, e = (0.08, 0.10, 0.12, 0.14), (20.0,) * 4
        loops = four_loops(
            r_ul=[ul_se_for_closed_loop(r, rho, r_dl) for r in rc], r_dl=(r_dl,) * 4, log2_det_A=e, alpha=(100.0,) * 4
        )
        return Scenario(loops, Budget(1e6, 2e11), name=name)
    raise ScenarioError(f"unknown built-in scenario {name!r}; expected one of {', '.join(BUILTINS)}")


BUILTINS = ("four-loops", "fig4", "adequate-cpu", "fig9-entropy", "fig9-se")
