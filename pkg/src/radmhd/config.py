"""Run configuration (sectioned ``key = value`` text) and the diagnostics CSV format.

A minimal document::

    [params]
    mu = 1
    lambda = 1
    a = 1
    gamma = 2

    [scenario]
    preset = uniform
    t_end = 0.1

Sections ``[output]``, ``[picard]`` and ``[verify]`` are optional. Unknown
sections and keys are rejected with their line number.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from radmhd.core import ConfigurationError, FluidParams, Scenario, load_tabulated, make_preset
from radmhd.diagnostics import DiagnosticsRecord

CSV_HEADER = ",".join(DiagnosticsRecord.columns())

_FLOAT, _INT, _STR, _LEVELS = "float", "int", "str", "levels"

SCHEMA: dict[str, dict[str, str]] = {
    "params": {"mu": _FLOAT, "lambda": _FLOAT, "a": _FLOAT, "gamma": _FLOAT, "R0": _FLOAT},
    "scenario": {
        "preset": _STR, "n": _INT, "t_end": _FLOAT, "r0": _FLOAT, "cfl": _FLOAT,
        "rho_floor": _FLOAT, "blowup_grad_threshold": _FLOAT, "output_every": _INT,
        "alpha": _FLOAT, "dt_min": _FLOAT, "dt_max": _FLOAT, "alfven_floor": _FLOAT,
        "rho_bar": _FLOAT, "b_amp": _FLOAT, "rho0": _STR, "u0": _STR, "B0": _STR,
    },
    "output": {"path": _STR},
    "picard": {"delta": _FLOAT, "T": _FLOAT, "dt": _FLOAT, "iters": _INT},
    "verify": {"levels": _LEVELS, "t_end": _FLOAT},
}
PRESET_EXTRAS = {"uniform": ("rho_bar",), "vacuum-ball": ("rho_bar", "b_amp"),
                 "manufactured-smooth": (), "custom": ()}
REQUIRED = {"params": ("mu", "lambda", "a", "gamma"), "scenario": ("preset", "t_end")}

_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]\s*$")
_KEY_RE = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")


@dataclass(frozen=True)
class RunConfig:
    scenario: Scenario
    output_path: Optional[Path] = None
    alpha: Optional[float] = None
    picard_delta: float = 1e-3
    picard_T: float = 0.05
    picard_dt: Optional[float] = None
    picard_iters: int = 20
    verify_levels: tuple[int, ...] = (32, 64, 128, 256)
    verify_t_end: float = 0.05
    echo: tuple[str, ...] = field(default=(), repr=False)


def _locate(text: str) -> dict[tuple[str, str], int]:
    """Line number of every ``key`` under every ``[section]``."""
    where: dict[tuple[str, str], int] = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped[0] in "#;":
            continue
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1).strip()
            where[(section, "")] = lineno
            continue
        m = _KEY_RE.match(line)
        if m and section is not None:
            where[(section, m.group(1).strip())] = lineno
    return where


def _convert(section: str, key: str, raw: str, lineno: int):
    kind = SCHEMA[section][key]
    try:
        if kind == _FLOAT:
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError("not finite")
            return value
        if kind == _INT:
            return int(raw)
        if kind == _LEVELS:
            levels = tuple(int(x) for x in raw.replace(",", " ").split())
            if len(levels) < 2 or any(n < 16 for n in levels):
                raise ValueError("need at least two levels, each >= 16")
            return levels
    except ValueError as exc:
        raise ConfigurationError(
            f"line {lineno}: [{section}] {key} = {raw!r} is not a valid {kind} ({exc})") from None
    return raw


def parse_config(text: str) -> RunConfig:
    """Validate a configuration document and fill defaults."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed config: {exc}") from None
    where = _locate(text)

    values: dict[str, dict] = {}
    for section in parser.sections():
        line = where.get((section, ""), 0)
        if section not in SCHEMA:
            raise ConfigurationError(f"line {line}: unknown section [{section}]")
        values[section] = {}
        for key, raw in parser.items(section):
            lineno = where.get((section, key), line)
            if key not in SCHEMA[section]:
                raise ConfigurationError(f"line {lineno}: unknown key {key!r} in [{section}]")
            values[section][key] = _convert(section, key, raw.strip(), lineno)
    for section, keys in REQUIRED.items():
        for key in keys:
            if key not in values.get(section, {}):
                raise ConfigurationError(f"missing required key {key!r} in [{section}]")

    p = values["params"]
    try:
        params = FluidParams(mu=p["mu"], lam=p["lambda"], a_pressure=p["a"],
                             gamma=p["gamma"], R0=p.get("R0", 1.0))
    except ValueError as exc:
        raise ConfigurationError(f"[params]: {exc}") from None

    scenario = _build_scenario(params, dict(values["scenario"]))
    out = values.get("output", {})
    pic = values.get("picard", {})
    ver = values.get("verify", {})
    cfg = RunConfig(
        scenario=scenario,
        output_path=Path(out["path"]) if "path" in out else None,
        alpha=scenario.alpha,
        picard_delta=pic.get("delta", 1e-3),
        picard_T=pic.get("T", 0.05),
        picard_dt=pic.get("dt"),
        picard_iters=pic.get("iters", 20),
        verify_levels=ver.get("levels", (32, 64, 128, 256)),
        verify_t_end=ver.get("t_end", 0.05),
    )
    if not cfg.picard_delta > 0 or not cfg.picard_T > 0 or cfg.picard_iters < 1:
        raise ConfigurationError("[picard]: delta and T must be > 0 and iters >= 1")
    if cfg.picard_dt is not None and not cfg.picard_dt > 0:
        raise ConfigurationError("[picard]: dt must be > 0")
    return _with_echo(cfg)


def _build_scenario(params: FluidParams, s: dict) -> Scenario:
    preset = s.pop("preset")
    t_end = s.pop("t_end")
    n = s.pop("n", None)
    r0 = s.pop("r0", None)
    profiles = {k: s.pop(k) for k in ("rho0", "u0", "B0") if k in s}
    if preset not in PRESET_EXTRAS:
        raise ConfigurationError(
            f"unknown preset {preset!r}; choose from {tuple(PRESET_EXTRAS)}")
    for key in ("rho_bar", "b_amp"):
        if key in s and key not in PRESET_EXTRAS[preset]:
            raise ConfigurationError(f"{key} does not apply to preset {preset!r}")
    try:
        if preset == "custom":
            missing = [k for k in ("rho0", "u0", "B0") if k not in profiles]
            if missing:
                raise ConfigurationError(f"preset 'custom' needs profile files for {missing}")
            u0 = profiles["u0"]
            u0 = u0 if u0 == "compatible" else load_tabulated(u0)
            return Scenario(params=params, n=n or 128, rho0=load_tabulated(profiles["rho0"]), u0=u0,
                            B0=load_tabulated(profiles["B0"]), t_end=t_end, r0=r0,
                            preset="custom", blowup=r0 is not None, **s)
        if profiles:
            raise ConfigurationError(
                f"profile keys {sorted(profiles)} are only valid with preset = custom")
        if r0 is not None and preset != "vacuum-ball":
            raise ConfigurationError(f"r0 does not apply to preset {preset!r}")
        return make_preset(preset, params, n=n, t_end=t_end, r0=r0, **s)
    except ConfigurationError:
        raise
    except (ValueError, OSError) as exc:
        raise ConfigurationError(f"[scenario]: {exc}") from None


def _with_echo(cfg: RunConfig) -> RunConfig:
    sc = cfg.scenario
    p = sc.params
    lines = [
        f"params mu={p.mu!r} lambda={p.lam!r} a={p.a_pressure!r} gamma={p.gamma!r} R0={p.R0!r}",
        f"scenario preset={sc.preset} n={sc.n} t_end={sc.t_end!r} r0={sc.r0!r} cfl={sc.cfl!r} "
        f"rho_floor={sc.rho_floor!r} blowup_grad_threshold={sc.blowup_grad_threshold!r} "
        f"output_every={sc.output_every} alpha={sc.alpha!r} dt_min={sc.dt_min!r} "
        f"dt_max={sc.max_step!r} alfven_floor={sc.wave_floor!r}",
    ]
    return RunConfig(**{**cfg.__dict__, "echo": tuple(lines)})


def load_config(path: Union[str, Path]) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def _fmt(x: float) -> str:
    return format(x, ".17g")


def emit_records(records: Sequence[DiagnosticsRecord], path, termination=None,
                 echo: Iterable[str] = ()) -> None:
    """Write the diagnostics CSV; ``path`` may be a filename or an open text stream."""
    if not records:
        raise ValueError("emit_records needs at least one record")
    lines = [f"# {line}" for line in echo]
    lines.append(CSV_HEADER)
    lines.extend(",".join(_fmt(v) for v in rec.values()) for rec in records)
    if termination is not None:
        lines.append(f"# termination={termination.kind.value} t={_fmt(termination.t)}")
    text = "\n".join(lines) + "\n"
    if hasattr(path, "write"):
        path.write(text)
    else:
        Path(path).write_text(text)


def read_records(path) -> tuple[list[DiagnosticsRecord], Optional[str], Optional[float]]:
    """Parse a diagnostics CSV back into records plus the termination reason and time."""
    records = []
    reason = t_term = None
    header_seen = False
    for line in Path(path).read_text().splitlines():
        if line.startswith("# termination="):
            m = re.match(r"# termination=(\S+) t=(\S+)", line)
            if m:
                reason, t_term = m.group(1), float(m.group(2))
            continue
        if not line or line.startswith("#"):
            continue
        if not header_seen:
            if line != CSV_HEADER:
                raise ValueError(f"unexpected CSV header {line!r}")
            header_seen = True
            continue
        records.append(DiagnosticsRecord(*(float(x) for x in line.split(","))))
    return records, reason, t_term
