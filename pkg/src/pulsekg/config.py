"""Strict TOML run configuration: sections [grid], [pulse], [tensor], [run],
[diagnostics], [sweep]; unknown keys are errors (with the offending line)."""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from pulsekg.grid import GridSpec
from pulsekg.integrator import Frame, RunConfig
from pulsekg.nonlinearity import CubicTensor, ZERO_TENSOR, preset_blowup, scale_tensor
from pulsekg.profiles import PulseParams
from pulsekg.sweep import DecayCriteria, SweepPlan


class ConfigFileError(ValueError):
    """Malformed configuration file (syntax, unknown keys, bad values)."""


_KNOWN = {
    "grid": {"half_width", "spacing"},
    "pulse": {"delta", "nu"},
    "tensor": {"preset", "entries"},
    "run": {"frame", "cfl", "t_end", "output_every", "blowup_threshold",
            "checkpoint_every", "data"},
    "diagnostics": {"upsilon", "hyperboloid", "s_start", "s_end", "ds",
                    "ladder_order"},
    "sweep": {"nu_values", "delta_values", "bracket", "tolerance", "budget",
              "parallel", "probe_points_per_delta", "probe_cfl",
              "decay_radius", "decay_spacing", "decay_tau_end", "decay_cfl",
              "fit_window", "max_exponent", "sup_drop", "data"},
}


def _line_of(text: str, key: str) -> int | None:
    for i, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0]
        if stripped.strip().startswith(key) and "=" in stripped:
            return i
    return None


def _check_keys(doc: dict, text: str) -> None:
    for section, content in doc.items():
        if section not in _KNOWN:
            line = _line_of(text, f"[{section}") or _line_of(text, section)
            raise ConfigFileError(f"unknown section [{section}]"
                                  + (f" (line {line})" if line else ""))
        if not isinstance(content, dict):
            raise ConfigFileError(f"top-level key {section!r} outside any section")
        for key in content:
            if key not in _KNOWN[section]:
                line = _line_of(text, key)
                raise ConfigFileError(
                    f"unknown key {key!r} in [{section}]"
                    + (f" (line {line})" if line else ""))


@dataclass
class DiagnosticsSettings:
    upsilon: bool = True
    hyperboloid: bool = False
    s_start: float = math.sqrt(3.0)
    s_end: float = 4.0
    ds: float = 0.1
    ladder_order: int = -1


@dataclass
class LoadedConfig:
    run_config: RunConfig | None     # None when only [sweep] validates
    diagnostics: DiagnosticsSettings
    sweep_plan: SweepPlan | None
    raw: dict


def _tensor_from(doc: dict, frame: Frame, delta: float) -> CubicTensor:
    spec = doc.get("tensor", {})
    if "preset" in spec and "entries" in spec:
        raise ConfigFileError("[tensor] takes either a preset or entries, not both")
    if spec.get("preset") == "blowup":
        base = preset_blowup()
    elif spec.get("preset") in (None, "zero"):
        base = ZERO_TENSOR
    elif "preset" in spec:
        raise ConfigFileError(f"unknown tensor preset {spec['preset']!r}")
    else:
        base = ZERO_TENSOR
    if "entries" in spec:
        try:
            base = CubicTensor(tuple(((int(j), int(k), int(l)), float(v))
                                     for j, k, l, v in spec["entries"]))
        except (TypeError, ValueError) as exc:
            raise ConfigFileError(f"bad [tensor] entries: {exc}") from exc
    if frame is Frame.SCALED:
        return scale_tensor(base, delta)
    return base


def load_config(path, resolution_scale: float = 1.0,
                frame_override: str | None = None,
                no_hyperboloid: bool = False,
                checkpoint_every: int | None = None) -> LoadedConfig:
    try:
        text = open(path, encoding="utf-8").read()
    except OSError as exc:
        raise ConfigFileError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigFileError(f"TOML parse error in {path}: {exc}") from exc
    _check_keys(doc, text)

    pulse_sec = doc.get("pulse", {})
    try:
        pulse = PulseParams(delta=float(pulse_sec.get("delta", 0.25)),
                            nu=float(pulse_sec.get("nu", 0.0)))
    except ValueError as exc:
        raise ConfigFileError(str(exc)) from exc

    run_sec = doc.get("run", {})
    frame_name = frame_override or run_sec.get("frame", "original")
    try:
        frame = Frame(frame_name)
    except ValueError as exc:
        raise ConfigFileError(f"unknown frame {frame_name!r}") from exc

    grid_sec = doc.get("grid", {})
    if "half_width" not in grid_sec or "spacing" not in grid_sec:
        raise ConfigFileError("[grid] needs half_width and spacing")
    spacing = float(grid_sec["spacing"]) / max(resolution_scale, 1e-12)
    grid = GridSpec.centered(float(grid_sec["half_width"]), spacing)

    diag_sec = doc.get("diagnostics", {})
    diags = DiagnosticsSettings(
        upsilon=bool(diag_sec.get("upsilon", True)),
        hyperboloid=bool(diag_sec.get("hyperboloid", False)) and not no_hyperboloid,
        s_start=float(diag_sec.get("s_start", math.sqrt(3.0))),
        s_end=float(diag_sec.get("s_end", 4.0)),
        ds=float(diag_sec.get("ds", 0.1)),
        ladder_order=int(diag_sec.get("ladder_order", -1)),
    )

    threshold = run_sec.get("blowup_threshold", 0.0)
    run_config = None
    run_error = None
    try:
        run_config = RunConfig(
            frame=frame,
            grid=grid,
            pulse=pulse,
            tensor=_tensor_from(doc, frame, pulse.delta),
            cfl=float(run_sec.get("cfl", 0.25)),
            t_end=float(run_sec.get("t_end", 1.0)),
            output_every=int(run_sec.get("output_every", 1)),
            blowup_threshold=float(threshold) if threshold else None,
            upsilon_enabled=diags.upsilon,
            data_family=str(run_sec.get("data", "pulse")),
            checkpoint_every=(checkpoint_every if checkpoint_every is not None
                              else int(run_sec.get("checkpoint_every", 0))),
        )
    except ValueError as exc:
        run_error = exc
    if run_config is None and "sweep" not in doc:
        raise ConfigFileError(f"invalid run configuration: {run_error}") from run_error

    plan = None
    if "sweep" in doc:
        s = doc["sweep"]
        criteria = DecayCriteria(
            fit_window=tuple(s.get("fit_window", (4.0, 12.0))),
            max_exponent=float(s.get("max_exponent", -0.75)),
            sup_drop=float(s.get("sup_drop", 0.1)),
        )
        base = _tensor_from(doc, Frame.ORIGINAL, pulse.delta)
        plan = SweepPlan(
            nu_values=[float(v) for v in s.get("nu_values", [])],
            delta_values=[float(v) for v in s.get("delta_values", [pulse.delta])],
            tensor=base if base.entries else preset_blowup(),
            data_family=str(s.get("data", "pulse")),
            probe_points_per_delta=int(s.get("probe_points_per_delta", 48)),
            probe_cfl=float(s.get("probe_cfl", 0.05)),
            decay_radius=float(s.get("decay_radius", 12.0)),
            decay_spacing=float(s.get("decay_spacing", 1.0 / 6.0)) / max(resolution_scale, 1e-12),
            decay_tau_end=float(s.get("decay_tau_end", 12.0)),
            decay_cfl=float(s.get("decay_cfl", 0.25)),
            decay=criteria,
            bisect_bracket=tuple(s["bracket"]) if "bracket" in s else None,
            bisect_tol=float(s.get("tolerance", 0.125)),
            bisect_budget=int(s.get("budget", 16)),
            parallel=int(s.get("parallel", 1)),
        )

    return LoadedConfig(run_config=run_config, diagnostics=diags,
                        sweep_plan=plan, raw=doc)
