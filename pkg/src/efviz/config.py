"""Scenario configuration: strict TOML in, validated ScenarioConfig out.

Unknown keys are hard errors at every nesting level, so a typo never turns
into a silently defaulted run. A config can be rebuilt at any refinement
level: the grid gains nodes with dx halved exactly, named initial profiles
are re-evaluated on the new nodes, and amplitude bisection reruns per level
so refined runs stay on the discrete zero-energy manifold.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from efviz import predictors
from efviz.discretization import Grid1D
from efviz.kernel import KernelAdmissibilityError, RelaxationKernel
from efviz.solver import (
    MANUFACTURED,
    BoundaryCompatibilityError,
    ScenarioConfig,
    auto_dtau,
    initial_profile,
)


class ConfigError(Exception):
    """Bad configuration file: syntax, unknown key, or constraint violation."""


_TOP_KEYS = {
    "p", "form", "tau_max", "dtau", "cfl_safety", "blowup_threshold",
    "record_every", "power_mode", "manufactured", "grid", "kernel", "initial",
}
_GRID_KEYS = {"r1", "r2", "n"}
_KERNEL_KEYS = {"type", "terms", "s", "mu"}
_INITIAL_KEYS = {"u0", "u1"}
_U0_KEYS = {"preset", "amplitude", "amplitude_factor", "values"}
_U1_KEYS = {"preset", "amplitude", "values", "scale_of_u0"}

BISECT_AMPLITUDE = "bisect_zero_energy"


def _check_keys(table: dict, allowed: set[str], where: str) -> None:
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise ConfigError(
            f"unknown key{'s' if len(unknown) > 1 else ''} in {where}: "
            f"{', '.join(unknown)} (allowed: {', '.join(sorted(allowed))})"
        )


def _number(table: dict, key: str, where: str, default=None):
    if key not in table:
        if default is None:
            raise ConfigError(f"{where}.{key} is required")
        return default
    val = table[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{where}.{key} must be a number, got {val!r}")
    return float(val)


def _integer(table: dict, key: str, where: str, default=None):
    if key not in table:
        if default is None:
            raise ConfigError(f"{where}.{key} is required")
        return default
    val = table[key]
    if isinstance(val, bool) or not isinstance(val, int):
        raise ConfigError(f"{where}.{key} must be an integer, got {val!r}")
    return val


def load_document(path) -> dict:
    """Parse a TOML file; syntax errors carry the location tomllib reports."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        return tomllib.loads(raw.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _build_grid(doc: dict, refine_levels: int) -> Grid1D:
    if "grid" not in doc:
        raise ConfigError("missing [grid] table")
    table = doc["grid"]
    if not isinstance(table, dict):
        raise ConfigError("[grid] must be a table")
    _check_keys(table, _GRID_KEYS, "[grid]")
    r1 = _number(table, "r1", "grid")
    r2 = _number(table, "r2", "grid")
    n = _integer(table, "n", "grid")
    try:
        grid = Grid1D(r1, r2, n)
        for _ in range(refine_levels):
            grid = grid.refine()
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from exc
    return grid


def _build_kernel(doc: dict) -> RelaxationKernel:
    table = doc.get("kernel", {"type": "null"})
    if not isinstance(table, dict):
        raise ConfigError("[kernel] must be a table")
    _check_keys(table, _KERNEL_KEYS, "[kernel]")
    kind = table.get("type", "expsum")
    try:
        if kind == "null":
            extras = set(table) - {"type"}
            if extras:
                raise ConfigError(f"null kernel takes no other keys, got {sorted(extras)}")
            return RelaxationKernel.null()
        if kind == "expsum":
            terms = table.get("terms")
            if not isinstance(terms, list):
                raise ConfigError("kernel.terms must be a list of [a, b] pairs")
            pairs = []
            for item in terms:
                if not (isinstance(item, list) and len(item) == 2):
                    raise ConfigError(f"kernel term {item!r} is not an [a, b] pair")
                pairs.append((item[0], item[1]))
            return RelaxationKernel.exponential_sum(pairs)
        if kind == "tabulated":
            if "s" not in table or "mu" not in table:
                raise ConfigError("tabulated kernel needs both s and mu arrays")
            return RelaxationKernel.tabulated(table["s"], table["mu"])
    except KernelAdmissibilityError as exc:
        raise ConfigError(f"kernel: {exc}") from exc
    raise ConfigError(f"kernel.type must be expsum, tabulated or null, got {kind!r}")


def _profile_from_table(table: dict, grid: Grid1D, label: str, amplitude: float) -> np.ndarray:
    if "values" in table:
        if "preset" in table:
            raise ConfigError(f"initial.{label}: give either preset or values, not both")
        vals = np.asarray(table["values"], dtype=float)
        if vals.shape != (grid.n,):
            raise ConfigError(
                f"initial.{label}.values has length {vals.size}, grid has {grid.n} interior "
                "nodes; nodal data cannot ride a refinement ladder"
            )
        return amplitude * vals
    preset = table.get("preset", "sine" if label == "u0" else "zero")
    try:
        return initial_profile(preset, grid, amplitude)
    except (ValueError, BoundaryCompatibilityError) as exc:
        raise ConfigError(f"initial.{label}: {exc}") from exc


def _build_initial(doc: dict, grid: Grid1D, p: float, power_mode: str):
    table = doc.get("initial", {})
    if not isinstance(table, dict):
        raise ConfigError("[initial] must be a table")
    _check_keys(table, _INITIAL_KEYS, "[initial]")
    u0_tbl = table.get("u0", {})
    u1_tbl = table.get("u1", {})
    for name, tbl, allowed in (("u0", u0_tbl, _U0_KEYS), ("u1", u1_tbl, _U1_KEYS)):
        if not isinstance(tbl, dict):
            raise ConfigError(f"initial.{name} must be a table")
        _check_keys(tbl, allowed, f"[initial.{name}]")

    amplitude = u0_tbl.get("amplitude", 1.0)
    factor = _number(u0_tbl, "amplitude_factor", "initial.u0", default=1.0)
    if amplitude == BISECT_AMPLITUDE:
        if "values" in u0_tbl:
            raise ConfigError("initial.u0: amplitude bisection needs a named preset")
        if "scale_of_u0" not in u1_tbl:
            raise ConfigError(
                "initial.u0: amplitude bisection requires initial.u1.scale_of_u0, "
                "since the bisected amplitude scales both fields together"
            )
        ratio = _number(u1_tbl, "scale_of_u0", "initial.u1")
        preset = u0_tbl.get("preset", "sine")
        try:
            amplitude = predictors.bisect_zero_energy_amplitude(
                grid, p, velocity_ratio=ratio, profile=preset, power_mode=power_mode
            )
        except ValueError as exc:
            raise ConfigError(f"initial.u0: {exc}") from exc
    elif isinstance(amplitude, str):
        raise ConfigError(
            f"initial.u0.amplitude must be a number or {BISECT_AMPLITUDE!r}, got {amplitude!r}"
        )
    else:
        amplitude = _number(u0_tbl, "amplitude", "initial.u0", default=1.0)
    u0 = _profile_from_table(u0_tbl, grid, "u0", amplitude * factor)

    if "scale_of_u0" in u1_tbl:
        extras = set(u1_tbl) - {"scale_of_u0"}
        if extras:
            raise ConfigError(f"initial.u1: scale_of_u0 excludes other keys, got {sorted(extras)}")
        u1 = _number(u1_tbl, "scale_of_u0", "initial.u1") * u0
    else:
        u1 = _profile_from_table(u1_tbl, grid, "u1", _number(u1_tbl, "amplitude", "initial.u1", default=1.0))
    return u0, u1


def build_config(doc: dict, refine_levels: int = 0) -> ScenarioConfig:
    """Assemble and validate a ScenarioConfig from a parsed document."""
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a table")
    _check_keys(doc, _TOP_KEYS, "config")
    if refine_levels < 0:
        raise ValueError("refine_levels must be nonnegative")

    grid = _build_grid(doc, refine_levels)
    kernel = _build_kernel(doc)
    p = _number(doc, "p", "config")
    tau_max = _number(doc, "tau_max", "config")
    cfl_safety = _number(doc, "cfl_safety", "config", default=0.5)
    power_mode = doc.get("power_mode", "odd")
    form = doc.get("form", "w_form")
    record_every = _integer(doc, "record_every", "config", default=1)
    threshold = _number(doc, "blowup_threshold", "config", default=1e8)

    dtau_raw = doc.get("dtau", "auto")
    if dtau_raw == "auto":
        dtau = auto_dtau(grid, cfl_safety)
    elif isinstance(dtau_raw, bool) or not isinstance(dtau_raw, (int, float)):
        raise ConfigError(f"dtau must be a number or 'auto', got {dtau_raw!r}")
    else:
        dtau = float(dtau_raw) / 2**refine_levels

    manufactured = None
    name = doc.get("manufactured")
    if name is not None:
        if name not in MANUFACTURED:
            raise ConfigError(
                f"manufactured must be one of {sorted(MANUFACTURED)}, got {name!r}"
            )
        manufactured = MANUFACTURED[name]()

    u0, u1 = _build_initial(doc, grid, p, power_mode)
    try:
        return ScenarioConfig(
            p=p,
            grid=grid,
            kernel=kernel,
            u0=u0,
            u1=u1,
            dtau=dtau,
            tau_max=tau_max,
            form=form,
            blowup_threshold=threshold,
            power_mode=power_mode,
            cfl_safety=cfl_safety,
            record_every=record_every,
            manufactured=manufactured,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(path, refine_levels: int = 0) -> ScenarioConfig:
    """Load a TOML file and build the scenario it describes."""
    return build_config(load_document(path), refine_levels)
