"""Scenario files: TOML parameter bundles with provenance comments.

Every numeric value carries a trailing comment whose first word is its
provenance tag, one of ``paper``, ``fitted`` or ``assumed``::

    gamma_hz = 346e3   # paper
    m = 20819          # assumed: 2 pi R n / lambda

Frequencies and rates are ordinary frequencies in Hz (rates as
rate / 2 pi), temperatures in degC and powers in W or dBm, chosen by the
key suffix (``power_w`` / ``power_dbm``). dBm conversion lives here and
nowhere else; the physics modules only see watts.
"""

from __future__ import annotations

import copy
import hashlib
import json
import logging
import math
import re
import sys
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .core import ConverterSystem, MicrowaveMode, OpticalMode, hz_to_rad
from .coupling import MaterialEO, air_gap_factor
from .dispersion import BareMode, CrossingModel, ModeLadder
from .errors import EOConvError, ScenarioError

log = logging.getLogger(__name__)

TAGS = ("paper", "fitted", "assumed")
SWEEP_VARIABLES = ("microwave_frequency", "temperature", "microwave_power", "pump_detuning", "pump_power")

_SECTION_RE = re.compile(r"^\s*(\[\[?)\s*([A-Za-z0-9_.\-]+)\s*\]\]?\s*(#.*)?$")
_KEY_RE = re.compile(r"^\s*([A-Za-z0-9_\-]+)\s*=\s*(.*)$")


def _strip_comment(value_part: str):
    """Split 'value  # comment' respecting quoted strings."""
    in_str = None
    for i, ch in enumerate(value_part):
        if in_str:
            if ch == in_str:
                in_str = None
        elif ch in "\"'":
            in_str = ch
        elif ch == "#":
            return value_part[:i], value_part[i + 1:]
    return value_part, None


def parse_provenance(text: str) -> dict:
    """Map 'section.key' (or 'section[i].key') to the tag in its trailing comment."""
    tags = {}
    section = ""
    counters = {}
    for line in text.splitlines():
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        m = _SECTION_RE.match(line)
        if m:
            name = m.group(2)
            if m.group(1) == "[[":
                idx = counters.get(name, 0)
                counters[name] = idx + 1
                section = f"{name}[{idx}]"
            else:
                section = name
            continue
        m = _KEY_RE.match(line)
        if not m:
            continue
        _, comment = _strip_comment(m.group(2))
        if comment is None:
            continue
        words = comment.strip().split()
        if words:
            tag = words[0].rstrip(":;,.").lower()
            if tag in TAGS:
                tags[f"{section}.{m.group(1)}" if section else m.group(1)] = tag
    return tags


def _numeric_paths(data, prefix=""):
    if isinstance(data, dict):
        for k, v in data.items():
            if not prefix and k == "scenario":
                continue  # name/version metadata
            yield from _numeric_paths(v, f"{prefix}.{k}" if prefix else k)
    elif isinstance(data, list):
        if data and all(isinstance(v, dict) for v in data):
            for i, v in enumerate(data):
                yield from _numeric_paths(v, f"{prefix}[{i}]")
        elif any(isinstance(v, (int, float)) and not isinstance(v, bool) for v in data):
            yield prefix
    elif isinstance(data, (int, float)) and not isinstance(data, bool):
        yield prefix


@dataclass(frozen=True)
class SweepSpec:
    name: str
    variable: str
    start: float
    stop: float
    step: Optional[float] = None
    count: Optional[int] = None
    unit: str = ""
    outputs: tuple = ("P_plus", "P_minus", "eta_plus", "eta_minus")

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ScenarioError(f"sweep {self.name!r}: unknown variable {self.variable!r}")
        if (self.step is None) == (self.count is None):
            raise ScenarioError(f"sweep {self.name!r}: give exactly one of step or count")
        if self.step is not None and not self.step > 0:
            raise ScenarioError(f"sweep {self.name!r}: step must be positive")
        if self.count is not None and self.count < 1:
            raise ScenarioError(f"sweep {self.name!r}: count must be >= 1")
        if self.stop < self.start:
            raise ScenarioError(f"sweep {self.name!r}: stop must not be below start")

    def values(self):
        if self.start == self.stop:
            return [float(self.start)]
        if self.count is not None:
            if self.count == 1:
                return [float(self.start)]
            d = (self.stop - self.start) / (self.count - 1)
            return [self.start + i * d for i in range(self.count)]
        n = int(math.floor((self.stop - self.start) / self.step + 1e-9))
        # integer-indexed grid avoids accumulated rounding
        return [self.start + i * self.step for i in range(n + 1)]


@dataclass(frozen=True)
class Scenario:
    name: str
    version: int
    data: dict
    provenance: dict
    defaults: tuple = field(default=())
    source: str = ""

    def canonical(self) -> str:
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"), ensure_ascii=True)

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def section(self, name) -> dict:
        return self.data.get(name, {})

    def provenance_counts(self) -> dict:
        counts = {t: 0 for t in TAGS}
        counts["untagged"] = 0
        for path in _numeric_paths(self.data):
            counts[self.provenance.get(path, "untagged")] += 1
        return counts

    def untagged(self):
        return [p for p in _numeric_paths(self.data) if p not in self.provenance]

    def sweeps(self):
        out = []
        for i, raw in enumerate(self.data.get("sweep", [])):
            try:
                out.append(
                    SweepSpec(
                        name=raw.get("name", f"sweep{i}"),
                        variable=raw["variable"],
                        start=float(raw["start"]),
                        stop=float(raw["stop"]),
                        step=None if "step" not in raw else float(raw["step"]),
                        count=None if "count" not in raw else int(raw["count"]),
                        unit=raw.get("unit", ""),
                        outputs=tuple(raw.get("outputs", SweepSpec.outputs)),
                    )
                )
            except KeyError as exc:
                raise ScenarioError(f"sweep[{i}]: missing field {exc.args[0]!r}") from None
        return out

    def sweep(self, name=None) -> SweepSpec:
        sweeps = self.sweeps()
        if not sweeps:
            raise ScenarioError(f"scenario {self.name!r} defines no sweeps")
        if name is None:
            return sweeps[0]
        for s in sweeps:
            if s.name == name:
                return s
        raise ScenarioError(f"scenario {self.name!r} has no sweep named {name!r}")

    def reference(self) -> dict:
        return dict(self.data.get("reference", {}))


def loads(text: str, source: str = "<string>") -> Scenario:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"{source}: {exc}") from None
    head = data.get("scenario", {})
    if "name" not in head:
        raise ScenarioError(f"{source}: [scenario] needs a name")
    prov = parse_provenance(text)
    data, defaults = _apply_defaults(copy.deepcopy(data), prov)
    return Scenario(str(head["name"]), int(head.get("version", 1)), data, prov, tuple(defaults), source)


def load(path) -> Scenario:
    path = Path(path)
    return loads(path.read_text(), str(path))


def bundled(name: str) -> Scenario:
    """Load one of the scenario files shipped with the package (e.g. 'paper-fig5')."""
    fname = name if name.endswith(".toml") else f"{name}.toml"
    res = resources.files("eoconv") / "data" / fname
    if not res.is_file():
        raise ScenarioError(f"no bundled scenario {name!r}")
    return loads(res.read_text(), f"bundled:{fname}")


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("eoconv") / "data" / name))


def dbm_to_watt(p_dbm):
    return 1e-3 * 10.0 ** (p_dbm / 10.0)


def watt_to_dbm(p_w):
    return 10.0 * math.log10(p_w / 1e-3)


_SB_DEFAULTS = ("gamma_hz", "gamma_prime_hz", "n")


def _apply_defaults(data: dict, prov: dict):
    defaults = []

    def default(section, key, value, why):
        sec = data.setdefault(section, {})
        if key not in sec:
            sec[key] = value
            prov[f"{section}.{key}"] = "assumed"
            defaults.append(f"{section}.{key}")
            log.info("scenario default %s.%s = %r (%s)", section, key, value, why)

    pump = data.get("pump", {})
    for sb in ("sideband_plus", "sideband_minus"):
        for key in _SB_DEFAULTS:
            if key in pump:
                default(sb, key, pump[key], "copied from pump")
    default("pump", "detuning_hz", 0.0, "pump on resonance")
    default("pump", "mode_matching", 1.0, "power is the coupled power")
    default("microwave", "detuning_hz", 0.0, "drive on resonance")
    default("microwave", "m", 1, "co-propagating m=1 mode")
    default("coupling", "air_gap_m", 0.0, "no air gap")
    return data, defaults


# -- building core objects ------------------------------------------------------


def _get(sec: dict, key: str, where: str):
    try:
        return sec[key]
    except KeyError:
        raise ScenarioError(f"[{where}] missing required field {key!r}") from None


def power_w(sec: dict, base: str, where: str) -> float:
    if f"{base}_w" in sec and f"{base}_dbm" in sec:
        raise ScenarioError(f"[{where}] give {base}_w or {base}_dbm, not both")
    if f"{base}_w" in sec:
        return float(sec[f"{base}_w"])
    if f"{base}_dbm" in sec:
        return dbm_to_watt(float(sec[f"{base}_dbm"]))
    raise ScenarioError(f"[{where}] missing {base}_w or {base}_dbm")


def build_ladder(sc: Scenario) -> Optional[ModeLadder]:
    lad = sc.section("ladder")
    if not lad:
        return None
    m0 = int(_get(lad, "m_center", "ladder"))
    pol = lad.get("polarization", "TE")
    entries = []
    for i, raw in enumerate(lad.get("mode", [])):
        where = f"ladder.mode[{i}]"
        t_ref = float(raw.get("t_ref_c", lad.get("t_ref_c", 25.0)))
        bare = BareMode(float(_get(raw, "nu_ref_hz", where)), float(_get(raw, "slope_hz_per_k", where)), pol, t_ref)
        if "kappa_hz" in raw:
            partner_pol = raw.get("partner_polarization", "TM" if pol == "TE" else "TE")
            partner = BareMode(
                float(_get(raw, "partner_nu_ref_hz", where)),
                float(_get(raw, "partner_slope_hz_per_k", where)),
                partner_pol,
                t_ref,
            )
            model = CrossingModel(bare, partner, float(raw["kappa_hz"]))
        else:
            model = bare
        entries.append((m0 + int(_get(raw, "offset", where)), model))
    try:
        return ModeLadder(tuple(entries), pol)
    except EOConvError as exc:
        raise ScenarioError(f"[ladder] {exc}") from None


def material(sc: Scenario) -> MaterialEO:
    mat = sc.section("material")
    kwargs = {}
    for key in ("r33", "n_opt", "eps_r_mw", "n_mw"):
        if key in mat:
            kwargs[key] = float(mat[key])
    return MaterialEO(**kwargs)


def temperature(sc: Scenario) -> Optional[float]:
    lad = sc.section("ladder")
    return None if "temperature_c" not in lad else float(lad["temperature_c"])


def build_system(sc: Scenario, **overrides) -> ConverterSystem:
    """ConverterSystem at the scenario working point.

    ``overrides`` (SI/Hz, already converted from dBm): temperature_c,
    microwave_frequency_hz, microwave_power_w, pump_detuning_hz,
    pump_power_w.
    """
    try:
        return _build_system(sc, **overrides)
    except ScenarioError:
        raise
    except EOConvError as exc:
        raise ScenarioError(f"scenario {sc.name!r}: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"scenario {sc.name!r}: {exc}") from None


def _build_system(sc, temperature_c=None, microwave_frequency_hz=None, microwave_power_w=None,
                  pump_detuning_hz=None, pump_power_w=None) -> ConverterSystem:
    pump_s, mw_s, cpl = sc.section("pump"), sc.section("microwave"), sc.section("coupling")
    sp_s, sm_s = sc.section("sideband_plus"), sc.section("sideband_minus")
    mat = material(sc)
    n_opt = float(pump_s.get("n", mat.n_opt))
    m_p = int(_get(pump_s, "m", "pump"))
    m_mw = int(mw_s.get("m", 1))

    ladder = build_ladder(sc)
    if ladder is not None:
        T = temperature_c if temperature_c is not None else temperature(sc)
        if T is None:
            raise ScenarioError("[ladder] needs temperature_c")
        m0 = int(sc.section("ladder")["m_center"])
        nu_p = float(ladder.frequency(m0, T))
        nu_plus = float(ladder.frequency(m0 + 1, T))
        nu_minus = float(ladder.frequency(m0 - 1, T))
    else:
        if temperature_c is not None:
            raise ScenarioError("temperature sweep needs a [ladder] section")
        nu_p = float(_get(pump_s, "frequency_hz", "pump"))
        nu_plus = _sideband_frequency(sp_s, nu_p, +1, "sideband_plus")
        nu_minus = _sideband_frequency(sm_s, nu_p, -1, "sideband_minus")

    def optical(freq, sec, m, where):
        return OpticalMode.from_hz(
            freq, float(_get(sec, "gamma_hz", where)), float(_get(sec, "gamma_prime_hz", where)), m,
            n=float(sec.get("n", n_opt)), polarization=sec.get("polarization", pump_s.get("polarization", "TE")),
        )

    pump = optical(nu_p, pump_s, m_p, "pump")
    sb_plus = optical(nu_plus, sp_s, m_p + m_mw, "sideband_plus")
    sb_minus = optical(nu_minus, sm_s, m_p - m_mw, "sideband_minus")
    mw = MicrowaveMode.from_hz(
        float(_get(mw_s, "frequency_hz", "microwave")),
        float(_get(mw_s, "gamma_hz", "microwave")),
        float(_get(mw_s, "gamma_prime_hz", "microwave")),
        m_mw=m_mw,
        n_mw=mat.n_mw,
    )

    g_hz = float(_get(cpl, "g_hz", "coupling"))
    gap = float(cpl.get("air_gap_m", 0.0))
    if gap > 0:
        g_hz *= air_gap_factor(float(_get(cpl, "thickness_m", "coupling")), gap, mat.eps_r_mw)

    det_p = pump_detuning_hz if pump_detuning_hz is not None else float(pump_s.get("detuning_hz", 0.0))
    if microwave_frequency_hz is not None:
        Omega_drive = hz_to_rad(microwave_frequency_hz)
    else:
        Omega_drive = hz_to_rad(mw.frequency_hz + float(mw_s.get("detuning_hz", 0.0)))
    return ConverterSystem(
        pump=pump,
        sb_plus=sb_plus,
        sb_minus=sb_minus,
        mw=mw,
        g=hz_to_rad(g_hz),
        P_pump=pump_power_w if pump_power_w is not None else power_w(pump_s, "power", "pump"),
        P_mw=microwave_power_w if microwave_power_w is not None else power_w(mw_s, "power", "microwave"),
        omega_drive=hz_to_rad(nu_p + det_p),
        Omega_drive=Omega_drive,
        mode_matching=float(pump_s.get("mode_matching", 1.0)),
    )


def _sideband_frequency(sec, nu_p, sign, where):
    if "frequency_hz" in sec and "fsr_hz" in sec:
        raise ScenarioError(f"[{where}] give frequency_hz or fsr_hz, not both")
    if "frequency_hz" in sec:
        return float(sec["frequency_hz"])
    return nu_p + sign * float(_get(sec, "fsr_hz", where))


def with_values(sc: Scenario, **updates) -> Scenario:
    """Copy with ``section.key`` values replaced, e.g. with_values(sc, **{"coupling.g_hz": 0.0})."""
    data = copy.deepcopy(sc.data)
    for path, value in updates.items():
        sec, _, key = path.partition(".")
        data.setdefault(sec, {})[key] = value
    return replace(sc, data=data)
