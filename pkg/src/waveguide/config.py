"""Run configuration: a flat INI file with one section per concern.

Grammar (every key optional; defaults below)::

    [base]        a, b (floats), bc = neumann | dirichlet
    [modes]       J (int)
    [grid]        dr (float), y_points (int, 0 = automatic)
    [time]        T, cfl, output_every (floats)
    [nonlinearity]
                  preset = zero | john | null_form | semilinear_mixed |
                           quasi_x | quasi_dt_dtdy | quasi_dt_dyy
                  scale (float)
                  B = j,k,l:value; ...   (explicit terms, added to the preset)
                  R = l,m:value; ...
    [data]        profile = ball | shell | outgoing_shell
                  eps, B, width (floats), m (int)
                  f_modes, g_modes = j:amplitude, ...
    [experiment]  window = lo, hi            decay fit window (decay runs to hi)
                  eps_list = e1, e2, ...     lifespan sweep amplitudes
                  resolutions = dr1, dr2     lifespan refinement pair
                  theta, rtol, T_budget      blowup threshold, confirmation
                                             tolerance, time budget
                  r2_min, kappa_tol          lifespan fit acceptance
                  verify_t, corpus_size      inequality suite time; 0 runs
                                             the whole corpus, n a seeded
                                             sample of n fields
                  ratio_max, drift_max       inequality ratio bound and
                                             refinement drift bound
                  energy_drift_max, commutation_tol
                                             linear-run checks in evolve
                  k_max, max_len             Picard iterates, word length
                  contraction_max, agreement_max
                                             Picard acceptance
                  compat_sets (int), regimes = yes | no
    [output]      directory (path), seed (int), plots = yes | no

Values are validated before any run starts.  The raw text is kept and
echoed into every artifact together with its sha256 hash.
"""

from __future__ import annotations

import configparser
import hashlib
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .evolution import PRESETS, InitialData, Nonlinearity, preset
from .spectral import BC, BaseInterval, ModeSpectrum, build_spectrum

DEFAULTS = {
    "base": {"a": "0", "b": repr(math.pi), "bc": "neumann"},
    "modes": {"J": "4"},
    "grid": {"dr": "0.1", "y_points": "0"},
    "time": {"T": "20", "cfl": "0.5", "output_every": "0.5"},
    "nonlinearity": {"preset": "zero", "scale": "1", "B": "", "R": ""},
    "data": {"profile": "ball", "eps": "1", "B": "2", "width": "1", "m": "6", "f_modes": "1:1", "g_modes": ""},
    "experiment": {
        "window": "20, 200",
        "eps_list": "0.5, 0.38, 0.28, 0.21, 0.16",
        "resolutions": "0.1, 0.05",
        "theta": "10",
        "rtol": "0.01",
        "T_budget": "300",
        "r2_min": "0.98",
        "kappa_tol": "0.15",
        "verify_t": "2",
        "corpus_size": "0",
        "ratio_max": "50",
        "drift_max": "0.05",
        "energy_drift_max": "1e-3",
        "commutation_tol": "1e-6",
        "k_max": "6",
        "max_len": "2",
        "contraction_max": "0.6",
        "agreement_max": "5",
        "compat_sets": "10000",
        "regimes": "no",
    },
    "output": {"directory": "waveguide-out", "seed": "0", "plots": "yes"},
}


class ConfigError(ValueError):
    """A configuration value failed to parse or validate."""

    def __init__(self, message: str, section: str | None = None, key: str | None = None, line: int | None = None):
        self.section, self.key, self.line = section, key, line
        parts = []
        if line:
            parts.append(f"line {line}")
        if section:
            parts.append(f"[{section}]" + (f" {key}" if key else ""))
        super().__init__(": ".join(parts + [message]))


@dataclass
class RunConfig:
    base: BaseInterval
    J: int
    dr: float
    y_points: int
    T: float
    cfl: float
    output_every: float
    nonlinearity: Nonlinearity
    data: InitialData
    experiment: dict
    output_dir: str
    seed: int
    plots: bool
    text: str = ""
    overrides: list = field(default_factory=list)

    @property
    def spectrum(self) -> ModeSpectrum:
        return build_spectrum(self.base, self.J)

    @property
    def hash(self) -> str:
        """sha256 of the file text followed by the overrides, one per line."""
        blob = self.text + "".join(f"\n{o}" for o in self.overrides)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def echo(self) -> dict:
        return {"text": self.text, "overrides": list(self.overrides), "sha256": self.hash}


def _line_of(text: str, section: str, key: str | None) -> int | None:
    current = None
    for n, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        m = re.match(r"\[(.+)\]$", s)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return n
            continue
        if current == section and key is not None and re.match(rf"{re.escape(key)}\s*[=:]", s, re.IGNORECASE):
            return n
    return None


def _float_list(s: str) -> list:
    return [float(x) for x in s.replace(";", ",").split(",") if x.strip()]


def _modes(s: str) -> dict:
    out = {}
    for item in s.split(","):
        item = item.strip()
        if not item:
            continue
        j, amp = item.split(":")
        out[int(j)] = float(amp)
    return out


def _terms(s: str, arity: int) -> list:
    out = []
    for item in s.split(";"):
        item = item.strip()
        if not item:
            continue
        idx, val = item.split(":")
        ix = tuple(int(i) for i in idx.split(","))
        if len(ix) != arity or not all(0 <= i <= 4 for i in ix):
            raise ValueError(f"term {item!r} needs {arity} indices in 0..4")
        out.append((ix, float(val)))
    return out


def _build_nonlinearity(sec) -> Nonlinearity:
    name = sec["preset"].strip()
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    nl = preset(name, float(sec["scale"]))
    extra_B, extra_R = _terms(sec["B"], 3), _terms(sec["R"], 2)
    if extra_B or extra_R:
        B = np.array(nl.raw_B)
        R = np.array(nl.R)
        for ix, v in extra_B:
            B[ix] += v
        for ix, v in extra_R:
            R[ix] += v
        nl = Nonlinearity(B, R, name=f"{name}+explicit")
    return nl


def _build_data(sec) -> InitialData:
    profile = sec["profile"].strip()
    if profile not in ("ball", "shell", "outgoing_shell"):
        raise ValueError(f"profile must be ball, shell or outgoing_shell, got {profile!r}")
    kw = dict(eps=float(sec["eps"]), B=float(sec["B"]), m=int(sec["m"]), f_modes=_modes(sec["f_modes"]),
              g_modes=_modes(sec["g_modes"]))
    if profile != "ball":
        kw["width"] = float(sec["width"])
    if profile == "outgoing_shell":
        kw["outgoing"] = True
    return InitialData(**kw)


def parse_config(text: str = "", overrides=()) -> RunConfig:
    """Parse INI ``text`` with ``section.key=value`` overrides on top."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp.read_dict(DEFAULTS)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        if line is None and getattr(exc, "errors", None):
            line = exc.errors[0][0]
        raise ConfigError(f"cannot parse configuration: {exc}", line=line) from exc
    for sec in cp.sections():
        if sec not in DEFAULTS:
            raise ConfigError("unknown section", sec, line=_line_of(text, sec, None))
        for key in cp[sec]:
            if key not in DEFAULTS[sec]:
                raise ConfigError("unknown key", sec, key, _line_of(text, sec, key))
    for o in overrides:
        m = re.match(r"(\w+)\.(\w+)=(.*)$", o)
        if not m or m.group(1) not in DEFAULTS or m.group(2) not in DEFAULTS[m.group(1)]:
            raise ConfigError(f"bad override {o!r}; use section.key=value with a known key")
        cp[m.group(1)][m.group(2)] = m.group(3)

    def get(section, key, conv, check=None, msg=""):
        raw = cp[section][key]
        try:
            val = conv(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid value {raw!r} ({exc})", section, key, _line_of(text, section, key)) from exc
        if check is not None and not check(val):
            raise ConfigError(f"invalid value {raw!r}: {msg}", section, key, _line_of(text, section, key))
        return val

    def yes(s):
        s = s.strip().lower()
        if s not in ("yes", "no", "true", "false", "1", "0", "on", "off"):
            raise ValueError("expected yes or no")
        return s in ("yes", "true", "1", "on")

    a = get("base", "a", float)
    b = get("base", "b", float, lambda v: v > a, "need b > a")
    bc = get("base", "bc", lambda s: BC(s.strip().lower()))
    exp = {
        "window": get("experiment", "window", _float_list, lambda v: len(v) == 2 and 0 < v[0] < v[1],
                      "need two increasing positive times"),
        "eps_list": get("experiment", "eps_list", _float_list, lambda v: len(v) >= 1 and min(v) > 0,
                        "need positive values"),
        "resolutions": get("experiment", "resolutions", _float_list, lambda v: len(v) == 2 and min(v) > 0,
                           "need two positive grid spacings"),
        "theta": get("experiment", "theta", float, lambda v: v > 1, "need theta > 1"),
        "rtol": get("experiment", "rtol", float, lambda v: v >= 0, "need rtol >= 0"),
        "ratio_max": get("experiment", "ratio_max", float, lambda v: v > 0, "need a positive bound"),
        "drift_max": get("experiment", "drift_max", float, lambda v: v > 0, "need a positive bound"),
        "k_max": get("experiment", "k_max", int, lambda v: v >= 2, "need k_max >= 2"),
        "max_len": get("experiment", "max_len", int, lambda v: 0 <= v <= 2, "word length must be 0..2"),
        "T_budget": get("experiment", "T_budget", float, lambda v: v > 0, "need a positive time"),
        "compat_sets": get("experiment", "compat_sets", int, lambda v: v > 0, "need a positive count"),
        "r2_min": get("experiment", "r2_min", float, lambda v: 0 < v <= 1, "need 0 < r2_min <= 1"),
        "kappa_tol": get("experiment", "kappa_tol", float, lambda v: v > 0, "need a positive tolerance"),
        "verify_t": get("experiment", "verify_t", float, lambda v: v >= 0, "need t >= 0"),
        "corpus_size": get("experiment", "corpus_size", int, lambda v: v >= 0, "need a count >= 0"),
        "energy_drift_max": get("experiment", "energy_drift_max", float, lambda v: v > 0, "need a positive bound"),
        "commutation_tol": get("experiment", "commutation_tol", float, lambda v: v > 0, "need a positive bound"),
        "contraction_max": get("experiment", "contraction_max", float, lambda v: 0 < v < 1, "need 0 < value < 1"),
        "agreement_max": get("experiment", "agreement_max", float, lambda v: v > 0, "need a positive bound"),
        "regimes": get("experiment", "regimes", yes),
    }
    J = get("modes", "J", int, lambda v: v >= 1, "need J >= 1")
    try:
        base = BaseInterval(a, b, bc)
        nl = _build_nonlinearity(cp["nonlinearity"])
    except ValueError as exc:
        raise ConfigError(str(exc), "nonlinearity", line=_line_of(text, "nonlinearity", None)) from exc
    try:
        data = _build_data(cp["data"])
    except ValueError as exc:
        raise ConfigError(str(exc), "data", line=_line_of(text, "data", None)) from exc
    if data.max_mode() > J:
        raise ConfigError(f"data uses mode {data.max_mode()} but only J={J} modes are retained", "data",
                          line=_line_of(text, "data", None))
    return RunConfig(
        base=base,
        J=J,
        dr=get("grid", "dr", float, lambda v: v > 0, "need dr > 0"),
        y_points=get("grid", "y_points", int, lambda v: v >= 0, "need y_points >= 0"),
        T=get("time", "T", float, lambda v: v > 0, "need T > 0"),
        cfl=get("time", "cfl", float, lambda v: 0 < v <= 0.7, "need 0 < cfl <= 0.7"),
        output_every=get("time", "output_every", float, lambda v: v > 0, "need a positive interval"),
        nonlinearity=nl,
        data=data,
        experiment=exp,
        output_dir=cp["output"]["directory"],
        seed=get("output", "seed", int),
        plots=get("output", "plots", yes),
        text=text,
        overrides=list(overrides),
    )


def load_config(path, overrides=()) -> RunConfig:
    if path is None:
        return parse_config("", overrides)
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), overrides)
