"""Flat INI-style configuration for simulation runs.

Sections ``[cart]``, ``[ballbot]``, ``[controller]``, ``[ekf]`` and
``[scenario]`` map onto the parameter dataclasses. Missing keys take the
dataclass defaults; unknown sections or keys are rejected with the offending
line number. Vectors are comma separated; ``Q``/``R`` take four row-major
values. Scenario ``commands`` are ``t v omega`` triples and ``disturbances``
are ``t duration fx fy tz target`` records, both separated by ``;``.
"""

from __future__ import annotations

import configparser
import dataclasses
import json
import re
from dataclasses import dataclass, field

from .dynamics import CartParams
from .errors import ConfigError
from .estimation import NoiseConfig
from .pusher import BallbotParams
from .simulation import ArmModel, CommandProfile, ControllerConfig, Disturbance, Scenario

SECTIONS = ("cart", "ballbot", "controller", "ekf", "scenario")
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass(frozen=True)
class SimConfig:
    cart: CartParams = field(default_factory=CartParams)
    ballbot: BallbotParams = field(default_factory=BallbotParams)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    ekf: NoiseConfig = field(default_factory=NoiseConfig)
    scenario: Scenario = field(default_factory=Scenario)


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


def _floats(text):
    return tuple(float(x) for x in text.replace(",", " ").split())


def _bool(text):
    low = text.strip().lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise ValueError(f"not a boolean: {text!r}")


class _FieldError(ValueError):
    def __init__(self, key, exc):
        super().__init__(f"{key}: {exc}")
        self.key = key


def _convert(default, text):
    if isinstance(default, bool):
        return _bool(text)
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    if isinstance(default, str):
        return text.strip()
    if isinstance(default, tuple):
        return _floats(text)
    raise TypeError(f"unsupported field type {type(default).__name__}")


def _matrix(vals):
    if len(vals) != 4:
        raise ValueError("matrix needs 4 values")
    return ((vals[0], vals[1]), (vals[2], vals[3]))


def _parse_commands(text):
    out = []
    for chunk in filter(None, (c.strip() for c in text.split(";"))):
        vals = _floats(chunk)
        if len(vals) != 3:
            raise ValueError(f"command {chunk!r} needs 't v omega'")
        out.append(vals)
    return tuple(out)


def _parse_disturbances(text):
    out = []
    for chunk in filter(None, (c.strip() for c in text.split(";"))):
        parts = chunk.replace(",", " ").split()
        if len(parts) != 6:
            raise ValueError(f"disturbance {chunk!r} needs 't duration fx fy tz target'")
        t, dur, fx, fy, tz = (float(p) for p in parts[:5])
        out.append(Disturbance(t, dur, fx, fy, tz, parts[5]))
    return tuple(out)


def _locate(lines, section, key=None):
    """1-based line of ``[section]`` or of ``key`` within it."""
    current = None
    for i, raw in enumerate(lines, 1):
        s = raw.strip()
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return i
            continue
        if key is not None and current == section and re.match(rf"{re.escape(key)}\s*[=:]", s):
            return i
    return None


def _simple_fields(cls, exclude=()):
    return {f.name: f for f in dataclasses.fields(cls) if f.name not in exclude}


def _defaults(cls):
    inst = cls()
    return {f.name: getattr(inst, f.name) for f in dataclasses.fields(cls)}


_ARM_KEYS = {"arm_K_d": "K_d", "arm_B_d": "B_d", "arm_M_d": "M_d"}
_SCENARIO_KEYS = {"commands", "v_sine", "w_sine", "accel_limit", "disturbances"}


def _section_keys(name):
    if name == "cart":
        return set(_simple_fields(CartParams))
    if name == "ballbot":
        return set(_simple_fields(BallbotParams))
    if name == "controller":
        return set(_simple_fields(ControllerConfig, ("arm",))) | set(_ARM_KEYS)
    if name == "ekf":
        return set(_simple_fields(NoiseConfig))
    return set(_simple_fields(Scenario, ("commands", "disturbances"))) | _SCENARIO_KEYS


def _build(name, items):
    try:
        return _build_section(name, items)
    except _FieldError:
        raise
    except (ValueError, TypeError) as exc:
        # constructor validation; attribute to a key named in the message
        key = next((k for k in sorted(items, key=len, reverse=True) if re.search(rf"\b{re.escape(k)}\b", str(exc))), None)
        if key is None:
            raise
        raise _FieldError(key, exc) from None


def _field(key, fn, *args):
    try:
        return fn(*args)
    except (ValueError, TypeError) as exc:
        raise _FieldError(key, exc) from None


def _build_section(name, items):
    if name in ("cart", "ekf"):
        cls = CartParams if name == "cart" else NoiseConfig
        d = _defaults(cls)
        return cls(**{k: _field(k, _convert, d[k], v) for k, v in items.items()})
    if name == "ballbot":
        d = _defaults(BallbotParams)
        kw = {}
        for k, v in items.items():
            kw[k] = _field(k, lambda x: _matrix(_floats(x)), v) if k in ("Q", "R") else _field(k, _convert, d[k], v)
        return BallbotParams(**kw)
    if name == "controller":
        d = _defaults(ControllerConfig)
        arm_d = _defaults(ArmModel)
        kw, arm = {}, {}
        for k, v in items.items():
            if k in _ARM_KEYS:
                arm[_ARM_KEYS[k]] = _field(k, _convert, arm_d[_ARM_KEYS[k]], v)
            else:
                kw[k] = _field(k, _convert, d[k], v)
        return ControllerConfig(arm=ArmModel(**arm), **kw)
    d = _defaults(Scenario)
    kw, prof = {}, {}
    for k, v in items.items():
        if k == "commands":
            prof["steps"] = _field(k, _parse_commands, v)
        elif k in ("v_sine", "w_sine", "accel_limit"):
            prof[k] = _field(k, _floats, v)
        elif k == "disturbances":
            kw[k] = _field(k, _parse_disturbances, v)
        else:
            kw[k] = _field(k, _convert, d[k], v)
    return Scenario(commands=CommandProfile(**prof), **kw)


def loads(text):
    """Parse configuration text into a :class:`SimConfig`."""
    lines = text.splitlines()
    parser = configparser.ConfigParser(interpolation=None, strict=True)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        msg = exc.message if hasattr(exc, "message") else str(exc)
        raise ConfigError(" ".join(msg.split()), line) from None
    parts = {}
    for sec in parser.sections():
        if sec not in SECTIONS:
            raise ConfigError(f"unknown section [{sec}]", _locate(lines, sec))
        allowed = _section_keys(sec)
        items = dict(parser.items(sec))
        for key in items:
            if key not in allowed:
                raise ConfigError(f"unknown key {key!r} in [{sec}]", _locate(lines, sec, key))
        try:
            parts[sec] = _build(sec, items)
        except _FieldError as exc:
            raise ConfigError(f"[{sec}] {exc}", _locate(lines, sec, exc.key)) from None
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"[{sec}] {exc}", _locate(lines, sec)) from None
    return SimConfig(**parts)


def load(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def _section_items(name, obj):
    if name == "ballbot":
        out = {}
        for f in dataclasses.fields(obj):
            v = getattr(obj, f.name)
            out[f.name] = _fmt(tuple(x for row in v for x in row)) if f.name in ("Q", "R") else _fmt(v)
        return out
    if name == "controller":
        out = {f.name: _fmt(getattr(obj, f.name)) for f in dataclasses.fields(obj) if f.name != "arm"}
        for key, attr in _ARM_KEYS.items():
            out[key] = _fmt(getattr(obj.arm, attr))
        return out
    if name == "scenario":
        out = {
            f.name: _fmt(getattr(obj, f.name))
            for f in dataclasses.fields(obj)
            if f.name not in ("commands", "disturbances")
        }
        prof = obj.commands
        out["commands"] = "; ".join(_fmt(s).replace(",", "") for s in prof.steps)
        out["v_sine"] = _fmt(prof.v_sine)
        out["w_sine"] = _fmt(prof.w_sine)
        out["accel_limit"] = _fmt(prof.accel_limit)
        out["disturbances"] = "; ".join(
            f"{_fmt(d.t)} {_fmt(d.duration)} {_fmt(d.fx)} {_fmt(d.fy)} {_fmt(d.tz)} {d.target}"
            for d in obj.disturbances
        )
        return out
    return {f.name: _fmt(getattr(obj, f.name)) for f in dataclasses.fields(obj)}


def dumps(cfg):
    """Serialise a :class:`SimConfig`; ``loads(dumps(cfg)) == cfg``."""
    chunks = []
    for name in SECTIONS:
        chunks.append(f"[{name}]")
        for k, v in _section_items(name, getattr(cfg, name)).items():
            chunks.append(f"{k} = {v}")
        chunks.append("")
    return "\n".join(chunks)


def to_dict(cfg):
    return dataclasses.asdict(cfg)


def to_json(cfg):
    return json.dumps(to_dict(cfg), indent=2, sort_keys=True)
