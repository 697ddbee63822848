"""Experiment configuration: defaults, validation and object construction.

A config is one YAML mapping. Unknown keys are rejected; missing keys
take the defaults below. Every validation error names the offending key.
"""

from __future__ import annotations

import copy
import os

import numpy as np
import yaml

from . import model
from .fracops import TimeGrid

KINDS = ("simulate", "reconstruct", "stability", "verify")
ORBIT_TYPES = ("zero", "linear", "sine", "sum_of_sines", "samples")

DEFAULTS = {
    "kind": "simulate",
    "alpha": 0.7,
    "domain": {
        "kind": "box",
        "lengths": [2.0],
        "diffusion": None,
        "reaction": 0.0,
        "drift": None,
        "n_modes": None,
        "xi_max": None,
        "n_freq": None,
    },
    "profile": {"delta": 0.4, "amplitude": 1.0},
    "orbit": {
        "type": "sine",
        "amplitude": [0.05],
        "frequency": [1.0],
        "velocity": None,
        "coefficients": None,
        "file": None,
        "K": None,
    },
    "observation": {"points": [[0.2]], "select": False},
    "grid": {"t_end": 1.0, "n_steps": 128, "data_refine": 4},
    "noise": {"level": 0.0, "seed": 0},
    "reconstruction": {
        "mode": "local",
        "epsilon": None,
        "newton_tol": 1e-10,
        "newton_max_iter": 50,
        "mollifier": 0,
        "subtract_stationary": True,
    },
    "stability": {
        "alphas": [0.3, 0.7, 1.0, 1.3, 1.7, 2.0],
        "n_pairs": 10,
        "epsilon": 0.05,
        "seed": 0,
    },
    "verify": {"suites": ["ml", "ml-estimate", "kernel-identity", "duhamel"]},
    "output": {"dir": "out", "figures": True},
    "determinism": True,
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


def _merge(base, user, path=""):
    out = copy.deepcopy(base)
    for key, val in user.items():
        full = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown key '{full}'")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"'{full}' must be a mapping")
            out[key] = _merge(base[key], val, full + ".")
        else:
            out[key] = val
    return out


def load(path):
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config '{path}': {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config does not parse: {exc}") from None
    return resolve(raw or {}, base_dir=os.path.dirname(os.path.abspath(path)))


def resolve(raw, base_dir="."):
    """Fill defaults and validate; returns a plain dict."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    cfg = _merge(DEFAULTS, raw)
    cfg["_base_dir"] = base_dir
    f = cfg["orbit"]["file"]
    if f is not None and not os.path.isabs(str(f)):
        cfg["orbit"]["file"] = os.path.normpath(os.path.join(base_dir, str(f)))
    validate(cfg)
    return cfg


def _num(cfg, key, lo=None, hi=None, lo_open=False, allow_none=False):
    sect, _, name = key.rpartition(".")
    node = cfg
    for part in sect.split(".") if sect else []:
        node = node[part]
    val = node[name]
    if val is None and allow_none:
        return None
    try:
        val = float(val)
    except (TypeError, ValueError):
        raise ConfigError(f"'{key}' must be a number") from None
    if not np.isfinite(val):
        raise ConfigError(f"'{key}' must be finite")
    if lo is not None and (val < lo or (lo_open and val == lo)):
        raise ConfigError(f"'{key}' must be {'>' if lo_open else '>='} {lo}")
    if hi is not None and val > hi:
        raise ConfigError(f"'{key}' must be <= {hi}")
    return val


def check_alpha(val, key="alpha"):
    try:
        a = float(val)
    except (TypeError, ValueError):
        raise ConfigError(f"'{key}' must be a number") from None
    if not 0.1 <= a <= 2.0:
        raise ConfigError("alpha out of range (0.1, 2]" + ("" if key == "alpha" else f" in '{key}'"))
    return a


def validate(cfg):
    if cfg["kind"] not in KINDS:
        raise ConfigError(f"'kind' must be one of {', '.join(KINDS)}")
    check_alpha(cfg["alpha"])
    for i, a in enumerate(cfg["stability"]["alphas"]):
        check_alpha(a, f"stability.alphas[{i}]")
    _num(cfg, "profile.delta", 0, lo_open=True)
    _num(cfg, "profile.amplitude", 0)
    _num(cfg, "grid.t_end", 0, lo_open=True)
    for key in ("grid.n_steps", "grid.data_refine"):
        v = _num(cfg, key, 1)
        if v != int(v):
            raise ConfigError(f"'{key}' must be an integer")
    if cfg["grid"]["n_steps"] < 8:
        raise ConfigError("'grid.n_steps' must be >= 8")
    _num(cfg, "noise.level", 0)
    _num(cfg, "reconstruction.newton_tol", 0, lo_open=True)
    _num(cfg, "reconstruction.epsilon", 0, lo_open=True, allow_none=True)
    _num(cfg, "stability.epsilon", 0, lo_open=True)
    if cfg["reconstruction"]["mode"] not in ("local", "global"):
        raise ConfigError("'reconstruction.mode' must be 'local' or 'global'")
    if cfg["orbit"]["type"] not in ORBIT_TYPES:
        raise ConfigError(f"'orbit.type' must be one of {', '.join(ORBIT_TYPES)}")
    if cfg["domain"]["kind"] not in ("box", "free"):
        raise ConfigError("'domain.kind' must be 'box' or 'free'")
    # build objects once so that structural errors surface as config errors
    dim = dimension(cfg)
    build_domain(cfg, dim)
    build_profile(cfg, dim)
    if cfg["kind"] in ("simulate", "reconstruct"):
        build_orbit(cfg, dim)
        observation_points(cfg, dim)
    if cfg["domain"]["kind"] == "free" and float(cfg["alpha"]) == 2.0:
        d = build_domain(cfg, dim)
        try:
            d.check_order(2.0)
        except ValueError as exc:
            raise ConfigError(f"'domain': {exc}") from None


def dimension(cfg):
    dom = cfg["domain"]
    if dom["kind"] == "box":
        return len(np.atleast_1d(dom["lengths"]))
    if dom["diffusion"] is None:
        return 1
    return np.atleast_2d(dom["diffusion"]).shape[0]


def build_domain(cfg, dim):
    dom = cfg["domain"]
    try:
        if dom["kind"] == "box":
            return model.BoxDomain(
                tuple(dom["lengths"]) if isinstance(dom["lengths"], (list, tuple)) else (dom["lengths"],),
                None if dom["diffusion"] is None else tuple(np.atleast_1d(dom["diffusion"])),
                float(dom["reaction"]),
                dom["n_modes"],
            )
        A = np.eye(dim) if dom["diffusion"] is None else np.atleast_2d(np.asarray(dom["diffusion"], dtype=float))
        return model.FreeSpace(A, dom["drift"], float(dom["reaction"]), dom["xi_max"], dom["n_freq"])
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"'domain': {exc}") from None


def build_profile(cfg, dim):
    p = cfg["profile"]
    try:
        return model.SourceProfile(float(p["delta"]), float(p["amplitude"]), dim)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"'profile': {exc}") from None


def build_grid(cfg):
    return TimeGrid(float(cfg["grid"]["t_end"]), int(cfg["grid"]["n_steps"]))


def build_orbit(cfg, dim):
    o = cfg["orbit"]
    T = float(cfg["grid"]["t_end"])
    K = None if o["K"] is None else float(o["K"])
    try:
        if o["type"] == "zero":
            return model.zero_orbit(dim, T, 1.0 if K is None else K)
        if o["type"] == "linear":
            if o["velocity"] is None:
                raise ConfigError("'orbit.velocity' is required for a linear orbit")
            return model.linear_orbit(o["velocity"], T, K)
        if o["type"] == "sine":
            amp = np.atleast_1d(np.asarray(o["amplitude"], dtype=float))
            if amp.size != dim:
                raise ConfigError(f"'orbit.amplitude' must have {dim} entries")
            return model.sine_orbit(amp, o["frequency"], T, K)
        if o["type"] == "sum_of_sines":
            if o["coefficients"] is None:
                raise ConfigError("'orbit.coefficients' is required for a sum_of_sines orbit")
            return model.sum_of_sines_orbit(o["coefficients"], T, K)
        if o["file"] is None:
            raise ConfigError("'orbit.file' is required for a sampled orbit")
        path = o["file"] if os.path.isabs(o["file"]) else os.path.join(cfg.get("_base_dir", "."), o["file"])
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        t, vals = data[:, 0], data[:, 1:]
        grid = TimeGrid(float(t[-1]), len(t) - 1)
        if not np.allclose(t, grid.nodes):
            raise ConfigError("'orbit.file' must sample a uniform grid starting at t = 0")
        return model.Orbit.from_samples(grid, vals if dim > 1 else vals[:, 0], 1.0 if K is None else K)
    except OSError as exc:
        raise ConfigError(f"'orbit.file': {exc.strerror}") from None
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"'orbit': {exc}") from None


def observation_points(cfg, dim):
    obs = cfg["observation"]
    if obs["select"]:
        g = build_profile(cfg, dim)
        orbit = build_orbit(cfg, dim)
        try:
            eps, pts, _ = model.select_observation_points(g, orbit.K, orbit.T)
        except ValueError as exc:
            raise ConfigError(f"'observation.select': {exc}") from None
        return pts, eps
    try:
        pts = np.asarray(obs["points"], dtype=float).reshape(-1, dim)
    except (ValueError, TypeError):
        raise ConfigError(f"'observation.points' must be a list of {dim}-component points") from None
    dom = build_domain(cfg, dim)
    if not np.all(dom.contains(pts)):
        raise ConfigError("'observation.points' must lie inside the domain")
    return pts, None


def dump(cfg, path):
    clean = {k: v for k, v in cfg.items() if not k.startswith("_")}
    with open(path, "w", newline="\n") as fh:
        yaml.safe_dump(_plain(clean), fh, sort_keys=True)


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj
