"""Experiment configuration and its TOML file format.

File grammar (all numbers SI)::

    [run]         T_s, horizon, seed, measurement_noise, disturbance,
                  true_params, output
    [vehicle]     m_O, I_O[3], r_O[3], prop_pos[8][3], spin[8], b, k_tau,
                  g, delta_L, varsigma
    [load]        m_L, r_L                      (true load of the plant)
    [initial]     q0[6], qdot0[6]
    [controller]  allocation_pairs[4][2] (1-based propeller indices),
                  yaw_in_allocation
    [controller.translation] / [controller.attitude]
                  Y0[3], Y1[3], Y2[3], Y3[3]    (diagonals)
    [jukf]        x0[12], d0[2], p0[2], process_var[16], meas_var[9],
                  x0_var[12], d0_var[2], p0_var[2]
    [reference]   center[3], cos_amplitude[3], sin_amplitude[3], period,
                  psi
    [[disturbance]]  channel (x|y|z|phi|theta|psi), magnitude, t_start, t_end

Missing keys take the defaults of :func:`default_config`.
"""
import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from .jukf import NoiseConfig
from .multibody import LoadParams, VehicleParams
from .winf_control import (ATTITUDE_WEIGHTS, SPIN_MATCHED_PAIRS,
                           TRANSLATION_WEIGHTS, WeightSet)

CHANNELS = ("x", "y", "z", "phi", "theta", "psi")


class ConfigError(ValueError):
    """Malformed configuration; the message names the offending field."""


@dataclass(frozen=True)
class ReferenceTrajectory:
    """``center + cos_amplitude cos(w t) + sin_amplitude sin(w t)``, ``w = 2 pi / period``."""

    center: tuple = (0.0, 0.0, 9.0)
    cos_amplitude: tuple = (2.0, 0.0, -8.0)
    sin_amplitude: tuple = (0.0, 2.0, 0.0)
    period: float = 40.0
    psi: float = 0.0

    def __post_init__(self):
        if self.period <= 0:
            raise ConfigError("reference.period must be positive")

    def evaluate(self, t):
        """Position, velocity and acceleration at time ``t``."""
        w = 2.0 * np.pi / self.period
        c, s = np.cos(w * t), np.sin(w * t)
        a, b = np.asarray(self.cos_amplitude), np.asarray(self.sin_amplitude)
        pos = np.asarray(self.center) + a * c + b * s
        vel = w * (-a * s + b * c)
        acc = -w * w * (a * c + b * s)
        return pos, vel, acc


@dataclass(frozen=True)
class Disturbance:
    channel: str = "x"
    magnitude: float = 30.0
    t_start: float = 20.0
    t_end: float = 30.0

    def __post_init__(self):
        if self.channel not in CHANNELS:
            raise ConfigError(f"disturbance.channel must be one of {CHANNELS}, got {self.channel!r}")
        if self.t_end < self.t_start:
            raise ConfigError("disturbance.t_end must not precede t_start")


def disturbance_at(disturbances, t):
    """Generalized disturbance ``zeta(t)`` from the active windows (inclusive)."""
    zeta = np.zeros(6)
    for dist in disturbances:
        if dist.t_start <= t <= dist.t_end:
            zeta[CHANNELS.index(dist.channel)] += dist.magnitude
    return zeta


@dataclass
class ExperimentConfig:
    T_s: float = 0.01
    horizon: float = 80.0
    seed: int = 2023
    measurement_noise: bool = True
    disturbance_enabled: bool = True
    true_params: bool = False
    output: str = "trajectory.csv"
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    load: LoadParams = field(default_factory=lambda: LoadParams(100.0, 0.5))
    q0: tuple = (1.9, 0.0, 0.8, 0.0, 0.0, np.pi / 6)
    qdot0: tuple = (0.0,) * 6
    translation_weights: WeightSet = TRANSLATION_WEIGHTS
    attitude_weights: WeightSet = ATTITUDE_WEIGHTS
    allocation_pairs: tuple = SPIN_MATCHED_PAIRS
    yaw_in_allocation: bool = False
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    x0: tuple = (2.4, 0.5, -0.2, np.pi / 6, np.pi / 6, 0.0) + (0.0,) * 6
    d0: tuple = (0.0, 0.0)
    p0: tuple = (50.0, 0.75)
    reference: ReferenceTrajectory = field(default_factory=ReferenceTrajectory)
    disturbances: tuple = (Disturbance(),)

    def __post_init__(self):
        if not self.T_s > 0:
            raise ConfigError("run.T_s must be positive")
        if self.horizon < 0:
            raise ConfigError("run.horizon must be nonnegative")
        if self.seed < 0:
            raise ConfigError("run.seed must be an unsigned integer")

    @property
    def n_steps(self):
        return int(round(self.horizon / self.T_s))

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        """Nested plain-Python representation matching the file grammar."""
        v, n = self.vehicle, self.noise

        def weights(w):
            return {k: [float(x) for x in np.diag(m)] for k, m in zip(("Y0", "Y1", "Y2", "Y3"), w.matrices())}

        def flt(xs):
            return [float(x) for x in np.ravel(xs)]

        return {
            "run": {"T_s": float(self.T_s), "horizon": float(self.horizon), "seed": int(self.seed),
                    "measurement_noise": bool(self.measurement_noise),
                    "disturbance": bool(self.disturbance_enabled),
                    "true_params": bool(self.true_params), "output": str(self.output)},
            "vehicle": {"m_O": float(v.m_O), "I_O": flt(np.diag(v.inertia)), "r_O": flt(v.r_O),
                        "prop_pos": [flt(p) for p in v.prop_pos], "spin": [int(s) for s in v.spin],
                        "b": float(v.b), "k_tau": float(v.k_tau), "g": float(v.g),
                        "delta_L": float(v.delta_L), "varsigma": int(v.varsigma)},
            "load": {"m_L": float(self.load.m_L), "r_L": float(self.load.r_L)},
            "initial": {"q0": flt(self.q0), "qdot0": flt(self.qdot0)},
            "controller": {
                "allocation_pairs": [[int(i) + 1, int(j) + 1] for i, j in self.allocation_pairs],
                "yaw_in_allocation": bool(self.yaw_in_allocation),
                "translation": weights(self.translation_weights),
                "attitude": weights(self.attitude_weights)},
            "jukf": {"x0": flt(self.x0), "d0": flt(self.d0), "p0": flt(self.p0),
                     "process_var": flt(n.process_var), "meas_var": flt(n.meas_var),
                     "x0_var": flt(n.x0_var), "d0_var": flt(n.d0_var), "p0_var": flt(n.p0_var)},
            "reference": {"center": flt(self.reference.center),
                          "cos_amplitude": flt(self.reference.cos_amplitude),
                          "sin_amplitude": flt(self.reference.sin_amplitude),
                          "period": float(self.reference.period), "psi": float(self.reference.psi)},
            "disturbance": [{"channel": d.channel, "magnitude": float(d.magnitude),
                             "t_start": float(d.t_start), "t_end": float(d.t_end)}
                            for d in self.disturbances],
        }


def default_config():
    return ExperimentConfig()


def _num(table, key, path, default, kind=float):
    if key not in table:
        return default
    val = table[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{path}.{key}: expected a number, got {val!r}")
    if kind is int and (not isinstance(val, int) and not float(val).is_integer()):
        raise ConfigError(f"{path}.{key}: expected an integer, got {val!r}")
    return kind(val)


def _bool(table, key, path, default):
    if key not in table:
        return default
    val = table[key]
    if not isinstance(val, bool):
        raise ConfigError(f"{path}.{key}: expected true/false, got {val!r}")
    return val


def _vec(table, key, path, default, n=None):
    if key not in table:
        return default
    try:
        arr = np.asarray(table[key], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}.{key}: expected numeric array ({exc})") from None
    if n is not None and arr.shape != (n,):
        raise ConfigError(f"{path}.{key}: expected {n} numbers, got shape {arr.shape}")
    return tuple(float(x) for x in arr)


def _weights(table, path, default):
    d = {k: tuple(np.diag(m)) for k, m in zip(("Y0", "Y1", "Y2", "Y3"), default.matrices())}
    vals = {k: _vec(table, k, path, d[k], 3) for k in d}
    try:
        return WeightSet(**vals)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def config_from_dict(data):
    """Build an :class:`ExperimentConfig` from a parsed TOML mapping."""
    base = default_config()
    known = {"run", "vehicle", "load", "initial", "controller", "jukf", "reference", "disturbance"}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown section(s): {sorted(extra)}")
    run = data.get("run", {})
    veh_t = data.get("vehicle", {})
    dv = base.vehicle
    try:
        prop_pos = dv.prop_pos
        if "prop_pos" in veh_t:
            arr = np.asarray(veh_t["prop_pos"], dtype=float)
            if arr.shape != (8, 3):
                raise ConfigError(f"vehicle.prop_pos: expected 8x3 array, got shape {arr.shape}")
            prop_pos = tuple(tuple(float(x) for x in row) for row in arr)
        spin = tuple(int(s) for s in _vec(veh_t, "spin", "vehicle", dv.spin, 8))
        vehicle = VehicleParams(
            m_O=_num(veh_t, "m_O", "vehicle", dv.m_O),
            I_O=_vec(veh_t, "I_O", "vehicle", dv.I_O, 3),
            r_O=_vec(veh_t, "r_O", "vehicle", dv.r_O, 3),
            prop_pos=prop_pos, spin=spin,
            b=_num(veh_t, "b", "vehicle", dv.b),
            k_tau=_num(veh_t, "k_tau", "vehicle", dv.k_tau),
            g=_num(veh_t, "g", "vehicle", dv.g),
            delta_L=_num(veh_t, "delta_L", "vehicle", dv.delta_L),
            varsigma=_num(veh_t, "varsigma", "vehicle", dv.varsigma, int),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"vehicle: {exc}") from None

    load_t = data.get("load", {})
    m_L = _num(load_t, "m_L", "load", base.load.m_L)
    r_L = _num(load_t, "r_L", "load", base.load.r_L)
    if m_L < 0 or r_L < 0:
        raise ConfigError("load.m_L and load.r_L must be nonnegative")

    init = data.get("initial", {})
    ctrl = data.get("controller", {})
    pairs = base.allocation_pairs
    if "allocation_pairs" in ctrl:
        arr = np.asarray(ctrl["allocation_pairs"])
        if arr.shape != (4, 2) or not np.issubdtype(arr.dtype, np.integer) or arr.min() < 1 or arr.max() > 8:
            raise ConfigError("controller.allocation_pairs: expected four [i, j] pairs of indices 1..8")
        pairs = tuple((int(i) - 1, int(j) - 1) for i, j in arr)

    jt = data.get("jukf", {})
    n = base.noise
    try:
        noise = NoiseConfig(
            process_var=np.array(_vec(jt, "process_var", "jukf", tuple(n.process_var), 16)),
            meas_var=np.array(_vec(jt, "meas_var", "jukf", tuple(n.meas_var), 9)),
            x0_var=np.array(_vec(jt, "x0_var", "jukf", tuple(n.x0_var), 12)),
            d0_var=np.array(_vec(jt, "d0_var", "jukf", tuple(n.d0_var), 2)),
            p0_var=np.array(_vec(jt, "p0_var", "jukf", tuple(n.p0_var), 2)),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"jukf.{exc}") from None
    rt = data.get("reference", {})
    br = base.reference
    reference = ReferenceTrajectory(
        center=_vec(rt, "center", "reference", br.center, 3),
        cos_amplitude=_vec(rt, "cos_amplitude", "reference", br.cos_amplitude, 3),
        sin_amplitude=_vec(rt, "sin_amplitude", "reference", br.sin_amplitude, 3),
        period=_num(rt, "period", "reference", br.period),
        psi=_num(rt, "psi", "reference", br.psi),
    )
    disturbances = base.disturbances
    if "disturbance" in data:
        items = []
        for i, dt in enumerate(data["disturbance"]):
            path = f"disturbance[{i}]"
            if not isinstance(dt.get("channel", "x"), str):
                raise ConfigError(f"{path}.channel: expected a string")
            items.append(Disturbance(channel=dt.get("channel", "x"),
                                     magnitude=_num(dt, "magnitude", path, 30.0),
                                     t_start=_num(dt, "t_start", path, 20.0),
                                     t_end=_num(dt, "t_end", path, 30.0)))
        disturbances = tuple(items)
    output = run.get("output", base.output)
    if not isinstance(output, str):
        raise ConfigError("run.output: expected a string path")

    return ExperimentConfig(
        T_s=_num(run, "T_s", "run", base.T_s),
        horizon=_num(run, "horizon", "run", base.horizon),
        seed=_num(run, "seed", "run", base.seed, int),
        measurement_noise=_bool(run, "measurement_noise", "run", base.measurement_noise),
        disturbance_enabled=_bool(run, "disturbance", "run", base.disturbance_enabled),
        true_params=_bool(run, "true_params", "run", base.true_params),
        output=output,
        vehicle=vehicle,
        load=LoadParams(m_L, r_L),
        q0=_vec(init, "q0", "initial", base.q0, 6),
        qdot0=_vec(init, "qdot0", "initial", base.qdot0, 6),
        translation_weights=_weights(ctrl.get("translation", {}), "controller.translation",
                                     base.translation_weights),
        attitude_weights=_weights(ctrl.get("attitude", {}), "controller.attitude",
                                  base.attitude_weights),
        allocation_pairs=pairs,
        yaw_in_allocation=_bool(ctrl, "yaw_in_allocation", "controller", base.yaw_in_allocation),
        noise=noise,
        x0=_vec(jt, "x0", "jukf", base.x0, 12),
        d0=_vec(jt, "d0", "jukf", base.d0, 2),
        p0=_vec(jt, "p0", "jukf", base.p0, 2),
        reference=reference,
        disturbances=disturbances,
    )


def read_config(path):
    """Parse a TOML experiment file; errors carry the line or field."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(data)


def write_config(config, path):
    with open(path, "wb") as fh:
        tomli_w.dump(config.to_dict(), fh)


def default_config_path():
    """Path of the shipped configuration reproducing the published experiment."""
    return Path(str(resources.files("octolift") / "data" / "scenario.toml"))
