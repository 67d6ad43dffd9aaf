"""JSON run configuration: parsing, validation, defaults and canonical form.

A minimal configuration reproducing the reference simulation setup::

    {"epsilon": 0.01, "domain": [-1.5, 1.5],
     "kernel": {"type": "gaussian", "sigma2": 10, "normalize": true},
     "init": {"type": "cauchy_shifted", "shift": 1.0}}

Every other block (``grid``, ``stepper``, ``outputs``, ``sweep``, ``rates``)
falls back to defaults. Unknown keys are rejected.
"""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .core import Interval, Model, ModelParams, MutationKernel, PopulationState, make_model
from .errors import ConfigError, MutselError
from .profiles import cauchy_profile
from .simulator import SCHEMES, StepperConfig

DEFAULT_N = 1501
DEFAULT_T_END = 175000.0
DEFAULT_SWEEP_EPS = (0.1, 0.03, 0.01)
DEFAULT_SWEEP_TIMES = (10.0, 100.0, 1000.0, 10000.0, 100000.0, 150000.0)
DEFAULT_RATE_EPS = (1e-1, 10**-1.5, 1e-2, 10**-2.5, 1e-3)
INIT_TYPES = ("cauchy_shifted", "constant", "table")


@dataclass(frozen=True)
class InitSpec:
    type: str
    shift: Optional[float] = None
    level: Optional[float] = None
    path: Optional[str] = None


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams
    n: int = DEFAULT_N
    stepper: StepperConfig = field(default_factory=lambda: StepperConfig(t_end=DEFAULT_T_END))
    init: InitSpec = field(default_factory=lambda: InitSpec("cauchy_shifted", shift=1.0))
    outputs: str = "out"
    sweep_eps: Tuple[float, ...] = DEFAULT_SWEEP_EPS
    sweep_times: Tuple[float, ...] = DEFAULT_SWEEP_TIMES
    rate_eps: Tuple[float, ...] = DEFAULT_RATE_EPS
    base_dir: str = field(default=".", compare=False)

    def model(self) -> Model:
        return make_model(self.params, self.n)

    def with_epsilon(self, eps: float) -> "RunConfig":
        return replace(self, params=replace(self.params, epsilon=eps))

    def to_dict(self) -> Dict[str, Any]:
        k = self.params.kernel
        kernel: Dict[str, Any] = {"type": k.kind, "normalize": k.normalize}
        if k.kind == "gaussian":
            kernel["sigma2"] = k.sigma2
            if k.amplitude is not None:
                kernel["amplitude"] = k.amplitude
        elif k.kind == "tabulated":
            kernel["nodes"] = [list(row) for row in k.table]
        init: Dict[str, Any] = {"type": self.init.type}
        if self.init.type == "cauchy_shifted":
            init["shift"] = self.init.shift
        elif self.init.type == "constant":
            init["level"] = self.init.level
        else:
            init["path"] = self.init.path
        s = self.stepper
        return {
            "epsilon": self.params.epsilon,
            "domain": [self.params.interval.a, self.params.interval.b],
            "kernel": kernel,
            "grid": {"n": self.n},
            "stepper": {
                "scheme": s.scheme,
                "dt": s.dt,
                "t_end": s.t_end,
                "snapshot_times": None if s.snapshot_times is None else list(s.snapshot_times),
                "switch_time": s.switch_time,
                "late_scheme": s.late_scheme,
                "late_dt": s.late_dt,
                "record_every": s.record_every,
            },
            "init": init,
            "outputs": self.outputs,
            "sweep": {"epsilons": list(self.sweep_eps), "times": list(self.sweep_times)},
            "rates": {"epsilons": list(self.rate_eps)},
        }

    def canonical(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


# -- parsing helpers ---------------------------------------------------------

class _Reader:
    def __init__(self, data: Any, path: str):
        if not isinstance(data, dict):
            raise ConfigError(path or "<root>", "expected an object")
        self.data = data
        self.path = path
        self.seen = set()

    def _key(self, key):
        return f"{self.path}.{key}" if self.path else key

    def get(self, key, default=None, required=False):
        self.seen.add(key)
        value = self.data.get(key)
        if value is None:
            if required:
                raise ConfigError(self._key(key), "required field is missing")
            return default
        return value

    def number(self, key, default=None, required=False) -> Optional[float]:
        value = self.get(key, default, required)
        if value is None:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(self._key(key), f"expected a number, got {type(value).__name__}")
        if not math.isfinite(value):
            raise ConfigError(self._key(key), "must be finite")
        return float(value)

    def integer(self, key, default=None) -> int:
        value = self.get(key, default)
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(self._key(key), f"expected an integer, got {type(value).__name__}")
        return value

    def string(self, key, default=None, choices=None, required=False) -> Optional[str]:
        value = self.get(key, default, required)
        if value is None:
            return None
        if not isinstance(value, str):
            raise ConfigError(self._key(key), f"expected a string, got {type(value).__name__}")
        if choices is not None and value not in choices:
            raise ConfigError(self._key(key), f"must be one of {list(choices)}, got {value!r}")
        return value

    def boolean(self, key, default) -> bool:
        value = self.get(key, default)
        if not isinstance(value, bool):
            raise ConfigError(self._key(key), f"expected a boolean, got {type(value).__name__}")
        return value

    def numbers(self, key, default=None, allow_none=False) -> Optional[Tuple[float, ...]]:
        value = self.get(key, default)
        if value is None and allow_none:
            return None
        if not isinstance(value, (list, tuple)):
            raise ConfigError(self._key(key), "expected a list of numbers")
        out = []
        for i, v in enumerate(value):
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(f"{self._key(key)}[{i}]", "expected a finite number")
            out.append(float(v))
        return tuple(out)

    def child(self, key, required=False) -> "_Reader":
        value = self.get(key, None, required)
        if value is None:
            value = {}
        return _Reader(value, self._key(key))

    def finish(self):
        extra = sorted(set(self.data) - self.seen)
        if extra:
            raise ConfigError(self._key(extra[0]), "unknown key")


def _parse_kernel(r: _Reader) -> MutationKernel:
    if not r.data:
        raise ConfigError(r.path, "kernel block must not be empty")
    kind = r.string("type", required=True, choices=("uniform", "gaussian", "tabulated"))
    normalize = r.boolean("normalize", True)
    try:
        if kind == "gaussian":
            sigma2 = r.number("sigma2", required=True)
            if not sigma2 > 0:
                raise ConfigError(r._key("sigma2"), "must be positive")
            kernel = MutationKernel("gaussian", sigma2=sigma2, amplitude=r.number("amplitude"), normalize=normalize)
        elif kind == "uniform":
            kernel = MutationKernel("uniform", normalize=normalize)
        else:
            rows = r.get("nodes", required=True)
            if not isinstance(rows, list) or not all(isinstance(row, list) and len(row) == 2 for row in rows):
                raise ConfigError(r._key("nodes"), "expected a list of [x, value] pairs")
            kernel = MutationKernel("tabulated", table=tuple(tuple(row) for row in rows), normalize=normalize)
    except ConfigError:
        raise
    except (MutselError, TypeError) as exc:
        raise ConfigError(r.path, str(exc)) from exc
    r.finish()
    return kernel


def _parse_stepper(r: _Reader) -> StepperConfig:
    d = StepperConfig(t_end=DEFAULT_T_END)
    # an explicit null switch_time disables the phase switch
    no_switch = "switch_time" in r.data and r.data["switch_time"] is None
    kwargs = dict(
        scheme=r.string("scheme", d.scheme, choices=SCHEMES),
        dt=r.number("dt", d.dt),
        t_end=r.number("t_end", d.t_end),
        snapshot_times=r.numbers("snapshot_times", None, allow_none=True),
        switch_time=None if no_switch else r.number("switch_time", d.switch_time),
        late_scheme=r.string("late_scheme", d.late_scheme, choices=SCHEMES),
        late_dt=r.number("late_dt", d.late_dt),
        record_every=r.integer("record_every", d.record_every),
    )
    r.seen.add("switch_time")
    r.finish()
    for key in ("dt", "late_dt", "t_end"):
        if not kwargs[key] > 0:
            raise ConfigError(r._key(key), "must be positive")
    try:
        return StepperConfig(**kwargs)
    except MutselError as exc:
        raise ConfigError(r.path, str(exc)) from exc


def _parse_init(r: _Reader, base_dir: str) -> InitSpec:
    if not r.data:
        return InitSpec("cauchy_shifted", shift=1.0)
    kind = r.string("type", required=True, choices=INIT_TYPES)
    if kind == "cauchy_shifted":
        spec = InitSpec(kind, shift=r.number("shift", 1.0))
    elif kind == "constant":
        level = r.number("level", required=True)
        if not level > 0:
            raise ConfigError(r._key("level"), "must be positive")
        spec = InitSpec(kind, level=level)
    else:
        path = r.string("path", required=True)
        if not os.path.isfile(os.path.join(base_dir, path)):
            raise ConfigError(r._key("path"), f"file not found: {path}")
        spec = InitSpec(kind, path=path)
    r.finish()
    return spec


def parse_config(text: str, base_dir: str = ".") -> RunConfig:
    """Validate a JSON configuration and fill in defaults."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<root>", f"invalid JSON: {exc}") from exc
    r = _Reader(data, "")
    eps = r.number("epsilon", required=True)
    if not 0 <= eps < 1:
        raise ConfigError("epsilon", f"must lie in [0, 1), got {eps}")
    r.get("domain", required=True)
    domain = r.numbers("domain")
    if len(domain) != 2 or not domain[0] < 0 < domain[1]:
        raise ConfigError("domain", "expected [a, b] with a < 0 < b")
    kernel = _parse_kernel(r.child("kernel", required=True))
    g = r.child("grid")
    n = g.integer("n", DEFAULT_N)
    g.finish()
    if n < 3:
        raise ConfigError("grid.n", "must be at least 3")
    stepper = _parse_stepper(r.child("stepper"))
    init = _parse_init(r.child("init"), base_dir)
    if init.type == "cauchy_shifted" and eps == 0:
        raise ConfigError("init.type", "cauchy_shifted needs epsilon > 0")
    outputs = r.string("outputs", "out")
    sw = r.child("sweep")
    sweep_eps = sw.numbers("epsilons", list(DEFAULT_SWEEP_EPS))
    sweep_times = sw.numbers("times", list(DEFAULT_SWEEP_TIMES))
    sw.finish()
    if any(not 0 < e < 1 for e in sweep_eps):
        raise ConfigError("sweep.epsilons", "values must lie in (0, 1)")
    if any(t <= 0 for t in sweep_times):
        raise ConfigError("sweep.times", "values must be positive")
    ra = r.child("rates")
    rate_eps = ra.numbers("epsilons", list(DEFAULT_RATE_EPS))
    ra.finish()
    if len(rate_eps) < 3 or any(not 0 < e < 1 for e in rate_eps):
        raise ConfigError("rates.epsilons", "need at least 3 values in (0, 1)")
    r.finish()
    params = ModelParams(eps, Interval(domain[0], domain[1]), kernel)
    return RunConfig(params, n, stepper, init, outputs, sweep_eps, sweep_times, rate_eps, base_dir)


def load_config(path: str) -> RunConfig:
    with open(path) as fh:
        text = fh.read()
    return parse_config(text, base_dir=os.path.dirname(os.path.abspath(path)))


def _read_table(path: str) -> Tuple[np.ndarray, np.ndarray]:
    xs: List[float] = []
    vs: List[float] = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                x, v = float(row[0]), float(row[1])
            except (ValueError, IndexError):
                continue  # header line
            xs.append(x)
            vs.append(v)
    if len(xs) < 2:
        raise ConfigError("init.path", "table needs at least two numeric rows")
    order = np.argsort(xs)
    return np.asarray(xs)[order], np.asarray(vs)[order]


def build_initial(config: RunConfig, model: Model) -> PopulationState:
    """Initial density on the model grid from the ``init`` recipe."""
    x = model.grid.nodes
    init = config.init
    if init.type == "cauchy_shifted":
        values = cauchy_profile(model.epsilon, model.gamma0, x - init.shift)
    elif init.type == "constant":
        values = np.full(model.grid.n, init.level)
    else:
        xs, vs = _read_table(os.path.join(config.base_dir, init.path))
        if np.any(vs < 0):
            raise ConfigError("init.path", "initial density must be nonnegative")
        values = np.interp(x, xs, vs)
    return model.state(0.0, values)
