"""Parametrised discrete-time system families and trajectory rollout.

A family implements ``x+ = f(x, u, theta)``. Every transition works on a
leading batch axis of ensemble members so that one input sequence can be
rolled out for many ``theta`` at once; the single-member functions
``transition`` and ``rollout`` are the batch code with a batch of one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .comparison import from_json
from .exceptions import InputError, NumericError
from .spaces import SpaceDescriptor


@dataclass(frozen=True, eq=False)
class SystemFamily:
    """Base class for registered families.

    Subclasses set ``family_id`` and implement ``_step`` on batched arrays
    ``x (B, n)``, ``u (B, m)``, ``theta (B, p)``.
    """

    state_space: SpaceDescriptor
    input_space: SpaceDescriptor
    theta_space: SpaceDescriptor
    params: dict = field(default_factory=dict)
    declared_moduli: tuple | None = None

    family_id = "abstract"
    linear = False

    def _step(self, x, u, theta):
        raise NotImplementedError

    def step_batch(self, x, u, theta) -> np.ndarray:
        """Apply the transition to a batch; ``u`` may be shared (shape ``(m,)``)."""
        x = np.asarray(x, dtype=float)
        theta = np.asarray(theta, dtype=float)
        u = np.broadcast_to(np.asarray(u, dtype=float), (x.shape[0], self.input_space.dimension))
        with np.errstate(all="ignore"):
            out = self._step(x, u, theta)
        if not np.all(np.isfinite(out)):
            bad = int(np.argmin(np.all(np.isfinite(out), axis=-1)))
            raise NumericError(
                f"family {self.family_id!r} produced a non-finite state from "
                f"x={x[bad].tolist()}, u={u[bad].tolist()}, theta={theta[bad].tolist()}"
            )
        return out

    @property
    def moduli(self):
        return self.declared_moduli

    def to_dict(self) -> dict:
        out = {
            "family": self.family_id,
            "params": _jsonable(self.params),
            "dims": {
                "x": self.state_space.dimension,
                "u": self.input_space.dimension,
                "theta": self.theta_space.dimension,
            },
            "norms": {
                "x": self.state_space.to_dict()["norm_order"],
                "u": self.input_space.to_dict()["norm_order"],
                "theta": self.theta_space.to_dict()["norm_order"],
            },
        }
        if self.declared_moduli is not None:
            out["moduli"] = {
                "alpha_x": self.declared_moduli[0].to_json(),
                "alpha_u": self.declared_moduli[1].to_json(),
            }
        return out


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


class ScalarLinear(SystemFamily):
    """f(x, u, theta) = theta * x + b * u, b = params.get("b", 1)."""

    family_id = "scalar_linear"
    linear = True

    def _step(self, x, u, theta):
        b = float(self.params.get("b", 1.0))
        return theta * x + b * u

    def matrices(self, theta):
        theta = np.asarray(theta, dtype=float).reshape(-1, 1)
        b = float(self.params.get("b", 1.0))
        A = theta[:, :, None]
        B = np.full((theta.shape[0], 1, 1), b)
        return A, B


class MatrixLinear(SystemFamily):
    """f(x, u, theta) = A(theta) x + B(theta) u with A, B affine in theta.

    ``params``: ``A0`` (n, n), ``B0`` (n, m) and optional lists ``A`` and
    ``B`` with one (n, n) / (n, m) matrix per theta coordinate.
    """

    family_id = "matrix_linear"
    linear = True

    def matrices(self, theta):
        theta = np.asarray(theta, dtype=float)
        p = self.params
        A = np.broadcast_to(np.asarray(p["A0"], dtype=float),
                            (theta.shape[0],) + np.shape(p["A0"])).copy()
        B = np.broadcast_to(np.asarray(p["B0"], dtype=float),
                            (theta.shape[0],) + np.shape(p["B0"])).copy()
        for j, Aj in enumerate(p.get("A", [])):
            A += theta[:, j, None, None] * np.asarray(Aj, dtype=float)
        for j, Bj in enumerate(p.get("B", [])):
            B += theta[:, j, None, None] * np.asarray(Bj, dtype=float)
        return A, B

    def _step(self, x, u, theta):
        A, B = self.matrices(theta)
        # explicit accumulation keeps per-member results independent of batch size
        out = np.zeros_like(x)
        for j in range(x.shape[1]):
            out = out + A[:, :, j] * x[:, j, None]
        for j in range(u.shape[1]):
            out = out + B[:, :, j] * u[:, j, None]
        return out


class Logistic(SystemFamily):
    """f(x, u, theta) = theta * x * (1 - x) + u."""

    family_id = "logistic"

    def _step(self, x, u, theta):
        return theta * x * (1.0 - x) + u


class Pendulum(SystemFamily):
    """Explicit Euler step of a damped pendulum.

    State (angle, angular velocity), input torque, theta = (mass, length).
    ``params``: ``dt`` (default 0.05), ``g`` (9.81), ``damping`` (0.1).
    """

    family_id = "pendulum"

    def _step(self, x, u, theta):
        dt = float(self.params.get("dt", 0.05))
        g = float(self.params.get("g", 9.81))
        c = float(self.params.get("damping", 0.1))
        mass, length = theta[:, 0], theta[:, 1]
        inertia = mass * length**2
        angle, vel = x[:, 0], x[:, 1]
        acc = -(g / length) * np.sin(angle) - (c / inertia) * vel + u[:, 0] / inertia
        return np.stack([angle + dt * vel, vel + dt * acc], axis=-1)


FAMILIES = {cls.family_id: cls for cls in (ScalarLinear, MatrixLinear, Logistic, Pendulum)}

_FIXED_DIMS = {
    "scalar_linear": (1, 1, 1),
    "logistic": (1, 1, 1),
    "pendulum": (2, 1, 2),
}


def make_system(family: str, params=None, dims=None, norms=None, moduli=None) -> SystemFamily:
    """Build a registered family from config-style arguments."""
    if family not in FAMILIES:
        raise InputError(f"unknown system family {family!r}; known: {sorted(FAMILIES)}")
    params = dict(params or {})
    norms = dict(norms or {})
    if family in _FIXED_DIMS:
        nx, nu, nt = _FIXED_DIMS[family]
    else:
        try:
            A0 = np.asarray(params["A0"], dtype=float)
            B0 = np.asarray(params["B0"], dtype=float)
        except KeyError as exc:
            raise InputError(f"matrix_linear needs params {exc.args[0]!r}") from None
        if A0.ndim != 2 or A0.shape[0] != A0.shape[1] or B0.ndim != 2 or B0.shape[0] != A0.shape[0]:
            raise InputError("matrix_linear needs square A0 (n, n) and B0 (n, m)")
        nx, nu = B0.shape
        nt = max(len(params.get("A", [])), len(params.get("B", [])), 1)
        if dims and "theta" in dims:
            nt = int(dims["theta"])
        for key, shape in (("A", A0.shape), ("B", B0.shape)):
            mats = params.get(key, [])
            if len(mats) > nt or any(np.shape(m) != shape for m in mats):
                raise InputError(f"matrix_linear params[{key!r}] inconsistent with dimensions")
    if dims:
        given = (dims.get("x", nx), dims.get("u", nu), dims.get("theta", nt))
        if tuple(int(d) for d in given) != (nx, nu, nt):
            raise InputError(f"dims {dims} do not match family {family!r} ({nx}, {nu}, {nt})")
    declared = None
    if moduli:
        declared = (from_json(moduli["alpha_x"]), from_json(moduli["alpha_u"]))
    return FAMILIES[family](
        state_space=SpaceDescriptor(nx, norms.get("x", 2.0)),
        input_space=SpaceDescriptor(nu, norms.get("u", 2.0)),
        theta_space=SpaceDescriptor(nt, norms.get("theta", 2.0)),
        params=params,
        declared_moduli=declared,
    )


@dataclass(frozen=True, eq=False)
class InitialStateMap:
    """theta -> x0: either a constant or ``P @ theta + c``."""

    kind: str
    value: np.ndarray | None = None
    P: np.ndarray | None = None
    c: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "constant":
            if self.value is None:
                raise InputError("constant initial state needs 'value'")
            object.__setattr__(self, "value", np.atleast_1d(np.asarray(self.value, dtype=float)))
        elif self.kind == "affine":
            if self.P is None:
                raise InputError("affine initial state needs 'P'")
            P = np.atleast_2d(np.asarray(self.P, dtype=float))
            c = np.zeros(P.shape[0]) if self.c is None else np.atleast_1d(np.asarray(self.c, dtype=float))
            if c.shape != (P.shape[0],):
                raise InputError("affine initial state: 'c' must have one entry per row of 'P'")
            object.__setattr__(self, "P", P)
            object.__setattr__(self, "c", c)
        else:
            raise InputError(f"unknown initial-state kind {self.kind!r}")

    @classmethod
    def constant(cls, value):
        return cls("constant", value=value)

    @property
    def dimension(self) -> int:
        return self.value.shape[0] if self.kind == "constant" else self.P.shape[0]

    def batch(self, thetas) -> np.ndarray:
        thetas = np.asarray(thetas, dtype=float)
        if self.kind == "constant":
            return np.broadcast_to(self.value, (thetas.shape[0], self.value.shape[0])).copy()
        if thetas.shape[1] != self.P.shape[1]:
            raise InputError(f"theta has dimension {thetas.shape[1]}, map expects {self.P.shape[1]}")
        out = np.broadcast_to(self.c, (thetas.shape[0], self.c.shape[0])).copy()
        for j in range(self.P.shape[1]):
            out = out + self.P[:, j] * thetas[:, j, None]
        return out

    def __call__(self, theta) -> np.ndarray:
        return self.batch(np.atleast_2d(np.asarray(theta, dtype=float)))[0]

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value.tolist()}
        return {"kind": "affine", "P": self.P.tolist(), "c": self.c.tolist()}


def as_control_sequence(u, input_space: SpaceDescriptor, horizon: int | None = None) -> np.ndarray:
    """Validate and reshape a control sequence to ``(N, m)``."""
    arr = np.asarray(u, dtype=float)
    m = input_space.dimension
    if arr.ndim <= 1:
        if arr.size % m:
            raise InputError(f"control sequence of size {arr.size} is not a multiple of input dim {m}")
        arr = arr.reshape(-1, m)
    if arr.ndim != 2 or arr.shape[1] != m:
        raise InputError(f"control sequence has shape {arr.shape}, expected (N, {m})")
    if arr.shape[0] < 1:
        raise InputError("control sequence must have horizon >= 1")
    if horizon is not None and arr.shape[0] != horizon:
        raise InputError(f"control sequence has horizon {arr.shape[0]}, expected {horizon}")
    return arr


def _thetas(sys: SystemFamily, thetas) -> np.ndarray:
    arr = np.asarray(thetas, dtype=float)
    if arr.ndim <= 1:
        arr = arr.reshape(-1, sys.theta_space.dimension)
    return sys.theta_space.check(arr, "theta")


def transition(sys: SystemFamily, x, u, theta) -> np.ndarray:
    """One step ``f(x, u, theta)`` for a single ensemble member."""
    x = sys.state_space.check(x, "x").reshape(1, -1)
    u = sys.input_space.check(u, "u").reshape(1, -1)
    theta = sys.theta_space.check(theta, "theta").reshape(1, -1)
    return sys.step_batch(x, u, theta)[0]


def rollout_batch(sys: SystemFamily, x0_map: InitialStateMap, u, thetas) -> np.ndarray:
    """States ``(B, N+1, n)`` for every theta in ``thetas`` under the shared input ``u``."""
    u = as_control_sequence(u, sys.input_space)
    thetas = _thetas(sys, thetas)
    x = x0_map.batch(thetas)
    sys.state_space.check(x, "initial state")
    states = np.empty((thetas.shape[0], u.shape[0] + 1, sys.state_space.dimension))
    states[:, 0] = x
    for n in range(u.shape[0]):
        try:
            x = sys.step_batch(x, u[n], thetas)
        except NumericError as exc:
            raise NumericError(f"step n={n}: {exc}") from None
        states[:, n + 1] = x
    return states


def rollout(sys: SystemFamily, x0_map: InitialStateMap, u, theta) -> np.ndarray:
    """Trajectory ``s(0..N)`` as an ``(N+1, n)`` array for one theta."""
    theta = sys.theta_space.check(theta, "theta").reshape(1, -1)
    return rollout_batch(sys, x0_map, u, theta)[0]


def rollout_from_state(sys: SystemFamily, x0, u, theta) -> np.ndarray:
    """Trajectory from an explicit initial state rather than an initial-state map."""
    return rollout(sys, InitialStateMap.constant(sys.state_space.check(x0, "x0")), u, theta)
