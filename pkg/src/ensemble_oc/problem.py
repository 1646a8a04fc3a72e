"""The ensemble optimal control problem bundle."""

from __future__ import annotations

from dataclasses import dataclass

from .costs import CoercivityWitness, CostSpec
from .exceptions import InputError
from .systems import InitialStateMap, SystemFamily, make_system


@dataclass(frozen=True, eq=False)
class EnsembleProblem:
    """Dynamics, initial-state map, costs and horizon of one OCP.

    The decision variable is a control sequence of shape ``(horizon, m)``.
    """

    system: SystemFamily
    x0_map: InitialStateMap
    cost: CostSpec
    horizon: int
    coercivity: CoercivityWitness | None = None

    def __post_init__(self):
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise InputError(f"horizon must be a positive integer, got {self.horizon!r}")
        object.__setattr__(self, "horizon", int(self.horizon))
        n = self.system.state_space.dimension
        if self.x0_map.dimension != n:
            raise InputError(f"initial state has dimension {self.x0_map.dimension}, system state {n}")
        if self.x0_map.kind == "affine" and self.x0_map.P.shape[1] != self.system.theta_space.dimension:
            raise InputError("affine initial-state map does not match theta dimension")
        for name, c in (("ell0", self.cost.ell0), ("terminal", self.cost.terminal)):
            Q = getattr(c, "Q", None)
            if Q is not None and Q.shape[0] != n:
                raise InputError(f"{name} weight is {Q.shape}, state dimension is {n}")
        if self.coercivity is not None and self.coercivity.v0 is not None:
            if self.coercivity.v0.shape != (self.system.input_space.dimension,):
                raise InputError("coercivity anchor v0 has the wrong dimension")

    @property
    def n_controls(self) -> int:
        """Length of the stacked decision vector, ``horizon * m``."""
        return self.horizon * self.system.input_space.dimension

    @classmethod
    def from_config(cls, cfg: dict) -> "EnsembleProblem":
        """Build from the ``system``, ``x0``, ``cost``, ``horizon`` and
        optional ``coercivity`` sections of a run config."""
        try:
            sys_cfg = cfg["system"]
            system = make_system(sys_cfg["family"], sys_cfg.get("params"), sys_cfg.get("dims"),
                                 sys_cfg.get("norms"), sys_cfg.get("moduli"))
            x0 = cfg["x0"]
            x0_map = InitialStateMap(x0["kind"], value=x0.get("value"), P=x0.get("P"), c=x0.get("c"))
            cost = CostSpec.from_dict(cfg.get("cost", {}))
            witness = cfg.get("coercivity")
            witness = None if witness is None else CoercivityWitness.from_dict(witness)
            return cls(system, x0_map, cost, cfg.get("horizon", 1), witness)
        except KeyError as exc:
            raise InputError(f"missing config key {exc.args[0]!r}") from None

    def to_config(self) -> dict:
        out = {"system": self.system.to_dict(), "x0": self.x0_map.to_dict(),
               "cost": self.cost.to_dict(), "horizon": self.horizon}
        if self.coercivity is not None:
            out["coercivity"] = self.coercivity.to_dict()
        return out
