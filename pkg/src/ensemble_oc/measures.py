"""Probability measures on the ensemble index set.

Discrete measures are the computational objects: empirical measures drawn
from a ``ThetaDistribution`` and tensor Gauss-Legendre measures standing in
for the continuous law. Randomness comes from counter-based Philox streams
keyed by ``(seed, *keys)``, so adding more ``k`` values to a sweep never
changes the draws of the existing ones.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass

import numpy as np

from .exceptions import InputError, UnsupportedError

WEIGHT_SUM_TOL = 1e-12


def rng_stream(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for ``(seed, keys)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Atoms ``theta_i`` (rows of ``atoms``) with weights ``w_i`` summing to one."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        weights = np.asarray(self.weights, dtype=float).ravel()
        if atoms.ndim != 2 or atoms.shape[0] < 1:
            raise InputError("a discrete measure needs at least one atom")
        if weights.shape[0] != atoms.shape[0]:
            raise InputError(f"{atoms.shape[0]} atoms but {weights.shape[0]} weights")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)) or not np.all(np.isfinite(atoms)):
            raise InputError("weights must be finite and nonnegative, atoms finite")
        atoms.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)
        self.check_normalised()

    def check_normalised(self):
        total = float(np.sum(self.weights))
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise InputError(f"measure weights sum to {total!r}, not 1")

    @property
    def dimension(self) -> int:
        return self.atoms.shape[1]

    def __len__(self):
        return self.atoms.shape[0]

    @classmethod
    def dirac(cls, theta) -> "DiscreteMeasure":
        return cls(np.atleast_1d(np.asarray(theta, dtype=float))[None, :], [1.0])

    @classmethod
    def uniform_over(cls, atoms) -> "DiscreteMeasure":
        atoms = np.asarray(atoms, dtype=float)
        k = atoms.shape[0]
        return cls(atoms, np.full(k, 1.0 / k))

    def integrate(self, fn) -> float:
        """``sum_i w_i fn(theta_i)`` in atom order; ``fn`` maps ``(k, p)`` to ``(k,)``."""
        vals = np.asarray(fn(self.atoms), dtype=float).ravel()
        total = 0.0
        for w, v in zip(self.weights.tolist(), vals.tolist()):
            total += w * v
        return total

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([f"theta_{j + 1}" for j in range(self.dimension)] + ["weight"])
        for atom, w in zip(self.atoms.tolist(), self.weights.tolist()):
            writer.writerow([repr(a) for a in atom] + [repr(w)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "DiscreteMeasure":
        rows = list(csv.reader(io.StringIO(text)))
        if len(rows) < 2 or rows[0][-1] != "weight":
            raise InputError("measure CSV needs a header ending in 'weight' and at least one row")
        data = np.array([[float(v) for v in r] for r in rows[1:] if r])
        return cls(data[:, :-1], data[:, -1])


def mixture(mu1: DiscreteMeasure, mu2: DiscreteMeasure, lam: float) -> DiscreteMeasure:
    """Atom-union measure ``lam * mu1 + (1 - lam) * mu2``."""
    if not 0.0 <= lam <= 1.0:
        raise InputError("mixture weight must lie in [0, 1]")
    atoms = np.vstack([mu1.atoms, mu2.atoms])
    weights = np.concatenate([lam * mu1.weights, (1.0 - lam) * mu2.weights])
    weights = weights / weights.sum()
    return DiscreteMeasure(atoms, weights)


# ---------------------------------------------------------------- distributions

@dataclass(frozen=True, eq=False)
class ThetaDistribution:
    """Sampleable law on a compact box.

    kinds: ``uniform`` (box), ``truncated_gaussian`` (mean, cov, box),
    ``finite`` (atoms, weights).
    """

    kind: str
    box: np.ndarray | None = None
    mean: np.ndarray | None = None
    cov: np.ndarray | None = None
    atoms: np.ndarray | None = None
    weights: np.ndarray | None = None

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        if self.kind == "finite":
            base = DiscreteMeasure(self.atoms, self.weights)
            set_("atoms", base.atoms)
            set_("weights", base.weights)
            set_("box", np.stack([base.atoms.min(axis=0), base.atoms.max(axis=0)], axis=1))
            return
        if self.kind not in ("uniform", "truncated_gaussian"):
            raise InputError(f"unknown theta distribution kind {self.kind!r}")
        if self.box is None:
            raise InputError(f"{self.kind} distribution needs a box")
        box = np.atleast_2d(np.asarray(self.box, dtype=float))
        if box.shape[1] != 2 or np.any(box[:, 0] > box[:, 1]) or not np.all(np.isfinite(box)):
            raise InputError("box must be a finite list of [low, high] pairs with low <= high")
        set_("box", box)
        if self.kind == "truncated_gaussian":
            p = box.shape[0]
            mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
            cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
            if mean.shape != (p,) or cov.shape != (p, p):
                raise InputError("truncated_gaussian mean/cov do not match box dimension")
            try:
                np.linalg.cholesky(cov)
            except np.linalg.LinAlgError:
                raise InputError("truncated_gaussian covariance must be positive definite") from None
            set_("mean", mean)
            set_("cov", cov)

    @property
    def dimension(self) -> int:
        return self.box.shape[0]

    @classmethod
    def from_dict(cls, cfg: dict) -> "ThetaDistribution":
        kind = cfg.get("kind")
        if kind == "finite":
            return cls("finite", atoms=cfg["atoms"], weights=cfg["weights"])
        return cls(kind, box=cfg.get("box"), mean=cfg.get("mean"), cov=cfg.get("cov"))

    def to_dict(self) -> dict:
        if self.kind == "finite":
            return {"kind": "finite", "atoms": self.atoms.tolist(), "weights": self.weights.tolist()}
        out = {"kind": self.kind, "box": self.box.tolist()}
        if self.kind == "truncated_gaussian":
            out["mean"] = self.mean.tolist()
            out["cov"] = self.cov.tolist()
        return out

    def density(self, thetas) -> np.ndarray:
        """Unnormalised density on the box (constant for ``uniform``)."""
        thetas = np.asarray(thetas, dtype=float)
        if self.kind == "uniform":
            return np.ones(thetas.shape[0])
        if self.kind == "truncated_gaussian":
            d = thetas - self.mean
            sol = np.linalg.solve(self.cov, d.T).T
            return np.exp(-0.5 * np.sum(d * sol, axis=1))
        raise UnsupportedError("a finite distribution has no density")

    def sample(self, k: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "uniform":
            lo, hi = self.box[:, 0], self.box[:, 1]
            return lo + (hi - lo) * rng.random((k, self.dimension))
        if self.kind == "finite":
            idx = rng.choice(self.atoms.shape[0], size=k, p=self.weights)
            return self.atoms[idx].copy()
        chol = np.linalg.cholesky(self.cov)
        lo, hi = self.box[:, 0], self.box[:, 1]
        out = np.empty((0, self.dimension))
        for _ in range(10_000):
            z = self.mean + rng.standard_normal((max(k, 16), self.dimension)) @ chol.T
            inside = np.all((z >= lo) & (z <= hi), axis=1)
            out = np.vstack([out, z[inside]])
            if out.shape[0] >= k:
                return out[:k]
        raise InputError("truncated_gaussian box has too little mass for rejection sampling")


def empirical_measure(dist: ThetaDistribution, k: int, seed: int, *stream: int) -> DiscreteMeasure:
    """Equal-weight measure on ``k`` i.i.d. draws from ``dist``.

    Pure function of ``(dist, k, seed, stream)``.
    """
    k = int(k)
    if k < 1:
        raise InputError("k must be >= 1")
    atoms = dist.sample(k, rng_stream(seed, *stream))
    return DiscreteMeasure(atoms, np.full(k, 1.0 / k))


def quadrature_measure(dist: ThetaDistribution, nodes_per_dim: int) -> DiscreteMeasure:
    """Tensor Gauss-Legendre measure on the box of ``dist``.

    For ``truncated_gaussian`` the product weights are multiplied by the
    density at the nodes before renormalising.
    """
    if dist.kind == "finite":
        raise InputError("quadrature of a finite measure is itself")
    nodes_per_dim = int(nodes_per_dim)
    if nodes_per_dim < 1:
        raise InputError("nodes_per_dim must be >= 1")
    x, w = np.polynomial.legendre.leggauss(nodes_per_dim)
    axes, wts = [], []
    for lo, hi in dist.box:
        axes.append(lo + (hi - lo) * (x + 1.0) / 2.0)
        wts.append(w / 2.0)
    atoms = np.array(list(itertools.product(*axes)))
    weights = np.array([np.prod(c) for c in itertools.product(*wts)])
    if dist.kind == "truncated_gaussian":
        weights = weights * dist.density(atoms)
    weights = weights / weights.sum()
    return DiscreteMeasure(atoms, weights)


# ---------------------------------------------------------------- diagnostics

def wasserstein1_1d(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """W1 between two measures on the real line: the integral of ``|F_mu - F_nu|``."""
    if mu.dimension != 1 or nu.dimension != 1:
        raise UnsupportedError("W1 is implemented for one-dimensional theta only; "
                               "use wasserstein1_marginals")
    a, wa = mu.atoms[:, 0], mu.weights
    b, wb = nu.atoms[:, 0], nu.weights
    grid = np.unique(np.concatenate([a, b]))
    if grid.shape[0] < 2:
        return 0.0
    ia, ib = np.argsort(a, kind="stable"), np.argsort(b, kind="stable")
    ca, cb = np.cumsum(wa[ia]), np.cumsum(wb[ib])
    # right-continuous CDFs evaluated at every grid point except the last
    Fa = np.concatenate([[0.0], ca])[np.searchsorted(a[ia], grid[:-1], side="right")]
    Fb = np.concatenate([[0.0], cb])[np.searchsorted(b[ib], grid[:-1], side="right")]
    return float(np.sum(np.abs(Fa - Fb) * np.diff(grid)))


def wasserstein1_marginals(mu: DiscreteMeasure, nu: DiscreteMeasure) -> list[float]:
    """Per-coordinate W1 of the marginals (not the joint W1)."""
    if mu.dimension != nu.dimension:
        raise InputError("measures live on spaces of different dimension")
    return [wasserstein1_1d(DiscreteMeasure(mu.atoms[:, [j]], mu.weights),
                            DiscreteMeasure(nu.atoms[:, [j]], nu.weights))
            for j in range(mu.dimension)]


@dataclass(frozen=True)
class TailMassTable:
    """Rows: measures in sequence order. Columns: thresholds ``M``."""

    thresholds: tuple
    masses: np.ndarray
    epsilon: float
    passed: bool
    note: str = "diagnostic, not certificate"


def tail_mass_diagnostic(values, M_grid, epsilon: float = 1e-3) -> TailMassTable:
    """``int phi * 1{phi > M} d mu_k`` for each measure ``k`` and threshold ``M``.

    ``values`` is a sequence of ``(weights, phi_values)`` pairs, one per
    measure. Passes when the last measure's tail mass at the largest
    threshold is at most ``epsilon``.
    """
    M_grid = [float(m) for m in M_grid]
    if not M_grid:
        raise InputError("threshold grid is empty")
    if len(values) == 0:
        raise InputError("no measures given")
    rows = []
    for weights, phi in values:
        weights = np.asarray(weights, dtype=float)
        phi = np.asarray(phi, dtype=float)
        row = []
        for M in M_grid:
            mask = phi > M
            total = 0.0
            for w, v in zip(weights[mask].tolist(), phi[mask].tolist()):
                total += w * v
            row.append(total)
        rows.append(row)
    masses = np.array(rows)
    largest = int(np.argmax(M_grid))
    return TailMassTable(tuple(M_grid), masses, float(epsilon), bool(masses[-1, largest] <= epsilon))
