"""Problem descriptions: domain, cost, targets, densities, and sampling.

A problem instance is one of four catalog variants of the same template,
"transport a continuous source onto N free atoms plus a penalty on the atom
masses":

  p1  entropy penalty, not scaled with the homotopy parameter
  p2  entropy penalty, scaled with the homotopy parameter
  p3  entropy penalty plus a linear term from squared distances to an anchor
  p4  squared-Wasserstein penalty against a second fixed density

Everything here is immutable after construction and safe to share across
threads.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from . import quadrature
from .errors import ConfigError

VARIANTS = ("p1", "p2", "p3", "p4")

DENSITY_UNIFORM = "uniform"
DENSITY_GAUSS = "gauss"

# Quadrature resolution used everywhere unless overridden.
DEFAULT_PANELS = {1: 64, 2: 48}
DEFAULT_ORDER = {1: 8, 2: 6}


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box in R^1 or R^2."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lower = tuple(float(v) for v in self.lower)
        upper = tuple(float(v) for v in self.upper)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if len(lower) != len(upper):
            raise ConfigError("domain lower/upper must have the same length")
        if len(lower) not in (1, 2):
            raise ConfigError(f"domain must be 1-D or 2-D, got dim={len(lower)}")
        if any(lo >= hi for lo, hi in zip(lower, upper)):
            raise ConfigError("domain must satisfy lower[k] < upper[k] on every axis")

    @property
    def dim(self):
        return len(self.lower)

    @property
    def volume(self):
        return float(np.prod([hi - lo for lo, hi in zip(self.lower, self.upper)]))

    @property
    def center(self):
        return np.array([0.5 * (lo + hi) for lo, hi in zip(self.lower, self.upper)])


def unit_domain(dim):
    return Domain(lower=(0.0,) * dim, upper=(1.0,) * dim)


@dataclass(frozen=True)
class TargetSet:
    """N pairwise-distinct target points; rows of `points` are the atoms."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        object.__setattr__(self, "points", pts)
        pts.setflags(write=False)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ConfigError("targets must be a non-empty (N, dim) array")
        if pts.shape[1] not in (1, 2):
            raise ConfigError(f"targets must live in R^1 or R^2, got dim={pts.shape[1]}")
        if pts.shape[0] > 1:
            diff = pts[:, None, :] - pts[None, :, :]
            dist = np.sqrt((diff**2).sum(-1))
            np.fill_diagonal(dist, np.inf)
            if dist.min() <= 0.0:
                raise ConfigError("target points must be pairwise distinct")

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]


@dataclass(frozen=True)
class DensitySpec:
    """Probability density on the domain, stored with its normalization.

    kind "uniform": constant 1/volume.  kind "gauss": a Gaussian bump
    normalization * exp(-sharpness * ||x - center||^2) restricted to the box.
    """

    kind: str
    normalization: float
    center: tuple = ()
    sharpness: float = 10.0

    def __post_init__(self):
        if self.kind not in (DENSITY_UNIFORM, DENSITY_GAUSS):
            raise ConfigError(f"unknown density kind {self.kind!r}")
        if self.normalization <= 0.0:
            raise ConfigError("density normalization must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if self.kind == DENSITY_GAUSS:
            if not self.center:
                raise ConfigError("gauss density requires a center")
            if self.sharpness <= 0.0:
                raise ConfigError("gauss density requires positive sharpness")


def uniform_density(domain):
    return DensitySpec(kind=DENSITY_UNIFORM, normalization=1.0 / domain.volume)


def _gauss_axis_integral(lo, hi, c, s):
    half = 0.5 * np.sqrt(np.pi / s)
    return half * (erf(np.sqrt(s) * (hi - c)) - erf(np.sqrt(s) * (lo - c)))


def gaussian_bump_density(domain, center=None, sharpness=10.0, normalization=None):
    """Gaussian bump on `domain`, exactly normalized unless a constant is given.

    With normalization=None the constant is computed in closed form (product
    of per-axis error-function integrals), so the density integrates to 1 to
    machine precision.  An explicit constant (e.g. a rounded literature value)
    is stored verbatim; `build_problem` re-checks its integral and warns if it
    is off by more than 1e-3.
    """
    if center is None:
        center = tuple(domain.center)
    center = tuple(float(c) for c in center)
    if len(center) != domain.dim:
        raise ConfigError("density center dimension does not match the domain")
    if normalization is None:
        total = 1.0
        for lo, hi, c in zip(domain.lower, domain.upper, center):
            total *= _gauss_axis_integral(lo, hi, c, sharpness)
        normalization = 1.0 / total
    return DensitySpec(
        kind=DENSITY_GAUSS,
        normalization=float(normalization),
        center=center,
        sharpness=float(sharpness),
    )


def density_eval(spec, x):
    """Density value at x; accepts a single point (dim,) or a batch (M, dim)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if spec.kind == DENSITY_UNIFORM:
        values = np.full(pts.shape[0], spec.normalization)
    else:
        center = np.asarray(spec.center)
        sq = ((pts - center[None, :]) ** 2).sum(axis=1)
        values = spec.normalization * np.exp(-spec.sharpness * sq)
    return float(values[0]) if single else values


def interval_mass(spec, a, b):
    """Closed-form mass of a 1-D density on [a, b] (a <= b)."""
    if b <= a:
        return 0.0
    if spec.kind == DENSITY_UNIFORM:
        return spec.normalization * (b - a)
    c = spec.center[0]
    s = spec.sharpness
    return spec.normalization * _gauss_axis_integral(a, b, c, s)


@dataclass(frozen=True)
class CostSpec:
    """Transport cost ||x - y||_2^exponent with exponent in {2, 3}."""

    exponent: float = 2.0

    def __post_init__(self):
        if self.exponent not in (2.0, 3.0):
            raise ConfigError(f"cost exponent must be 2 or 3, got {self.exponent}")


def cost_matrix(points, targets, exponent):
    """(M, N) matrix of ||x_i - y_j||^p for batch points and target rows."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    diff = pts[:, None, :] - targets[None, :, :]
    sq = (diff**2).sum(axis=2)
    if exponent == 2.0:
        return sq
    return sq ** (exponent / 2.0)


@dataclass(frozen=True)
class ProblemSpec:
    """One fully validated problem instance.

    For p3 the anchor contributes per-target offsets ||y_j - anchor||^2 that
    shift the transport exponent; `offsets` is that vector (zero for the other
    variants).  For p4 `rho` is the second density of the Wasserstein penalty;
    its inner transport is always quadratic regardless of `cost`.
    """

    variant: str
    domain: Domain
    targets: TargetSet
    mu: DensitySpec
    cost: CostSpec = field(default_factory=CostSpec)
    anchor: tuple = ()
    rho: DensitySpec = None
    anchor_costs: np.ndarray = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}")
        if self.targets.dim != self.domain.dim:
            raise ConfigError("target dimension does not match the domain")
        object.__setattr__(self, "anchor", tuple(float(a) for a in self.anchor))
        if self.variant == "p3":
            if not self.anchor:
                raise ConfigError("variant p3 requires an anchor point")
            if len(self.anchor) != self.domain.dim:
                raise ConfigError("anchor dimension does not match the domain")
            gaps = ((self.targets.points - np.asarray(self.anchor)) ** 2).sum(axis=1)
            object.__setattr__(self, "anchor_costs", gaps)
            gaps.setflags(write=False)
        elif self.anchor:
            raise ConfigError("anchor is only meaningful for variant p3")
        if self.variant == "p4":
            if self.rho is None:
                raise ConfigError("variant p4 requires the density rho")
        elif self.rho is not None:
            raise ConfigError("rho is only meaningful for variant p4")

    @property
    def n(self):
        return self.targets.n

    @property
    def dim(self):
        return self.domain.dim

    @property
    def offsets(self):
        if self.anchor_costs is not None:
            return self.anchor_costs
        return np.zeros(self.n)

    @property
    def scales_penalty(self):
        """True when the penalty term rides the homotopy parameter (p2, p4)."""
        return self.variant in ("p2", "p4")


def default_target_box(variant, domain):
    """Sampling box for random targets: (0,5) / [0,1.5]^2 for p1 and p2,
    the source domain itself for p3 and p4."""
    if variant in ("p1", "p2"):
        if domain.dim == 1:
            return Domain(lower=(0.0,), upper=(5.0,))
        return Domain(lower=(0.0, 0.0), upper=(1.5, 1.5))
    return domain


def sample_targets(n, dim, box, seed):
    """Draw n pairwise-distinct uniform points in `box`, reproducibly.

    The generator is keyed by (seed, n, dim) through a SeedSequence, so every
    (N, dim) cell of a sweep gets its own stream and reruns are identical.
    """
    if n < 1:
        raise ConfigError("need at least one target")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(n), int(dim)]))
    lower = np.asarray(box.lower)
    upper = np.asarray(box.upper)
    scale = float(np.max(upper - lower))
    for _ in range(100):
        pts = rng.uniform(lower, upper, size=(n, dim))
        if n == 1:
            return TargetSet(points=pts)
        diff = pts[:, None, :] - pts[None, :, :]
        dist = np.sqrt((diff**2).sum(-1))
        np.fill_diagonal(dist, np.inf)
        if dist.min() > 1e-9 * scale:
            return TargetSet(points=pts)
    raise ConfigError("could not sample distinct targets")  # pragma: no cover


def parabola_targets(n):
    """n points on the scaled parabola s -> (s, (s/e)^2), s equispaced in [0,1]."""
    if n < 2:
        raise ConfigError("parabola layout needs n >= 2")
    s = np.linspace(0.0, 1.0, n)
    return TargetSet(points=np.column_stack([s, (s / np.e) ** 2]))


def _density_from_config(cfg, domain):
    kind = cfg.get("kind", DENSITY_UNIFORM)
    if kind == DENSITY_UNIFORM:
        return uniform_density(domain)
    if kind == DENSITY_GAUSS:
        return gaussian_bump_density(
            domain,
            center=cfg.get("center"),
            sharpness=cfg.get("sharpness", 10.0),
            normalization=cfg.get("normalization"),
        )
    raise ConfigError(f"unknown density kind {kind!r}")


def _validate_density(spec, domain, label):
    grid = quadrature.build_grid(domain, DEFAULT_PANELS[domain.dim], DEFAULT_ORDER[domain.dim])
    total = quadrature.integrate(grid, lambda x: density_eval(spec, x))
    if abs(total - 1.0) > 1e-3:
        warnings.warn(
            f"{label} density integrates to {total:.6f}, not 1; "
            "check the normalization constant",
            stacklevel=3,
        )
    if density_eval(spec, grid.nodes).min() <= 0.0:
        raise ConfigError(f"{label} density must be strictly positive on the domain")


def build_problem(config):
    """Build a validated ProblemSpec from a plain configuration mapping.

    Expected keys: variant, dim, density, cost_exponent, and one target
    source among `targets` (explicit list), `parabola` (bool, with
    n_targets), or `n_targets` + `seed` (random sampling in `target_box`,
    defaulting per variant).  p3 additionally takes `anchor`, p4 takes `rho`.
    """
    variant = str(config.get("variant", "")).lower()
    if variant not in VARIANTS:
        raise ConfigError(f"config must name a variant among {VARIANTS}")

    if "domain" in config:
        dom_cfg = config["domain"]
        domain = Domain(lower=tuple(dom_cfg["lower"]), upper=tuple(dom_cfg["upper"]))
    else:
        dim = int(config.get("dim", 1))
        domain = unit_domain(dim)

    if config.get("targets") is not None:
        targets = TargetSet(points=np.asarray(config["targets"], dtype=float))
        if targets.dim != domain.dim:
            raise ConfigError("explicit targets have the wrong dimension")
    elif config.get("parabola"):
        if domain.dim != 2:
            raise ConfigError("the parabola layout is two-dimensional")
        targets = parabola_targets(int(config["n_targets"]))
    else:
        if "n_targets" not in config or "seed" not in config:
            raise ConfigError(
                "config needs explicit targets, a parabola layout, or n_targets + seed"
            )
        if "target_box" in config:
            tb = config["target_box"]
            box = Domain(lower=tuple(tb["lower"]), upper=tuple(tb["upper"]))
        else:
            box = default_target_box(variant, domain)
        targets = sample_targets(
            int(config["n_targets"]), domain.dim, box, int(config["seed"])
        )

    mu = _density_from_config(config.get("density", {}), domain)
    _validate_density(mu, domain, "source")

    cost = CostSpec(exponent=float(config.get("cost_exponent", 2)))

    anchor = ()
    rho = None
    if variant == "p3":
        if config.get("anchor") is None:
            raise ConfigError("variant p3 requires an anchor point")
        anchor = tuple(float(a) for a in np.atleast_1d(config["anchor"]))
    elif config.get("anchor") is not None:
        raise ConfigError("anchor is only meaningful for variant p3")
    if variant == "p4":
        if config.get("rho") is None:
            raise ConfigError("variant p4 requires the density rho")
        rho = _density_from_config(config["rho"], domain)
        _validate_density(rho, domain, "rho")
    elif config.get("rho") is not None:
        raise ConfigError("rho is only meaningful for variant p4")

    return ProblemSpec(
        variant=variant,
        domain=domain,
        targets=targets,
        mu=mu,
        cost=cost,
        anchor=anchor,
        rho=rho,
    )
