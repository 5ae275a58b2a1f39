"""
Per-step laws of the driving increments X_{t_i} under the terminal measure,
plus the per-path random streams used to sample them.
"""

import math
import warnings
from dataclasses import dataclass, replace
from typing import ClassVar, Tuple

import numpy

from lmmgrid.constants import PROBABILITY_TOLERANCE
from lmmgrid.exceptions import DomainError, DriverMomentWarning, ValidationError


class DriverSpec:
    """
    Common interface of the increment laws. `step_scale` records the step
    length the law was scaled to (1 for the unscaled law).
    """

    kind: ClassVar[str] = ""

    def scaled(self, dt):
        raise NotImplementedError()


@dataclass(frozen=True)
class AtomicDriver(DriverSpec):
    values: Tuple[float, ...]
    probabilities: Tuple[float, ...]
    step_scale: float = 1.0
    mgf_bound: float = math.inf

    kind: ClassVar[str] = "atomic"

    @property
    def mean(self):
        return math.fsum(x * q for x, q in zip(self.values, self.probabilities))

    @property
    def variance(self):
        mean = self.mean
        return math.fsum(q * (x - mean) ** 2 for x, q in zip(self.values, self.probabilities))

    def scaled(self, dt):
        """
        Atoms times sqrt(dt), so the per-step variance is dt times the base.
        """
        root = math.sqrt(dt)
        return replace(
            self,
            values=tuple(x * root for x in self.values),
            step_scale=self.step_scale * dt,
            mgf_bound=self.mgf_bound / root,
        )


@dataclass(frozen=True)
class GaussianDriver(DriverSpec):
    variance: float
    step_scale: float = 1.0
    mgf_bound: float = math.inf

    kind: ClassVar[str] = "gaussian"

    @property
    def mean(self):
        return 0.0

    def scaled(self, dt):
        return replace(self, variance=self.variance * dt, step_scale=self.step_scale * dt)


def bernoulli_atoms(q):
    """
    Standardized two-point law taking the upper atom with probability q.
    """
    if not 0 < q < 1:
        raise ValidationError(f"Bernoulli parameter must lie in (0, 1), got {q}")
    return ((math.sqrt((1 - q) / q), q), (-math.sqrt(q / (1 - q)), 1 - q))


def make_driver(raw, required_bound=None):
    """
    Validates raw driver parameters:

        {"kind": "bernoulli", "p": 0.5}
        {"kind": "atomic", "atoms": [[1, 0.5], [-1, 0.5]]}
        {"kind": "gaussian", "variance": 1.0}

    Any of them may carry "mgf_bound", the largest |u| with E[exp(uX)] finite.
    """
    kind = raw.get("kind")
    bound = float(raw.get("mgf_bound", math.inf))
    if not bound > 0:
        raise ValidationError(f"mgf_bound must be positive, got {bound}")
    if kind == "bernoulli":
        atoms = bernoulli_atoms(float(raw.get("p", 0.5)))
        driver = _atomic(atoms, bound)
    elif kind == "atomic":
        atoms = raw.get("atoms") or []
        try:
            atoms = [(float(value), float(probability)) for value, probability in atoms]
        except (TypeError, ValueError):
            raise ValidationError("Atoms must be [value, probability] pairs")
        driver = _atomic(atoms, bound)
    elif kind == "gaussian":
        variance = float(raw.get("variance", 1.0))
        if not variance > 0 or not math.isfinite(variance):
            raise ValidationError(f"Gaussian variance must be positive, got {variance}")
        driver = GaussianDriver(variance, mgf_bound=bound)
    else:
        raise ValidationError(f"Unknown driver kind {kind!r}")
    if required_bound is not None and required_bound > driver.mgf_bound:
        raise ValidationError(
            f"Driver exponential moments are only finite up to {driver.mgf_bound}, "
            f"need {required_bound}"
        )
    if abs(driver.mean) > PROBABILITY_TOLERANCE or abs(driver.variance - 1) > PROBABILITY_TOLERANCE:
        warnings.warn(
            f"Driver has mean {driver.mean:.6g} and variance {driver.variance:.6g}, "
            "expected 0 and 1",
            DriverMomentWarning,
        )
    return driver


def _atomic(atoms, bound):
    if len(atoms) < 2:
        raise ValidationError("An atomic driver needs at least two atoms")
    values = tuple(value for value, _ in atoms)
    probabilities = tuple(probability for _, probability in atoms)
    if not all(math.isfinite(value) for value in values):
        raise ValidationError("Atom values must be finite")
    if any(probability <= 0 for probability in probabilities):
        raise ValidationError("Atom probabilities must be positive")
    total = math.fsum(probabilities)
    if abs(total - 1) > PROBABILITY_TOLERANCE:
        raise ValidationError(f"Atom probabilities sum to {total}, not 1")
    return AtomicDriver(values, probabilities, mgf_bound=bound)


def mgf(driver, u):
    """
    E[exp(u X)] for scalar or array u.
    """
    u = numpy.asarray(u, dtype=float)
    if numpy.any(numpy.abs(u) > driver.mgf_bound):
        raise DomainError(f"mgf argument outside the integrability bound {driver.mgf_bound}")
    if driver.kind == "atomic":
        values = numpy.exp(numpy.multiply.outer(u, numpy.asarray(driver.values)))
        result = values @ numpy.asarray(driver.probabilities)
    else:
        result = numpy.exp(0.5 * u * u * driver.variance)
    return float(result) if numpy.ndim(result) == 0 else result


def sample(driver, stream, size=None):
    """
    Draws increments from `stream` (a numpy Generator).
    """
    if driver.kind == "atomic":
        return stream.choice(
            numpy.asarray(driver.values), size=size, p=numpy.asarray(driver.probabilities)
        )
    return stream.normal(0.0, math.sqrt(driver.variance), size)


def path_stream(seed, index):
    """
    Counter-based stream for one Monte Carlo path: Philox keyed by the master
    seed, with the path index in the top counter word. Adding paths never
    changes the draws of existing ones.
    """
    if int(seed) != seed or seed < 0:
        raise ValidationError(f"Seeds must be non-negative integers, got {seed}")
    return numpy.random.Generator(
        numpy.random.Philox(key=int(seed), counter=int(index) << 192)
    )


def draw_increments(driver, seed, first_path, count, steps):
    """
    (count, steps) increments for paths first_path..first_path+count-1.
    """
    draws = numpy.empty((count, steps))
    for row in range(count):
        draws[row] = sample(driver, path_stream(seed, first_path + row), steps)
    return draws
