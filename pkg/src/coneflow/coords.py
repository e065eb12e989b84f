"""Coordinates around a cone point and the dyadic annulus decomposition.

Near a cone point of order ``beta`` with Euclidean polar radius ``r`` we use

* ``rho = r**(beta + 1) / (beta + 1)``, in which the flat cone reads
  ``d rho**2 + (beta + 1)**2 rho**2 d theta**2``;
* ``w = log2(rho)``, the cylinder coordinate;
* ``s = 2**k * rho``, the unit-scale coordinate on the annulus
  ``Omega_k = {2**-(k+1) < rho < 2**-(k-1)}``.

Angles live in ``[0, 2*pi)``; differences of angles are measured with the
wrap-around distance (:func:`angle_distance`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi
MAX_POINTS = 2


class DomainError(ValueError):
    """Argument outside the domain of a coordinate map."""


def _check_beta(beta: float) -> None:
    if not beta > -1.0:
        raise DomainError(f"cone order must exceed -1, got beta={beta!r}")


def rho_of_r(r, beta: float):
    """Map Euclidean radius to the cone radius ``r**(beta+1)/(beta+1)``."""
    _check_beta(beta)
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise DomainError("r must be non-negative")
    out = np.power(r_arr, beta + 1.0) / (beta + 1.0)
    return float(out) if out.ndim == 0 else out


def r_of_rho(rho, beta: float):
    """Inverse of :func:`rho_of_r`."""
    _check_beta(beta)
    rho_arr = np.asarray(rho, dtype=float)
    if np.any(rho_arr < 0):
        raise DomainError("rho must be non-negative")
    out = np.power((beta + 1.0) * rho_arr, 1.0 / (beta + 1.0))
    return float(out) if out.ndim == 0 else out


def w_of_rho(rho):
    """``log2(rho)``; exact on powers of two."""
    rho_arr = np.asarray(rho, dtype=float)
    if np.any(rho_arr <= 0):
        raise DomainError("rho must be positive")
    out = np.log2(rho_arr)
    return float(out) if out.ndim == 0 else out


def rho_of_w(w):
    out = np.exp2(np.asarray(w, dtype=float))
    return float(out) if out.ndim == 0 else out


def annulus_of(rho: float) -> list[tuple[int, float]]:
    """Return every ``(k, s)`` with ``rho`` in the open annulus ``Omega_k``.

    Membership uses the strict inequalities ``2**-(k+1) < rho < 2**-(k-1)``,
    equivalently ``1/2 < s < 2`` with ``s = 2**k * rho``; ``k`` runs over
    the positive integers. A dyadic ``rho`` therefore lands in exactly one
    annulus, any other ``rho < 1`` in two consecutive ones. ``rho == 1``
    lies on the outer boundary of ``Omega_1`` and belongs to none.

    Examples
    --------
    >>> annulus_of(0.5)
    [(1, 1.0)]
    >>> annulus_of(0.7)
    [(1, 1.4)]
    """
    rho = float(rho)
    if not (0.0 < rho <= 1.0):
        raise DomainError(f"rho must lie in (0, 1], got {rho!r}")
    _, e = math.frexp(rho)  # rho = m * 2**e with 1/2 <= m < 1
    out = []
    for k in (-e, 1 - e, 2 - e):
        if k < 1:
            continue
        s = math.ldexp(rho, k)
        if 0.5 < s < 2.0:
            out.append((k, s))
    return out


def angle_distance(a, b):
    """Wrap-around distance on the circle of length ``2*pi``."""
    d = np.abs(np.mod(np.asarray(a) - np.asarray(b), TWO_PI))
    return np.minimum(d, TWO_PI - d)


@dataclass(frozen=True)
class Divisor:
    """Cone points ``(label, beta)`` prescribing the singular conformal class."""

    entries: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        entries = tuple((str(lbl), float(b)) for lbl, b in self.entries)
        object.__setattr__(self, "entries", entries)
        labels = [lbl for lbl, _ in entries]
        if len(set(labels)) != len(labels):
            raise ValueError("cone point labels must be distinct")
        if len(entries) > MAX_POINTS:
            raise ValueError(f"at most {MAX_POINTS} cone points are supported")
        for lbl, b in entries:
            if not b > -1.0:
                raise DomainError(f"order of {lbl!r} must exceed -1, got {b}")

    @property
    def betas(self) -> tuple[float, ...]:
        return tuple(b for _, b in self.entries)

    def cone_angle(self, label: str) -> float:
        return TWO_PI * (dict(self.entries)[label] + 1.0)

    def euler(self, chi: float = 2.0) -> float:
        """``chi(S) + sum(beta_i)``; the sphere is the default topology."""
        return chi + sum(self.betas)


@dataclass(frozen=True)
class ConeChart:
    """Chart at one cone point, truncated at ``rho = 2**-k_max``."""

    beta: float
    k_max: int

    def __post_init__(self):
        _check_beta(self.beta)
        if int(self.k_max) != self.k_max or self.k_max < 1:
            raise ValueError(f"k_max must be a positive integer, got {self.k_max}")
        object.__setattr__(self, "k_max", int(self.k_max))

    @property
    def rho_cut(self) -> float:
        return math.ldexp(1.0, -self.k_max)

    @property
    def sigma(self) -> float:
        return -1.0 / (self.beta + 1.0)

    @property
    def cone_angle(self) -> float:
        return TWO_PI * (self.beta + 1.0)


@dataclass(frozen=True)
class GridSpec:
    """Uniform ``(w, theta)`` grid on ``[w_min, w_max] x [0, 2*pi)``."""

    w_min: float
    w_max: float
    n_w: int
    n_theta: int
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_w < 8 or self.n_theta < 8:
            raise ValueError("need at least 8 samples in each direction")
        if not self.w_max > self.w_min:
            raise ValueError("w_max must exceed w_min")
        if not self.w_min < 0:
            raise ValueError("w_min must be negative")

    @classmethod
    def for_chart(cls, chart: ConeChart, w_max: float, n_w: int, n_theta: int) -> "GridSpec":
        return cls(float(-chart.k_max), float(w_max), int(n_w), int(n_theta))

    @property
    def h_w(self) -> float:
        return (self.w_max - self.w_min) / (self.n_w - 1)

    @property
    def h_theta(self) -> float:
        return TWO_PI / self.n_theta

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_w, self.n_theta)

    @property
    def w(self) -> np.ndarray:
        if "w" not in self._cache:
            self._cache["w"] = np.linspace(self.w_min, self.w_max, self.n_w)
        return self._cache["w"]

    @property
    def theta(self) -> np.ndarray:
        return np.arange(self.n_theta) * self.h_theta

    @property
    def rho(self) -> np.ndarray:
        return np.exp2(self.w)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """``(W, THETA)`` arrays of shape ``(n_w, n_theta)``."""
        return np.meshgrid(self.w, self.theta, indexing="ij")

    def index_of_w(self, w: float, tol: float = 1e-9) -> int:
        """Index of the grid node at ``w``; raises if ``w`` is not a node."""
        x = (w - self.w_min) / self.h_w
        i = int(round(x))
        if abs(x - i) > tol or not 0 <= i < self.n_w:
            raise ValueError(f"w={w} is not a grid node")
        return i

    def restrict(self, i0: int, i1: int | None = None) -> "GridSpec":
        """Sub-grid of radial rows ``i0:i1``."""
        i1 = self.n_w if i1 is None else i1
        w = self.w
        return GridSpec(float(w[i0]), float(w[i1 - 1]), i1 - i0, self.n_theta)
