"""Archetype energy densities on 2x2 matrices and their symmetry groups.

Built-in kinds:

* ``isotropic-neo-hookean``   W(B) = |B|^2 + (det B - 1)^2
* ``isotropic-distance``      W(B) = dist^2(B, SO(2))
* ``n-fold-discrete(n)``      W(B) = sum_k (|B v_k| - 1)^2 + (det B - 1)^2
  with the n directions v_k = (cos(k*pi/n), sin(k*pi/n)); together with
  their negatives these form 2n equally spaced unit vectors, so the
  rotational symmetry group is cyclic of order 2n (square for n = 2,
  hexagonal for n = 3).

All evaluators are vectorized over leading axes.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, InconsistentGroupError, InfeasiblePointError
from .geometry import det2, frobenius, polar_rotation, rotation

TWO_PI = 2.0 * np.pi


def _cof(B):
    """d det(B) / dB for 2x2 matrices."""
    out = np.empty_like(B)
    out[..., 0, 0] = B[..., 1, 1]
    out[..., 0, 1] = -B[..., 1, 0]
    out[..., 1, 0] = -B[..., 0, 1]
    out[..., 1, 1] = B[..., 0, 0]
    return out


@dataclass(frozen=True)
class Archetype:
    """Energy density on 2x2 matrices with optional analytic gradient."""

    kind: str
    w: Callable
    grad: Optional[Callable] = None
    n: Optional[int] = None

    def __call__(self, B):
        return self.w(np.asarray(B, dtype=float))

    @property
    def label(self) -> str:
        return self.kind if self.n is None else f"{self.kind}({self.n})"


def neo_hookean() -> Archetype:
    def w(B):
        return np.sum(B * B, axis=(-2, -1)) + (det2(B) - 1.0) ** 2

    def grad(B):
        return 2.0 * B + 2.0 * (det2(B) - 1.0)[..., None, None] * _cof(B)

    return Archetype("isotropic-neo-hookean", w, grad)


def distance_squared() -> Archetype:
    """Squared Frobenius distance to SO(2).

    dist^2(B, SO(2)) = |B|^2 + 2 - 2*sqrt(c^2 + s^2) with c = tr B and
    s = B10 - B01; the gradient is 2(B - R*(B)) by the envelope theorem.
    """

    def w(B):
        c = B[..., 0, 0] + B[..., 1, 1]
        s = B[..., 1, 0] - B[..., 0, 1]
        return np.sum(B * B, axis=(-2, -1)) + 2.0 - 2.0 * np.hypot(c, s)

    def grad(B):
        return 2.0 * (B - polar_rotation(B))

    return Archetype("isotropic-distance", w, grad)


def n_fold(n: int) -> Archetype:
    if n < 1:
        raise ConfigError("n-fold archetype needs n >= 1")
    ang = np.arange(n) * np.pi / n
    V = np.stack([np.cos(ang), np.sin(ang)], axis=-1)  # (n, 2)

    def w(B):
        Bv = np.einsum("...ij,kj->...ki", B, V)
        r = np.linalg.norm(Bv, axis=-1)
        return np.sum((r - 1.0) ** 2, axis=-1) + (det2(B) - 1.0) ** 2

    def grad(B):
        Bv = np.einsum("...ij,kj->...ki", B, V)
        r = np.linalg.norm(Bv, axis=-1)
        if np.any(r == 0.0):
            raise InfeasiblePointError("n-fold gradient undefined where B v_k = 0")
        coef = 2.0 * (r - 1.0) / r
        out = np.einsum("...k,...ki,kj->...ij", coef, Bv, V)
        return out + 2.0 * (det2(B) - 1.0)[..., None, None] * _cof(B)

    return Archetype("n-fold-discrete", w, grad, n=n)


def make_archetype(kind: str, n: Optional[int] = None) -> Archetype:
    if kind == "isotropic-neo-hookean":
        return neo_hookean()
    if kind == "isotropic-distance":
        return distance_squared()
    if kind == "n-fold-discrete":
        if n is None:
            raise ConfigError("n-fold-discrete archetype needs 'n'")
        return n_fold(n)
    raise ConfigError(f"unknown archetype kind {kind!r}")


def eval_archetype(a: Archetype, B) -> float:
    return a(B)


def grad_archetype(a: Archetype, B, h: float = 1e-7):
    """Analytic gradient when the archetype carries one, else central FD."""
    B = np.asarray(B, dtype=float)
    if a.grad is not None:
        return a.grad(B)
    out = np.empty_like(B)
    for i in range(2):
        for j in range(2):
            E = np.zeros((2, 2))
            E[i, j] = h
            wp, wm = a(B + E), a(B - E)
            if not (np.all(np.isfinite(wp)) and np.all(np.isfinite(wm))):
                raise InfeasiblePointError("non-finite energy in FD stencil")
            out[..., i, j] = (wp - wm) / (2.0 * h)
    return out


# ---------------------------------------------------------------------------
# symmetry detection


def default_samples(seed: int = 0, count: int = 64, spread: float = 0.3):
    """Fixed-seed sample matrices Id + spread * N(0,1)."""
    rng = np.random.default_rng(seed)
    return np.eye(2) + spread * rng.standard_normal((count, 2, 2))


def symmetry_distance(a: Archetype, g, samples=None, seed: int = 0) -> float:
    """max_B |W(B g) - W(B)| over the sample set."""
    if samples is None:
        samples = default_samples(seed)
    g = np.asarray(g, dtype=float)
    return float(np.max(np.abs(a(samples @ g) - a(samples))))


@dataclass(frozen=True)
class SymmetryGroup:
    """Either all of SO(2) or the cyclic group of the listed angles."""

    kind: str  # "continuous-SO2" | "discrete-cyclic"
    order: Optional[int] = None
    angles: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("continuous-SO2", "discrete-cyclic"):
            raise ConfigError(f"unknown group kind {self.kind!r}")
        if self.kind == "discrete-cyclic":
            if self.order is None or self.order < 1:
                raise ConfigError("discrete group needs a positive order")
            ang = TWO_PI * np.arange(self.order) / self.order
            object.__setattr__(self, "angles", ang)

    @property
    def continuous(self) -> bool:
        return self.kind == "continuous-SO2"

    def elements(self):
        if self.continuous:
            raise ConfigError("SO(2) has no finite element list")
        return rotation(self.angles)


def nearest_element(grp: SymmetryGroup, M):
    """Nearest group element to M in Frobenius norm, and the distance."""
    M = np.asarray(M, dtype=float)
    if grp.continuous:
        R = polar_rotation(M)
        return R, float(frobenius(M - R))
    els = grp.elements()
    d = frobenius(M[None, :, :] - els)
    k = int(np.argmin(d))
    return els[k], float(d[k])


def detect_group(a: Archetype, resolution: int = 720, tol: float = 1e-8,
                 samples=None, seed: int = 0) -> SymmetryGroup:
    """Scan a uniform angle grid and report the rotational symmetry group.

    Returns continuous SO(2) when every grid angle passes, otherwise the
    cyclic group generated by the passing angles. Passing angles that
    are not closed under composition signal a too-loose tolerance and
    raise InconsistentGroupError. Cyclic orders not dividing
    ``resolution`` are below the grid and go undetected by design.
    """
    if resolution < 360:
        raise ConfigError("resolution must be >= 360")
    if samples is None:
        samples = default_samples(seed)
    thetas = TWO_PI * np.arange(resolution) / resolution
    g = rotation(thetas)  # (res, 2, 2)
    Bg = samples[None, :, :, :] @ g[:, None, :, :]
    d = np.max(np.abs(a(Bg) - a(samples)[None, :]), axis=1)
    passing = np.flatnonzero(d < tol)
    if passing.size == resolution:
        return SymmetryGroup("continuous-SO2")
    if passing.size == 0 or passing[0] != 0:
        raise InconsistentGroupError("identity angle failed the symmetry scan")
    # closure on the grid: passing indices must be exactly the multiples
    # of the smallest one
    m = passing.size
    if m > 1:
        step = int(passing[1])
        if m * step != resolution or not np.array_equal(passing, step * np.arange(m)):
            raise InconsistentGroupError(
                "passing angles are not closed under composition; tighten tol"
            )
    return SymmetryGroup("discrete-cyclic", order=m)


@lru_cache(maxsize=32)
def _group_cache(key):
    kind, n = key
    return detect_group(make_archetype(kind, n))


def group_of(a: Archetype) -> SymmetryGroup:
    """Detected symmetry group of a built-in archetype (cached)."""
    return _group_cache((a.kind, a.n))
