"""Closed-form landscape theory for isotropic Gaussian fields on the sphere.

A mixed spherical spin glass with mixture ``xi(q) = sum_p gamma_p q**p`` is an
isotropic Gaussian field whose covariance is ``N f((x - y)**2 / 2N)`` with
``f(u) = xi(1 - u)``.  Everything here follows from ``f(0)``, ``f'(0)`` and
``f''(0)``: the index/energy relations, the quadratic log-complexity and its
gradient.

All functions are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateConstantsError,
    InvalidCovarianceError,
    InvalidMixtureError,
    OutOfBandError,
    OutOfSupportError,
)

__all__ = [
    "CovarianceModel",
    "LandscapeConstants",
    "ComplexityPoint",
    "covariance_from_mixture",
    "landscape_constants",
    "semicircle_density",
    "semicircle_cdf",
    "index_from_mean_eigenvalue",
    "index_from_energy",
    "most_likely_mean_eigenvalue",
    "psi",
    "complexity",
    "complexity_psi_form",
    "complexity_gradient",
    "effective_lr_factor",
    "convexifying_strength",
    "count_to_complexity",
    "parse_mixture",
]


@dataclass(frozen=True)
class CovarianceModel:
    """Covariance function summary: mixture weights and f(0), f'(0), f''(0)."""

    mixture: tuple[tuple[int, float], ...]
    f0: float
    f1: float
    f2: float

    def __post_init__(self):
        if not (self.f0 > 0 and self.f1 < 0 and self.f2 > 0):
            raise InvalidCovarianceError(
                f"need f0 > 0, f1 < 0, f2 > 0; got f0={self.f0}, f1={self.f1}, f2={self.f2}"
            )
        if self.mixture:
            f0, f1, f2 = _mixture_derivatives(self.mixture)
            if (f0, f1, f2) != (self.f0, self.f1, self.f2):
                raise InvalidCovarianceError("stored f0, f1, f2 disagree with the mixture")

    def xi(self, q):
        """Mixture polynomial ``xi(q)``; the covariance of H/N at overlap q."""
        q = np.asarray(q, dtype=float)
        return sum(g * q**p for p, g in self.mixture)


@dataclass(frozen=True)
class LandscapeConstants:
    P: float
    Q: float
    eps_c: float
    C1: float
    C2: float
    M: np.ndarray = field(repr=False)
    P_N: float | None = None
    Q_N: float | None = None
    n: int | None = None


@dataclass(frozen=True)
class ComplexityPoint:
    """``u = (eps, lambda_bar)``: per-site energy and mean Hessian eigenvalue."""

    eps: float
    lambda_bar: float

    def as_array(self) -> np.ndarray:
        return np.array([self.eps, self.lambda_bar], dtype=float)


def _mixture_derivatives(mixture: Iterable[tuple[int, float]]) -> tuple[float, float, float]:
    # f(u) = xi(1 - u): f(0) = xi(1), f'(0) = -xi'(1), f''(0) = xi''(1)
    f0 = f1 = f2 = 0.0
    for p, g in mixture:
        f0 += g
        f1 -= g * p
        f2 += g * p * (p - 1)
    return f0, f1, f2


def covariance_from_mixture(mixture: Sequence[tuple[int, float]]) -> CovarianceModel:
    """Build the covariance summary of the mixed p-spin model ``sum gamma_p H_p``.

    >>> covariance_from_mixture([(3, 1.0)])
    CovarianceModel(mixture=((3, 1.0),), f0=1.0, f1=-3.0, f2=6.0)
    """
    items = [(p, g) for p, g in mixture]
    if not items:
        raise InvalidMixtureError("mixture is empty")
    clean = []
    for p, g in items:
        if isinstance(p, bool) or int(p) != p or p < 2:
            raise InvalidMixtureError(f"every degree must be an integer p >= 2, got p={p}")
        g = float(g)
        if not math.isfinite(g) or g < 0:
            raise InvalidMixtureError(f"every weight must be a finite gamma >= 0, got {g} for p={p}")
        clean.append((int(p), g))
    if not any(g > 0 for _, g in clean):
        raise InvalidMixtureError("at least one mixture weight must be positive")
    f0, f1, f2 = _mixture_derivatives(clean)
    return CovarianceModel(tuple(clean), f0, f1, f2)


def parse_mixture(text: str) -> CovarianceModel:
    """Parse ``"3:1.0"`` or ``"2:0.5,4:0.5"`` into a covariance model."""
    items = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            p_txt, g_txt = chunk.split(":")
            p = float(p_txt)
            g = float(g_txt)
        except ValueError:
            raise InvalidMixtureError(f"cannot parse mixture term {chunk!r}; expected p:weight") from None
        if p != int(p):
            raise InvalidMixtureError(f"every degree must be an integer p >= 2, got p={p_txt}")
        items.append((int(p), g))
    return covariance_from_mixture(items)


def landscape_constants(cov: CovarianceModel, n: int | None = None) -> LandscapeConstants:
    """Derived constants P, Q, eps_c, C1, C2 and the quadratic-form matrix M.

    C1 is the large-N limit, where the sphere's surface term ``V**(2/N)``
    tends to ``2*pi*e`` and cancels the explicit ``2*pi*e``.
    """
    f0, f1, f2 = cov.f0, cov.f1, cov.f2
    a = f0 / f2
    b = (f1 / f2) ** 2
    P = a + b
    Q = a - b
    if Q == 0:
        raise DegenerateConstantsError("Q = 0: the complexity quadratic form is undefined")
    eps_c = P * f2**1.5 / f1
    C1 = 0.5 * math.log(f2 / abs(f1))
    C2 = 1.0 / (f2 * Q)
    cross = -f1 / f2
    M = np.array([[1.0, cross], [cross, P / 2]])
    P_N = Q_N = None
    if n is not None:
        if n < 3:
            raise ValueError("finite-N constants need n >= 3")
        P_N = (1 - 2 / n) * a + b
        Q_N = (1 + 2 / n) * a - b
    return LandscapeConstants(P=P, Q=Q, eps_c=eps_c, C1=C1, C2=C2, M=M, P_N=P_N, Q_N=Q_N, n=n)


def _check_f2(f2: float) -> None:
    if not f2 > 0:
        raise InvalidCovarianceError(f"f2 must be positive, got {f2}")


def semicircle_density(lam, f2: float):
    """Wigner semicircle density with support ``[-2 sqrt(f2), 2 sqrt(f2)]``."""
    _check_f2(f2)
    lam = np.asarray(lam, dtype=float)
    inside = np.clip(4 * f2 - lam**2, 0.0, None)
    out = np.sqrt(inside) / (2 * math.pi * f2)
    return float(out) if out.ndim == 0 else out


def _upper_mass(x):
    # (2/pi) * integral_x^1 sqrt(1 - t^2) dt for x in [-1, 1]
    return (np.arccos(x) - x * np.sqrt(1 - x * x)) / math.pi


def semicircle_cdf(lam, f2: float):
    """Cumulative distribution of the semicircle law (clamped outside support)."""
    _check_f2(f2)
    x = np.clip(np.asarray(lam, dtype=float) / (2 * math.sqrt(f2)), -1.0, 1.0)
    out = 1.0 - _upper_mass(x)
    return float(out) if out.ndim == 0 else out


def index_from_mean_eigenvalue(lambda_bar, f2: float, *, strict: bool = True):
    """Fraction of negative eigenvalues of a semicircle spectrum centred at ``lambda_bar``.

    With ``strict=False`` mean eigenvalues outside the support are clamped to
    its edge instead of raising; finite-N Hessians routinely land there.
    """
    _check_f2(f2)
    x = np.asarray(lambda_bar, dtype=float) / (2 * math.sqrt(f2))
    if np.any(np.abs(x) > 1):
        if strict:
            raise OutOfSupportError(
                f"|lambda_bar| exceeds the semicircle edge 2*sqrt(f2) = {2 * math.sqrt(f2):.6g}"
            )
        x = np.clip(x, -1.0, 1.0)
    out = _upper_mass(x)
    return float(out) if out.ndim == 0 else out


def index_from_energy(eps, consts: LandscapeConstants):
    """Most likely index fraction at per-site energy ``eps``.

    Zero at ``eps_c``, one half at zero energy, one at ``-eps_c``.
    """
    x = np.asarray(eps, dtype=float) / consts.eps_c
    if np.any(np.abs(x) > 1):
        raise OutOfBandError(
            f"energy outside [eps_c, -eps_c] = [{consts.eps_c:.6g}, {-consts.eps_c:.6g}]"
        )
    out = _upper_mass(x)
    return float(out) if out.ndim == 0 else out


def most_likely_mean_eigenvalue(eps, consts: LandscapeConstants, cov: CovarianceModel):
    """Mean Hessian eigenvalue that minimises psi at fixed energy; linear in eps."""
    out = 2 * cov.f1 * np.asarray(eps, dtype=float) / (cov.f2 * consts.P)
    return float(out) if out.ndim == 0 else out


def psi(lambda_bar, eps, consts: LandscapeConstants, cov: CovarianceModel):
    """The quadratic part of the log-complexity in ``(eps, lambda_bar)``."""
    return eps**2 - 2 * (cov.f1 / cov.f2) * eps * lambda_bar + 0.5 * consts.P * lambda_bar**2


def _as_u(u) -> np.ndarray:
    if isinstance(u, ComplexityPoint):
        return u.as_array()
    return np.asarray(u, dtype=float)


def complexity(u, consts: LandscapeConstants, cov: CovarianceModel | None = None) -> float:
    """Quadratic log-complexity ``C1 - C2 * u^T M u / 2``."""
    v = _as_u(u)
    return consts.C1 - 0.5 * consts.C2 * float(v @ consts.M @ v)


def complexity_psi_form(u, consts: LandscapeConstants, cov: CovarianceModel) -> float:
    """Same surface written as ``C1 - psi / (2 f''(0) Q)``; kept as an independent path."""
    v = _as_u(u)
    return consts.C1 - psi(v[1], v[0], consts, cov) / (2 * cov.f2 * consts.Q)


def complexity_gradient(u, consts: LandscapeConstants) -> np.ndarray:
    """Exact gradient ``-C2 M u`` of :func:`complexity` with respect to ``(eps, lambda_bar)``."""
    return -consts.C2 * (consts.M @ _as_u(u))


def effective_lr_factor(cov: CovarianceModel) -> float:
    """Factor by which the energy slope of psi exceeds eps itself (always > 1)."""
    return 1 + 2 / (1 + cov.f0 * cov.f2 / cov.f1**2)


def convexifying_strength(eps: float, consts: LandscapeConstants, cov: CovarianceModel) -> float:
    """Smallest L2 coefficient whose ``2*lam*I`` Hessian shift gives expected index zero."""
    if not consts.eps_c <= eps <= 0:
        raise OutOfBandError(f"eps must lie in [eps_c, 0] = [{consts.eps_c:.6g}, 0], got {eps}")
    # (2 sqrt(f2) - lambda_bar(eps)) / 2, using lambda_bar(eps) = 2 sqrt(f2) eps / eps_c
    return math.sqrt(cov.f2) * (1 - eps / consts.eps_c)


def count_to_complexity(count: float, n: int) -> float:
    if count < 1:
        raise ValueError(f"critical point count must be >= 1, got {count}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return math.log(count) / n
