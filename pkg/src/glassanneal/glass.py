"""Direct simulation of SK and spherical p-spin glasses.

Conventions
-----------
* Couplings are a dense ``(n,)*p`` array of i.i.d. standard normals over
  *ordered* index tuples, repeated indices included.
* ``H_p(s) = -n**(-(p-1)/2) * sum J[i1..ip] s[i1]...s[ip]`` on the sphere
  ``|s|**2 = n``.  Its covariance is ``n * xi(s.t/n)`` with ``xi(q) = q**p``.
* SK energies exclude the diagonal, ``H(s) = -n**-0.5 * sum_{i != j} J_ij s_i s_j``.
* Binary state ``k`` in an enumeration has ``s_i = +1`` when bit ``i`` of ``k``
  is clear and ``-1`` otherwise.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal, Sequence

import numpy as np
from scipy import stats
from scipy.special import logsumexp

from . import rft
from .errors import DimensionMismatchError, DivergedError, ResourceBoundError, UsageError
from .parallel import derive_seed, ordered_map, philox

MAX_COUPLING_VALUES = 2**25
DENSE_BOUND = 512
ENUMERATION_BOUND = 24
DIVERGENCE_THRESHOLD = 1e6


@dataclass(eq=False)
class CouplingTensor:
    n: int
    p: int
    values: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.n,) * self.p:
            raise DimensionMismatchError(
                f"coupling values have shape {self.values.shape}, expected {(self.n,) * self.p}"
            )

    @property
    def scale(self) -> float:
        return self.n ** (-(self.p - 1) / 2)

    @cached_property
    def symmetric(self) -> np.ndarray:
        """Average of the couplings over all index permutations."""
        perms = list(itertools.permutations(range(self.p)))
        acc = np.zeros_like(self.values)
        for perm in perms:
            acc += self.values.transpose(perm)
        return acc / len(perms)


@dataclass
class SpinConfiguration:
    sigma: np.ndarray
    kind: Literal["binary", "spherical"] = "spherical"

    def __post_init__(self):
        self.sigma = np.asarray(self.sigma, dtype=float)
        if self.kind == "binary":
            if not np.all(np.abs(self.sigma) == 1):
                raise UsageError("binary spins must be +1 or -1")
        elif self.kind == "spherical":
            n = self.sigma.size
            if abs(float(self.sigma @ self.sigma) - n) > 1e-9 * max(1, n):
                raise UsageError("spherical configuration must satisfy sum(s**2) = n")
        else:
            raise UsageError(f"unknown spin kind {self.kind!r}")

    @property
    def n(self) -> int:
        return self.sigma.size


@dataclass
class GibbsEnsemble:
    beta: float
    couplings: CouplingTensor

    def __post_init__(self):
        if not self.beta > 0:
            raise UsageError(f"beta must be positive, got {self.beta}")
        if self.couplings.n > ENUMERATION_BOUND:
            raise ResourceBoundError(
                f"enumeration needs n <= {ENUMERATION_BOUND}, got n={self.couplings.n}",
                bound="enumeration",
            )

    @property
    def n(self) -> int:
        return self.couplings.n


@dataclass
class GibbsResult:
    log_z: float
    probabilities: np.ndarray
    free_energy: float
    ground_energy: float

    @property
    def z(self) -> float:
        return math.exp(self.log_z) if self.log_z < 709 else math.inf


@dataclass
class Trajectory:
    steps: np.ndarray
    eps: np.ndarray
    grad_norm: np.ndarray
    sigmas: np.ndarray | None
    final_sigma: np.ndarray


@dataclass
class IndexSample:
    eps: float
    alpha_hat: float
    lambda_bar_hat: float
    eigenvalues: np.ndarray = field(repr=False)


@dataclass
class CovarianceRow:
    overlap: float
    empirical: float
    theory: float
    stderr: float
    z: float


# --------------------------------------------------------------------------- sampling


def sample_couplings(n: int, p: int, seed: int, *, max_values: int = MAX_COUPLING_VALUES) -> CouplingTensor:
    if n < 2 or p < 2:
        raise UsageError(f"need n >= 2 and p >= 2, got n={n}, p={p}")
    count = n**p
    if count > max_values:
        raise ResourceBoundError(
            f"n**p = {count} couplings exceeds the memory budget of {max_values} values",
            bound="couplings",
        )
    values = philox(seed).standard_normal(count).reshape((n,) * p)
    return CouplingTensor(n, p, values, seed)


def random_sphere_point(n: int, seed: int | np.random.Generator) -> np.ndarray:
    rng = seed if isinstance(seed, np.random.Generator) else philox(seed)
    return project_to_sphere(rng.standard_normal(n))


def seeded_instance(n: int, p: int, root_seed: int) -> tuple[CouplingTensor, np.ndarray]:
    """Couplings and a starting point drawn from streams derived from one root seed."""
    J = sample_couplings(n, p, derive_seed(root_seed, "couplings"))
    return J, random_sphere_point(n, derive_seed(root_seed, "init"))


def project_to_sphere(x: np.ndarray) -> np.ndarray:
    """Rescale onto the radius-sqrt(n) sphere (the Euclidean projection)."""
    x = np.asarray(x, dtype=float)
    return x * (math.sqrt(x.size) / np.linalg.norm(x))


def sample_goe(n: int, seed: int) -> np.ndarray:
    """GOE matrix with off-diagonal variance 1/n and diagonal variance 2/n."""
    if n < 2:
        raise UsageError("GOE needs n >= 2")
    g = philox(seed).standard_normal((n, n))
    return (g + g.T) / math.sqrt(2 * n)


def spectrum(matrix: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh(np.asarray(matrix, dtype=float))


def semicircle_ks(eigenvalues: np.ndarray, f2: float = 1.0) -> float:
    """Kolmogorov-Smirnov distance between an empirical spectrum and the semicircle."""
    return float(stats.kstest(eigenvalues, lambda x: rft.semicircle_cdf(x, f2)).statistic)


# --------------------------------------------------------------------------- energies


def _sigma_array(sigma) -> np.ndarray:
    return sigma.sigma if isinstance(sigma, SpinConfiguration) else np.asarray(sigma, dtype=float)


def _check_dims(J: CouplingTensor, s: np.ndarray) -> None:
    if s.shape != (J.n,):
        raise DimensionMismatchError(f"configuration has shape {s.shape}, couplings need ({J.n},)")


def _contract(T: np.ndarray, s: np.ndarray, times: int) -> np.ndarray:
    for _ in range(times):
        T = T @ s
    return T


def hamiltonian_p_spin(J: CouplingTensor, sigma) -> float:
    s = _sigma_array(sigma)
    _check_dims(J, s)
    return float(-J.scale * _contract(J.values, s, J.p))


def hamiltonian_sk(J: CouplingTensor, sigma) -> float:
    if J.p != 2:
        raise UsageError("SK energy needs pairwise couplings (p = 2)")
    if not isinstance(sigma, SpinConfiguration):
        sigma = SpinConfiguration(sigma, "binary")
    if sigma.kind != "binary":
        raise UsageError("SK energy needs a binary configuration")
    s = sigma.sigma
    _check_dims(J, s)
    # s_i**2 = 1, so the diagonal contributes exactly trace(J)
    return float(-(s @ J.values @ s - np.trace(J.values)) / math.sqrt(J.n))


def sk_energies(J: CouplingTensor, states: np.ndarray) -> np.ndarray:
    """SK energies for a batch of binary configurations (rows of ``states``)."""
    quad = np.einsum("si,ij,sj->s", states, J.values, states)
    return -(quad - np.trace(J.values)) / math.sqrt(J.n)


def euclidean_gradient(J: CouplingTensor, sigma) -> np.ndarray:
    s = _sigma_array(sigma)
    _check_dims(J, s)
    return -J.scale * J.p * _contract(J.symmetric, s, J.p - 1)


def riemannian_gradient(J: CouplingTensor, sigma) -> np.ndarray:
    s = _sigma_array(sigma)
    g = euclidean_gradient(J, s)
    return g - (g @ s / s.size) * s


def hessian(J: CouplingTensor, sigma, *, bound: int = DENSE_BOUND) -> np.ndarray:
    s = _sigma_array(sigma)
    _check_dims(J, s)
    if J.n > bound:
        raise ResourceBoundError(f"dense Hessian needs n <= {bound}, got n={J.n}", bound="dense")
    h = -J.scale * J.p * (J.p - 1) * _contract(J.symmetric, s, J.p - 2)
    return 0.5 * (h + h.T)


def tangent_basis(sigma: np.ndarray) -> np.ndarray:
    """Orthonormal ``n x (n-1)`` basis of the tangent space at ``sigma``."""
    q, _ = np.linalg.qr(np.asarray(sigma, dtype=float)[:, None], mode="complete")
    return q[:, 1:]


def riemannian_hessian(J: CouplingTensor, sigma, *, bound: int = DENSE_BOUND) -> np.ndarray:
    """Tangent-space Hessian ``B^T (d2H - (s.dH / n) I) B`` of size ``n-1``."""
    s = _sigma_array(sigma)
    h = hessian(J, s, bound=bound)
    radial = euclidean_gradient(J, s) @ s / s.size
    B = tangent_basis(s)
    rh = B.T @ h @ B - radial * np.eye(s.size - 1)
    return 0.5 * (rh + rh.T)


def empirical_index_energy(
    J: CouplingTensor, sigma, *, tangent: bool = True, bound: int = DENSE_BOUND
) -> IndexSample:
    """Energy per site, negative-eigenvalue fraction and mean eigenvalue at ``sigma``."""
    s = _sigma_array(sigma)
    mat = riemannian_hessian(J, s, bound=bound) if tangent else hessian(J, s, bound=bound)
    eig = spectrum(mat)
    dim = eig.size
    return IndexSample(
        eps=hamiltonian_p_spin(J, s) / J.n,
        alpha_hat=float(np.count_nonzero(eig < 0)) / dim,
        lambda_bar_hat=float(np.trace(mat)) / dim,
        eigenvalues=eig,
    )


# --------------------------------------------------------------------------- Gibbs


def enumerate_gibbs(ens: GibbsEnsemble, *, chunk: int = 1 << 16) -> GibbsResult:
    """Exact Gibbs measure of one SK disorder realisation by full enumeration."""
    J = ens.couplings
    if J.p != 2:
        raise UsageError("enumeration is implemented for the SK (p = 2) model")
    n = J.n
    total = 1 << n
    bits = np.arange(n)
    energies = np.empty(total)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        states = 1.0 - 2.0 * ((idx[:, None] >> bits) & 1)
        energies[start : start + idx.size] = sk_energies(J, states)
    weights = -ens.beta * energies
    log_z = float(logsumexp(weights))
    probs = np.exp(weights - log_z)
    return GibbsResult(
        log_z=log_z,
        probabilities=probs,
        free_energy=log_z / (n * ens.beta),
        ground_energy=float(energies.min()),
    )


# --------------------------------------------------------------------------- descent


def spherical_descent(
    J: CouplingTensor,
    sigma0,
    steps: int,
    lr: float,
    l2: float = 0.0,
    *,
    gradient: Literal["riemannian", "euclidean"] = "riemannian",
    keep_sigmas: bool = True,
) -> Trajectory:
    """Projected gradient descent on ``H + l2 * |s|**2`` over the sphere.

    Row ``k`` of the trajectory holds the energy and gradient norm at the
    point where step ``k`` is taken.  With the default Riemannian gradient the
    L2 term is constant on the sphere and drops out; ``gradient="euclidean"``
    takes the plain step on the full objective before rescaling, as in the
    annealing loops.
    """
    s = project_to_sphere(_sigma_array(sigma0))
    _check_dims(J, s)
    if lr < 0 or l2 < 0:
        raise UsageError("lr and l2 must be nonnegative")
    n = J.n
    eps = np.empty(steps)
    gnorm = np.empty(steps)
    sigmas = np.empty((steps, n)) if keep_sigmas else None
    for k in range(steps):
        e = hamiltonian_p_spin(J, s) / n
        if not abs(e) <= DIVERGENCE_THRESHOLD:
            raise DivergedError(f"energy per site {e} left the finite regime at step {k}")
        g = euclidean_gradient(J, s) + 2 * l2 * s
        if gradient == "riemannian":
            g = g - (g @ s / n) * s
        eps[k] = e
        gnorm[k] = np.linalg.norm(g)
        if sigmas is not None:
            sigmas[k] = s
        s = project_to_sphere(s - lr * g)
    return Trajectory(np.arange(steps), eps, gnorm, sigmas, s)


def converge_to_minimum(
    J: CouplingTensor,
    sigma0,
    *,
    lr: float = 0.05,
    descent_steps: int = 2000,
    tol: float = 1e-6,
    newton_steps: int = 50,
) -> np.ndarray:
    """Descend to a local minimum and polish it with Riemannian Newton steps.

    Newton steps are only accepted while the tangent Hessian is positive
    definite; otherwise plain descent continues.  Raises ``DivergedError`` if
    the Riemannian gradient norm never drops below ``tol``.
    """
    s = spherical_descent(J, sigma0, descent_steps, lr, keep_sigmas=False).final_sigma
    for _ in range(newton_steps):
        g = riemannian_gradient(J, s)
        if np.linalg.norm(g) < tol:
            return s
        B = tangent_basis(s)
        rh = riemannian_hessian(J, s)
        w, v = np.linalg.eigh(rh)
        if w[0] > 0:
            step = v @ ((v.T @ (B.T @ g)) / w)
            s = project_to_sphere(s - B @ step)
        else:
            s = spherical_descent(J, s, 200, lr, keep_sigmas=False).final_sigma
    if np.linalg.norm(riemannian_gradient(J, s)) < tol:
        return s
    raise DivergedError("did not reach a critical point within the step budget")


# --------------------------------------------------------------------------- covariance


def _pair_at_overlap(sigma: np.ndarray, q: float, rng: np.random.Generator) -> np.ndarray:
    n = sigma.size
    w = rng.standard_normal(n)
    w -= (w @ sigma / n) * sigma
    w *= math.sqrt(n) / np.linalg.norm(w)
    return q * sigma + math.sqrt(max(0.0, 1 - q * q)) * w


def covariance_check(
    n: int,
    p: int,
    samples: int,
    seed: int,
    overlaps: Sequence[float] = (-1.0, -0.5, 0.0, 0.5, 1.0),
    *,
    chunk: int = 500,
) -> list[CovarianceRow]:
    """Monte Carlo estimate of ``E[H(s) H(t)] / n`` over disorder at fixed overlaps."""
    if samples < 100:
        raise UsageError("covariance check needs at least 100 disorder samples")
    if n**p > MAX_COUPLING_VALUES:
        raise ResourceBoundError(f"n**p = {n**p} exceeds the coupling budget", bound="couplings")
    root = np.random.SeedSequence(seed)
    config_seq, disorder_seq = root.spawn(2)
    rng = philox(config_seq)
    sigma = random_sphere_point(n, rng)
    taus = [_pair_at_overlap(sigma, q, rng) for q in overlaps]
    configs = [sigma] + taus

    def outer_power(x):
        t = x
        for _ in range(p - 1):
            t = np.multiply.outer(t, x)
        return t.ravel()

    design = np.stack([outer_power(x) for x in configs], axis=1)
    scale = n ** (-(p - 1) / 2)
    n_chunks = -(-samples // chunk)
    seqs = disorder_seq.spawn(n_chunks)

    def run(i):
        size = min(chunk, samples - i * chunk)
        Jb = philox(seqs[i]).standard_normal((size, n**p))
        H = -scale * (Jb @ design)
        return H[:, :1] * H[:, 1:] / n

    prods = np.concatenate(ordered_map(run, range(n_chunks)), axis=0)
    cov = rft.covariance_from_mixture([(p, 1.0)])
    rows = []
    for j, q in enumerate(overlaps):
        qq = float(sigma @ taus[j]) / n
        col = prods[:, j]
        mean = float(col.mean())
        se = float(col.std(ddof=1) / math.sqrt(col.size))
        theory = float(cov.xi(qq))
        z = (mean - theory) / se if se > 0 else 0.0
        rows.append(CovarianceRow(overlap=qq, empirical=mean, theory=theory, stderr=se, z=z))
    return rows
