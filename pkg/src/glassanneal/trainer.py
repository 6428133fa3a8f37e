"""Desk-scale training loops for the three L2 annealing schedules.

Two targets share one loop: a spherical p-spin glass and a two-layer ReLU
network trained on teacher-student regression.  Each epoch follows the same
recipe: evaluate the loss and gradient, set ``lam_i``, step on
``L(theta) + lam_i * |theta|**2`` and rescale ``theta`` back onto the sphere
of radius ``sqrt(N_w)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Literal

import numpy as np

from . import anneal, glass, rft
from .errors import DivergedError, NonpositiveLossError, UsageError
from .parallel import derive_seed, philox

GradFn = Callable[[np.ndarray], np.ndarray]


# --------------------------------------------------------------------------- MLP


@dataclass
class MlpModel:
    """Bias-free ``d_in -> d_h -> d_out`` ReLU network with flat weights.

    Pre-activations are scaled by ``1/sqrt(fan_in)`` so unit-variance weights
    give O(1) outputs.
    """

    sizes: tuple[int, int, int]
    theta: np.ndarray

    def __post_init__(self):
        self.sizes = tuple(int(s) for s in self.sizes)
        if len(self.sizes) != 3 or min(self.sizes) < 1:
            raise UsageError(f"layer sizes must be three positive integers, got {self.sizes}")
        self.theta = np.asarray(self.theta, dtype=float)
        if self.theta.shape != (self.n_weights,):
            raise UsageError(f"theta has shape {self.theta.shape}, expected ({self.n_weights},)")

    @property
    def n_weights(self) -> int:
        d, h, o = self.sizes
        return d * h + h * o

    def unpack(self, theta: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
        d, h, o = self.sizes
        t = self.theta if theta is None else theta
        return t[: d * h].reshape(h, d), t[d * h :].reshape(o, h)

    def forward(self, x: np.ndarray) -> np.ndarray:
        W1, W2 = self.unpack()
        d, h, _ = self.sizes
        a = np.maximum(x @ W1.T / math.sqrt(d), 0.0)
        return a @ W2.T / math.sqrt(h)

    def pre_activations(self, x: np.ndarray) -> np.ndarray:
        W1, _ = self.unpack()
        return x @ W1.T / math.sqrt(self.sizes[0])


@dataclass
class Batch:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
        self.y = np.asarray(self.y, dtype=float).reshape(self.x.shape[0], -1)

    def __len__(self) -> int:
        return self.x.shape[0]

    def subset(self, idx) -> "Batch":
        return Batch(self.x[idx], self.y[idx])


def init_spherical_weights(layer_sizes, seed: int) -> MlpModel:
    d, h, o = (int(s) for s in layer_sizes)
    theta = glass.random_sphere_point(d * h + h * o, seed)
    return MlpModel((d, h, o), theta)


def teacher_student_data(
    d_in: int, d_hidden: int, d_out: int, samples: int, noise: float, seed: int
) -> Batch:
    """Gaussian inputs labelled by a random spherical teacher of the same shape."""
    teacher = init_spherical_weights((d_in, d_hidden, d_out), derive_seed(seed, "teacher"))
    rng = philox(derive_seed(seed, "data"))
    x = rng.standard_normal((samples, d_in))
    y = teacher.forward(x)
    if noise > 0:
        y = y + noise * rng.standard_normal(y.shape)
    return Batch(x, y)


def mlp_loss_and_grad(model: MlpModel, batch: Batch) -> tuple[float, np.ndarray]:
    """Mean squared error over samples and outputs, with its exact gradient."""
    x, y = batch.x, batch.y
    d, h, o = model.sizes
    if x.shape[1] != d or y.shape[1] != o:
        raise UsageError(f"batch shapes {x.shape}, {y.shape} do not match layer sizes {model.sizes}")
    if len(batch) == 0:
        raise UsageError("batch is empty")
    W1, W2 = model.unpack()
    sd, sh = math.sqrt(d), math.sqrt(h)
    z = x @ W1.T / sd
    a = np.maximum(z, 0.0)
    out = a @ W2.T / sh
    r = out - y
    count = r.size
    loss = float(np.sum(r * r) / count)
    dout = 2.0 * r / count
    gW2 = dout.T @ a / sh
    dz = (dout @ W2 / sh) * (z > 0)
    gW1 = dz.T @ x / sd
    return loss, np.concatenate([gW1.ravel(), gW2.ravel()])


def _mlp_grad_fn(model: MlpModel, batch: Batch) -> GradFn:
    def grad(theta):
        return mlp_loss_and_grad(MlpModel(model.sizes, theta), batch)[1]

    return grad


# --------------------------------------------------------------------------- trace


def hutchinson_trace_fn(grad_fn: GradFn, theta: np.ndarray, probes: int, seed: int, step: float = 1e-4) -> float:
    """Hutchinson trace estimate with Hessian-vector products from gradient differences."""
    if probes < 1:
        raise UsageError("need at least one probe")
    theta = np.asarray(theta, dtype=float)
    rng = philox(seed)
    total = 0.0
    for _ in range(probes):
        z = rng.integers(0, 2, theta.size) * 2.0 - 1.0
        hz = (grad_fn(theta + step * z) - grad_fn(theta - step * z)) / (2 * step)
        total += float(z @ hz)
    return total / probes


def hutchinson_trace(model: MlpModel, batch: Batch, probes: int, seed: int, step: float = 1e-4) -> float:
    return hutchinson_trace_fn(_mlp_grad_fn(model, batch), model.theta, probes, seed, step)


# --------------------------------------------------------------------------- config


@dataclass
class TrainConfig:
    target: Literal["glass", "mlp"] = "mlp"
    algo: anneal.Algo = "fixed"
    lambda0: float = 5e-4
    lr: float = 1e-2
    epochs: int = 100
    seed: int = 0
    K: int = 5
    warmup: int | None = None
    T: int = 10
    smoothing: anneal.SmoothingKind = "exponential"
    schedule: Literal["constant", "cosine", "power"] = "constant"
    signed_m_step: bool = False
    normalized_cosine: bool = False
    d_in: int = 8
    d_hidden: int = 16
    d_out: int = 1
    samples: int = 256
    noise: float = 0.0
    batch_size: int | None = None
    glass_n: int = 64
    glass_p: int = 3
    loss_shift: float | None = None
    trace_probes: int = 4
    index_every: int = 0

    def __post_init__(self):
        if self.target not in ("glass", "mlp"):
            raise UsageError(f"unknown target {self.target!r}")
        if self.algo not in ("matched", "cosine", "two-step", "fixed"):
            raise UsageError(f"unknown algorithm {self.algo!r}")
        if self.schedule not in ("constant", "cosine", "power"):
            raise UsageError(f"unknown two-step schedule {self.schedule!r}")
        if not self.lr > 0:
            raise UsageError("lr must be positive")
        if self.epochs < 1:
            raise UsageError("epochs must be >= 1")
        if self.lambda0 < 0:
            raise UsageError("lambda0 must be nonnegative")
        if self.K < 1 or self.T < 1:
            raise UsageError("K and T must be positive integers")
        if self.trace_probes < 0 or self.index_every < 0:
            raise UsageError("trace_probes and index_every must be nonnegative")
        if self.batch_size is not None and self.batch_size < 1:
            raise UsageError("batch_size must be positive")

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def as_dict(self) -> dict:
        return asdict(self)

    def effective_warmup(self) -> int:
        return self.K if self.warmup is None else self.warmup

    def effective_shift(self) -> float:
        if self.loss_shift is not None:
            return self.loss_shift
        if self.target == "glass":
            cov = rft.covariance_from_mixture([(self.glass_p, 1.0)])
            return -rft.landscape_constants(cov).eps_c
        return 0.0

    def make_schedule(self) -> anneal.ScheduleState:
        if self.algo == "matched":
            smoother = anneal.SmoothingOperator(self.smoothing, self.K)
            return anneal.matched_state(self.lambda0, smoother, self.effective_warmup())
        if self.algo == "cosine":
            return anneal.cosine_state(self.lambda0, self.T, self.normalized_cosine)
        if self.algo == "two-step":
            sched = {
                "constant": lambda: anneal.constant_schedule(self.lambda0),
                "cosine": lambda: anneal.cosine_schedule(self.lambda0, self.T, self.normalized_cosine),
                "power": lambda: anneal.power_law_schedule(self.lambda0),
            }[self.schedule]()
            return anneal.two_step_state(self.lambda0, sched, signed=self.signed_m_step)
        return anneal.fixed_state(self.lambda0)


@dataclass
class TrainingRecord:
    epoch: int
    loss: float
    lam: float
    trace_estimate: float
    grad_norm: float
    alpha_hat: float | None = field(default=None)


# --------------------------------------------------------------------------- objectives


@dataclass
class _Objective:
    theta0: np.ndarray
    loss_grad: Callable[[np.ndarray, np.ndarray | None], tuple[float, np.ndarray]]
    grad: GradFn
    n_rows: int = 0
    couplings: glass.CouplingTensor | None = None


def _mlp_objective(cfg: TrainConfig) -> tuple[_Objective, MlpModel, Batch]:
    batch = teacher_student_data(cfg.d_in, cfg.d_hidden, cfg.d_out, cfg.samples, cfg.noise, cfg.seed)
    model = init_spherical_weights((cfg.d_in, cfg.d_hidden, cfg.d_out), derive_seed(cfg.seed, "init"))
    sizes = model.sizes

    def loss_grad(theta, rows=None):
        b = batch if rows is None else batch.subset(rows)
        return mlp_loss_and_grad(MlpModel(sizes, theta), b)

    def grad(theta):
        return loss_grad(theta)[1]

    return _Objective(model.theta, loss_grad, grad, n_rows=len(batch)), model, batch


def glass_initial_state(cfg: TrainConfig) -> tuple[glass.CouplingTensor, np.ndarray]:
    return glass.seeded_instance(cfg.glass_n, cfg.glass_p, cfg.seed)


def _glass_objective(cfg: TrainConfig) -> _Objective:
    J, sigma0 = glass_initial_state(cfg)
    n = cfg.glass_n

    # descends on H itself; the logged loss is the per-site energy H/n
    def loss_grad(theta, rows=None):
        return glass.hamiltonian_p_spin(J, theta) / n, glass.euclidean_gradient(J, theta)

    def grad(theta):
        return glass.euclidean_gradient(J, theta)

    return _Objective(sigma0, loss_grad, grad, couplings=J)


def _objective(cfg: TrainConfig) -> _Objective:
    if cfg.target == "mlp":
        return _mlp_objective(cfg)[0]
    return _glass_objective(cfg)


# --------------------------------------------------------------------------- loop


def _next_lambda(state: anneal.ScheduleState, loss: float) -> float:
    if state.algo == "matched":
        return anneal.matched_step(state, loss)[1]
    if state.algo == "cosine":
        return anneal.cosine_step(state)[1]
    if state.algo == "two-step":
        return anneal.schedule_step(state)[1]
    return anneal.fixed_step(state)[1]


def run_algorithm(
    config: TrainConfig, on_epoch: Callable[[int, np.ndarray], None] | None = None
) -> list[TrainingRecord]:
    """Run one annealing algorithm; one record per epoch.

    ``on_epoch(epoch, theta)`` is called with the projected weights after
    every epoch.

    Raises ``DivergedError`` on a non-finite loss and ``NonpositiveLossError``
    when matched annealing sees a loss at or below zero (after the shift);
    both carry the records logged so far.
    """
    cfg = config
    obj = _objective(cfg)
    state = cfg.make_schedule()
    shift = cfg.effective_shift()
    theta = obj.theta0.copy()
    n_w = theta.size
    trace_seed = derive_seed(cfg.seed, "trace")
    batch_rng = philox(derive_seed(cfg.seed, "minibatch"))
    records: list[TrainingRecord] = []

    for epoch in range(cfg.epochs):
        # reset gradients: every quantity below is recomputed from theta
        loss, g = obj.loss_grad(theta)
        if not math.isfinite(loss) or not np.all(np.isfinite(g)):
            raise DivergedError(f"non-finite loss at epoch {epoch}", records)
        if obj.couplings is not None and abs(loss) > glass.DIVERGENCE_THRESHOLD:
            raise DivergedError(f"energy per site {loss} diverged at epoch {epoch}", records)
        try:
            lam = _next_lambda(state, loss + shift)
        except NonpositiveLossError as exc:
            raise NonpositiveLossError(str(exc), records) from None
        trace = 0.0
        if cfg.trace_probes:
            trace = hutchinson_trace_fn(obj.grad, theta, cfg.trace_probes, trace_seed + epoch) / n_w
        full = g + 2 * lam * theta

        if cfg.batch_size and obj.n_rows:
            order = batch_rng.permutation(obj.n_rows)
            for start in range(0, obj.n_rows, cfg.batch_size):
                rows = order[start : start + cfg.batch_size]
                theta = _epoch_update(cfg, state, obj, theta, lam, rows)
        else:
            theta = _epoch_update(cfg, state, obj, theta, lam, None, first_grad=full)

        records.append(TrainingRecord(epoch, loss, lam, trace, float(np.linalg.norm(full))))
        if on_epoch is not None:
            on_epoch(epoch, theta)
    return records


def _epoch_update(cfg, state, obj, theta, lam, rows, first_grad=None):
    grad = first_grad
    if grad is None:
        grad = obj.loss_grad(theta, rows)[1] + 2 * lam * theta
    if cfg.algo == "two-step":
        e_step, m_step = anneal.two_step_sizes(state, cfg.lr)
        theta = theta - e_step * grad
        if m_step != 0:
            theta = theta - m_step * (obj.loss_grad(theta, rows)[1] + 2 * lam * theta)
    else:
        theta = theta - cfg.lr * grad
    return glass.project_to_sphere(theta)


def replay_lambdas(config: TrainConfig, records: list[TrainingRecord]) -> list[float]:
    """Lambda column the standalone scheduler yields for the recorded losses."""
    shift = config.effective_shift()
    return anneal.replay(config.make_schedule(), [r.loss + shift for r in records])


# --------------------------------------------------------------------------- glass experiment


@dataclass
class GlassRecord:
    epoch: int
    eps: float
    lam: float
    alpha_hat: float | None


def glass_descent_experiment(config: TrainConfig) -> list[GlassRecord]:
    """Annealed descent on a spherical glass with empirical index logging.

    The empirical index is measured every ``index_every`` epochs (never when
    zero) and always at the first and last epoch.
    """
    if config.target != "glass":
        raise UsageError("glass_descent_experiment needs target='glass'")
    if config.glass_n > glass.DENSE_BOUND:
        raise glass.ResourceBoundError(
            f"index logging needs n <= {glass.DENSE_BOUND}", bound="dense"
        )
    cfg = config
    J, sigma = glass_initial_state(cfg)
    state = cfg.make_schedule()
    shift = cfg.effective_shift()
    n = cfg.glass_n
    out: list[GlassRecord] = []
    for epoch in range(cfg.epochs):
        eps = glass.hamiltonian_p_spin(J, sigma) / n
        if not abs(eps) <= glass.DIVERGENCE_THRESHOLD:
            raise DivergedError(f"energy per site {eps} diverged at epoch {epoch}", out)
        try:
            lam = _next_lambda(state, eps + shift)
        except NonpositiveLossError as exc:
            raise NonpositiveLossError(str(exc), out) from None
        measure = epoch == 0 or epoch == cfg.epochs - 1 or (cfg.index_every and epoch % cfg.index_every == 0)
        alpha = glass.empirical_index_energy(J, sigma).alpha_hat if measure else None
        grad = glass.euclidean_gradient(J, sigma) + 2 * lam * sigma
        if cfg.algo == "two-step":
            e_step, m_step = anneal.two_step_sizes(state, cfg.lr)
            sigma = sigma - e_step * grad
            if m_step != 0:
                sigma = sigma - m_step * (glass.euclidean_gradient(J, sigma) + 2 * lam * sigma)
        else:
            sigma = sigma - cfg.lr * grad
        sigma = glass.project_to_sphere(sigma)
        out.append(GlassRecord(epoch, eps, lam, alpha))
    return out
