"""Differentially private WGAN on one-hot encoded categorical rows.

Both networks have one tanh hidden layer and are trained with explicit
backpropagation so that per-example critic gradients are available for
clipping. Gaussian noise is added to the clipped real-data gradient sum
only; generator-sample gradients are clipped but not noised.

Critic parameters are flattened as [W, b, v, c] for f(x) = v . tanh(Wx + b) + c.
Generator parameters are flattened as [U, e, Q, r] for
x = softmax_blocks(tanh(zU + e) Q + r).
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Protocol, Tuple

import numpy as np

from src.config import Config
from src.core.dataset import Dataset
from src.core.schema import Schema
from src.errors import BudgetUnsatisfiableError
from src.estimator import gdp_mu_of_eps
from src.mechanisms.base import GanHyper, make_rng

logger = logging.getLogger(__name__)

RMSPROP_EPS = 1e-8


class TrainingObserver(Protocol):
    """Hook into critic training.

    on_fit_start receives the schema training runs on and the critic size.
    on_critic_gradients sees the integer codes of the real batch and the
    (L, P) per-example gradients before clipping, and returns the gradients
    to use. on_critic_step sees the critic parameters before and after
    every update.
    """

    def on_fit_start(self, schema: Schema, param_dim: int) -> None:
        ...

    def on_critic_gradients(self, batch_codes: np.ndarray, per_example: np.ndarray) -> np.ndarray:
        ...

    def on_critic_step(self, w_start: np.ndarray, w_after: np.ndarray) -> None:
        ...


@dataclass(frozen=True)
class CriticStep:
    """Critic parameters around one update."""
    iteration: int
    w_start: np.ndarray
    w_after: np.ndarray


@dataclass(frozen=True)
class GanModel:
    """Fitted DP-WGAN with its training transcript."""
    schema: Schema
    hyper: GanHyper
    critic_params: np.ndarray
    generator_params: np.ndarray
    transcript: Tuple[CriticStep, ...]
    sigma: float
    accountant_mu: float
    target_mu: float
    iterations_run: int
    critic_steps_run: int
    epsilon: float
    delta: float
    seed: int

    @property
    def param_dim(self) -> int:
        return int(self.critic_params.size)


def critic_param_dim(input_dim: int, hidden: int) -> int:
    return hidden * input_dim + 2 * hidden + 1


def _unpack_critic(w: np.ndarray, hidden: int):
    input_dim = (w.size - 2 * hidden - 1) // hidden
    split = hidden * input_dim
    W = w[:split].reshape(hidden, input_dim)
    b = w[split:split + hidden]
    v = w[split + hidden:split + 2 * hidden]
    c = w[-1]
    return W, b, v, c


def critic_forward(w: np.ndarray, X: np.ndarray, hidden: int) -> np.ndarray:
    """Critic value of every row of X."""
    W, b, v, c = _unpack_critic(w, hidden)
    return np.tanh(np.atleast_2d(X) @ W.T + b) @ v + c


def critic_per_example_gradients(w: np.ndarray, X: np.ndarray, hidden: int) -> np.ndarray:
    """Gradient of f(x) with respect to the flat critic parameters, one row per x."""
    W, b, v, _ = _unpack_critic(w, hidden)
    A = np.tanh(X @ W.T + b)
    dpre = (1.0 - A ** 2) * v
    dW = (dpre[:, :, None] * X[:, None, :]).reshape(len(X), -1)
    return np.hstack([dW, dpre, A, np.ones((len(X), 1))])


def _critic_input_gradient(w: np.ndarray, X: np.ndarray, hidden: int) -> np.ndarray:
    W, b, v, _ = _unpack_critic(w, hidden)
    A = np.tanh(X @ W.T + b)
    return ((1.0 - A ** 2) * v) @ W


def clip_per_example(gradients: np.ndarray, bound: float) -> np.ndarray:
    """Scale each row to L2 norm at most `bound`."""
    norms = np.linalg.norm(gradients, axis=1)
    factors = np.minimum(1.0, bound / np.maximum(norms, 1e-12))
    return gradients * factors[:, None]


def _generator_shapes(latent: int, hidden: int, output: int):
    return [(latent, hidden), (hidden,), (hidden, output), (output,)]


def _unpack_generator(theta: np.ndarray, latent: int, hidden: int, output: int):
    parts = []
    start = 0
    for shape in _generator_shapes(latent, hidden, output):
        size = int(np.prod(shape))
        parts.append(theta[start:start + size].reshape(shape))
        start += size
    return parts


def _block_softmax(logits: np.ndarray, schema: Schema) -> np.ndarray:
    out = np.empty_like(logits)
    for offset, size in zip(schema.offsets, schema.sizes):
        block = logits[:, offset:offset + size]
        block = np.exp(block - block.max(axis=1, keepdims=True))
        out[:, offset:offset + size] = block / block.sum(axis=1, keepdims=True)
    return out


def _generator_forward(theta: np.ndarray, Z: np.ndarray, schema: Schema, hyper: GanHyper):
    U, e, Q, r = _unpack_generator(theta, hyper.latent_dim, hyper.hidden_dim, schema.one_hot_dim)
    H = np.tanh(Z @ U + e)
    logits = H @ Q + r
    return H, logits, _block_softmax(logits, schema)


def _generator_gradient(theta: np.ndarray, w: np.ndarray, Z: np.ndarray,
                        schema: Schema, hyper: GanHyper) -> np.ndarray:
    """Gradient of mean critic value of generated rows with respect to theta."""
    U, e, Q, r = _unpack_generator(theta, hyper.latent_dim, hyper.hidden_dim, schema.one_hot_dim)
    H, _, X = _generator_forward(theta, Z, schema, hyper)
    gx = _critic_input_gradient(w, X, hyper.hidden_dim)

    dlogits = np.empty_like(X)
    for offset, size in zip(schema.offsets, schema.sizes):
        p = X[:, offset:offset + size]
        g = gx[:, offset:offset + size]
        dlogits[:, offset:offset + size] = p * (g - (p * g).sum(axis=1, keepdims=True))

    n = len(Z)
    dQ = H.T @ dlogits / n
    dr = dlogits.sum(axis=0) / n
    dpre = (dlogits @ Q.T) * (1.0 - H ** 2)
    dU = Z.T @ dpre / n
    de = dpre.sum(axis=0) / n
    return np.concatenate([dU.ravel(), de, dQ.ravel(), dr])


class _RmsProp:
    """RMSProp ascent direction; plain gradient when disabled."""

    def __init__(self, size: int, decay: float, enabled: bool):
        self.average = np.zeros(size)
        self.decay = decay
        self.enabled = enabled

    def direction(self, gradient: np.ndarray) -> np.ndarray:
        if not self.enabled:
            return gradient
        self.average = self.decay * self.average + (1.0 - self.decay) * gradient ** 2
        return gradient / (np.sqrt(self.average) + RMSPROP_EPS)


def _init_critic(rng: np.random.Generator, input_dim: int, hyper: GanHyper) -> np.ndarray:
    h = hyper.hidden_dim
    w = np.concatenate([
        rng.normal(0.0, 0.1, size=h * input_dim),
        np.zeros(h),
        rng.normal(0.0, 0.1, size=h),
        np.zeros(1),
    ])
    return np.clip(w, -hyper.weight_clip, hyper.weight_clip)


def _init_generator(rng: np.random.Generator, output: int, hyper: GanHyper) -> np.ndarray:
    latent, h = hyper.latent_dim, hyper.hidden_dim
    return np.concatenate([
        rng.normal(0.0, 1.0 / math.sqrt(latent), size=latent * h),
        np.zeros(h),
        rng.normal(0.0, 1.0 / math.sqrt(h), size=h * output),
        np.zeros(output),
    ])


def noise_multiplier(eps: float, delta: float, hyper: GanHyper) -> Tuple[float, float]:
    """Noise multiplier sigma and target mu for a budget.

    Returns:
        (sigma, target_mu) with sqrt(T * n_critic) / sigma equal to target_mu

    Raises:
        BudgetUnsatisfiableError: If sigma exceeds Config.GAN_SIGMA_CAP
    """
    target_mu = gdp_mu_of_eps(eps, delta)
    if hyper.sigma_override is not None:
        return float(hyper.sigma_override), target_mu
    sigma = math.sqrt(hyper.critic_steps) / target_mu
    if sigma > Config.GAN_SIGMA_CAP:
        raise BudgetUnsatisfiableError(
            f"Noise multiplier {sigma:.1f} for eps={eps} over {hyper.critic_steps} critic steps "
            f"exceeds the cap {Config.GAN_SIGMA_CAP}"
        )
    return sigma, target_mu


def planned_iterations(n_rows: int, hyper: GanHyper, data_dependent_stop: bool) -> int:
    """Generator iterations to run.

    The data-dependent rule scales T with the number of epochs' worth of
    batches, so neighboring datasets train for different lengths.
    """
    if not data_dependent_stop:
        return hyper.iterations
    scaled = hyper.iterations * (n_rows / hyper.batch_size) ** 2
    return int(min(hyper.max_iterations, math.ceil(scaled)))


def gan_fit(
    d: Dataset,
    s: Schema,
    eps: float,
    delta: float,
    hyper: Optional[GanHyper] = None,
    seed: int = 0,
    observer: Optional[TrainingObserver] = None,
    noise_scale_factor: float = 1.0,
    data_dependent_stop: bool = False,
) -> GanModel:
    """Train the DP-WGAN.

    Args:
        d: Training data, re-encoded into s if needed
        s: Schema defining the one-hot layout
        eps: Privacy budget
        delta: Privacy budget delta
        hyper: Hyper-parameters; defaults to GanHyper()
        seed: Seed of initialization, batching and noise
        observer: Optional hook that may replace per-example critic
            gradients and sees every critic update
        noise_scale_factor: Multiplier on the noise actually added
        data_dependent_stop: Derive the iteration count from |d|

    Returns:
        GanModel with final parameters and the critic transcript

    Raises:
        ValueError: If eps is not positive or the batch exceeds the data
        BudgetUnsatisfiableError: If the budget needs too much noise
    """
    hyper = hyper or GanHyper()
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if hyper.batch_size > len(d):
        raise ValueError(f"Batch size {hyper.batch_size} exceeds {len(d)} training rows")
    if d.schema != s:
        d = d.reencode(s)

    sigma, target_mu = noise_multiplier(eps, delta, hyper)
    noise_std = sigma * noise_scale_factor * hyper.grad_bound
    iterations = planned_iterations(len(d), hyper, data_dependent_stop)
    enforce_accountant = not (hyper.test_mode or data_dependent_stop)

    rng = make_rng(seed)
    real = d.one_hot()
    input_dim = s.one_hot_dim
    L = hyper.batch_size
    h = hyper.hidden_dim

    w = _init_critic(rng, input_dim, hyper)
    theta = _init_generator(rng, input_dim, hyper)
    critic_opt = _RmsProp(w.size, hyper.rmsprop_decay, enabled=not hyper.test_mode)
    generator_opt = _RmsProp(theta.size, hyper.rmsprop_decay, enabled=not hyper.test_mode)
    if observer is not None:
        observer.on_fit_start(s, w.size)

    transcript = []
    steps = 0
    iterations_run = 0
    stopped = False
    for t in range(iterations):
        for _ in range(hyper.n_critic):
            if enforce_accountant and sigma > 0 and math.sqrt(steps + 1) / sigma > target_mu * (1 + 1e-9):
                logger.warning(f"Privacy accountant exhausted after {steps} critic steps")
                stopped = True
                break

            idx = rng.choice(len(d), size=L, replace=False)
            batch_codes = d.codes[idx]
            real_grads = critic_per_example_gradients(w, real[idx], h)
            if observer is not None:
                real_grads = observer.on_critic_gradients(batch_codes, real_grads)
            real_grads = clip_per_example(real_grads, hyper.grad_bound)

            Z = rng.normal(size=(L, hyper.latent_dim))
            _, _, fake = _generator_forward(theta, Z, s, hyper)
            if hyper.zero_fake_gradients:
                fake_sum = np.zeros(w.size)
            else:
                fake_sum = clip_per_example(
                    critic_per_example_gradients(w, fake, h), hyper.grad_bound).sum(axis=0)

            noise = rng.normal(0.0, noise_std, size=w.size) if noise_std > 0 else 0.0
            gradient = (real_grads.sum(axis=0) + noise) / L - fake_sum / L

            w_start = w.copy()
            w = np.clip(w + hyper.learning_rate * critic_opt.direction(gradient),
                        -hyper.weight_clip, hyper.weight_clip)
            steps += 1
            if observer is not None:
                observer.on_critic_step(w_start, w.copy())
            if hyper.record_transcript:
                transcript.append(CriticStep(t, w_start, w.copy()))

        if stopped:
            break
        Z = rng.normal(size=(L, hyper.latent_dim))
        theta = theta + hyper.learning_rate * generator_opt.direction(
            _generator_gradient(theta, w, Z, s, hyper))
        iterations_run += 1

    accountant_mu = math.sqrt(steps) / sigma if sigma > 0 else math.inf
    logger.debug(
        f"Trained GAN for {iterations_run} iterations ({steps} critic steps), "
        f"sigma={sigma:.4g}, accountant mu={accountant_mu:.4g}"
    )
    w.setflags(write=False)
    theta.setflags(write=False)
    return GanModel(
        schema=s,
        hyper=hyper,
        critic_params=w,
        generator_params=theta,
        transcript=tuple(transcript),
        sigma=float(sigma),
        accountant_mu=float(accountant_mu),
        target_mu=float(target_mu),
        iterations_run=iterations_run,
        critic_steps_run=steps,
        epsilon=float(eps),
        delta=float(delta),
        seed=int(seed),
    )


def gan_sample(m: GanModel, n_out: int, seed: int) -> Dataset:
    """Generate rows by taking the argmax of every attribute block."""
    if n_out < 0:
        raise ValueError("n_out must be non-negative")
    rng = make_rng(seed)
    Z = rng.normal(size=(n_out, m.hyper.latent_dim))
    _, logits, _ = _generator_forward(m.generator_params, Z, m.schema, m.hyper)
    codes = np.zeros((n_out, len(m.schema)), dtype=np.int64)
    for j, (offset, size) in enumerate(zip(m.schema.offsets, m.schema.sizes)):
        if n_out:
            codes[:, j] = np.argmax(logits[:, offset:offset + size], axis=1)
    return Dataset.from_codes(m.schema, codes)
