"""Per-timestep diffusion coefficients and the forward (noising) process.

The forward process is variance preserving: the state at noise level t is
sqrt(abar_t) * x0 + sqrt(1 - abar_t) * eps, with abar the cumulative product
of per-step alphas. Index t = 0 is the least-noisy level (one step of
noising); t = num_steps - 1 is approximately pure noise.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError

SIGMA_MODES = ("beta", "posterior")


@dataclass(frozen=True)
class NoiseSchedule:
    """Immutable coefficient table; arrays are float64 and read-only."""

    num_steps: int
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    sigma: np.ndarray
    sigma_mode: str = "beta"
    posterior_sigma: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.posterior_sigma is None:
            abar_prev = np.concatenate([[1.0], self.alpha_bar[:-1]])
            post = np.sqrt(self.beta * (1.0 - abar_prev) / (1.0 - self.alpha_bar))
            post[0] = 0.0
            object.__setattr__(self, "posterior_sigma", post)
        for name in ("beta", "alpha", "alpha_bar", "sigma", "posterior_sigma"):
            arr = getattr(self, name)
            arr.flags.writeable = False
            if arr.shape != (self.num_steps,):
                raise DimensionError(f"{name} must have shape ({self.num_steps},)")

    def to_config(self) -> dict:
        return {
            "num_steps": self.num_steps,
            "beta_start": float(self.beta[0]),
            "beta_end": float(self.beta[-1]),
            "sigma": self.sigma_mode,
        }


def build_linear_schedule(num_steps: int, beta_start: float = 1e-4,
                          beta_end: float = 0.02, sigma_mode: str = "beta") -> NoiseSchedule:
    """Linearly spaced betas with derived alpha, alpha_bar and sigma tables.

    sigma_mode "beta" uses sigma_t = sqrt(beta_t); "posterior" uses the
    posterior standard deviation sqrt(beta_t * (1 - abar_{t-1}) / (1 - abar_t)).
    Both tables are kept so samplers can cross-check one against the other.
    """
    if num_steps < 2:
        raise ConfigError(f"num_steps must be >= 2, got {num_steps}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ConfigError(
            f"need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})")
    if sigma_mode not in SIGMA_MODES:
        raise ConfigError(f"sigma mode must be one of {SIGMA_MODES}, got {sigma_mode!r}")
    beta = np.linspace(beta_start, beta_end, num_steps, dtype=np.float64)
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    abar_prev = np.concatenate([[1.0], alpha_bar[:-1]])
    posterior = np.sqrt(beta * (1.0 - abar_prev) / (1.0 - alpha_bar))
    posterior[0] = 0.0
    sigma = np.sqrt(beta) if sigma_mode == "beta" else posterior.copy()
    return NoiseSchedule(num_steps=num_steps, beta=beta, alpha=alpha,
                         alpha_bar=alpha_bar, sigma=sigma, sigma_mode=sigma_mode,
                         posterior_sigma=posterior)


def schedule_from_config(cfg: dict) -> NoiseSchedule:
    return build_linear_schedule(cfg["num_steps"], cfg["beta_start"], cfg["beta_end"],
                                 cfg.get("sigma", "beta"))


def forward_diffuse(x0: np.ndarray, t, eps: np.ndarray, sched: NoiseSchedule) -> np.ndarray:
    """Noise x0 to level t: sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.

    t may be a scalar or a per-sample integer array (matched against the
    leading batch axis of x0).
    """
    x0 = np.asarray(x0)
    eps = np.asarray(eps)
    if x0.shape != eps.shape:
        raise DimensionError(f"x0 shape {x0.shape} != eps shape {eps.shape}")
    t = np.asarray(t)
    if np.any(t < 0) or np.any(t >= sched.num_steps):
        raise IndexError(f"timestep {t} outside [0, {sched.num_steps})")
    abar = sched.alpha_bar[t]
    if t.ndim:
        if t.shape[0] != x0.shape[0]:
            raise DimensionError(f"per-sample t has length {t.shape[0]}, batch is {x0.shape[0]}")
        abar = abar.reshape((-1,) + (1,) * (x0.ndim - 1))
    a = np.sqrt(abar)
    b = np.sqrt(1.0 - abar)
    return (a * x0 + b * eps).astype(x0.dtype, copy=False)
