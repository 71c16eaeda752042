"""Metropolis-adjusted Langevin reference sampler.

A Langevin proposal (gradient step plus diffusion) followed by a
Metropolis-Hastings accept/reject step. The correction makes the
invariant law exactly the target, so long reference chains provide
asymptotically unbiased ground-truth samples for comparing the
(biased) unadjusted chains against. For nonsmooth potentials the drift
uses a chosen subgradient; the correction step keeps the invariant law
exact regardless of that choice.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .metrics import RunningMoments

__all__ = [
    "TargetPotential",
    "laplace_gaussian_target",
    "MalaDiagnostics",
    "MalaState",
    "mala_accept_log_prob",
    "mala_step",
    "run_mala_chain",
]


@dataclass(frozen=True)
class TargetPotential:
    """Potential V and a drift (gradient or subgradient selection) for MALA."""

    value: Callable[[np.ndarray], float]
    drift: Callable[[np.ndarray], np.ndarray]


def laplace_gaussian_target(alpha, sigma, y=0.0):
    """Scalar target exp(-(x-y)^2/(2 sigma^2) - alpha |x|) as a TargetPotential.

    The drift uses the subgradient selection alpha * sign(x), which is 0
    at x = 0.
    """
    inv_var = 1.0 / sigma**2

    def value(x):
        return float(0.5 * inv_var * np.sum((x - y) ** 2) + alpha * np.sum(np.abs(x)))

    def drift(x):
        return inv_var * (x - y) + alpha * np.sign(x)

    return TargetPotential(value=value, drift=drift)


@dataclass
class MalaDiagnostics:
    """Acceptance bookkeeping of one reference chain."""

    proposals: int = 0
    accepted: int = 0

    @property
    def acceptance_rate(self):
        return self.accepted / self.proposals if self.proposals else 0.0


@dataclass
class MalaState:
    """Current position with cached potential value and drift."""

    position: np.ndarray
    value: float
    drift: np.ndarray
    rng: np.random.Generator


def mala_accept_log_prob(x, x_prop, value_x, value_prop, drift_x, drift_prop,
                         gamma):
    """Log acceptance probability of a Langevin proposal.

    The proposal density is q(b | a) = N(a - gamma drift(a), 2 gamma I);
    the returned value is log min(1, ...) without the min applied, i.e.
    the raw log ratio. An infinite proposal potential yields -inf
    (automatic rejection of out-of-domain points).
    """
    if not np.isfinite(value_prop):
        return -np.inf
    back = x - (x_prop - gamma * drift_prop)
    fwd = x_prop - (x - gamma * drift_x)
    log_q_back = -float(np.sum(back**2)) / (4.0 * gamma)
    log_q_fwd = -float(np.sum(fwd**2)) / (4.0 * gamma)
    return (value_x - value_prop) + (log_q_back - log_q_fwd)


def mala_step(state: MalaState, target: TargetPotential, gamma):
    """One proposal/accept-reject step; returns (state, accepted flag).

    On rejection the state object (position, cached value and drift) is
    returned unchanged, preserving the position bitwise.
    """
    rng = state.rng
    noise = rng.standard_normal(state.position.shape)
    x_prop = state.position - gamma * state.drift + np.sqrt(2.0 * gamma) * noise
    value_prop = target.value(x_prop)
    if np.isfinite(value_prop):
        drift_prop = target.drift(x_prop)
        log_alpha = mala_accept_log_prob(
            state.position, x_prop, state.value, value_prop,
            state.drift, drift_prop, gamma,
        )
    else:
        drift_prop = None
        log_alpha = -np.inf
    if log_alpha >= 0 or np.log(rng.uniform()) < log_alpha:
        return MalaState(x_prop, value_prop, drift_prop, rng), True
    return state, False


@dataclass
class MalaChainConfig:
    """Reference-chain configuration (same sink interface as run_chain)."""

    seed: object
    n_samples: int
    burn_in: int = 0
    initial: object = None
    low_acceptance_rate: float = 0.01
    low_acceptance_check: int = 10_000

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("need at least one post-burn-in sample")
        if self.burn_in < 0:
            raise ValueError("burn-in must be nonnegative")


def run_mala_chain(config: MalaChainConfig, target: TargetPotential, gamma,
                   sinks=()):
    """Run the reference chain; returns (ChainOutput-like stats, diagnostics).

    Streams each post-burn-in sample into the running moments and the
    given sinks (sink.consume(k, x, diag, moments) with diag=None). A
    sustained acceptance rate below `low_acceptance_rate` raises a
    step-size warning in the output.
    """
    from .sampler import ChainOutput

    rng = np.random.default_rng(config.seed)
    if config.initial is None:
        raise ValueError("chain needs an initial point or sampler")
    x0 = config.initial(rng) if callable(config.initial) else config.initial
    x0 = np.array(x0, dtype=float)
    state = MalaState(x0, target.value(x0), target.drift(x0), rng)

    diag = MalaDiagnostics()
    moments = RunningMoments()
    warnings: list[str] = []
    total = config.burn_in + config.n_samples
    for it in range(total):
        state, accepted = mala_step(state, target, gamma)
        diag.proposals += 1
        diag.accepted += int(accepted)
        if (
            diag.proposals == config.low_acceptance_check
            and diag.acceptance_rate < config.low_acceptance_rate
            and not warnings
        ):
            warnings.append(
                f"acceptance rate {diag.acceptance_rate:.2%} after "
                f"{diag.proposals} proposals; decrease the step size"
            )
        if it >= config.burn_in:
            k = it - config.burn_in + 1
            moments.update(state.position)
            for sink in sinks:
                sink.consume(k, state.position, None, moments)

    output = ChainOutput(
        moments=moments,
        n_samples=config.n_samples,
        burn_in=config.burn_in,
        final_position=state.position,
        warnings=warnings,
        sinks=tuple(sinks),
    )
    return output, diag
