"""The inexact proximal gradient Langevin chain.

One iteration performs an explicit gradient step in the smooth
potential, adds Gaussian diffusion noise, and applies an inexact
backward (proximal) step in the nonsmooth potential at the accuracy
requested by the error schedule:

    X_{k+1/3} = X_k - gamma_k grad F(X_k)
    X_{k+2/3} = X_{k+1/3} + sqrt(2 gamma_k) xi,   xi ~ N(0, I)
    X_{k+1}   ~ eps_k-inexact prox of gamma_k G at X_{k+2/3}

Step sizes come from a fixed, decaying or backtracking schedule; the
per-iteration prox accuracy from a fixed, decaying, budget or
gap-relative schedule. Chains share potentials and operators read-only
and keep all mutable state (position, RNG, prox warm start) local.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .inexact_prox import InnerBudget, ProxCertificate, ProxRequest, TargetEpsilon
from .metrics import RunningMoments
from .potentials import SmoothPotential

__all__ = [
    "ProxFailure",
    "FixedStep",
    "DecayingRemarkStep",
    "BacktrackingStep",
    "FixedEps",
    "PowerDecayEps",
    "BudgetEps",
    "RelativeGapEps",
    "ChainState",
    "ChainConfig",
    "StepDiagnostics",
    "ChainOutput",
    "check_descent",
    "backtracking_gamma",
    "schedule_next_gamma",
    "ipgla_step",
    "run_chain",
    "run_parallel_chains",
    "ThinnedSamples",
    "ScalarSeries",
    "CheckpointSnapshots",
    "KStarSink",
    "DownsampledStdSink",
]

GAMMA_UNDERFLOW = 1e-15


class ProxFailure(RuntimeError):
    """Raised when the proximal step fails; carries the chain position."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


# ---------------------------------------------------------------------------
# Step-size schedules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FixedStep:
    """Constant step size gamma."""

    gamma: float

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("step size must be positive")


@dataclass(frozen=True)
class DecayingRemarkStep:
    """Decaying steps gamma_k = min(gamma_{k-1}, max(C'/k, gamma_{k-1}/(1+lambda_F))).

    Starts at gamma_0 = 1/L; requires strong convexity and C' >= 1/lambda_F
    so that the sequence decays slowly enough for the accumulated bias to
    stay bounded while the total step mass diverges.
    """

    c_prime: float
    lambda_F: float
    lipschitz_L: float

    def __post_init__(self):
        if self.lambda_F <= 0:
            raise ValueError("decaying schedule requires lambda_F > 0")
        if self.lipschitz_L <= 0:
            raise ValueError("Lipschitz constant must be positive")
        if self.c_prime < 1.0 / self.lambda_F:
            raise ValueError("decaying schedule requires C' >= 1/lambda_F")


@dataclass(frozen=True)
class BacktrackingStep:
    """Two-way geometric line search on the pointwise descent condition."""

    gamma_init: float
    shrink: float = 0.5
    grow: float = 2.0
    gamma_max: float = np.inf

    def __post_init__(self):
        if self.gamma_init <= 0:
            raise ValueError("initial step must be positive")
        if not 0.0 < self.shrink < 1.0 < self.grow:
            raise ValueError("need 0 < shrink < 1 < grow")


def check_descent(F: SmoothPotential, x, gamma):
    """Pointwise descent test F(x - g grad F) - F(x) + g/2 ||grad F||^2 <= 0.

    Evaluated at the single point x (a per-sample surrogate of the
    expectation form); guaranteed for gamma <= 1/L. Points outside
    dom(F) fail the test.
    """
    v0 = F.value(x)
    if not np.isfinite(v0):
        return False
    g = F.gradient(x)
    trial = x - gamma * g
    v1 = F.value(trial)
    if not np.isfinite(v1):
        return False
    quantity = v1 - v0 + 0.5 * gamma * float(np.sum(g * g))
    return quantity <= 1e-12 * max(1.0, abs(v0))


def backtracking_gamma(F, x, gamma_prev, shrink=0.5, grow=2.0, gamma_max=np.inf):
    """Largest step in a geometric grid around gamma_prev passing check_descent.

    Starts from min(grow * gamma_prev, gamma_max) and multiplies by
    `shrink` until the descent condition holds. With grow * shrink = 1
    the grid contains gamma_prev itself, so a previously valid step is
    never abandoned for a smaller one.
    """
    gamma = min(grow * gamma_prev, gamma_max)
    while not check_descent(F, x, gamma):
        gamma *= shrink
        if gamma < GAMMA_UNDERFLOW:
            raise ProxFailure(
                f"backtracking step size underflow below {GAMMA_UNDERFLOW:g}; "
                "the potential may be ill-posed at the current point",
                state=x,
            )
    return gamma


def schedule_next_gamma(schedule, k, gamma_prev, F=None, x=None):
    """Step size for iteration k given the previous one.

    Fixed schedules return their gamma; decaying schedules apply the
    min/max recursion starting from 1/L; backtracking schedules run the
    line search at the current point.
    """
    if isinstance(schedule, FixedStep):
        return schedule.gamma
    if isinstance(schedule, DecayingRemarkStep):
        if k == 0:
            return 1.0 / schedule.lipschitz_L
        return min(
            gamma_prev,
            max(schedule.c_prime / k, gamma_prev / (1.0 + schedule.lambda_F)),
        )
    if isinstance(schedule, BacktrackingStep):
        prev = schedule.gamma_init if gamma_prev is None or k == 0 else gamma_prev
        return backtracking_gamma(
            F, x, prev, schedule.shrink, schedule.grow, schedule.gamma_max
        )
    raise TypeError(f"unknown step schedule {schedule!r}")


# ---------------------------------------------------------------------------
# Error (prox accuracy) schedules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FixedEps:
    """Constant accuracy eps for every iteration."""

    eps: float

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")


@dataclass(frozen=True)
class PowerDecayEps:
    """Decaying accuracy eps_k = c * k^(-beta) (eps_0 = c)."""

    c: float
    beta: float

    def __post_init__(self):
        if self.c < 0 or self.beta <= 0:
            raise ValueError("need c >= 0 and beta > 0")


@dataclass(frozen=True)
class BudgetEps:
    """Fixed number of inner iterations per prox call."""

    iterations: int

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("inner budget must be at least 1")


@dataclass(frozen=True)
class RelativeGapEps:
    """Accuracy eps = C0 * eps_tilde with C0 the first iteration's gap at z = 0.

    The reference constant C0 equals G evaluated at the first prox
    input, i.e. the duality gap of the trivial dual point; it is
    resolved once at the start of the chain and recorded in the output.
    """

    eps_tilde: float

    def __post_init__(self):
        if self.eps_tilde < 0:
            raise ValueError("relative accuracy must be nonnegative")


def _accuracy_at(schedule, k, c0):
    if isinstance(schedule, FixedEps):
        return TargetEpsilon(schedule.eps)
    if isinstance(schedule, PowerDecayEps):
        return TargetEpsilon(schedule.c * float(max(k, 1)) ** (-schedule.beta))
    if isinstance(schedule, BudgetEps):
        return InnerBudget(schedule.iterations)
    if isinstance(schedule, RelativeGapEps):
        if c0 is None:
            raise ValueError("relative-gap schedule needs the resolved C0")
        return TargetEpsilon(c0 * schedule.eps_tilde)
    raise TypeError(f"unknown error schedule {schedule!r}")


# ---------------------------------------------------------------------------
# Chain state and the single iPGLA step
# ---------------------------------------------------------------------------

@dataclass
class ChainState:
    """Mutable per-chain state: position, iteration, RNG, prox warm start."""

    position: np.ndarray
    iteration: int
    rng: np.random.Generator
    warm_dual: Optional[np.ndarray] = None


@dataclass
class StepDiagnostics:
    """What one iteration did: step size, resolved accuracy, prox certificate."""

    gamma: float
    certificate: ProxCertificate
    accuracy: object = None


def ipgla_step(state: ChainState, F: SmoothPotential, prox, gamma, accuracy,
               use_warm=False):
    """One forward-diffuse-backward iteration.

    `accuracy` is a TargetEpsilon/InnerBudget, or a callable receiving
    the prox input (used to resolve gap-relative accuracies on the
    first iteration). Returns the advanced state and diagnostics; on
    prox failure the current position is preserved on the raised error.
    """
    if gamma <= 0:
        raise ValueError("step size must be positive")
    x = state.position
    drifted = x - gamma * F.gradient(x)
    noise = state.rng.standard_normal(x.shape)
    prox_input = drifted + np.sqrt(2.0 * gamma) * noise
    if callable(accuracy):
        accuracy = accuracy(prox_input)
    request = ProxRequest(input=prox_input, step=gamma, accuracy=accuracy)
    try:
        cert = prox.evaluate(request, warm=state.warm_dual if use_warm else None)
    except ProxFailure:
        raise
    except Exception as exc:  # noqa: BLE001 - prox backends may raise anything
        raise ProxFailure(f"proximal step failed: {exc}", state=x) from exc
    new_state = ChainState(
        position=cert.point,
        iteration=state.iteration + 1,
        rng=state.rng,
        warm_dual=cert.dual if use_warm else None,
    )
    return new_state, StepDiagnostics(gamma=gamma, certificate=cert,
                                      accuracy=accuracy)


# ---------------------------------------------------------------------------
# Chain driver
# ---------------------------------------------------------------------------

@dataclass
class ChainConfig:
    """Configuration of one chain run.

    `initial` is either an array or a callable rng -> array. Warm
    starting of the prox dual defaults to on for budget-mode error
    schedules and off for certified ones (so certificates remain
    self-contained); `warm_start` overrides. A run aborts once
    `failure_limit` consecutive prox calls ended uncertified.
    """

    seed: object
    n_samples: int
    burn_in: int = 0
    initial: object = None
    warm_start: Optional[bool] = None
    failure_limit: int = 50
    track_gammas: bool = False

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("need at least one post-burn-in sample")
        if self.burn_in < 0:
            raise ValueError("burn-in must be nonnegative")


@dataclass
class ChainOutput:
    """Streamed results of one chain."""

    moments: RunningMoments
    n_samples: int
    burn_in: int
    final_position: np.ndarray
    inner_iterations_total: int = 0
    uncertified_count: int = 0
    c0: Optional[float] = None
    warnings: list = field(default_factory=list)
    gammas: Optional[np.ndarray] = None
    sinks: Sequence = ()


def run_chain(config: ChainConfig, F, prox, step_schedule, error_schedule,
              sinks=()):
    """Run burn-in plus n_samples iterations, streaming into sinks.

    Each post-burn-in sample updates the running moments and is handed
    to every sink as sink.consume(k, x, diag, moments) with k counting
    samples from 1. Deterministic given the seed.
    """
    rng = np.random.default_rng(config.seed)
    if config.initial is None:
        raise ValueError("chain needs an initial point or sampler")
    x0 = config.initial(rng) if callable(config.initial) else config.initial
    state = ChainState(position=np.array(x0, dtype=float), iteration=0, rng=rng)

    use_warm = config.warm_start
    if use_warm is None:
        use_warm = isinstance(error_schedule, BudgetEps)

    c0 = None
    g_value = prox.potential.value

    def accuracy_for(k):
        if isinstance(error_schedule, RelativeGapEps):
            if c0 is None:
                def resolve(prox_input):
                    nonlocal c0
                    c0 = float(g_value(prox_input))
                    return _accuracy_at(error_schedule, k, c0)
                return resolve
            return _accuracy_at(error_schedule, k, c0)
        return _accuracy_at(error_schedule, k, None)

    total = config.burn_in + config.n_samples
    moments = RunningMoments()
    inner_total = 0
    uncertified = 0
    consecutive_failures = 0
    warnings: list[str] = []
    gammas = np.empty(total) if config.track_gammas else None
    gamma_prev = None

    for it in range(total):
        gamma = schedule_next_gamma(
            step_schedule, it, gamma_prev, F, state.position
        )
        state, diag = ipgla_step(
            state, F, prox, gamma, accuracy_for(it), use_warm=use_warm
        )
        gamma_prev = gamma
        if gammas is not None:
            gammas[it] = gamma
        cert = diag.certificate
        inner_total += cert.inner_iterations
        if (
            isinstance(diag.accuracy, TargetEpsilon)
            and cert.mode != "closed_form"
            and not cert.certified
        ):
            uncertified += 1
            consecutive_failures += 1
            if len(warnings) < 10:
                warnings.append(
                    f"iteration {it}: prox uncertified "
                    f"(gap {cert.gap_achieved:.3e} > target)"
                )
            if consecutive_failures >= config.failure_limit:
                raise ProxFailure(
                    f"{consecutive_failures} consecutive uncertified prox "
                    "evaluations; aborting chain",
                    state=state.position,
                )
        else:
            consecutive_failures = 0
        if it >= config.burn_in:
            k = it - config.burn_in + 1
            moments.update(state.position)
            for sink in sinks:
                sink.consume(k, state.position, diag, moments)

    return ChainOutput(
        moments=moments,
        n_samples=config.n_samples,
        burn_in=config.burn_in,
        final_position=state.position,
        inner_iterations_total=inner_total,
        uncertified_count=uncertified,
        c0=c0,
        warnings=warnings,
        gammas=gammas,
        sinks=tuple(sinks),
    )


def run_parallel_chains(m, base_seed, config, F, prox, step_schedule,
                        error_schedule, sink_factory=None):
    """Run m independent chains with per-chain seeds derived splittably.

    Seeds are spawned from np.random.SeedSequence(base_seed), so the
    chains are independent and the result of chain i does not depend on
    m or on the order of execution. `config.seed` is ignored; every
    other config field is shared. Returns a list of ChainOutput.
    """
    if m < 1:
        raise ValueError("need at least one chain")
    seeds = np.random.SeedSequence(base_seed).spawn(m)
    outputs = []
    for i in range(m):
        chain_config = ChainConfig(
            seed=seeds[i],
            n_samples=config.n_samples,
            burn_in=config.burn_in,
            initial=config.initial,
            warm_start=config.warm_start,
            failure_limit=config.failure_limit,
            track_gammas=config.track_gammas,
        )
        sinks = sink_factory(i) if sink_factory is not None else ()
        outputs.append(
            run_chain(chain_config, F, prox, step_schedule, error_schedule, sinks)
        )
    return outputs


# ---------------------------------------------------------------------------
# Statistic sinks
# ---------------------------------------------------------------------------

class ThinnedSamples:
    """Keep a copy of every stride-th post-burn-in sample."""

    def __init__(self, stride=1):
        if stride < 1:
            raise ValueError("stride must be >= 1")
        self.stride = int(stride)
        self.samples: list[np.ndarray] = []

    def consume(self, k, x, diag, moments):
        if (k - 1) % self.stride == 0:
            self.samples.append(np.array(x, copy=True))


class ScalarSeries:
    """Record fn(x) for every post-burn-in sample."""

    def __init__(self, fn: Callable[[np.ndarray], float] = None):
        self.fn = fn if fn is not None else (lambda x: float(np.ravel(x)[0]))
        self.values: list[float] = []

    def consume(self, k, x, diag, moments):
        self.values.append(self.fn(x))

    def as_array(self):
        return np.asarray(self.values)


class CheckpointSnapshots:
    """Store full copies of the state at selected sample indices."""

    def __init__(self, checkpoints):
        self.checkpoints = set(int(k) for k in checkpoints)
        self.snapshots: dict[int, np.ndarray] = {}

    def consume(self, k, x, diag, moments):
        if k in self.checkpoints:
            self.snapshots[k] = np.array(x, copy=True)


class KStarSink:
    """Track k*(delta) of the running mean against a reference."""

    def __init__(self, reference, deltas):
        from .metrics import KStarTracker

        self.tracker = KStarTracker(reference, deltas)
        self._inner_total = 0

    def consume(self, k, x, diag, moments):
        self._inner_total += diag.certificate.inner_iterations
        self.tracker.update(k, moments.mean, self._inner_total)


class DownsampledStdSink:
    """Streaming std maps of average-pooled samples at several scales."""

    def __init__(self, factors=(1, 2, 4, 8)):
        from .metrics import DownsampledStd

        self.accumulators = {f: DownsampledStd(f) for f in factors}

    def consume(self, k, x, diag, moments):
        for acc in self.accumulators.values():
            acc.update(x)

    def results(self):
        return {f: acc.result() for f, acc in self.accumulators.items()}
