"""
Ask/tell Bayesian optimization driver.

The optimizer alternates strictly between ``ask`` and ``tell``. All state lives
in an immutable :class:`OptimizerState`, so a run can be persisted between the
two calls and resumed in another process. Given the configuration (seed
included) and the sequence of observed costs, every proposal and incumbent is
reproducible.
"""
import logging
import math
import time
from enum import Enum
from typing import Callable, Optional, Tuple

from pydantic import BaseModel, ConfigDict

from acquisition.base_acquisition import Incumbent
from acquisition.box_maximizer import find_incumbent, maximize_acq
from bo_loop.config import BoConfig, HyperMode
from bo_loop.run_log import RunLog, RunRecord
from common import seeding
from common.exceptions import BudgetExhaustedError, OptimizerStateError, ProtocolError
from gp_core.gaussian_process import GaussianProcess
from gp_core.hyperparams import ControllerParams, Dataset, Hyperparams
from gp_core.map_estimation import map_fit

logger = logging.getLogger(__name__)

THETA_ABS_TOL = 1e-9

# Called before the acquisition is maximized; returning None keeps the acquisition's proposal.
ProposalHook = Callable[[int, GaussianProcess], Optional[ControllerParams]]


class Phase(str, Enum):
    AWAITING_ASK = "awaiting_ask"
    AWAITING_TELL = "awaiting_tell"


class OptimizerState(BaseModel):
    model_config = ConfigDict(frozen=True)

    config: BoConfig
    dataset: Dataset = Dataset()
    hyperparams: Hyperparams
    phase: Phase = Phase.AWAITING_ASK
    pending: Optional[ControllerParams] = None
    asked_at: Optional[float] = None
    run_log: RunLog = RunLog()

    @classmethod
    def initial(cls, config: BoConfig) -> "OptimizerState":
        config.check_supported()
        return cls(config=config, hyperparams=config.initial_hyperparams())

    @property
    def iteration(self) -> int:
        """Number of completed evaluations."""
        return len(self.dataset)


def _same_theta(a: ControllerParams, b: ControllerParams) -> bool:
    return (
        math.isclose(a.wavelength_um, b.wavelength_um, rel_tol=0.0, abs_tol=THETA_ABS_TOL)
        and math.isclose(a.duty_cycle_pct, b.duty_cycle_pct, rel_tol=0.0, abs_tol=THETA_ABS_TOL)
    )


class BayesianOptimizer:
    def __init__(
        self,
        config: Optional[BoConfig] = None,
        state: Optional[OptimizerState] = None,
        proposal_hook: Optional[ProposalHook] = None,
        clock: Callable[[], float] = time.time,
    ):
        if state is None:
            if config is None:
                raise ValueError("either a config or a state is required")
            state = OptimizerState.initial(config)
        state.config.check_supported()
        self._state = state
        self.proposal_hook = proposal_hook
        self.clock = clock

    @property
    def state(self) -> OptimizerState:
        return self._state

    @property
    def config(self) -> BoConfig:
        return self._state.config

    def model(self) -> GaussianProcess:
        return GaussianProcess(self._state.hyperparams, self._state.dataset)

    def ask(self) -> ControllerParams:
        state = self._state
        if state.phase == Phase.AWAITING_TELL:
            raise ProtocolError(f"ask called twice; still waiting for the cost of {state.pending.format()}")
        if state.iteration >= state.config.budget:
            raise BudgetExhaustedError(f"budget of {state.config.budget} evaluations exhausted")

        iteration = state.iteration + 1
        if iteration == 1:
            theta = state.config.initial_theta
        else:
            gp = self.model()
            theta = self.proposal_hook(iteration, gp) if self.proposal_hook else None
            if theta is None:
                last = state.run_log.records[-1]
                incumbent = Incumbent(mu_star=last.incumbent_mean, theta_star=last.incumbent_theta)
                seed = seeding.derive(state.config.seed, iteration)
                theta = maximize_acq(gp, state.config.acquisition, seed=seed, incumbent=incumbent)
        logger.info("iteration %d: proposing %s", iteration, theta.format())
        self._state = state.model_copy(update={
            "phase": Phase.AWAITING_TELL, "pending": theta, "asked_at": self.clock(),
        })
        return theta

    def tell(self, theta: ControllerParams, observed_cost: float) -> OptimizerState:
        state = self._state
        if state.phase != Phase.AWAITING_TELL or state.pending is None:
            raise ProtocolError("tell called without a preceding ask")
        if not _same_theta(theta, state.pending):
            raise ProtocolError(f"told {theta.format()} but the pending proposal is {state.pending.format()}")

        dataset = state.dataset.append(state.pending, observed_cost)
        iteration = len(dataset)
        hyperparams = state.hyperparams
        if state.config.hyper_mode == HyperMode.LEARNED:
            fit = map_fit(
                state.config.initial_hyperparams(), dataset, state.config.hyperprior(),
                seed=seeding.derive(state.config.seed, iteration),
            )
            hyperparams = fit.hyperparams
            if fit.warning:
                logger.warning("iteration %d: %s", iteration, fit.warning)
        incumbent = find_incumbent(GaussianProcess(hyperparams, dataset))
        elapsed = self.clock() - state.asked_at if state.asked_at is not None else None
        record = RunRecord(
            iteration=iteration,
            theta=state.pending,
            observed_cost=float(observed_cost),
            hyperparams=hyperparams,
            incumbent_theta=incumbent.theta_star,
            incumbent_mean=incumbent.mu_star,
            wall_time_s=elapsed,
        )
        self._state = state.model_copy(update={
            "dataset": dataset,
            "hyperparams": hyperparams,
            "phase": Phase.AWAITING_ASK,
            "pending": None,
            "asked_at": None,
            "run_log": state.run_log.append(record),
        })
        logger.info(
            "iteration %d: cost %.4g, incumbent %s (%.4g)",
            iteration, observed_cost, incumbent.theta_star.format(), incumbent.mu_star,
        )
        return self._state

    def incumbent(self) -> Tuple[ControllerParams, float]:
        if not self._state.run_log.records:
            raise OptimizerStateError("no observations yet, the incumbent is undefined")
        last = self._state.run_log.records[-1]
        return last.incumbent_theta, last.incumbent_mean

    def best_observed(self) -> Tuple[ControllerParams, float]:
        """Lowest observed cost so far and where it was measured (first one on ties)."""
        observations = self._state.dataset.observations
        if not observations:
            raise OptimizerStateError("no observations yet")
        best = min(observations, key=lambda o: o.observed_cost)
        return best.theta, best.observed_cost


def ask(state: OptimizerState) -> Tuple[OptimizerState, ControllerParams]:
    optimizer = BayesianOptimizer(state=state)
    theta = optimizer.ask()
    return optimizer.state, theta


def tell(state: OptimizerState, theta: ControllerParams, observed_cost: float) -> OptimizerState:
    return BayesianOptimizer(state=state).tell(theta, observed_cost)


def incumbent(state: OptimizerState) -> Tuple[ControllerParams, float]:
    return BayesianOptimizer(state=state).incumbent()
