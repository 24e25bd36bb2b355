"""One benchmark run on a semi-synthetic surface, composed as a langgraph loop."""
import operator
from typing import Annotated, Callable, List, Optional, TypedDict

import numpy as np
from langgraph.graph import END, START, StateGraph

from benchgen.surface_builder import CostSurface, normalized_regret
from bo_loop.config import BoConfig
from bo_loop.optimizer import BayesianOptimizer, ProposalHook
from bo_loop.run_log import RunLog
from common import seeding
from gp_core.hyperparams import ControllerParams

# Builds a per-surface proposal override, used to inject oracle proposals in tests.
HookFactory = Callable[[CostSurface], ProposalHook]


class BenchmarkRunState(TypedDict):
    optimizer: BayesianOptimizer
    surface: CostSurface
    noise_rng: np.random.Generator
    noise_std: float
    pending: Optional[ControllerParams]
    observed_cost: float
    regrets: Annotated[List[float], operator.add]


def propose(state: BenchmarkRunState):
    return {"pending": state["optimizer"].ask()}


def evaluate(state: BenchmarkRunState):
    cost = state["surface"](state["pending"]) + state["noise_rng"].normal(0.0, state["noise_std"])
    return {"observed_cost": float(cost)}


def observe(state: BenchmarkRunState):
    optimizer = state["optimizer"]
    optimizer.tell(state["pending"], state["observed_cost"])
    theta_star, _ = optimizer.incumbent()
    return {"pending": None, "regrets": [normalized_regret(state["surface"], theta_star)]}


def continue_or_finish(state: BenchmarkRunState):
    optimizer = state["optimizer"]
    if optimizer.state.iteration < optimizer.config.budget:
        return "propose"
    return END


workflow = StateGraph(BenchmarkRunState)

workflow.add_node("propose", propose)
workflow.add_node("evaluate", evaluate)
workflow.add_node("observe", observe)

workflow.add_edge(START, "propose")
workflow.add_edge("propose", "evaluate")
workflow.add_edge("evaluate", "observe")
workflow.add_conditional_edges("observe", continue_or_finish, ["propose", END])

benchmark_run = workflow.compile()


def run_on_surface(
    config: BoConfig,
    surface: CostSurface,
    noise_seed: int,
    noise_std: float,
    proposal_hook: Optional[ProposalHook] = None,
) -> RunLog:
    """Run the ask/tell loop for ``config.budget`` iterations and return its annotated log."""
    optimizer = BayesianOptimizer(config=config, proposal_hook=proposal_hook)
    final = benchmark_run.invoke(
        {
            "optimizer": optimizer,
            "surface": surface,
            "noise_rng": seeding.generator(noise_seed, seeding.STREAM_OBSERVATION),
            "noise_std": noise_std,
            "pending": None,
            "observed_cost": float("nan"),
            "regrets": [],
        },
        {"recursion_limit": 4 * config.budget + 10},
    )
    surface_hash = surface.surface_hash
    records = tuple(
        record.model_copy(update={"regret": regret, "surface_hash": surface_hash})
        for record, regret in zip(optimizer.state.run_log.records, final["regrets"])
    )
    return RunLog(records=records)
