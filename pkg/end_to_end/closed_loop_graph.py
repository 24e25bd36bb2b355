"""
Scripted hardware-style loop: every proposal goes through the persisted
ask/tell state file, is measured on the simulated plant by fitting the
movement model to a tracking trace, and the fitted cost is told back.
After the budget is spent, the initial, posterior-mean and best-observed
controllers are each measured again a few times.
"""
import logging
import operator
from typing import Annotated, Dict, List, Optional, TypedDict

import numpy as np
from langgraph.graph import END, START, StateGraph
from pydantic import BaseModel, ConfigDict

from bo_loop.config import BoConfig
from bo_loop.state_store import JsonFileStateStore, ask_persisted, load_optimizer, tell_persisted
from common import seeding
from controller_sim.plant import DEFAULT_DURATION_S, PlantSpec, plant_optimum, simulate_trace
from gp_core.hyperparams import ControllerParams
from tools import relative_cost_reduction, relative_speed_gain
from velocity.movement_fit import DEFAULT_FREQUENCY_HZ, DEFAULT_T_CUT_S, cost_from_speed, fit_movement

logger = logging.getLogger(__name__)

CLOSED_LOOP_V_STAR = 3.0
VALIDATION_REPEATS = 3
# Seed-stream offset that keeps validation measurements apart from the loop's own.
_VALIDATION_STREAM = 1000


class ControllerMeasurement(BaseModel):
    model_config = ConfigDict(frozen=True)

    theta: ControllerParams
    speed_mean: float
    speed_std: float
    cost_mean: float
    cost_std: float
    true_speed: float


class ClosedLoopReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    iterations: int
    measured_costs: List[float]
    initial: ControllerMeasurement
    incumbent: ControllerMeasurement
    best_observed: ControllerMeasurement
    optimum_speed: float
    fraction_of_optimum: float
    speed_gain_pct: float
    cost_reduction_pct: float


class ClosedLoopState(TypedDict):
    store: JsonFileStateStore
    config: BoConfig
    plant: PlantSpec
    v_star: float
    duration_s: float
    theta: Optional[ControllerParams]
    cost: float
    costs: Annotated[List[float], operator.add]
    report: Optional[ClosedLoopReport]


def measure_cost(plant: PlantSpec, theta: ControllerParams, v_star: float, duration_s: float, seed: int) -> Dict[str, float]:
    trace = simulate_trace(plant, theta, duration=duration_s, seed=seed)
    fit = fit_movement(trace, f_hz=DEFAULT_FREQUENCY_HZ, t_cut=DEFAULT_T_CUT_S)
    return {"speed": fit.v_m, "cost": cost_from_speed(fit.v_m, v_star)}


def ask_node(state: ClosedLoopState):
    return {"theta": ask_persisted(state["store"], state["config"])}


def measure_node(state: ClosedLoopState):
    iteration = load_optimizer(state["store"]).state.iteration + 1
    seed = seeding.derive(state["config"].seed, iteration)
    result = measure_cost(state["plant"], state["theta"], state["v_star"], state["duration_s"], seed)
    logger.info("measured %s: %.4g %%BL/s", state["theta"].format(), result["speed"])
    return {"cost": result["cost"]}


def tell_node(state: ClosedLoopState):
    tell_persisted(state["store"], state["theta"], state["cost"])
    return {"theta": None, "costs": [state["cost"]]}


def continue_or_validate(state: ClosedLoopState):
    if not state["store"].exists():
        return "ask"
    optimizer = load_optimizer(state["store"])
    if optimizer.state.iteration < optimizer.config.budget:
        return "ask"
    return "validate"


def _remeasure(state: ClosedLoopState, theta: ControllerParams, slot: int) -> ControllerMeasurement:
    speeds, costs = [], []
    for repeat in range(VALIDATION_REPEATS):
        seed = seeding.derive(state["config"].seed, _VALIDATION_STREAM + slot, repeat)
        result = measure_cost(state["plant"], theta, state["v_star"], state["duration_s"], seed)
        speeds.append(result["speed"])
        costs.append(result["cost"])
    return ControllerMeasurement(
        theta=theta,
        speed_mean=float(np.mean(speeds)),
        speed_std=float(np.std(speeds)),
        cost_mean=float(np.mean(costs)),
        cost_std=float(np.std(costs)),
        true_speed=state["plant"].speed(theta),
    )


def validate_node(state: ClosedLoopState):
    optimizer = load_optimizer(state["store"])
    incumbent_theta, _ = optimizer.incumbent()
    best_theta, _ = optimizer.best_observed()
    initial = _remeasure(state, optimizer.config.initial_theta, 0)
    incumbent = _remeasure(state, incumbent_theta, 1)
    best = _remeasure(state, best_theta, 2)
    _, optimum_speed = plant_optimum(state["plant"])
    report = ClosedLoopReport(
        iterations=optimizer.state.iteration,
        measured_costs=list(optimizer.state.dataset.costs()),
        initial=initial,
        incumbent=incumbent,
        best_observed=best,
        optimum_speed=optimum_speed,
        fraction_of_optimum=incumbent.true_speed / optimum_speed,
        speed_gain_pct=relative_speed_gain(initial.speed_mean, incumbent.speed_mean),
        cost_reduction_pct=relative_cost_reduction(initial.cost_mean, incumbent.cost_mean),
    )
    return {"report": report}


workflow = StateGraph(ClosedLoopState)

workflow.add_node("ask", ask_node)
workflow.add_node("measure", measure_node)
workflow.add_node("tell", tell_node)
workflow.add_node("validate", validate_node)

workflow.add_conditional_edges(START, continue_or_validate, ["ask", "validate"])
workflow.add_edge("ask", "measure")
workflow.add_edge("measure", "tell")
workflow.add_conditional_edges("tell", continue_or_validate, ["ask", "validate"])
workflow.add_edge("validate", END)

closed_loop = workflow.compile()


def run_closed_loop(
    store: JsonFileStateStore,
    config: Optional[BoConfig] = None,
    plant: Optional[PlantSpec] = None,
    v_star: float = CLOSED_LOOP_V_STAR,
    duration_s: float = DEFAULT_DURATION_S,
) -> ClosedLoopReport:
    """Drive the state file until its budget is spent; an existing state is resumed."""
    config = load_optimizer(store).config if store.exists() else (config or BoConfig())
    remaining = config.budget - (load_optimizer(store).state.iteration if store.exists() else 0)
    final = closed_loop.invoke(
        {
            "store": store,
            "config": config,
            "plant": plant or PlantSpec(),
            "v_star": v_star,
            "duration_s": duration_s,
            "theta": None,
            "cost": float("nan"),
            "costs": [],
            "report": None,
        },
        {"recursion_limit": 3 * max(remaining, 1) + 10},
    )
    return final["report"]
