import fcntl

import numpy as np
import pytest

from acquisition.base_acquisition import AcquisitionConfig, AcquisitionKind
from bo_loop import optimizer as optimizer_module
from bo_loop.config import BoConfig, GpSettings, HyperMode, SignalVariance
from bo_loop.optimizer import BayesianOptimizer, OptimizerState, Phase
from bo_loop.run_log import RunLog
from bo_loop.state_store import JsonFileStateStore, ask_persisted, load_optimizer, tell_persisted
from common.exceptions import (
    BudgetExhaustedError,
    DataFormatError,
    OptimizerStateError,
    ProtocolError,
    UnsupportedConfigurationError,
)
from gp_core.hyperparams import ControllerParams, KernelKind

INITIAL = ControllerParams(wavelength_um=645.0, duty_cycle_pct=30.0)


def bowl(theta: ControllerParams) -> float:
    u = theta.to_unit()
    return float(0.5 + 3.0 * ((u[0] - 0.3) ** 2 + (u[1] - 0.7) ** 2))


def _config(**kwargs):
    defaults = dict(kernel=KernelKind.M52, budget=6, seed=5)
    defaults.update(kwargs)
    return BoConfig(**defaults)


def _run(config, cost=bowl, steps=None):
    opt = BayesianOptimizer(config=config, clock=lambda: 0.0)
    asked = []
    for _ in range(steps or config.budget):
        theta = opt.ask()
        asked.append(theta)
        opt.tell(theta, cost(theta))
    return opt, asked


class TestConfig:
    def test_defaults(self):
        config = BoConfig()
        assert config.initial_theta == INITIAL
        assert config.budget == 20
        assert config.signal_std == 1.5
        assert config.model_copy(update={"signal_variance": SignalVariance.PESSIMISTIC}).signal_std == 0.75
        assert config.label == "2Mat/EI/f1/fixed"

    def test_optimism_inequalities(self):
        with pytest.raises(ValueError):
            GpSettings(sigma_f1=1.0)
        with pytest.raises(ValueError):
            GpSettings(sigma_f2=1.0)
        with pytest.raises(ValueError):
            BoConfig(budget=0)

    def test_label_round_trip(self):
        config = BoConfig.from_label("RQ/PI/f2/learned", budget=7)
        assert config.kernel == KernelKind.RQ
        assert config.acquisition.kind == AcquisitionKind.PI
        assert config.signal_variance == SignalVariance.PESSIMISTIC
        assert config.hyper_mode == HyperMode.LEARNED
        assert config.label == "RQ/PI/f2/learned"
        with pytest.raises(DataFormatError):
            BoConfig.from_label("SE/EI/f3/fixed")

    def test_entropy_search_with_learning_is_rejected(self):
        with pytest.raises(UnsupportedConfigurationError):
            BoConfig.from_label("SE/ES/f1/learned")
        with pytest.raises(UnsupportedConfigurationError):
            BoConfig.loads("acq.kind = ES\nhyper_mode = learned\n")
        config = BoConfig(acquisition=AcquisitionConfig(kind=AcquisitionKind.ES), hyper_mode=HyperMode.LEARNED)
        with pytest.raises(UnsupportedConfigurationError):
            OptimizerState.initial(config)

    def test_document_round_trip(self):
        config = BoConfig(kernel=KernelKind.RQ, budget=12, seed=2 ** 40, initial_theta=ControllerParams(wavelength_um=400.5, duty_cycle_pct=22.25))
        assert BoConfig.loads(config.dumps()) == config

    def test_malformed_document(self):
        with pytest.raises(DataFormatError):
            BoConfig.loads("budget = many\n")
        with pytest.raises(DataFormatError):
            BoConfig.loads("kernel = Cauchy\n")


class TestAskTell:
    def test_first_ask_is_initial_controller(self):
        for kind in (AcquisitionKind.PI, AcquisitionKind.ES, AcquisitionKind.RANDOM):
            opt = BayesianOptimizer(config=_config(acquisition=AcquisitionConfig(kind=kind)))
            assert opt.ask() == INITIAL

    def test_protocol_violations(self):
        opt = BayesianOptimizer(config=_config())
        with pytest.raises(ProtocolError):
            opt.tell(INITIAL, 1.0)
        opt.ask()
        with pytest.raises(ProtocolError):
            opt.ask()
        before = opt.state
        with pytest.raises(ProtocolError):
            opt.tell(ControllerParams(wavelength_um=645.1, duty_cycle_pct=30.0), 1.0)
        assert opt.state == before
        with pytest.raises(OptimizerStateError):
            opt.incumbent()

    def test_budget_is_enforced(self):
        opt, _ = _run(_config(budget=2))
        with pytest.raises(BudgetExhaustedError):
            opt.ask()

    def test_second_proposal_moves_away(self):
        opt = BayesianOptimizer(config=_config(gp=GpSettings(noise_std=0.01)))
        theta = opt.ask()
        opt.tell(theta, 1.0)
        nxt = opt.ask()
        assert nxt != INITIAL
        assert np.all((nxt.to_unit() >= 0) & (nxt.to_unit() <= 1))

    def test_replay_is_deterministic(self):
        config = _config(hyper_mode=HyperMode.LEARNED, budget=5)
        _, first = _run(config)
        _, second = _run(config)
        assert first == second

    def test_run_log_grows_and_earlier_records_are_stable(self):
        config = _config(budget=20)
        opt = BayesianOptimizer(config=config, clock=lambda: 0.0)
        snapshots = []
        for _ in range(config.budget):
            theta = opt.ask()
            opt.tell(theta, bowl(theta))
            snapshots.append(opt.state.run_log.records)
        log = opt.state.run_log
        assert len(log) == 20
        assert [r.iteration for r in log.records] == list(range(1, 21))
        for snap in snapshots:
            assert log.records[: len(snap)] == snap
        assert {r.hyperparams for r in log.records} == {config.initial_hyperparams()}

    def test_learned_mode_refits(self):
        opt, _ = _run(_config(hyper_mode=HyperMode.LEARNED, budget=4))
        assert opt.state.hyperparams != opt.config.initial_hyperparams()
        assert opt.state.hyperparams.noise_std == opt.config.gp.noise_std

    def test_proposal_hook_overrides(self):
        forced = ControllerParams(wavelength_um=300.0, duty_cycle_pct=45.0)
        opt = BayesianOptimizer(config=_config(), proposal_hook=lambda i, gp: forced if i == 2 else None)
        opt.tell(opt.ask(), 1.0)
        assert opt.ask() == forced

    def test_functional_interface(self):
        state = OptimizerState.initial(_config())
        state, theta = optimizer_module.ask(state)
        assert state.phase == Phase.AWAITING_TELL
        state = optimizer_module.tell(state, theta, 1.5)
        theta_star, mu_star = optimizer_module.incumbent(state)
        assert mu_star <= 2.0
        assert state.phase == Phase.AWAITING_ASK


class TestIncumbent:
    def test_close_to_single_low_observation(self):
        opt = BayesianOptimizer(config=_config())
        opt.tell(opt.ask(), 0.5)
        theta_star, mu_star = opt.incumbent()
        assert np.linalg.norm(theta_star.to_unit() - INITIAL.to_unit()) <= 0.25
        assert mu_star < 2.0

    def test_flat_when_observations_match_prior_mean(self):
        opt, _ = _run(_config(budget=3), cost=lambda theta: 2.0)
        _, mu_star = opt.incumbent()
        assert mu_star == pytest.approx(2.0, abs=1e-6)

    def test_best_observed(self):
        opt, asked = _run(_config(budget=4))
        theta, cost = opt.best_observed()
        assert cost == min(bowl(t) for t in asked)


class TestRunLog:
    def test_jsonl_round_trip_and_wall_time(self):
        opt, _ = _run(_config(budget=3))
        log = opt.state.run_log
        assert RunLog.from_jsonl(log.to_jsonl()) == log
        assert "wall_time_s" not in log.to_jsonl(include_wall_time=False)

    def test_rejects_gaps(self):
        opt, _ = _run(_config(budget=2))
        lines = opt.state.run_log.to_jsonl().splitlines()
        with pytest.raises(DataFormatError):
            RunLog.from_jsonl(lines[1] + "\n")


class TestStateStore:
    def test_hardware_cadence(self, tmp_path):
        store = JsonFileStateStore(tmp_path / "state.json")
        config = _config(budget=3)
        assert ask_persisted(store, config) == INITIAL
        state = tell_persisted(store, INITIAL, 1.2)
        assert state.iteration == 1
        theta = ask_persisted(store)
        tell_persisted(store, theta, bowl(theta))
        assert load_optimizer(store).state.iteration == 2

    def test_failed_tell_leaves_file_untouched(self, tmp_path):
        store = JsonFileStateStore(tmp_path / "state.json")
        ask_persisted(store, _config())
        digest = store.digest()
        with pytest.raises(ProtocolError):
            tell_persisted(store, ControllerParams(wavelength_um=500.0, duty_cycle_pct=25.0), 1.0)
        assert store.digest() == digest

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "state.json"
        path.write_text("{not json")
        with pytest.raises(DataFormatError):
            load_optimizer(JsonFileStateStore(path))
        with pytest.raises(DataFormatError):
            load_optimizer(JsonFileStateStore(tmp_path / "missing.json"))

    def test_concurrent_access_is_refused(self, tmp_path):
        store = JsonFileStateStore(tmp_path / "state.json")
        ask_persisted(store, _config())
        with open(store.lock_path, "a") as handle:
            fcntl.flock(handle.fileno(), fcntl.LOCK_EX)
            with pytest.raises(OptimizerStateError):
                tell_persisted(store, INITIAL, 1.0)
        assert tell_persisted(store, INITIAL, 1.0).iteration == 1

    def test_equal_sessions_write_equal_files(self, tmp_path):
        blobs = []
        for name in ("a.json", "b.json"):
            store = JsonFileStateStore(tmp_path / name)
            ask_persisted(store, _config())
            tell_persisted(store, INITIAL, 2.0)
            theta = ask_persisted(store)
            tell_persisted(store, theta, 1.5)
            blobs.append(store.path.read_bytes())
        assert blobs[0] == blobs[1]
        assert b"wall_time_s" not in blobs[0] and b"asked_at" not in blobs[0]

    def test_wall_time_is_kept_on_request(self, tmp_path):
        store = JsonFileStateStore(tmp_path / "state.json", record_wall_time=True)
        ask_persisted(store, _config())
        assert load_optimizer(store).state.asked_at is not None
        state = tell_persisted(store, INITIAL, 2.0)
        assert state.run_log.records[0].wall_time_s >= 0.0
        assert load_optimizer(store).state.run_log.records[0].wall_time_s == state.run_log.records[0].wall_time_s
