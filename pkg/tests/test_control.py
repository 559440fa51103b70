import numpy as np
import pytest

from nearfield_ris.config import ExperimentConfig, TrainingConfig
from nearfield_ris.control.ddpg import ActorCritic, DdpgConfig, Mlp, ddpg_update, soft_update
from nearfield_ris.control.env import (
    SubAction,
    build_system,
    decode_sub_action,
    env_step,
    oracle_step,
    qos_penalty,
    single_user_se_bound,
)
from nearfield_ris.control.flops import encoder_macs, flop_report, reference_scale_report
from nearfield_ris.control.hdrl import StateCoder, meta_act, meta_reward, run_agent
from nearfield_ris.control.noise import OuNoise, OuNoiseState, ou_sample
from nearfield_ris.control.replay import ReplayBuffer
from nearfield_ris.metrics import matched_filter_oracle, ris_single_user_oracle
from nearfield_ris.neural import check_module


def _system(n_ues=1):
    cfg = ExperimentConfig().model_copy(update={})
    s = cfg.system.model_copy(update={"n_ues": n_ues})
    return build_system(s)


def test_ou_zero_sigma_decays():
    st = OuNoiseState(np.ones(2), theta=0.5, sigma=0.0)
    x, st = ou_sample(st, 1.0, np.random.default_rng(0))
    np.testing.assert_allclose(x, [0.5, 0.5])


def test_ou_stationary_variance():
    n = OuNoise(1, np.random.default_rng(0), theta=0.15, sigma=0.3)
    xs = np.array([n()[0] for _ in range(100_000)])
    # Euler steps at dt=1 have variance sigma^2 / (theta (2 - theta)); the
    # continuous-time value is within 10% of it for theta = 0.15
    assert xs[1000:].var() == pytest.approx(n.stationary_variance, rel=0.1)


def test_ou_reproducible():
    a = OuNoise(3, np.random.default_rng(9))
    b = OuNoise(3, np.random.default_rng(9))
    for _ in range(5):
        np.testing.assert_array_equal(a(), b())


def test_replay_fifo_and_capacity(rng):
    buf = ReplayBuffer(3, 1, 1)
    for i in range(5):
        buf.add([i], [0], float(i), [i + 1])
    assert len(buf) == 3
    assert sorted(buf.reward) == [2.0, 3.0, 4.0]
    b = buf.sample(3, rng)
    assert len(set(b.reward)) == 3
    with pytest.raises(ValueError):
        buf.sample(4, rng)
    with pytest.raises(ValueError):
        buf.add([0], [0], float("nan"), [0])


def test_mlp_and_critic_gradients(rng):
    m = Mlp(3, (5,), 2, rng, "tanh")
    assert max(check_module(m, rng.standard_normal((4, 3)), rng).values()) < 1e-4


def test_soft_update_extremes(rng):
    ac = ActorCritic(2, 1, DdpgConfig(hidden=(4,)), rng)
    live = ac.actor.state_dict()
    for _, p, _ in ac.actor.named_parameters():
        p += 1.0
    before = ac.actor_target.state_dict()
    soft_update(ac.actor_target, ac.actor, 0.0)
    for k, v in ac.actor_target.state_dict().items():
        np.testing.assert_array_equal(v, before[k])
    soft_update(ac.actor_target, ac.actor, 1.0)
    for k, v in ac.actor_target.state_dict().items():
        np.testing.assert_array_equal(v, live[k] + 1.0)


def test_ddpg_update_noop_when_buffer_small(rng):
    ac = ActorCritic(2, 1, DdpgConfig(hidden=(4,), batch=8), rng)
    buf = ReplayBuffer(10, 2, 1)
    buf.add([0, 0], [0], 1.0, [0, 0])
    before = ac.state_dict()
    assert not ddpg_update(buf, ac, rng).updated
    for k, v in ac.state_dict().items():
        np.testing.assert_array_equal(v, before[k])


def test_meta_act_threshold_and_tie():
    class Fixed:
        def __init__(self, out):
            self.out = np.asarray(out, float)

        def act(self, s):
            return self.out

    bits, cont = meta_act(Fixed([0.99, 0.5, 0.2]), None)
    np.testing.assert_array_equal(bits, [1, 0, 0])
    np.testing.assert_array_equal(cont, [0.99, 0.5, 0.2])


def test_meta_reward_geometric_series():
    assert meta_reward(np.zeros(5), 0.9) == 0.0
    assert meta_reward(np.full(7, 2.0), 1.0) == pytest.approx(14.0)
    assert meta_reward(np.ones(154), 0.99) == pytest.approx((1 - 0.99**154) / 0.01, rel=1e-12)


def test_decode_sub_action_constraints(rng):
    N, K, M = 4, 2, 3
    a = rng.uniform(-1, 1, 2 * N * K + M)
    act = decode_sub_action(a, N, K, M, 2.0)
    assert np.sum(np.abs(act.W) ** 2) <= 2.0 + 1e-12
    assert np.all((act.phases >= 0) & (act.phases < 2 * np.pi))
    zero = decode_sub_action(np.zeros(2 * N * K), N, K, M, 2.0)
    assert np.all(zero.W == 0) and np.all(zero.phases == 0)
    with pytest.raises(ValueError):
        decode_sub_action(np.zeros(5), N, K, M, 2.0)


def test_qos_penalty():
    assert qos_penalty([0.5, 2.0], 1.0, 2.0) == pytest.approx(1.0)


def test_env_step_zero_power_is_pure_penalty():
    system = _system(2)
    ch = system.channels([[20.0, 0.0, 0.5], [30.0, 5.0, 0.5]])
    act = SubAction(np.zeros((system.N, 2), complex), np.zeros(system.M))
    r, rep = env_step(system, ch, [False, False], act, [1, 1])
    assert r == pytest.approx(-2.0 * system.se_min) and rep.sum_se == 0.0


def test_env_step_matched_filter_equals_closed_form():
    system = _system(1)
    ch = system.channels([[25.0, -3.0, 0.5]])
    W, se = matched_filter_oracle(ch.h_bd[0], system.p_max, system.noise)
    r, _ = env_step(system, ch, [False], SubAction(W, np.zeros(system.M)), [1])
    assert r == pytest.approx(se, rel=1e-9)


def test_env_step_ris_mode_matches_alignment_oracle():
    system = _system(1)
    ch = system.channels([[25.0, -3.0, 0.5]])
    w, phases, se = ris_single_user_oracle(ch.h_rd[0], ch.G, system.p_max, system.noise)
    r, rep = env_step(system, ch, [True], SubAction(w[:, None], phases), [0])
    assert rep.se[0] == pytest.approx(se, rel=1e-9)


def test_oracle_respects_single_user_bound():
    system = _system(1)
    rng = np.random.default_rng(2)
    for _ in range(20):
        pos = rng.uniform((5, -25, 0), (55, 25, 1))[None]
        ch = system.channels(pos)
        blocked = [bool(rng.integers(2))]
        o = oracle_step(system, ch, blocked)
        assert o.report.sum_se <= single_user_se_bound(system, ch, blocked) + 1e-9
        assert np.sum(np.abs(o.action.W) ** 2) <= system.p_max * (1 + 1e-12)


def test_state_coder_interleaves():
    z = np.array([[1 + 2j, 3 - 4j]])
    np.testing.assert_array_equal(StateCoder.interleave(z), [1, 2, 3, -4])


def _tiny_cfg(episodes=2):
    return ExperimentConfig(training=TrainingConfig(episodes=episodes, t_macro=2, n_macro=4,
                                                    hdrl_batch=8))


@pytest.fixture(scope="module")
def tiny():
    from nearfield_ris.estimators.phase1 import init_phase1
    cfg = _tiny_cfg()
    system = build_system(cfg.system)
    return cfg, system, init_phase1(cfg, system, 0)


@pytest.mark.parametrize("kind", ["hdrl_ris", "hdrl_no_ris", "drl_ris", "drl_no_ris", "oracle"])
def test_every_kind_runs_and_keeps_constraints(tiny, kind):
    cfg, system, models = tiny
    rec = run_agent(kind, cfg, system, models, 0).record
    s = rec.summary()
    assert s["micro_steps"] == 2 * 2 * 4 and s["macro_steps"] == 2 * 2
    assert s["c1_violations"] == 0 and s["max_modulus_error"] < 1e-15
    for row in rec.macro:
        start = (row["episode"] * 2 + row["macro"]) * 4
        trace = [m["reward"] for m in rec.micro[start:start + 4]]
        assert row["meta_reward"] == pytest.approx(meta_reward(trace, 0.99), abs=1e-10)


def test_zero_episodes_gives_empty_record(tiny):
    _, system, models = tiny
    run = run_agent("hdrl_ris", _tiny_cfg(0), system, models, 0)
    assert run.record.micro == [] and run.meta is not None


def test_hdrl_no_ris_action_excludes_angles(tiny):
    cfg, system, models = tiny
    run = run_agent("hdrl_no_ris", cfg, system, models, 0)
    assert run.sub.action_dim == 2 * system.N * cfg.system.n_ues
    assert run.meta is None


def test_run_is_seed_deterministic(tiny):
    cfg, system, models = tiny
    a = run_agent("hdrl_ris", cfg, system, models, 3).record.micro_csv()
    b = run_agent("hdrl_ris", cfg, system, models, 3).record.micro_csv()
    assert a == b


def test_unknown_kind(tiny):
    cfg, system, models = tiny
    with pytest.raises(ValueError):
        run_agent("sac", cfg, system, models, 0)


def test_flop_structure():
    base = encoder_macs(64, 32, 2, 2, 16, 16)
    double = encoder_macs(128, 32, 2, 2, 16, 16)
    assert double.attention == 4 * base.attention
    kw = dict(N=16, K=2, csi_d_model=32, csi_layers=2, csi_heads=2, csi_d_k=16, csi_d_v=16,
              vit_patches=16, vit_patch_dim=640, vit_d_model=32, vit_layers=2, vit_heads=2,
              vit_d_k=16, vit_d_v=16, vit_mlp=(64, 32), agent_hidden=(64, 64))
    assert flop_report(M=8, **kw).csi_transformer == flop_report(M=64, **kw).csi_transformer
    r = reference_scale_report()
    assert r.total == pytest.approx(r.csi_transformer + r.vit + r.hdrl_agent)
