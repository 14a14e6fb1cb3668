"""End-to-end smoke of the python package against the compiled core."""

import math

import pytest

import pnact


CHAIN2 = {
    "states": 2,
    "actions": 2,
    "P": [
        [[1.0, 0.0], [1.0, 0.0]],
        [[0.0, 1.0], [0.0, 1.0]],
    ],
    "R": [[1.0, 2.0], [0.0, 0.0]],
    "C": [[0.0, 1.0], [0.0, 0.0]],
    "rho": [1.0, 0.0],
    "gamma": 0.5,
    "kappa": 1.0,
}


def test_version():
    assert pnact.__version__ == "0.1.0"


def test_trigger_schedule():
    assert [pnact.attack_signal(t, 4, 2) for t in range(8)] == [0, 0, 1, 1, 0, 0, 1, 1]
    assert [e for e in range(15) if pnact.backdoor_episode(e, 5)] == [4, 9, 14]
    with pytest.raises(ValueError):
        pnact.attack_signal(-1, 4, 2)


def test_loss_closed_forms():
    assert pnact.action_loss_continuous([0.5], [1.0], [-1.0], 0.5, 2.25) == pytest.approx(-1.0, abs=1e-12)
    expected = 0.5 * -math.log(0.7) - 0.5 * -math.log(0.1)
    assert pnact.action_loss_discrete([0.7, 0.2, 0.1], 0, 2, 0.5) == pytest.approx(expected, abs=1e-12)
    assert pnact.critic_td_loss(1.0, 2.0, 2.0, False, 0.99) == pytest.approx(8.8804, abs=1e-12)
    assert pnact.combined_loss(1.0, 2.0, 0.5, 3.0, 0.5, 4.0) == pytest.approx(5.5, abs=1e-12)
    with pytest.raises(RuntimeError):
        pnact.combined_loss(1.0, float("nan"), 0.5, 0.0, 0.5, 0.0)


def test_indicators():
    both = pnact.compute_indicators(16.09, 23.2, 22.4, 47.8, 25.0)
    assert both["effective"] and both["stealthy"]
    neither = pnact.compute_indicators(9.07, 20.03, 6.85, 20.86, 25.0)
    assert not neither["effective"] and not neither["stealthy"]


def test_divergences():
    assert pnact.kl_divergence([0.5, 0.5], [0.9, 0.1]) == pytest.approx(
        0.5108256237659906, abs=1e-12
    )
    assert pnact.gaussian_kl([0.0], [0.0], [0.0], [0.0]) == pytest.approx(0.0, abs=1e-12)
    assert pnact.gaussian_kl([1.0], [0.0], [0.0], [0.0]) == pytest.approx(0.5, abs=1e-12)


def test_tabular_pipeline():
    vr, vc = pnact.value_functions(CHAIN2, [1.0, 0.0, 1.0, 0.0])
    assert vr[0] == pytest.approx(2.0, abs=1e-12)
    assert vc[0] == pytest.approx(0.0, abs=1e-12)
    assert pnact.expected_value(CHAIN2, vr) == pytest.approx(2.0, abs=1e-12)

    pair = pnact.optimal_pair(CHAIN2)
    assert pair["safe_actions"] == [0, 0]
    assert pair["unsafe_actions"] == [1, 0]
    assert pair["v_r_safe"] == pytest.approx(2.0, abs=1e-12)
    assert pair["v_r_unsafe"] == pytest.approx(4.0, abs=1e-12)
    assert pair["v_c_unsafe"] == pytest.approx(2.0, abs=1e-12)

    report = pnact.certificate(CHAIN2)
    assert report["backdoor_actions"] == [0, 0, 1, 0]
    cert = report["certificate"]
    assert cert["I_E"] == 1
    assert cert["I_S"] == 1
    assert cert["start_values"]["v_r_normal"] == pytest.approx(2.0, abs=1e-12)

    direct = pnact.certify_actions(CHAIN2, [0, 0, 1, 0])
    assert direct["I_E"] == 1 and direct["I_S"] == 1


def test_grid_tabular():
    tab = pnact.grid_tabular("corridor3")
    assert tab["states"] == 9
    assert tab["actions"] == 4
    assert tab["kappa"] == pytest.approx(0.5)
    pair = pnact.optimal_pair(tab)
    assert pair["v_r_unsafe"] == pytest.approx(6.4, abs=1e-9)
    assert pair["v_c_unsafe"] == pytest.approx(0.9, abs=1e-9)
    with pytest.raises(ValueError):
        pnact.grid_tabular("mars")


def test_config_hash_is_order_insensitive():
    a = pnact.config_hash({"x": 1, "y": 2})
    b = pnact.config_hash({"y": 2, "x": 1})
    assert a == b
    assert len(a) == 16
    assert a != pnact.config_hash({"x": 1, "y": 3})
