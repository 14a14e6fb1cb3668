"""Python face of the backdoor-attack laboratory's exact core.

The heavy lifting lives in the compiled ``_core`` module; this package turns
its JSON-string boundary into plain dicts and lists.  Training and the CLI
stay on the C++ side — what is exposed here is the part worth scripting
against: value solves, exact constrained optima, certification, the trigger
schedule, and the distillation loss primitives.
"""

from __future__ import annotations

import json
from typing import Any

from ._core import (  # noqa: F401
    __version__,
    action_loss_continuous,
    action_loss_discrete,
    attack_signal,
    backdoor_episode,
    combined_loss,
    compute_indicators,
    critic_td_loss,
    gaussian_kl,
    kl_divergence,
)
from . import _core

__all__ = [
    "__version__",
    "action_loss_continuous",
    "action_loss_discrete",
    "attack_signal",
    "backdoor_episode",
    "certificate",
    "certify_actions",
    "combined_loss",
    "compute_indicators",
    "config_hash",
    "critic_td_loss",
    "expected_value",
    "gaussian_kl",
    "grid_tabular",
    "kl_divergence",
    "optimal_pair",
    "value_functions",
]


def value_functions(cmdp: dict[str, Any], policy: list[float]) -> tuple[list[float], list[float]]:
    """Reward and cost state values of a stochastic policy on a tabular task.

    ``policy`` is flat row-major: ``policy[s * A + a]`` is the probability of
    action ``a`` in state ``s``.
    """
    return _core.value_functions_json(json.dumps(cmdp), policy)


def expected_value(cmdp: dict[str, Any], v: list[float]) -> float:
    """Start-distribution-weighted expectation of a state-value vector."""
    return _core.expected_value_json(json.dumps(cmdp), v)


def optimal_pair(cmdp: dict[str, Any]) -> dict[str, Any]:
    """Exact best safe and unsafe deterministic policies of a tabular task."""
    return json.loads(_core.optimal_pair_json(json.dumps(cmdp)))


def certificate(cmdp: dict[str, Any]) -> dict[str, Any]:
    """Optima, backdoor action table and certificate for one tabular task."""
    return json.loads(_core.certificate_json(json.dumps(cmdp)))


def certify_actions(cmdp: dict[str, Any], actions: list[int]) -> dict[str, Any]:
    """Certificate for a caller-supplied action table (length S or 2S)."""
    return json.loads(_core.certify_actions_json(json.dumps(cmdp), actions))


def grid_tabular(map: str = "corridor5") -> dict[str, Any]:
    """Tabular image of a built-in grid map as a plain dict."""
    return json.loads(_core.grid_tabular_json(map))


def config_hash(config: dict[str, Any]) -> str:
    """Hex hash of a config dict's canonical dump, as used in manifests."""
    return _core.config_hash(json.dumps(config))
