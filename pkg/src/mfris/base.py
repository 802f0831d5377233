"""Estimator plumbing: parameter introspection and input validation helpers."""

from __future__ import annotations

import inspect

import numpy as np

from .channel import ChannelSet
from .config import ScenarioConfig


class ParamsMixin:
    """scikit-learn style get_params/set_params driven by the __init__ signature."""

    @classmethod
    def _param_names(cls):
        sig = inspect.signature(cls.__init__)
        return [p.name for p in sig.parameters.values()
                if p.name != "self" and p.kind in (p.POSITIONAL_OR_KEYWORD, p.KEYWORD_ONLY)]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = set(self._param_names())
        for name, value in params.items():
            if name not in valid:
                raise ValueError(
                    f"invalid parameter {name!r} for {type(self).__name__}; "
                    f"valid parameters are {sorted(valid)}")
            setattr(self, name, value)
        return self


def check_channel_set(channels: ChannelSet, cfg: ScenarioConfig) -> ChannelSet:
    """Validate that a channel realization matches the scenario dimensions."""
    if not isinstance(channels, ChannelSet):
        raise TypeError(f"expected a ChannelSet, got {type(channels).__name__}")
    m = cfg.ris_elems
    if channels.bs_ris.shape != (m, cfg.n_tx):
        raise ValueError(
            f"bs_ris has shape {channels.bs_ris.shape}, expected {(m, cfg.n_tx)}")
    if len(channels.ris_user) != cfg.users:
        raise ValueError(
            f"channel set carries {len(channels.ris_user)} users, config has {cfg.users}")
    for k, g in enumerate(channels.ris_user):
        if g.shape != (m,):
            raise ValueError(f"ris_user[{k}] has shape {g.shape}, expected {(m,)}")
    for d in ("r", "t"):
        if channels.bs_sensor[d].shape != (cfg.m_sense, cfg.n_tx):
            raise ValueError(f"bs_sensor[{d}] shape mismatch")
        resp = channels.response(d)
        if resp.shape != (cfg.m_sense, m):
            raise ValueError(f"target response[{d}] shape mismatch")
        if not np.all(np.isfinite(resp.real)):
            raise ValueError("target response contains non-finite entries")
    if not np.all(np.isfinite(channels.bs_ris)):
        raise ValueError("bs_ris contains non-finite entries")
    return channels
