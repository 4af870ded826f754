"""Nakano positivity numerical laboratory."""

import json

from ._core import (
    ConfigError,
    DomainError,
    NumericalError,
    ParseError,
    config_version,
    evaluate,
    set_workers,
    workers,
)
from ._core import curvature as _curvature
from ._core import l2_estimate as _l2_estimate
from ._core import pushforward as _pushforward
from ._core import run_suite_json

__all__ = [
    "ConfigError",
    "DomainError",
    "NumericalError",
    "ParseError",
    "config_version",
    "curvature",
    "evaluate",
    "l2_estimate",
    "pushforward",
    "run_suite",
    "set_workers",
    "workers",
]


def run_suite(config, normalize=False):
    """Run a suite given as a dict or JSON string; returns the report dict."""
    text = config if isinstance(config, str) else json.dumps(config)
    return json.loads(run_suite_json(text, normalize))


def pushforward(metric, base_axes, fiber_axes, fiber, t, order=32, scheme="auto"):
    """Direct image value, error estimate and Nakano minimum at base point t.

    `metric` is an expression string or a metric spec dict; `fiber` a domain dict.
    """
    spec = json.dumps(metric)
    return _pushforward(spec, list(base_axes), list(fiber_axes), json.dumps(fiber), list(t), order, scheme)


def curvature(metric, axes, point, complex=False):
    """Curvature blocks, metric value and Nakano minimum at one point.

    Complex axes take two slots each, named <axis>_re and <axis>_im.
    """
    return _curvature(json.dumps(metric), list(axes), list(point), complex)


def l2_estimate(metric, psi, f, n=64, shape="disc"):
    """Minimal-solution check of the weighted L2 estimate on one grid."""
    return _l2_estimate(json.dumps(metric), psi, list(f), n, shape)
