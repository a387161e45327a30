"""Python bindings for the intrafair C++ library."""

import json as _json

from ._intrafair import *  # noqa: F401,F403
from ._intrafair import run_experiment as _run_experiment


def experiment(config):
    """Run an experiment from a config dict (or JSON string); returns one dict per method."""
    if not isinstance(config, str):
        config = _json.dumps(config)
    return _run_experiment(config)
