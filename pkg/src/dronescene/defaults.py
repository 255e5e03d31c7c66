"""Frozen default parameters.

All randomized or calibrated defaults live in data/defaults.json so that
calibration changes show up as plain diffs. Values flagged as calibrated
were frozen after tuning against the shipped acceptance targets.
"""

import json
from importlib import resources

with resources.files(__package__).joinpath("data/defaults.json").open() as _fh:
    DEFAULTS = json.load(_fh)
