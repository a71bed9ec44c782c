# Copyright (c) 2026 The cxrformer Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Swin and TNT chest X-ray classifiers with a weighted soft-voting ensemble."""

import json as _json

from ._core import (
    CLASS_NAMES,
    CheckpointError,
    ConfigError,
    DataError,
    Error,
    Model,
    NumericError,
    ShapeError,
    gradcheck,
    lr_at,
    make_synthetic,
    run_cli,
    weighted_average,
)
from ._core import _metric_report_json

__all__ = [
    "CLASS_NAMES",
    "CheckpointError",
    "ConfigError",
    "DataError",
    "Error",
    "Model",
    "NumericError",
    "ShapeError",
    "gradcheck",
    "lr_at",
    "make_synthetic",
    "metric_report",
    "run_cli",
    "weighted_average",
]

__version__ = "0.1.0"


def metric_report(counts):
    """Accuracy, per-class and averaged sensitivity/specificity of a confusion matrix.

    ``counts[label][pred]`` holds integer counts. Undefined ratios are ``None``.
    """
    return _json.loads(_metric_report_json([[int(v) for v in row] for row in counts]))
