# Copyright 2026 The fkinterp Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Quality-aware factorized-kernel frame interpolation.

Frames are 2-D float64 arrays of 8-bit luma sample values.
"""

from ._core import (
    CheckpointError,
    DomainError,
    Error,
    FormatError,
    InterpNet,
    IoError,
    NetConfig,
    ShapeError,
    bd_rate,
    degrade,
    l1_loss,
    quant_step,
    satd_loss,
    simulate,
    synthesize_clip,
    verify,
)

__version__ = "0.1.0"

__all__ = [
    "CheckpointError",
    "DomainError",
    "Error",
    "FormatError",
    "InterpNet",
    "IoError",
    "NetConfig",
    "ShapeError",
    "bd_rate",
    "degrade",
    "l1_loss",
    "quant_step",
    "satd_loss",
    "simulate",
    "synthesize_clip",
    "verify",
]
