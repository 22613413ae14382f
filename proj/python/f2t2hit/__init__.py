# Copyright 2026 The F2T2-HiT Authors
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
"""Single-image reflection removal: NAF/HiT/F2T2 U-Net with a C++ core."""

from ._core import (  # noqa: F401
    ArgumentError,
    CheckpointError,
    ConfigError,
    IoError,
    Model,
    ShapeError,
    TrainingError,
    ValidationError,
    cosine_restart_lr,
    evaluate_dataset,
    gaussian_blur,
    load_model,
    psnr,
    read_image,
    run_cli,
    spectral_roundtrip_check,
    ssim,
    synthesize_pair,
    synthetic_triples,
    verify,
    write_png,
)

__version__ = "0.1.0"
