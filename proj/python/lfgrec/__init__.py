# Copyright 2026 The lfgrec Authors.
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

"""Python bindings for the lfgrec recommender core."""

from ._lfgrec import (
    ChecksumError,
    DataError,
    Dataset,
    DivergenceError,
    Error,
    FormatError,
    Model,
    ParseError,
    RangeError,
    ShapeError,
    UnknownCategoryError,
    VersionError,
    fnv1a64,
    load_dataset,
    load_model,
    mask_rows,
    model_from_bytes,
    rmse,
    run_experiment,
    train,
    truncated_svd,
)

__all__ = [
    "ChecksumError",
    "DataError",
    "Dataset",
    "DivergenceError",
    "Error",
    "FormatError",
    "Model",
    "ParseError",
    "RangeError",
    "ShapeError",
    "UnknownCategoryError",
    "VersionError",
    "fnv1a64",
    "load_dataset",
    "load_model",
    "mask_rows",
    "model_from_bytes",
    "rmse",
    "run_experiment",
    "train",
    "truncated_svd",
]

__version__ = "0.1.0"
