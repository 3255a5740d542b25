# Copyright 2026 The labelfish Authors
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

"""FedSGD secure-aggregation simulator with label inference."""

from ._labelfish import (
    Error,
    Model,
    Report,
    aggregate_updates,
    apply_compression,
    dequantize,
    encode_update,
    generate_synthetic,
    infer_labels,
    lnacc,
    load_mnist_idx,
    make_cnn_bn,
    make_fcn3,
    net_mask,
    normalize_config,
    parse_mnist_idx,
    parse_model,
    quantize,
    run_experiment,
    run_sweep,
    single_sample_label,
    verify,
)

__all__ = [
    "Error",
    "Model",
    "Report",
    "aggregate_updates",
    "apply_compression",
    "dequantize",
    "encode_update",
    "generate_synthetic",
    "infer_labels",
    "lnacc",
    "load_mnist_idx",
    "make_cnn_bn",
    "make_fcn3",
    "net_mask",
    "normalize_config",
    "parse_mnist_idx",
    "parse_model",
    "quantize",
    "run_experiment",
    "run_sweep",
    "single_sample_label",
    "verify",
]
