"""Multitemporal hyperspectral unmixing lab.

Library layout mirrors the processing pipeline: `datamodel` (types and the
dataset directory format), `synthgen` (benchmark scene generators), `geom`
(VCA endmember extraction, FCLS baseline), `network` (the transformer
unmixing model), `objective` (training losses), `evalmetrics` (aligned
error metrics), `harness` (training loop, experiments, ablations) and
`plots` (figure emission). The `mthu` CLI fronts all of it.
"""

__version__ = "0.1.0"

from .datamodel import (AbundanceSequence, DatasetBundle, EndmemberSet,
                        FormatError, HyperCubeSequence, ValidationError,
                        load_bundle, save_bundle, validate_abundance)
from .synthgen import (SpectraBank, Synth1Config, Synth2Config, add_noise_snr,
                       builtin_bank, generate_synthetic1, generate_synthetic2,
                       piecewise_scaling)

__all__ = [
    "AbundanceSequence", "DatasetBundle", "EndmemberSet", "FormatError",
    "HyperCubeSequence", "ValidationError", "load_bundle", "save_bundle",
    "validate_abundance", "SpectraBank", "Synth1Config", "Synth2Config",
    "add_noise_snr", "builtin_bank", "generate_synthetic1",
    "generate_synthetic2", "piecewise_scaling",
]
