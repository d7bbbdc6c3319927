"""Synthetic seismic task data, augmentation, normalization, and file I/O."""

from .augment import (
    InfeasibleCutError,
    add_noise,
    denormalize,
    mask_traces,
    normalize,
    random_cut_below_first_break,
)
from .datasets import (
    build_demultiple_dataset,
    build_denoise_dataset,
    build_interpolation_dataset,
    build_pretrain_corpus,
    build_task_dataset,
    sample_cuts,
    shot_gather_pool,
)
from .gatherio import (
    GatherFormatError,
    SegyFormatError,
    float_to_ibm,
    ibm_to_float,
    read_gather,
    read_segy,
    write_gather,
    write_segy,
)
from .synth import (
    random_layered_model,
    ricker_wavelet,
    synthesize_demultiple_pair,
    synthesize_shot_gather,
)
from .types import TASKS, Gather, LayeredModel, MaskedGather, TaskSample

__all__ = [
    "TASKS",
    "Gather",
    "GatherFormatError",
    "InfeasibleCutError",
    "LayeredModel",
    "MaskedGather",
    "SegyFormatError",
    "TaskSample",
    "add_noise",
    "build_demultiple_dataset",
    "build_denoise_dataset",
    "build_interpolation_dataset",
    "build_pretrain_corpus",
    "build_task_dataset",
    "denormalize",
    "float_to_ibm",
    "ibm_to_float",
    "mask_traces",
    "normalize",
    "random_cut_below_first_break",
    "random_layered_model",
    "read_gather",
    "read_segy",
    "ricker_wavelet",
    "sample_cuts",
    "shot_gather_pool",
    "synthesize_demultiple_pair",
    "synthesize_shot_gather",
    "write_gather",
    "write_segy",
]
