from .export import LABEL_COLUMNS, LABELS_FILENAME, export_samples
from .generator import (
    band_noise,
    draw_latents,
    generate,
    images_to_array,
    labels_of,
    render,
    sample_at,
    sample_batch,
    shape_mask,
)
from .schema import SHAPES, Latents, ModalityMixture, ModalityStyle, Sample, default_styles
from .separability import band_energy_scores, modality_separability_check

__all__ = [
    "LABELS_FILENAME",
    "LABEL_COLUMNS",
    "SHAPES",
    "Latents",
    "ModalityMixture",
    "ModalityStyle",
    "Sample",
    "band_energy_scores",
    "band_noise",
    "default_styles",
    "draw_latents",
    "export_samples",
    "generate",
    "images_to_array",
    "labels_of",
    "modality_separability_check",
    "render",
    "sample_at",
    "sample_batch",
    "shape_mask",
]
