"""Self-supervised pretraining core: patching, masking, combined objectives,
schedules and the analytic cost model, exposed from the C++ library."""

from ._core import (
    denoise_loss,
    gather_unmasked,
    info_nce,
    loss_weights,
    lr_at,
    method_flops,
    patchify,
    recon_loss,
    sample_mask,
    scatter_with_mask_token,
    synthetic_dataset,
    unpatchify,
)

__all__ = [
    "denoise_loss",
    "gather_unmasked",
    "info_nce",
    "loss_weights",
    "lr_at",
    "method_flops",
    "patchify",
    "recon_loss",
    "sample_mask",
    "scatter_with_mask_token",
    "synthetic_dataset",
    "unpatchify",
]
