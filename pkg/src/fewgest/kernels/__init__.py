"""Hot-loop kernels with a compiled core and a numpy fallback.

The compiled extension (fewgest.kernels._fast, Cython) is preferred when
importable; fewgest.kernels.reference is the contract-identical numpy
fallback. Set FEWGEST_KERNELS=reference|fast to force a choice
("fast" raises if the extension is missing).
"""
import os

from . import reference

_choice = os.environ.get("FEWGEST_KERNELS", "auto")

if _choice == "reference":
    _impl = reference
else:
    try:
        from . import _fast as _impl
    except ImportError:
        if _choice == "fast":
            raise
        _impl = reference

IMPL = _impl.IMPL
depthwise_conv1d_fwd = _impl.depthwise_conv1d_fwd
depthwise_conv1d_bwd = _impl.depthwise_conv1d_bwd
maxpool1d_fwd = _impl.maxpool1d_fwd
maxpool1d_bwd = _impl.maxpool1d_bwd
