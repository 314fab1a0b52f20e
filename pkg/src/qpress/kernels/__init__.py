"""Q-network math kernels with an optional compiled fast path.

The compiled extension (`qpress.kernels._native`, Cython) and the numpy
reference implement identical semantics; one is chosen once at import.
Control with QPRESS_KERNELS: "native" requires the extension, "python"
forces the reference, anything else (default "auto") prefers native and
falls back silently.

Backends agree to float roundoff (summation order differs), not
bit-exactness; each is individually deterministic.
"""

import os

from . import reference

_requested = os.environ.get("QPRESS_KERNELS", "auto")
_impl = None
if _requested != "python":
    try:
        from . import _native as _impl  # type: ignore[no-redef]
    except ImportError:
        if _requested == "native":
            raise
        _impl = None
if _impl is None:
    _impl = reference


def active_backend() -> str:
    """Name of the selected backend: "native" or "python"."""
    return "python" if _impl is reference else "native"


def mlp_forward(x, weights, biases):
    return _impl.mlp_forward(x, weights, biases)


def mlp_backward(x, actions, targets, weights, biases):
    return _impl.mlp_backward(x, actions, targets, weights, biases)


def sgd_step(weights, biases, grads_w, grads_b, lr):
    """In-place plain-SGD update shared by both backends."""
    for w, g in zip(weights, grads_w):
        w -= lr * g
    for b, g in zip(biases, grads_b):
        b -= lr * g
