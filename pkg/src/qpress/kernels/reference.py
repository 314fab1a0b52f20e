"""Numpy reference implementation of the Q-network math kernels.

Layer l maps activations a through w[l] (out x in) and b[l] with ReLU
between hidden layers and a linear head. The loss is the mean squared
error between each sample's chosen-action output and its target; only
chosen outputs receive gradient.
"""

import numpy as np


def mlp_forward(x: np.ndarray, weights: list, biases: list) -> np.ndarray:
    a = x
    last = len(weights) - 1
    for l, (w, b) in enumerate(zip(weights, biases)):
        a = a @ w.T + b
        if l < last:
            np.maximum(a, 0.0, out=a)
    return a


def mlp_backward(
    x: np.ndarray,
    actions: np.ndarray,
    targets: np.ndarray,
    weights: list,
    biases: list,
) -> tuple[float, list, list]:
    """Loss plus parameter gradients for one minibatch; no update applied."""
    last = len(weights) - 1
    acts = [x]
    a = x
    for l, (w, b) in enumerate(zip(weights, biases)):
        a = a @ w.T + b
        if l < last:
            np.maximum(a, 0.0, out=a)
        acts.append(a)

    batch = x.shape[0]
    rows = np.arange(batch)
    err = acts[-1][rows, actions] - targets
    loss = float(np.mean(err * err))

    delta = np.zeros_like(acts[-1])
    delta[rows, actions] = 2.0 * err / batch
    grads_w: list = [None] * len(weights)
    grads_b: list = [None] * len(weights)
    for l in range(last, -1, -1):
        grads_w[l] = delta.T @ acts[l]
        grads_b[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ weights[l]) * (acts[l] > 0.0)
    return loss, grads_w, grads_b
