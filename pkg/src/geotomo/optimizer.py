"""Adam optimizer over lists of numpy parameter arrays."""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from numpy.typing import NDArray


class AdamOptimizer:
    """First/second-moment adaptive gradient descent.

    Moments are kept per array in the order the parameters are given. A step
    returns new arrays and never mutates its inputs.
    """

    def __init__(
        self,
        shapes: list[tuple[int, ...]],
        learning_rate: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        """Initialize zero moments.

        Args:
            shapes: Shapes of the parameter arrays
            learning_rate: Step size; 0 leaves parameters unchanged
            beta1: Decay of the first-moment estimate
            beta2: Decay of the second-moment estimate
            eps: Denominator offset
        """
        if learning_rate < 0:
            raise ValueError(f"learning_rate must be non-negative, got {learning_rate}")
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise ValueError(f"betas must lie in [0, 1), got {beta1}, {beta2}")
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]

    def step(
        self, params: list[NDArray[np.float64]], grads: list[NDArray[np.float64]]
    ) -> list[NDArray[np.float64]]:
        """Apply one bias-corrected Adam update.

        Args:
            params: Current parameter arrays
            grads: Gradients of the loss, same shapes as ``params``

        Returns:
            Updated parameter arrays
        """
        if len(params) != len(self.m) or len(grads) != len(self.m):
            raise ValueError(
                f"Expected {len(self.m)} arrays, got {len(params)} params / {len(grads)} grads"
            )
        self.t += 1
        for i, g in enumerate(grads):
            self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * g**2

        if self.learning_rate == 0:
            return [p.copy() for p in params]

        bias1 = 1 - self.beta1**self.t
        bias2 = 1 - self.beta2**self.t
        updated = []
        for p, m, v in zip(params, self.m, self.v, strict=True):
            m_hat = m / bias1
            v_hat = v / bias2
            updated.append(p - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps))
        return updated
