"""Adam optimizer acting on watched tensors in place."""

import numpy as np

from .errors import InputError


class Adam:
    """Adaptive-moment descent over a fixed parameter list.

    Keeps first/second moment estimates per parameter and applies the
    bias-corrected update.  ``step`` always descends: callers wanting
    ascent negate their objective before the backward pass.
    """

    def __init__(self, params, learning_rate=1e-4, beta1=0.9, beta2=0.999, epsilon=1e-8):
        if learning_rate <= 0.0:
            raise InputError(f"learning rate must be positive, got {learning_rate}")
        if not 0.0 <= beta1 < 1.0 or not 0.0 <= beta2 < 1.0:
            raise InputError(f"decay rates must lie in [0, 1), got {beta1} and {beta2}")
        if epsilon <= 0.0:
            raise InputError(f"epsilon must be positive, got {epsilon}")
        self.params = list(params)
        self.learning_rate = float(learning_rate)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.epsilon = float(epsilon)
        self.count = 0
        self._m = [np.zeros_like(p.values) for p in self.params]
        self._v = [np.zeros_like(p.values) for p in self.params]

    def step(self, grads):
        """Apply one update from a ``Gradients`` view onto every parameter."""
        self.count += 1
        correct1 = 1.0 - self.beta1 ** self.count
        correct2 = 1.0 - self.beta2 ** self.count
        for i, p in enumerate(self.params):
            g = grads.wrt(p)
            self._m[i] = self.beta1 * self._m[i] + (1.0 - self.beta1) * g
            self._v[i] = self.beta2 * self._v[i] + (1.0 - self.beta2) * (g * g)
            m_hat = self._m[i] / correct1
            v_hat = self._v[i] / correct2
            p.values -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon)
