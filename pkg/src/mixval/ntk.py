"""Scalar-output feedforward model and its empirical tangent kernel.

A small MLP with smooth activations produces a scalar in [0, 1] (via a
sigmoid squash on the final layer, so the boundedness assumptions of
the generalization bound hold by construction).  Per-example parameter
gradients are computed with analytic reverse-mode passes; their Gram
matrix is the empirical NTK at the given parameters, and the bound term
is the quadratic form sqrt(r' (Gram + ridge I)^-1 r / n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from ._seeds import substream
from .errors import DomainError, NumericalError

_INIT_STREAM = "ntk-init"


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # stable in both tails
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


# name -> (map, derivative as a function of the pre-activation)
_ACTIVATIONS = {
    "tanh": (np.tanh, lambda z: 1.0 - np.tanh(z) ** 2),
    "identity": (lambda z: z, lambda z: np.ones_like(z)),
}
_SQUASHES = {
    "sigmoid": (_sigmoid, lambda z: _sigmoid(z) * (1.0 - _sigmoid(z))),
    "identity": (lambda z: z, lambda z: np.ones_like(z)),
}


@dataclass(frozen=True)
class MLPSpec:
    """Architecture of the scalar-output model.

    layer_widths is (input dim, hidden widths..., 1); the output width
    is fixed at 1.  ``output_squash='identity'`` disables the [0, 1]
    squashing for linear-model verification; the sigmoid default keeps
    outputs bounded.
    """

    layer_widths: tuple[int, ...]
    activation: str = "tanh"
    output_squash: str = "sigmoid"
    init_seed: int = 0

    def __post_init__(self) -> None:
        if len(self.layer_widths) < 2:
            raise DomainError("layer_widths needs at least (input dim, 1)")
        if any(w < 1 for w in self.layer_widths):
            raise DomainError(f"all widths must be >= 1, got {self.layer_widths}")
        if self.layer_widths[-1] != 1:
            raise DomainError(f"output width must be 1, got {self.layer_widths[-1]}")
        if self.activation not in _ACTIVATIONS:
            raise DomainError(f"unknown activation {self.activation!r}")
        if self.output_squash not in _SQUASHES:
            raise DomainError(f"unknown output squash {self.output_squash!r}")

    @property
    def input_dim(self) -> int:
        return self.layer_widths[0]

    def weight_shapes(self) -> list[tuple[int, int]]:
        """(out, in) shape of each layer's weight matrix."""
        return [
            (self.layer_widths[i + 1], self.layer_widths[i])
            for i in range(len(self.layer_widths) - 1)
        ]

    @property
    def n_params(self) -> int:
        return sum(o * i + o for o, i in self.weight_shapes())


@dataclass(frozen=True)
class ParamVector:
    """Flat parameter sequence with its layer-shape manifest.

    Layout per layer: weight matrix (row major), then bias vector.
    """

    values: np.ndarray
    weight_shapes: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        expected = sum(o * i + o for o, i in self.weight_shapes)
        if self.values.ndim != 1 or len(self.values) != expected:
            raise DomainError(
                f"parameter vector has {self.values.shape}, manifest needs {expected}"
            )

    def layers(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Unflatten into (weights, bias) per layer (views, do not mutate)."""
        out = []
        pos = 0
        for o, i in self.weight_shapes:
            w = self.values[pos : pos + o * i].reshape(o, i)
            pos += o * i
            b = self.values[pos : pos + o]
            pos += o
            out.append((w, b))
        return out


def init_params(spec: MLPSpec) -> ParamVector:
    """Draw weights i.i.d. zero mean with variance 1/fan-in; biases zero."""
    rng = substream(spec.init_seed, _INIT_STREAM)
    parts = []
    for o, i in spec.weight_shapes():
        parts.append(rng.standard_normal(o * i) / math.sqrt(i))
        parts.append(np.zeros(o))
    return ParamVector(
        values=np.concatenate(parts), weight_shapes=tuple(spec.weight_shapes())
    )


def _check_batch(spec: MLPSpec, x: np.ndarray) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2 or a.shape[1] != spec.input_dim:
        raise DomainError(
            f"inputs must have {spec.input_dim} features, got shape {np.shape(x)}"
        )
    return a


def _forward_batch(spec: MLPSpec, params: ParamVector, x: np.ndarray):
    act, _ = _ACTIVATIONS[spec.activation]
    layers = params.layers()
    h = x
    pre, post = [], [x]
    for li, (w, b) in enumerate(layers):
        z = h @ w.T + b
        pre.append(z)
        h = act(z) if li < len(layers) - 1 else z
        post.append(h)
    return pre, post


def predict(spec: MLPSpec, params: ParamVector, x: np.ndarray) -> np.ndarray:
    """Model outputs for a batch (or single vector) of inputs."""
    xb = _check_batch(spec, x)
    squash, _ = _SQUASHES[spec.output_squash]
    _, post = _forward_batch(spec, params, xb)
    return squash(post[-1][:, 0])


def forward(spec: MLPSpec, params: ParamVector, x: np.ndarray) -> float:
    """Scalar model output for one input vector."""
    return float(predict(spec, params, x)[0])


def gradients(spec: MLPSpec, params: ParamVector, x: np.ndarray) -> np.ndarray:
    """Per-example gradients of the output w.r.t. all parameters.

    Returns an (n, n_params) matrix in the ParamVector layout, via one
    vectorized reverse pass over the batch.
    """
    xb = _check_batch(spec, x)
    n = len(xb)
    layers = params.layers()
    _, dact = _ACTIVATIONS[spec.activation]
    _, dsquash = _SQUASHES[spec.output_squash]
    pre, post = _forward_batch(spec, params, xb)

    delta = dsquash(pre[-1])  # (n, 1): d f / d logit
    grads: list[np.ndarray | None] = [None] * len(layers)
    for li in range(len(layers) - 1, -1, -1):
        w, _ = layers[li]
        h_in = post[li]
        gw = np.einsum("no,ni->noi", delta, h_in).reshape(n, -1)
        grads[li] = np.hstack([gw, delta])
        if li > 0:
            delta = (delta @ w) * dact(pre[li - 1])
    return np.hstack(grads)


def per_example_gradient(spec: MLPSpec, params: ParamVector, x: np.ndarray) -> np.ndarray:
    """Analytic gradient of the scalar output for one input vector."""
    return gradients(spec, params, x)[0]


@dataclass(frozen=True)
class NTKGram:
    """Empirical tangent-kernel Gram matrix with the gradient-norm bound B.

    Cheap structural invariants (square, symmetric, nonnegative
    diagonal bounded by B^2) are validated here; positive
    semidefiniteness holds by construction as a gradient Gram matrix
    and is asserted spectrally in tests, not per instance.
    """

    matrix: np.ndarray
    gradient_norm_bound: float

    def __post_init__(self) -> None:
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DomainError(f"Gram matrix must be square, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise NumericalError("Gram matrix contains non-finite entries")
        if np.abs(m - m.T).max() > 1e-9:
            raise NumericalError("Gram matrix asymmetry exceeds 1e-9")
        d = np.diag(m)
        if d.min() < -1e-12 or d.max() > self.gradient_norm_bound**2 + 1e-9:
            raise NumericalError("Gram diagonal outside [0, B^2]")

    @property
    def n(self) -> int:
        return len(self.matrix)

    def trace(self) -> float:
        return float(np.trace(self.matrix))


def ntk_gram(spec: MLPSpec, params: ParamVector, x: np.ndarray) -> NTKGram:
    """Gram[i][j] = <grad f(x_i), grad f(x_j)> at the given parameters."""
    g = gradients(spec, params, x)
    m = g @ g.T
    m = (m + m.T) / 2.0
    bound = float(np.sqrt(np.maximum(np.diag(m), 0.0).max()))
    return NTKGram(matrix=m, gradient_norm_bound=bound)


def default_ridge(gram: NTKGram) -> float:
    """Relative ridge 1e-6 * trace / n (scale invariant)."""
    return 1e-6 * gram.trace() / gram.n


def bound_term(
    gram: NTKGram, residuals: np.ndarray, ridge: float | None = None
) -> float:
    """sqrt(r' (Gram + ridge I)^-1 r / n) via a linear solve.

    ``ridge=None`` applies the relative default; the system is solved
    with a Cholesky factorization (never an explicit inverse).
    """
    r = np.asarray(residuals, dtype=float).ravel()
    if len(r) != gram.n:
        raise DomainError(f"{len(r)} residuals for a {gram.n}-point Gram matrix")
    if not np.all(np.isfinite(r)):
        raise DomainError("residuals must be finite")
    if ridge is None:
        ridge = default_ridge(gram)
    if ridge < 0:
        raise DomainError(f"ridge must be >= 0, got {ridge}")
    a = gram.matrix + ridge * np.eye(gram.n)
    try:
        sol = cho_solve(cho_factor(a), r)
    except LinAlgError as exc:
        raise NumericalError(
            f"Gram system singular after ridge {ridge:g} "
            f"(condition number ~ {np.linalg.cond(a):.3e})"
        ) from exc
    quad = float(r @ sol)
    if not math.isfinite(quad) or quad < -1e-8 * max(1.0, gram.trace()):
        raise NumericalError(
            f"quadratic form {quad!r} unusable; Gram condition number "
            f"~ {np.linalg.cond(a):.3e}"
        )
    return math.sqrt(max(quad, 0.0) / gram.n)


@dataclass(frozen=True)
class Model:
    """A spec bound to concrete parameters."""

    spec: MLPSpec
    params: ParamVector

    @classmethod
    def at_init(cls, spec: MLPSpec) -> "Model":
        return cls(spec=spec, params=init_params(spec))

    def predict(self, x: np.ndarray) -> np.ndarray:
        return predict(self.spec, self.params, x)
