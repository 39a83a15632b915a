"""Fully connected autoencoder with explicit forward and backward passes.

The encoder maps frames to latent embeddings, the decoder maps embeddings
back to frames. Backpropagation accepts an extra gradient injected directly
at the latent layer, which is how the latent-entropy loss reaches the
encoder without touching the decoder.

Weights are stored (out_dim, in_dim) so a layer computes ``x @ W.T + b``.
Hidden layers use relu, the latent layer is linear (a bounded activation
would distort the kernel density geometry), and the decoder output is
sigmoid so reconstructions stay strictly inside (0, 1).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DataFormatError
from .linalg import elementwise, init_weights

__all__ = [
    "ACTIVATIONS",
    "LayerSpec",
    "DenseLayer",
    "AutoencoderParams",
    "ForwardCache",
    "ParamGradients",
    "build_autoencoder",
    "encode",
    "decode",
    "mse_loss",
    "mse_grad",
    "backward",
    "param_arrays",
    "grad_arrays",
    "save_model",
    "load_model",
]

# Pre-activations are clipped before the exponential so sigmoid outputs stay
# strictly inside (0, 1) in float64 (it saturates to exactly 1.0 above ~36).
_SIGMOID_CLIP = 30.0


def _relu(x):
    return np.maximum(x, 0.0)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -_SIGMOID_CLIP, _SIGMOID_CLIP)))


def _identity(x):
    return x


def _d_relu(pre, act):
    return (pre > 0.0).astype(np.float64)


def _d_sigmoid(pre, act):
    return act * (1.0 - act)


def _d_tanh(pre, act):
    return 1.0 - act * act


def _d_identity(pre, act):
    return np.ones_like(pre)


# name -> (activation, derivative as a function of (pre-activation, activation))
ACTIVATIONS = {
    "linear": (_identity, _d_identity),
    "relu": (_relu, _d_relu),
    "tanh": (np.tanh, _d_tanh),
    "sigmoid": (_sigmoid, _d_sigmoid),
}

# Stable on-disk codes for the persistence format.
_ACTIVATION_CODES = {"linear": 0, "relu": 1, "tanh": 2, "sigmoid": 3}
_CODE_ACTIVATIONS = {v: k for k, v in _ACTIVATION_CODES.items()}

MODEL_MAGIC = b"MLEAE1"


@dataclass(frozen=True)
class LayerSpec:
    """Shape and activation of one dense layer."""

    in_dim: int
    out_dim: int
    activation: str

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError(f"layer dims must be >= 1, got {self.in_dim}x{self.out_dim}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(
                f"unknown activation {self.activation!r}, expected one of {sorted(ACTIVATIONS)}"
            )


@dataclass
class DenseLayer:
    spec: LayerSpec
    weights: np.ndarray  # (out_dim, in_dim)
    bias: np.ndarray  # (out_dim,)


@dataclass
class AutoencoderParams:
    """Encoder and decoder layer stacks.

    The decoder mirrors the encoder: its input width equals the latent
    dimension and its output width equals the frame dimension.
    """

    encoder: list[DenseLayer]
    decoder: list[DenseLayer]

    @property
    def frame_dim(self) -> int:
        return self.encoder[0].spec.in_dim

    @property
    def latent_dim(self) -> int:
        return self.encoder[-1].spec.out_dim

    def validate(self):
        _check_chain(self.encoder, "encoder")
        _check_chain(self.decoder, "decoder")
        if self.decoder[0].spec.in_dim != self.latent_dim:
            raise ValueError(
                f"decoder input dim {self.decoder[0].spec.in_dim} != latent dim {self.latent_dim}"
            )
        if self.decoder[-1].spec.out_dim != self.frame_dim:
            raise ValueError(
                f"decoder output dim {self.decoder[-1].spec.out_dim} != frame dim {self.frame_dim}"
            )


def _check_chain(layers: list[DenseLayer], name: str):
    if not layers:
        raise ValueError(f"{name}: at least one layer required")
    for prev, nxt in zip(layers, layers[1:]):
        if prev.spec.out_dim != nxt.spec.in_dim:
            raise ValueError(
                f"{name}: layer chain mismatch, {prev.spec.out_dim} feeds {nxt.spec.in_dim}"
            )
    for layer in layers:
        if layer.weights.shape != (layer.spec.out_dim, layer.spec.in_dim):
            raise ValueError(f"{name}: weight shape {layer.weights.shape} != spec {layer.spec}")
        if layer.bias.shape != (layer.spec.out_dim,):
            raise ValueError(f"{name}: bias shape {layer.bias.shape} != spec {layer.spec}")


@dataclass
class ForwardCache:
    """Intermediates of one forward pass through a layer stack."""

    inputs: np.ndarray
    pre_activations: list[np.ndarray] = field(default_factory=list)
    activations: list[np.ndarray] = field(default_factory=list)


@dataclass
class ParamGradients:
    """Loss gradients for every weight matrix and bias vector."""

    encoder: list[DenseLayer]
    decoder: list[DenseLayer]


def build_autoencoder(frame_dim: int, layer_sizes, rng) -> AutoencoderParams:
    """Mirrored autoencoder for the given frame width.

    ``layer_sizes`` lists the encoder output widths; its last entry is the
    latent dimension. Hidden layers are relu, the latent layer linear, the
    decoder output sigmoid. Weights use the uniform He-style bound, biases
    start at zero; initialization consumes the generator layer by layer in
    encoder-then-decoder order.
    """
    sizes = [int(frame_dim)] + [int(s) for s in layer_sizes]
    if len(sizes) < 2:
        raise ValueError("layer_sizes must contain at least the latent dimension")
    enc_specs = [
        LayerSpec(sizes[i], sizes[i + 1], "relu" if i + 2 < len(sizes) else "linear")
        for i in range(len(sizes) - 1)
    ]
    dec_sizes = sizes[::-1]
    dec_specs = [
        LayerSpec(dec_sizes[i], dec_sizes[i + 1], "relu" if i + 2 < len(dec_sizes) else "sigmoid")
        for i in range(len(dec_sizes) - 1)
    ]

    def init_layer(spec: LayerSpec) -> DenseLayer:
        w = init_weights(spec.out_dim, spec.in_dim, fan_in=spec.in_dim, rng=rng)
        return DenseLayer(spec, w, np.zeros(spec.out_dim))

    params = AutoencoderParams(
        encoder=[init_layer(s) for s in enc_specs],
        decoder=[init_layer(s) for s in dec_specs],
    )
    params.validate()
    return params


def _run_chain(layers: list[DenseLayer], batch: np.ndarray, name: str):
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != layers[0].spec.in_dim:
        raise ValueError(
            f"{name}: expected input of shape (n, {layers[0].spec.in_dim}), got {x.shape}"
        )
    cache = ForwardCache(inputs=x)
    out = x
    for layer in layers:
        pre = out @ layer.weights.T + layer.bias
        out = elementwise(pre, ACTIVATIONS[layer.spec.activation][0])
        cache.pre_activations.append(pre)
        cache.activations.append(out)
    return out, cache


def encode(params: AutoencoderParams, batch: np.ndarray):
    """Map a (n, frame_dim) batch to its (n, latent_dim) embeddings."""
    return _run_chain(params.encoder, batch, "encode")


def decode(params: AutoencoderParams, latents: np.ndarray):
    """Map a (n, latent_dim) batch of embeddings back to frame space."""
    return _run_chain(params.decoder, latents, "decode")


def mse_loss(batch: np.ndarray, recon: np.ndarray, variant: str = "norm") -> float:
    """Reconstruction loss between a batch and its reconstruction.

    ``"norm"`` averages the per-row Euclidean norm of the residual (the
    default); ``"squared"`` averages the squared error per pixel.
    """
    if batch.shape != recon.shape:
        raise ValueError(f"mse_loss: shape mismatch {batch.shape} vs {recon.shape}")
    diff = batch - recon
    if variant == "norm":
        return float(np.mean(np.sqrt((diff * diff).sum(axis=1))))
    if variant == "squared":
        return float(np.mean(diff * diff))
    raise ValueError(f"unknown mse variant {variant!r}, expected 'norm' or 'squared'")


def mse_grad(batch: np.ndarray, recon: np.ndarray, variant: str = "norm") -> np.ndarray:
    """Gradient of :func:`mse_loss` with respect to the reconstruction."""
    if batch.shape != recon.shape:
        raise ValueError(f"mse_grad: shape mismatch {batch.shape} vs {recon.shape}")
    n = batch.shape[0]
    diff = recon - batch
    if variant == "norm":
        norms = np.sqrt((diff * diff).sum(axis=1))
        safe = np.where(norms > 0.0, norms, 1.0)
        grad = diff / (n * safe[:, None])
        grad[norms == 0.0] = 0.0  # residual norm is non-differentiable at zero
        return grad
    if variant == "squared":
        return 2.0 * diff / diff.size
    raise ValueError(f"unknown mse variant {variant!r}, expected 'norm' or 'squared'")


def _chain_backward(layers: list[DenseLayer], cache: ForwardCache, grad_out: np.ndarray):
    """Backpropagate through one stack; returns per-layer grads and dL/d(input)."""
    grads: list[DenseLayer | None] = [None] * len(layers)
    g = grad_out
    for i in reversed(range(len(layers))):
        layer = layers[i]
        pre = cache.pre_activations[i]
        act = cache.activations[i]
        below = cache.activations[i - 1] if i > 0 else cache.inputs
        d_act = ACTIVATIONS[layer.spec.activation][1](pre, act)
        d_pre = g * d_act
        grads[i] = DenseLayer(layer.spec, d_pre.T @ below, d_pre.sum(axis=0))
        g = d_pre @ layer.weights
    return grads, g


def backward(
    params: AutoencoderParams,
    cache_enc: ForwardCache,
    cache_dec: ForwardCache,
    grad_recon: np.ndarray,
    grad_latent: np.ndarray,
) -> ParamGradients:
    """Gradients of every parameter given upstream gradients.

    ``grad_recon`` is dL/d(reconstruction); ``grad_latent`` is injected at
    the latent layer and flows only into the encoder (it is how the entropy
    loss reaches the embedding map). Encoder gradients accumulate both the
    decoder path and the injection; either upstream gradient may be zero.
    """
    latents = cache_enc.activations[-1]
    recon = cache_dec.activations[-1]
    if grad_recon.shape != recon.shape:
        raise ValueError(f"grad_recon shape {grad_recon.shape} != reconstruction {recon.shape}")
    if grad_latent.shape != latents.shape:
        raise ValueError(f"grad_latent shape {grad_latent.shape} != latents {latents.shape}")
    dec_grads, g_latent_path = _chain_backward(params.decoder, cache_dec, grad_recon)
    enc_grads, _ = _chain_backward(params.encoder, cache_enc, g_latent_path + grad_latent)
    return ParamGradients(encoder=enc_grads, decoder=dec_grads)


def param_arrays(params: AutoencoderParams) -> list[np.ndarray]:
    """All parameter arrays in a fixed order (encoder then decoder, W then b)."""
    out = []
    for layer in params.encoder + params.decoder:
        out.append(layer.weights)
        out.append(layer.bias)
    return out


def grad_arrays(grads: ParamGradients) -> list[np.ndarray]:
    """Gradient arrays in the same order as :func:`param_arrays`."""
    out = []
    for layer in grads.encoder + grads.decoder:
        out.append(layer.weights)
        out.append(layer.bias)
    return out


def save_model(params: AutoencoderParams, path):
    """Write the model file: magic, layer count, then per-layer blocks.

    Each block is ``u32 in_dim, u32 out_dim, u8 activation code`` followed by
    row-major little-endian float64 weights and biases. Layers appear in
    forward order, encoder first; the stack is mirrored, so the loader splits
    the chain at the midpoint.
    """
    params.validate()
    layers = params.encoder + params.decoder
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<I", len(layers)))
        for layer in layers:
            fh.write(
                struct.pack(
                    "<IIB",
                    layer.spec.in_dim,
                    layer.spec.out_dim,
                    _ACTIVATION_CODES[layer.spec.activation],
                )
            )
            fh.write(np.ascontiguousarray(layer.weights, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(layer.bias, dtype="<f8").tobytes())


def _read_exact(fh, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise DataFormatError(f"model file truncated while reading {what}")
    return buf


def load_model(path) -> AutoencoderParams:
    """Read a model file written by :func:`save_model`, validating as it goes."""
    with open(path, "rb") as fh:
        magic = fh.read(len(MODEL_MAGIC))
        if magic != MODEL_MAGIC:
            raise DataFormatError(f"not a model file: bad magic {magic!r}")
        (count,) = struct.unpack("<I", _read_exact(fh, 4, "layer count"))
        if count < 2 or count % 2 != 0:
            raise DataFormatError(f"layer count must be even and >= 2, got {count}")
        layers = []
        for i in range(count):
            in_dim, out_dim, code = struct.unpack(
                "<IIB", _read_exact(fh, 9, f"layer {i} header")
            )
            if code not in _CODE_ACTIVATIONS:
                raise DataFormatError(f"layer {i}: unknown activation code {code}")
            if in_dim < 1 or out_dim < 1:
                raise DataFormatError(f"layer {i}: invalid dims {in_dim}x{out_dim}")
            w = np.frombuffer(
                _read_exact(fh, 8 * in_dim * out_dim, f"layer {i} weights"), dtype="<f8"
            ).reshape(out_dim, in_dim)
            b = np.frombuffer(_read_exact(fh, 8 * out_dim, f"layer {i} bias"), dtype="<f8")
            layers.append(
                DenseLayer(LayerSpec(in_dim, out_dim, _CODE_ACTIVATIONS[code]), w.copy(), b.copy())
            )
        if fh.read(1) != b"":
            raise DataFormatError("model file has trailing bytes after the last layer")
    half = count // 2
    params = AutoencoderParams(encoder=layers[:half], decoder=layers[half:])
    try:
        params.validate()
    except ValueError as exc:
        raise DataFormatError(f"model file is inconsistent: {exc}") from exc
    return params
