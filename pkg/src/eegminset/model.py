"""Dual-decoder autoencoder with hand-derived gradients.

One shared encoder E feeds two decoders D1 and D2 (AE1 = D1(E(x)),
AE2 = D2(E(x))). Training is adversarial: per epoch n, each mini-batch W
is pushed through W1 = AE1(W), W2 = AE2(W) and W21 = AE2(AE1(W)), and

    loss1 = (1/n) * mse(W, W1) + (1 - 1/n) * mse(W, W21)
    loss2 = (1/n) * mse(W, W2) - (1 - 1/n) * mse(W, W21)

so D2 learns to amplify whatever AE1 fails to reconstruct while AE1 learns
to fool it. (encoder, decoder1) follows the gradient of loss1 and
(encoder, decoder2) that of loss2, each with its own Adam state. The
anomaly score of a window x is

    alpha * ||x - AE1(x)|| + beta * ||x - AE2(AE1(x))||       (alpha+beta=1)

Everything is plain numpy with analytic backpropagation; gradient_check
verifies it against central finite differences.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyTrainingSet,
    InvariantViolation,
    MixedClassTraining,
    NonFiniteLoss,
    ParseError,
    VersionMismatch,
)
from .features import N_FEATURES, ModelWindow, Normalizer

MODEL_FORMAT_VERSION = 1

# Fixed optimizer/init choices: Adam with the usual moments, Glorot-uniform.
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class NetSpec:
    """Layer sizing: input -> hidden... -> latent, mirrored in the decoders."""

    input_dim: int
    latent_dim: int
    hidden_dims: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden_dims", tuple(self.hidden_dims))
        if self.input_dim < 1 or self.latent_dim < 1 or any(
            h < 1 for h in self.hidden_dims
        ):
            raise InvariantViolation("all layer sizes must be positive")
        if self.latent_dim >= self.input_dim:
            raise InvariantViolation("latent dimension must be below the input dimension")

    @classmethod
    def for_setup(cls, m: int, k: int, l: int = N_FEATURES) -> "NetSpec":
        """Default sizing for m channels: |Z| = 0.5*m*L, one hidden layer."""
        input_dim = k * m * l
        return cls(
            input_dim=input_dim,
            latent_dim=int(round(0.5 * m * l)),
            hidden_dims=(math.ceil(input_dim / 2),),
        )

    @property
    def encoder_dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_dims, self.latent_dim)

    @property
    def decoder_dims(self) -> tuple[int, ...]:
        return (self.latent_dim, *reversed(self.hidden_dims), self.input_dim)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 64
    learning_rate: float = 1e-3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1 or self.learning_rate <= 0:
            raise InvariantViolation("epochs, batch_size and learning_rate must be positive")
        if not 0 <= self.seed < 2**64:
            raise InvariantViolation("seed must fit in 64 unsigned bits")


# ---------------------------------------------------------------------------
# Dense network: x @ W + b per layer, ReLU between layers, linear last layer.
# ---------------------------------------------------------------------------


@dataclass
class DenseNet:
    weights: list[np.ndarray]  # each (in_dim, out_dim)
    biases: list[np.ndarray]

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0], *(w.shape[1] for w in self.weights))

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list]:
        """Returns (output, cache); cache holds layer inputs and pre-activations."""
        cache = []
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            cache.append((h, z))
            h = np.maximum(z, 0.0) if i < last else z
        return h, cache

    def backward(self, cache: list, d_out: np.ndarray) -> tuple[list, np.ndarray]:
        """Gradients [(dW, db), ...] per layer plus the gradient w.r.t. the input."""
        grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(self.weights)  # type: ignore[list-item]
        last = len(self.weights) - 1
        d = d_out
        for i in range(last, -1, -1):
            h, z = cache[i]
            dz = d if i == last else d * (z > 0.0)
            grads[i] = (h.T @ dz, dz.sum(axis=0))
            d = dz @ self.weights[i].T
        return grads, d

    def zero_grads(self) -> list:
        return [(np.zeros_like(w), np.zeros_like(b))
                for w, b in zip(self.weights, self.biases)]

    def copy(self) -> "DenseNet":
        return DenseNet([w.copy() for w in self.weights], [b.copy() for b in self.biases])


def _glorot_net(dims: tuple[int, ...], rng: np.random.Generator) -> DenseNet:
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return DenseNet(weights, biases)


def _add_grads(a: list, b: list) -> list:
    return [(ga + gb, ba + bb) for (ga, ba), (gb, bb) in zip(a, b)]


def forward_ae(encoder: DenseNet, decoder: DenseNet, x: np.ndarray) -> np.ndarray:
    """D(E(x)) for a single window or a batch."""
    single = x.ndim == 1
    h = x[np.newaxis, :] if single else x
    if h.shape[1] != encoder.dims[0]:
        raise DimensionMismatch(
            f"input has {h.shape[1]} dims, encoder expects {encoder.dims[0]}"
        )
    z, _ = encoder.forward(h)
    out, _ = decoder.forward(z)
    return out[0] if single else out


def encode(encoder: DenseNet, x: np.ndarray) -> np.ndarray:
    single = x.ndim == 1
    h = x[np.newaxis, :] if single else x
    z, _ = encoder.forward(h)
    return z[0] if single else z


def reconstruction_error(x: np.ndarray, x_hat: np.ndarray) -> float:
    """Euclidean norm of x - x_hat."""
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise DimensionMismatch(f"shapes {x.shape} and {x_hat.shape} differ")
    return float(np.linalg.norm(x - x_hat))


# ---------------------------------------------------------------------------
# Two-phase adversarial loss and its gradients
# ---------------------------------------------------------------------------


def usad_losses_and_grads(
    encoder: DenseNet,
    decoder1: DenseNet,
    decoder2: DenseNet,
    batch: np.ndarray,
    epoch_n: int,
    want_grads: bool = True,
):
    """Both losses for one batch at epoch_n, with full gradients for each.

    Returns (loss1, loss2, grads1, grads2, caches) where gradsX maps
    'encoder'/'decoder1'/'decoder2' to per-layer (dW, db) lists. grads1
    contains d(loss1)/d(every weight), including decoder2's, so callers
    select the parameter groups they actually update.
    """
    w_rec = 1.0 / epoch_n
    w_adv = 1.0 - 1.0 / epoch_n

    z, cache_e1 = encoder.forward(batch)
    w1, cache_d1 = decoder1.forward(z)
    w2, cache_d2 = decoder2.forward(z)
    z1, cache_e2 = encoder.forward(w1)
    w21, cache_d2b = decoder2.forward(z1)

    size = batch.size
    mse1 = float(np.mean((batch - w1) ** 2))
    mse2 = float(np.mean((batch - w2) ** 2))
    mse21 = float(np.mean((batch - w21) ** 2))
    loss1 = w_rec * mse1 + w_adv * mse21
    loss2 = w_rec * mse2 - w_adv * mse21
    caches = (cache_e1, cache_d1, cache_d2, cache_e2, cache_d2b)
    if not want_grads:
        return loss1, loss2, None, None, caches

    d_w21 = 2.0 * (w21 - batch) / size

    # loss1: the W1 term plus the W21 chain D2(E(D1(E(W)))).
    g_d2_1, d_z1 = decoder2.backward(cache_d2b, w_adv * d_w21)
    g_e_1b, d_w1_chain = encoder.backward(cache_e2, d_z1)
    d_w1 = w_rec * 2.0 * (w1 - batch) / size + d_w1_chain
    g_d1_1, d_z = decoder1.backward(cache_d1, d_w1)
    g_e_1a, _ = encoder.backward(cache_e1, d_z)
    grads1 = {
        "encoder": _add_grads(g_e_1a, g_e_1b),
        "decoder1": g_d1_1,
        "decoder2": g_d2_1,
    }

    # loss2: the W2 term minus the same W21 chain.
    g_d2_2a, d_z_direct = decoder2.backward(cache_d2, w_rec * 2.0 * (w2 - batch) / size)
    g_d2_2b, d_z1_neg = decoder2.backward(cache_d2b, -w_adv * d_w21)
    g_e_2b, d_w1_neg = encoder.backward(cache_e2, d_z1_neg)
    g_d1_2, d_z_chain = decoder1.backward(cache_d1, d_w1_neg)
    g_e_2a, _ = encoder.backward(cache_e1, d_z_direct + d_z_chain)
    grads2 = {
        "encoder": _add_grads(g_e_2a, g_e_2b),
        "decoder1": g_d1_2,
        "decoder2": _add_grads(g_d2_2a, g_d2_2b),
    }
    return loss1, loss2, grads1, grads2, caches


class _Adam:
    """Adam over an explicit list of parameter arrays (updated in place)."""

    def __init__(self, params: list[np.ndarray], lr: float):
        self.params = params
        self.lr = lr
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - ADAM_BETA1**self.t
        bc2 = 1.0 - ADAM_BETA2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * g * g
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)


def _flatten_group(*nets_grads: list) -> list[np.ndarray]:
    out = []
    for grads in nets_grads:
        for dw, db in grads:
            out.append(dw)
            out.append(db)
    return out


def _net_params(net: DenseNet) -> list[np.ndarray]:
    out = []
    for w, b in zip(net.weights, net.biases):
        out.append(w)
        out.append(b)
    return out


# ---------------------------------------------------------------------------
# Trained model
# ---------------------------------------------------------------------------


@dataclass
class UsadModel:
    spec: NetSpec
    encoder: DenseNet
    decoder1: DenseNet
    decoder2: DenseNet
    normalizer: Normalizer
    alpha: float = 0.5
    beta: float = 0.5
    train_meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.alpha < 0 or self.beta < 0 or abs(self.alpha + self.beta - 1.0) > 1e-9:
            raise InvariantViolation("alpha and beta must be non-negative and sum to 1")
        if self.decoder1.dims != self.decoder2.dims:
            raise InvariantViolation("decoders must share layer shapes")
        if self.encoder.dims != self.spec.encoder_dims:
            raise InvariantViolation(
                f"encoder dims {self.encoder.dims} do not match spec {self.spec.encoder_dims}"
            )
        if self.decoder1.dims != self.spec.decoder_dims:
            raise InvariantViolation(
                f"decoder dims {self.decoder1.dims} do not match spec {self.spec.decoder_dims}"
            )
        for net in (self.encoder, self.decoder1, self.decoder2):
            for arr in net.weights + net.biases:
                if not np.all(np.isfinite(arr)):
                    raise InvariantViolation("non-finite model weights")


def train(
    windows: list[ModelWindow],
    spec: NetSpec,
    cfg: TrainConfig,
    normalizer: Normalizer | None = None,
    alpha: float = 0.5,
    beta: float = 0.5,
) -> UsadModel:
    """Fit the dual-decoder AE on positive-class windows only.

    The caller normalizes the windows beforehand (and passes the fitted
    normalizer so it travels with the model). Deterministic given cfg.seed.
    """
    if len(windows) == 0:
        raise EmptyTrainingSet("no training windows")
    if len({w.label for w in windows}) > 1:
        raise MixedClassTraining("training windows must all carry the positive label")
    x = np.stack([w.flat for w in windows])
    if x.shape[1] != spec.input_dim:
        raise DimensionMismatch(
            f"windows have {x.shape[1]} dims, spec expects {spec.input_dim}"
        )
    if normalizer is None:
        normalizer = Normalizer(mean=np.zeros(spec.input_dim), std=np.ones(spec.input_dim))

    rng = np.random.default_rng(cfg.seed)
    encoder = _glorot_net(spec.encoder_dims, rng)
    decoder1 = _glorot_net(spec.decoder_dims, rng)
    decoder2 = _glorot_net(spec.decoder_dims, rng)

    opt1 = _Adam(_net_params(encoder) + _net_params(decoder1), cfg.learning_rate)
    opt2 = _Adam(_net_params(encoder) + _net_params(decoder2), cfg.learning_rate)

    n = x.shape[0]
    last_losses = (math.nan, math.nan)
    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(n)
        epoch_l1, epoch_l2, n_batches = 0.0, 0.0, 0
        for start in range(0, n, cfg.batch_size):
            batch = x[perm[start : start + cfg.batch_size]]
            loss1, loss2, grads1, grads2, _ = usad_losses_and_grads(
                encoder, decoder1, decoder2, batch, epoch
            )
            if not (math.isfinite(loss1) and math.isfinite(loss2)):
                raise NonFiniteLoss(f"epoch {epoch}: loss1={loss1}, loss2={loss2}")
            # Both gradients are taken at the same weights, then applied.
            g1 = _flatten_group(grads1["encoder"], grads1["decoder1"])
            g2 = _flatten_group(grads2["encoder"], grads2["decoder2"])
            opt1.step(g1)
            opt2.step(g2)
            epoch_l1 += loss1
            epoch_l2 += loss2
            n_batches += 1
        last_losses = (epoch_l1 / n_batches, epoch_l2 / n_batches)

    return UsadModel(
        spec=spec,
        encoder=encoder,
        decoder1=decoder1,
        decoder2=decoder2,
        normalizer=normalizer,
        alpha=alpha,
        beta=beta,
        train_meta={
            "epochs": cfg.epochs,
            "learning_rate": cfg.learning_rate,
            "batch_size": cfg.batch_size,
            "seed": cfg.seed,
            "final_losses": {"loss1": last_losses[0], "loss2": last_losses[1]},
        },
    )


def score(model: UsadModel, w: ModelWindow) -> float:
    """alpha * ||x - AE1(x)|| + beta * ||x - AE2(AE1(x))|| for one window."""
    return float(score_matrix(model, w.flat[np.newaxis, :])[0])


def score_matrix(model: UsadModel, x: np.ndarray) -> np.ndarray:
    """Vectorized score over rows of an already-normalized window matrix."""
    if x.ndim != 2 or x.shape[1] != model.spec.input_dim:
        raise DimensionMismatch(
            f"expected (n, {model.spec.input_dim}) windows, got {x.shape}"
        )
    w1 = forward_ae(model.encoder, model.decoder1, x)
    w21 = forward_ae(model.encoder, model.decoder2, w1)
    err1 = np.linalg.norm(x - w1, axis=1)
    err2 = np.linalg.norm(x - w21, axis=1)
    return model.alpha * err1 + model.beta * err2


def score_windows(model: UsadModel, windows: list[ModelWindow]) -> np.ndarray:
    """Normalize raw windows with the model's normalizer, then score them."""
    x = model.normalizer.apply_matrix(np.stack([w.flat for w in windows]))
    return score_matrix(model, x)


# ---------------------------------------------------------------------------
# Gradient check
# ---------------------------------------------------------------------------


def gradient_check(
    spec: NetSpec,
    cfg: TrainConfig,
    sample_batch: np.ndarray,
    epoch_n: int = 3,
    h: float = 1e-5,
) -> float:
    """Max relative error of analytic vs central-difference gradients.

    Checks every weight and bias of all three networks against finite
    differences of both losses. Weight draws that leave any ReLU
    pre-activation within 1e-6 of its kink are redrawn, since the loss is
    not differentiable there.
    """
    if spec.input_dim > 32:
        raise InvariantViolation("gradient_check is meant for small networks")
    batch = np.asarray(sample_batch, dtype=np.float64)

    for attempt in range(64):
        rng = np.random.default_rng(cfg.seed + attempt)
        encoder = _glorot_net(spec.encoder_dims, rng)
        decoder1 = _glorot_net(spec.decoder_dims, rng)
        decoder2 = _glorot_net(spec.decoder_dims, rng)
        loss1, loss2, grads1, grads2, caches = usad_losses_and_grads(
            encoder, decoder1, decoder2, batch, epoch_n
        )
        # Final layers are linear so only hidden pre-activations can sit on a kink.
        pre_acts = [z for cache in caches for (_, z) in cache[:-1]]
        min_pre = min((float(np.min(np.abs(z))) for z in pre_acts), default=math.inf)
        if min_pre > 1e-6:
            break
    else:
        raise InvariantViolation("could not find a kink-free checkpoint")

    nets = {"encoder": encoder, "decoder1": decoder1, "decoder2": decoder2}

    def losses() -> tuple[float, float]:
        l1, l2, _, _, _ = usad_losses_and_grads(
            encoder, decoder1, decoder2, batch, epoch_n, want_grads=False
        )
        return l1, l2

    max_rel = 0.0
    for name, net in nets.items():
        for li, (w, b) in enumerate(zip(net.weights, net.biases)):
            for arr, gidx in ((w, 0), (b, 1)):
                flat = arr.reshape(-1)
                g1 = grads1[name][li][gidx].reshape(-1)
                g2 = grads2[name][li][gidx].reshape(-1)
                for j in range(flat.size):
                    orig = flat[j]
                    flat[j] = orig + h
                    l1p, l2p = losses()
                    flat[j] = orig - h
                    l1m, l2m = losses()
                    flat[j] = orig
                    for analytic, num in (
                        (g1[j], (l1p - l1m) / (2 * h)),
                        (g2[j], (l2p - l2m) / (2 * h)),
                    ):
                        denom = max(abs(analytic), abs(num), 1e-6)
                        max_rel = max(max_rel, abs(analytic - num) / denom)
    return max_rel


# ---------------------------------------------------------------------------
# Serialization: versioned JSON envelope; layers run encoder, decoder1,
# decoder2, each stored as rows x cols (input dim x output dim), row-major.
# ---------------------------------------------------------------------------


def _layers_to_json(net: DenseNet) -> list[dict]:
    return [
        {
            "rows": w.shape[0],
            "cols": w.shape[1],
            "weights": w.reshape(-1).tolist(),
            "bias": b.tolist(),
        }
        for w, b in zip(net.weights, net.biases)
    ]


def _net_from_json(layers: list[dict], dims: tuple[int, ...]) -> DenseNet:
    if len(layers) != len(dims) - 1:
        raise ParseError(f"expected {len(dims) - 1} layers, found {len(layers)}")
    weights, biases = [], []
    for layer, fan_in, fan_out in zip(layers, dims[:-1], dims[1:]):
        if layer["rows"] != fan_in or layer["cols"] != fan_out:
            raise ParseError(
                f"layer shape {layer['rows']}x{layer['cols']} does not match "
                f"spec {fan_in}x{fan_out}"
            )
        w = np.array(layer["weights"], dtype=np.float64).reshape(fan_in, fan_out)
        b = np.array(layer["bias"], dtype=np.float64)
        if b.shape != (fan_out,):
            raise ParseError("bias length does not match layer columns")
        weights.append(w)
        biases.append(b)
    return DenseNet(weights, biases)


def save_model(model: UsadModel, path: str | Path) -> None:
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "spec": {
            "input_dim": model.spec.input_dim,
            "latent_dim": model.spec.latent_dim,
            "hidden_dims": list(model.spec.hidden_dims),
        },
        "alpha": model.alpha,
        "beta": model.beta,
        "normalizer": {
            "mean": model.normalizer.mean.tolist(),
            "std": model.normalizer.std.tolist(),
        },
        "layers": (
            _layers_to_json(model.encoder)
            + _layers_to_json(model.decoder1)
            + _layers_to_json(model.decoder2)
        ),
        "train_meta": model.train_meta,
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_model(path: str | Path) -> UsadModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from None
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise ParseError(f"{path}: not a model file")
    if doc["format_version"] != MODEL_FORMAT_VERSION:
        raise VersionMismatch(
            f"{path}: format version {doc['format_version']}, "
            f"expected {MODEL_FORMAT_VERSION}"
        )
    try:
        spec = NetSpec(
            input_dim=doc["spec"]["input_dim"],
            latent_dim=doc["spec"]["latent_dim"],
            hidden_dims=tuple(doc["spec"]["hidden_dims"]),
        )
        n_enc = len(spec.encoder_dims) - 1
        n_dec = len(spec.decoder_dims) - 1
        layers = doc["layers"]
        if len(layers) != n_enc + 2 * n_dec:
            raise ParseError(f"expected {n_enc + 2 * n_dec} layers, found {len(layers)}")
        encoder = _net_from_json(layers[:n_enc], spec.encoder_dims)
        decoder1 = _net_from_json(layers[n_enc : n_enc + n_dec], spec.decoder_dims)
        decoder2 = _net_from_json(layers[n_enc + n_dec :], spec.decoder_dims)
        normalizer = Normalizer(
            mean=np.array(doc["normalizer"]["mean"], dtype=np.float64),
            std=np.array(doc["normalizer"]["std"], dtype=np.float64),
        )
        return UsadModel(
            spec=spec,
            encoder=encoder,
            decoder1=decoder1,
            decoder2=decoder2,
            normalizer=normalizer,
            alpha=doc["alpha"],
            beta=doc["beta"],
            train_meta=doc["train_meta"],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: malformed model file ({exc})") from None
