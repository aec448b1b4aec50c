"""Small dense autoencoder scoring metric vectors by reconstruction error.

Architecture 3 -> 2 -> 3 with a tanh hidden layer, trained from scratch by
mini-batch gradient descent. Two variants: a linear output trained on mean
absolute error, and a squashed output in (0, 1) trained on binary
cross-entropy. Either way the risk score of a vector is the mean absolute
reconstruction error, so vectors unlike the (safe) training data score high.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import AeVariant
from .errors import DivergedTraining, InsufficientData

_MAGIC = b"TRAE"
_VERSION = 1
_MIN_SAMPLES = 100


@dataclass(frozen=True, slots=True)
class AeModel:
    """Trained parameters plus the metadata needed to reproduce them."""

    variant: AeVariant
    w1: np.ndarray  # (2, 3) encoder weights
    b1: np.ndarray  # (2,)
    w2: np.ndarray  # (3, 2) decoder weights
    b2: np.ndarray  # (3,)
    epochs: int
    learning_rate: float
    batch_size: int
    seed: int
    final_loss: float

    def reconstruct(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        h = np.tanh(x @ self.w1.T + self.b1)
        z = h @ self.w2.T + self.b2
        if self.variant is AeVariant.TANH:
            return 0.5 * (np.tanh(z) + 1.0)
        return z


def _unpack(params: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    w1 = params[0:6].reshape(2, 3)
    b1 = params[6:8]
    w2 = params[8:14].reshape(3, 2)
    b2 = params[14:17]
    return w1, b1, w2, b2


def _pack(w1, b1, w2, b2) -> np.ndarray:
    return np.concatenate([w1.ravel(), b1, w2.ravel(), b2])


N_PARAMS = 17


def _softplus(t: np.ndarray) -> np.ndarray:
    return np.log1p(np.exp(-np.abs(t))) + np.maximum(t, 0.0)


def loss_and_grads(
    params: np.ndarray, batch: np.ndarray, variant: AeVariant
) -> tuple[float, np.ndarray]:
    """Loss and analytic gradient w.r.t. the flat parameter vector.

    Linear variant: mean absolute error over batch and output dims. Squashed
    variant: the output is sigmoid(2z) = (tanh(z)+1)/2, scored with binary
    cross-entropy in a log-sum-exp form that is stable for large |z|.
    """
    w1, b1, w2, b2 = _unpack(params)
    x = np.atleast_2d(batch)
    nb, nd = x.shape
    a1 = x @ w1.T + b1
    h = np.tanh(a1)
    z = h @ w2.T + b2
    scale = 1.0 / (nb * nd)

    if variant is AeVariant.LINEAR:
        r = z - x
        loss = float(np.sum(np.abs(r)) * scale)
        dz = np.sign(r) * scale
    else:
        # BCE(sigmoid(2z), x) = x*softplus(-2z) + (1-x)*softplus(2z)
        loss = float(
            np.sum(x * _softplus(-2.0 * z) + (1.0 - x) * _softplus(2.0 * z)) * scale
        )
        xhat = 0.5 * (np.tanh(z) + 1.0)
        dz = 2.0 * (xhat - x) * scale

    dw2 = dz.T @ h
    db2 = dz.sum(axis=0)
    dh = dz @ w2
    da1 = dh * (1.0 - h * h)
    dw1 = da1.T @ x
    db1 = da1.sum(axis=0)
    return loss, _pack(dw1, db1, dw2, db2)


def ae_train(
    safe_samples: np.ndarray,
    variant: AeVariant,
    epochs: int = 200,
    learning_rate: float = 0.01,
    batch_size: int = 32,
    seed: int = 7,
) -> AeModel:
    """Train on vectors from frames that every metric rated safe.

    Deterministic for a fixed seed: initialization, shuffling, and batch
    order all derive from one generator.
    """
    x = np.asarray(safe_samples, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != 3:
        raise ValueError(f"expected (n, 3) samples, got shape {x.shape}")
    if x.shape[0] < _MIN_SAMPLES:
        raise InsufficientData(
            f"need at least {_MIN_SAMPLES} safe samples, got {x.shape[0]}"
        )
    rng = np.random.default_rng(seed)
    lim1 = np.sqrt(6.0 / (3 + 2))
    lim2 = np.sqrt(6.0 / (2 + 3))
    params = _pack(
        rng.uniform(-lim1, lim1, size=(2, 3)),
        np.zeros(2),
        rng.uniform(-lim2, lim2, size=(3, 2)),
        np.zeros(3),
    )
    n = x.shape[0]
    for _ in range(epochs):
        order = rng.permutation(n)
        for lo in range(0, n, batch_size):
            batch = x[order[lo : lo + batch_size]]
            loss, grads = loss_and_grads(params, batch, variant)
            if not np.isfinite(loss):
                raise DivergedTraining(f"non-finite loss {loss}")
            params = params - learning_rate * grads
    final_loss, _ = loss_and_grads(params, x, variant)
    if not np.isfinite(final_loss):
        raise DivergedTraining(f"non-finite final loss {final_loss}")
    w1, b1, w2, b2 = _unpack(params)
    return AeModel(
        variant=variant,
        w1=w1.copy(),
        b1=b1.copy(),
        w2=w2.copy(),
        b2=b2.copy(),
        epochs=epochs,
        learning_rate=learning_rate,
        batch_size=batch_size,
        seed=seed,
        final_loss=float(final_loss),
    )


def ae_risk(model: AeModel, normalized: np.ndarray) -> float | np.ndarray:
    """Mean absolute reconstruction error; scalar for a single vector."""
    x = np.asarray(normalized, dtype=np.float64)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    err = np.mean(np.abs(model.reconstruct(x2) - x2), axis=1)
    return float(err[0]) if single else err


def save_model(model: AeModel, path: str | Path) -> None:
    """Versioned flat binary: header, metadata, then row-major float64 arrays."""
    parts = [
        _MAGIC,
        struct.pack("<IIIdIqd", _VERSION, 0 if model.variant is AeVariant.LINEAR else 1,
                    model.epochs, model.learning_rate, model.batch_size,
                    model.seed, model.final_loss),
        struct.pack("<I", 4),
    ]
    for arr in (model.w1, model.b1, model.w2, model.b2):
        shape = arr.shape
        parts.append(struct.pack("<I", len(shape)))
        parts.append(struct.pack(f"<{len(shape)}I", *shape))
        parts.append(np.ascontiguousarray(arr, dtype=np.float64).tobytes("C"))
    Path(path).write_bytes(b"".join(parts))


def load_model(path: str | Path) -> AeModel:
    data = Path(path).read_bytes()
    if data[:4] != _MAGIC:
        raise ValueError(f"{path}: not a model file")
    off = 4
    version, variant_code, epochs, lr, batch, seed, final_loss = struct.unpack_from(
        "<IIIdIqd", data, off
    )
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported model version {version}")
    off += struct.calcsize("<IIIdIqd")
    (n_arrays,) = struct.unpack_from("<I", data, off)
    off += 4
    arrays = []
    for _ in range(n_arrays):
        (ndim,) = struct.unpack_from("<I", data, off)
        off += 4
        shape = struct.unpack_from(f"<{ndim}I", data, off)
        off += 4 * ndim
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(data, dtype=np.float64, count=count, offset=off).reshape(shape)
        arrays.append(arr.copy())
        off += 8 * count
    w1, b1, w2, b2 = arrays
    return AeModel(
        variant=AeVariant.LINEAR if variant_code == 0 else AeVariant.TANH,
        w1=w1,
        b1=b1,
        w2=w2,
        b2=b2,
        epochs=epochs,
        learning_rate=lr,
        batch_size=batch,
        seed=seed,
        final_loss=final_loss,
    )
