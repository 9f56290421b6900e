"""Dense feedforward networks with hand-rolled backprop and Adam updates.

Float64 throughout; the control networks here are tiny, so the code favors
clarity and exact reproducibility over speed. Hidden layers are ReLU; the
output head is linear or tanh.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Sequence

import numpy as np

CHECKPOINT_FORMAT = "agentscale-net"
CHECKPOINT_VERSION = 1

Cache = tuple[list[np.ndarray], list[np.ndarray], np.ndarray]
Gradients = list[tuple[np.ndarray, np.ndarray]]


class ShapeError(ValueError):
    """Input or parameter shapes are inconsistent with the network."""


class OptimizerError(RuntimeError):
    """Non-finite gradients reached the optimizer; training must stop."""


class DenseNet:
    """Fully connected network: x -> relu(...) -> head(linear|tanh)."""

    def __init__(
        self,
        layer_dims: Sequence[int],
        out_activation: str = "linear",
        weights: list[np.ndarray] | None = None,
        biases: list[np.ndarray] | None = None,
    ) -> None:
        if len(layer_dims) < 2:
            raise ShapeError("need at least input and output dims")
        if any(d <= 0 for d in layer_dims):
            raise ShapeError(f"layer dims must be positive, got {layer_dims}")
        if out_activation not in ("linear", "tanh"):
            raise ShapeError(f"unknown output activation {out_activation!r}")
        self.layer_dims = tuple(int(d) for d in layer_dims)
        self.out_activation = out_activation
        if weights is None:
            self.weights = [
                np.zeros((d_in, d_out)) for d_in, d_out in zip(self.layer_dims, self.layer_dims[1:])
            ]
            self.biases = [np.zeros(d_out) for d_out in self.layer_dims[1:]]
        else:
            assert biases is not None
            self.weights = weights
            self.biases = biases
            self._check_param_shapes()

    def _check_param_shapes(self) -> None:
        expected = list(zip(self.layer_dims, self.layer_dims[1:]))
        got = [w.shape for w in self.weights]
        if got != expected or [b.shape for b in self.biases] != [(d,) for _, d in expected]:
            raise ShapeError(f"parameter shapes {got} do not match dims {self.layer_dims}")

    @classmethod
    def initialize(
        cls,
        layer_dims: Sequence[int],
        out_activation: str = "linear",
        rng: np.random.Generator | None = None,
    ) -> "DenseNet":
        """Fan-in-scaled uniform weights, zero biases."""
        rng = rng if rng is not None else np.random.default_rng()
        net = cls(layer_dims, out_activation)
        for i, (d_in, d_out) in enumerate(zip(net.layer_dims, net.layer_dims[1:])):
            bound = 1.0 / math.sqrt(d_in)
            net.weights[i] = rng.uniform(-bound, bound, size=(d_in, d_out))
        return net

    def copy(self) -> "DenseNet":
        return DenseNet(
            self.layer_dims,
            self.out_activation,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )

    def parameters(self) -> list[np.ndarray]:
        """Interleaved [W0, b0, W1, b1, ...]; the optimizer mutates these."""
        out: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def _run(self, x: np.ndarray) -> Cache:
        if x.ndim != 2 or x.shape[1] != self.layer_dims[0]:
            raise ShapeError(
                f"input shape {x.shape} incompatible with input dim {self.layer_dims[0]}"
            )
        hs = [x]
        zs: list[np.ndarray] = []
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            zs.append(z)
            if i < last:
                h = np.maximum(z, 0.0)
                hs.append(h)
        out = np.tanh(zs[-1]) if self.out_activation == "tanh" else zs[-1]
        return hs, zs, out

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        _, _, out = self._run(x[None, :] if single else x)
        return out[0] if single else out

    def forward_cached(self, x: np.ndarray) -> tuple[np.ndarray, Cache]:
        """Batched forward keeping intermediates for `backward`. x is (B, d_in)."""
        x = np.asarray(x, dtype=np.float64)
        cache = self._run(x)
        return cache[2], cache

    def backward(self, cache: Cache, grad_output: np.ndarray) -> Gradients:
        """Gradients of a scalar loss given dL/d(output), one (dW, db) per layer."""
        hs, zs, out = cache
        g = np.asarray(grad_output, dtype=np.float64)
        if g.shape != out.shape:
            raise ShapeError(f"grad shape {g.shape} does not match output {out.shape}")
        if self.out_activation == "tanh":
            g = g * (1.0 - out * out)
        grads: Gradients = []
        for layer in reversed(range(len(self.weights))):
            grads.append((hs[layer].T @ g, g.sum(axis=0)))
            if layer > 0:
                g = (g @ self.weights[layer].T) * (zs[layer - 1] > 0.0)
        grads.reverse()
        return grads

    def to_dict(self) -> dict:
        return {
            "layer_dims": list(self.layer_dims),
            "out_activation": self.out_activation,
            "weights": [w.reshape(-1).tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DenseNet":
        dims = [int(d) for d in doc["layer_dims"]]
        weights = [
            np.array(flat, dtype=np.float64).reshape(d_in, d_out)
            for flat, d_in, d_out in zip(doc["weights"], dims, dims[1:])
        ]
        biases = [np.array(b, dtype=np.float64) for b in doc["biases"]]
        return cls(dims, doc["out_activation"], weights, biases)


class Adam:
    """Adaptive-moment optimizer over a DenseNet's parameter list."""

    def __init__(
        self,
        net: DenseNet,
        learning_rate: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> None:
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p) for p in net.parameters()]
        self.v = [np.zeros_like(p) for p in net.parameters()]

    def step(self, net: DenseNet, grads: Gradients) -> None:
        flat = [g for pair in grads for g in pair]
        params = net.parameters()
        if len(flat) != len(params):
            raise ShapeError("gradient structure does not match the network")
        for g in flat:
            if not np.all(np.isfinite(g)):
                raise OptimizerError("non-finite gradient; aborting training")
        self.step_count += 1
        bc1 = 1.0 - self.beta1**self.step_count
        bc2 = 1.0 - self.beta2**self.step_count
        for p, g, m, v in zip(params, flat, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "step_count": self.step_count,
            "m": [a.reshape(-1).tolist() for a in self.m],
            "v": [a.reshape(-1).tolist() for a in self.v],
        }

    def load_dict(self, doc: dict, net: DenseNet) -> None:
        self.learning_rate = float(doc["learning_rate"])
        self.beta1 = float(doc["beta1"])
        self.beta2 = float(doc["beta2"])
        self.eps = float(doc["eps"])
        self.step_count = int(doc["step_count"])
        params = net.parameters()
        if len(doc["m"]) != len(params):
            raise ShapeError("optimizer state does not match the network")
        self.m = [
            np.array(flat, dtype=np.float64).reshape(p.shape) for flat, p in zip(doc["m"], params)
        ]
        self.v = [
            np.array(flat, dtype=np.float64).reshape(p.shape) for flat, p in zip(doc["v"], params)
        ]


def soft_update(target: DenseNet, online: DenseNet, tau: float) -> None:
    """Blend target weights toward the online network: t = tau*o + (1-tau)*t."""
    if target.layer_dims != online.layer_dims:
        raise ShapeError("target and online networks differ in shape")
    for t, o in zip(target.parameters(), online.parameters()):
        t[...] = tau * o + (1.0 - tau) * t


def checkpoint_document(
    net: DenseNet,
    optimizer: Adam | None = None,
    config_hash: str = "",
) -> dict:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config_hash": config_hash,
        "net": net.to_dict(),
    }
    if optimizer is not None:
        doc["optimizer"] = optimizer.to_dict()
    return doc


def restore_checkpoint(doc: dict) -> tuple[DenseNet, Adam | None]:
    if doc.get("format") != CHECKPOINT_FORMAT or doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"not a {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION} document")
    net = DenseNet.from_dict(doc["net"])
    optimizer = None
    if "optimizer" in doc:
        optimizer = Adam(net, learning_rate=float(doc["optimizer"]["learning_rate"]))
        optimizer.load_dict(doc["optimizer"], net)
    return net, optimizer


def save_json(path: str | Path, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")


def load_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
