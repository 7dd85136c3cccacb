"""Per-view evidence networks with manual forward and backward passes.

One small multi-layer perceptron per view maps features to nonnegative class
evidence through a rectifying head (softplus by default; ReLU available).
Evidence vectors become Dirichlet parameters via alpha = e + 1, view opinions
are fused by evidence averaging, and the whole objective from ``losses`` is
backpropagated by hand: the loss layer supplies d(loss)/d(alpha) analytically,
the head and hidden layers apply their local derivatives, and parameters are
updated by Adam or plain SGD. No autodiff framework is involved anywhere.

All randomness (weight init, shuffling) derives from ``NetConfig.seed``, so
training is bit-reproducible and checkpoints round-trip exactly.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field

import numpy as np

from .losses import LossBreakdown, LossConfig, annealing_coefficient, batch_loss_and_grads
from .opinions import Evidence, Opinion, conflictive_degree, decide, evidence_to_opinion, fuse_opinions
from .seeding import derived_rng

__all__ = [
    "NetConfig",
    "TrainTrace",
    "EvidentialNet",
    "save_checkpoint",
    "load_checkpoint",
    "CHECKPOINT_FORMAT",
    "CHECKPOINT_VERSION",
]

_HEADS = ("softplus", "relu")
_OPTIMIZERS = ("adam", "sgd")

CHECKPOINT_FORMAT = "evifuse-checkpoint"
CHECKPOINT_VERSION = 1

_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8


@dataclass(frozen=True)
class NetConfig:
    """Architecture and training hyperparameters.

    ``layer_sizes`` holds one chain per view, input width through hidden
    widths to the class count; every chain must end in the same K >= 2.
    Hidden activations are ReLU; ``head`` selects the evidence activation.

    ``normalize_inputs`` projects each view vector onto the unit sphere
    before the first layer. Rectifier evidence heads are unbounded, so raw
    far-off-distribution inputs (heavy additive noise) would otherwise
    produce arbitrarily large evidence and spuriously low uncertainty;
    with bounded inputs, evidence decays as the input direction loses its
    class alignment, and uncertainty tracks signal quality instead.
    """

    layer_sizes: tuple
    head: str = "softplus"
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    epochs: int = 60
    batch_size: int = 64
    seed: int = 0
    normalize_inputs: bool = True

    def __post_init__(self):
        chains = tuple(tuple(int(w) for w in chain) for chain in self.layer_sizes)
        if not chains:
            raise ValueError("need at least one view")
        for chain in chains:
            if len(chain) < 2 or any(w < 1 for w in chain):
                raise ValueError("each view chain needs >= 2 positive layer widths")
        k = chains[0][-1]
        if k < 2 or any(chain[-1] != k for chain in chains):
            raise ValueError("all view chains must end in the same class count >= 2")
        if self.head not in _HEADS:
            raise ValueError(f"head must be one of {_HEADS}")
        if self.optimizer not in _OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {_OPTIMIZERS}")
        if not (self.learning_rate > 0.0):
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        object.__setattr__(self, "layer_sizes", chains)

    @property
    def n_views(self) -> int:
        return len(self.layer_sizes)

    @property
    def n_classes(self) -> int:
        return self.layer_sizes[0][-1]

    def to_dict(self) -> dict:
        return {
            "layer_sizes": [list(chain) for chain in self.layer_sizes],
            "head": self.head,
            "optimizer": self.optimizer,
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "normalize_inputs": self.normalize_inputs,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "NetConfig":
        return cls(
            layer_sizes=tuple(tuple(chain) for chain in payload["layer_sizes"]),
            head=payload["head"],
            optimizer=payload["optimizer"],
            learning_rate=float(payload["learning_rate"]),
            epochs=int(payload["epochs"]),
            batch_size=int(payload["batch_size"]),
            seed=int(payload["seed"]),
            normalize_inputs=bool(payload.get("normalize_inputs", True)),
        )


@dataclass
class TrainTrace:
    """Per-epoch history: loss breakdown, training accuracy, lambda_t."""

    breakdowns: list = field(default_factory=list)
    train_accuracy: list = field(default_factory=list)
    annealing: list = field(default_factory=list)

    def to_records(self) -> list[dict]:
        return [
            {
                "epoch": i,
                "lambda": self.annealing[i],
                "train_accuracy": self.train_accuracy[i],
                **self.breakdowns[i].to_dict(),
            }
            for i in range(len(self.breakdowns))
        ]


def _softplus(z: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, z)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class EvidentialNet:
    """View-specific MLPs, evidence fusion, and the training loop.

    Weight matrices are (fan_in, fan_out); initialization is uniform in
    +-1/sqrt(fan_in) from a seed-derived stream, biases start at zero.
    """

    def __init__(self, config: NetConfig):
        self.config = config
        self.weights: list[list[np.ndarray]] = []
        self.biases: list[list[np.ndarray]] = []
        for v, chain in enumerate(config.layer_sizes):
            w_chain, b_chain = [], []
            for layer in range(len(chain) - 1):
                fan_in, fan_out = chain[layer], chain[layer + 1]
                rng = derived_rng(config.seed, "net-init", v, layer)
                bound = 1.0 / np.sqrt(fan_in)
                w_chain.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
                b_chain.append(np.zeros(fan_out))
            self.weights.append(w_chain)
            self.biases.append(b_chain)
        # Adam accumulators, lazily shaped like the parameters.
        self._opt_m = None
        self._opt_v = None
        self._opt_step = 0

    @property
    def n_views(self) -> int:
        return self.config.n_views

    @property
    def n_classes(self) -> int:
        return self.config.n_classes

    # ------------------------------------------------------------------
    # Forward
    # ------------------------------------------------------------------

    def _check_views(self, views) -> list[np.ndarray]:
        if len(views) != self.n_views:
            raise ValueError(f"expected {self.n_views} views, got {len(views)}")
        out = []
        for v, x in enumerate(views):
            x = np.asarray(x, dtype=np.float64)
            if x.ndim == 1:
                x = x[None, :]
            want = self.config.layer_sizes[v][0]
            if x.ndim != 2 or x.shape[1] != want:
                raise ValueError(
                    f"view {v} has feature width {x.shape[-1]}, expected {want}"
                )
            out.append(x)
        if len({x.shape[0] for x in out}) != 1:
            raise ValueError("views disagree on instance count")
        return out

    def _forward_view(self, v: int, x: np.ndarray, keep_cache: bool):
        cache = [] if keep_cache else None
        if self.config.normalize_inputs:
            norms = np.linalg.norm(x, axis=1, keepdims=True)
            x = x / np.maximum(norms, 1e-12)
        h = x
        last = len(self.weights[v]) - 1
        for layer, (w, b) in enumerate(zip(self.weights[v], self.biases[v])):
            z = h @ w + b
            if keep_cache:
                cache.append((h, z))
            if layer < last:
                h = np.maximum(z, 0.0)
            elif self.config.head == "softplus":
                h = _softplus(z)
            else:
                h = np.maximum(z, 0.0)
        return h, cache

    def evidence(self, views) -> np.ndarray:
        """Per-view evidence for a batch, shape (V, N, K)."""
        views = self._check_views(views)
        return np.stack([self._forward_view(v, x, False)[0] for v, x in enumerate(views)])

    def alphas(self, views) -> np.ndarray:
        """Per-view Dirichlet parameters for a batch, shape (V, N, K)."""
        return self.evidence(views) + 1.0

    def forward(self, instance_views):
        """Single-instance pass to typed objects.

        Returns (per-view Evidence, per-view Opinion, fused Opinion); base
        rates are uniform.
        """
        ev = self.evidence([np.atleast_2d(np.asarray(x, dtype=np.float64)) for x in instance_views])
        if ev.shape[1] != 1:
            raise ValueError("forward takes a single instance; use evidence() for batches")
        evidences = [Evidence(e=ev[v, 0]) for v in range(self.n_views)]
        opinions = [evidence_to_opinion(e) for e in evidences]
        return evidences, opinions, fuse_opinions(opinions)

    def predict(self, instance_views):
        """Classify one instance.

        Returns (class index, reliability 1 - u, per-view opinions, V x V
        conflictive-degree matrix).
        """
        _, opinions, fused = self.forward(instance_views)
        label, reliability = decide(fused)
        v = self.n_views
        conflict = np.zeros((v, v))
        for i in range(v):
            for j in range(i + 1, v):
                conflict[i, j] = conflict[j, i] = conflictive_degree(opinions[i], opinions[j])
        return label, reliability, opinions, conflict

    # ------------------------------------------------------------------
    # Backward and optimization
    # ------------------------------------------------------------------

    def _backward_view(self, v: int, cache, d_alpha: np.ndarray):
        """Parameter gradients for one view given d(loss)/d(alpha)."""
        grads_w = [None] * len(self.weights[v])
        grads_b = [None] * len(self.weights[v])
        last = len(self.weights[v]) - 1
        h_in, z = cache[last]
        if self.config.head == "softplus":
            dz = d_alpha * _sigmoid(z)
        else:
            dz = d_alpha * (z > 0.0)
        for layer in range(last, -1, -1):
            h_in, z = cache[layer]
            if layer < last:
                dz = dh * (z > 0.0)
            grads_w[layer] = h_in.T @ dz
            grads_b[layer] = dz.sum(axis=0)
            if layer > 0:
                dh = dz @ self.weights[v][layer].T
        return grads_w, grads_b

    def parameter_gradients(self, views, y: np.ndarray, t: int, loss_config: LossConfig):
        """Gradients of the batch-mean total loss for every weight and bias.

        Returns (LossBreakdown, grads_w, grads_b) with grads indexed
        [view][layer], matching ``weights``/``biases``.
        """
        views = self._check_views(views)
        caches = []
        alphas = np.empty((self.n_views, views[0].shape[0], self.n_classes))
        for v, x in enumerate(views):
            e, cache = self._forward_view(v, x, True)
            alphas[v] = e + 1.0
            caches.append(cache)
        breakdown, d_alphas = batch_loss_and_grads(alphas, y, t, loss_config)
        grads_w, grads_b = [], []
        for v in range(self.n_views):
            gw, gb = self._backward_view(v, caches[v], d_alphas[v])
            grads_w.append(gw)
            grads_b.append(gb)
        return breakdown, grads_w, grads_b, alphas

    def _apply_update(self, grads_w, grads_b):
        lr = self.config.learning_rate
        if self.config.optimizer == "sgd":
            for v in range(self.n_views):
                for layer in range(len(self.weights[v])):
                    self.weights[v][layer] -= lr * grads_w[v][layer]
                    self.biases[v][layer] -= lr * grads_b[v][layer]
            return
        if self._opt_m is None:
            zeros = lambda ref: [[np.zeros_like(p) for p in chain] for chain in ref]
            self._opt_m = {"w": zeros(self.weights), "b": zeros(self.biases)}
            self._opt_v = {"w": zeros(self.weights), "b": zeros(self.biases)}
        self._opt_step += 1
        correction1 = 1.0 - _ADAM_BETA1**self._opt_step
        correction2 = 1.0 - _ADAM_BETA2**self._opt_step
        for v in range(self.n_views):
            for layer in range(len(self.weights[v])):
                for key, params, grads in (
                    ("w", self.weights[v][layer], grads_w[v][layer]),
                    ("b", self.biases[v][layer], grads_b[v][layer]),
                ):
                    m = self._opt_m[key][v][layer]
                    vv = self._opt_v[key][v][layer]
                    m *= _ADAM_BETA1
                    m += (1.0 - _ADAM_BETA1) * grads
                    vv *= _ADAM_BETA2
                    vv += (1.0 - _ADAM_BETA2) * grads**2
                    params -= lr * (m / correction1) / (np.sqrt(vv / correction2) + _ADAM_EPS)

    # ------------------------------------------------------------------
    # Training
    # ------------------------------------------------------------------

    def train(self, dataset, loss_config: LossConfig) -> TrainTrace:
        """Mini-batch training over ``dataset.views`` / ``dataset.labels``.

        Labels are one-hot (N, K). The shuffle order is a pure function of
        the config seed, so repeated runs are bit-identical.

        Raises
        ------
        ValueError
            On an empty dataset.
        ArithmeticError
            If the loss goes non-finite (with epoch/batch diagnostics).
        """
        views = self._check_views(dataset.views)
        y = np.asarray(dataset.labels, dtype=np.float64)
        n = views[0].shape[0]
        if n == 0:
            raise ValueError("training dataset is empty")
        if y.shape != (n, self.n_classes):
            raise ValueError(f"labels have shape {y.shape}, expected ({n}, {self.n_classes})")
        shuffle_rng = derived_rng(self.config.seed, "train-shuffle")
        trace = TrainTrace()
        batch = self.config.batch_size
        for t in range(self.config.epochs):
            order = shuffle_rng.permutation(n)
            sums = np.zeros(5)
            correct = 0
            for start in range(0, n, batch):
                idx = order[start : start + batch]
                batch_views = [x[idx] for x in views]
                batch_y = y[idx]
                breakdown, gw, gb, alphas = self.parameter_gradients(
                    batch_views, batch_y, t, loss_config
                )
                if not np.isfinite(breakdown.total):
                    raise ArithmeticError(
                        f"non-finite loss at epoch {t}, batch {start // batch}: {breakdown}"
                    )
                self._apply_update(gw, gb)
                weight = idx.size
                sums += weight * np.array([
                    breakdown.ace, breakdown.kl, breakdown.acc,
                    breakdown.consistency, breakdown.total,
                ])
                fused = alphas.mean(axis=0)
                correct += int((fused.argmax(axis=1) == batch_y.argmax(axis=1)).sum())
            means = sums / n
            trace.breakdowns.append(LossBreakdown(*means))
            trace.train_accuracy.append(correct / n)
            trace.annealing.append(annealing_coefficient(t, loss_config.T))
        return trace


# ---------------------------------------------------------------------------
# Checkpointing
# ---------------------------------------------------------------------------


def _encode(arr: np.ndarray) -> dict:
    return {
        "shape": list(arr.shape),
        "data": base64.b64encode(np.ascontiguousarray(arr, dtype=np.float64).tobytes()).decode(),
    }


def _decode(payload: dict) -> np.ndarray:
    arr = np.frombuffer(base64.b64decode(payload["data"]), dtype=np.float64)
    return arr.reshape(payload["shape"]).copy()


def save_checkpoint(net: EvidentialNet, path, scaler=None) -> None:
    """Write a self-describing JSON checkpoint.

    Tensors are row-major 64-bit, base64-encoded; loads round-trip
    bit-exactly. ``scaler`` optionally carries per-view standardization
    statistics as (means, scales) so later evaluation can map raw features
    into the space the net was trained in.
    """
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": net.config.to_dict(),
        "params": [
            {
                "weights": [_encode(w) for w in net.weights[v]],
                "biases": [_encode(b) for b in net.biases[v]],
            }
            for v in range(net.n_views)
        ],
    }
    if scaler is not None:
        means, scales = scaler
        doc["scaler"] = {
            "means": [_encode(np.asarray(m, dtype=np.float64)) for m in means],
            "scales": [_encode(np.asarray(s, dtype=np.float64)) for s in scales],
        }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path):
    """Load a checkpoint; returns (net, scaler or None).

    Raises
    ------
    ValueError
        If the file is not a checkpoint of a supported version.
    """
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"not an {CHECKPOINT_FORMAT} file: {path}")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(
            f"checkpoint version {doc.get('version')!r} unsupported (expected {CHECKPOINT_VERSION})"
        )
    net = EvidentialNet(NetConfig.from_dict(doc["config"]))
    for v, chain in enumerate(doc["params"]):
        net.weights[v] = [_decode(w) for w in chain["weights"]]
        net.biases[v] = [_decode(b) for b in chain["biases"]]
    scaler = None
    if "scaler" in doc:
        scaler = (
            [_decode(m) for m in doc["scaler"]["means"]],
            [_decode(s) for s in doc["scaler"]["scales"]],
        )
    return net, scaler
