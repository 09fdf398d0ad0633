"""Minimal differentiable classifier runtime.

Activations are float64 arrays of shape (channels, length); the final softmax
flattens to a 1-D probability vector.  Each layer implements a plain
vector-Jacobian product plus the modified backward rules the attribution
methods need (guided ReLU, rescale-style multipliers).  Training is
deterministic given the seed; batch-norm statistics are maintained as running
averages and the inference graph always uses the frozen affine form.

A :class:`WrappedClassifier` composes a base model with a space's linear
inverse by prepending one fully connected layer whose weight is the inverse
operator, so every method that understands models works in any space.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import Series
from .errors import (
    EmptyDatasetError,
    InconsistentLengthsError,
    InvalidParamsError,
    LengthMismatchError,
    MalformedFileError,
    NonFiniteError,
    ShapeMismatchError,
    UnsupportedLayerError,
)
from .spaces import Space

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(128)
_GL_T = 0.5 * (_GL_NODES + 1.0)
_GL_W = 0.5 * _GL_WEIGHTS


def _softmax(a: np.ndarray) -> np.ndarray:
    e = np.exp(a - a.max())
    return e / e.sum()


def _softmax_vjp(p: np.ndarray, g: np.ndarray) -> np.ndarray:
    return p * (g - np.dot(g, p))


class Layer:
    kind = ""

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, g: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def guided_backward(self, g, x, y):
        return self.backward(g, x, y)

    def deeplift_backward(self, g, x, y, xb, yb, delta):
        # linear layers propagate multipliers exactly like gradients
        return self.backward(g, x, y)

    def param_grads(self, g, x) -> dict:
        return {}

    def trainable(self) -> dict:
        return {}

    def to_dict(self) -> dict:
        return {"kind": self.kind}


class Dense(Layer):
    kind = "dense"

    def __init__(self, weight: np.ndarray, bias: np.ndarray):
        self.weight = np.asarray(weight, dtype=np.float64)
        self.bias = np.asarray(bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeMismatchError("dense weight must be (out, in), bias (out,)")

    def forward(self, x):
        flat = x.ravel()
        if flat.size != self.weight.shape[1]:
            raise ShapeMismatchError(
                f"dense expects {self.weight.shape[1]} inputs, got {flat.size}"
            )
        return (self.weight @ flat + self.bias).reshape(1, -1)

    def backward(self, g, x, y):
        return (self.weight.T @ g.ravel()).reshape(x.shape)

    def param_grads(self, g, x):
        gf = g.ravel()
        return {"weight": np.outer(gf, x.ravel()), "bias": gf}

    def trainable(self):
        return {"weight": self.weight, "bias": self.bias}

    def to_dict(self):
        return {
            "kind": self.kind,
            "units_out": self.weight.shape[0],
            "units_in": self.weight.shape[1],
            "weight": self.weight.tolist(),
            "bias": self.bias.tolist(),
        }


class Conv1d(Layer):
    """Cross-correlation with stride 1 and same padding."""

    kind = "conv1d"

    def __init__(self, weight: np.ndarray, bias: np.ndarray):
        self.weight = np.asarray(weight, dtype=np.float64)
        self.bias = np.asarray(bias, dtype=np.float64)
        if self.weight.ndim != 3 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeMismatchError("conv weight must be (out, in, k), bias (out,)")
        self.kernel_len = self.weight.shape[2]
        self.pad_left = (self.kernel_len - 1) // 2
        self.pad_right = self.kernel_len // 2

    def _windows(self, arr, pad):
        padded = np.pad(arr, ((0, 0), pad))
        return np.lib.stride_tricks.sliding_window_view(
            padded, self.kernel_len, axis=1
        )

    def forward(self, x):
        if x.shape[0] != self.weight.shape[1]:
            raise ShapeMismatchError(
                f"conv expects {self.weight.shape[1]} channels, got {x.shape[0]}"
            )
        win = self._windows(x, (self.pad_left, self.pad_right))
        return np.einsum("oik,ilk->ol", self.weight, win) + self.bias[:, None]

    def backward(self, g, x, y):
        k = self.kernel_len
        gwin = self._windows(g, (k - 1, k - 1))
        dxp = np.einsum("oik,ouk->iu", self.weight[:, :, ::-1], gwin)
        return dxp[:, self.pad_left : self.pad_left + x.shape[1]]

    def param_grads(self, g, x):
        win = self._windows(x, (self.pad_left, self.pad_right))
        return {
            "weight": np.einsum("ot,itk->oik", g, win),
            "bias": g.sum(axis=1),
        }

    def trainable(self):
        return {"weight": self.weight, "bias": self.bias}

    def to_dict(self):
        return {
            "kind": self.kind,
            "channels_out": self.weight.shape[0],
            "channels_in": self.weight.shape[1],
            "kernel_len": self.kernel_len,
            "weight": self.weight.tolist(),
            "bias": self.bias.tolist(),
        }


class Relu(Layer):
    kind = "relu"

    def forward(self, x):
        return np.maximum(x, 0.0)

    def backward(self, g, x, y):
        return g * (x > 0)

    def guided_backward(self, g, x, y):
        return g * (x > 0) * (g > 0)

    def deeplift_backward(self, g, x, y, xb, yb, delta):
        dx = x - xb
        big = np.abs(dx) > delta
        ratio = np.where(big, (y - yb) / np.where(big, dx, 1.0), (x > 0).astype(float))
        return g * ratio


class GlobalAvgPool(Layer):
    kind = "global_avg_pool"

    def forward(self, x):
        return x.mean(axis=1, keepdims=True)

    def backward(self, g, x, y):
        return np.broadcast_to(g / x.shape[1], x.shape).copy()


class ResidualAdd(Layer):
    """Adds the activation that entered layer ``skip_from`` to the input."""

    kind = "residual_add"

    def __init__(self, skip_from: int):
        self.skip_from = int(skip_from)

    def forward(self, x):  # actual add happens in the model loop
        raise RuntimeError("ResidualAdd is evaluated by the model")

    def backward(self, g, x, y):
        return g

    def to_dict(self):
        return {"kind": self.kind, "skip_from": self.skip_from}


class BatchNorm(Layer):
    """Per-channel affine normalization with maintained running statistics."""

    kind = "batch_norm_inference"

    def __init__(self, gamma, beta, mean=None, var=None, eps: float = 1e-5):
        self.gamma = np.asarray(gamma, dtype=np.float64)
        self.beta = np.asarray(beta, dtype=np.float64)
        n = self.gamma.shape[0]
        self.mean = np.zeros(n) if mean is None else np.asarray(mean, dtype=np.float64)
        self.var = np.ones(n) if var is None else np.asarray(var, dtype=np.float64)
        self.eps = float(eps)
        if not (self.beta.shape == self.mean.shape == self.var.shape == (n,)):
            raise ShapeMismatchError("batch norm parameter shapes disagree")

    def _scale(self):
        return self.gamma / np.sqrt(self.var + self.eps)

    def forward(self, x):
        s = self._scale()
        return s[:, None] * (x - self.mean[:, None]) + self.beta[:, None]

    def backward(self, g, x, y):
        return g * self._scale()[:, None]

    def param_grads(self, g, x):
        xn = (x - self.mean[:, None]) / np.sqrt(self.var + self.eps)[:, None]
        return {"gamma": (g * xn).sum(axis=1), "beta": g.sum(axis=1)}

    def trainable(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def update_stats(self, batch_inputs: Sequence[np.ndarray], momentum=0.1):
        joined = np.concatenate(batch_inputs, axis=1)
        self.mean = (1 - momentum) * self.mean + momentum * joined.mean(axis=1)
        self.var = (1 - momentum) * self.var + momentum * joined.var(axis=1)

    def to_dict(self):
        # fold statistics into the inference affine form
        s = self._scale()
        return {
            "kind": self.kind,
            "scale": s.tolist(),
            "shift": (self.beta - self.mean * s).tolist(),
        }


class Softmax(Layer):
    kind = "softmax"

    def forward(self, x):
        return _softmax(np.asarray(x).ravel())

    def backward(self, g, x, y):
        return _softmax_vjp(y, g).reshape(x.shape)

    def deeplift_backward(self, g, x, y, xb, yb, delta):
        # average the Jacobian along the straight path between baseline and
        # input (the multi-input analog of the scalar rescale ratio); this
        # keeps the attributions summing exactly to the output difference
        a, ab = np.asarray(x).ravel(), np.asarray(xb).ravel()
        acc = np.zeros_like(a)
        for t, w in zip(_GL_T, _GL_W):
            acc += w * _softmax_vjp(_softmax(ab + t * (a - ab)), g)
        return acc.reshape(np.asarray(x).shape)


_LAYER_KINDS = {
    cls.kind: cls
    for cls in (Dense, Conv1d, Relu, GlobalAvgPool, ResidualAdd, BatchNorm, Softmax)
}
_SUPPORTED = tuple(_LAYER_KINDS.values())


def layer_from_dict(d: dict) -> Layer:
    kind = d.get("kind")
    try:
        if kind == "dense":
            layer = Dense(np.array(d["weight"]), np.array(d["bias"]))
            if layer.weight.shape != (d["units_out"], d["units_in"]):
                raise ShapeMismatchError("dense shape fields disagree with weights")
            return layer
        if kind == "conv1d":
            layer = Conv1d(np.array(d["weight"]), np.array(d["bias"]))
            want = (d["channels_out"], d["channels_in"], d["kernel_len"])
            if layer.weight.shape != want:
                raise ShapeMismatchError("conv shape fields disagree with weights")
            return layer
        if kind == "relu":
            return Relu()
        if kind == "global_avg_pool":
            return GlobalAvgPool()
        if kind == "residual_add":
            return ResidualAdd(d["skip_from"])
        if kind == "batch_norm_inference":
            return BatchNorm(np.array(d["scale"]), np.array(d["shift"]), eps=0.0)
        if kind == "softmax":
            return Softmax()
    except KeyError as exc:
        raise MalformedFileError(f"layer field missing: {exc}") from exc
    except ValueError as exc:
        raise ShapeMismatchError(str(exc)) from exc
    raise MalformedFileError(f"unknown layer kind {kind!r}")


class Model:
    """An ordered layer stack ending in softmax probabilities."""

    def __init__(self, layers: Sequence[Layer], input_len: int, num_classes: int):
        layers = list(layers)
        if not layers or not isinstance(layers[-1], Softmax):
            layers.append(Softmax())
        for i, layer in enumerate(layers[:-1]):
            if isinstance(layer, Softmax):
                raise InvalidParamsError("softmax must be the final layer")
            if isinstance(layer, ResidualAdd) and not 0 <= layer.skip_from < i:
                raise InvalidParamsError("residual_add must skip from an earlier layer")
        self.layers = layers
        self.input_len = int(input_len)
        self.num_classes = int(num_classes)

    # -- forward ---------------------------------------------------------

    def _prepare(self, x) -> np.ndarray:
        v = x.values if isinstance(x, Series) else np.asarray(x, dtype=np.float64)
        if v.ndim != 1 or v.size != self.input_len:
            raise LengthMismatchError(
                f"model expects length {self.input_len}, got {v.size}"
            )
        return v.reshape(1, -1)

    def forward_trace(self, x) -> list:
        """All activations [input, after layer 0, ...]; last is the prob vector."""
        acts = [self._prepare(x)]
        for layer in self.layers:
            if isinstance(layer, ResidualAdd):
                nxt = acts[-1] + acts[layer.skip_from]
            else:
                nxt = layer.forward(acts[-1])
            acts.append(nxt)
        return acts

    def predict(self, x) -> np.ndarray:
        p = self.forward_trace(x)[-1]
        if p.size != self.num_classes:
            raise ShapeMismatchError(
                f"model produced {p.size} classes, declared {self.num_classes}"
            )
        if not np.all(np.isfinite(p)):
            raise NonFiniteError("non-finite activation; weights may be corrupt")
        return p

    # -- backward --------------------------------------------------------

    def _seed(self, class_index: int) -> np.ndarray:
        if not 0 <= class_index < self.num_classes:
            raise InvalidParamsError(f"class index {class_index} out of range")
        seed = np.zeros(self.num_classes)
        seed[class_index] = 1.0
        return seed

    def _backward(self, acts, seed, rule="gradient", baseline_acts=None,
                  delta=1e-7, grad_sink=None):
        for layer in self.layers:
            if not isinstance(layer, _SUPPORTED):
                raise UnsupportedLayerError(f"unsupported layer {type(layer).__name__}")
        g = seed
        pending: dict[int, np.ndarray] = {}
        for i in reversed(range(len(self.layers))):
            layer = self.layers[i]
            x, y = acts[i], acts[i + 1]
            if grad_sink is not None:
                for name, grad in layer.param_grads(g, x).items():
                    key = (i, name)
                    if key in grad_sink:
                        grad_sink[key] += grad
                    else:
                        grad_sink[key] = grad
            if isinstance(layer, ResidualAdd):
                prev = pending.get(layer.skip_from)
                pending[layer.skip_from] = g if prev is None else prev + g
            elif rule == "guided":
                g = layer.guided_backward(g, x, y)
            elif rule == "deeplift":
                g = layer.deeplift_backward(
                    g, x, y, baseline_acts[i], baseline_acts[i + 1], delta
                )
            else:
                g = layer.backward(g, x, y)
            if i in pending:
                g = g + pending.pop(i)
        return g

    def input_gradient(self, x, class_index: int) -> np.ndarray:
        acts = self.forward_trace(x)
        return self._backward(acts, self._seed(class_index)).ravel()

    def guided_gradient(self, x, class_index: int) -> np.ndarray:
        acts = self.forward_trace(x)
        return self._backward(acts, self._seed(class_index), rule="guided").ravel()

    def deeplift_multipliers(self, x, baseline, class_index: int,
                             delta: float = 1e-7) -> np.ndarray:
        acts = self.forward_trace(x)
        bacts = self.forward_trace(baseline)
        return self._backward(
            acts, self._seed(class_index), rule="deeplift", baseline_acts=bacts,
            delta=delta,
        ).ravel()

    # -- persistence -----------------------------------------------------

    @property
    def in_dim(self) -> int:
        return self.input_len

    def to_dict(self) -> dict:
        return {
            "input_len": self.input_len,
            "num_classes": self.num_classes,
            "layers": [layer.to_dict() for layer in self.layers],
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def from_dict(cls, d: dict) -> "Model":
        try:
            layers = [layer_from_dict(ld) for ld in d["layers"]]
            return cls(layers, int(d["input_len"]), int(d["num_classes"]))
        except (KeyError, TypeError) as exc:
            raise MalformedFileError(f"model document invalid: {exc}") from exc

    @classmethod
    def load(cls, path) -> "Model":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise MalformedFileError(f"cannot read {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise MalformedFileError(f"{path} is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise MalformedFileError(f"{path}: expected a JSON object")
        return cls.from_dict(doc)


def save_model(model: Model, path) -> None:
    model.save(path)


def load_model(path) -> Model:
    return Model.load(path)


class WrappedClassifier:
    """The base model composed with a space's linear inverse, M'(z) = M(F^-1(z)).

    Realized by prepending a single fully connected layer whose weight is the
    inverse operator, so gradients, guided rules and multipliers all flow
    through the transpose action automatically.
    """

    def __init__(self, base: Model, space: Space):
        if space.input_len != base.input_len:
            raise LengthMismatchError(
                f"space expects N={space.input_len}, model N={base.input_len}"
            )
        self.base = base
        self.space = space
        inverse_layer = Dense(
            weight=space.inverse_matrix.T.copy(), bias=np.zeros(space.input_len)
        )
        # residual skip indices refer to positions in the base stack and must
        # shift past the prepended inverse layer
        shifted = [
            ResidualAdd(ly.skip_from + 1) if isinstance(ly, ResidualAdd) else ly
            for ly in base.layers
        ]
        self._model = Model(
            [inverse_layer] + shifted,
            input_len=space.dim,
            num_classes=base.num_classes,
        )

    @property
    def in_dim(self) -> int:
        return self.space.dim

    @property
    def num_classes(self) -> int:
        return self.base.num_classes

    @property
    def space_id(self) -> str:
        return self.space.kind

    def as_model(self) -> Model:
        return self._model

    def predict(self, z) -> np.ndarray:
        return self._model.predict(z)

    def input_gradient(self, z, class_index: int) -> np.ndarray:
        return self._model.input_gradient(z, class_index)

    def guided_gradient(self, z, class_index: int) -> np.ndarray:
        return self._model.guided_gradient(z, class_index)

    def deeplift_multipliers(self, z, baseline, class_index, delta=1e-7):
        return self._model.deeplift_multipliers(z, baseline, class_index, delta)


def wrap(model: Model, space: Space) -> WrappedClassifier:
    return WrappedClassifier(model, space)


# -- training ------------------------------------------------------------


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 32
    learning_rate: float = 0.01
    seed: int = 0
    optimizer: str = "adam"

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.learning_rate <= 0:
            raise InvalidParamsError("epochs, batch_size >= 1 and learning_rate > 0")
        if self.optimizer not in ("sgd", "adam"):
            raise InvalidParamsError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class TrainResult:
    model: Model
    train_accuracy: float
    val_accuracy: float | None = None


def accuracy(model: Model, samples: Sequence[Series]) -> float:
    hits = sum(
        1 for s in samples if int(np.argmax(model.predict(s.values))) == s.label
    )
    return hits / len(samples)


def _he(rng, *shape):
    fan_in = int(np.prod(shape[1:]))
    return rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)


def build_architecture(arch: str, input_len: int, num_classes: int,
                       seed: int = 0) -> Model:
    """Build an initialized model from a small preset vocabulary.

    ``linear``; ``mlp[:hidden]``; ``cnn[:filters,kernel]``; ``resnet[:filters]``.
    """
    rng = np.random.default_rng(seed)
    name, _, arg = arch.partition(":")
    layers: list[Layer] = []
    if name == "linear":
        layers = [Dense(_he(rng, num_classes, input_len), np.zeros(num_classes))]
    elif name == "mlp":
        hidden = int(arg) if arg else 32
        layers = [
            Dense(_he(rng, hidden, input_len), np.zeros(hidden)),
            Relu(),
            Dense(_he(rng, num_classes, hidden), np.zeros(num_classes)),
        ]
    elif name == "cnn":
        filters, kernel = (int(v) for v in arg.split(",")) if arg else (12, 9)
        layers = [
            Conv1d(_he(rng, filters, 1, kernel), np.zeros(filters)),
            Relu(),
            Conv1d(_he(rng, filters, filters, kernel), np.zeros(filters)),
            Relu(),
            GlobalAvgPool(),
            Dense(_he(rng, num_classes, filters), np.zeros(num_classes)),
        ]
    elif name == "resnet":
        filters = int(arg) if arg else 8
        layers = [
            Conv1d(_he(rng, filters, 1, 9), np.zeros(filters)),
            BatchNorm(np.ones(filters), np.zeros(filters)),
            Relu(),
            # block input enters layer 3; the add pulls that activation back in
            Conv1d(_he(rng, filters, filters, 9), np.zeros(filters)),
            BatchNorm(np.ones(filters), np.zeros(filters)),
            Relu(),
            Conv1d(_he(rng, filters, filters, 9), np.zeros(filters)),
            BatchNorm(np.ones(filters), np.zeros(filters)),
            ResidualAdd(skip_from=3),
            Relu(),
            GlobalAvgPool(),
            Dense(_he(rng, num_classes, filters), np.zeros(num_classes)),
        ]
    else:
        raise InvalidParamsError(f"unknown architecture {arch!r}")
    return Model(layers, input_len, num_classes)


class _Adam:
    def __init__(self, lr):
        self.lr = lr
        self.m: dict = {}
        self.v: dict = {}
        self.t = 0

    def step(self, params: dict, grads: dict):
        self.t += 1
        b1, b2, eps = 0.9, 0.999, 1e-8
        for key, g in grads.items():
            self.m[key] = b1 * self.m.get(key, 0.0) + (1 - b1) * g
            self.v[key] = b2 * self.v.get(key, 0.0) + (1 - b2) * g * g
            mh = self.m[key] / (1 - b1**self.t)
            vh = self.v[key] / (1 - b2**self.t)
            params[key] -= self.lr * mh / (np.sqrt(vh) + eps)


class _Sgd:
    def __init__(self, lr):
        self.lr = lr

    def step(self, params: dict, grads: dict):
        for key, g in grads.items():
            params[key] -= self.lr * g


def train(dataset: Sequence[Series], arch, cfg: TrainConfig,
          val: Sequence[Series] | None = None) -> TrainResult:
    """Cross-entropy training; deterministic given cfg.seed."""
    samples = list(dataset)
    if not samples:
        raise EmptyDatasetError("training set is empty")
    lengths = {len(s) for s in samples}
    if len(lengths) != 1:
        raise InconsistentLengthsError(f"mixed sample lengths {sorted(lengths)}")
    labels = [s.label for s in samples]
    if any(lab is None or lab < 0 for lab in labels):
        raise InvalidParamsError("all training samples need labels in [0, C)")
    num_classes = max(labels) + 1
    input_len = lengths.pop()

    model = arch if isinstance(arch, Model) else build_architecture(
        arch, input_len, num_classes, seed=cfg.seed
    )
    if model.input_len != input_len:
        raise InconsistentLengthsError(
            f"model expects N={model.input_len}, data has N={input_len}"
        )
    if num_classes > model.num_classes:
        raise InvalidParamsError("labels exceed the model's class count")
    num_classes = model.num_classes

    params: dict = {}
    for i, layer in enumerate(model.layers):
        for name, arr in layer.trainable().items():
            params[(i, name)] = arr
    bn_indices = [i for i, ly in enumerate(model.layers) if isinstance(ly, BatchNorm)]

    opt = _Adam(cfg.learning_rate) if cfg.optimizer == "adam" else _Sgd(
        cfg.learning_rate
    )
    rng = np.random.default_rng(cfg.seed)
    n = len(samples)
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            grads: dict = {}
            bn_inputs = {i: [] for i in bn_indices}
            for idx in batch:
                s = samples[idx]
                acts = model.forward_trace(s.values)
                for i in bn_indices:
                    bn_inputs[i].append(acts[i])
                p = acts[-1]
                seed_grad = np.zeros(num_classes)
                seed_grad[s.label] = -1.0 / max(p[s.label], 1e-12)
                model._backward(acts, seed_grad, grad_sink=grads)
            scale = 1.0 / len(batch)
            grads = {k: v * scale for k, v in grads.items()}
            opt.step(params, grads)
            for i in bn_indices:
                model.layers[i].update_stats(bn_inputs[i])

    return TrainResult(
        model=model,
        train_accuracy=accuracy(model, samples),
        val_accuracy=accuracy(model, val) if val else None,
    )
