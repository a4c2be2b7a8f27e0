"""Victim regression models: ridge regression and a small MLP.

Both expose ``predict`` and ``input_gradient`` on a single feature vector
(shape ``(k,)``) or a batch (shape ``(n, k)``); the attacks only ever talk to
a model through those two methods.
"""

import copy
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Annotated, ClassVar, Literal, Protocol

import numpy as np
import scipy.linalg
import torch
from pydantic import BaseModel, Field, TypeAdapter, ValidationError
from torch import nn

from regattack.core.exceptions import (
    ArtifactError,
    DegenerateSystemError,
    DivergenceError,
    InputError,
)
from regattack.core.models import Activation, ModelKind, TrainConfig, TrainMeta

logger = logging.getLogger(__name__)

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8
# Keeps d/dx sqrt(x) finite when a batch is fitted exactly.
_RMSE_EPS = 1e-12

_ACTIVATIONS: dict[Activation, type[nn.Module]] = {
    Activation.RELU: nn.ReLU,
    Activation.TANH: nn.Tanh,
    Activation.SIGMOID: nn.Sigmoid,
}


class RegressionModel(Protocol):
    """Anything an attack can query for outputs and input-gradients."""

    kind: ClassVar[ModelKind]

    @property
    def feature_dim(self) -> int: ...

    def predict(self, x: np.ndarray) -> np.ndarray | float: ...

    def input_gradient(self, x: np.ndarray) -> np.ndarray: ...


def _as_batch(x: np.ndarray, feature_dim: int) -> tuple[np.ndarray, bool]:
    """Return ``x`` as a 2-D float array and whether it was a single vector."""
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2 or arr.shape[1] != feature_dim:
        raise InputError(
            f"Expected input with {feature_dim} features, got shape {np.shape(x)}"
        )
    return arr, single


def _check_training_data(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    features = np.asarray(X, dtype=np.float64)
    targets = np.asarray(y, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] < 1 or features.shape[1] < 1:
        raise InputError(f"X must be a non-empty n x k matrix, got {features.shape}")
    if targets.shape != (features.shape[0],):
        raise InputError(
            f"y must have length {features.shape[0]}, got shape {targets.shape}"
        )
    if not (np.all(np.isfinite(features)) and np.all(np.isfinite(targets))):
        raise InputError("Training data contains non-finite values")
    return features, targets


# Ridge regression


@dataclass(frozen=True, eq=False)
class RidgeModel:
    """Linear model g(x) = w.x + b fitted with an L2 penalty on w."""

    kind: ClassVar[ModelKind] = ModelKind.RIDGE

    weights: np.ndarray
    intercept: float
    ridge_lambda: float = 0.0

    @property
    def feature_dim(self) -> int:
        return int(self.weights.shape[0])

    def predict(self, x: np.ndarray) -> np.ndarray | float:
        batch, single = _as_batch(x, self.feature_dim)
        out = batch @ self.weights + self.intercept
        return float(out[0]) if single else out

    def input_gradient(self, x: np.ndarray) -> np.ndarray:
        batch, single = _as_batch(x, self.feature_dim)
        grad = np.broadcast_to(self.weights, batch.shape).copy()
        return grad[0] if single else grad


def train_ridge(X: np.ndarray, y: np.ndarray, ridge_lambda: float = 0.1) -> RidgeModel:
    """Fit ridge regression in closed form with an unpenalized intercept.

    Minimizes ||Xw + b - y||^2 + ridge_lambda * ||w||^2 by centering the data,
    solving (Xc'Xc + lambda I) w = Xc'yc and recovering b from the means.

    Args:
        X: Feature matrix of shape (n, k)
        y: Targets of shape (n,)
        ridge_lambda: Non-negative penalty weight

    Returns:
        Fitted RidgeModel

    Raises:
        InputError: If shapes disagree or ridge_lambda is negative
        DegenerateSystemError: If ridge_lambda is 0 and the system is singular
    """
    features, targets = _check_training_data(X, y)
    if ridge_lambda < 0:
        raise InputError(f"ridge_lambda must be non-negative, got {ridge_lambda}")

    k = features.shape[1]
    x_mean = features.mean(axis=0)
    y_mean = float(targets.mean())
    centered = features - x_mean
    gram = centered.T @ centered + ridge_lambda * np.eye(k)
    rhs = centered.T @ (targets - y_mean)

    if ridge_lambda == 0:
        rank = int(np.linalg.matrix_rank(gram))
        if rank < k:
            raise DegenerateSystemError(
                f"Normal equations are singular (rank {rank} < {k}) with lambda=0",
                rank=rank,
            )
    try:
        weights = scipy.linalg.solve(gram, rhs, assume_a="pos")
    except np.linalg.LinAlgError as e:
        raise DegenerateSystemError(f"Cannot solve normal equations: {e}") from e

    intercept = y_mean - float(x_mean @ weights)
    return RidgeModel(
        weights=np.asarray(weights, dtype=np.float64),
        intercept=intercept,
        ridge_lambda=float(ridge_lambda),
    )


# Multi-layer perceptron


def _build_network(
    layer_weights: list[np.ndarray],
    layer_biases: list[np.ndarray],
    activation: Activation,
    trainable: bool,
) -> nn.Sequential:
    modules: list[nn.Module] = []
    last = len(layer_weights) - 1
    for i, (weight, bias) in enumerate(zip(layer_weights, layer_biases, strict=True)):
        out_features, in_features = weight.shape
        linear = nn.Linear(in_features, out_features, dtype=torch.float64)
        with torch.no_grad():
            linear.weight.copy_(torch.from_numpy(np.ascontiguousarray(weight)))
            linear.bias.copy_(torch.from_numpy(np.ascontiguousarray(bias)))
        modules.append(linear)
        if i != last:
            modules.append(_ACTIVATIONS[activation]())
    network = nn.Sequential(*modules)
    network.requires_grad_(trainable)
    if not trainable:
        network.eval()
    return network


class MlpModel:
    """Fully connected regressor: hidden layers with a nonlinearity, linear output."""

    kind: ClassVar[ModelKind] = ModelKind.MLP

    def __init__(
        self,
        layer_weights: list[np.ndarray],
        layer_biases: list[np.ndarray],
        activation: Activation = Activation.RELU,
        train_meta: TrainMeta | None = None,
    ) -> None:
        """Initialize MlpModel.

        Args:
            layer_weights: Weight matrices of shape (out, in), first to last layer
            layer_biases: Bias vectors matching layer_weights
            activation: Hidden-layer nonlinearity
            train_meta: Training metadata, absent for hand-built models

        Raises:
            InputError: If consecutive layer shapes do not chain or the last
                layer does not produce a scalar
        """
        if not layer_weights or len(layer_weights) != len(layer_biases):
            raise InputError("Need one bias vector per weight matrix")
        pairs = zip(layer_weights, layer_biases, strict=True)
        for i, (weight, bias) in enumerate(pairs):
            if weight.ndim != 2 or bias.shape != (weight.shape[0],):
                raise InputError(f"Layer {i}: bias does not match weight shape")
            if i > 0 and weight.shape[1] != layer_weights[i - 1].shape[0]:
                raise InputError(f"Layer {i}: input width does not match layer {i - 1}")
        if layer_weights[-1].shape[0] != 1:
            raise InputError("Output layer must have exactly one unit")

        self._weights = [np.array(w, dtype=np.float64) for w in layer_weights]
        self._biases = [np.array(b, dtype=np.float64) for b in layer_biases]
        self.activation = activation
        self.train_meta = train_meta
        self._network = _build_network(
            self._weights, self._biases, activation, trainable=False
        )
        for arr in (*self._weights, *self._biases):
            arr.setflags(write=False)

    @property
    def feature_dim(self) -> int:
        return int(self._weights[0].shape[1])

    @property
    def hidden_sizes(self) -> tuple[int, ...]:
        return tuple(int(w.shape[0]) for w in self._weights[:-1])

    @property
    def layer_weights(self) -> list[np.ndarray]:
        return list(self._weights)

    @property
    def layer_biases(self) -> list[np.ndarray]:
        return list(self._biases)

    def predict(self, x: np.ndarray) -> np.ndarray | float:
        batch, single = _as_batch(x, self.feature_dim)
        with torch.no_grad():
            out = self._network(torch.tensor(batch)).squeeze(-1).numpy()
        return float(out[0]) if single else out

    def input_gradient(self, x: np.ndarray) -> np.ndarray:
        batch, single = _as_batch(x, self.feature_dim)
        inputs = torch.tensor(batch, dtype=torch.float64, requires_grad=True)
        # Rows are independent, so the gradient of the sum is the per-row gradient.
        total = self._network(inputs).sum()
        (grad,) = torch.autograd.grad(total, inputs)
        result = grad.numpy()
        return result[0] if single else result


def _init_layers(
    sizes: list[int], rng: np.random.Generator
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    weights: list[np.ndarray] = []
    biases: list[np.ndarray] = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:], strict=True):
        bound = 1.0 / math.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return weights, biases


def _rmse_loss(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    return torch.sqrt(torch.mean((pred - target) ** 2) + _RMSE_EPS)


def train_mlp(X: np.ndarray, y: np.ndarray, cfg: TrainConfig | None = None) -> MlpModel:
    """Train an MLP with Adam on RMSE loss and early stopping.

    A ``cfg.validation_fraction`` share of the rows is held out; training stops
    after ``cfg.patience`` epochs without a validation improvement and the
    weights of the best epoch are restored. All randomness (initialization,
    split, shuffling) comes from ``cfg.seed``.

    Args:
        X: Feature matrix of shape (n, k)
        y: Targets of shape (n,)
        cfg: Training configuration (defaults to TrainConfig())

    Returns:
        Trained MlpModel with train_meta filled in

    Raises:
        InputError: If there are too few rows to hold out a validation split
        DivergenceError: If the loss becomes non-finite
    """
    cfg = cfg or TrainConfig()
    features, targets = _check_training_data(X, y)
    n, k = features.shape
    n_val = max(1, round(cfg.validation_fraction * n))
    n_train = n - n_val
    if n < 2 or n_train < 1:
        raise InputError(f"Need at least 2 rows to split off validation data, got {n}")

    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(n)
    val_idx, train_idx = perm[:n_val], perm[n_val:]

    weights, biases = _init_layers([k, *cfg.hidden_sizes, 1], rng)
    network = _build_network(weights, biases, cfg.activation, trainable=True)
    optimizer = torch.optim.Adam(
        network.parameters(), lr=cfg.learning_rate, betas=ADAM_BETAS, eps=ADAM_EPS
    )

    x_all = torch.from_numpy(features)
    y_all = torch.from_numpy(targets)
    val_rows = torch.from_numpy(val_idx)
    x_val, y_val = x_all[val_rows], y_all[val_rows]

    best_state = copy.deepcopy(network.state_dict())
    best_rmse = math.inf
    best_epoch = 0
    epochs_run = 0
    stale = 0
    for epoch in range(1, cfg.max_epochs + 1):
        epochs_run = epoch
        network.train()
        order = rng.permutation(train_idx)
        for start in range(0, n_train, cfg.batch_size):
            batch = torch.from_numpy(order[start : start + cfg.batch_size])
            loss = _rmse_loss(network(x_all[batch]).squeeze(-1), y_all[batch])
            if not torch.isfinite(loss):
                raise DivergenceError(epoch, float(loss))
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()

        network.eval()
        with torch.no_grad():
            val_rmse = float(
                torch.sqrt(torch.mean((network(x_val).squeeze(-1) - y_val) ** 2))
            )
        if not math.isfinite(val_rmse):
            raise DivergenceError(epoch, val_rmse)
        if val_rmse < best_rmse:
            best_rmse = val_rmse
            best_epoch = epoch
            best_state = copy.deepcopy(network.state_dict())
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                logger.debug(
                    "Early stop at epoch %d (best %d, val rmse %.6f)",
                    epoch,
                    best_epoch,
                    best_rmse,
                )
                break

    network.load_state_dict(best_state)
    linears = [m for m in network if isinstance(m, nn.Linear)]
    return MlpModel(
        layer_weights=[m.weight.detach().numpy().copy() for m in linears],
        layer_biases=[m.bias.detach().numpy().copy() for m in linears],
        activation=cfg.activation,
        train_meta=TrainMeta(
            seed=cfg.seed,
            epochs_run=epochs_run,
            best_epoch=best_epoch,
            best_validation_rmse=best_rmse,
            n_train=n_train,
            n_validation=n_val,
        ),
    )


def train_model(
    kind: ModelKind,
    X: np.ndarray,
    y: np.ndarray,
    ridge_lambda: float = 0.1,
    train_config: TrainConfig | None = None,
) -> RegressionModel:
    """Train a victim model of the given kind."""
    if kind is ModelKind.RIDGE:
        return train_ridge(X, y, ridge_lambda)
    return train_mlp(X, y, train_config)


def predict(model: RegressionModel, x: np.ndarray) -> np.ndarray | float:
    """Model output for one vector (scalar) or a batch (vector)."""
    return model.predict(x)


def input_gradient(model: RegressionModel, x: np.ndarray) -> np.ndarray:
    """Exact gradient of the model output with respect to its input."""
    return model.input_gradient(x)


# Serialization

# Floats are stored as hex strings so a save/load round trip is bit-exact.


def _to_hex(values: np.ndarray) -> list[str]:
    return [float(v).hex() for v in np.asarray(values, dtype=np.float64).ravel()]


def _from_hex(values: list[str], shape: tuple[int, ...]) -> np.ndarray:
    return np.array([float.fromhex(v) for v in values], dtype=np.float64).reshape(shape)


class RidgeDocument(BaseModel):
    """JSON layout of a ridge model."""

    kind: Literal["ridge"] = "ridge"
    feature_dim: int
    weights: list[str]
    intercept: str
    ridge_lambda: float


class LayerDocument(BaseModel):
    """One dense layer; weights flattened row-major from shape (out, in)."""

    in_features: int
    out_features: int
    weights: list[str]
    bias: list[str]


class MlpDocument(BaseModel):
    """JSON layout of an MLP."""

    kind: Literal["mlp"] = "mlp"
    feature_dim: int
    activation: Activation
    layers: list[LayerDocument]
    train_meta: TrainMeta | None = None


ModelDocument = Annotated[RidgeDocument | MlpDocument, Field(discriminator="kind")]
_DOCUMENT_ADAPTER: TypeAdapter[RidgeDocument | MlpDocument] = TypeAdapter(
    ModelDocument
)


def model_to_document(model: RegressionModel) -> RidgeDocument | MlpDocument:
    """Convert a trained model to its JSON document."""
    if isinstance(model, RidgeModel):
        return RidgeDocument(
            feature_dim=model.feature_dim,
            weights=_to_hex(model.weights),
            intercept=float(model.intercept).hex(),
            ridge_lambda=model.ridge_lambda,
        )
    if isinstance(model, MlpModel):
        return MlpDocument(
            feature_dim=model.feature_dim,
            activation=model.activation,
            layers=[
                LayerDocument(
                    in_features=int(w.shape[1]),
                    out_features=int(w.shape[0]),
                    weights=_to_hex(w),
                    bias=_to_hex(b),
                )
                for w, b in zip(model.layer_weights, model.layer_biases, strict=True)
            ],
            train_meta=model.train_meta,
        )
    raise InputError(f"Cannot serialize model of type {type(model).__name__}")


def model_from_document(document: RidgeDocument | MlpDocument) -> RegressionModel:
    """Rebuild a model from its JSON document."""
    if isinstance(document, RidgeDocument):
        return RidgeModel(
            weights=_from_hex(document.weights, (document.feature_dim,)),
            intercept=float.fromhex(document.intercept),
            ridge_lambda=document.ridge_lambda,
        )
    return MlpModel(
        layer_weights=[
            _from_hex(layer.weights, (layer.out_features, layer.in_features))
            for layer in document.layers
        ],
        layer_biases=[
            _from_hex(layer.bias, (layer.out_features,)) for layer in document.layers
        ],
        activation=document.activation,
        train_meta=document.train_meta,
    )


def save_model(model: RegressionModel, path: Path) -> Path:
    """Write a model to a JSON file.

    Raises:
        ArtifactError: If the file cannot be written
    """
    document = model_to_document(model)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(document.model_dump_json(indent=2), encoding="utf-8")
    except OSError as e:
        raise ArtifactError(f"Failed to write model file: {e}", path=path) from e
    return path


def load_model(path: Path) -> RegressionModel:
    """Read a model written by save_model.

    Raises:
        ArtifactError: If the file is missing or malformed
    """
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
        document = _DOCUMENT_ADAPTER.validate_python(raw)
        return model_from_document(document)
    except FileNotFoundError as e:
        raise ArtifactError(f"Model file not found: {path}", path=path) from e
    except (OSError, json.JSONDecodeError, ValidationError, ValueError) as e:
        raise ArtifactError(f"Invalid model file {path}: {e}", path=path) from e
