"""Gradient descent for logistic regression and SVM over a pluggable engine.

Both models need exactly two matrix-vector products per iteration: the
score vector X.w and a transposed product X^T.p, where p depends on the
model. The engine supplies those two products, so the same loop runs
against a local dense engine or the coded distributed runtime.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "Model",
    "TrainState",
    "LabeledDataset",
    "MatvecEngine",
    "LocalEngine",
    "TrainingAbortedError",
    "TrainResult",
    "sigmoid",
    "lr_gradient",
    "svm_margin_vector",
    "svm_gradient",
    "gd_step",
    "train",
]


class Model(Enum):
    LOGISTIC_REGRESSION = "lr"
    SVM = "svm"


class TrainingAbortedError(RuntimeError):
    """The matvec engine failed mid-run; carries the completed iteration count."""

    def __init__(self, completed_iterations: int, message: str = ""):
        super().__init__(
            message or f"training aborted after {completed_iterations} iterations"
        )
        self.completed_iterations = completed_iterations


@dataclass(frozen=True)
class TrainState:
    """Weights plus hyperparameters; a fresh value each iteration."""

    w: np.ndarray
    eta: float
    lam: float
    iter: int = 0

    def __post_init__(self) -> None:
        w = np.asarray(self.w, dtype=np.float64).reshape(-1)
        if self.eta <= 0:
            raise ValueError(f"eta must be > 0, got {self.eta}")
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        w = w.copy()
        w.flags.writeable = False
        object.__setattr__(self, "w", w)


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix plus labels ({0,1} for LR, {-1,+1} for SVM)."""

    x: np.ndarray
    y: np.ndarray
    n_samples: int

    def __post_init__(self) -> None:
        if self.y.shape[0] != self.x.shape[0]:
            raise ValueError(
                f"{self.y.shape[0]} labels for {self.x.shape[0]} samples"
            )


class MatvecEngine:
    """Capability contract: the two products the trainers need."""

    n_features: int

    def multiply_X(self, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def multiply_XT(self, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class LocalEngine(MatvecEngine):
    """Uncoded dense products; the oracle the coded runtime is checked against."""

    def __init__(self, x: np.ndarray):
        self._x = np.ascontiguousarray(x, dtype=np.float64)
        self.n_features = self._x.shape[1]

    def multiply_X(self, v):
        return self._x @ np.asarray(v, dtype=np.float64)

    def multiply_XT(self, v):
        return self._x.T @ np.asarray(v, dtype=np.float64)


def sigmoid(a):
    """1 / (1 + e^-a), branched on sign so large |a| saturates instead of
    overflowing. Accepts scalars or arrays."""
    arr = np.asarray(a, dtype=np.float64)
    out = np.empty_like(arr)
    pos = arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    ea = np.exp(arr[~pos])
    out[~pos] = ea / (1.0 + ea)
    return float(out) if np.isscalar(a) or arr.ndim == 0 else out


def lr_gradient(engine: MatvecEngine, state: TrainState, y: np.ndarray) -> np.ndarray:
    """X^T (sigmoid(X.w) - y); exactly two engine calls."""
    s = engine.multiply_X(state.w)
    p = sigmoid(s) - np.asarray(y, dtype=np.float64)
    return engine.multiply_XT(p)


def svm_margin_vector(s: np.ndarray, y: np.ndarray) -> np.ndarray:
    """-y_j where y_j * s_j < 1, else 0 (boundary counts as satisfied)."""
    s = np.asarray(s, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if s.shape != y.shape:
        raise ValueError(f"scores shape {s.shape} != labels shape {y.shape}")
    return np.where(y * s < 1.0, -y, 0.0)


def svm_gradient(
    engine: MatvecEngine, state: TrainState, y: np.ndarray, n_samples: int
) -> np.ndarray:
    """(1/n_samples) X^T m with m the hinge margin vector; two engine calls."""
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    s = engine.multiply_X(state.w)
    m = svm_margin_vector(s, y)
    return engine.multiply_XT(m) / n_samples


def gd_step(state: TrainState, grad: np.ndarray) -> TrainState:
    """w <- w - eta * (grad + lambda * w), iteration counter bumped."""
    g = np.asarray(grad, dtype=np.float64).reshape(-1)
    if g.size != state.w.size:
        raise ValueError(f"gradient has length {g.size}, expected {state.w.size}")
    w = state.w - state.eta * (g + state.lam * state.w)
    return TrainState(w, state.eta, state.lam, state.iter + 1)


def _lr_objective(s: np.ndarray, y: np.ndarray) -> float:
    # sum log-loss via softplus(s) - y*s, stable for large |s|
    softplus = np.maximum(s, 0.0) + np.log1p(np.exp(-np.abs(s)))
    return float(np.sum(softplus - y * s))


def _svm_objective(s: np.ndarray, y: np.ndarray, n_samples: int) -> float:
    return float(np.mean(np.maximum(0.0, 1.0 - y * s))) if n_samples else 0.0


def objective(model: Model, s: np.ndarray, y: np.ndarray, w: np.ndarray,
              lam: float, n_samples: int) -> float:
    """Training objective evaluated from precomputed scores s = X.w."""
    reg = 0.5 * lam * float(w @ w)
    if model is Model.LOGISTIC_REGRESSION:
        return _lr_objective(s, y) + reg
    return _svm_objective(s, y, n_samples) + reg


@dataclass(frozen=True)
class TrainResult:
    w: np.ndarray
    objectives: list[float]


def train(
    model: Model,
    engine: MatvecEngine,
    y: np.ndarray,
    n_samples: int | None = None,
    *,
    eta: float = 0.1,
    lam: float = 0.01,
    num_iter: int = 100,
    init_seed: int = 0,
    on_iteration=None,
) -> TrainResult:
    """Run num_iter gradient-descent iterations through the engine.

    Weights start at seeded uniform(-0.01, 0.01). The objective (sum
    log-loss for LR, mean hinge for SVM, plus the ridge term) is logged per
    iteration from the scores already computed for the gradient, so each
    iteration makes exactly two engine calls. An engine failure raises
    TrainingAbortedError carrying the number of completed iterations.
    """
    if num_iter < 0:
        raise ValueError(f"num_iter must be >= 0, got {num_iter}")
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if n_samples is None:
        n_samples = y.size
    rng = np.random.default_rng(init_seed)
    state = TrainState(rng.uniform(-0.01, 0.01, engine.n_features), eta, lam, 0)
    objectives: list[float] = []
    for t in range(num_iter):
        try:
            s = engine.multiply_X(state.w)
        except Exception as exc:
            raise TrainingAbortedError(t) from exc
        obj = objective(model, s, y, state.w, lam, n_samples)
        if model is Model.LOGISTIC_REGRESSION:
            p = sigmoid(s) - y
        else:
            p = svm_margin_vector(s, y)
        try:
            grad = engine.multiply_XT(p)
        except Exception as exc:
            raise TrainingAbortedError(t) from exc
        if model is Model.SVM:
            grad = grad / n_samples
        objectives.append(obj)
        state = gd_step(state, grad)
        if on_iteration is not None:
            on_iteration(t, state.w, obj)
    return TrainResult(state.w, objectives)
