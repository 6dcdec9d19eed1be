"""Single-layer peephole LSTM: cell forward pass and exact analytic backward.

Gate weights are stored stacked along the first axis in the fixed order
(input, forget, candidate, output), so one matrix product per source
(input, recurrent) computes all four gate pre-activations.  Peephole
weights are elementwise H-vectors; the input and forget gates read the
previous cell state, the output gate reads the freshly updated one.

All arithmetic is float64: the gradient acceptance checks compare against
central finite differences and need the headroom.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import DimensionError

GATE_ORDER = ("i", "f", "c", "o")


def sigmoid(a: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function (no overflow for large |a|)."""
    return expit(a)


def gate_rows(stacked: np.ndarray, gate: str) -> np.ndarray:
    """View of one gate's rows inside a (4H, ...) stacked array."""
    h = stacked.shape[0] // 4
    r = GATE_ORDER.index(gate)
    return stacked[r * h : (r + 1) * h]


@dataclass
class LstmParams:
    """Weights of one peephole LSTM layer with input width I and H units.

    ``W_x`` is (4H, I), ``W_h`` is (4H, H) and ``b`` is (4H,), each stacked
    in gate order (i, f, c, o).  Per-gate views are exposed as properties
    (``W_xi`` ... ``b_o``) and share memory with the stacked arrays.
    """

    W_x: np.ndarray
    W_h: np.ndarray
    b: np.ndarray
    w_ci: np.ndarray
    w_cf: np.ndarray
    w_co: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.W_x.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.W_h.shape[1]

    # named per-gate views
    @property
    def W_xi(self) -> np.ndarray:
        return gate_rows(self.W_x, "i")

    @property
    def W_xf(self) -> np.ndarray:
        return gate_rows(self.W_x, "f")

    @property
    def W_xc(self) -> np.ndarray:
        return gate_rows(self.W_x, "c")

    @property
    def W_xo(self) -> np.ndarray:
        return gate_rows(self.W_x, "o")

    @property
    def W_hi(self) -> np.ndarray:
        return gate_rows(self.W_h, "i")

    @property
    def W_hf(self) -> np.ndarray:
        return gate_rows(self.W_h, "f")

    @property
    def W_hc(self) -> np.ndarray:
        return gate_rows(self.W_h, "c")

    @property
    def W_ho(self) -> np.ndarray:
        return gate_rows(self.W_h, "o")

    @property
    def b_i(self) -> np.ndarray:
        return gate_rows(self.b, "i")

    @property
    def b_f(self) -> np.ndarray:
        return gate_rows(self.b, "f")

    @property
    def b_c(self) -> np.ndarray:
        return gate_rows(self.b, "c")

    @property
    def b_o(self) -> np.ndarray:
        return gate_rows(self.b, "o")

    def validate(self) -> None:
        h, i = self.hidden_dim, self.input_dim
        if self.W_x.shape != (4 * h, i) or self.W_h.shape != (4 * h, h):
            raise DimensionError(
                f"inconsistent LSTM weight shapes: W_x {self.W_x.shape}, W_h {self.W_h.shape}"
            )
        if self.b.shape != (4 * h,):
            raise DimensionError(f"bias shape {self.b.shape}, expected ({4 * h},)")
        for name in ("w_ci", "w_cf", "w_co"):
            vec = getattr(self, name)
            if vec.shape != (h,):
                raise DimensionError(f"peephole {name} shape {vec.shape}, expected ({h},)")
        for arr in (self.W_x, self.W_h, self.b, self.w_ci, self.w_cf, self.w_co):
            if not np.isfinite(arr).all():
                raise DimensionError("LSTM parameters contain non-finite values")


@dataclass
class LstmState:
    """Hidden and cell state vectors, both length H."""

    h: np.ndarray
    c: np.ndarray


@dataclass
class TapeEntry:
    """Per-step activations cached by cell_forward, sufficient for backward."""

    x: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    g: np.ndarray
    o: np.ndarray
    c: np.ndarray
    tanh_c: np.ndarray


@dataclass
class LstmGrads:
    """Gradient accumulators mirroring LstmParams' stacked layout."""

    W_x: np.ndarray
    W_h: np.ndarray
    b: np.ndarray
    w_ci: np.ndarray
    w_cf: np.ndarray
    w_co: np.ndarray

    @classmethod
    def zeros_like(cls, params: LstmParams) -> "LstmGrads":
        return cls(
            W_x=np.zeros_like(params.W_x),
            W_h=np.zeros_like(params.W_h),
            b=np.zeros_like(params.b),
            w_ci=np.zeros_like(params.w_ci),
            w_cf=np.zeros_like(params.w_cf),
            w_co=np.zeros_like(params.w_co),
        )

    def arrays(self) -> list[np.ndarray]:
        return [self.W_x, self.W_h, self.b, self.w_ci, self.w_cf, self.w_co]


def zero_state(hidden_dim: int) -> LstmState:
    return LstmState(h=np.zeros(hidden_dim), c=np.zeros(hidden_dim))


def uniform_lstm_params(
    rng: np.random.Generator, input_dim: int, hidden_dim: int, scale: float
) -> LstmParams:
    """Draw all weights uniform in [-scale, scale], biases zero.

    Draw order is fixed (W_x, W_h, w_ci, w_cf, w_co) so a given generator
    state always yields the same parameters.
    """
    h = hidden_dim
    return LstmParams(
        W_x=rng.uniform(-scale, scale, size=(4 * h, input_dim)),
        W_h=rng.uniform(-scale, scale, size=(4 * h, h)),
        b=np.zeros(4 * h),
        w_ci=rng.uniform(-scale, scale, size=h),
        w_cf=rng.uniform(-scale, scale, size=h),
        w_co=rng.uniform(-scale, scale, size=h),
    )


def cell_forward(
    params: LstmParams, x_t: np.ndarray, prev: LstmState
) -> tuple[LstmState, TapeEntry]:
    """One LSTM step.

    i = sig(W_xi x + W_hi h' + w_ci*c' + b_i)
    f = sig(W_xf x + W_hf h' + w_cf*c' + b_f)
    g = tanh(W_xc x + W_hc h' + b_c)
    c = f*c' + i*g
    o = sig(W_xo x + W_ho h' + w_co*c + b_o)
    h = o*tanh(c)
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    h = params.hidden_dim
    if x_t.shape != (params.input_dim,):
        raise DimensionError(
            f"input shape {x_t.shape}, expected ({params.input_dim},)"
        )
    if prev.h.shape != (h,) or prev.c.shape != (h,):
        raise DimensionError(
            f"state shapes {prev.h.shape}/{prev.c.shape}, expected ({h},)"
        )
    pre = params.W_x @ x_t + params.W_h @ prev.h + params.b
    i = sigmoid(pre[0:h] + params.w_ci * prev.c)
    f = sigmoid(pre[h : 2 * h] + params.w_cf * prev.c)
    g = np.tanh(pre[2 * h : 3 * h])
    c = f * prev.c + i * g
    o = sigmoid(pre[3 * h : 4 * h] + params.w_co * c)
    tanh_c = np.tanh(c)
    h_new = o * tanh_c
    entry = TapeEntry(
        x=x_t, h_prev=prev.h, c_prev=prev.c, i=i, f=f, g=g, o=o, c=c, tanh_c=tanh_c
    )
    return LstmState(h=h_new, c=c), entry


def cell_backward(
    params: LstmParams,
    entry: TapeEntry,
    grad_h: np.ndarray,
    grad_c: np.ndarray,
    grads: LstmGrads,
) -> tuple[np.ndarray, tuple[np.ndarray, np.ndarray]]:
    """Exact reverse of one cell_forward step.

    ``grad_h``/``grad_c`` are the loss gradients flowing into this step's
    outputs.  Parameter gradients are accumulated (added) into ``grads``;
    the gradients with respect to the step input and the previous state are
    returned.
    """
    h = params.hidden_dim
    grad_h = np.asarray(grad_h, dtype=np.float64)
    grad_c = np.asarray(grad_c, dtype=np.float64)
    if grad_h.shape != (h,) or grad_c.shape != (h,):
        raise DimensionError(
            f"upstream gradient shapes {grad_h.shape}/{grad_c.shape}, expected ({h},)"
        )
    da_o = grad_h * entry.tanh_c * entry.o * (1.0 - entry.o)
    # the output-gate peephole reads the updated cell state, so its
    # pre-activation gradient feeds back into dc as well
    dc = grad_c + grad_h * entry.o * (1.0 - entry.tanh_c**2) + da_o * params.w_co
    da_i = dc * entry.g * entry.i * (1.0 - entry.i)
    da_f = dc * entry.c_prev * entry.f * (1.0 - entry.f)
    da_c = dc * entry.i * (1.0 - entry.g**2)

    da = np.empty(4 * h)
    da[0:h] = da_i
    da[h : 2 * h] = da_f
    da[2 * h : 3 * h] = da_c
    da[3 * h : 4 * h] = da_o

    grads.W_x += np.outer(da, entry.x)
    grads.W_h += np.outer(da, entry.h_prev)
    grads.b += da
    grads.w_ci += da_i * entry.c_prev
    grads.w_cf += da_f * entry.c_prev
    grads.w_co += da_o * entry.c

    grad_x = params.W_x.T @ da
    grad_h_prev = params.W_h.T @ da
    grad_c_prev = dc * entry.f + da_i * params.w_ci + da_f * params.w_cf
    return grad_x, (grad_h_prev, grad_c_prev)
