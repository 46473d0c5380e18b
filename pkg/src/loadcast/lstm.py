"""From-scratch LSTM sequence regressor: forward, BPTT, loss, optimizers.

Single-layer LSTM with a direct multi-horizon linear head: the hidden state
after the last input step maps to all K output values in one shot. Everything
is plain numpy float64 and deterministic for a fixed seed.

Gradient convention: gradients accumulate by summation over the examples of a
batch (duplicating an example doubles its contribution). The Adam default
makes the parameter updates insensitive to that scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DivergenceError, ValidationError

GATE_FIELDS = ("W_f", "W_i", "W_c", "W_o", "U_f", "U_i", "U_c", "U_o", "b_f", "b_i", "b_c", "b_o")
HEAD_FIELDS = ("W_y", "b_y")


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function (branches on sign).

    exp() only ever sees non-positive arguments, so no overflow for any z."""
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


@dataclass
class LstmParameters:
    """All recurrent-cell weights: input matrices W_*, recurrent matrices U_*,
    biases b_*, for the forget/input/candidate/output gates."""

    input_dim: int
    hidden_dim: int
    W_f: np.ndarray
    W_i: np.ndarray
    W_c: np.ndarray
    W_o: np.ndarray
    U_f: np.ndarray
    U_i: np.ndarray
    U_c: np.ndarray
    U_o: np.ndarray
    b_f: np.ndarray
    b_i: np.ndarray
    b_c: np.ndarray
    b_o: np.ndarray

    def __post_init__(self):
        d, H = self.input_dim, self.hidden_dim
        if d < 1 or H < 1:
            raise ValidationError(f"dimensions must be >= 1, got d={d}, H={H}")
        for name in GATE_FIELDS:
            arr = getattr(self, name)
            want = (H, d) if name.startswith("W") else (H, H) if name.startswith("U") else (H,)
            if arr.shape != want:
                raise ValidationError(f"{name} has shape {arr.shape}, expected {want}")
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} contains non-finite entries")

    def arrays(self) -> list[np.ndarray]:
        return [getattr(self, name) for name in GATE_FIELDS]

    def copy(self) -> "LstmParameters":
        return replace(self, **{n: getattr(self, n).copy() for n in GATE_FIELDS})


@dataclass
class RegressorHead:
    """Linear map from the final hidden state to the K forecast values."""

    W_y: np.ndarray
    b_y: np.ndarray

    def __post_init__(self):
        if self.W_y.ndim != 2 or self.b_y.shape != (self.W_y.shape[0],):
            raise ValidationError(
                f"head shapes inconsistent: W_y {self.W_y.shape}, b_y {self.b_y.shape}"
            )
        if not (np.all(np.isfinite(self.W_y)) and np.all(np.isfinite(self.b_y))):
            raise ValidationError("head contains non-finite entries")

    @property
    def horizon(self) -> int:
        return self.W_y.shape[0]

    def arrays(self) -> list[np.ndarray]:
        return [self.W_y, self.b_y]

    def copy(self) -> "RegressorHead":
        return RegressorHead(self.W_y.copy(), self.b_y.copy())


@dataclass(frozen=True)
class LstmState:
    """Recurrent state: cell vector c and hidden vector h."""

    c: np.ndarray
    h: np.ndarray

    @classmethod
    def zeros(cls, hidden_dim: int) -> "LstmState":
        return cls(np.zeros(hidden_dim), np.zeros(hidden_dim))


@dataclass
class Gradients:
    """Loss gradients, same shapes as LstmParameters plus RegressorHead."""

    W_f: np.ndarray
    W_i: np.ndarray
    W_c: np.ndarray
    W_o: np.ndarray
    U_f: np.ndarray
    U_i: np.ndarray
    U_c: np.ndarray
    U_o: np.ndarray
    b_f: np.ndarray
    b_i: np.ndarray
    b_c: np.ndarray
    b_o: np.ndarray
    W_y: np.ndarray
    b_y: np.ndarray

    @classmethod
    def zeros_like(cls, p: LstmParameters, head: RegressorHead) -> "Gradients":
        fields = {n: np.zeros_like(getattr(p, n)) for n in GATE_FIELDS}
        fields.update({n: np.zeros_like(getattr(head, n)) for n in HEAD_FIELDS})
        return cls(**fields)

    def arrays(self) -> list[np.ndarray]:
        return [getattr(self, name) for name in GATE_FIELDS + HEAD_FIELDS]

    def global_norm(self) -> float:
        return float(np.sqrt(sum(float(np.sum(a * a)) for a in self.arrays())))

    def add_(self, other: "Gradients") -> "Gradients":
        for mine, theirs in zip(self.arrays(), other.arrays()):
            mine += theirs
        return self

    def scale_(self, factor: float) -> "Gradients":
        for a in self.arrays():
            a *= factor
        return self


def clip_gradients(g: Gradients, max_norm: float) -> float:
    """Scale g in place so its global L2 norm is at most max_norm.

    Returns the pre-clip norm."""
    norm = g.global_norm()
    if norm > max_norm and norm > 0:
        g.scale_(max_norm / norm)
    return norm


def init_parameters(seed: int, d: int, H: int, K: int) -> tuple[LstmParameters, RegressorHead]:
    """Uniform [-1/sqrt(H), 1/sqrt(H)] weights; zero biases except b_f = 1.

    The forget-gate bias starts at one so early training does not wipe the
    cell state. Draw order is fixed; same seed gives identical parameters.
    """
    if d < 1 or H < 1 or K < 1:
        raise ValidationError(f"dimensions must be >= 1, got d={d}, H={H}, K={K}")
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(H)

    def u(*shape):
        return rng.uniform(-bound, bound, size=shape)

    params = LstmParameters(
        input_dim=d,
        hidden_dim=H,
        W_f=u(H, d),
        W_i=u(H, d),
        W_c=u(H, d),
        W_o=u(H, d),
        U_f=u(H, H),
        U_i=u(H, H),
        U_c=u(H, H),
        U_o=u(H, H),
        b_f=np.ones(H),
        b_i=np.zeros(H),
        b_c=np.zeros(H),
        b_o=np.zeros(H),
    )
    head = RegressorHead(W_y=u(K, H), b_y=np.zeros(K))
    return params, head


# ---------------------------------------------------------------------------
# Forward


@dataclass
class StepCache:
    """Intermediates of one cell step, everything backward needs."""

    x: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    f: np.ndarray
    i: np.ndarray
    g: np.ndarray
    o: np.ndarray
    c: np.ndarray
    tc: np.ndarray  # tanh(c)


def cell_forward(
    p: LstmParameters, x: np.ndarray, s: LstmState
) -> tuple[LstmState, StepCache]:
    """One LSTM cell step.

    f = sig(W_f x + U_f h + b_f); i = sig(W_i x + U_i h + b_i)
    g = tanh(W_c x + U_c h + b_c); c' = f*c + i*g
    o = sig(W_o x + U_o h + b_o); h' = o * tanh(c')
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (p.input_dim,):
        raise ValidationError(f"input has shape {x.shape}, expected ({p.input_dim},)")
    if s.h.shape != (p.hidden_dim,) or s.c.shape != (p.hidden_dim,):
        raise ValidationError("state dimensions do not match parameters")
    f = sigmoid(p.W_f @ x + p.U_f @ s.h + p.b_f)
    i = sigmoid(p.W_i @ x + p.U_i @ s.h + p.b_i)
    g = np.tanh(p.W_c @ x + p.U_c @ s.h + p.b_c)
    c = f * s.c + i * g
    o = sigmoid(p.W_o @ x + p.U_o @ s.h + p.b_o)
    tc = np.tanh(c)
    h = o * tc
    cache = StepCache(x=x, h_prev=s.h, c_prev=s.c, f=f, i=i, g=g, o=o, c=c, tc=tc)
    return LstmState(c=c, h=h), cache


class BatchCache:
    """Stacked per-step intermediates for a forward pass over (B, L, d) inputs.

    Internals are time-major so each step's slice is contiguous: ACT is
    (L, B, 4H) with the gate activations side by side in f|i|o|g column
    order (the three sigmoid gates first); C, TC, Hs are (L, B, H).
    """

    __slots__ = ("params", "head", "X", "ACT", "C", "TC", "Hs", "yhat", "stacked_u")

    def __init__(self, params, head, X, ACT, C, TC, Hs, yhat, stacked_u):
        self.params = params
        self.head = head
        self.X = X
        self.ACT = ACT
        self.C, self.TC, self.Hs = C, TC, Hs
        self.yhat = yhat
        self.stacked_u = stacked_u

    def gates(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(f, i, o, g) views over all steps, each (L, B, H)."""
        H = self.params.hidden_dim
        a = self.ACT
        return a[..., :H], a[..., H : 2 * H], a[..., 2 * H : 3 * H], a[..., 3 * H :]


def _stacked_weights(p: LstmParameters) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(W, U, b) with the four gates stacked row-wise in f|i|o|g order."""
    W = np.concatenate([p.W_f, p.W_i, p.W_o, p.W_c], axis=0)
    U = np.concatenate([p.U_f, p.U_i, p.U_o, p.U_c], axis=0)
    b = np.concatenate([p.b_f, p.b_i, p.b_o, p.b_c])
    return W, U, b


def forward_batch(
    p: LstmParameters, head: RegressorHead, X: np.ndarray
) -> tuple[np.ndarray, BatchCache]:
    """Run the cell over each row sequence and apply the head: X (B, L, d) -> (B, K).

    The input-side contribution W x_t + b for all four gates and all steps is
    one matmul; each step then needs a single recurrent matmul, one sigmoid
    over the three sigmoid gates, and two tanh calls.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3 or X.shape[2] != p.input_dim:
        raise ValidationError(f"batch input has shape {X.shape}, expected (B, L, {p.input_dim})")
    B, L, _ = X.shape
    if L < 1:
        raise ValidationError("sequence length must be >= 1")
    H = p.hidden_dim
    W, U, b = _stacked_weights(p)
    U_t = np.ascontiguousarray(U.T)
    ZX = np.ascontiguousarray((X @ W.T + b).transpose(1, 0, 2))  # (L, B, 4H)
    ACT = np.empty((L, B, 4 * H))
    C = np.empty((L, B, H))
    TC = np.empty((L, B, H))
    Hs = np.empty((L, B, H))
    h = np.zeros((B, H))
    z = np.empty((B, 4 * H))
    for t in range(L):
        np.matmul(h, U_t, out=z)
        z += ZX[t]
        act = ACT[t]
        sig, z_sig = act[:, : 3 * H], z[:, : 3 * H]
        np.negative(np.abs(z_sig, out=sig), out=sig)
        np.exp(sig, out=sig)  # exp(-|z|), safe for any z
        sig /= 1.0 + sig  # sigmoid of -|z|
        np.subtract(1.0, sig, out=sig, where=z_sig >= 0)  # reflect positive side
        g = act[:, 3 * H :]
        np.tanh(z[:, 3 * H :], out=g)  # candidate gate is tanh, not sigmoid
        f, i, o = act[:, :H], act[:, H : 2 * H], act[:, 2 * H : 3 * H]
        c_t = C[t]
        np.multiply(i, g, out=c_t)
        if t > 0:
            c_t += f * C[t - 1]
        tc = np.tanh(c_t, out=TC[t])
        h = np.multiply(o, tc, out=Hs[t])
    yhat = h @ head.W_y.T + head.b_y
    return yhat, BatchCache(p, head, X, ACT, C, TC, Hs, yhat, U)


def backward_batch(cache: BatchCache, dY: np.ndarray) -> Gradients:
    """Reverse-mode accumulation through all steps; gradients sum over the batch.

    The time loop only propagates dh/dc and collects the pre-activation
    deltas; all weight gradients reduce to single matmuls at the end.
    """
    p, head = cache.params, cache.head
    X, ACT, C, TC, Hs = cache.X, cache.ACT, cache.C, cache.TC, cache.Hs
    B, L, d = X.shape
    H = p.hidden_dim
    U = cache.stacked_u
    g_out = Gradients.zeros_like(p, head)
    g_out.W_y += dY.T @ Hs[L - 1]
    g_out.b_y += dY.sum(axis=0)
    DZ = np.empty((L, B, 4 * H))
    dh = dY @ head.W_y
    dc = np.zeros_like(dh)
    tmp = np.empty_like(dc)
    for t in range(L - 1, -1, -1):
        act = ACT[t]
        f, i, o, g = act[:, :H], act[:, H : 2 * H], act[:, 2 * H : 3 * H], act[:, 3 * H :]
        tc = TC[t]
        # dc += dh * o * (1 - tc^2)
        np.multiply(tc, tc, out=tmp)
        np.subtract(1.0, tmp, out=tmp)
        tmp *= o
        tmp *= dh
        dc += tmp
        dz = DZ[t]
        dz_f, dz_i = dz[:, :H], dz[:, H : 2 * H]
        dz_o, dz_g = dz[:, 2 * H : 3 * H], dz[:, 3 * H :]
        if t > 0:
            np.subtract(1.0, f, out=dz_f)
            dz_f *= f
            dz_f *= dc
            dz_f *= C[t - 1]
        else:
            dz_f[:] = 0.0  # initial cell state is zero, nothing flows through f
        np.subtract(1.0, i, out=dz_i)
        dz_i *= i
        dz_i *= g
        dz_i *= dc
        np.subtract(1.0, o, out=dz_o)
        dz_o *= o
        dz_o *= tc
        dz_o *= dh
        np.multiply(g, g, out=dz_g)
        np.subtract(1.0, dz_g, out=dz_g)
        dz_g *= i
        dz_g *= dc
        np.matmul(dz, U, out=dh)
        dc *= f
    # Hidden states shifted one step back; h before the first step is zero.
    H_prev = np.concatenate([np.zeros((1, B, H)), Hs[:-1]], axis=0)
    flat_z = DZ.reshape(L * B, 4 * H)
    dW = flat_z.T @ np.ascontiguousarray(X.transpose(1, 0, 2)).reshape(L * B, d)
    dU = flat_z.T @ H_prev.reshape(L * B, H)
    db = flat_z.sum(axis=0)
    for k, (wname, uname, bname) in enumerate(
        (("W_f", "U_f", "b_f"), ("W_i", "U_i", "b_i"), ("W_o", "U_o", "b_o"), ("W_c", "U_c", "b_c"))
    ):
        sl = slice(k * H, (k + 1) * H)
        getattr(g_out, wname)[...] = dW[sl]
        getattr(g_out, uname)[...] = dU[sl]
        getattr(g_out, bname)[...] = db[sl]
    return g_out


@dataclass
class SequenceCache:
    """Forward intermediates for one sequence, consumed by backward()."""

    batch: BatchCache

    @property
    def yhat(self) -> np.ndarray:
        return self.batch.yhat[0]


def sequence_forward(
    p: LstmParameters, head: RegressorHead, X: np.ndarray
) -> tuple[np.ndarray, SequenceCache]:
    """Zero initial state, cell over the L rows of X, then the linear head."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValidationError(f"sequence input must be 2-D (L, d), got shape {X.shape}")
    if X.shape[0] < 1:
        raise ValidationError("empty input sequence")
    yhat, batch = forward_batch(p, head, X[None, :, :])
    return yhat[0], SequenceCache(batch=batch)


def mse(actual: np.ndarray, predicted: np.ndarray) -> float:
    """Mean squared error (1/n) * sum((actual - predicted)^2)."""
    actual = np.asarray(actual, dtype=np.float64)
    predicted = np.asarray(predicted, dtype=np.float64)
    if actual.shape != predicted.shape:
        raise ValidationError(f"length mismatch: {actual.shape} vs {predicted.shape}")
    if actual.size == 0:
        raise ValidationError("mse of empty vectors is undefined")
    return float(np.mean((actual - predicted) ** 2))


def backward(
    p: LstmParameters, head: RegressorHead, cache: SequenceCache, target: np.ndarray
) -> Gradients:
    """Gradients of mse(target, yhat) w.r.t. every parameter, via BPTT."""
    if cache.batch.params is not p or cache.batch.head is not head:
        raise ValidationError("cache was produced by different parameters")
    target = np.asarray(target, dtype=np.float64)
    K = head.horizon
    if target.shape != (K,):
        raise ValidationError(f"target has shape {target.shape}, expected ({K},)")
    dY = 2.0 * (cache.batch.yhat - target[None, :]) / K
    return backward_batch(cache.batch, dY)


def loss_for(p: LstmParameters, head: RegressorHead, X: np.ndarray, target: np.ndarray) -> float:
    yhat, _ = sequence_forward(p, head, X)
    return mse(target, yhat)


def finite_diff_grad(
    p: LstmParameters, head: RegressorHead, X: np.ndarray, target: np.ndarray, eps: float
) -> Gradients:
    """Central finite differences of the loss over every scalar parameter.

    Testing oracle for backward(); O(#params) forward passes, so keep the
    instances small.
    """
    if eps <= 0:
        raise ValidationError(f"eps must be positive, got {eps}")
    p = p.copy()
    head = head.copy()
    out = Gradients.zeros_like(p, head)
    for arr, garr in zip(p.arrays() + head.arrays(), out.arrays()):
        flat = arr.reshape(-1)
        gflat = garr.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + eps
            up = loss_for(p, head, X, target)
            flat[j] = orig - eps
            down = loss_for(p, head, X, target)
            flat[j] = orig
            gflat[j] = (up - down) / (2.0 * eps)
    return out


def gate_ranges_ok(cache: SequenceCache | BatchCache) -> bool:
    """Check the numeric invariants on cached activations: gates in [0, 1],
    tanh outputs in [-1, 1]."""
    b = cache.batch if isinstance(cache, SequenceCache) else cache
    f, i, o, g = b.gates()
    gates_ok = all(np.all((a >= 0.0) & (a <= 1.0)) for a in (f, i, o))
    tanh_ok = np.all(np.abs(g) <= 1.0) and np.all(np.abs(b.TC) <= 1.0)
    return bool(gates_ok and tanh_ok)


# ---------------------------------------------------------------------------
# Training


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    learning_rate: float = 1e-3
    optimizer: str = "adam"  # "adam" (beta1=0.9, beta2=0.999, eps=1e-8) or "sgd"
    batch_size: int = 32
    lookback: int = 24
    hidden_dim: int = 16
    grad_clip_norm: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValidationError("epochs must be >= 1")
        if self.learning_rate < 0:
            raise ValidationError("learning_rate must be >= 0")
        for name in ("batch_size", "lookback", "hidden_dim"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1")
        if self.grad_clip_norm <= 0:
            raise ValidationError("grad_clip_norm must be positive")
        if self.optimizer not in ("adam", "sgd"):
            raise ValidationError(f"unknown optimizer {self.optimizer!r}")

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "learningRate": self.learning_rate,
            "optimizer": self.optimizer,
            "batchSize": self.batch_size,
            "lookback": self.lookback,
            "hiddenDim": self.hidden_dim,
            "gradClipNorm": self.grad_clip_norm,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(
            epochs=d["epochs"],
            learning_rate=d["learningRate"],
            optimizer=d["optimizer"],
            batch_size=d["batchSize"],
            lookback=d["lookback"],
            hidden_dim=d["hiddenDim"],
            grad_clip_norm=d["gradClipNorm"],
            seed=d["seed"],
        )


@dataclass
class LossCurve:
    """Per-epoch (epoch, train_mse, test_mse) diagnostic.

    train_mse is the mean squared error over the epoch's minibatches as they
    were visited (the usual fit-history meaning); test_mse is a full pass
    over the held-out set with the post-epoch parameters.
    """

    entries: list[tuple[int, float, float]] = field(default_factory=list)

    def append(self, epoch: int, train_mse: float, test_mse: float) -> None:
        self.entries.append((epoch, float(train_mse), float(test_mse)))

    def final(self) -> tuple[int, float, float]:
        return self.entries[-1]

    def first(self) -> tuple[int, float, float]:
        return self.entries[0]

    def to_csv(self) -> str:
        lines = ["epoch,train_mse,test_mse"]
        lines += [f"{e},{tr!r},{te!r}" for e, tr, te in self.entries]
        return "\n".join(lines) + "\n"

    def to_rows(self) -> list[list[float]]:
        return [[e, tr, te] for e, tr, te in self.entries]

    @classmethod
    def from_rows(cls, rows) -> "LossCurve":
        return cls(entries=[(int(e), float(tr), float(te)) for e, tr, te in rows])


class _Adam:
    def __init__(self, shapes: list[np.ndarray], lr: float):
        self.lr = lr
        self.beta1, self.beta2, self.eps = 0.9, 0.999, 1e-8
        self.m = [np.zeros_like(a) for a in shapes]
        self.v = [np.zeros_like(a) for a in shapes]
        self.t = 0

    def step(self, arrays: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for a, g, m, v in zip(arrays, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            a -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


class _Sgd:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, arrays: list[np.ndarray], grads: list[np.ndarray]) -> None:
        for a, g in zip(arrays, grads):
            a -= self.lr * g


def _dataset_arrays(pairs) -> tuple[np.ndarray, np.ndarray]:
    X = np.stack([np.asarray(x, dtype=np.float64) for x, _ in pairs])
    Y = np.stack([np.asarray(y, dtype=np.float64) for _, y in pairs])
    return X, Y


def dataset_mse(
    p: LstmParameters, head: RegressorHead, X: np.ndarray, Y: np.ndarray, chunk: int = 1024
) -> float:
    """Mean over examples of mse(target, prediction); evaluated in chunks."""
    total = 0.0
    for start in range(0, X.shape[0], chunk):
        xb = X[start : start + chunk]
        yb = Y[start : start + chunk]
        pred, _ = forward_batch(p, head, xb)
        total += float(np.sum((pred - yb) ** 2))
    return total / (X.shape[0] * Y.shape[1])


def train(
    train_pairs,
    test_pairs,
    cfg: TrainConfig,
    horizon: int | None = None,
    initial: tuple[LstmParameters, RegressorHead] | None = None,
) -> tuple[LstmParameters, RegressorHead, LossCurve]:
    """Mini-batch training with per-epoch train/test MSE tracking.

    Shuffles with the run seed each epoch and clips each batch gradient to
    cfg.grad_clip_norm (global L2). Each epoch records the train MSE over
    the visited minibatches and a full test-set MSE (see LossCurve).
    Deterministic for a fixed config and seed. Raises DivergenceError naming
    the epoch if the train loss leaves the finite range.
    """
    if not train_pairs or not test_pairs:
        raise ValidationError("train and test partitions must both be non-empty")
    Xtr, Ytr = _dataset_arrays(train_pairs)
    Xte, Yte = _dataset_arrays(test_pairs)
    if Xtr.shape[1:] != Xte.shape[1:] or Ytr.shape[1] != Yte.shape[1]:
        raise ValidationError("train and test shapes are inconsistent")
    d = Xtr.shape[2]
    K = horizon or Ytr.shape[1]
    if Ytr.shape[1] != K:
        raise ValidationError(f"targets have horizon {Ytr.shape[1]}, expected {K}")

    if initial is not None:
        params, head = initial[0].copy(), initial[1].copy()
        if params.input_dim != d or head.horizon != K:
            raise ValidationError("warm-start parameters do not match the dataset shapes")
    else:
        params, head = init_parameters(cfg.seed, d, cfg.hidden_dim, K)

    arrays = params.arrays() + head.arrays()
    if cfg.optimizer == "adam":
        opt = _Adam(arrays, cfg.learning_rate)
    else:
        opt = _Sgd(cfg.learning_rate)

    rng = np.random.default_rng(cfg.seed)
    curve = LossCurve()
    n = Xtr.shape[0]
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        sq_sum = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            xb, yb = Xtr[idx], Ytr[idx]
            pred, cache = forward_batch(params, head, xb)
            err = pred - yb
            sq_sum += float(np.sum(err * err))
            dY = (2.0 / K) * err
            grads = backward_batch(cache, dY)
            clip_gradients(grads, cfg.grad_clip_norm)
            opt.step(arrays, grads.arrays())
        train_mse = sq_sum / (n * K)
        test_mse = dataset_mse(params, head, Xte, Yte)
        if not np.isfinite(train_mse):
            raise DivergenceError(epoch)
        curve.append(epoch, train_mse, test_mse)
    return params, head, curve
