"""From-scratch temporal convolutional network on numpy.

The network refines channel estimates by convolving along the subcarrier
axis: inputs are (batch, channels, positions) tensors whose 100 channels
interleave real/imaginary parts of the 50 per-subcarrier symbols and
whose 52 positions are the active subcarriers treated as a sequence.

Building blocks: causal dilated 1-D convolutions (left zero-padding of
``(kernel_size - 1) * dilation`` so output position t sees only inputs
<= t), residual blocks of two conv+ReLU+dropout stages with an optional
1x1 projection when widths differ, and a 1x1 linear head. Gradients are
exact reverse-mode derivatives computed layer by layer; training is
mini-batch Adam with a step-decay learning rate and best-validation
weight selection.

Checkpoint format (little-endian): magic ``TCNCKPT``, u32 format version,
u32 block count, per block u32 (in, out, kernel, dilation, has_projection),
u32 head in/out, f32 dropout rate, then the float32 weight arrays
row-major in declaration order (per block: conv1 w, conv1 b, conv2 w,
conv2 b, projection w/b when present; finally head w, head b).
"""

import struct
from dataclasses import dataclass

import numpy as np

CHECKPOINT_MAGIC = b"TCNCKPT"
CHECKPOINT_VERSION = 1


class DivergenceError(RuntimeError):
    """Raised when the training loss stops being finite."""


def relu(x):
    """Elementwise ``max(0, x)``."""
    return np.maximum(x, 0.0)


def dropout(x, rate, training, rng):
    """Inverted dropout: zero each element with probability ``rate`` and
    scale survivors by ``1/(1-rate)``; identity outside training."""
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must be in [0, 1)")
    if not training or rate == 0.0:
        return x
    mask = rng.random(x.shape) >= rate
    return x * mask.astype(x.dtype) / (1.0 - rate)


class CausalConv1d:
    """Dilated 1-D convolution with causal left zero-padding.

    ``weight`` has shape (out_channels, in_channels, kernel_size); tap
    ``j`` reads the input delayed by ``(kernel_size - 1 - j) * dilation``
    positions, so the last tap reads the current position.
    """

    def __init__(self, in_channels, out_channels, kernel_size, dilation=1,
                 *, rng, dtype=np.float32):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.dilation = dilation
        scale = np.sqrt(2.0 / (in_channels * kernel_size))
        self.weight = rng.normal(0.0, scale, (out_channels, in_channels, kernel_size)).astype(dtype)
        self.bias = np.zeros(out_channels, dtype=dtype)
        self.grad_weight = np.zeros_like(self.weight)
        self.grad_bias = np.zeros_like(self.bias)
        self._cache = None

    @property
    def pad(self):
        return (self.kernel_size - 1) * self.dilation

    def forward(self, x, cache=False):
        n, c, t = x.shape
        if c != self.in_channels:
            raise ValueError(f"expected {self.in_channels} input channels, got {c}")
        xp = np.zeros((n, c, t + self.pad), dtype=x.dtype)
        xp[:, :, self.pad:] = x
        y = np.empty((n, self.out_channels, t), dtype=x.dtype)
        y[:] = self.bias[None, :, None]
        for j in range(self.kernel_size):
            sl = xp[:, :, j * self.dilation: j * self.dilation + t]
            y += np.matmul(self.weight[:, :, j], sl)
        self._cache = xp if cache else None
        return y

    def backward(self, dy):
        xp = self._cache
        if xp is None:
            raise RuntimeError("backward called without a cached forward pass")
        n, _, t = dy.shape
        dxp = np.zeros_like(xp)
        for j in range(self.kernel_size):
            sl = slice(j * self.dilation, j * self.dilation + t)
            self.grad_weight[:, :, j] += np.matmul(dy, xp[:, :, sl].transpose(0, 2, 1)).sum(axis=0)
            dxp[:, :, sl] += np.matmul(self.weight[:, :, j].T, dy)
        self.grad_bias += dy.sum(axis=(0, 2))
        return dxp[:, :, self.pad:]

    def zero_grads(self):
        self.grad_weight[:] = 0.0
        self.grad_bias[:] = 0.0


class ResidualBlock:
    """Two causal conv + ReLU + dropout stages with a skip connection:
    ``out = relu(skip(x) + F(x))``, where skip is identity for matching
    widths and a learned 1x1 projection otherwise."""

    def __init__(self, in_channels, out_channels, kernel_size, dilation,
                 dropout_rate, *, rng, dtype=np.float32):
        self.conv1 = CausalConv1d(in_channels, out_channels, kernel_size, dilation,
                                  rng=rng, dtype=dtype)
        self.conv2 = CausalConv1d(out_channels, out_channels, kernel_size, dilation,
                                  rng=rng, dtype=dtype)
        self.projection = None
        if in_channels != out_channels:
            self.projection = CausalConv1d(in_channels, out_channels, 1, 1,
                                           rng=rng, dtype=dtype)
        self.dropout_rate = dropout_rate
        self._cache = None

    def forward(self, x, training=False, rng=None, cache=False):
        dtype = x.dtype
        keep = 1.0 - self.dropout_rate
        use_dropout = training and self.dropout_rate > 0.0
        if use_dropout and rng is None:
            raise ValueError("training-mode forward with dropout needs an rng")

        z1 = self.conv1.forward(x, cache=cache)
        a1 = relu(z1)
        if use_dropout:
            m1 = (rng.random(a1.shape) >= self.dropout_rate).astype(dtype) / keep
            q1 = a1 * m1
        else:
            m1 = None
            q1 = a1
        z2 = self.conv2.forward(q1, cache=cache)
        a2 = relu(z2)
        if use_dropout:
            m2 = (rng.random(a2.shape) >= self.dropout_rate).astype(dtype) / keep
            q2 = a2 * m2
        else:
            m2 = None
            q2 = a2
        skip = x if self.projection is None else self.projection.forward(x, cache=cache)
        s = skip + q2
        out = relu(s)
        self._cache = (z1 > 0, m1, z2 > 0, m2, s > 0) if cache else None
        return out

    def backward(self, dout):
        if self._cache is None:
            raise RuntimeError("backward called without a cached forward pass")
        g1, m1, g2, m2, gs = self._cache
        ds = dout * gs
        dq2 = ds if m2 is None else ds * m2
        dz2 = dq2 * g2
        dq1 = self.conv2.backward(dz2)
        da1 = dq1 if m1 is None else dq1 * m1
        dz1 = da1 * g1
        dx = self.conv1.backward(dz1)
        if self.projection is None:
            dx = dx + ds
        else:
            dx = dx + self.projection.backward(ds)
        return dx

    def convs(self):
        layers = [self.conv1, self.conv2]
        if self.projection is not None:
            layers.append(self.projection)
        return layers


class TcnModel:
    """Residual TCN stack plus a 1x1 linear head.

    Defaults follow the tuned configuration used throughout the package:
    100 input channels, two 100-wide residual blocks with kernel size 2
    and block dilations (1, 2), a 100-channel head, dropout 0.01.
    """

    def __init__(self, input_channels=100, hidden_channels=(100, 100),
                 output_channels=100, kernel_size=2, dilations=(1, 2),
                 dropout_rate=0.01, *, rng=None, dtype=np.float32):
        if len(hidden_channels) != len(dilations):
            raise ValueError("one dilation per residual block required")
        if not 0.0 <= dropout_rate < 1.0:
            raise ValueError("dropout rate must be in [0, 1)")
        if rng is None:
            rng = np.random.default_rng(0)
        self.input_channels = input_channels
        self.output_channels = output_channels
        self.dropout_rate = dropout_rate
        self.dtype = np.dtype(dtype)
        self.blocks = []
        width = input_channels
        for ch, dil in zip(hidden_channels, dilations):
            self.blocks.append(ResidualBlock(width, ch, kernel_size, dil,
                                             dropout_rate, rng=rng, dtype=dtype))
            width = ch
        self.head = CausalConv1d(width, output_channels, 1, 1, rng=rng, dtype=dtype)

    def forward(self, batch, training=False, rng=None, cache=False):
        """Run the stack on a (batch, channels, positions) tensor.

        Inference mode (``training=False``, no caching) is pure: no
        internal state is touched, so concurrent calls may share weights.
        """
        x = np.asarray(batch, dtype=self.dtype)
        if x.ndim != 3 or x.shape[1] != self.input_channels:
            raise ValueError(f"batch must be (n, {self.input_channels}, length)")
        for block in self.blocks:
            x = block.forward(x, training=training, rng=rng, cache=cache)
        return self.head.forward(x, cache=cache)

    def backward(self, dout):
        dx = self.head.backward(dout)
        for block in reversed(self.blocks):
            dx = block.backward(dx)
        return dx

    def loss_and_gradients(self, batch, targets, positions=None,
                           training=False, rng=None):
        """Masked-MSE loss plus exact gradients for every parameter.

        ``positions`` selects the sequence positions the loss covers
        (``None`` means all of them). Gradients accumulate into the
        layers' ``grad_*`` buffers; call :meth:`zero_grads` between
        steps. Returns ``(loss, output)``.
        """
        out = self.forward(batch, training=training, rng=rng, cache=True)
        loss, dout = mse_loss_grad(out, targets, positions)
        self.backward(dout)
        return loss, out

    def parameters(self):
        """Ordered (name, param, grad) triples; arrays are live views."""
        triples = []
        for i, block in enumerate(self.blocks):
            named = [("conv1", block.conv1), ("conv2", block.conv2)]
            if block.projection is not None:
                named.append(("projection", block.projection))
            for tag, conv in named:
                triples.append((f"block{i}.{tag}.weight", conv.weight, conv.grad_weight))
                triples.append((f"block{i}.{tag}.bias", conv.bias, conv.grad_bias))
        triples.append(("head.weight", self.head.weight, self.head.grad_weight))
        triples.append(("head.bias", self.head.bias, self.head.grad_bias))
        return triples

    def zero_grads(self):
        for block in self.blocks:
            for conv in block.convs():
                conv.zero_grads()
        self.head.zero_grads()

    def get_weights(self):
        return [param.copy() for _, param, _ in self.parameters()]

    def set_weights(self, weights):
        params = self.parameters()
        if len(weights) != len(params):
            raise ValueError("weight list does not match model structure")
        for (_, param, _), w in zip(params, weights):
            if param.shape != w.shape:
                raise ValueError("weight shapes do not match model structure")
            param[:] = w.astype(param.dtype)

    def receptive_field(self):
        """Positions of input influencing one output: 1 + sum (K-1)*d."""
        span = 1
        for block in self.blocks:
            for conv in (block.conv1, block.conv2):
                span += (conv.kernel_size - 1) * conv.dilation
        return span


def mse_loss(out, targets, positions=None):
    sel = out if positions is None else out[:, :, positions]
    diff = sel.astype(np.float64) - np.asarray(targets, dtype=np.float64)
    return float(np.mean(diff * diff))


def mse_loss_grad(out, targets, positions=None):
    """Mean squared error over the selected positions and its gradient
    with respect to the full output tensor."""
    if positions is None:
        diff = out - np.asarray(targets, dtype=out.dtype)
        loss = float(np.mean(diff.astype(np.float64) ** 2))
        return loss, (2.0 / diff.size) * diff
    sel = out[:, :, positions]
    diff = sel - np.asarray(targets, dtype=out.dtype)
    loss = float(np.mean(diff.astype(np.float64) ** 2))
    dout = np.zeros_like(out)
    dout[:, :, positions] = (2.0 / diff.size) * diff
    return loss, dout


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters (tuned defaults)."""

    learning_rate: float = 0.003
    epochs: int = 100
    step_size: int = 17
    gamma: float = 0.8
    batch_size: int = 128
    dropout: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning rate must be >= 0")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        if self.epochs < 1 or self.batch_size < 1 or self.step_size < 1:
            raise ValueError("epochs, batch_size and step_size must be >= 1")


def step_lr(cfg: TrainConfig, epoch_index: int) -> float:
    """Step-decay schedule: ``lr * gamma ** (epoch_index // step_size)``
    with a 0-based epoch index."""
    return cfg.learning_rate * cfg.gamma ** (epoch_index // cfg.step_size)


class Adam:
    """Adaptive moment estimation over a model's parameter triples."""

    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for _, p, _ in params]
        self.v = [np.zeros_like(p) for _, p, _ in params]

    def step(self, lr):
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for (_, param, grad), m, v in zip(self.params, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            param -= lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    lr: float
    train_loss: float
    val_loss: float


def train(model: TcnModel, train_x, train_y, val_x, val_y,
          cfg: TrainConfig = TrainConfig(), positions=None, log=None):
    """Mini-batch Adam training with step-decay learning rate.

    ``train_x``/``val_x`` are (n, channels, positions) tensors and the
    targets cover the loss ``positions`` (all positions when ``None``).
    The model ends up holding the weights with the lowest validation
    loss seen. Returns the per-epoch history.

    Raises
    ------
    ValueError
        On empty datasets.
    DivergenceError
        When a batch loss stops being finite.
    """
    train_x = np.asarray(train_x, dtype=model.dtype)
    train_y = np.asarray(train_y, dtype=model.dtype)
    val_x = np.asarray(val_x, dtype=model.dtype)
    val_y = np.asarray(val_y, dtype=model.dtype)
    if train_x.shape[0] == 0 or val_x.shape[0] == 0:
        raise ValueError("training and validation sets must be nonempty")
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(model.parameters())
    history = []
    best_loss = np.inf
    best_weights = model.get_weights()
    n = train_x.shape[0]
    for epoch in range(cfg.epochs):
        lr = step_lr(cfg, epoch)
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            model.zero_grads()
            loss, _ = model.loss_and_gradients(train_x[idx], train_y[idx], positions,
                                               training=True, rng=rng)
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite training loss at epoch {epoch + 1}")
            opt.step(lr)
            total += loss * idx.size
        train_loss = total / n
        val_out = model.forward(val_x, training=False)
        val_loss = mse_loss(val_out, val_y, positions)
        if not np.isfinite(val_loss):
            raise DivergenceError(f"non-finite validation loss at epoch {epoch + 1}")
        stats = EpochStats(epoch + 1, lr, train_loss, val_loss)
        history.append(stats)
        if log is not None:
            log(stats)
        if val_loss < best_loss:
            best_loss = val_loss
            best_weights = model.get_weights()
    model.set_weights(best_weights)
    return history


def save_checkpoint(model: TcnModel, path):
    """Write the binary checkpoint (see module docstring for the layout)."""
    chunks = [CHECKPOINT_MAGIC, struct.pack("<II", CHECKPOINT_VERSION, len(model.blocks))]
    for block in model.blocks:
        chunks.append(struct.pack(
            "<5I", block.conv1.in_channels, block.conv1.out_channels,
            block.conv1.kernel_size, block.conv1.dilation,
            0 if block.projection is None else 1))
    chunks.append(struct.pack("<II", model.head.in_channels, model.head.out_channels))
    chunks.append(struct.pack("<f", model.dropout_rate))
    for _, param, _ in model.parameters():
        chunks.append(np.ascontiguousarray(param, dtype="<f4").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


def load_checkpoint(path, dtype=np.float32) -> TcnModel:
    """Rebuild a model from a checkpoint written by :func:`save_checkpoint`."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:7] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a TCN checkpoint")
    off = 7
    version, num_blocks = struct.unpack_from("<II", blob, off)
    off += 8
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    dims = []
    for _ in range(num_blocks):
        dims.append(struct.unpack_from("<5I", blob, off))
        off += 20
    head_in, head_out = struct.unpack_from("<II", blob, off)
    off += 8
    (dropout_rate,) = struct.unpack_from("<f", blob, off)
    off += 4
    if not dims:
        raise ValueError(f"{path}: checkpoint has no residual blocks")
    model = TcnModel(
        input_channels=dims[0][0],
        hidden_channels=tuple(d[1] for d in dims),
        output_channels=head_out,
        kernel_size=dims[0][2],
        dilations=tuple(d[3] for d in dims),
        dropout_rate=float(dropout_rate),
        rng=np.random.default_rng(0),
        dtype=dtype,
    )
    for (in_ch, out_ch, kernel, dilation, has_proj), block in zip(dims, model.blocks):
        ok = (block.conv1.in_channels == in_ch and block.conv1.out_channels == out_ch
              and block.conv1.kernel_size == kernel and block.conv1.dilation == dilation
              and (block.projection is not None) == bool(has_proj))
        if not ok:
            raise ValueError(f"{path}: inconsistent block dimensions")
    if model.head.in_channels != head_in:
        raise ValueError(f"{path}: inconsistent head dimensions")
    weights = []
    for _, param, _ in model.parameters():
        count = param.size
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=off).reshape(param.shape)
        weights.append(arr)
        off += count * 4
    if off != len(blob):
        raise ValueError(f"{path}: trailing bytes in checkpoint")
    model.set_weights(weights)
    return model
