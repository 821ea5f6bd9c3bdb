"""Small feed-forward network with manual backprop and per-layer roles.

Layers carry a training role: "frozen" layers are never updated,
"finetune" layers are updated by the task loss, and "adapt" layers are
where a domain-discrepancy penalty on activations may be injected during
backprop (`extra_activation_grads`). Parameters are plain float64 numpy
arrays; networks are treated as immutable values between SGD steps.

Data layout: batches are (batch, width) float64. Conv layers internally
view their input as (batch, channels, length) and flatten back when a
dense layer follows.
"""
import io
import json
import struct
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidArgumentError, InvalidSpecError

ROLES = ("frozen", "finetune", "adapt")
DEFAULT_ROLE_MULTIPLIERS = {"frozen": 0.0, "finetune": 1.0, "adapt": 10.0}

_CKPT_MAGIC = b"ADFNET01"


@dataclass(frozen=True)
class Dense:
    n_in: int
    n_out: int
    role: str = "finetune"


@dataclass(frozen=True)
class Conv1d:
    c_in: int
    c_out: int
    width: int
    stride: int = 1
    role: str = "finetune"


@dataclass(frozen=True)
class Relu:
    pass


@dataclass(frozen=True)
class Softmax:
    pass


def _is_parametric(spec):
    return isinstance(spec, (Dense, Conv1d))


def _spec_to_dict(spec):
    d = {"kind": type(spec).__name__.lower()}
    if _is_parametric(spec):
        d.update({k: getattr(spec, k) for k in spec.__dataclass_fields__})
    return d


def _spec_from_dict(d):
    kind = d["kind"]
    if kind == "dense":
        return Dense(d["n_in"], d["n_out"], d["role"])
    if kind == "conv1d":
        return Conv1d(d["c_in"], d["c_out"], d["width"], d["stride"], d["role"])
    if kind == "relu":
        return Relu()
    if kind == "softmax":
        return Softmax()
    raise InvalidSpecError(f"unknown layer kind {kind!r}")


def _validate(specs, input_dim):
    """Check shape composition; returns the (flat) output dim."""
    if not specs:
        raise InvalidSpecError("empty layer list")
    shape = ("flat", int(input_dim))
    for i, spec in enumerate(specs):
        last = i == len(specs) - 1
        if isinstance(spec, Softmax) and not last:
            raise InvalidSpecError("softmax allowed only as the final layer")
        if _is_parametric(spec) and spec.role not in ROLES:
            raise InvalidSpecError(f"layer {i}: unknown role {spec.role!r}")
        if isinstance(spec, Dense):
            flat = shape[1] if shape[0] == "flat" else shape[1] * shape[2]
            if flat != spec.n_in:
                raise InvalidSpecError(
                    f"layer {i}: dense expects {spec.n_in} inputs, got {flat}"
                )
            shape = ("flat", spec.n_out)
        elif isinstance(spec, Conv1d):
            if shape[0] == "flat":
                if spec.c_in != 1:
                    raise InvalidSpecError(
                        f"layer {i}: conv on flat input requires c_in=1"
                    )
                shape = ("conv", 1, shape[1])
            if shape[1] != spec.c_in:
                raise InvalidSpecError(
                    f"layer {i}: conv expects {spec.c_in} channels, got {shape[1]}"
                )
            if shape[2] < spec.width:
                raise InvalidSpecError(f"layer {i}: input shorter than kernel width")
            l_out = (shape[2] - spec.width) // spec.stride + 1
            shape = ("conv", spec.c_out, l_out)
    # adapt layers must be a contiguous suffix of the parametric layers
    roles = [s.role for s in specs if _is_parametric(s)]
    adapt_idx = [i for i, r in enumerate(roles) if r == "adapt"]
    if adapt_idx and adapt_idx != list(range(adapt_idx[0], len(roles))):
        raise InvalidSpecError("adapt layers must form a contiguous suffix")
    return shape[1] if shape[0] == "flat" else shape[1] * shape[2]


@dataclass(frozen=True)
class Network:
    specs: tuple
    params: tuple  # per layer: (W, b) for parametric layers, None otherwise
    input_dim: int

    @property
    def output_dim(self):
        return _validate(self.specs, self.input_dim)

    def parametric_indices(self):
        return [i for i, s in enumerate(self.specs) if _is_parametric(s)]

    def adapt_indices(self):
        return [
            i for i, s in enumerate(self.specs)
            if _is_parametric(s) and s.role == "adapt"
        ]


def init_network(specs, input_dim, seed):
    """Fan-based uniform init: W ~ U(-a, a), a = sqrt(6/(fan_in+fan_out))."""
    specs = tuple(specs)
    _validate(specs, input_dim)
    rng = np.random.default_rng(seed)
    params = []
    for spec in specs:
        if isinstance(spec, Dense):
            a = np.sqrt(6.0 / (spec.n_in + spec.n_out))
            W = rng.uniform(-a, a, size=(spec.n_out, spec.n_in))
            params.append((W, np.zeros(spec.n_out)))
        elif isinstance(spec, Conv1d):
            fan_in = spec.c_in * spec.width
            fan_out = spec.c_out * spec.width
            a = np.sqrt(6.0 / (fan_in + fan_out))
            W = rng.uniform(-a, a, size=(spec.c_out, spec.c_in, spec.width))
            params.append((W, np.zeros(spec.c_out)))
        else:
            params.append(None)
    return Network(specs, tuple(params), int(input_dim))


@dataclass
class ActivationTrace:
    """Per-layer outputs of one forward pass (outputs[i] = layer i output)."""

    batch: np.ndarray
    outputs: list = field(default_factory=list)

    def layer_output(self, i):
        return self.outputs[i]


def _conv_windows(x, width, stride):
    # x: (batch, c_in, L) -> (batch, c_in, L_out, width)
    win = sliding_window_view(x, width, axis=2)
    return win[:, :, ::stride, :]


def forward(net, batch):
    """Forward pass returning the full per-layer activation trace."""
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != net.input_dim:
        raise InvalidArgumentError(
            f"batch must be (n, {net.input_dim}), got {batch.shape}"
        )
    trace = ActivationTrace(batch)
    x = batch
    for spec, p in zip(net.specs, net.params):
        if isinstance(spec, Dense):
            a = x.reshape(x.shape[0], -1)
            W, b = p
            x = a @ W.T + b
        elif isinstance(spec, Conv1d):
            if x.ndim == 2:
                x = x[:, None, :]
            W, b = p
            win = _conv_windows(x, spec.width, spec.stride)
            x = np.einsum("bclw,ocw->bol", win, W) + b[None, :, None]
        elif isinstance(spec, Relu):
            x = np.maximum(x, 0.0)
        elif isinstance(spec, Softmax):
            a = x.reshape(x.shape[0], -1)
            z = a - a.max(axis=1, keepdims=True)
            e = np.exp(z)
            x = e / e.sum(axis=1, keepdims=True)
        trace.outputs.append(x)
    return trace


def cross_entropy(probs, labels):
    """Mean negative log-probability of the true labels.

    Probabilities are clamped below at 1e-12 before the log so degenerate
    softmax rows give a large but finite loss.
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    k = probs.shape[1]
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= k:
        raise InvalidArgumentError(f"labels must lie in [0, {k})")
    p = probs[np.arange(len(labels)), labels]
    return float(np.mean(-np.log(np.maximum(p, 1e-12))))


def cross_entropy_grad(probs, labels):
    """Gradient of cross_entropy w.r.t. the probability rows."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    g = np.zeros_like(probs)
    n = len(labels)
    p = probs[np.arange(n), labels]
    live = p > 1e-12  # below the clamp the loss is constant in p
    g[np.arange(n)[live], labels[live]] = -1.0 / (n * p[live])
    return g


def backward(net, trace, loss_grad_at_output, extra_activation_grads=None):
    """Backprop; returns {layer_index: (dW, db)} for every parametric layer.

    extra_activation_grads maps a layer index to a gradient w.r.t. that
    layer's output, added to whatever flows back from above (this is how a
    domain-discrepancy penalty on adapt-layer activations enters training).
    Gradients are returned for frozen layers too; the caller masks them.
    """
    extra = extra_activation_grads or {}
    n_layers = len(net.specs)
    g = np.asarray(loss_grad_at_output, dtype=np.float64)
    if g.shape != trace.outputs[-1].shape:
        raise InvalidArgumentError("output gradient shape mismatch")
    grads = {}
    for i in range(n_layers - 1, -1, -1):
        spec = net.specs[i]
        out = trace.outputs[i]
        inp = trace.outputs[i - 1] if i > 0 else trace.batch
        if i in extra:
            e = np.asarray(extra[i], dtype=np.float64)
            g = g.reshape(e.shape) + e
        if isinstance(spec, Dense):
            a = inp.reshape(inp.shape[0], -1)
            g = g.reshape(out.shape)
            W, _ = net.params[i]
            grads[i] = (g.T @ a, g.sum(axis=0))
            g = (g @ W).reshape(inp.shape)
        elif isinstance(spec, Conv1d):
            x = inp[:, None, :] if inp.ndim == 2 else inp
            g = g.reshape(out.shape)
            W, _ = net.params[i]
            win = _conv_windows(x, spec.width, spec.stride)
            dW = np.einsum("bol,bclw->ocw", g, win)
            db = g.sum(axis=(0, 2))
            grads[i] = (dW, db)
            gi = np.zeros_like(x)
            l_out = out.shape[2]
            for w in range(spec.width):
                gi[:, :, w : w + spec.stride * l_out : spec.stride] += np.einsum(
                    "bol,oc->bcl", g, W[:, :, w]
                )
            g = gi.reshape(inp.shape)
        elif isinstance(spec, Relu):
            g = g.reshape(out.shape) * (out > 0.0)
            g = g.reshape(inp.shape)
        elif isinstance(spec, Softmax):
            gp = g.reshape(out.shape)
            g = out * (gp - np.sum(gp * out, axis=1, keepdims=True))
            g = g.reshape(inp.shape)
    return grads


def sgd_step(net, grads, base_lr, role_multipliers=None):
    """One SGD update with per-role learning-rate multipliers.

    Frozen layers (multiplier 0) keep their parameter arrays untouched, so
    they stay bitwise identical across any number of steps.
    """
    if base_lr < 0:
        raise InvalidArgumentError("learning rate must be >= 0")
    mult = dict(DEFAULT_ROLE_MULTIPLIERS)
    if role_multipliers:
        mult.update(role_multipliers)
    new_params = list(net.params)
    for i in net.parametric_indices():
        lr = base_lr * mult[net.specs[i].role]
        if lr == 0.0 or i not in grads:
            continue
        W, b = net.params[i]
        dW, db = grads[i]
        if dW.shape != W.shape or db.shape != b.shape:
            raise InvalidArgumentError(f"gradient shape mismatch at layer {i}")
        new_params[i] = (W - lr * dW, b - lr * db)
    out = replace(net, params=tuple(new_params))
    for i in out.parametric_indices():
        W, b = out.params[i]
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
            raise InvalidArgumentError(f"non-finite parameters at layer {i}")
    return out


def save_checkpoint(net, path):
    """Versioned binary checkpoint; round-trips parameters bit-for-bit."""
    header = {
        "format_version": 1,
        "input_dim": net.input_dim,
        "layers": [_spec_to_dict(s) for s in net.specs],
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_CKPT_MAGIC)
        f.write(struct.pack("<I", len(hbytes)))
        f.write(hbytes)
        for i in net.parametric_indices():
            W, b = net.params[i]
            f.write(np.ascontiguousarray(W, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_checkpoint(path):
    with open(path, "rb") as f:
        data = f.read()
    buf = io.BytesIO(data)
    if buf.read(8) != _CKPT_MAGIC:
        raise InvalidArgumentError(f"{path}: not a network checkpoint")
    (hlen,) = struct.unpack("<I", buf.read(4))
    header = json.loads(buf.read(hlen).decode("utf-8"))
    if header.get("format_version") != 1:
        raise InvalidArgumentError(f"{path}: unsupported checkpoint version")
    specs = tuple(_spec_from_dict(d) for d in header["layers"])
    net = init_network(specs, header["input_dim"], seed=0)
    params = list(net.params)
    for i in net.parametric_indices():
        W, b = params[i]
        W = np.frombuffer(buf.read(W.size * 8), dtype="<f8").reshape(W.shape).copy()
        b = np.frombuffer(buf.read(b.size * 8), dtype="<f8").copy()
        params[i] = (W, b)
    if buf.read(1):
        raise InvalidArgumentError(f"{path}: trailing bytes in checkpoint")
    return replace(net, params=tuple(params))


def default_policy_specs(n_classes=9, conv_role="finetune"):
    """The stock scan-to-velocity-bin architecture used across experiments."""
    return (
        Conv1d(1, 8, 5, 2, role=conv_role),
        Relu(),
        Conv1d(8, 8, 5, 2, role=conv_role),
        Relu(),
        Dense(-1, 64, role="adapt"),  # n_in resolved by make_policy_net
        Relu(),
        Dense(64, 32, role="adapt"),
        Relu(),
        Dense(32, n_classes, role="adapt"),
        Softmax(),
    )


def make_policy_net(input_dim, n_classes=9, seed=0, conv_role="finetune"):
    """Instantiate the stock architecture for a given scan width."""
    l1 = (input_dim - 5) // 2 + 1
    l2 = (l1 - 5) // 2 + 1
    specs = list(default_policy_specs(n_classes, conv_role))
    specs[4] = Dense(8 * l2, 64, role="adapt")
    return init_network(tuple(specs), input_dim, seed)
