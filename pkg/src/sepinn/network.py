"""Tanh multilayer perceptrons with an exact derivative engine.

The engine propagates, per input direction, the triple (value, first
derivative, diagonal second derivative) through the layer recursion, using
tanh' = 1 - tanh^2 and tanh'' = -2 tanh tanh'.  The channels are carried as
one (batch, channel, width) array so each layer is a single GEMM; the
spatial gradient and Laplacian are therefore exact to machine precision,
not finite-difference approximations.

Parameter gradients are reverse accumulations through the recorded forward:
a loss supplies cotangents for (value, gradient, Laplacian) per batch and
gets back the exact flat-parameter gradient.  All arithmetic is float64.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

CHECKPOINT_MAGIC = b"SEPN"
CHECKPOINT_VERSION = 1
ACTIVATION_TANH = 0


class EngineError(RuntimeError):
    """Non-finite value met during evaluation; carries the sample index."""


@dataclass(frozen=True)
class MlpArch:
    """Layer widths n_0..n_L of a fully connected tanh network (n_L = 1)."""

    widths: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if len(self.widths) < 3:
            raise ValueError("need at least one hidden layer")
        if any(w < 1 for w in self.widths):
            raise ValueError("all layer widths must be >= 1")
        if self.widths[-1] != 1:
            raise ValueError("output width must be 1")

    @property
    def n_inputs(self) -> int:
        return self.widths[0]

    @property
    def n_params(self) -> int:
        return sum(o * (i + 1) for i, o in zip(self.widths[:-1], self.widths[1:]))

    def layer_slices(self) -> list[tuple[slice, slice]]:
        """(weight slice, bias slice) into the flat vector, layer by layer."""
        out = []
        pos = 0
        for n_in, n_out in zip(self.widths[:-1], self.widths[1:]):
            w = slice(pos, pos + n_out * n_in)
            b = slice(w.stop, w.stop + n_out)
            out.append((w, b))
            pos = b.stop
        return out


class MlpParams:
    """Network parameters backed by one flat float64 array.

    Per-layer weight matrices (n_out, n_in) and bias vectors are reshaped
    views into the flat array, in the fixed order W_1 (row-major), b_1,
    W_2, b_2, ...; writing through either view is seen by the other.
    """

    def __init__(self, arch: MlpArch, flat: Optional[np.ndarray] = None):
        self.arch = arch
        if flat is None:
            flat = np.zeros(arch.n_params)
        else:
            flat = np.asarray(flat, dtype=float)
            if flat.shape != (arch.n_params,):
                raise ValueError(
                    f"flat view must have length {arch.n_params}, got {flat.shape}"
                )
        self.flat = flat
        self.weights = []
        self.biases = []
        for (ws, bs), (n_in, n_out) in zip(
            arch.layer_slices(), zip(arch.widths[:-1], arch.widths[1:])
        ):
            self.weights.append(self.flat[ws].reshape(n_out, n_in))
            self.biases.append(self.flat[bs])

    def copy(self) -> "MlpParams":
        return MlpParams(self.arch, self.flat.copy())

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.flat))) if len(self.flat) else 0.0


def init_params(arch: MlpArch, seed: int) -> MlpParams:
    """Xavier-uniform weights (bound sqrt(6/(n_in+n_out))), zero biases."""
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    params = MlpParams(arch)
    for w in params.weights:
        n_out, n_in = w.shape
        bound = np.sqrt(6.0 / (n_in + n_out))
        w[...] = rng.uniform(-bound, bound, size=w.shape)
    return params


@dataclass(frozen=True)
class EvalResult:
    """Network value, spatial gradient, and spatial Laplacian on a batch."""

    value: np.ndarray                 # (B,)
    gradient: Optional[np.ndarray]    # (B, d) or None when order < 1
    laplacian: Optional[np.ndarray]   # (B,) or None when order < 2


@dataclass
class Cotangents:
    """Adjoints of an EvalResult; any entry may be left None (treated as 0)."""

    value: Optional[np.ndarray] = None
    gradient: Optional[np.ndarray] = None
    laplacian: Optional[np.ndarray] = None


class TapedForward:
    """One recorded forward pass; backward() yields the flat parameter gradient.

    Channel layout along axis 1: 0 = value, 1..d = first derivatives,
    d+1..2d = diagonal second derivatives (present only for order 2).
    """

    def __init__(self, params: MlpParams, x: np.ndarray, order: int = 2):
        if order not in (0, 1, 2):
            raise ValueError(f"order must be 0, 1 or 2, got {order}")
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        d = params.arch.n_inputs
        if x.shape[1] != d:
            raise ValueError(f"expected {d}-dimensional points, got shape {x.shape}")
        self.params = params
        self.order = order
        self.d = d
        n = len(x)
        n_ch = 1 + (d if order >= 1 else 0) + (d if order == 2 else 0)
        u = np.zeros((n, n_ch, d))
        u[:, 0, :] = x
        if order >= 1:
            u[:, 1 : 1 + d, :] = np.eye(d)
        self._inputs = []   # U fed to each layer
        self._z = []        # pre-activations of hidden layers (all channels)
        self._t = []        # tanh(Z_0) of hidden layers
        n_layers = len(params.weights)
        for k, (w, b) in enumerate(zip(params.weights, params.biases)):
            self._inputs.append(u)
            z = _layer_gemm(u, w)
            z[:, 0, :] += b
            if k == n_layers - 1:
                u = z
            else:
                self._z.append(z)
                t = np.tanh(z[:, 0, :])
                self._t.append(t)
                u = self._activate(z, t)
        self._out = u

    def _activate(self, z: np.ndarray, t: np.ndarray) -> np.ndarray:
        d, order = self.d, self.order
        h = np.empty_like(z)
        h[:, 0, :] = t
        if order >= 1:
            t1 = 1.0 - t * t
            h[:, 1 : 1 + d, :] = t1[:, None, :] * z[:, 1 : 1 + d, :]
        if order == 2:
            t2 = -2.0 * t * t1
            zg = z[:, 1 : 1 + d, :]
            h[:, 1 + d :, :] = t2[:, None, :] * zg * zg + t1[:, None, :] * z[:, 1 + d :, :]
        return h

    def result(self) -> EvalResult:
        out = self._out
        d = self.d
        value = out[:, 0, 0]
        gradient = out[:, 1 : 1 + d, 0] if self.order >= 1 else None
        laplacian = out[:, 1 + d :, 0].sum(axis=1) if self.order == 2 else None
        return EvalResult(value, gradient, laplacian)

    def backward(self, cot: Cotangents) -> np.ndarray:
        """Accumulate d(loss)/d(theta) for loss cotangents of this batch."""
        d, order = self.d, self.order
        n, n_ch = self._out.shape[0], self._out.shape[1]
        hbar = np.zeros((n, n_ch, 1))
        if cot.value is not None:
            hbar[:, 0, 0] = cot.value
        if cot.gradient is not None:
            if order < 1:
                raise ValueError("gradient cotangent for a value-only forward")
            hbar[:, 1 : 1 + d, 0] = cot.gradient
        if cot.laplacian is not None:
            if order < 2:
                raise ValueError("Laplacian cotangent for a first-order forward")
            hbar[:, 1 + d :, 0] = cot.laplacian[:, None]
        grad = np.zeros(self.params.arch.n_params)
        slices = self.params.arch.layer_slices()
        n_layers = len(self.params.weights)
        for k in range(n_layers - 1, -1, -1):
            if k == n_layers - 1:
                zbar = hbar
            else:
                zbar = self._activate_backward(k, hbar)
            w = self.params.weights[k]
            ws, bs = slices[k]
            u_in = self._inputs[k]
            grad[ws] += _gemm_weight_grad(zbar, u_in).ravel()
            grad[bs] += zbar[:, 0, :].sum(axis=0)
            hbar = _layer_gemm_t(zbar, w)
        return grad

    def _activate_backward(self, k: int, hbar: np.ndarray) -> np.ndarray:
        d, order = self.d, self.order
        z, t = self._z[k], self._t[k]
        t1 = 1.0 - t * t
        zbar = np.empty_like(hbar)
        zbar[:, 0, :] = hbar[:, 0, :] * t1
        if order >= 1:
            t2 = -2.0 * t * t1
            zg = z[:, 1 : 1 + d, :]
            gb = hbar[:, 1 : 1 + d, :]
            zbar[:, 0, :] += (gb * t2[:, None, :] * zg).sum(axis=1)
            zbar[:, 1 : 1 + d, :] = gb * t1[:, None, :]
        if order == 2:
            t3 = t1 * (6.0 * t * t - 2.0)
            zs = z[:, 1 + d :, :]
            sb = hbar[:, 1 + d :, :]
            zbar[:, 0, :] += (sb * (t3[:, None, :] * zg * zg + t2[:, None, :] * zs)).sum(axis=1)
            zbar[:, 1 : 1 + d, :] += sb * 2.0 * t2[:, None, :] * zg
            zbar[:, 1 + d :, :] = sb * t1[:, None, :]
        return zbar


def _layer_gemm(u: np.ndarray, w: np.ndarray) -> np.ndarray:
    n, c, n_in = u.shape
    return (u.reshape(n * c, n_in) @ w.T).reshape(n, c, w.shape[0])


def _layer_gemm_t(zbar: np.ndarray, w: np.ndarray) -> np.ndarray:
    n, c, n_out = zbar.shape
    return (zbar.reshape(n * c, n_out) @ w).reshape(n, c, w.shape[1])


def _gemm_weight_grad(zbar: np.ndarray, u_in: np.ndarray) -> np.ndarray:
    n, c, n_out = zbar.shape
    n_in = u_in.shape[2]
    return zbar.reshape(n * c, n_out).T @ u_in.reshape(n * c, n_in)


def forward_with_derivatives(params: MlpParams, x, order: int = 2) -> EvalResult:
    """Value, spatial gradient, and Laplacian at x (a point or a batch)."""
    return TapedForward(params, x, order).result()


# -- objective protocol and the generic gradient driver ----------------------


@dataclass(frozen=True)
class Batch:
    """One network evaluation a loss needs: which net, where, to what order."""

    net: int
    points: np.ndarray
    order: int = 2


class ParamLayout:
    """Fixed packing of several networks plus trailing scalars into one vector."""

    def __init__(self, archs: Sequence[MlpArch], n_extras: int = 0):
        self.archs = list(archs)
        self.n_extras = int(n_extras)
        self.offsets = []
        pos = 0
        for arch in self.archs:
            self.offsets.append(pos)
            pos += arch.n_params
        self.extras_offset = pos
        self.size = pos + self.n_extras

    def split(self, vec: np.ndarray) -> tuple[list[MlpParams], np.ndarray]:
        """Views into vec: per-net MlpParams plus the extras tail."""
        vec = np.asarray(vec)
        if vec.shape != (self.size,):
            raise ValueError(f"state vector must have length {self.size}, got {vec.shape}")
        nets = [
            MlpParams(arch, vec[off : off + arch.n_params])
            for arch, off in zip(self.archs, self.offsets)
        ]
        return nets, vec[self.extras_offset :]

    def join(self, nets: Sequence[MlpParams], extras=()) -> np.ndarray:
        extras = np.atleast_1d(np.asarray(extras, dtype=float)) if self.n_extras else np.zeros(0)
        if len(nets) != len(self.archs) or extras.shape != (self.n_extras,):
            raise ValueError("layout mismatch")
        return np.concatenate([p.flat for p in nets] + [extras])


def _check_finite(result: EvalResult, batch_index: int):
    for name, arr in (("value", result.value), ("gradient", result.gradient),
                      ("laplacian", result.laplacian)):
        if arr is None:
            continue
        bad = ~np.isfinite(arr)
        if bad.any():
            sample = int(np.argwhere(bad)[0][0])
            raise EngineError(
                f"non-finite network {name} at sample {sample} of batch {batch_index}"
            )


def loss_gradient(loss, params, extras=()) -> tuple[float, np.ndarray]:
    """Loss value and its exact flat gradient over all parameters and extras.

    loss exposes `batches` (the network evaluations it needs) and
    `value_and_cotangents(results, extras) -> (value, cotangents, extras_bar)`
    where cotangents[i] adjoins results[i].  The returned gradient is the
    concatenation of every network's flat gradient (in params order)
    followed by the extras gradient.
    """
    if isinstance(params, MlpParams):
        params = [params]
    extras = np.atleast_1d(np.asarray(extras, dtype=float)) if len(np.atleast_1d(extras)) else np.zeros(0)
    tapes = []
    results = []
    for k, batch in enumerate(loss.batches):
        tape = TapedForward(params[batch.net], batch.points, batch.order)
        result = tape.result()
        _check_finite(result, k)
        tapes.append(tape)
        results.append(result)
    value, cotangents, extras_bar = loss.value_and_cotangents(results, extras)
    if not np.isfinite(value):
        raise EngineError("non-finite loss value")
    grads = [np.zeros(p.arch.n_params) for p in params]
    for tape, cot, batch in zip(tapes, cotangents, loss.batches):
        if cot is not None:
            grads[batch.net] += tape.backward(cot)
    tail = np.asarray(extras_bar, dtype=float).reshape(-1) if extras.size else np.zeros(0)
    return float(value), np.concatenate(grads + [tail])


# -- checkpoint io ------------------------------------------------------------


def save_checkpoint(path, params, extras=(), seed: int = 0):
    """Little-endian binary snapshot of one or more networks plus a flat
    extras vector (singular coefficients and the like).

    Layout: magic, version, seed, activation tag, network count, then one
    widths block per network, the extras length, the flat parameter vectors
    in order, and finally the extras.
    """
    nets = [params] if isinstance(params, MlpParams) else list(params)
    extras = np.asarray(extras, dtype=float).ravel()
    header = CHECKPOINT_MAGIC + struct.pack(
        "<IQII", CHECKPOINT_VERSION, seed & (2**64 - 1), ACTIVATION_TANH, len(nets)
    )
    for p in nets:
        widths = p.arch.widths
        header += struct.pack(f"<I{len(widths)}I", len(widths), *widths)
    header += struct.pack("<I", extras.size)
    with open(path, "wb") as f:
        f.write(header)
        for p in nets:
            f.write(p.flat.astype("<f8").tobytes())
        f.write(extras.astype("<f8").tobytes())


def load_checkpoint(path) -> tuple[list, np.ndarray, int]:
    """Inverse of save_checkpoint: (networks, extras, seed)."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a parameter checkpoint")
    version, seed, activation, n_nets = struct.unpack_from("<IQII", blob, 4)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    if activation != ACTIVATION_TANH:
        raise ValueError(f"{path}: unknown activation tag {activation}")
    pos = 4 + struct.calcsize("<IQII")
    archs = []
    for _ in range(n_nets):
        (n_widths,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        widths = struct.unpack_from(f"<{n_widths}I", blob, pos)
        pos += 4 * n_widths
        archs.append(MlpArch(widths))
    (n_extras,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    nets = []
    for arch in archs:
        flat = np.frombuffer(blob, dtype="<f8", offset=pos, count=arch.n_params).astype(float)
        pos += 8 * arch.n_params
        nets.append(MlpParams(arch, flat))
    extras = np.frombuffer(blob, dtype="<f8", offset=pos, count=n_extras).astype(float)
    return nets, extras, seed
