"""Differentiable primitives over float64 numpy arrays.

Every primitive is a registered ``Op`` with a ``forward`` that computes the
value (and stashes what the backward pass needs in ``ctx``) and a ``backward``
that maps the upstream gradient onto one gradient per input.

Shape rules (B batch, C channels, H×W spatial):

    conv2d            x[B,Cin,H,W], w[Cout,Cin,kh,kw], b[Cout]? -> [B,Cout,Ho,Wo]
                      Ho = floor((H + 2·padding − kh)/stride) + 1 (same for Wo)
    conv2d_transpose  x[B,Cin,H,W], w[Cin,Cout,kh,kw], b[Cout]? -> [B,Cout,Ho,Wo]
                      Ho = (H − 1)·stride − 2·padding + kh + output_padding
    linear            x[B,in], w[out,in], b[out]? -> [B,out]
    relu, sigmoid, square, sqrt, scale   elementwise, shape preserved
    add, subtract, multiply   equal ndim; each axis equal or 1 -> axis-wise max
    global_avg_pool, global_max_pool     [B,C,H,W] -> [B,C,1,1]
    channel_avg_pool, channel_max_pool   [B,C,H,W] -> [B,1,H,W]
    concat            n inputs [B,Ci,H,W] -> [B,ΣCi,H,W] (axis 1)
    reshape           any -> attrs.shape (same element count)
    sum, mean         reduce attrs.axes (all when omitted), dims kept as 1
    pad2d, crop2d     [B,C,H,W] -> [B,C,H±top±bottom,W±left±right] (zero fill)
"""
from typing import Any, Callable, Dict, Optional, Sequence, Tuple, Type

import numpy as np
import numpy.typing as npt
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from ..utils.error_handler import NumericalError, ShapeError, UnknownOpError

Tensor = npt.NDArray[np.float64]
Grads = Tuple[Optional[Tensor], ...]

# sigmoid outputs stay strictly inside (0, 1); expit rounds to 1.0 from x ≈ 37
SIGMOID_EPS = float(np.finfo(np.float64).eps)


class Op:
    """Base class for differentiable primitives."""

    kind: str = ""

    def forward(self, ctx: Dict[str, Any], *inputs: Tensor, **attrs: Any) -> Tensor:
        raise NotImplementedError(f"forward not implemented for {self.kind}")

    def backward(self, ctx: Dict[str, Any], grad: Tensor, *inputs: Tensor, **attrs: Any) -> Grads:
        raise NotImplementedError(f"backward not implemented for {self.kind}")


OP_REGISTRY: Dict[str, Op] = {}


def register(kind: str) -> Callable[[Type[Op]], Type[Op]]:
    def decorator(cls: Type[Op]) -> Type[Op]:
        cls.kind = kind
        OP_REGISTRY[kind] = cls()
        return cls
    return decorator


def get_op(kind: str) -> Op:
    try:
        return OP_REGISTRY[kind]
    except KeyError:
        raise UnknownOpError(f"unknown op_kind {kind!r}; known: {sorted(OP_REGISTRY)}") from None


def forward(op_kind: str, inputs: Sequence[Tensor], attrs: Optional[Dict[str, Any]] = None) -> Tensor:
    """Evaluate one primitive outside any graph."""
    op = get_op(op_kind)
    values = [np.asarray(x, dtype=np.float64) for x in inputs]
    return op.forward({}, *values, **(attrs or {}))


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def conv_output_extent(size: int, kernel: int, stride: int = 1, padding: int = 0) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def broadcast_shape(op: str, a: Sequence[int], b: Sequence[int]) -> Tuple[int, ...]:
    if len(a) != len(b):
        raise ShapeError(op, a, b, detail="operands must have the same number of axes")
    out = []
    for da, db in zip(a, b):
        if da != db and da != 1 and db != 1:
            raise ShapeError(op, a, b, detail="axes must match or be singleton")
        out.append(max(da, db))
    return tuple(out)


def unbroadcast(grad: Tensor, shape: Sequence[int]) -> Tensor:
    """Sum-reduce ``grad`` over the axes that were broadcast from ``shape``."""
    axes = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _require_ndim(op: str, x: Tensor, ndim: int, label: str = "input") -> None:
    if x.ndim != ndim:
        raise ShapeError(op, x.shape, detail=f"{label} must be {ndim}-D")


def _normalise_axes(axes, ndim: int) -> Tuple[int, ...]:
    if axes is None:
        return tuple(range(ndim))
    if isinstance(axes, int):
        axes = (axes,)
    return tuple(sorted(a % ndim for a in axes))


# ---------------------------------------------------------------------------
# convolution and dense layers
# ---------------------------------------------------------------------------

@register("conv2d")
class Conv2d(Op):

    def _check(self, x, w, b, stride, padding):
        _require_ndim(self.kind, x, 4)
        _require_ndim(self.kind, w, 4, "kernel")
        if x.shape[1] != w.shape[1]:
            raise ShapeError(self.kind, x.shape, w.shape, detail="input channels differ from kernel channels")
        if b is not None and b.shape != (w.shape[0],):
            raise ShapeError(self.kind, w.shape, b.shape, detail="bias must have one entry per output channel")
        if stride < 1 or padding < 0:
            raise ShapeError(self.kind, x.shape, w.shape, detail=f"invalid stride={stride} padding={padding}")
        ho = conv_output_extent(x.shape[2], w.shape[2], stride, padding)
        wo = conv_output_extent(x.shape[3], w.shape[3], stride, padding)
        if ho < 1 or wo < 1:
            raise ShapeError(self.kind, x.shape, w.shape, detail="kernel larger than padded input")
        return ho, wo

    def forward(self, ctx, x, w, b=None, stride: int = 1, padding: int = 0):
        ho, wo = self._check(x, w, b, stride, padding)
        kh, kw = w.shape[2], w.shape[3]
        xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x
        windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :ho, :wo]
        out = np.tensordot(windows, w, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
        if b is not None:
            out = out + b[None, :, None, None]
        ctx["windows"] = windows
        ctx["padded_shape"] = xp.shape
        return np.ascontiguousarray(out)

    def backward(self, ctx, grad, x, w, b=None, stride: int = 1, padding: int = 0):
        windows = ctx["windows"]
        kh, kw = w.shape[2], w.shape[3]
        ho, wo = grad.shape[2], grad.shape[3]
        gw = np.tensordot(grad, windows, axes=([0, 2, 3], [0, 2, 3]))
        gxp = np.zeros(ctx["padded_shape"])
        for i in range(kh):
            for j in range(kw):
                contrib = np.tensordot(grad, w[:, :, i, j], axes=([1], [0])).transpose(0, 3, 1, 2)
                gxp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += contrib
        gx = gxp[:, :, padding:padding + x.shape[2], padding:padding + x.shape[3]]
        gb = grad.sum(axis=(0, 2, 3)) if b is not None else None
        return (np.ascontiguousarray(gx), gw, gb)[: 3 if b is not None else 2]


@register("conv2d_transpose")
class Conv2dTranspose(Op):

    def _extents(self, x, w, b, stride, padding, output_padding):
        _require_ndim(self.kind, x, 4)
        _require_ndim(self.kind, w, 4, "kernel")
        if x.shape[1] != w.shape[0]:
            raise ShapeError(self.kind, x.shape, w.shape, detail="input channels differ from kernel rows")
        if b is not None and b.shape != (w.shape[1],):
            raise ShapeError(self.kind, w.shape, b.shape, detail="bias must have one entry per output channel")
        if stride < 1 or padding < 0 or not 0 <= output_padding < stride:
            raise ShapeError(
                self.kind, x.shape, w.shape,
                detail=f"invalid stride={stride} padding={padding} output_padding={output_padding}",
            )
        kh, kw = w.shape[2], w.shape[3]
        full_h = (x.shape[2] - 1) * stride + kh + output_padding
        full_w = (x.shape[3] - 1) * stride + kw + output_padding
        ho, wo = full_h - 2 * padding, full_w - 2 * padding
        if ho < 1 or wo < 1:
            raise ShapeError(self.kind, x.shape, w.shape, detail="padding removes the whole output")
        return full_h, full_w, ho, wo

    def forward(self, ctx, x, w, b=None, stride: int = 1, padding: int = 0, output_padding: int = 0):
        full_h, full_w, ho, wo = self._extents(x, w, b, stride, padding, output_padding)
        batch, _, h, wd = x.shape
        kh, kw = w.shape[2], w.shape[3]
        full = np.zeros((batch, w.shape[1], full_h, full_w))
        for i in range(kh):
            for j in range(kw):
                contrib = np.tensordot(x, w[:, :, i, j], axes=([1], [0])).transpose(0, 3, 1, 2)
                full[:, :, i:i + stride * h:stride, j:j + stride * wd:stride] += contrib
        out = full[:, :, padding:padding + ho, padding:padding + wo]
        if b is not None:
            out = out + b[None, :, None, None]
        ctx["full_shape"] = full.shape
        return np.ascontiguousarray(out)

    def backward(self, ctx, grad, x, w, b=None, stride: int = 1, padding: int = 0, output_padding: int = 0):
        _, _, h, wd = x.shape
        kh, kw = w.shape[2], w.shape[3]
        gfull = np.zeros(ctx["full_shape"])
        gfull[:, :, padding:padding + grad.shape[2], padding:padding + grad.shape[3]] = grad
        gx = np.zeros_like(x)
        gw = np.zeros_like(w)
        for i in range(kh):
            for j in range(kw):
                window = gfull[:, :, i:i + stride * h:stride, j:j + stride * wd:stride]
                gx += np.tensordot(window, w[:, :, i, j], axes=([1], [1])).transpose(0, 3, 1, 2)
                gw[:, :, i, j] = np.tensordot(x, window, axes=([0, 2, 3], [0, 2, 3]))
        gb = grad.sum(axis=(0, 2, 3)) if b is not None else None
        return (gx, gw, gb)[: 3 if b is not None else 2]


@register("linear")
class Linear(Op):

    def forward(self, ctx, x, w, b=None):
        _require_ndim(self.kind, x, 2)
        _require_ndim(self.kind, w, 2, "weight")
        if x.shape[1] != w.shape[1]:
            raise ShapeError(self.kind, x.shape, w.shape, detail="input features differ from weight columns")
        if b is not None and b.shape != (w.shape[0],):
            raise ShapeError(self.kind, w.shape, b.shape, detail="bias must have one entry per output feature")
        out = x @ w.T
        return out + b[None, :] if b is not None else out

    def backward(self, ctx, grad, x, w, b=None):
        grads = (grad @ w, grad.T @ x)
        return grads + (grad.sum(axis=0),) if b is not None else grads


# ---------------------------------------------------------------------------
# elementwise
# ---------------------------------------------------------------------------

@register("relu")
class Relu(Op):

    def forward(self, ctx, x):
        mask = x > 0
        ctx["mask"] = mask
        return np.where(mask, x, 0.0)

    def backward(self, ctx, grad, x):
        return (np.where(ctx["mask"], grad, 0.0),)


@register("sigmoid")
class Sigmoid(Op):

    def forward(self, ctx, x):
        out = np.clip(expit(x), SIGMOID_EPS, 1.0 - SIGMOID_EPS)
        ctx["out"] = out
        return out

    def backward(self, ctx, grad, x):
        s = ctx["out"]
        return (grad * s * (1.0 - s),)


@register("scale")
class Scale(Op):

    def forward(self, ctx, x, factor: float = 1.0):
        return x * float(factor)

    def backward(self, ctx, grad, x, factor: float = 1.0):
        return (grad * float(factor),)


@register("square")
class Square(Op):

    def forward(self, ctx, x):
        return x * x

    def backward(self, ctx, grad, x):
        return (2.0 * x * grad,)


@register("sqrt")
class Sqrt(Op):
    """Square root; the subgradient at 0 is taken as 0."""

    def forward(self, ctx, x):
        if np.any(x < 0):
            raise NumericalError(f"sqrt of negative value (min {x.min():.3e})")
        out = np.sqrt(x)
        ctx["out"] = out
        return out

    def backward(self, ctx, grad, x):
        out = ctx["out"]
        safe = np.where(out > 0, out, 1.0)
        return (np.where(out > 0, grad / (2.0 * safe), 0.0),)


@register("add")
class Add(Op):

    def forward(self, ctx, a, b):
        broadcast_shape(self.kind, a.shape, b.shape)
        return a + b

    def backward(self, ctx, grad, a, b):
        return unbroadcast(grad, a.shape), unbroadcast(grad, b.shape)


@register("subtract")
class Subtract(Op):

    def forward(self, ctx, a, b):
        broadcast_shape(self.kind, a.shape, b.shape)
        return a - b

    def backward(self, ctx, grad, a, b):
        return unbroadcast(grad, a.shape), unbroadcast(-grad, b.shape)


@register("multiply")
class Multiply(Op):

    def forward(self, ctx, a, b):
        broadcast_shape(self.kind, a.shape, b.shape)
        return a * b

    def backward(self, ctx, grad, a, b):
        return unbroadcast(grad * b, a.shape), unbroadcast(grad * a, b.shape)


# ---------------------------------------------------------------------------
# pooling
# ---------------------------------------------------------------------------

@register("global_avg_pool")
class GlobalAvgPool(Op):

    def forward(self, ctx, x):
        _require_ndim(self.kind, x, 4)
        return x.mean(axis=(2, 3), keepdims=True)

    def backward(self, ctx, grad, x):
        return (np.broadcast_to(grad / (x.shape[2] * x.shape[3]), x.shape).copy(),)


@register("global_max_pool")
class GlobalMaxPool(Op):
    """Per-channel spatial maximum; ties route the gradient to the first maximum."""

    def forward(self, ctx, x):
        _require_ndim(self.kind, x, 4)
        flat = x.reshape(x.shape[0], x.shape[1], -1)
        idx = flat.argmax(axis=2)
        ctx["idx"] = idx
        return np.take_along_axis(flat, idx[..., None], axis=2).reshape(x.shape[0], x.shape[1], 1, 1)

    def backward(self, ctx, grad, x):
        gflat = np.zeros((x.shape[0], x.shape[1], x.shape[2] * x.shape[3]))
        np.put_along_axis(gflat, ctx["idx"][..., None], grad.reshape(x.shape[0], x.shape[1], 1), axis=2)
        return (gflat.reshape(x.shape),)


@register("channel_avg_pool")
class ChannelAvgPool(Op):

    def forward(self, ctx, x):
        _require_ndim(self.kind, x, 4)
        return x.mean(axis=1, keepdims=True)

    def backward(self, ctx, grad, x):
        return (np.broadcast_to(grad / x.shape[1], x.shape).copy(),)


@register("channel_max_pool")
class ChannelMaxPool(Op):
    """Per-location maximum across channels; ties go to the first channel."""

    def forward(self, ctx, x):
        _require_ndim(self.kind, x, 4)
        idx = x.argmax(axis=1)[:, None]
        ctx["idx"] = idx
        return np.take_along_axis(x, idx, axis=1)

    def backward(self, ctx, grad, x):
        gx = np.zeros_like(x)
        np.put_along_axis(gx, ctx["idx"], grad, axis=1)
        return (gx,)


# ---------------------------------------------------------------------------
# layout and reductions
# ---------------------------------------------------------------------------

@register("concat")
class Concat(Op):

    def forward(self, ctx, *xs):
        if not xs:
            raise ShapeError(self.kind, (), detail="needs at least one input")
        ref = xs[0].shape
        for x in xs[1:]:
            if x.ndim != len(ref) or x.ndim < 2 or x.shape[:1] + x.shape[2:] != ref[:1] + ref[2:]:
                raise ShapeError(self.kind, ref, x.shape, detail="all axes except 1 must match")
        return np.concatenate(xs, axis=1)

    def backward(self, ctx, grad, *xs):
        bounds = np.cumsum([x.shape[1] for x in xs])[:-1]
        return tuple(np.ascontiguousarray(g) for g in np.split(grad, bounds, axis=1))


@register("reshape")
class Reshape(Op):

    def forward(self, ctx, x, shape: Sequence[int] = ()):
        shape = tuple(int(s) for s in shape)
        if int(np.prod(shape)) != x.size or any(s < 1 for s in shape):
            raise ShapeError(self.kind, x.shape, shape, detail="element counts differ")
        return x.reshape(shape)

    def backward(self, ctx, grad, x, shape: Sequence[int] = ()):
        return (grad.reshape(x.shape),)


@register("sum")
class Sum(Op):

    def forward(self, ctx, x, axes=None):
        return x.sum(axis=_normalise_axes(axes, x.ndim), keepdims=True)

    def backward(self, ctx, grad, x, axes=None):
        return (np.broadcast_to(grad, x.shape).copy(),)


@register("mean")
class Mean(Op):

    def forward(self, ctx, x, axes=None):
        return x.mean(axis=_normalise_axes(axes, x.ndim), keepdims=True)

    def backward(self, ctx, grad, x, axes=None):
        count = int(np.prod([x.shape[a] for a in _normalise_axes(axes, x.ndim)]))
        return (np.broadcast_to(grad / count, x.shape).copy(),)


@register("pad2d")
class Pad2d(Op):

    def forward(self, ctx, x, top: int = 0, bottom: int = 0, left: int = 0, right: int = 0):
        _require_ndim(self.kind, x, 4)
        if min(top, bottom, left, right) < 0:
            raise ShapeError(self.kind, x.shape, detail="negative padding")
        return np.pad(x, ((0, 0), (0, 0), (top, bottom), (left, right)))

    def backward(self, ctx, grad, x, top: int = 0, bottom: int = 0, left: int = 0, right: int = 0):
        h, w = x.shape[2], x.shape[3]
        return (np.ascontiguousarray(grad[:, :, top:top + h, left:left + w]),)


@register("crop2d")
class Crop2d(Op):

    def forward(self, ctx, x, top: int = 0, bottom: int = 0, left: int = 0, right: int = 0):
        _require_ndim(self.kind, x, 4)
        h, w = x.shape[2], x.shape[3]
        if min(top, bottom, left, right) < 0 or top + bottom >= h or left + right >= w:
            raise ShapeError(self.kind, x.shape, detail=f"cannot crop {top},{bottom},{left},{right}")
        return np.ascontiguousarray(x[:, :, top:h - bottom, left:w - right])

    def backward(self, ctx, grad, x, top: int = 0, bottom: int = 0, left: int = 0, right: int = 0):
        return (np.pad(grad, ((0, 0), (0, 0), (top, bottom), (left, right))),)
