"""
The convolutional network, with hand-written forward and backward passes.

Layer order, for an input of ``(batch, frames, coefficients, 1)``:

    conv 3x3x64 + ReLU -> maxpool 2x2 -> conv 2x2x32 + ReLU -> batch norm
    -> flatten -> dense 256 + ReLU -> dropout 0.5 -> dense 128 + ReLU
    -> dropout 0.3 -> dense 1 + sigmoid

Arrays are 64-bit and channels-last throughout. Convolutions are
cross-correlations with stride 1 and valid padding.
"""

import dataclasses
import logging
import typing as ty

import numpy as np

from coughnet import exceptions

LOG = logging.getLogger(__name__)

Tensor4 = np.ndarray

CANONICAL_INPUT = (302, 15)
CANONICAL_FLATTEN = 23840

CONV1_FILTERS = 64
CONV1_KERNEL = (3, 3)
CONV2_FILTERS = 32
CONV2_KERNEL = (2, 2)
POOL = 2
DENSE1_UNITS = 256
DENSE2_UNITS = 128

BN_MOMENTUM = 0.99
BN_EPSILON = 1e-3

# logits beyond this saturate the float64 sigmoid to exactly 0 or 1
LOGIT_LIMIT = 36.0

LEARNABLE = (
    'conv1_w',
    'conv1_b',
    'conv2_w',
    'conv2_b',
    'bn_gamma',
    'bn_beta',
    'dense1_w',
    'dense1_b',
    'dense2_w',
    'dense2_b',
    'out_w',
    'out_b',
)
STATE = ('bn_running_mean', 'bn_running_var')
TENSORS = LEARNABLE + STATE


@dataclasses.dataclass(frozen=True)
class Regularization:
    """L2 coefficients for the two hidden dense layers."""

    kernel_l2: float = 1e-4
    bias_l2: float = 1e-4
    activity_l2: float = 1e-5

    @classmethod
    def none(cls) -> 'Regularization':
        return cls(0.0, 0.0, 0.0)


@dataclasses.dataclass(eq=False)
class ModelParams:
    tensors: ty.Dict[str, np.ndarray]
    input_shape: ty.Tuple[int, int] = CANONICAL_INPUT
    bn_momentum: float = BN_MOMENTUM
    bn_epsilon: float = BN_EPSILON
    dropout_rates: ty.Tuple[float, float] = (0.5, 0.3)
    bn_updates: int = 0

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __setitem__(self, name: str, value: np.ndarray) -> None:
        self.tensors[name] = value

    @property
    def flatten_dim(self) -> int:
        return int(self.tensors['dense1_w'].shape[0])

    def learnable(self) -> ty.Dict[str, np.ndarray]:
        return {name: self.tensors[name] for name in LEARNABLE}

    def shapes(self) -> ty.Dict[str, ty.Tuple[int, ...]]:
        return {name: self.tensors[name].shape for name in TENSORS}

    def copy(self) -> 'ModelParams':
        return dataclasses.replace(
            self,
            tensors={k: v.copy() for k, v in self.tensors.items()},
        )


@dataclasses.dataclass(eq=False)
class ForwardCache:
    """Everything a train-mode forward pass keeps for the backward pass."""

    x: np.ndarray
    z1: np.ndarray
    pool_argmax: np.ndarray
    p1: np.ndarray
    z2: np.ndarray
    bn_xhat: np.ndarray
    bn_inv_std: np.ndarray
    flat: np.ndarray
    h1: np.ndarray
    a3: np.ndarray
    mask1: np.ndarray
    d1: np.ndarray
    h2: np.ndarray
    a4: np.ndarray
    mask2: np.ndarray
    d2: np.ndarray
    logits: np.ndarray
    probs: np.ndarray
    param_shapes: ty.Dict[str, ty.Tuple[int, ...]]


def shape_chain(
    input_shape: ty.Tuple[int, int],
) -> ty.List[ty.Tuple[int, ...]]:
    """Per-example activation shapes, from the input to the output."""
    h, w = input_shape
    h1, w1 = h - CONV1_KERNEL[0] + 1, w - CONV1_KERNEL[1] + 1
    hp, wp = h1 // POOL, w1 // POOL
    h2, w2 = hp - CONV2_KERNEL[0] + 1, wp - CONV2_KERNEL[1] + 1

    return [
        (h, w, 1),
        (h1, w1, CONV1_FILTERS),
        (hp, wp, CONV1_FILTERS),
        (h2, w2, CONV2_FILTERS),
        (h2 * w2 * CONV2_FILTERS,),
        (DENSE1_UNITS,),
        (DENSE2_UNITS,),
        (1,),
    ]


def _expect(name: str, array: np.ndarray, shape: ty.Tuple[int, ...]):
    if array.shape != shape:
        raise exceptions.ShapeMismatch(
            '{}: expected shape {}, got {}'.format(name, shape, array.shape)
        )


def init_params(
    rng: np.random.Generator,
    input_shape: ty.Tuple[int, int] = CANONICAL_INPUT,
    dropout_rates: ty.Tuple[float, float] = (0.5, 0.3),
) -> ModelParams:
    """He-uniform for ReLU layers, Glorot-uniform for the sigmoid output.

    Biases start at zero, batch norm at the identity.
    """
    chain = shape_chain(input_shape)
    if min(chain[3]) < 1:
        raise exceptions.ShapeMismatch(
            'input {} is too small for the network'.format(input_shape)
        )

    flatten = chain[4][0]
    if tuple(input_shape) == CANONICAL_INPUT and flatten != CANONICAL_FLATTEN:
        raise exceptions.ShapeMismatch(
            'flatten width {} != {}'.format(flatten, CANONICAL_FLATTEN)
        )

    def he(shape, fan_in):
        limit = np.sqrt(6.0 / fan_in)
        return rng.uniform(-limit, limit, size=shape)

    def glorot(shape, fan_in, fan_out):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=shape)

    kh1, kw1 = CONV1_KERNEL
    kh2, kw2 = CONV2_KERNEL
    tensors = {
        'conv1_w': he((kh1, kw1, 1, CONV1_FILTERS), kh1 * kw1),
        'conv1_b': np.zeros(CONV1_FILTERS),
        'conv2_w': he(
            (kh2, kw2, CONV1_FILTERS, CONV2_FILTERS),
            kh2 * kw2 * CONV1_FILTERS,
        ),
        'conv2_b': np.zeros(CONV2_FILTERS),
        'bn_gamma': np.ones(CONV2_FILTERS),
        'bn_beta': np.zeros(CONV2_FILTERS),
        'dense1_w': he((flatten, DENSE1_UNITS), flatten),
        'dense1_b': np.zeros(DENSE1_UNITS),
        'dense2_w': he((DENSE1_UNITS, DENSE2_UNITS), DENSE1_UNITS),
        'dense2_b': np.zeros(DENSE2_UNITS),
        'out_w': glorot((DENSE2_UNITS, 1), DENSE2_UNITS, 1),
        'out_b': np.zeros(1),
        'bn_running_mean': np.zeros(CONV2_FILTERS),
        'bn_running_var': np.ones(CONV2_FILTERS),
    }

    LOG.debug(
        'Initialized network for input %s (flatten width %d, %d weights)',
        input_shape,
        flatten,
        sum(tensors[name].size for name in LEARNABLE),
    )

    return ModelParams(
        tensors,
        input_shape=tuple(input_shape),  # type: ignore
        dropout_rates=tuple(dropout_rates),  # type: ignore
    )


def _windows(x: Tensor4, kh: int, kw: int) -> np.ndarray:
    """Patches as rows: ``(B * Ho * Wo, kh * kw * C)``."""
    b, h, w, c = x.shape
    view = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(1, 2))
    # view is (B, Ho, Wo, C, kh, kw); order rows as (kh, kw, C)
    patches = view.transpose(0, 1, 2, 4, 5, 3)
    return patches.reshape(b * (h - kh + 1) * (w - kw + 1), kh * kw * c)


def conv2d_forward(x: Tensor4, kernel: np.ndarray, bias: np.ndarray):
    """Valid cross-correlation with stride 1, plus a per-channel bias."""
    kh, kw, c_in, c_out = kernel.shape
    if x.ndim != 4 or x.shape[3] != c_in:
        raise exceptions.ShapeMismatch(
            'input {} does not match kernel {}'.format(x.shape, kernel.shape)
        )
    if x.shape[1] < kh or x.shape[2] < kw:
        raise exceptions.ShapeMismatch(
            'input {} smaller than kernel {}'.format(x.shape, kernel.shape)
        )
    if bias.shape != (c_out,):
        raise exceptions.ShapeMismatch(
            'bias {} does not match {} filters'.format(bias.shape, c_out)
        )

    b, h, w, _ = x.shape
    ho, wo = h - kh + 1, w - kw + 1
    out = _windows(x, kh, kw) @ kernel.reshape(kh * kw * c_in, c_out)

    return out.reshape(b, ho, wo, c_out) + bias


def conv2d_backward(
    x: Tensor4,
    kernel: np.ndarray,
    dout: Tensor4,
    need_input_grad: bool = True,
):
    """Gradients of a valid correlation w.r.t. kernel, bias and input.

    The input gradient is the full correlation of ``dout`` with the
    spatially flipped kernel.
    """
    kh, kw, c_in, c_out = kernel.shape

    rows = dout.reshape(-1, c_out)
    dkernel = (_windows(x, kh, kw).T @ rows).reshape(kernel.shape)
    dbias = rows.sum(axis=0)

    if not need_input_grad:
        return dkernel, dbias, None

    padded = np.pad(dout, [(0, 0), (kh - 1, kh - 1), (kw - 1, kw - 1), (0, 0)])
    flipped = kernel[::-1, ::-1].transpose(0, 1, 3, 2)
    dx = _windows(padded, kh, kw) @ flipped.reshape(kh * kw * c_out, c_in)

    return dkernel, dbias, dx.reshape(x.shape)


def maxpool2d(x: Tensor4, pool: int = POOL):
    """Non-overlapping max pooling; trailing odd rows/columns are dropped.

    Returns the pooled tensor and the argmax within each window, with ties
    going to the first position in row-major order.
    """
    b, h, w, c = x.shape
    ho, wo = h // pool, w // pool

    blocks = x[:, : ho * pool, : wo * pool, :]
    blocks = blocks.reshape(b, ho, pool, wo, pool, c)
    blocks = blocks.transpose(0, 1, 3, 5, 2, 4).reshape(
        b, ho, wo, c, pool * pool
    )

    argmax = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, argmax[..., None], axis=-1)[..., 0]

    return out, argmax


def maxpool2d_backward(
    dout: Tensor4,
    argmax: np.ndarray,
    input_shape: ty.Tuple[int, ...],
    pool: int = POOL,
) -> Tensor4:
    b, h, w, c = input_shape
    ho, wo = dout.shape[1], dout.shape[2]

    blocks = np.zeros((b, ho, wo, c, pool * pool))
    np.put_along_axis(blocks, argmax[..., None], dout[..., None], axis=-1)

    blocks = blocks.reshape(b, ho, wo, c, pool, pool)
    blocks = blocks.transpose(0, 1, 4, 2, 5, 3).reshape(
        b, ho * pool, wo * pool, c
    )

    dx = np.zeros(input_shape)
    dx[:, : ho * pool, : wo * pool, :] = blocks

    return dx


def batchnorm_forward(
    x: Tensor4,
    params: ModelParams,
    mode: str = 'train',
    update_stats: bool = True,
):
    """Per-channel batch normalization over (batch, height, width).

    Train mode normalizes with the batch statistics and folds them into
    the running statistics; infer mode uses the running statistics.
    Returns ``(out, xhat, inv_std)``.

    Raises:
        InferBeforeTrain: infer mode before any train-mode batch.
    """
    gamma = params['bn_gamma']
    beta = params['bn_beta']
    if x.shape[-1] != gamma.shape[0]:
        raise exceptions.ShapeMismatch(
            '{} channels for {} batch-norm units'.format(
                x.shape[-1], gamma.shape[0]
            )
        )

    eps = params.bn_epsilon

    if mode == 'infer':
        if params.bn_updates == 0:
            raise exceptions.InferBeforeTrain(
                'batch-norm running statistics were never updated'
            )
        inv_std = 1.0 / np.sqrt(params['bn_running_var'] + eps)
        xhat = (x - params['bn_running_mean']) * inv_std
        return gamma * xhat + beta, xhat, inv_std

    mean = x.mean(axis=(0, 1, 2))
    var = x.var(axis=(0, 1, 2))
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean) * inv_std

    if update_stats:
        m = params.bn_momentum
        params['bn_running_mean'] = m * params['bn_running_mean'] + (
            1.0 - m
        ) * mean
        params['bn_running_var'] = m * params['bn_running_var'] + (
            1.0 - m
        ) * var
        params.bn_updates += 1

    return gamma * xhat + beta, xhat, inv_std


def batchnorm_backward(
    dout: Tensor4,
    xhat: np.ndarray,
    inv_std: np.ndarray,
    gamma: np.ndarray,
):
    n = dout.shape[0] * dout.shape[1] * dout.shape[2]

    dgamma = (dout * xhat).sum(axis=(0, 1, 2))
    dbeta = dout.sum(axis=(0, 1, 2))

    dxhat = dout * gamma
    dx = (inv_std / n) * (
        n * dxhat
        - dxhat.sum(axis=(0, 1, 2))
        - xhat * (dxhat * xhat).sum(axis=(0, 1, 2))
    )

    return dx, dgamma, dbeta


def dense_forward(x: np.ndarray, weights: np.ndarray, bias: np.ndarray):
    if x.ndim != 2 or x.shape[1] != weights.shape[0]:
        raise exceptions.ShapeMismatch(
            'input {} does not match weights {}'.format(
                x.shape, weights.shape
            )
        )
    if bias.shape != (weights.shape[1],):
        raise exceptions.ShapeMismatch(
            'bias {} does not match weights {}'.format(
                bias.shape, weights.shape
            )
        )

    return x @ weights + bias


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Logistic function, evaluated without overflow.

    Inputs are limited to +/-``LOGIT_LIMIT`` so the result is strictly
    inside (0, 1).
    """
    x = np.clip(np.asarray(x, dtype=np.float64), -LOGIT_LIMIT, LOGIT_LIMIT)
    out = np.empty_like(x)

    positive = x >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-x[positive]))
    e = np.exp(x[~positive])
    out[~positive] = e / (1.0 + e)

    return out


def dropout(
    x: np.ndarray,
    rate: float,
    mode: str,
    rng: ty.Optional[np.random.Generator],
):
    """Inverted dropout; returns the output and the scaling mask."""
    if not 0.0 <= rate < 1.0:
        raise ValueError('dropout rate must lie within [0, 1)')

    if mode != 'train' or rate == 0.0 or rng is None:
        return x, np.ones_like(x)

    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)

    return x * mask, mask


def model_forward(
    x: Tensor4,
    params: ModelParams,
    mode: str = 'infer',
    rng: ty.Optional[np.random.Generator] = None,
    use_dropout: bool = True,
    update_stats: bool = True,
):
    """Run the network; returns ``(probs, cache)``.

    ``cache`` is ``None`` in infer mode. Every intermediate shape is
    checked against :func:`shape_chain`.
    """
    if mode not in ('train', 'infer'):
        raise ValueError("mode must be 'train' or 'infer'")

    chain = shape_chain(params.input_shape)
    if x.ndim != 4:
        raise exceptions.ShapeMismatch(
            'input must be (batch, frames, coefficients, 1), got {}'.format(
                x.shape
            )
        )
    b = x.shape[0]
    _expect('input', x, (b,) + chain[0])

    z1 = conv2d_forward(x, params['conv1_w'], params['conv1_b'])
    _expect('conv1', z1, (b,) + chain[1])
    a1 = relu(z1)

    p1, pool_argmax = maxpool2d(a1)
    _expect('maxpool', p1, (b,) + chain[2])

    z2 = conv2d_forward(p1, params['conv2_w'], params['conv2_b'])
    _expect('conv2', z2, (b,) + chain[3])
    a2 = relu(z2)

    bn, bn_xhat, bn_inv_std = batchnorm_forward(
        a2, params, mode, update_stats
    )

    flat = bn.reshape(b, -1)
    _expect('flatten', flat, (b,) + chain[4])

    rates = params.dropout_rates if use_dropout else (0.0, 0.0)

    h1 = dense_forward(flat, params['dense1_w'], params['dense1_b'])
    _expect('dense1', h1, (b,) + chain[5])
    a3 = relu(h1)
    d1, mask1 = dropout(a3, rates[0], mode, rng)

    h2 = dense_forward(d1, params['dense2_w'], params['dense2_b'])
    _expect('dense2', h2, (b,) + chain[6])
    a4 = relu(h2)
    d2, mask2 = dropout(a4, rates[1], mode, rng)

    logits = dense_forward(d2, params['out_w'], params['out_b'])
    _expect('output', logits, (b,) + chain[7])
    probs = sigmoid(logits)

    if mode == 'infer':
        return probs, None

    cache = ForwardCache(
        x=x,
        z1=z1,
        pool_argmax=pool_argmax,
        p1=p1,
        z2=z2,
        bn_xhat=bn_xhat,
        bn_inv_std=bn_inv_std,
        flat=flat,
        h1=h1,
        a3=a3,
        mask1=mask1,
        d1=d1,
        h2=h2,
        a4=a4,
        mask2=mask2,
        d2=d2,
        logits=logits,
        probs=probs,
        param_shapes=params.shapes(),
    )

    return probs, cache


def predict(
    x: Tensor4,
    params: ModelParams,
    batch_size: int = 32,
) -> np.ndarray:
    """Infer-mode probabilities, one per example, in input order."""
    out = []
    for start in range(0, x.shape[0], batch_size):
        probs, _ = model_forward(x[start : start + batch_size], params)
        out.append(probs[:, 0])

    return np.concatenate(out) if out else np.zeros(0)


def regularization_loss(
    params: ModelParams,
    cache: ty.Optional[ForwardCache],
    reg: Regularization,
) -> float:
    """L2 kernel, bias and activity penalties of the hidden dense layers.

    The activity term is averaged over the batch.
    """
    total = 0.0
    for layer in ('dense1', 'dense2'):
        total += reg.kernel_l2 * float(np.sum(params[layer + '_w'] ** 2))
        total += reg.bias_l2 * float(np.sum(params[layer + '_b'] ** 2))

    if cache is not None and reg.activity_l2:
        b = cache.a3.shape[0]
        activity = np.sum(cache.a3**2) + np.sum(cache.a4**2)
        total += reg.activity_l2 * float(activity) / b

    return total


def model_backward(
    cache: ForwardCache,
    upstream: np.ndarray,
    params: ModelParams,
    reg: ty.Optional[Regularization] = None,
) -> ty.Dict[str, np.ndarray]:
    """Analytic gradients of the loss for every learnable tensor.

    ``upstream`` is the loss gradient w.r.t. the output probabilities.
    When ``reg`` is given the gradients of :func:`regularization_loss` are
    included.

    Raises:
        StaleCache: the cache was produced with differently shaped params.
    """
    if cache.param_shapes != params.shapes():
        raise exceptions.StaleCache(
            'forward cache does not match the parameters'
        )
    b = cache.probs.shape[0]
    _expect('upstream gradient', upstream, (b, 1))

    reg = reg or Regularization.none()
    grads: ty.Dict[str, np.ndarray] = {}

    p = cache.probs
    inside = np.abs(cache.logits) < LOGIT_LIMIT
    dlogits = upstream * p * (1.0 - p) * inside

    grads['out_w'] = cache.d2.T @ dlogits
    grads['out_b'] = dlogits.sum(axis=0)
    dd2 = dlogits @ params['out_w'].T

    da4 = dd2 * cache.mask2 + (2.0 * reg.activity_l2 / b) * cache.a4
    dh2 = da4 * (cache.h2 > 0)
    grads['dense2_w'] = cache.d1.T @ dh2
    grads['dense2_b'] = dh2.sum(axis=0)
    dd1 = dh2 @ params['dense2_w'].T

    da3 = dd1 * cache.mask1 + (2.0 * reg.activity_l2 / b) * cache.a3
    dh1 = da3 * (cache.h1 > 0)
    grads['dense1_w'] = cache.flat.T @ dh1
    grads['dense1_b'] = dh1.sum(axis=0)
    dflat = dh1 @ params['dense1_w'].T

    dbn = dflat.reshape(cache.z2.shape)
    da2, grads['bn_gamma'], grads['bn_beta'] = batchnorm_backward(
        dbn, cache.bn_xhat, cache.bn_inv_std, params['bn_gamma']
    )

    dz2 = da2 * (cache.z2 > 0)
    grads['conv2_w'], grads['conv2_b'], dp1 = conv2d_backward(
        cache.p1, params['conv2_w'], dz2
    )

    da1 = maxpool2d_backward(dp1, cache.pool_argmax, cache.z1.shape)
    dz1 = da1 * (cache.z1 > 0)
    grads['conv1_w'], grads['conv1_b'], _ = conv2d_backward(
        cache.x, params['conv1_w'], dz1, need_input_grad=False
    )

    for layer in ('dense1', 'dense2'):
        grads[layer + '_w'] = (
            grads[layer + '_w'] + 2.0 * reg.kernel_l2 * params[layer + '_w']
        )
        grads[layer + '_b'] = (
            grads[layer + '_b'] + 2.0 * reg.bias_l2 * params[layer + '_b']
        )

    return {name: grads[name] for name in LEARNABLE}
