"""Hot numeric kernels with selectable backends.

Two complete implementations live here for every kernel: numba @njit
loops and a pure-numpy path built on BLAS matmuls over strided views.
`WII_BACKEND=numba` or `WII_BACKEND=numpy` forces one side everywhere;
the default ("auto") dispatches per shape to whichever side measured
faster on CPU: BLAS tap-gemms win for wide-channel convolutions, the
numba loops win for small-channel convolutions and the fused Adam
update (see benchmarks/bench_kernels.py).

Reproducibility note: every parallel kernel either partitions writes by
sample or reduces thread partials in a fixed order, so results are
bitwise stable for a fixed thread count. Cap threads with WII_THREADS.
"""

import os

import numpy as np

from .errors import ConfigError

# skip numba's TBB probe (warns on old TBB); omp is always present here
os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

try:
    from numba import njit, prange, set_num_threads

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        if args and callable(args[0]):
            return args[0]
        return wrap

    prange = range

BACKEND = os.environ.get("WII_BACKEND", "auto").lower()
if BACKEND not in ("auto", "numba", "numpy"):
    raise ConfigError(f"WII_BACKEND must be auto, numba or numpy, got {BACKEND!r}")
if BACKEND == "numba" and not HAVE_NUMBA:
    raise ConfigError("WII_BACKEND=numba but numba is not importable")
if BACKEND == "auto" and not HAVE_NUMBA:
    BACKEND = "numpy"

_threads = os.environ.get("WII_THREADS")
if _threads:
    n = max(1, int(_threads))
    if HAVE_NUMBA:
        set_num_threads(n)
    try:
        import threadpoolctl

        _limiter = threadpoolctl.threadpool_limits(limits=n)
    except ImportError:  # pragma: no cover
        pass

# Channel count at which BLAS tap-gemms overtake the direct loops.
_AUTO_NUMBA_MAX_CIN = 8


def _use_numba(cin):
    if BACKEND == "numba":
        return True
    if BACKEND == "numpy":
        return False
    return cin <= _AUTO_NUMBA_MAX_CIN


# ----------------------------------------------------------------------
# radix-2 FFT
# ----------------------------------------------------------------------

_bitrev_cache = {}


def _bitrev(n):
    """Bit-reversal permutation for a power-of-two length."""
    idx = _bitrev_cache.get(n)
    if idx is None:
        bits = n.bit_length() - 1
        idx = np.zeros(n, dtype=np.int64)
        for i in range(n):
            r = 0
            x = i
            for _ in range(bits):
                r = (r << 1) | (x & 1)
                x >>= 1
            idx[i] = r
        _bitrev_cache[n] = idx
    return idx


@njit(cache=True, parallel=True)
def _fft_batch_nb(a, twiddles):
    """In-place iterative radix-2 DIT on bit-reversal-permuted rows."""
    B, N = a.shape
    for row in prange(B):
        m = 2
        toff = 0
        while m <= N:
            half = m // 2
            for start in range(0, N, m):
                for j in range(half):
                    w = twiddles[toff + j]
                    u = a[row, start + j]
                    v = a[row, start + j + half] * w
                    a[row, start + j] = u + v
                    a[row, start + j + half] = u - v
            toff += half
            m *= 2
    return a


def _twiddles(n, dtype):
    """Forward twiddles for all stages, concatenated stage by stage."""
    parts = []
    m = 2
    while m <= n:
        parts.append(np.exp(-2j * np.pi * np.arange(m // 2) / m))
        m *= 2
    return np.concatenate(parts).astype(dtype) if parts else np.zeros(0, dtype)


def _fft_batch_np(a, sign):
    """Vectorized butterflies over the batch axis."""
    B, N = a.shape
    m = 2
    while m <= N:
        half = m // 2
        tw = np.exp(sign * 2j * np.pi * np.arange(half) / m).astype(a.dtype)
        blocks = a.reshape(B, N // m, m)
        u = blocks[:, :, :half]
        v = blocks[:, :, half:] * tw
        s = u + v
        d = u - v
        blocks[:, :, :half] = s
        blocks[:, :, half:] = d
        m *= 2
    return a


def fft_batch(x, inverse=False):
    """Radix-2 FFT of each row of x (length must be a power of two).

    Forward is the unnormalized DFT; inverse includes the 1/N factor so
    fft_batch(fft_batch(x), inverse=True) == x.
    """
    x = np.asarray(x)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    B, N = x.shape
    if N == 0 or N & (N - 1):
        from .errors import ShapeError

        raise ShapeError(f"FFT length must be a power of two, got {N}")
    dtype = np.complex64 if x.dtype == np.complex64 else np.complex128
    a = np.ascontiguousarray(x[:, _bitrev(N)], dtype=dtype)
    if N > 1:
        if BACKEND != "numpy" and HAVE_NUMBA:
            tw = _twiddles(N, dtype)
            _fft_batch_nb(a, np.conj(tw) if inverse else tw)
        else:
            _fft_batch_np(a, 1 if inverse else -1)
    if inverse:
        a /= N
    return a[0] if squeeze else a


# ----------------------------------------------------------------------
# valid 2-D convolution (cross-correlation), channels-last
# x: (B, L, W, Cin)   w: (kh, kw, Cin, K)   b: (K,)   out: (B, Lo, Wo, K)
# ----------------------------------------------------------------------


@njit(cache=True, parallel=True, fastmath=True)
def _conv_fwd_nb(x, w, b):
    B, L, W, C = x.shape
    kh, kw, _, K = w.shape
    Lo = L - kh + 1
    Wo = W - kw + 1
    out = np.empty((B, Lo, Wo, K), dtype=x.dtype)
    for n in prange(B):
        acc = np.empty(K, dtype=x.dtype)
        for i in range(Lo):
            for j in range(Wo):
                for k in range(K):
                    acc[k] = b[k]
                for a in range(kh):
                    for c in range(kw):
                        xv = x[n, i + a, j + c]
                        for ch in range(C):
                            s = xv[ch]
                            wv = w[a, c, ch]
                            for k in range(K):
                                acc[k] += s * wv[k]
                out[n, i, j] = acc
    return out


@njit(cache=True, parallel=True, fastmath=True)
def _conv_dx_nb(dout, w, L, W):
    B, Lo, Wo, K = dout.shape
    kh, kw, C, _ = w.shape
    dx = np.zeros((B, L, W, C), dtype=dout.dtype)
    for n in prange(B):
        for i in range(Lo):
            for j in range(Wo):
                dv = dout[n, i, j]
                for a in range(kh):
                    for c in range(kw):
                        for ch in range(C):
                            wv = w[a, c, ch]
                            s = dout.dtype.type(0.0)
                            for k in range(K):
                                s += dv[k] * wv[k]
                            dx[n, i + a, j + c, ch] += s
    return dx


@njit(cache=True, parallel=True, fastmath=True)
def _conv_dw_nb(x, dout, kh, kw, nthreads):
    B, L, W, C = x.shape
    _, Lo, Wo, K = dout.shape
    parts = np.zeros((nthreads, kh, kw, C, K), dtype=x.dtype)
    bparts = np.zeros((nthreads, K), dtype=x.dtype)
    for t in prange(nthreads):
        for n in range(t, B, nthreads):
            for i in range(Lo):
                for j in range(Wo):
                    dv = dout[n, i, j]
                    for k in range(K):
                        bparts[t, k] += dv[k]
                    for a in range(kh):
                        for c in range(kw):
                            xv = x[n, i + a, j + c]
                            for ch in range(C):
                                s = xv[ch]
                                pv = parts[t, a, c, ch]
                                for k in range(K):
                                    pv[k] += s * dv[k]
    dw = parts[0]
    db = bparts[0]
    for t in range(1, nthreads):
        dw += parts[t]
        db += bparts[t]
    return dw, db


def _tap_view(x, a, c, Lo, Wo):
    """Strided (B, Lo, Wo, C) view of kernel tap (a, c) over all windows."""
    s = x.strides
    return np.lib.stride_tricks.as_strided(
        x[:, a:, c:, :], (x.shape[0], Lo, Wo, x.shape[3]), (s[0], s[1], s[2], s[3])
    )


def _conv_fwd_np(x, w, b):
    kh, kw, C, K = w.shape
    B, L, W, _ = x.shape
    Lo = L - kh + 1
    Wo = W - kw + 1
    out = np.empty((B, Lo, Wo, K), dtype=x.dtype)
    out[...] = b
    flat = out.reshape(-1, K)
    for a in range(kh):
        for c in range(kw):
            v = _tap_view(x, a, c, Lo, Wo).reshape(B * Lo * Wo, C)
            flat += v @ w[a, c]
    return out


def _conv_bwd_np(x, w, dout, need_dx):
    kh, kw, C, K = w.shape
    B, L, W, _ = x.shape
    _, Lo, Wo, _ = dout.shape
    d2 = np.ascontiguousarray(dout).reshape(-1, K)
    dw = np.empty_like(w)
    dx = np.zeros_like(x) if need_dx else None
    for a in range(kh):
        for c in range(kw):
            v = np.ascontiguousarray(_tap_view(x, a, c, Lo, Wo)).reshape(-1, C)
            dw[a, c] = v.T @ d2
            if need_dx:
                dx[:, a : a + Lo, c : c + Wo, :] += (d2 @ w[a, c].T).reshape(
                    B, Lo, Wo, C
                )
    return dx, dw, d2.sum(axis=0)


def conv2d_forward(x, w, b):
    """Valid cross-correlation plus per-map bias."""
    kh, kw, cin, _ = w.shape
    B, L, W, C = x.shape
    if C != cin:
        from .errors import ShapeError

        raise ShapeError(f"input channels {C} != kernel channels {cin}")
    if kh > L or kw > W:
        from .errors import ShapeError

        raise ShapeError(f"kernel ({kh},{kw}) larger than input ({L},{W})")
    if _use_numba(cin):
        return _conv_fwd_nb(np.ascontiguousarray(x), w, b)
    return _conv_fwd_np(x, w, b)


def conv2d_backward(x, w, dout, need_dx=True):
    """Gradients of conv2d_forward w.r.t. input, kernels and bias.

    Returns (dx, dw, db); dx is None when need_dx is False (first layer).
    """
    kh, kw, cin, _ = w.shape
    if _use_numba(cin):
        x = np.ascontiguousarray(x)
        dout = np.ascontiguousarray(dout)
        nthreads = _numba_threads()
        dw, db = _conv_dw_nb(x, dout, kh, kw, nthreads)
        dx = _conv_dx_nb(dout, w, x.shape[1], x.shape[2]) if need_dx else None
        return dx, dw, db
    return _conv_bwd_np(x, w, dout, need_dx)


def _numba_threads():
    if not HAVE_NUMBA:
        return 1
    from numba import get_num_threads

    return get_num_threads()


# ----------------------------------------------------------------------
# fused Adam update (flat parameter buffers, in place)
# ----------------------------------------------------------------------


@njit(cache=True, parallel=True, fastmath=True)
def _adam_nb(p, g, m, v, lr, beta1, beta2, eps, bc1, bc2):
    n = p.size
    for i in prange(n):
        gi = g[i]
        mi = beta1 * m[i] + (1.0 - beta1) * gi
        vi = beta2 * v[i] + (1.0 - beta2) * gi * gi
        m[i] = mi
        v[i] = vi
        mhat = mi / bc1
        vhat = vi / bc2
        p[i] -= lr * mhat / (np.sqrt(vhat) + eps)


def _adam_np(p, g, m, v, lr, beta1, beta2, eps, bc1, bc2):
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def adam_update(p, g, m, v, step, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam step on a flat parameter buffer, in place.

    `step` is the 1-based step counter after incrementing (shared across
    all parameter tensors of a model).
    """
    bc1 = 1.0 - beta1**step
    bc2 = 1.0 - beta2**step
    if BACKEND != "numpy" and HAVE_NUMBA:
        _adam_nb(p, g, m, v, lr, beta1, beta2, eps, bc1, bc2)
    else:
        _adam_np(p, g, m, v, lr, beta1, beta2, eps, bc1, bc2)
