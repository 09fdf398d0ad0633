"""Invertible explanation spaces over univariate series.

Every space is a bijection F between a length-N series and a real vector z,
with a *linear* inverse F^{-1} available as a dense matrix A applied in the
row-vector convention ``x = z @ A``.  The six kinds:

* ``time``            identity, dim(z) = N
* ``frequency``       real DFT packed Hermitian-unique, dim(z) = N
* ``time_frequency``  per-frame real DFT over non-overlapping frames, dim = N
* ``min_zero``        shift so min is 0, store the old min last, dim = N+1
* ``difference``      first-order differences, inverse is cumsum, dim = N
* ``decomposition``   singular-spectrum analysis into K additive components,
                      dim = K*N; the inverse simply sums the blocks

Frequency packing: for spectrum c_k = sum_n x_n e^{-2*pi*i*k*n/N} the packed
vector is [Re c_0, Re c_1, Im c_1, Re c_2, Im c_2, ...]; Im c_0 is identically
zero and omitted, and for even N the final entry is Re c_{N/2} (whose
imaginary part is also identically zero).  This makes F a linear bijection of
R^N, which gradient-based attribution needs.  The inverse applies the 1/N
(per-frame: 1/w) rescaling.
"""
from __future__ import annotations

from functools import cached_property
from typing import Sequence

import numpy as np

from .data import Series
from .errors import InvalidParamsError, LengthMismatchError, SpaceMismatchError

KINDS = (
    "time",
    "frequency",
    "time_frequency",
    "min_zero",
    "difference",
    "decomposition",
)


def _as_vector(x, expected_len: int, what: str) -> np.ndarray:
    v = x.values if isinstance(x, Series) else np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size != expected_len:
        raise LengthMismatchError(
            f"{what} has length {v.size}, expected {expected_len}"
        )
    return v


def pack_spectrum(c: np.ndarray, n: int) -> np.ndarray:
    """Pack an rfft half-spectrum (length n//2+1) into n reals."""
    out = np.empty(n)
    out[0] = c[0].real
    half = (n - 1) // 2
    if half > 0:
        out[1 : 1 + 2 * half : 2] = c[1 : half + 1].real
        out[2 : 2 + 2 * half : 2] = c[1 : half + 1].imag
    if n % 2 == 0:
        out[-1] = c[n // 2].real
    return out


def unpack_spectrum(z: np.ndarray, n: int) -> np.ndarray:
    """Invert :func:`pack_spectrum` back to the complex half-spectrum."""
    c = np.zeros(n // 2 + 1, dtype=np.complex128)
    c[0] = z[0]
    half = (n - 1) // 2
    if half > 0:
        c[1 : half + 1] = z[1 : 1 + 2 * half : 2] + 1j * z[2 : 2 + 2 * half : 2]
    if n % 2 == 0:
        c[n // 2] = z[-1]
    return c


def _spectrum_labels(n: int, prefix: str = "") -> list[str]:
    labels = [f"{prefix}f0:Re"]
    for k in range(1, (n - 1) // 2 + 1):
        labels += [f"{prefix}f{k}:Re", f"{prefix}f{k}:Im"]
    if n % 2 == 0:
        labels.append(f"{prefix}f{n // 2}:Re")
    return labels


def _inverse_dft_matrix(n: int) -> np.ndarray:
    """Rows of A map packed coefficients back to time samples, x = z @ A."""
    t = np.arange(n)
    rows = [np.full(n, 1.0 / n)]
    for k in range(1, (n - 1) // 2 + 1):
        rows.append(2.0 * np.cos(2 * np.pi * k * t / n) / n)
        rows.append(-2.0 * np.sin(2 * np.pi * k * t / n) / n)
    if n % 2 == 0:
        rows.append(np.where(t % 2 == 0, 1.0, -1.0) / n)
    return np.stack(rows)


class Space:
    """Base class; concrete spaces implement the four transform hooks."""

    kind: str = ""

    def __init__(self, input_len: int):
        if input_len < 2:
            raise InvalidParamsError("input_len must be >= 2")
        self.input_len = int(input_len)

    @property
    def dim(self) -> int:
        """Number of coordinates of z."""
        raise NotImplementedError

    @property
    def params(self) -> dict:
        return {}

    def forward(self, x) -> np.ndarray:
        raise NotImplementedError

    def inverse(self, z) -> np.ndarray:
        raise NotImplementedError

    @cached_property
    def inverse_matrix(self) -> np.ndarray:
        """Dense A with x = z @ A; shape (dim, input_len)."""
        return self._build_inverse_matrix()

    def _build_inverse_matrix(self) -> np.ndarray:
        raise NotImplementedError

    def bin_labels(self) -> list[str]:
        raise NotImplementedError

    def to_config(self) -> dict:
        return {"kind": self.kind, "input_len": self.input_len, "params": self.params}

    def __repr__(self):
        ps = ", ".join(f"{k}={v}" for k, v in self.params.items())
        return f"{type(self).__name__}(N={self.input_len}{', ' + ps if ps else ''})"


class TimeSpace(Space):
    kind = "time"

    @property
    def dim(self) -> int:
        return self.input_len

    def forward(self, x) -> np.ndarray:
        return _as_vector(x, self.input_len, "series").copy()

    def inverse(self, z) -> np.ndarray:
        return _as_vector(z, self.dim, "z").copy()

    def _build_inverse_matrix(self) -> np.ndarray:
        return np.eye(self.input_len)

    def bin_labels(self) -> list[str]:
        return [f"t{i}" for i in range(self.input_len)]


class FrequencySpace(Space):
    kind = "frequency"

    @property
    def dim(self) -> int:
        return self.input_len

    def forward(self, x) -> np.ndarray:
        v = _as_vector(x, self.input_len, "series")
        return pack_spectrum(np.fft.rfft(v), self.input_len)

    def inverse(self, z) -> np.ndarray:
        v = _as_vector(z, self.dim, "z")
        return np.fft.irfft(unpack_spectrum(v, self.input_len), n=self.input_len)

    def _build_inverse_matrix(self) -> np.ndarray:
        return _inverse_dft_matrix(self.input_len)

    def bin_labels(self) -> list[str]:
        return _spectrum_labels(self.input_len)


class TimeFrequencySpace(Space):
    kind = "time_frequency"

    def __init__(self, input_len: int, frame_len: int):
        super().__init__(input_len)
        frame_len = int(frame_len)
        if frame_len < 2 or input_len % frame_len != 0:
            raise InvalidParamsError(
                f"frame_len={frame_len} must be >= 2 and divide input_len={input_len}"
            )
        self.frame_len = frame_len
        self.n_frames = input_len // frame_len

    @property
    def dim(self) -> int:
        return self.input_len

    @property
    def params(self) -> dict:
        return {"frame_len": self.frame_len}

    def forward(self, x) -> np.ndarray:
        v = _as_vector(x, self.input_len, "series")
        frames = v.reshape(self.n_frames, self.frame_len)
        return np.concatenate(
            [pack_spectrum(np.fft.rfft(f), self.frame_len) for f in frames]
        )

    def inverse(self, z) -> np.ndarray:
        v = _as_vector(z, self.dim, "z")
        frames = v.reshape(self.n_frames, self.frame_len)
        return np.concatenate(
            [
                np.fft.irfft(unpack_spectrum(f, self.frame_len), n=self.frame_len)
                for f in frames
            ]
        )

    def _build_inverse_matrix(self) -> np.ndarray:
        block = _inverse_dft_matrix(self.frame_len)
        out = np.zeros((self.input_len, self.input_len))
        for j in range(self.n_frames):
            lo = j * self.frame_len
            out[lo : lo + self.frame_len, lo : lo + self.frame_len] = block
        return out

    def bin_labels(self) -> list[str]:
        labels = []
        for j in range(self.n_frames):
            labels += _spectrum_labels(self.frame_len, prefix=f"fr{j}:")
        return labels


class MinZeroSpace(Space):
    """Shift so the minimum is zero; the old minimum rides in an extra slot."""

    kind = "min_zero"

    @property
    def dim(self) -> int:
        return self.input_len + 1

    def forward(self, x) -> np.ndarray:
        v = _as_vector(x, self.input_len, "series")
        m = v.min()
        return np.concatenate([v - m, [m]])

    def inverse(self, z) -> np.ndarray:
        v = _as_vector(z, self.dim, "z")
        return v[:-1] + v[-1]

    def _build_inverse_matrix(self) -> np.ndarray:
        # identity stacked on a final all-ones row
        out = np.zeros((self.input_len + 1, self.input_len))
        out[: self.input_len] = np.eye(self.input_len)
        out[-1] = 1.0
        return out

    def bin_labels(self) -> list[str]:
        return [f"t{i}" for i in range(self.input_len)] + ["min-placeholder"]


class DifferenceSpace(Space):
    kind = "difference"

    @property
    def dim(self) -> int:
        return self.input_len

    def forward(self, x) -> np.ndarray:
        v = _as_vector(x, self.input_len, "series")
        return np.diff(v, prepend=0.0)

    def inverse(self, z) -> np.ndarray:
        v = _as_vector(z, self.dim, "z")
        return np.cumsum(v)

    def _build_inverse_matrix(self) -> np.ndarray:
        return np.triu(np.ones((self.input_len, self.input_len)))

    def bin_labels(self) -> list[str]:
        return [f"d{i}" for i in range(self.input_len)]


def hankelize(mat: np.ndarray, n: int) -> np.ndarray:
    """Average a trajectory-shaped matrix over its anti-diagonals."""
    rows, cols = mat.shape
    idx = np.add.outer(np.arange(rows), np.arange(cols)).ravel()
    sums = np.bincount(idx, weights=mat.ravel(), minlength=n)
    counts = np.bincount(idx, minlength=n)
    return sums / counts


class DecompositionSpace(Space):
    """Singular-spectrum analysis with window L into K additive components.

    Grouping: each of the K-1 leading eigentriples forms its own component;
    component K collects all remaining eigentriples.  The components sum
    exactly to the input, so the inverse is plain block summation.
    """

    kind = "decomposition"

    def __init__(self, input_len: int, window: int, components: int):
        super().__init__(input_len)
        window, components = int(window), int(components)
        if not 2 <= window <= input_len // 2:
            raise InvalidParamsError(
                f"window={window} must satisfy 2 <= L <= N/2 (N={input_len})"
            )
        if not 1 <= components <= window:
            raise InvalidParamsError(
                f"components={components} must satisfy 1 <= K <= L (L={window})"
            )
        self.window = window
        self.components = components

    @property
    def dim(self) -> int:
        return self.components * self.input_len

    @property
    def params(self) -> dict:
        return {"window": self.window, "components": self.components}

    def forward(self, x) -> np.ndarray:
        v = _as_vector(x, self.input_len, "series")
        n, L, K = self.input_len, self.window, self.components
        cols = n - L + 1
        traj = np.lib.stride_tricks.sliding_window_view(v, L).T  # L x cols
        u, s, vt = np.linalg.svd(traj, full_matrices=False)
        elementary = s[:, None, None] * np.einsum("ik,kj->kij", u, vt)
        blocks = []
        for k in range(K - 1):
            blocks.append(hankelize(elementary[k], n))
        blocks.append(hankelize(elementary[K - 1 :].sum(axis=0), n))
        return np.concatenate(blocks)

    def inverse(self, z) -> np.ndarray:
        v = _as_vector(z, self.dim, "z")
        return v.reshape(self.components, self.input_len).sum(axis=0)

    def _build_inverse_matrix(self) -> np.ndarray:
        return np.tile(np.eye(self.input_len), (self.components, 1))

    def bin_labels(self) -> list[str]:
        return [
            f"c{k}:t{i}"
            for k in range(self.components)
            for i in range(self.input_len)
        ]


_SPACE_CLASSES = {
    "time": TimeSpace,
    "frequency": FrequencySpace,
    "time_frequency": TimeFrequencySpace,
    "min_zero": MinZeroSpace,
    "difference": DifferenceSpace,
    "decomposition": DecompositionSpace,
}


def make_space(kind: str, input_len: int, **params) -> Space:
    """Construct one of the six spaces; raises InvalidParamsError on bad input."""
    if kind not in _SPACE_CLASSES:
        raise InvalidParamsError(f"unknown space kind {kind!r}")
    try:
        return _SPACE_CLASSES[kind](input_len, **params)
    except TypeError as exc:
        raise InvalidParamsError(f"bad params for {kind}: {exc}") from exc


def space_from_config(config: dict) -> Space:
    """Build a space from {"kind": ..., "input_len": N, "params": {...}}."""
    if "kind" not in config or "input_len" not in config:
        raise InvalidParamsError("space config needs 'kind' and 'input_len'")
    return make_space(
        config["kind"], int(config["input_len"]), **config.get("params", {})
    )


def require_kind(space: Space, kind: str) -> None:
    if space.kind != kind:
        raise SpaceMismatchError(f"expected a {kind} space, got {space.kind}")
