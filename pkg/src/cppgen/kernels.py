"""Hot numeric kernels with numba and pure-numpy implementations.

The two inner loops that dominate runtime — 8-connected component labeling
over full-resolution screenshots and the longest-common-substring DP used
by segment scoring — are provided twice: a numba ``@njit`` version and a
pure-numpy fallback. Selection is controlled by the ``CPPGEN_KERNELS``
environment variable: ``auto`` (default; numba when importable), ``numba``,
or ``numpy``. ``benchmarks/bench_kernels.py`` compares both paths.

Image helpers (grayscale conversion, adaptive mean binarization) are
numpy-only: they are already vectorized and not loop-bound.
"""

from __future__ import annotations

import os
from typing import Callable, Optional

import numpy as np

ENV_VAR = "CPPGEN_KERNELS"

_BACKENDS = ("auto", "numba", "numpy")
_impl_cache: dict[str, dict[str, Callable]] = {}


def _resolve_backend(name: Optional[str] = None) -> str:
    choice = (name or os.environ.get(ENV_VAR, "auto")).lower()
    if choice not in _BACKENDS:
        raise ValueError(f"{ENV_VAR} must be one of {_BACKENDS}, got {choice!r}")
    if choice == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        if choice == "numba":
            raise
        return "numpy"
    return "numba"


def active_backend() -> str:
    """Backend the module-level kernels will dispatch to."""
    return _resolve_backend()


def implementations(backend: Optional[str] = None) -> dict[str, Callable]:
    """Kernel functions pinned to a backend ("numba" or "numpy")."""
    resolved = _resolve_backend(backend)
    if resolved not in _impl_cache:
        if resolved == "numba":
            _impl_cache[resolved] = _build_numba_impls()
        else:
            _impl_cache[resolved] = {
                "component_boxes": _component_boxes_numpy,
                "lcs_length": _lcs_numpy,
            }
    return _impl_cache[resolved]


def component_boxes(mask: np.ndarray, backend: Optional[str] = None) -> np.ndarray:
    """Bounding boxes of the 8-connected components of a binary mask.

    Returns an (n, 4) int64 array of [x, y, w, h] rows sorted by (y, x).
    """
    if mask.ndim != 2:
        raise ValueError(f"mask must be 2-D, got shape {mask.shape}")
    m = np.ascontiguousarray(mask != 0).view(np.uint8)
    boxes = implementations(backend)["component_boxes"](m)
    if len(boxes) == 0:
        return np.empty((0, 4), dtype=np.int64)
    order = np.lexsort((boxes[:, 0], boxes[:, 1]))
    return boxes[order]


def lcs_length(a: str, b: str, backend: Optional[str] = None) -> int:
    """Length of the longest common contiguous substring of two strings."""
    if not a or not b:
        return 0
    av = np.frombuffer(a.encode("utf-32-le"), dtype=np.uint32)
    bv = np.frombuffer(b.encode("utf-32-le"), dtype=np.uint32)
    return int(implementations(backend)["lcs_length"](av, bv))


def to_gray(image: np.ndarray) -> np.ndarray:
    """Luma grayscale (integer ITU-R 601-2 weights) as uint8."""
    if image.ndim == 2:
        return image.astype(np.uint8, copy=False)
    if image.ndim == 3 and image.shape[2] >= 3:
        rgb = image[:, :, :3].astype(np.uint32)
        gray = (299 * rgb[:, :, 0] + 587 * rgb[:, :, 1] + 114 * rgb[:, :, 2]) // 1000
        return gray.astype(np.uint8)
    raise ValueError(f"expected HxW or HxWx3 image, got shape {image.shape}")


def adaptive_mean_binarize(gray: np.ndarray, block: int = 31, offset: float = 10.0) -> np.ndarray:
    """Foreground mask: pixels darker than their local block mean by `offset`.

    The window is `block` x `block` (odd), clipped at image borders; the
    mean is taken over the in-bounds part of the window.
    """
    if block < 3 or block % 2 == 0:
        raise ValueError(f"block must be odd and >= 3, got {block}")
    h, w = gray.shape
    g = gray.astype(np.float64)
    ii = np.zeros((h + 1, w + 1), dtype=np.float64)
    ii[1:, 1:] = g.cumsum(axis=0).cumsum(axis=1)
    r = block // 2
    y0 = np.clip(np.arange(h) - r, 0, h)
    y1 = np.clip(np.arange(h) + r + 1, 0, h)
    x0 = np.clip(np.arange(w) - r, 0, w)
    x1 = np.clip(np.arange(w) + r + 1, 0, w)
    sums = (
        ii[np.ix_(y1, x1)] - ii[np.ix_(y0, x1)] - ii[np.ix_(y1, x0)] + ii[np.ix_(y0, x0)]
    )
    counts = (y1 - y0)[:, None] * (x1 - x0)[None, :]
    mean = sums / counts
    return g <= mean - offset


# ---------------------------------------------------------------------------
# numpy implementations


def _component_boxes_numpy(mask: np.ndarray) -> np.ndarray:
    """Run-based 8-connected labeling: vectorized run extraction per row,
    then union-find over runs (typically far fewer runs than pixels)."""
    h, w = mask.shape
    padded = np.zeros((h, w + 2), dtype=np.int8)
    padded[:, 1:-1] = mask
    d = np.diff(padded, axis=1)
    sy, sx = np.nonzero(d == 1)      # run starts (inclusive column)
    ey, ex = np.nonzero(d == -1)     # run ends (exclusive column)
    n = sy.size
    if n == 0:
        return np.empty((0, 4), dtype=np.int64)
    # np.nonzero is row-major, so starts and ends pair up in order
    starts = sx
    ends = ex
    rows = sy
    parent = np.arange(n)

    def find(i: int) -> int:
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return root

    row_first = np.searchsorted(rows, np.arange(h + 1))
    for y in range(1, h):
        a0, a1 = row_first[y - 1], row_first[y]      # runs in row y-1
        b0, b1 = row_first[y], row_first[y + 1]      # runs in row y
        if a0 == a1 or b0 == b1:
            continue
        i, j = a0, b0
        # 8-connectivity: runs touch when start <= other_end and vice versa
        # with one column of diagonal slack
        while i < a1 and j < b1:
            if starts[j] > ends[i]:
                i += 1
            elif starts[i] > ends[j]:
                j += 1
            else:
                ri, rj = find(i), find(j)
                if ri != rj:
                    if ri < rj:
                        parent[rj] = ri
                    else:
                        parent[ri] = rj
                if ends[i] < ends[j]:
                    i += 1
                else:
                    j += 1
    roots = np.fromiter((find(i) for i in range(n)), count=n, dtype=np.int64)
    uniq, inv = np.unique(roots, return_inverse=True)
    k = uniq.size
    min_x = np.full(k, w, dtype=np.int64)
    max_x = np.zeros(k, dtype=np.int64)
    min_y = np.full(k, h, dtype=np.int64)
    max_y = np.zeros(k, dtype=np.int64)
    np.minimum.at(min_x, inv, starts)
    np.maximum.at(max_x, inv, ends)
    np.minimum.at(min_y, inv, rows)
    np.maximum.at(max_y, inv, rows)
    boxes = np.stack([min_x, min_y, max_x - min_x, max_y - min_y + 1], axis=1)
    return boxes


def _lcs_numpy(a: np.ndarray, b: np.ndarray) -> int:
    m = b.size
    prev = np.zeros(m, dtype=np.int64)
    best = 0
    for i in range(a.size):
        eq = b == a[i]
        cur = np.zeros(m, dtype=np.int64)
        cur[0] = 1 if eq[0] else 0
        cur[1:][eq[1:]] = prev[:-1][eq[1:]] + 1
        row_best = int(cur.max()) if m else 0
        if row_best > best:
            best = row_best
        prev = cur
    return best


# ---------------------------------------------------------------------------
# numba implementations (compiled on first use, cached on disk)


def _build_numba_impls() -> dict[str, Callable]:
    from numba import njit

    @njit(cache=True)
    def _find(parent, i):
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            nxt = parent[i]
            parent[i] = root
            i = nxt
        return root

    @njit(cache=True)
    def _component_boxes(mask):
        h, w = mask.shape
        labels = np.zeros((h, w), dtype=np.int32)
        cap = h * w // 2 + 2
        parent = np.zeros(cap, dtype=np.int32)
        nlab = 0
        for y in range(h):
            for x in range(w):
                if mask[y, x] == 0:
                    continue
                best = 0
                # W, NW, N, NE neighbors
                if x > 0:
                    l = labels[y, x - 1]
                    if l > 0:
                        best = l
                if y > 0:
                    if x > 0:
                        l = labels[y - 1, x - 1]
                        if l > 0 and (best == 0 or l < best):
                            best = l
                    l = labels[y - 1, x]
                    if l > 0 and (best == 0 or l < best):
                        best = l
                    if x + 1 < w:
                        l = labels[y - 1, x + 1]
                        if l > 0 and (best == 0 or l < best):
                            best = l
                if best == 0:
                    nlab += 1
                    parent[nlab] = nlab
                    labels[y, x] = nlab
                else:
                    labels[y, x] = best
                    rb = _find(parent, best)
                    if x > 0:
                        l = labels[y, x - 1]
                        if l > 0:
                            r = _find(parent, l)
                            if r != rb:
                                if r < rb:
                                    parent[rb] = r
                                    rb = r
                                else:
                                    parent[r] = rb
                    if y > 0:
                        if x > 0:
                            l = labels[y - 1, x - 1]
                            if l > 0:
                                r = _find(parent, l)
                                if r != rb:
                                    if r < rb:
                                        parent[rb] = r
                                        rb = r
                                    else:
                                        parent[r] = rb
                        l = labels[y - 1, x]
                        if l > 0:
                            r = _find(parent, l)
                            if r != rb:
                                if r < rb:
                                    parent[rb] = r
                                    rb = r
                                else:
                                    parent[r] = rb
                        if x + 1 < w:
                            l = labels[y - 1, x + 1]
                            if l > 0:
                                r = _find(parent, l)
                                if r != rb:
                                    if r < rb:
                                        parent[rb] = r
                                        rb = r
                                    else:
                                        parent[r] = rb
        if nlab == 0:
            return np.empty((0, 4), dtype=np.int64)
        remap = np.full(nlab + 1, -1, dtype=np.int32)
        k = 0
        for i in range(1, nlab + 1):
            r = _find(parent, i)
            if remap[r] < 0:
                remap[r] = k
                k += 1
        min_x = np.full(k, w, dtype=np.int64)
        max_x = np.full(k, -1, dtype=np.int64)
        min_y = np.full(k, h, dtype=np.int64)
        max_y = np.full(k, -1, dtype=np.int64)
        for y in range(h):
            for x in range(w):
                l = labels[y, x]
                if l == 0:
                    continue
                c = remap[_find(parent, l)]
                if x < min_x[c]:
                    min_x[c] = x
                if x > max_x[c]:
                    max_x[c] = x
                if y < min_y[c]:
                    min_y[c] = y
                if y > max_y[c]:
                    max_y[c] = y
        boxes = np.empty((k, 4), dtype=np.int64)
        for c in range(k):
            boxes[c, 0] = min_x[c]
            boxes[c, 1] = min_y[c]
            boxes[c, 2] = max_x[c] - min_x[c] + 1
            boxes[c, 3] = max_y[c] - min_y[c] + 1
        return boxes

    @njit(cache=True)
    def _lcs(a, b):
        n = a.size
        m = b.size
        prev = np.zeros(m + 1, dtype=np.int64)
        cur = np.zeros(m + 1, dtype=np.int64)
        best = 0
        for i in range(n):
            ai = a[i]
            for j in range(m):
                if b[j] == ai:
                    v = prev[j] + 1
                    cur[j + 1] = v
                    if v > best:
                        best = v
                else:
                    cur[j + 1] = 0
            tmp = prev
            prev = cur
            cur = tmp
        return best

    return {"component_boxes": _component_boxes, "lcs_length": _lcs}
