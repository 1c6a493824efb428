"""Hot loops of the simulator, each in a numba and a vectorized-numpy flavour.

Random numbers come from a counter-based splitmix64 hash: draw ``c`` of path ``i``
is ``mix64(key_i + (c + 1) * GOLDEN)`` with ``key_i = mix64(seed_key + (i + 1) * GOLDEN)``.
The stream of a path depends only on (seed, path index), so results do not depend
on chunking or thread count.  The two backends visit identical grid states; the
discount weights may differ in the last bits.

Walk states are integer grid indices k (position k*dx).  Two path schemes:

* ``step``: the plain skew random walk, one +-1 step per dx^2 of time.
* ``jump``: the same walk observed only when it first moves m sites away, where m
  is the distance to the nearest special site (the origin or a stop-set endpoint).
  By symmetry the exit side is a fair coin independent of the exit time, and the
  discount over the excursion is replaced by its conditional expectation
  1/cosh(m*lam) with cosh(lam) = exp(r dx^2).  Left (right) of every special site
  the walk moves deterministically to the nearest one with weight exp(-lam*m).
"""

from __future__ import annotations

import math

import numpy as np

from .._backend import njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_TWO53 = 1.0 / 9007199254740992.0

STOPPED = 0
TRUNCATED = 1

GENERATOR = "splitmix64-counter"


def _mix64_py(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


_mix64 = njit(_mix64_py)


def seed_key(seed: int) -> np.uint64:
    """Stream key for a user seed (any integer, reduced mod 2^64)."""
    return _mix64_py(np.array([int(seed) % 2**64], dtype=np.uint64))[0]


@njit
def _path_key(key, path):
    return _mix64(key + np.uint64(path + 1) * GOLDEN)


@njit
def _uniform(pkey, counter):
    z = _mix64(pkey + (counter + _ONE) * GOLDEN)
    return np.float64(z >> _S11) * _TWO53


def path_keys_np(key, start: int, n: int) -> np.ndarray:
    idx = np.arange(start + 1, start + n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix64_py(np.uint64(key) + idx * GOLDEN)


def uniforms_np(pkeys: np.ndarray, counters: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = _mix64_py(pkeys + (counters + _ONE) * GOLDEN)
    return (z >> _S11).astype(np.float64) * _TWO53


# ---------------------------------------------------------------------------
# stopping walk


@njit
def _in_stop(k, lo, hi):
    for j in range(lo.size):
        if lo[j] <= k <= hi[j]:
            return True
    return False


@njit
def walk_stop_jump_nb(k0, start, n, beta, lo, hi, specials, s, lam, w_min, max_iter, key, out_k, out_w, out_status):
    n_sp = specials.size
    for i in range(n):
        pkey = _path_key(key, start + i)
        ctr = np.uint64(0)
        k = k0
        w = 1.0
        status = TRUNCATED
        for _ in range(max_iter):
            if _in_stop(k, lo, hi):
                status = STOPPED
                break
            if w < w_min:
                break
            if k == 0:
                u = _uniform(pkey, ctr)
                ctr += _ONE
                k = 1 if u < beta else -1
                w *= s
                continue
            j = np.searchsorted(specials, k)
            if j == 0:
                m = specials[0] - k
                k = specials[0]
                w *= math.exp(-lam * m)
            elif j == n_sp:
                m = k - specials[n_sp - 1]
                k = specials[n_sp - 1]
                w *= math.exp(-lam * m)
            else:
                m = min(k - specials[j - 1], specials[j] - k)
                u = _uniform(pkey, ctr)
                ctr += _ONE
                k = k + m if u < 0.5 else k - m
                w *= 1.0 / math.cosh(m * lam)
        out_k[i] = k
        out_w[i] = w
        out_status[i] = status


def _in_stop_np(k, lo, hi):
    hit = np.zeros(k.shape, dtype=bool)
    for a, b in zip(lo, hi):
        hit |= (k >= a) & (k <= b)
    return hit


def walk_stop_jump_np(k0, start, n, beta, lo, hi, specials, s, lam, w_min, max_iter, key, out_k, out_w, out_status):
    pkeys = path_keys_np(key, start, n)
    ctr = np.zeros(n, dtype=np.uint64)
    k = np.full(n, k0, dtype=np.int64)
    w = np.ones(n)
    status = np.full(n, TRUNCATED, dtype=np.int8)
    act = np.arange(n)
    n_sp = specials.size
    with np.errstate(over="ignore", under="ignore"):
        for _ in range(max_iter):
            if act.size == 0:
                break
            ka = k[act]
            stop = _in_stop_np(ka, lo, hi)
            status[act[stop]] = STOPPED
            act = act[~stop & (w[act] >= w_min)]
            if act.size == 0:
                break
            ka = k[act]
            wa = w[act]
            at0 = ka == 0
            u = uniforms_np(pkeys[act], ctr[act])
            j = np.searchsorted(specials, ka)
            left = specials[np.maximum(j - 1, 0)]
            right = specials[np.minimum(j, n_sp - 1)]
            m = np.where(j == 0, right - ka, np.where(j == n_sp, ka - left, np.minimum(ka - left, right - ka)))
            m = np.where(at0, 1, m)
            coin = np.where(at0, u < beta, u < 0.5)
            free = (j > 0) & (j < n_sp) & ~at0
            step = np.where(coin, m, -m)
            step = np.where(j == 0, m, np.where(j == n_sp, -m, step))
            step = np.where(at0, np.where(coin, 1, -1), step)
            fac = np.where(free, 1.0 / np.cosh(m * lam), np.exp(-lam * m))
            fac = np.where(at0, s, fac)
            k[act] = ka + step
            w[act] = wa * fac
            ctr[act] += (at0 | free).astype(np.uint64)
    out_k[:] = k
    out_w[:] = w
    out_status[:] = status


@njit
def walk_stop_step_nb(k0, start, n, beta, lo, hi, max_steps, key, out_k, out_steps, out_status):
    for i in range(n):
        pkey = _path_key(key, start + i)
        ctr = np.uint64(0)
        k = k0
        status = TRUNCATED
        steps = 0
        while steps <= max_steps:
            if _in_stop(k, lo, hi):
                status = STOPPED
                break
            if steps == max_steps:
                break
            u = _uniform(pkey, ctr)
            ctr += _ONE
            if k == 0:
                k = 1 if u < beta else -1
            else:
                k = k + 1 if u < 0.5 else k - 1
            steps += 1
        out_k[i] = k
        out_steps[i] = steps
        out_status[i] = status


def walk_stop_step_np(k0, start, n, beta, lo, hi, max_steps, key, out_k, out_steps, out_status):
    pkeys = path_keys_np(key, start, n)
    k = np.full(n, k0, dtype=np.int64)
    steps = np.zeros(n, dtype=np.int64)
    status = np.full(n, TRUNCATED, dtype=np.int8)
    act = np.arange(n)
    for step in range(max_steps + 1):
        stop = _in_stop_np(k[act], lo, hi)
        status[act[stop]] = STOPPED
        act = act[~stop]
        if act.size == 0 or step == max_steps:
            break
        ka = k[act]
        u = uniforms_np(pkeys[act], np.full(act.size, step, dtype=np.uint64))
        up = np.where(ka == 0, u < beta, u < 0.5)
        k[act] = ka + np.where(up, 1, -1)
        steps[act] += 1
    out_k[:] = k
    out_steps[:] = steps
    out_status[:] = status


# ---------------------------------------------------------------------------
# fixed-horizon walk (marginals)


@njit
def walk_fixed_nb(k0, start, n, beta, n_steps, key, out_k):
    for i in range(n):
        pkey = _path_key(key, start + i)
        k = k0
        for c in range(n_steps):
            u = _uniform(pkey, np.uint64(c))
            if k == 0:
                k = 1 if u < beta else -1
            else:
                k = k + 1 if u < 0.5 else k - 1
        out_k[i] = k


def walk_fixed_np(k0, start, n, beta, n_steps, key, out_k):
    pkeys = path_keys_np(key, start, n)
    k = np.full(n, k0, dtype=np.int64)
    for c in range(n_steps):
        u = uniforms_np(pkeys, np.full(n, c, dtype=np.uint64))
        up = np.where(k == 0, u < beta, u < 0.5)
        k += np.where(up, 1, -1)
    out_k[:] = k


# ---------------------------------------------------------------------------
# inverse transition CDF


@njit
def _ncdf(z):
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


@njit
def _cdf_scalar(y, x, t, beta):
    st = math.sqrt(t)
    a = abs(x)
    k = 2.0 * beta - 1.0
    if y <= 0.0:
        return _ncdf((y - x) / st) - k * _ncdf((y - a) / st)
    return 1.0 - (_ncdf((x - y) / st) + k * _ncdf(-(a + y) / st))


@njit
def invert_cdf_nb(u, x, t, beta, out):
    span = 40.0 * math.sqrt(t) + abs(x)
    for i in range(u.size):
        lo = x - span
        hi = x + span
        target = u[i]
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid == lo or mid == hi:
                break
            if _cdf_scalar(mid, x, t, beta) < target:
                lo = mid
            else:
                hi = mid
        out[i] = 0.5 * (lo + hi)


def invert_cdf_np(u, x, t, beta, out):
    from scipy.special import ndtr

    st = math.sqrt(t)
    a = abs(x)
    k = 2.0 * beta - 1.0
    span = 40.0 * st + a
    lo = np.full(u.size, x - span)
    hi = np.full(u.size, x + span)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.all((mid == lo) | (mid == hi)):
            break
        below = ndtr((mid - x) / st) - k * ndtr((mid - a) / st)
        above = 1.0 - (ndtr((x - mid) / st) + k * ndtr(-(a + mid) / st))
        F = np.where(mid <= 0.0, below, above)
        go_right = F < u
        lo = np.where(go_right, mid, lo)
        hi = np.where(go_right, hi, mid)
    out[:] = 0.5 * (lo + hi)
