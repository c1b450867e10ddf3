"""Counter-based shared randomness.

Every variate is a pure function of ``(master_seed, tags)``.  The tags are a
tuple of small non-negative integers (experiment, trial, step, row, symbol,
...) that address one number, so any party holding the master seed can
rebuild exactly the same exponential races without talking to anybody else,
and trials can be evaluated in any order.

The construction is a chain of splitmix64 finalizers::

    h0     = mix(master + GOLDEN)
    h[n+1] = mix(h[n] ^ mix(tag[n] + GOLDEN))
    u      = ((h >> 12) + 0.5) / 2**52

which maps every key to the open interval (0, 1); the smallest possible
value is 2**-53, so ``-log(u)`` never exceeds about 36.7.

The same primitives are exposed in three forms that agree bit for bit:
scalar (:func:`derive_uniform`), broadcast numpy arrays
(:func:`uniform_array`) and numba-compiled helpers (:func:`mix64`,
:func:`fold`, :func:`to_unit`) for use inside kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S12 = np.uint64(12)
_UNIT = 2.0**-52
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SeedContext:
    """Address of one stream of shared randomness."""

    master_seed: int
    tags: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= int(self.master_seed) <= _MASK64:
            raise ValueError("master_seed must fit in 64 unsigned bits")
        if any(int(t) < 0 for t in self.tags):
            raise ValueError("tags must be non-negative")

    def child(self, *tags: int) -> "SeedContext":
        return SeedContext(self.master_seed, self.tags + tuple(int(t) for t in tags))


def _mix64_py(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


mix64 = njit(cache=True)(_mix64_py)


@njit(cache=True)
def fold(h, tag):
    """Absorb one tag into a running key (numba scalar form)."""
    return mix64(np.uint64(h) ^ mix64(np.uint64(tag) + GOLDEN))


@njit(cache=True)
def to_unit(h):
    return (np.float64(np.uint64(h) >> _S12) + 0.5) * _UNIT


@njit(cache=True)
def seed_key(master_seed):
    return mix64(np.uint64(master_seed) + GOLDEN)


def _key_array(master_seed: int, tags) -> np.ndarray:
    with np.errstate(over="ignore"):
        h = _mix64_py(np.asarray(master_seed, dtype=np.uint64) + GOLDEN)
        for t in tags:
            t = np.asarray(t)
            if t.dtype.kind == "i" and t.size and t.min() < 0:
                raise ValueError("tags must be non-negative")
            t = t.astype(np.uint64)
            h = _mix64_py(h ^ _mix64_py(t + GOLDEN))
    return h


def context_key(ctx: SeedContext) -> np.uint64:
    """The 64-bit key addressed by ``ctx``; pass it to numba kernels."""
    return np.uint64(_key_array(ctx.master_seed, ctx.tags))


def _unit(h: np.ndarray) -> np.ndarray:
    return ((h >> _S12).astype(np.float64) + 0.5) * _UNIT


def derive_uniform(ctx: SeedContext) -> float:
    """Uniform variate on (0, 1), deterministic in ``ctx``."""
    return float(_unit(_key_array(ctx.master_seed, ctx.tags)))


def exp_variate(ctx: SeedContext) -> float:
    """Exp(1) variate ``-ln U`` for the uniform addressed by ``ctx``."""
    return -math.log(derive_uniform(ctx))


def uniform_array(ctx: SeedContext, *tag_axes) -> np.ndarray:
    """Uniforms for ``ctx.child(*tags)`` over broadcast integer tag arrays.

    ``uniform_array(ctx, trials[:, None], np.arange(n)[None, :])[a, b]`` equals
    ``derive_uniform(ctx.child(trials[a], b))``.  Tag axes are absorbed left
    to right, so put the small axes last to keep the work proportional to the
    output size.
    """
    return _unit(_key_array(ctx.master_seed, tuple(ctx.tags) + tag_axes))


def exp_array(ctx: SeedContext, *tag_axes) -> np.ndarray:
    return -np.log(uniform_array(ctx, *tag_axes))


def normal_array(ctx: SeedContext, *tag_axes) -> np.ndarray:
    """Standard normals by Box-Muller; consumes tags ``(..., 0)`` and ``(..., 1)``."""
    shape_tags = tuple(np.asarray(t)[..., None] for t in tag_axes)
    u = uniform_array(ctx, *shape_tags, np.arange(2))
    return np.sqrt(-2.0 * np.log(u[..., 0])) * np.cos(2.0 * np.pi * u[..., 1])


@njit(cache=True)
def normal_from_key(h):
    """Box-Muller standard normal from the key of a stream (numba form).

    Matches :func:`normal_array` for the same stream up to the last-ulp
    behaviour of ``log``/``cos`` in the two math libraries.
    """
    u1 = to_unit(fold(h, 0))
    u2 = to_unit(fold(h, 1))
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
