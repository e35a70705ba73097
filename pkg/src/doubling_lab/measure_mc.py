"""Seeded Monte Carlo estimation of set measures and product lower bounds.

All estimators draw Haar samples from the counter-based stream in
:mod:`doubling_lab.rotations`: sample ``k`` of a seed is a pure function of
``(seed, k)`` and indicator counts are integers, so results are bit-identical
for a fixed ``(seed, samples)`` no matter how the index range is chunked
across workers.  The fixed chunk size is 65536.

The product lower bound replaces ``A`` by a finite witness set ``F`` drawn
inside it: the union of translates ``a B`` over ``a`` in ``F`` is an exact
subset of ``A B``, so estimating its measure gives an unbiased estimate of
a lower-bounding set's measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List

import numpy as np

from . import sets as st
from .rotations import (
    Rotation,
    derive_seed,
    haar_quaternions,
    quat_conj,
    quat_mul,
    quat_rotate,
)

CHUNK = 65536

REJECTION_FLOOR = 1e-4
_FLOOR_MIN_SCAN = 200_000
_MAX_CONSECUTIVE_REJECTS = 1_000_000


class RejectionBudgetError(RuntimeError):
    """Raised when a set is too small for rejection sampling."""


@dataclass(frozen=True)
class MeasureEstimate:
    value: float
    stderr: float
    samples: int
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"estimate out of [0, 1]: {self.value!r}")


@dataclass(frozen=True)
class WitnessSet:
    """Rotations certified to lie in a set (each passed the exact membership test)."""

    witnesses: List[Rotation]


def _indicator_estimate(hits: int, samples: int, seed: int) -> MeasureEstimate:
    v = hits / samples
    return MeasureEstimate(value=v, stderr=math.sqrt(v * (1.0 - v) / samples), samples=samples, seed=seed)


def estimate_measure(spec: st.SetSpec, samples: int, seed: int) -> MeasureEstimate:
    """Mean of the membership indicator over ``samples`` Haar draws."""
    samples = int(samples)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    hits = 0
    for start in range(0, samples, CHUNK):
        n = min(CHUNK, samples - start)
        q = haar_quaternions(seed, n, start)
        hits += int(np.count_nonzero(st.membership_many(spec, q)))
    return _indicator_estimate(hits, samples, seed)


def sample_in_set(spec: st.SetSpec, count: int, seed: int) -> List[Rotation]:
    """Haar samples conditioned on the set, by rejection in stream order.

    Aborts when the set is too small: either the running acceptance rate
    drops below 1e-4 after 200k scanned draws, or 1e6 consecutive draws
    are rejected.
    """
    count = int(count)
    if count < 1:
        raise ValueError("count must be >= 1")
    accepted: List[Rotation] = []
    scanned = 0
    hits = 0
    run = 0  # rejections since the last acceptance
    while True:
        q = haar_quaternions(seed, CHUNK, scanned)
        idx = np.nonzero(st.membership_many(spec, q))[0]
        if idx.size == 0:
            longest = run + CHUNK
            run += CHUNK
        else:
            gaps = np.diff(idx) - 1
            longest = max(run + int(idx[0]), int(gaps.max()) if gaps.size else 0)
            run = CHUNK - 1 - int(idx[-1])
            for i in idx[: count - len(accepted)]:
                accepted.append(Rotation(*(float(c) for c in q[i])))
        scanned += CHUNK
        hits += idx.size
        acceptance = hits / scanned
        # the acceptance floor is a property of the set, so it is checked even
        # when few samples were requested; the floor window reuses the stream
        if longest >= _MAX_CONSECUTIVE_REJECTS or (
            scanned >= _FLOOR_MIN_SCAN and acceptance < REJECTION_FLOOR
        ):
            raise RejectionBudgetError(
                f"set too small for rejection sampling: acceptance estimate "
                f"{acceptance:.3g} after {scanned} draws (floor {REJECTION_FLOOR:g})"
            )
        if len(accepted) >= count and scanned >= _FLOOR_MIN_SCAN:
            return accepted


def _covered_by_witnesses(spec: st.SetSpec, witness_quats: np.ndarray, q: np.ndarray) -> int:
    """Count samples g with some witness a satisfying a^-1 g in spec.

    Single-leaf specs reduce to dot-product tests (for a cap, the angle of
    (a^-1 g) at the axis u equals the angle between a(u) and g(u)); general
    trees fall back to composing and evaluating.  Witnesses are scanned with
    the undecided samples only, so coverage decided early exits the loop.
    """
    undecided = np.arange(q.shape[0])
    if isinstance(spec, st.Cap):
        axis = np.array(spec.axis)
        threshold = math.cos(spec.theta)
        witness_axes = quat_rotate(witness_quats, axis)
        sample_axes = quat_rotate(q, axis)
        for wa in witness_axes:
            inside = (sample_axes[undecided] @ wa) > threshold
            undecided = undecided[~inside]
            if undecided.size == 0:
                break
    elif isinstance(spec, st.Ball):
        threshold = math.cos(spec.radius / 2.0)
        for wq in witness_quats:
            inside = np.abs(q[undecided] @ wq) > threshold
            undecided = undecided[~inside]
            if undecided.size == 0:
                break
    else:
        for wq in witness_quats:
            moved = quat_mul(quat_conj(wq[None, :]), q[undecided])
            inside = st.membership_many(spec, moved)
            undecided = undecided[~inside]
            if undecided.size == 0:
                break
    return q.shape[0] - undecided.size


def estimate_product_lower(
    a_spec: st.SetSpec,
    b_spec: st.SetSpec,
    witness_count: int,
    samples: int,
    seed: int,
) -> MeasureEstimate:
    """Unbiased estimate of mu(union of a*B over witnesses a in A) <= mu(A*B).

    Witnesses are drawn by rejection from stream ``derive_seed(seed, 1)``;
    the estimation stream is ``derive_seed(seed, 2)``.
    """
    if int(witness_count) < 1:
        raise ValueError("witness_count must be >= 1")
    samples = int(samples)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    witnesses = sample_in_set(a_spec, int(witness_count), derive_seed(seed, 1))
    witness_quats = np.array([list(w) for w in witnesses])
    sample_seed = derive_seed(seed, 2)
    hits = 0
    for start in range(0, samples, CHUNK):
        n = min(CHUNK, samples - start)
        q = haar_quaternions(sample_seed, n, start)
        hits += _covered_by_witnesses(b_spec, witness_quats, q)
    return _indicator_estimate(hits, samples, seed)
