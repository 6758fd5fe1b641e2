"""Random polygonal partitions, jump heights and the composed coefficients.

The partition sampler draws four uniforms on (0.2, 0.8), one per side of
the unit square, and connects opposite sides with straight chords.  The two
chords always cross in the interior and cut the square into four convex
quadrangles.  Jump heights are attached per region so that neighbouring
regions never share a law, and the diffusion coefficient is assembled as

    a(x) = a_bar(x) + phi(W(x)) + P(x),

with the advection coefficient a pointwise clamp of ``b1(x) * a(x)``
against ``b2(x)``.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .random_field import GridField, interpolate
from .streams import RandomStream

__all__ = [
    "Partition",
    "JumpHeights",
    "BMap",
    "CoefficientSample",
    "sample_partition_quadrangles",
    "sample_jump_heights",
    "locate",
    "eval_a",
    "eval_b",
    "partition_to_text",
    "partition_from_text",
]

# jump-height laws by region index: regions 0 and 2 are diagonally opposite,
# so no two regions sharing an interface get the same law
DEFAULT_JUMP_LAWS: tuple[tuple[float, float], ...] = ((0.0, 1.0), (5.0, 6.0), (0.0, 1.0), (10.0, 11.0))


def _polygon_area(poly: np.ndarray) -> float:
    x = poly[:, 0]
    y = poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


@dataclass(frozen=True)
class Partition:
    """Convex polygonal cover of the unit square with internal interfaces.

    ``regions`` are counter-clockwise vertex arrays; ``interface_segments``
    are the internal boundary segments.  For two-chord partitions the chords
    are kept for O(1) point location.
    """

    regions: tuple[np.ndarray, ...]
    interface_segments: tuple[np.ndarray, ...]
    chords: tuple[np.ndarray, np.ndarray] | None = None

    def __post_init__(self):
        areas = [_polygon_area(r) for r in self.regions]
        if min(areas) <= 0.0:
            raise ValueError("all partition regions must have positive area")
        if abs(sum(areas) - 1.0) > 1e-12:
            raise ValueError(f"region areas sum to {sum(areas)!r}, expected 1")
        for r in self.regions:
            if np.any(r < -1e-12) or np.any(r > 1.0 + 1e-12):
                raise ValueError("partition vertex outside the closed unit square")

    @property
    def tau(self) -> int:
        return len(self.regions)

    def areas(self) -> np.ndarray:
        return np.array([_polygon_area(r) for r in self.regions])


@dataclass(frozen=True)
class JumpHeights:
    """One non-negative jump height per region plus its law tag."""

    values: np.ndarray
    laws: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.values) != len(self.laws):
            raise ValueError("one law per region required")
        for v, (lo, hi) in zip(self.values, self.laws):
            if not (lo <= v <= hi):
                raise ValueError(f"jump height {v} outside its law support ({lo}, {hi})")
        if np.any(self.values < 0.0):
            raise ValueError("jump heights must be non-negative")


@dataclass(frozen=True)
class BMap:
    """Advection map: clamp of ``b1(x) * a(x)`` against ``b2(x)``.

    ``mode`` selects ``min`` (the general definition) or ``max`` (the form
    used in the reference experiment, b = max(-2 a, -5)).
    """

    b1: Callable[[np.ndarray], np.ndarray]
    b2: Callable[[np.ndarray], np.ndarray]
    mode: str = "max"

    def __post_init__(self):
        if self.mode not in ("min", "max"):
            raise ValueError("BMap.mode must be 'min' or 'max'")


def _const(c: float) -> Callable[[np.ndarray], np.ndarray]:
    def fn(pts: np.ndarray) -> np.ndarray:
        return np.full(pts.shape[0], c)

    return fn


def default_b_map() -> BMap:
    return BMap(b1=_const(-2.0), b2=_const(-5.0), mode="max")


_PHI_REGISTRY: dict[str, Callable[[np.ndarray], np.ndarray]] = {"exp": np.exp}


@dataclass(frozen=True)
class CoefficientSample:
    """One coefficient realization: interpolated field, partition and jumps."""

    field: GridField
    partition: Partition
    jumps: JumpHeights
    a_bar: Callable[[np.ndarray], np.ndarray] | None = None
    phi: str = "exp"
    b_map: BMap = field(default_factory=default_b_map)

    def __post_init__(self):
        if self.phi not in _PHI_REGISTRY:
            raise ValueError(f"unknown positive map tag {self.phi!r}")
        if self.jumps.values.shape[0] != self.partition.tau:
            raise ValueError("jump heights do not match partition size")


def sample_partition_quadrangles(rng: RandomStream | np.random.Generator) -> Partition:
    """Draw the two-chord quadrangle partition.

    U1..U4 ~ U(0.2, 0.8); the bottom-top chord joins (U1, 0) to (U2, 1) and
    the left-right chord joins (0, U3) to (1, U4).  Regions are indexed
    counter-clockwise starting from the one containing the corner (0, 0).
    """
    gen = rng.generator() if isinstance(rng, RandomStream) else rng
    u = gen.uniform(0.2, 0.8, size=4)
    return partition_from_uniforms(u)


def partition_from_uniforms(u: Sequence[float]) -> Partition:
    """Quadrangle partition from explicit chord parameters (U1..U4)."""
    u1, u2, u3, u4 = (float(v) for v in u)
    for v in (u1, u2, u3, u4):
        if not (0.0 < v < 1.0):
            raise ValueError("chord endpoints must be interior to the square sides")
    d2 = u2 - u1
    d4 = u4 - u3
    x = (u1 + u3 * d2) / (1.0 - d2 * d4)
    y = u3 + x * d4
    xp = np.array([x, y])
    b1p = np.array([u1, 0.0])
    t1p = np.array([u2, 1.0])
    l2p = np.array([0.0, u3])
    r2p = np.array([1.0, u4])
    regions = (
        np.array([[0.0, 0.0], b1p, xp, l2p]),
        np.array([b1p, [1.0, 0.0], r2p, xp]),
        np.array([xp, r2p, [1.0, 1.0], t1p]),
        np.array([l2p, xp, t1p, [0.0, 1.0]]),
    )
    segments = (
        np.array([b1p, xp]),
        np.array([xp, t1p]),
        np.array([l2p, xp]),
        np.array([xp, r2p]),
    )
    chords = (np.array([b1p, t1p]), np.array([l2p, r2p]))
    return Partition(regions=regions, interface_segments=segments, chords=chords)


def sample_jump_heights(partition: Partition, rng: RandomStream | np.random.Generator,
                        laws: Sequence[tuple[float, float]] = DEFAULT_JUMP_LAWS) -> JumpHeights:
    """Independent uniform jump heights with the fixed per-region laws."""
    if partition.tau != 4:
        raise ValueError("jump-height sampler requires the 4-region quadrangle partition")
    gen = rng.generator() if isinstance(rng, RandomStream) else rng
    u = gen.uniform(0.0, 1.0, size=4)
    laws_t = tuple((float(lo), float(hi)) for lo, hi in laws)
    vals = np.array([lo + (hi - lo) * ui for (lo, hi), ui in zip(laws_t, u)])
    return JumpHeights(values=vals, laws=laws_t)


def locate(partition: Partition, x) -> np.ndarray | int:
    """Index of the region whose closure contains each point.

    Points exactly on a chord belong to the region on the chord's left
    (orientation of increasing parameter); the chord intersection belongs to
    region 3 under that rule.
    """
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    if np.any(pts < -1e-12) or np.any(pts > 1.0 + 1e-12):
        raise ValueError("point outside the closed unit square")
    if partition.chords is not None:
        out = _kernels.locate_chords(partition.chords[0], partition.chords[1], pts)
    else:
        out = _locate_generic(partition, pts)
    if np.ndim(x) == 1:
        return int(out[0])
    return out


def _locate_generic(partition: Partition, pts: np.ndarray) -> np.ndarray:
    out = np.full(pts.shape[0], -1, dtype=np.intp)
    for idx, poly in enumerate(partition.regions):
        a = poly
        b = np.roll(poly, -1, axis=0)
        cross = (b[None, :, 0] - a[None, :, 0]) * (pts[:, None, 1] - a[None, :, 1]) - (
            b[None, :, 1] - a[None, :, 1]
        ) * (pts[:, None, 0] - a[None, :, 0])
        inside = np.all(cross >= -1e-12, axis=1)
        out[(out < 0) & inside] = idx
    if np.any(out < 0):
        raise RuntimeError("point not located in any region")
    return out


def eval_a(sample: CoefficientSample, x) -> np.ndarray | float:
    """Diffusion coefficient ``a_bar(x) + phi(W(x)) + P(x)`` at point(s) x."""
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    w = interpolate(sample.field, pts)
    phi = _PHI_REGISTRY[sample.phi]
    out = phi(w) + sample.jumps.values[locate(sample.partition, pts)]
    if sample.a_bar is not None:
        out = out + sample.a_bar(pts)
    if np.ndim(x) == 1:
        return float(out[0])
    return out


def eval_a_with_regions(sample: CoefficientSample, pts: np.ndarray, regions: np.ndarray) -> np.ndarray:
    """Same as :func:`eval_a` with region indices already known (adapted meshes)."""
    w = interpolate(sample.field, pts)
    phi = _PHI_REGISTRY[sample.phi]
    out = phi(w) + sample.jumps.values[regions]
    if sample.a_bar is not None:
        out = out + sample.a_bar(pts)
    return out


def eval_b(sample: CoefficientSample, x, a_vals: np.ndarray | None = None) -> np.ndarray | float:
    """Advection coefficient: ``clamp(b1(x) * a(x), b2(x))`` per the map mode."""
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    a = eval_a(sample, pts) if a_vals is None else a_vals
    raw = sample.b_map.b1(pts) * a
    cap = sample.b_map.b2(pts)
    out = np.minimum(raw, cap) if sample.b_map.mode == "min" else np.maximum(raw, cap)
    if np.ndim(x) == 1:
        return float(out[0])
    return out


def partition_to_text(partition: Partition, jumps: JumpHeights | None = None) -> str:
    """Structured text record of a partition (and jump heights) for replay."""
    buf = io.StringIO()
    buf.write(f"regions {partition.tau}\n")
    for idx, poly in enumerate(partition.regions):
        coords = " ".join(repr(float(v)) for v in poly.ravel())
        buf.write(f"region {idx} {poly.shape[0]} {coords}\n")
    for seg in partition.interface_segments:
        coords = " ".join(repr(float(v)) for v in seg.ravel())
        buf.write(f"segment {coords}\n")
    if partition.chords is not None:
        for name, chord in zip(("chord1", "chord2"), partition.chords):
            coords = " ".join(repr(float(v)) for v in chord.ravel())
            buf.write(f"{name} {coords}\n")
    if jumps is not None:
        buf.write("jumps " + " ".join(repr(float(v)) for v in jumps.values) + "\n")
        for lo, hi in jumps.laws:
            buf.write(f"law {float(lo)!r} {float(hi)!r}\n")
    return buf.getvalue()


def partition_from_text(text: str) -> tuple[Partition, JumpHeights | None]:
    """Inverse of :func:`partition_to_text`."""
    regions: list[np.ndarray] = []
    segments: list[np.ndarray] = []
    chords: dict[str, np.ndarray] = {}
    jump_vals: np.ndarray | None = None
    laws: list[tuple[float, float]] = []
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        tag = parts[0]
        if tag == "region":
            k = int(parts[2])
            vals = np.array([float(v) for v in parts[3:]]).reshape(k, 2)
            regions.append(vals)
        elif tag == "segment":
            segments.append(np.array([float(v) for v in parts[1:]]).reshape(2, 2))
        elif tag in ("chord1", "chord2"):
            chords[tag] = np.array([float(v) for v in parts[1:]]).reshape(2, 2)
        elif tag == "jumps":
            jump_vals = np.array([float(v) for v in parts[1:]])
        elif tag == "law":
            laws.append((float(parts[1]), float(parts[2])))
    partition = Partition(
        regions=tuple(regions),
        interface_segments=tuple(segments),
        chords=(chords["chord1"], chords["chord2"]) if chords else None,
    )
    jumps = None
    if jump_vals is not None:
        jumps = JumpHeights(values=jump_vals, laws=tuple(laws))
    return partition, jumps
