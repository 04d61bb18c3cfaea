"""Named crystal frameworks and multigrid specifications used in tests and the CLI."""

from __future__ import annotations

import math

import numpy as np

from .errors import ValidationError
from .framework import CrystalFramework
from .geometry import Basis2

SQRT3 = math.sqrt(3.0)

# Offsets for the symmetric pentagrid; they sum to zero and avoid triple points.
PENROSE_OFFSETS = (0.2, 0.1, 0.05, -0.15, -0.2)


def square_grid() -> CrystalFramework:
    return CrystalFramework(Basis2.standard(), [(0.0, 0.0)],
                            [(0, 0, (1, 0)), (0, 0, (0, 1))], name="square")


def braced_grid() -> CrystalFramework:
    """Square grid with one diagonal per cell; infinitesimally rigid."""
    return CrystalFramework(Basis2.standard(), [(0.0, 0.0)],
                            [(0, 0, (1, 0)), (0, 0, (0, 1)), (0, 0, (1, 1))], name="braced")


def kagome() -> CrystalFramework:
    """Regular kagome framework with unit bars.

    Basis ``a1 = (2, 0)``, ``a2 = (1, sqrt 3)``; one up-triangle per cell, the
    down-triangles are formed by the offset edges.
    """
    a = Basis2((2.0, 0.0), (1.0, SQRT3))
    joints = [(0.0, 0.0), (1.0, 0.0), (0.5, SQRT3 / 2)]
    edges = [
        (0, 1, (0, 0)), (0, 2, (0, 0)), (1, 2, (0, 0)),
        (1, 0, (1, 0)), (2, 0, (0, 1)), (2, 1, (-1, 1)),
    ]
    return CrystalFramework(a, joints, edges, name="kagome")


def free_joints() -> CrystalFramework:
    """A lattice of joints with no bars at all."""
    return CrystalFramework(Basis2.standard(), [(0.0, 0.0)], [], name="free")


def disjoint_bars() -> CrystalFramework:
    """One isolated unit bar per cell."""
    return CrystalFramework(Basis2((3.0, 0.0), (0.0, 3.0)), [(0.0, 0.0), (1.0, 0.0)],
                            [(0, 1, (0, 0))], name="disjoint-bars")


def pinned_ring() -> CrystalFramework:
    """Braced grid of spacing 3 with a four-bar linkage inside every cell.

    Ring joints 1 and 2 are each pinned to two grid joints; joints 3 and 4 form
    the moving coupler, so every cell carries a one-parameter local mechanism.
    """
    a = Basis2((3.0, 0.0), (0.0, 3.0))
    joints = [(0.0, 0.0), (1.0, 1.0), (2.0, 1.0), (2.0, 2.0), (1.0, 2.0)]
    edges = [
        (0, 0, (1, 0)), (0, 0, (0, 1)), (0, 0, (1, 1)),
        (1, 0, (0, 0)), (1, 0, (1, 0)),
        (2, 0, (1, 0)), (2, 0, (1, 1)),
        (1, 2, (0, 0)), (2, 3, (0, 0)), (3, 4, (0, 0)), (4, 1, (0, 0)),
    ]
    return CrystalFramework(a, joints, edges, name="pinned-ring")


def cz2_plus_plus() -> CrystalFramework:
    """Approximate stand-in for the doubly augmented grid with unbounded-only flexes.

    Braced unit grid plus, in every cell, two added joints ``a`` and ``c``
    zig-zagging along the row: ``a`` is tied to the grid joint of its cell,
    ``c`` to the grid joint of the next cell, and the chain ``a-c-a'-c'-...``
    is closed by bars.  The chain flexes scale by a fixed real factor from
    cell to cell, so they grow geometrically in one direction.  The exact
    joint placement of the original figure is not known; this is only a
    reconstruction with the same qualitative behaviour.
    """
    joints = [(0.0, 0.0), (0.25, 0.35), (0.7, 0.5)]
    edges = [
        (0, 0, (1, 0)), (0, 0, (0, 1)), (0, 0, (1, 1)),
        (1, 0, (0, 0)), (2, 0, (1, 0)),
        (1, 2, (0, 0)), (2, 1, (1, 0)),
    ]
    return CrystalFramework(Basis2.standard(), joints, edges, name="cz2pp")


CRYSTALS = {
    "square": square_grid,
    "braced": braced_grid,
    "kagome": kagome,
    "free": free_joints,
    "disjoint-bars": disjoint_bars,
    "pinned-ring": pinned_ring,
}

RECONSTRUCTED = {"cz2pp": cz2_plus_plus}


def crystal(name: str, allow_reconstruction: bool = False) -> CrystalFramework:
    if name in CRYSTALS:
        return CRYSTALS[name]()
    if name in RECONSTRUCTED:
        if not allow_reconstruction:
            raise ValidationError(f"fixture {name!r} is an approximate reconstruction; "
                                  "pass allow_reconstruction=True to use it")
        return RECONSTRUCTED[name]()
    if name == "rhombille":
        from .multigrid import crystal_of_periodic, dualize
        return crystal_of_periodic(dualize(multigrid("rhombille", window=12)))
    raise ValidationError(f"unknown crystal fixture {name!r}")


def _unit(theta):
    return np.array([math.cos(theta), math.sin(theta)])


def multigrid(name: str, window: float = 30.0, offsets=None):
    """Named regular multigrids: ``square``, ``rhombille``, ``penrose``, ``ammann-beenker``."""
    from .multigrid import GridFamily, MultigridSpec

    if name == "square":
        off = offsets or (0.3, 0.2)
        normals = [_unit(0.0), _unit(math.pi / 2)]
    elif name == "rhombille":
        off = offsets or (0.2, 0.1, 0.05)
        normals = [_unit(2 * math.pi * j / 3 + math.pi / 2) for j in range(3)]
    elif name == "penrose":
        off = offsets or PENROSE_OFFSETS
        normals = [_unit(2 * math.pi * j / 5) for j in range(5)]
    elif name == "ammann-beenker":
        off = offsets or (0.21, 0.13, -0.07, -0.17)
        normals = [_unit(math.pi * j / 4) for j in range(4)]
    else:
        raise ValidationError(f"unknown multigrid fixture {name!r}")
    fams = [GridFamily(n, g, n.copy()) for n, g in zip(normals, off)]
    return MultigridSpec(fams, window=window, name=name)
