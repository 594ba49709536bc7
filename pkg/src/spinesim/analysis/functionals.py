"""Registry of path functionals used by the identity checks.

Each functional can be evaluated on a :class:`~spinesim.paths.TraitPath`, on
an individual of a simulated tree (without building its lineage) and, where
it only looks at one trait value, as a plain function of the trait.
"""
from __future__ import annotations

import math


class Functional:
    name = "functional"
    trait_only = False  # depends on the path only through one trait value

    def __call__(self, path) -> float:
        raise NotImplementedError

    def on_tree(self, tree, ind, t) -> float:
        from ..population import lineage_of
        return self(lineage_of(tree, ind.label, t))

    def of_trait(self, x) -> float:
        raise TypeError(f"{self.name} is not a function of a single trait")

    @property
    def is_constant(self) -> bool:
        return False

    def __repr__(self):
        return self.name


class One(Functional):
    name = "one"
    trait_only = True

    def __call__(self, path):
        return 1.0

    def on_tree(self, tree, ind, t):
        return 1.0

    def of_trait(self, x):
        return 1.0

    @property
    def is_constant(self):
        return True


class Terminal(Functional):
    name = "terminal"
    trait_only = True

    def __call__(self, path):
        return float(path.terminal)

    def on_tree(self, tree, ind, t):
        return float(ind.trait_at(t))

    def of_trait(self, x):
        return float(x)


class TraitAt(Functional):
    trait_only = True

    def __init__(self, s: float):
        self.s = float(s)
        self.name = f"trait_at:{s:g}"

    def __call__(self, path):
        return float(path.value_at(self.s))

    def on_tree(self, tree, ind, t):
        return float(tree.ancestor_at(ind.label, self.s).trait_at(self.s))

    def of_trait(self, x):
        return float(x)


class ZPow(Functional):
    """``z ** (number of divisions along the path)``."""

    def __init__(self, z: float):
        self.z = float(z)
        self.name = f"zpow:{z:g}"

    def __call__(self, path):
        return self.z ** path.division_count

    def on_tree(self, tree, ind, t):
        return self.z ** ind.generation


class Indicator(Functional):
    """Indicator of the terminal trait lying in ``[a, b)``."""

    trait_only = True

    def __init__(self, a: float, b: float):
        self.a, self.b = float(a), float(b)
        self.name = f"indicator:{a:g}:{b:g}"

    def __call__(self, path):
        return self.of_trait(path.terminal)

    def on_tree(self, tree, ind, t):
        return self.of_trait(ind.trait_at(t))

    def of_trait(self, x):
        return 1.0 if self.a <= x < self.b else 0.0


def get_functional(spec) -> Functional:
    """Parse ``"one"``, ``"terminal"``, ``"trait_at:S"``, ``"zpow:Z"``, ``"indicator:A:B"``."""
    if isinstance(spec, Functional):
        return spec
    parts = str(spec).split(":")
    head, args = parts[0], parts[1:]
    try:
        if head in ("one", "1") and not args:
            return One()
        if head in ("terminal", "identity") and not args:
            return Terminal()
        if head == "trait_at" and len(args) == 1:
            return TraitAt(float(args[0]))
        if head == "zpow" and len(args) == 1:
            return ZPow(float(args[0]))
        if head == "indicator" and len(args) == 2:
            return Indicator(float(args[0]), float(args[1]))
    except ValueError:
        pass
    raise ValueError(f"unknown functional {spec!r}")


class TimeWeight:
    """Weight ``w(s)`` of the whole-tree identity: ``one`` or ``exp:c`` (= e^{-c s})."""

    def __init__(self, spec="one"):
        self.spec = str(spec)
        parts = self.spec.split(":")
        if parts == ["one"]:
            self.c = 0.0
        elif parts[0] == "exp" and len(parts) == 2:
            self.c = float(parts[1])
        else:
            raise ValueError(f"unknown time weight {spec!r}")

    def __call__(self, s: float) -> float:
        return math.exp(-self.c * s)

    def __repr__(self):
        return self.spec
