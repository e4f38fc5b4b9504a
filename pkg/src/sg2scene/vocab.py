"""Class and relation vocabularies for traffic scene graphs.

Class indices are dense over background classes first, then object classes,
so the default vocabulary enumerates sky, road, tree, building, person, car,
bus, truck as 0..7. Relations come in dual pairs (left_of/right_of,
above/below, in_front_of/behind); the lexicographically smaller member of a
pair is the canonical storage form.
"""

from __future__ import annotations

from dataclasses import dataclass, field


class VocabError(ValueError):
    """Raised for unknown names or malformed vocabularies."""


@dataclass(frozen=True)
class ClassVocab:
    """Ordered class vocabulary with disjoint background/object sets."""

    name: str
    background_classes: tuple[str, ...] = ("sky", "road", "tree", "building")
    object_classes: tuple[str, ...] = ("person", "car", "bus", "truck")
    aliases: tuple[tuple[str, str], ...] = (("vegetation", "tree"),)

    def __post_init__(self) -> None:
        names = self.background_classes + self.object_classes
        if len(set(names)) != len(names):
            raise VocabError(f"duplicate class names in vocab {self.name!r}")
        for alias, target in self.aliases:
            if alias in names:
                raise VocabError(f"alias {alias!r} shadows a class name")
            if target not in names:
                raise VocabError(f"alias {alias!r} points at unknown class {target!r}")

    @property
    def classes(self) -> tuple[str, ...]:
        return self.background_classes + self.object_classes

    def __len__(self) -> int:
        return len(self.classes)

    def index(self, name: str) -> int:
        for alias, target in self.aliases:
            if name == alias:
                name = target
                break
        try:
            return self.classes.index(name)
        except ValueError:
            raise VocabError(f"unknown class {name!r} in vocab {self.name!r}") from None

    def class_name(self, index: int) -> str:
        if not 0 <= index < len(self):
            raise VocabError(f"class index {index} out of range for vocab {self.name!r}")
        return self.classes[index]

    def is_background(self, index: int) -> bool:
        return 0 <= index < len(self.background_classes)


@dataclass(frozen=True)
class RelationVocab:
    """Directed spatial relations paired with their duals."""

    relations: tuple[str, ...] = (
        "left_of",
        "right_of",
        "above",
        "below",
        "in_front_of",
        "behind",
    )
    duals: tuple[tuple[str, str], ...] = (
        ("left_of", "right_of"),
        ("above", "below"),
        ("in_front_of", "behind"),
    )

    def __post_init__(self) -> None:
        dual_map = dict(self.duals) | {b: a for a, b in self.duals}
        for rel in self.relations:
            if rel not in dual_map:
                raise VocabError(f"relation {rel!r} has no dual")
        for rel, dual in dual_map.items():
            if dual_map.get(dual) != rel:
                raise VocabError(f"dual map is not an involution at {rel!r}")

    def __len__(self) -> int:
        return len(self.relations)

    def index(self, name: str) -> int:
        try:
            return self.relations.index(name)
        except ValueError:
            raise VocabError(f"unknown relation {name!r}") from None

    def relation_name(self, index: int) -> str:
        if not 0 <= index < len(self.relations):
            raise VocabError(f"relation index {index} out of range")
        return self.relations[index]

    def dual(self, name: str) -> str:
        for a, b in self.duals:
            if name == a:
                return b
            if name == b:
                return a
        raise VocabError(f"unknown relation {name!r}")

    def dual_index(self, index: int) -> int:
        return self.index(self.dual(self.relation_name(index)))

    def canonical(self, name: str) -> str:
        """Canonical member of the dual pair: the lexicographically smaller."""
        return min(name, self.dual(name))

    def is_canonical(self, name: str) -> bool:
        return self.canonical(name) == name

    def axis(self, name: str) -> frozenset[str]:
        """Both members of the dual pair the relation belongs to."""
        return frozenset((name, self.dual(name)))


@dataclass(frozen=True)
class GridSpec:
    """Location grid (L x L cells) and depth binning (Z bins)."""

    grid_size: int = 8
    depth_bins: int = 8

    def __post_init__(self) -> None:
        if self.grid_size < 2 or self.depth_bins < 2:
            raise VocabError("grid_size and depth_bins must both be >= 2")

    @property
    def cells(self) -> int:
        return self.grid_size * self.grid_size

    def cell_index(self, row: int, col: int) -> int:
        return row * self.grid_size + col

    def cell_row_col(self, cell: int) -> tuple[int, int]:
        return divmod(cell, self.grid_size)

    def cell_center(self, cell: int) -> tuple[float, float]:
        """Normalized (x, y) center of a cell."""
        row, col = self.cell_row_col(cell)
        return (col + 0.5) / self.grid_size, (row + 0.5) / self.grid_size


DEFAULT_CLASSES = ClassVocab(name="default")
EXTENDED_CLASSES = ClassVocab(
    name="extended",
    background_classes=("sky", "road", "tree", "building", "sidewalk"),
)
DEFAULT_RELATIONS = RelationVocab()

CLASS_VOCABS: dict[str, ClassVocab] = {
    "default": DEFAULT_CLASSES,
    "extended": EXTENDED_CLASSES,
}


def get_class_vocab(name: str) -> ClassVocab:
    try:
        return CLASS_VOCABS[name]
    except KeyError:
        raise VocabError(f"unknown class vocabulary {name!r}") from None
