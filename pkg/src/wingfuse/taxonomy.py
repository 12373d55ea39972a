"""GBIF-style four-level labels (order, family, genus, species) and probability roll-up."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import UnknownSpecies

LEVELS = ("order", "family", "genus", "species")


@dataclass(frozen=True, order=True)
class TaxonLabel:
    order: str
    family: str | None = None
    genus: str | None = None
    species: str | None = None

    def __post_init__(self):
        path = (self.order, self.family, self.genus, self.species)
        seen_gap = False
        for value in path:
            if value is None:
                seen_gap = True
            elif seen_gap:
                raise ValueError(f"incomplete taxon path {path}")

    @property
    def rank(self) -> str:
        for level in reversed(LEVELS):
            if getattr(self, level) is not None:
                return level
        return "order"

    def at(self, level: str) -> str | None:
        return getattr(self, level)

    def to_dict(self) -> dict:
        return {lvl: getattr(self, lvl) for lvl in LEVELS if getattr(self, lvl) is not None}

    @classmethod
    def from_dict(cls, d: dict) -> "TaxonLabel":
        return cls(d["order"], d.get("family"), d.get("genus"), d.get("species"))


class TaxonomyTree:
    """Rooted order > family > genus > species tree; leaves are species.

    Leaf order is the canonical class order used everywhere else.
    """

    def __init__(self, leaves: Iterable[TaxonLabel]):
        self._leaves: list[TaxonLabel] = []
        self._by_species: dict[str, TaxonLabel] = {}
        parents: dict[tuple[str, str], str] = {}
        for leaf in leaves:
            if leaf.species is None:
                raise ValueError(f"tree leaves must be species, got {leaf}")
            if leaf.species in self._by_species:
                raise ValueError(f"duplicate species {leaf.species}")
            for child_level, parent_level in (("family", "order"), ("genus", "family"), ("species", "genus")):
                key = (child_level, leaf.at(child_level))
                parent = leaf.at(parent_level)
                if parents.setdefault(key, parent) != parent:
                    raise ValueError(f"{child_level} {key[1]} has two parents")
            self._leaves.append(leaf)
            self._by_species[leaf.species] = leaf

    @property
    def species(self) -> list[str]:
        return [leaf.species for leaf in self._leaves]

    @property
    def leaves(self) -> list[TaxonLabel]:
        return list(self._leaves)

    def __len__(self):
        return len(self._leaves)

    def __contains__(self, label) -> bool:
        if isinstance(label, str):
            return label in self._by_species
        leaf = self._by_species.get(label.species) if label.species else None
        if leaf is not None:
            return leaf == label
        return any(all(leaf.at(l) == label.at(l) for l in LEVELS if label.at(l) is not None) for leaf in self._leaves)

    def label(self, species: str) -> TaxonLabel:
        try:
            return self._by_species[species]
        except KeyError:
            raise UnknownSpecies(f"species {species!r} not in taxonomy") from None

    def index(self, species: str) -> int:
        return self.species.index(self.label(species).species)

    def nodes(self, level: str) -> list[str]:
        """Distinct node names at ``level`` in first-appearance order."""
        out: list[str] = []
        for leaf in self._leaves:
            name = leaf.at(level)
            if name not in out:
                out.append(name)
        return out

    def to_list(self) -> list[dict]:
        return [leaf.to_dict() for leaf in self._leaves]

    @classmethod
    def from_list(cls, rows: Sequence[dict]) -> "TaxonomyTree":
        return cls(TaxonLabel.from_dict(r) for r in rows)

    def __eq__(self, other):
        return isinstance(other, TaxonomyTree) and self._leaves == other._leaves


# the seven-species field set
DEFAULT_SPECIES = (
    TaxonLabel("Hymenoptera", "Apidae", "Apis", "Apis mellifera"),
    TaxonLabel("Hymenoptera", "Apidae", "Bombus", "Bombus terrestris"),
    TaxonLabel("Hymenoptera", "Vespidae", "Vespa", "Vespa crabro"),
    TaxonLabel("Hymenoptera", "Vespidae", "Polistes", "Polistes dominula"),
    TaxonLabel("Mecoptera", "Panorpidae", "Panorpa", "Panorpa communis"),
    TaxonLabel("Diptera", "Syrphidae", "Eristalis", "Eristalis tenax"),
    TaxonLabel("Diptera", "Syrphidae", "Episyrphus", "Episyrphus balteatus"),
)


def default_tree() -> TaxonomyTree:
    return TaxonomyTree(DEFAULT_SPECIES)


def rollup_taxonomy(species_probs, tree: TaxonomyTree, species: Sequence[str] | None = None) -> dict[str, dict[str, float]]:
    """Sum species probabilities up to genus, family and order.

    ``species_probs`` is either a vector aligned with ``species`` (default:
    the tree's leaf order) or a mapping from species name to probability.
    """
    if isinstance(species_probs, dict):
        names, probs = list(species_probs), np.asarray(list(species_probs.values()), dtype=np.float64)
    else:
        names = list(species) if species is not None else tree.species
        probs = np.asarray(species_probs, dtype=np.float64)
        if probs.shape != (len(names),):
            raise ValueError(f"expected {len(names)} probabilities, got shape {probs.shape}")
    leaves = [tree.label(name) for name in names]
    out: dict[str, dict[str, float]] = {}
    for level in ("genus", "family", "order"):
        parts: dict[str, list[float]] = {node: [] for node in tree.nodes(level)}
        for leaf, p in zip(leaves, probs):
            parts[leaf.at(level)].append(float(p))
        out[level] = {node: math.fsum(v) for node, v in parts.items()}
    return out
