"""Annotation schema profiles: entity and relation inventories per corpus flavour.

Two profiles ship built in. ``corp-hus`` models a French hospital export;
note that it lists both ``Condition`` and ``Context`` entity types because
real exports disagree on which of the two is used — custom profiles can drop
either. ``n2c2`` models the 2018 medication/ADE challenge label set.

``SAME_FRAME`` is a reserved relation name. It marks two attributes as
belonging to the same regimen frame, is synthesised (never annotated), and
therefore can never be a member of a profile's relation inventory.
"""

from __future__ import annotations

from dataclasses import dataclass

SAME_FRAME = "SAME_FRAME"

# Catch-all entity type assigned to unknown types in lax parsing mode.
# Entities of this type are carried along but excluded from relation extraction.
OTHER_TYPE = "OTHER"


class SchemaError(ValueError):
    """Ill-formed schema profile."""


class UnknownProfileError(KeyError):
    """Requested profile name is not registered."""


@dataclass(frozen=True)
class SchemaProfile:
    name: str
    entity_types: frozenset[str]
    relation_types: frozenset[str]
    attribute_types: frozenset[str]
    drug_types: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "entity_types", frozenset(self.entity_types))
        object.__setattr__(self, "relation_types", frozenset(self.relation_types))
        object.__setattr__(self, "attribute_types", frozenset(self.attribute_types))
        object.__setattr__(self, "drug_types", frozenset(self.drug_types))
        if not self.relation_types:
            raise SchemaError(f"profile {self.name!r}: relation_types may not be empty")
        if SAME_FRAME in self.relation_types:
            raise SchemaError(f"profile {self.name!r}: {SAME_FRAME} is reserved and never annotated")
        if not self.drug_types <= self.entity_types:
            raise SchemaError(f"profile {self.name!r}: drug_types must be a subset of entity_types")
        if not self.attribute_types <= self.entity_types:
            raise SchemaError(f"profile {self.name!r}: attribute_types must be a subset of entity_types")
        if self.drug_types & self.attribute_types:
            raise SchemaError(f"profile {self.name!r}: drug_types and attribute_types must be disjoint")
        if OTHER_TYPE in self.entity_types:
            raise SchemaError(f"profile {self.name!r}: {OTHER_TYPE} is reserved for lax parsing")

    def entity_type_list(self) -> list[str]:
        return sorted(self.entity_types)

    def relation_type_list(self) -> list[str]:
        return sorted(self.relation_types)

    def is_known_entity_type(self, etype: str) -> bool:
        return etype in self.entity_types or etype == OTHER_TYPE

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "entity_types": sorted(self.entity_types),
            "relation_types": sorted(self.relation_types),
            "attribute_types": sorted(self.attribute_types),
            "drug_types": sorted(self.drug_types),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "SchemaProfile":
        return cls(
            name=payload["name"],
            entity_types=frozenset(payload["entity_types"]),
            relation_types=frozenset(payload["relation_types"]),
            attribute_types=frozenset(payload["attribute_types"]),
            drug_types=frozenset(payload["drug_types"]),
        )


CORP_HUS = SchemaProfile(
    name="corp-hus",
    entity_types=frozenset({
        "Drug", "Drug_Class", "Date", "Relative_Date", "Dosage",
        "Frequency", "Route", "Duration", "Context", "Condition",
    }),
    relation_types=frozenset({
        "Refer_to", "Start", "Stop", "Ongoing", "Duration_prescription",
        "Administration_time", "Increase", "Decrease", "Negation",
        "Contraindicated", "Hypothetical", "Experiencer", "Coref", "Discontinue",
    }),
    attribute_types=frozenset({
        "Date", "Relative_Date", "Dosage", "Frequency", "Route",
        "Duration", "Context", "Condition",
    }),
    drug_types=frozenset({"Drug", "Drug_Class"}),
)

N2C2 = SchemaProfile(
    name="n2c2",
    entity_types=frozenset({
        "Drug", "Strength", "Form", "Dosage", "Frequency",
        "Route", "Duration", "Reason", "ADE",
    }),
    relation_types=frozenset({
        "Strength-Drug", "Form-Drug", "Dosage-Drug", "Frequency-Drug",
        "Route-Drug", "Duration-Drug", "Reason-Drug", "ADE-Drug",
    }),
    attribute_types=frozenset({
        "Strength", "Form", "Dosage", "Frequency", "Route",
        "Duration", "Reason", "ADE",
    }),
    drug_types=frozenset({"Drug"}),
)

BUILTIN_PROFILES: dict[str, SchemaProfile] = {p.name: p for p in (CORP_HUS, N2C2)}


def get_profile(name: str) -> SchemaProfile:
    try:
        return BUILTIN_PROFILES[name]
    except KeyError:
        known = ", ".join(sorted(BUILTIN_PROFILES))
        raise UnknownProfileError(f"unknown schema profile {name!r} (built in: {known})") from None


_PROFILE_KEYS = {"name", "entity_types", "relation_types", "attribute_types", "drug_types"}


def load_profile(path: str) -> SchemaProfile:
    """Read a custom profile from a key=value file; list values are comma separated."""
    raw: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise SchemaError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in _PROFILE_KEYS:
                raise SchemaError(f"{path}:{lineno}: unknown profile key {key!r}")
            if key in raw:
                raise SchemaError(f"{path}:{lineno}: duplicate profile key {key!r}")
            raw[key] = value
    missing = _PROFILE_KEYS - raw.keys()
    if missing:
        raise SchemaError(f"{path}: missing profile keys: {', '.join(sorted(missing))}")

    def split(value: str) -> frozenset[str]:
        return frozenset(item.strip() for item in value.split(",") if item.strip())

    return SchemaProfile(
        name=raw["name"],
        entity_types=split(raw["entity_types"]),
        relation_types=split(raw["relation_types"]),
        attribute_types=split(raw["attribute_types"]),
        drug_types=split(raw["drug_types"]),
    )


def resolve_profile(name_or_path: str) -> SchemaProfile:
    """Look up a built-in profile by name, or load a custom one from a file path."""
    if name_or_path in BUILTIN_PROFILES:
        return BUILTIN_PROFILES[name_or_path]
    import os

    if os.path.exists(name_or_path):
        return load_profile(name_or_path)
    known = ", ".join(sorted(BUILTIN_PROFILES))
    raise UnknownProfileError(f"unknown schema profile {name_or_path!r} (built in: {known}; or pass a file path)")
