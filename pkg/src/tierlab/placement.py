"""Static page-placement policies, including object-level interleaving (OLI)."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

from .errors import ConfigError


class PlacementKind(str, Enum):
    FIRST_TOUCH = "FIRST_TOUCH"
    PREFERRED = "PREFERRED"
    UNIFORM_INTERLEAVE = "UNIFORM_INTERLEAVE"
    OBJECT_LEVEL = "OBJECT_LEVEL"


@dataclass(frozen=True)
class ObjectProfile:
    object_id: int
    footprint_bytes: int
    access_count: int
    pattern: str = "RAND"

    def __post_init__(self):
        if self.footprint_bytes <= 0:
            raise ValueError("footprint_bytes must be > 0")
        if self.access_count < 0:
            raise ValueError("access_count must be >= 0")


@dataclass(frozen=True)
class PlacementPolicy:
    kind: PlacementKind
    node_order: tuple = ()
    node_set: tuple = ()
    footprint_share_min: float = 0.10
    access_share_min: float = 0.10

    def __post_init__(self):
        if self.kind == PlacementKind.PREFERRED and not self.node_order:
            raise ConfigError("preferred placement needs a node_order", key="node_order")
        if self.kind in (PlacementKind.UNIFORM_INTERLEAVE, PlacementKind.OBJECT_LEVEL) and not self.node_set:
            raise ConfigError(f"{self.kind.value} placement needs a node_set", key="node_set")
        if self.kind == PlacementKind.OBJECT_LEVEL:
            for name in ("footprint_share_min", "access_share_min"):
                v = getattr(self, name)
                if not 0 < v < 1:
                    raise ConfigError(f"{name} must be in (0, 1)", key=name)

    @property
    def explicit_binding(self) -> bool:
        # OLI's interleaved objects get their own UNIFORM_INTERLEAVE policy from oli_place.
        return self.kind == PlacementKind.UNIFORM_INTERLEAVE

    @property
    def label(self) -> str:
        if self.kind == PlacementKind.FIRST_TOUCH:
            return "first_touch"
        if self.kind == PlacementKind.PREFERRED:
            return "preferred:" + "+".join(self.node_order)
        if self.kind == PlacementKind.UNIFORM_INTERLEAVE:
            return "interleave:" + "+".join(self.node_set)
        return "oli:" + "+".join(self.node_set)

    @classmethod
    def from_dict(cls, d: dict) -> "PlacementPolicy":
        kind = str(d.get("kind", "first_touch")).upper()
        aliases = {"INTERLEAVE": "UNIFORM_INTERLEAVE", "UNIFORM": "UNIFORM_INTERLEAVE", "OLI": "OBJECT_LEVEL"}
        kind = aliases.get(kind, kind)
        try:
            pk = PlacementKind(kind)
        except ValueError as exc:
            raise ConfigError(f"unknown placement kind {d.get('kind')!r}", key="placement.kind") from exc
        return cls(pk, tuple(d.get("node_order", ())), tuple(d.get("node_set", ())),
                   float(d.get("footprint_share_min", 0.10)), float(d.get("access_share_min", 0.10)))

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "node_order": list(self.node_order), "node_set": list(self.node_set),
                "footprint_share_min": self.footprint_share_min, "access_share_min": self.access_share_min}


def parse_policy(text: str) -> PlacementPolicy:
    """``first_touch``, ``preferred:ldram[+cxl]``, ``interleave:ldram+cxl``, ``oli[:ldram+cxl]``."""
    name, _, args = text.partition(":")
    nodes = tuple(a for a in args.replace(",", "+").split("+") if a)
    name = name.strip().lower().replace("-", "_")
    if name in ("first_touch", "firsttouch", "local"):
        return PlacementPolicy(PlacementKind.FIRST_TOUCH)
    if name == "preferred":
        return PlacementPolicy(PlacementKind.PREFERRED, node_order=nodes or ("ldram",))
    if name in ("interleave", "uniform", "uniform_interleave"):
        return PlacementPolicy(PlacementKind.UNIFORM_INTERLEAVE, node_set=nodes or ("ldram", "cxl"))
    if name in ("oli", "object_level"):
        return PlacementPolicy(PlacementKind.OBJECT_LEVEL, node_set=nodes or ("ldram", "cxl"))
    raise ConfigError(f"unknown placement policy {text!r}", key="placement")


def preference_order(policy: PlacementPolicy, page_index: int, accessor_socket: str, topology,
                     allowed=None) -> list:
    """Candidate nodes for one page, most preferred first; later entries are the overflow order."""
    allowed = list(topology.node_ids if allowed is None else allowed)
    by_distance = topology.distance_order(accessor_socket, allowed)
    if policy.kind == PlacementKind.FIRST_TOUCH:
        return by_distance
    if policy.kind == PlacementKind.PREFERRED:
        head = [topology.find_node(n, accessor_socket) for n in policy.node_order]
        return _dedupe(head + by_distance)
    if policy.kind == PlacementKind.UNIFORM_INTERLEAVE:
        ring = [topology.find_node(n, accessor_socket) for n in policy.node_set]
        k = page_index % len(ring)
        return ring[k:] + ring[:k]
    raise ValueError("OBJECT_LEVEL placement is resolved per object through oli_place")


def decide_placement(policy: PlacementPolicy, profile: ObjectProfile | None, page_index: int,
                     accessor_socket: str, topology, free_pages=None, allowed=None) -> str:
    """Node for one page; ``free_pages`` (node -> count) enables the overflow rule."""
    order = preference_order(policy, page_index, accessor_socket, topology, allowed)
    if free_pages is None:
        return order[0]
    for node in order:
        if free_pages.get(node, 0) > 0:
            return node
    from .errors import OutOfMemory
    raise OutOfMemory("no node in the preference order has free pages")


def oli_select(profiles, footprint_share_min=0.10, access_share_min=0.10) -> set:
    """Objects that are both large (footprint share) and access-intensive (access share)."""
    profiles = list(profiles)
    total_fp = sum(p.footprint_bytes for p in profiles)
    total_acc = sum(p.access_count for p in profiles)
    if total_fp <= 0 or total_acc <= 0:
        raise ValueError("profiles need positive total footprint and access count")
    return {p.object_id for p in profiles
            if p.footprint_bytes / total_fp >= footprint_share_min
            and p.access_count / total_acc >= access_share_min}


def oli_place(selected, policy: PlacementPolicy, object_ids) -> dict:
    """Per-object policies: selected objects interleave over ``node_set``, the rest prefer LDRAM."""
    interleave = PlacementPolicy(PlacementKind.UNIFORM_INTERLEAVE, node_set=tuple(policy.node_set))
    preferred = PlacementPolicy(PlacementKind.PREFERRED, node_order=("ldram",))
    return {oid: (interleave if oid in selected else preferred) for oid in object_ids}


def allocation_plan(policy: PlacementPolicy, object_ids, selected=None) -> list:
    """``(object_id, policy)`` pairs in allocation order.

    Under OLI the LDRAM-preferred objects are placed before the interleaved
    ones so that interleaving never evicts a latency-sensitive object from
    the fast node; every other policy keeps program order.
    """
    object_ids = list(object_ids)
    if policy.kind != PlacementKind.OBJECT_LEVEL:
        return [(oid, policy) for oid in object_ids]
    per_obj = oli_place(selected or set(), policy, object_ids)
    first = [oid for oid in object_ids if per_obj[oid].kind == PlacementKind.PREFERRED]
    last = [oid for oid in object_ids if per_obj[oid].kind != PlacementKind.PREFERRED]
    return [(oid, per_obj[oid]) for oid in first + last]


def dump_profiles(profiles) -> str:
    return json.dumps([{"object_id": p.object_id, "footprint_bytes": p.footprint_bytes,
                        "access_count": p.access_count, "pattern": p.pattern} for p in profiles], indent=2)


def load_profiles(text: str) -> list:
    return [ObjectProfile(int(d["object_id"]), int(d["footprint_bytes"]), int(d["access_count"]),
                          str(d.get("pattern", "RAND"))) for d in json.loads(text)]


def _dedupe(seq):
    out = []
    for x in seq:
        if x not in out:
            out.append(x)
    return out
