"""JSON experiment configs: preset lookup, inheritance, dotted overrides, schema checks."""

from __future__ import annotations

import copy
import json
import os
import re
from importlib import resources
from pathlib import Path

import jsonschema

from .engine import RunSettings, SimConfig
from .errors import ConfigError
from .placement import PlacementPolicy, parse_policy
from .tiering import TieringPolicy, parse_kind
from .topology import Topology
from .workloads import ProxyWorkload

PRESET_ENV = "TIERLAB_PRESETS"
SECTIONS = ("devices", "topology", "links", "workload", "placement", "tiering", "run")
_REPLACED = ("workload", "placement", "recipe")


def _package_json(sub: str, name: str):
    return json.loads(resources.files("tierlab").joinpath(sub, name).read_text())


def schema() -> dict:
    return _package_json("", "schema.json")


def preset_dir() -> Path:
    env = os.environ.get(PRESET_ENV)
    if env:
        return Path(env)
    return Path(str(resources.files("tierlab").joinpath("presets")))


def recipe_dir() -> Path:
    return Path(str(resources.files("tierlab").joinpath("recipes")))


def list_presets() -> list:
    return sorted(p.stem for p in preset_dir().glob("*.json"))


def list_recipes() -> list:
    return sorted(p.stem for p in recipe_dir().glob("*.json"))


def _read_json(path: Path) -> dict:
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}", key="config") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}",
                          key="config") from exc


def locate(name_or_path: str, kind: str = "preset") -> Path:
    """A file path, or a bare preset/recipe name (with or without ``.json``)."""
    p = Path(name_or_path)
    if p.is_file():
        return p
    stem = p.name[:-5] if p.name.endswith(".json") else p.name
    base = preset_dir() if kind == "preset" else recipe_dir()
    cand = base / f"{stem}.json"
    if cand.is_file():
        return cand
    if kind == "preset":
        other = recipe_dir() / f"{stem}.json"
        if other.is_file():
            return other
    raise ConfigError(f"no such config file or {kind} {name_or_path!r}", key="config")


def deep_merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def resolve(doc: dict, _depth: int = 0) -> dict:
    """Expand ``"base": "<preset>"`` inheritance chains."""
    if "base" not in doc:
        return doc
    if _depth > 8:
        raise ConfigError("config inheritance too deep", key="base")
    parent = resolve(_read_json(locate(str(doc["base"]))), _depth + 1)
    child = {k: v for k, v in doc.items() if k != "base"}
    merged = deep_merge(parent, child)
    for k in _REPLACED:  # whole-section replacement: a new workload is not a patch
        if k in child:
            merged[k] = copy.deepcopy(child[k])
    return merged


def load(name_or_path: str) -> dict:
    return resolve(_read_json(locate(name_or_path)))


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def set_path(doc: dict, dotted: str, value) -> None:
    """Assign ``value`` at a dotted path; list items by index or by their ``*_id``."""
    parts = dotted.split(".")
    cur = doc
    for i, part in enumerate(parts):
        last = i == len(parts) - 1
        if isinstance(cur, list):
            idx = _list_index(cur, part, dotted)
            if last:
                cur[idx] = value
                return
            cur = cur[idx]
            continue
        if not isinstance(cur, dict):
            raise ConfigError(f"cannot descend into {'.'.join(parts[:i])}", key=dotted)
        if last:
            cur[part] = value
            return
        if part not in cur:
            cur[part] = {}
        cur = cur[part]


def _list_index(items: list, part: str, dotted: str) -> int:
    if part.isdigit():
        idx = int(part)
        if idx >= len(items):
            raise ConfigError(f"index {idx} out of range", key=dotted)
        return idx
    for idx, item in enumerate(items):
        if isinstance(item, dict) and any(k.endswith("_id") and v == part for k, v in item.items()):
            return idx
    raise ConfigError(f"no list entry with id {part!r}", key=dotted)


def apply_overrides(doc: dict, overrides) -> dict:
    doc = copy.deepcopy(doc)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value", key=item)
        key, _, raw = item.partition("=")
        set_path(doc, key.strip(), _parse_value(raw.strip()))
    return doc


def validate(doc: dict) -> None:
    try:
        jsonschema.validate(doc, schema())
    except jsonschema.ValidationError as exc:
        key = ".".join(str(p) for p in exc.absolute_path)
        if exc.validator == "required":
            missing = re.search(r"'([^']+)'", exc.message)
            key = ".".join(x for x in (key, missing.group(1) if missing else "") if x)
        key = key or "config"
        raise ConfigError(f"config invalid at {key}: {exc.message}", key=str(key)) from exc


def apply_policy(doc: dict, text: str) -> dict:
    """``placement[@tiering]``: e.g. ``oli``, ``interleave:ldram+cxl``, ``first_touch@tiering08``."""
    doc = copy.deepcopy(doc)
    place, _, tier = text.partition("@")
    place = place.strip()
    try:
        kind = parse_kind(place)
        place, tier = "first_touch", tier or kind.value
    except ConfigError:
        pass
    doc["placement"] = parse_policy(place).to_dict()
    tiering = copy.deepcopy(doc.get("tiering", {}))
    new_kind = parse_kind(tier) if tier else parse_kind("no_balance")
    if parse_kind(tiering.get("kind", "no_balance")) != new_kind:
        # per-policy scan chunk defaults apply when the policy changes
        tiering.get("scanner", {}).pop("pages_per_scan", None)
    tiering["kind"] = new_kind.value
    doc["tiering"] = tiering
    return doc


def build(doc: dict) -> SimConfig:
    """Validated config document -> :class:`SimConfig`."""
    validate(doc)
    topo = Topology.from_config(doc)
    wl = ProxyWorkload.from_dict(doc["workload"])
    placement = PlacementPolicy.from_dict(doc.get("placement", {"kind": "first_touch"}))
    tiering = TieringPolicy.from_dict(doc.get("tiering"))
    run = RunSettings.from_dict(doc.get("run"))
    for alias in run.allowed_nodes:
        topo.find_node(alias, topo.host_socket(wl.agent or topo.home_socket))
    return SimConfig(topo, wl, placement, tiering, run)


def topology_to_dict(topo: Topology) -> dict:
    return {
        "devices": [d.to_dict() for d in topo.devices],
        "topology": {
            "home_socket": topo.home_socket,
            "sockets": [{"socket_id": s.socket_id, "cores": s.cores, "local_nodes": list(s.local_nodes)}
                        for s in topo.sockets],
            "gpus": [{"gpu_id": g.gpu_id, "transfer_overhead_ns": g.transfer_overhead_ns} for g in topo.gpus],
        },
        "links": [link.to_dict() for link in topo.links],
    }


def sim_config_to_dict(cfg: SimConfig) -> dict:
    out = topology_to_dict(cfg.topology)
    out["workload"] = cfg.workload.to_dict()
    out["placement"] = cfg.placement.to_dict()
    out["tiering"] = cfg.tiering.to_dict()
    out["run"] = cfg.run.to_dict()
    if cfg.profiles:
        out["profiles"] = [p.__dict__ for p in cfg.profiles]
    return out


def from_preset(preset: str, workload=None, policy: str | None = None, overrides=()) -> SimConfig:
    """Convenience: preset + optional proxy name/dict + policy string + dotted overrides."""
    doc = load(preset)
    if workload is not None:
        doc["workload"] = {"proxy": workload} if isinstance(workload, str) else dict(workload)
    if policy:
        doc = apply_policy(doc, policy)
    return build(apply_overrides(doc, overrides))


__all__ = ["load", "build", "validate", "apply_overrides", "apply_policy", "from_preset", "locate",
           "list_presets", "list_recipes", "schema", "sim_config_to_dict"]
