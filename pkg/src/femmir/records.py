"""Property records, value kinds, and the cost configuration used by CED."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
import copyreg
from types import MappingProxyType
from typing import Any, Iterable, Mapping

MODALITIES = ("text", "image", "video")
VARIANTS = ("adjacency", "cumulative")


class RecordError(ValueError):
    """A record or config failed validation.

    The message carries the record id and a path to the offending field.
    """

    def __init__(self, message: str, record_id: str | None = None, path: str = ""):
        self.record_id = record_id
        self.path = path
        where = []
        if record_id is not None:
            where.append(f"record {record_id!r}")
        if path:
            where.append(path)
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


def norm_prop(name: str) -> str:
    """Case-fold a property name and unify separators to hyphens."""
    out = name.strip().lower()
    for ch in ("_", " "):
        out = out.replace(ch, "-")
    return out


@dataclass(frozen=True)
class PropertyValue:
    kind: str  # "scalar" | "list"
    scalar: str = ""
    items: tuple[str, ...] = ()

    @classmethod
    def of(cls, raw: Any) -> "PropertyValue":
        if raw is None:
            return cls("scalar", "")
        if isinstance(raw, str):
            return cls("scalar", raw.strip())
        if isinstance(raw, (list, tuple)):
            toks = []
            for tok in raw:
                if not isinstance(tok, str):
                    raise TypeError(f"list values must be strings, got {type(tok).__name__}")
                tok = tok.strip()
                if tok:
                    toks.append(tok)
            return cls("list", items=tuple(toks))
        if isinstance(raw, (int, float)) and not isinstance(raw, bool):
            return cls("scalar", str(raw))
        raise TypeError(f"unsupported property value {raw!r}")

    @property
    def is_null(self) -> bool:
        return not self.items if self.kind == "list" else not self.scalar

    def tokens(self) -> tuple[str, ...]:
        if self.kind == "list":
            return self.items
        return (self.scalar,) if self.scalar else ()

    def to_json(self) -> Any:
        return list(self.items) if self.kind == "list" else self.scalar


# read-only views must cross process boundaries for parallel labelling
def _proxy(d: dict) -> Mapping:
    return MappingProxyType(d)


copyreg.pickle(MappingProxyType, lambda m: (_proxy, (dict(m),)))


def _freeze(d: Mapping[str, PropertyValue]) -> Mapping[str, PropertyValue]:
    return MappingProxyType(dict(d))


@dataclass(frozen=True)
class Entity:
    id: str
    entity_type: str
    primary: bool = False
    attrs: Mapping[str, PropertyValue] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "attrs", _freeze(self.attrs))


@dataclass(frozen=True)
class Relation:
    name: str
    subject: str
    object: str
    role: str | None = None

    @property
    def label(self) -> str:
        return f"{self.name}:{self.role}" if self.role else self.name


@dataclass(frozen=True)
class PropertyRecord:
    id: str
    modality: str
    metadata: Mapping[str, PropertyValue] = field(default_factory=dict)
    entities: tuple[Entity, ...] = ()
    relations: tuple[Relation, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "metadata", _freeze(self.metadata))
        object.__setattr__(self, "entities", tuple(self.entities))
        object.__setattr__(self, "relations", tuple(self.relations))

    def entity(self, eid: str) -> Entity:
        for e in self.entities:
            if e.id == eid:
                return e
        raise KeyError(eid)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "modality": self.modality,
            "metadata": {k: v.to_json() for k, v in self.metadata.items()},
            "entities": [
                {
                    "id": e.id,
                    "entity_type": e.entity_type,
                    "primary": e.primary,
                    "attrs": {k: v.to_json() for k, v in e.attrs.items()},
                }
                for e in self.entities
            ],
            "relations": [
                {k: v for k, v in (("name", r.name), ("subject", r.subject),
                                   ("object", r.object), ("role", r.role)) if v is not None}
                for r in self.relations
            ],
        }


_RECORD_KEYS = {"id", "modality", "metadata", "entities", "relations"}
_ENTITY_KEYS = {"id", "entity_type", "primary", "attrs"}
_RELATION_KEYS = {"name", "subject", "object", "role"}


def _check_keys(obj: Any, allowed: set[str], required: set[str], rid, path) -> None:
    if not isinstance(obj, dict):
        raise RecordError("expected a JSON object", rid, path)
    extra = sorted(set(obj) - allowed)
    if extra:
        raise RecordError(f"unknown field(s) {extra}", rid, path)
    missing = sorted(required - set(obj))
    if missing:
        raise RecordError(f"missing field(s) {missing}", rid, path)


def _props(raw: Any, rid, path) -> dict[str, PropertyValue]:
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise RecordError("expected a property map", rid, path)
    out: dict[str, PropertyValue] = {}
    for name, value in raw.items():
        key = norm_prop(name)
        if not key:
            raise RecordError("empty property name", rid, path)
        if key in out:
            raise RecordError(f"property {key!r} given twice after normalisation", rid, path)
        try:
            out[key] = PropertyValue.of(value)
        except TypeError as exc:
            raise RecordError(str(exc), rid, f"{path}.{name}") from None
    return out


def record_from_dict(obj: Any) -> PropertyRecord:
    rid = obj.get("id") if isinstance(obj, dict) else None
    _check_keys(obj, _RECORD_KEYS, {"id", "modality"}, rid, "$")
    if not isinstance(rid, str) or not rid.strip():
        raise RecordError("id must be a non-empty string", None, "$.id")
    modality = obj["modality"]
    if modality not in MODALITIES:
        raise RecordError(f"modality must be one of {MODALITIES}, got {modality!r}", rid, "$.modality")

    entities = []
    seen: set[str] = set()
    for i, e in enumerate(obj.get("entities") or []):
        path = f"$.entities[{i}]"
        _check_keys(e, _ENTITY_KEYS, {"id", "entity_type"}, rid, path)
        eid, etype = e["id"], e["entity_type"]
        if not isinstance(eid, str) or not eid:
            raise RecordError("entity id must be a non-empty string", rid, path + ".id")
        if eid in seen:
            raise RecordError(f"duplicate entity id {eid!r}", rid, path + ".id")
        if not isinstance(etype, str) or not etype.strip():
            raise RecordError("entity_type must be non-empty", rid, path + ".entity_type")
        primary = e.get("primary", False)
        if not isinstance(primary, bool):
            raise RecordError("primary must be a boolean", rid, path + ".primary")
        seen.add(eid)
        entities.append(Entity(eid, etype.strip(), primary, _props(e.get("attrs"), rid, path + ".attrs")))

    relations = []
    for i, r in enumerate(obj.get("relations") or []):
        path = f"$.relations[{i}]"
        _check_keys(r, _RELATION_KEYS, {"name", "subject", "object"}, rid, path)
        for end in ("subject", "object"):
            if r[end] not in seen:
                raise RecordError(f"dangling relation endpoint {end}={r[end]!r}", rid, path)
        if r["subject"] == r["object"]:
            raise RecordError("relation subject and object must differ", rid, path)
        if not isinstance(r["name"], str) or not r["name"].strip():
            raise RecordError("relation name must be non-empty", rid, path + ".name")
        relations.append(Relation(r["name"].strip(), r["subject"], r["object"], r.get("role")))

    return PropertyRecord(
        id=rid,
        modality=modality,
        metadata=_props(obj.get("metadata"), rid, "$.metadata"),
        entities=tuple(entities),
        relations=tuple(relations),
    )


def parse_record(json_text: str) -> PropertyRecord:
    try:
        obj = json.loads(json_text)
    except json.JSONDecodeError as exc:
        raise RecordError(f"malformed JSON: {exc.msg} at char {exc.pos}") from None
    return record_from_dict(obj)


def serialize_record(record: PropertyRecord) -> str:
    return json.dumps(record.to_dict(), ensure_ascii=False, sort_keys=True)


def read_jsonl(path) -> list[PropertyRecord]:
    """Parse a JSON Lines corpus; errors name the 1-based line number."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                records.append(parse_record(line))
            except RecordError as exc:
                raise RecordError(f"line {lineno}: {exc}") from None
    return records


def write_jsonl(records: Iterable[PropertyRecord], fh) -> None:
    for r in records:
        fh.write(serialize_record(r) + "\n")


@dataclass(frozen=True)
class CostConfig:
    rcost: Mapping[str, float] = field(default_factory=dict)
    icost: Mapping[str, float] = field(default_factory=dict)
    ordcmp: Mapping[str, int] = field(default_factory=dict)
    munkres_variant: str = "adjacency"
    edge_icost: float = 1.0
    exact_edge_match_zero: bool = True
    relevance_ced_threshold: float = 3.0
    include_metadata: bool = True
    default_rcost: float = 1.0
    default_icost: float = 1.0

    def __post_init__(self):
        for name in ("rcost", "icost", "ordcmp"):
            object.__setattr__(self, name, MappingProxyType(dict(getattr(self, name))))

    def replace_cost(self, prop: str) -> float:
        return self.rcost.get(prop, self.default_rcost)

    def insert_cost(self, prop: str) -> float:
        return self.icost.get(prop, self.default_icost)

    def ordered(self, prop: str) -> int:
        return self.ordcmp.get(prop, 0)

    def to_dict(self) -> dict:
        return {
            "rcost": dict(self.rcost),
            "icost": dict(self.icost),
            "ordcmp": dict(self.ordcmp),
            "munkres_variant": self.munkres_variant,
            "edge_icost": self.edge_icost,
            "exact_edge_match_zero": self.exact_edge_match_zero,
            "relevance_ced_threshold": self.relevance_ced_threshold,
            "include_metadata": self.include_metadata,
            "default_rcost": self.default_rcost,
            "default_icost": self.default_icost,
        }


# per-attribute mismatch penalties for person retrieval
ATTRIBUTE_PENALTIES = {"top-color": 1.0, "bottom-color": 2.0, "gender": 3.0}


def _cost(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise RecordError(f"{where} must be a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value) or value < 0:
        raise RecordError(f"{where} must be finite and non-negative, got {value}")
    return value


def validate_cost_config(raw: Mapping[str, Any] | CostConfig | None) -> CostConfig:
    """Build a CostConfig from a parsed JSON object, applying defaults."""
    if isinstance(raw, CostConfig):
        raw = raw.to_dict()
    raw = dict(raw or {})
    known = set(CostConfig.__dataclass_fields__)
    extra = sorted(set(raw) - known)
    if extra:
        raise RecordError(f"unknown cost config field(s) {extra}")

    def cost_map(name):
        m = raw.get(name) or {}
        if not isinstance(m, dict):
            raise RecordError(f"{name} must be an object")
        return {norm_prop(k): _cost(v, f"{name}[{k}]") for k, v in m.items()}

    ordcmp = {}
    for k, v in (raw.get("ordcmp") or {}).items():
        if isinstance(v, bool) or v not in (0, 1):
            raise RecordError(f"ordcmp[{k}] must be 0 or 1, got {v!r}")
        ordcmp[norm_prop(k)] = int(v)

    variant = raw.get("munkres_variant", "adjacency")
    if variant not in VARIANTS:
        raise RecordError(f"munkres_variant must be one of {VARIANTS}, got {variant!r}")

    threshold = raw.get("relevance_ced_threshold", 3.0)
    if isinstance(threshold, bool) or not isinstance(threshold, (int, float)):
        raise RecordError("relevance_ced_threshold must be a number")

    for flag in ("exact_edge_match_zero", "include_metadata"):
        if flag in raw and not isinstance(raw[flag], bool):
            raise RecordError(f"{flag} must be a boolean")

    return CostConfig(
        rcost=cost_map("rcost"),
        icost=cost_map("icost"),
        ordcmp=ordcmp,
        munkres_variant=variant,
        edge_icost=_cost(raw.get("edge_icost", 1.0), "edge_icost"),
        exact_edge_match_zero=raw.get("exact_edge_match_zero", True),
        relevance_ced_threshold=float(threshold),
        include_metadata=raw.get("include_metadata", True),
        default_rcost=_cost(raw.get("default_rcost", 1.0), "default_rcost"),
        default_icost=_cost(raw.get("default_icost", 1.0), "default_icost"),
    )


def load_cost_config(path) -> CostConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise RecordError(f"malformed cost config JSON: {exc.msg}") from None
    return validate_cost_config(raw)
