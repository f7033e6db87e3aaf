import json

import pytest
from hypothesis import given, strategies as st

from femmir.records import (CostConfig, PropertyValue, RecordError, load_cost_config, norm_prop,
                            parse_record, read_jsonl, serialize_record, validate_cost_config)

from conftest import records

BASE = {"id": "r1", "modality": "image", "metadata": {"place": "Elm St"},
        "entities": [{"id": "p1", "entity_type": "Person", "primary": True,
                      "attrs": {"TOP_COLOR": "red", "gender": "male"}},
                     {"id": "c1", "entity_type": "Clothes", "attrs": {"color": ["red", "blue"]}}],
        "relations": [{"name": "wearing", "subject": "p1", "object": "c1"}]}


def test_property_names_normalised():
    rec = parse_record(json.dumps(BASE))
    assert "top-color" in rec.entities[0].attrs
    assert norm_prop("Upper Wear_Color") == "upper-wear-color"


def test_value_kinds():
    assert PropertyValue.of(["a", " ", "b"]).items == ("a", "b")
    assert PropertyValue.of(None).is_null
    assert PropertyValue.of([]).is_null
    assert PropertyValue.of(5.5).scalar == "5.5"
    with pytest.raises(TypeError):
        PropertyValue.of({"x": 1})


@pytest.mark.parametrize("mutate, message", [
    (lambda d: d["relations"][0].update(object="c9"), "dangling relation endpoint"),
    (lambda d: d["relations"][0].update(object="p1"), "must differ"),
    (lambda d: d["entities"].append(dict(d["entities"][0])), "duplicate entity id"),
    (lambda d: d.update(modality="audio"), "modality"),
    (lambda d: d.update(colour="x"), "unknown field"),
    (lambda d: d["entities"][0]["attrs"].update({"top color": "x"}), "given twice"),
])
def test_invalid_records(mutate, message):
    d = json.loads(json.dumps(BASE))
    mutate(d)
    with pytest.raises(RecordError, match=message):
        parse_record(json.dumps(d))


def test_malformed_json_line_number(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text(json.dumps(BASE) + "\n{oops\n")
    with pytest.raises(RecordError, match="line 2"):
        read_jsonl(p)


def test_records_are_immutable():
    rec = parse_record(json.dumps(BASE))
    with pytest.raises(TypeError):
        rec.entities[0].attrs["gender"] = PropertyValue.of("female")


@given(records())
def test_round_trip(rec):
    text = serialize_record(rec)
    assert serialize_record(parse_record(text)) == text
    assert parse_record(text) == rec


def test_cost_config_defaults_and_errors(tmp_path):
    cfg = validate_cost_config({"rcost": {"Top_Color": 1}})
    assert cfg.replace_cost("top-color") == 1.0
    assert cfg.replace_cost("unseen") == 1.0 and cfg.insert_cost("unseen") == 1.0
    for bad in ({"rcost": {"gender": -1}}, {"icost": {"x": float("inf")}}, {"ordcmp": {"x": 2}},
                {"ordcmp": {"x": True}}, {"munkres_variant": "greedy"}, {"nope": 1}):
        with pytest.raises(RecordError):
            validate_cost_config(bad)
    p = tmp_path / "cost.json"
    p.write_text("{not json")
    with pytest.raises(RecordError, match="malformed"):
        load_cost_config(p)


costs = st.dictionaries(st.sampled_from(["gender", "top-color", "x"]), st.floats(0, 10), max_size=3)


@given(costs, costs, st.dictionaries(st.sampled_from(["a", "b"]), st.sampled_from([0, 1])),
       st.sampled_from(["adjacency", "cumulative"]), st.floats(0, 5))
def test_validate_idempotent(r, i, o, variant, thr):
    once = validate_cost_config({"rcost": r, "icost": i, "ordcmp": o, "munkres_variant": variant,
                                 "relevance_ced_threshold": thr})
    assert validate_cost_config(once) == once
    assert validate_cost_config(once.to_dict()) == once
    assert isinstance(once, CostConfig)
