import json
import shutil

import pytest

from tierlab import config as C
from tierlab.errors import ConfigError

from conftest import tiny_doc


def test_presets_and_recipes_listed():
    assert C.list_presets() == ["system_a", "system_b", "system_c"]
    assert {"fig2_sweep", "fig6_loaded_latency", "oli_compare", "pmo3_faults"} <= set(C.list_recipes())


@pytest.mark.parametrize("name", ["system_a", "system_b", "system_c"])
def test_presets_validate(name):
    C.validate(C.load(name))
    C.build(C.load(name))


def test_recipes_inherit_and_replace_workload():
    doc = C.load("fig6_loaded_latency")
    base = C.load("system_b")
    assert "base" not in doc
    assert doc["devices"] == base["devices"]
    assert doc["workload"]["max_outstanding"] == 48
    assert "proxy" not in doc["workload"]  # replaced wholesale, not merged


def test_child_patches_nested_sections(tmp_path):
    child = {"base": "system_b", "run": {"seed": 99}}
    p = tmp_path / "child.json"
    p.write_text(json.dumps(child))
    doc = C.load(str(p))
    assert doc["run"]["seed"] == 99
    assert doc["devices"] == C.load("system_b")["devices"]


def test_overrides_by_index_and_id():
    doc = C.load("system_b")
    out = C.apply_overrides(doc, ["devices.cxl.base_latency_ns=300", "links.0.latency_ns=81.5", "run.seed=3",
                                  "workload.threads=4"])
    assert next(d for d in out["devices"] if d["device_id"] == "cxl")["base_latency_ns"] == 300
    assert out["links"][0]["latency_ns"] == 81.5
    assert out["run"]["seed"] == 3 and out["workload"]["threads"] == 4
    assert doc["run"].get("seed") != 3  # input untouched
    for bad in ["devices.hbm.base_latency_ns=1", "devices.9.base_latency_ns=1", "noequals"]:
        with pytest.raises(ConfigError):
            C.apply_overrides(doc, [bad])


def test_schema_errors_name_the_key():
    doc = tiny_doc()
    doc["devices"][0]["peak_bandwidth_gbps"] = "fast"
    with pytest.raises(ConfigError) as e:
        C.build(doc)
    assert e.value.key == "devices.0.peak_bandwidth_gbps"
    doc = tiny_doc()
    del doc["devices"][1]["base_latency_ns"]
    with pytest.raises(ConfigError) as e:
        C.build(doc)
    assert e.value.key == "devices.1.base_latency_ns"
    doc = tiny_doc()
    doc["run"]["warp"] = 9
    with pytest.raises(ConfigError) as e:
        C.build(doc)
    assert "run" in e.value.key


def test_malformed_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{ not json")
    with pytest.raises(ConfigError, match="malformed JSON"):
        C.load(str(p))
    with pytest.raises(ConfigError):
        C.load("no_such_preset")


def test_policy_strings():
    doc = C.apply_policy(C.load("system_b"), "first_touch@tiering08")
    assert doc["placement"]["kind"] == "FIRST_TOUCH" and doc["tiering"]["kind"] == "TIERING_08"
    doc = C.apply_policy(doc, "interleave:ldram+cxl")
    assert doc["placement"]["node_set"] == ["ldram", "cxl"] and doc["tiering"]["kind"] == "NO_BALANCE"
    assert C.apply_policy(doc, "tpp")["tiering"]["kind"] == "TPP"


def test_preset_env_dir(tmp_path, monkeypatch):
    shutil.copy(C.locate("system_b"), tmp_path / "lab.json")
    monkeypatch.setenv(C.PRESET_ENV, str(tmp_path))
    assert C.list_presets() == ["lab"]
    assert C.load("lab")["devices"] == json.loads((tmp_path / "lab.json").read_text())["devices"]


def test_sim_config_roundtrip_digest():
    a = C.from_preset("system_b", "latency_bound", "preferred:cxl")
    b = C.from_preset("system_b", "latency_bound", "preferred:cxl")
    assert C.sim_config_to_dict(a) == C.sim_config_to_dict(b)
    assert a.policy_label == b.policy_label
