import json

import numpy as np
import pytest

from syncgame import scenario_file as sf
from syncgame.errors import ValidationError
from syncgame.presets import default_scenario, initial_state


def text(doc):
    return sf.dumps(doc)


def test_default_document_builds_reference_scenario():
    resolved, _ = sf.parse_text(text(sf.default_document()))
    cfg = sf.build(resolved)
    assert cfg.scenario == default_scenario()
    np.testing.assert_array_equal(cfg.initial, initial_state())
    np.testing.assert_array_equal(cfg.protocol.weights[:, 0], [0.2, 0.3, 0.0])


def test_shipped_scenario_file_matches_default():
    from pathlib import Path

    path = Path(__file__).parent.parent / "scenarios" / "default.json"
    assert path.read_text(encoding="utf-8") == text(sf.default_document())


def test_unknown_key_names_path_and_line():
    doc = sf.default_document()
    doc["populations"][1]["colour"] = "red"
    src = text(doc)
    with pytest.raises(ValidationError) as info:
        sf.parse_text(src, source="s.json")
    err = info.value
    assert err.path == "populations.1.colour"
    assert "unknown key 'colour'" in str(err)
    assert src.splitlines()[err.line - 1].strip().startswith('"colour"')


def test_type_error_reports_line():
    doc = sf.default_document()
    doc["regions"][2]["reward_pool"] = "lots"
    src = text(doc)
    with pytest.raises(ValidationError) as info:
        sf.parse_text(src)
    assert info.value.path == "regions.2.reward_pool"
    assert '"reward_pool": "lots"' in src.splitlines()[info.value.line - 1]


def test_invariant_violation_after_schema_names_path():
    doc = sf.default_document()
    doc["populations"][0]["traversal_distance"] = [1.0, 2.0]
    with pytest.raises(ValidationError) as info:
        sf.parse_text(text(doc))
    assert info.value.path == "populations.0"
    assert info.value.line is not None


def test_invalid_json_reports_line():
    with pytest.raises(ValidationError) as info:
        sf.parse_text('{\n  "regions": [\n  ,\n}')
    assert info.value.line == 3


def test_km_suffix_is_converted():
    doc = sf.default_document()
    doc["regions"][0]["route_length_km"] = doc["regions"][0].pop("route_length") / 1000
    p = doc["populations"][2]
    p["traversal_distance_km"] = [v / 1000 for v in p.pop("traversal_distance")]
    cfg = sf.build(sf.parse_text(text(doc))[0])
    assert cfg.scenario.regions[0].route_length == pytest.approx(1200.0)
    np.testing.assert_allclose(cfg.scenario.populations[2].traversal_distance, [961, 617, 372])


def test_km_and_meters_together_rejected():
    doc = sf.default_document()
    doc["regions"][0]["route_length_km"] = 1.2
    with pytest.raises(ValidationError):
        sf.parse_text(text(doc))


def test_minimal_document_gets_defaults():
    doc = {"regions": [{"region_id": 0, "route_length": 1000, "reward_pool": 1000},
                       {"region_id": 1, "route_length": 1000, "reward_pool": 1500}],
           "populations": [{"population_id": 0, "size": 100, "strategies": [0, 1],
                            "data_quality": [1, 1], "propulsion_power": 16, "hover_power": 16,
                            "traversal_speed": 4, "sensing_speed": 4}]}
    resolved, _ = sf.parse_text(json.dumps(doc))
    assert resolved["initial_state"] == [[0.5, 0.5]]
    assert resolved["sweep"]["population"] == 0
    assert resolved["sweep"]["alpha"] == [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
    assert sf.build(resolved).scenario.populations[0].unit_energy_cost == 0.001


@pytest.mark.parametrize("kind,weights", [("replicator", [0.0, 1.0]), ("smith", [1.0, 0.0])])
def test_pure_protocol_kinds(kind, weights):
    resolved = sf.resolve(sf.default_document())
    resolved["protocol"]["kind"] = kind
    cfg = sf.build(resolved)
    np.testing.assert_array_equal(cfg.protocol.weights, [weights] * 3)


def test_overrides_replace_scalars_and_revalidate():
    resolved = sf.resolve(sf.default_document())
    out = sf.apply_overrides(resolved, ["protocol.alpha.2=0.5", "integrator.step_size=0.02",
                                        "seed=99"])
    assert out["protocol"]["alpha"][2] == 0.5
    assert out["integrator"]["step_size"] == 0.02 and out["seed"] == 99
    assert resolved["seed"] == 0
    assert sf.build(out).scenario.populations[2].smith_probability == 0.5
    for bad in ("protocol.alpha.2=1.5", "nope.x=1", "protocol=1", "populations.0.size=0",
                "protocol.alpha.9=0.1", "justtext"):
        with pytest.raises(ValidationError):
            sf.apply_overrides(resolved, [bad])


def test_manifest_round_trip():
    resolved = sf.apply_overrides(sf.resolve(sf.default_document()), ["seed=7"])
    man = sf.manifest(resolved, "simulate")
    assert man["seed"] == 7 and man["command"] == "simulate"
    again, _ = sf.parse_text(sf.dumps(man))
    assert again == resolved
    assert sf.manifest(again, "simulate")["manifest_sha256"] == man["manifest_sha256"]
    assert sf.manifest(again, "field")["manifest_sha256"] != man["manifest_sha256"]


def test_generate_is_deterministic():
    assert sf.dumps(sf.generate_scenario(5)) == sf.dumps(sf.generate_scenario(5))
    assert sf.dumps(sf.generate_scenario(5)) != sf.dumps(sf.generate_scenario(6))


def test_generate_default_shape():
    doc = sf.generate_scenario(0)
    assert len(doc["regions"]) == 3 and len(doc["populations"]) == 3
    assert doc["protocol"]["alpha"] == [0.2, 0.3, 0.0]
    sf.build(sf.parse_text(sf.dumps(doc))[0])


def test_generated_values_stay_in_range():
    r = sf.RANGES
    for seed in range(1000):
        P, M = 1 + seed % 4, 1 + (seed // 4) % 4
        doc = sf.generate_scenario(seed, P, M)
        for reg in doc["regions"]:
            assert r["route_length"][0] <= reg["route_length"] <= r["route_length"][1]
            assert r["reward_pool"][0] <= reg["reward_pool"] <= r["reward_pool"][1]
        for pop in doc["populations"]:
            assert r["size"][0] <= pop["size"] <= r["size"][1]
            assert all(r["traversal_distance"][0] <= v <= r["traversal_distance"][1]
                       for v in pop["traversal_distance"])
            assert all(r["data_quality"][0] <= v <= r["data_quality"][1]
                       for v in pop["data_quality"])
            for key in ("propulsion_power", "hover_power"):
                assert r["power"][0] <= pop[key] <= r["power"][1]
            for key in ("traversal_speed", "sensing_speed"):
                assert r["speed"][0] <= pop[key] <= r["speed"][1]
            assert pop["unit_energy_cost"] == 0.001
        sf.validate_document(doc)


def test_generate_rejects_empty_sizes():
    with pytest.raises(ValidationError):
        sf.generate_scenario(0, 0, 3)
