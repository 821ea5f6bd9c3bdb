"""Transfer scenario catalog: golden stability, axis isolation, shift."""
import os

import numpy as np
import pytest

from adaflight import imitation, mmd, scenarios, sim
from adaflight.errors import InvalidArgumentError

GOLDEN_DIR = os.path.join(os.path.dirname(__file__), "golden")


class TestCatalog:
    def test_known_names(self):
        assert set(scenarios.list_scenarios()) == {
            "systems", "weather", "environment", "sanity_gamma"
        }

    def test_unknown_name_raises(self):
        with pytest.raises(InvalidArgumentError):
            scenarios.build_scenario("winter_wonderland")

    def test_golden_stability(self):
        for name in scenarios.list_scenarios():
            path = os.path.join(GOLDEN_DIR, f"scenario_{name}.json")
            with open(path) as f:
                golden = f.read()
            assert scenarios.build_scenario(name).to_json() == golden


class TestAxisIsolation:
    def test_systems_changes_sensor_and_dynamics_only(self):
        s = scenarios.build_scenario("systems")
        assert s.source.cfg.appearance == s.target.cfg.appearance
        assert s.source.cfg.sensor != s.target.cfg.sensor
        assert s.source.cfg.dynamics != s.target.cfg.dynamics
        assert s.source.cfg.sensor.width == 64
        assert s.target.cfg.sensor.width == 96
        assert s.source.density == s.target.density

    def test_weather_changes_appearance_only(self):
        s = scenarios.build_scenario("weather")
        assert s.source.cfg.sensor == s.target.cfg.sensor
        assert s.source.cfg.dynamics == s.target.cfg.dynamics
        assert s.source.cfg.appearance != s.target.cfg.appearance
        assert s.target.cfg.appearance.background == 0.9
        assert s.target.cfg.appearance.tree_radius_scale == pytest.approx(0.7)

    def test_environment_changes_density_and_labels(self):
        s = scenarios.build_scenario("environment")
        assert s.source.label_space == "coarse3"
        assert s.target.label_space == "fine"
        assert s.source.density == pytest.approx(1 / 36)
        assert s.target.density == pytest.approx(1 / 9)
        assert s.source.cfg == s.target.cfg

    def test_sanity_gamma_is_monotone_warp(self):
        s = scenarios.build_scenario("sanity_gamma")
        assert s.target.cfg.sensor.gamma == pytest.approx(2.2)
        assert s.target.cfg.appearance.invert is True
        assert s.source.cfg.sensor.gamma == 1.0
        assert s.source.cfg.appearance.invert is False
        assert s.source.cfg.dynamics == s.target.cfg.dynamics


class TestDetectableShift:
    @pytest.mark.parametrize("name", ["systems", "weather", "environment",
                                      "sanity_gamma"])
    def test_permutation_test_rejects(self, name):
        s = scenarios.build_scenario(name)
        src_env = sim.Environment(s.source.cfg, s.source.density)
        tgt_env = sim.Environment(s.target.cfg, s.target.density)
        a = imitation.collect_random_scans(src_env, 200, seed=11)
        b = imitation.collect_random_scans(tgt_env, 200, seed=22)
        # differing sensor widths are bridged by linear resampling
        width = min(a.shape[1], b.shape[1])
        a = imitation.resample_scan(a, width)
        b = imitation.resample_scan(b, width)
        bank = mmd.default_bank(np.vstack([a, b]))
        p = mmd.permutation_test(a, b, bank, n_perms=199, seed=5)
        assert p < 0.01
