"""Named source/target domain pairs for the transfer experiments.

Each scenario shifts exactly the axes it is about: `systems` changes the
sensor and the dynamics but not the appearance; `weather` changes only
the appearance; `environment` changes location (tree density) and the
label granularity of the source data. `sanity_gamma` is a synthetic
monotone intensity warp (gamma + inversion) used as a hard end-to-end
gate, since an alignable pixel-level shift is the cleanest way to certify
the adaptation machinery.
"""
import json
from dataclasses import dataclass

from .errors import InvalidArgumentError
from .sim import AppearanceConfig, DomainConfig, DynamicsConfig, SensorConfig

SCHEMA_VERSION = 1
LOW_DENSITY = 1.0 / 36.0
HIGH_DENSITY = 1.0 / 9.0

SCENARIO_NAMES = ("systems", "weather", "environment", "sanity_gamma")


@dataclass(frozen=True)
class DomainSide:
    cfg: DomainConfig
    density: float
    label_space: str  # "fine" or "coarse3"


@dataclass(frozen=True)
class Scenario:
    name: str
    source: DomainSide
    target: DomainSide
    notes: str

    def to_json(self):
        doc = {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "notes": self.notes,
            "source": {
                "cfg": self.source.cfg.to_dict(),
                "density": self.source.density,
                "label_space": self.source.label_space,
            },
            "target": {
                "cfg": self.target.cfg.to_dict(),
                "density": self.target.density,
                "label_space": self.target.label_space,
            },
        }
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def _base_cfg():
    return DomainConfig(
        sensor=SensorConfig(width=64, fov_deg=100.0, noise_std=0.02, gamma=1.0),
        appearance=AppearanceConfig(
            background=0.55,
            tree_intensity=(0.15, 0.35),
            clutter_rate=0.0,
            clutter_intensity=0.8,
        ),
        dynamics=DynamicsConfig(forward_speed=1.5, lateral_tau=0.3, wind_std=0.0),
    )


def build_scenario(name):
    if name == "systems":
        # Sensor and dynamics shift; appearance identical.
        appearance = AppearanceConfig(
            background=0.55, tree_intensity=(0.15, 0.35),
            clutter_rate=0.2, clutter_intensity=0.8,
        )
        source = DomainConfig(
            sensor=SensorConfig(width=64, fov_deg=100.0, noise_std=0.03,
                                rolling_skew=2.0),
            appearance=appearance,
            dynamics=DynamicsConfig(lateral_tau=0.35, wind_std=0.08),
        )
        target = DomainConfig(
            sensor=SensorConfig(width=96, fov_deg=100.0, noise_std=0.01,
                                rolling_skew=0.0),
            appearance=appearance,
            dynamics=DynamicsConfig(lateral_tau=0.15, wind_std=0.03),
        )
        return Scenario(
            name,
            DomainSide(source, LOW_DENSITY, "fine"),
            DomainSide(target, LOW_DENSITY, "fine"),
            "shaky low-res rolling-shutter platform to a stiffer, cleaner one",
        )
    if name == "weather":
        # Appearance-only shift; sensor and dynamics identical.
        base = _base_cfg()
        source = DomainConfig(
            sensor=base.sensor,
            appearance=AppearanceConfig(
                background=0.55, tree_intensity=(0.15, 0.35),
                clutter_rate=0.5, clutter_intensity=0.3,
            ),
            dynamics=base.dynamics,
        )
        target = DomainConfig(
            sensor=base.sensor,
            appearance=AppearanceConfig(
                background=0.9, tree_intensity=(0.25, 0.4),
                tree_radius_scale=0.7,
                clutter_rate=0.05, clutter_intensity=0.3,
            ),
            dynamics=base.dynamics,
        )
        return Scenario(
            name,
            DomainSide(source, LOW_DENSITY, "fine"),
            DomainSide(target, LOW_DENSITY, "fine"),
            "dark cluttered summer foliage to bright sparse winter",
        )
    if name == "environment":
        # Location shift (density) plus coarse source labels.
        base = _base_cfg()
        return Scenario(
            name,
            DomainSide(base, LOW_DENSITY, "coarse3"),
            DomainSide(base, HIGH_DENSITY, "fine"),
            "coarse left/center/right source labels, denser target site; "
            "source-side evaluation is reported but not gated",
        )
    if name == "sanity_gamma":
        base = _base_cfg()
        target = DomainConfig(
            sensor=SensorConfig(width=64, fov_deg=100.0, noise_std=0.02, gamma=2.2),
            appearance=AppearanceConfig(
                background=0.55, tree_intensity=(0.15, 0.35),
                clutter_rate=0.0, clutter_intensity=0.8, invert=True,
            ),
            dynamics=base.dynamics,
        )
        return Scenario(
            name,
            DomainSide(base, LOW_DENSITY, "fine"),
            DomainSide(target, LOW_DENSITY, "fine"),
            "monotone intensity warp (gamma 2.2 + inversion); acceptance gate",
        )
    raise InvalidArgumentError(f"unknown scenario {name!r}")


def list_scenarios():
    return list(SCENARIO_NAMES)
