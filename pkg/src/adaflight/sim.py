"""Deterministic 2D cluttered-forest flight simulator.

A drone flies down a corridor at constant forward speed, controlling only
its lateral velocity. Its sole sensor is a 1D intensity scan rendered by
per-pixel ray casting over a horizontal field of view (appearance only,
no depth channel): proximity must be inferred from intensity and apparent
size. A privileged expert pilot that reads true world state stands in for
a human demonstrator.

Everything is a pure function of its inputs plus an explicit RNG, so
episodes replay bit-for-bit given the same seed. Mirroring the world
(negating tree x) mirrors the rendered scan and negates the expert
command exactly, which the test suite exploits as a free oracle.
"""
import dataclasses
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleDensityError, InvalidArgumentError

RENDER_RANGE = 40.0  # m; rays see nothing beyond this
ATTENUATION = 0.05  # m^-1; intensity factor 1/(1 + ATTENUATION * distance)
EXPERT_GAIN = 1.5  # s^-1 proportional steering gain
EXPERT_LOOKAHEAD = 10.0  # m of downrange planning horizon
EXPERT_BAND = 1.0  # m of downrange depth per planning band
EXPERT_KAPPA = 0.55  # lateral meters reachable per forward meter
EXPERT_MARGIN = 0.1   # extra lateral clearance around trees, m
CLUTTER_PROB_PER_RATE = 0.2  # per-pixel speckle probability per unit clutter rate
START_CLEAR_ZONE = 6.0  # m of tree-free corridor at the start


@dataclass(frozen=True)
class SensorConfig:
    width: int = 64
    fov_deg: float = 100.0
    noise_std: float = 0.02
    gamma: float = 1.0
    rolling_skew: float = 0.0  # lateral sampling offset per unit v_lat

    def __post_init__(self):
        if self.width < 8:
            raise InvalidArgumentError("sensor width must be >= 8")
        if not 10.0 < self.fov_deg < 180.0:
            raise InvalidArgumentError("fov must be in (10, 180) degrees")


@dataclass(frozen=True)
class AppearanceConfig:
    background: float = 0.55
    tree_intensity: tuple = (0.15, 0.35)
    tree_radius_scale: float = 1.0
    clutter_rate: float = 0.0  # per m^2
    clutter_intensity: float = 0.8
    invert: bool = False


@dataclass(frozen=True)
class DynamicsConfig:
    forward_speed: float = 1.5  # m/s
    lateral_tau: float = 0.3  # s
    wind_std: float = 0.0  # m/s per tick
    control_rate: float = 15.0  # Hz

    def __post_init__(self):
        if self.lateral_tau <= 0 or self.control_rate <= 0:
            raise InvalidArgumentError("tau and control rate must be > 0")

    @property
    def dt(self):
        return 1.0 / self.control_rate


@dataclass(frozen=True)
class DomainConfig:
    sensor: SensorConfig = field(default_factory=SensorConfig)
    appearance: AppearanceConfig = field(default_factory=AppearanceConfig)
    dynamics: DynamicsConfig = field(default_factory=DynamicsConfig)

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(
            sensor=SensorConfig(**d["sensor"]),
            appearance=AppearanceConfig(
                **{
                    **d["appearance"],
                    "tree_intensity": tuple(d["appearance"]["tree_intensity"]),
                }
            ),
            dynamics=DynamicsConfig(**d["dynamics"]),
        )


@dataclass(frozen=True)
class ForestWorld:
    trees: np.ndarray  # (n, 4): x, y, radius, appearance in [0,1]; sorted by y
    half_width: float
    length: float
    density: float
    seed: int

    def mirrored(self):
        t = self.trees.copy()
        if len(t):
            t[:, 0] = -t[:, 0]
        return dataclasses.replace(self, trees=t)


@dataclass(frozen=True)
class DroneState:
    x: float = 0.0
    y: float = 0.0
    v_lat: float = 0.0
    alive: bool = True

    def mirrored(self):
        return dataclasses.replace(self, x=-self.x, v_lat=-self.v_lat)


@dataclass
class EpisodeResult:
    distance_flown: float
    crashed: bool
    trees_passed: int
    trees_hit: int
    trajectory: list  # (tick, x, y, v_lat)
    commands: list
    scans: list = None  # populated only when requested


def generate_world(
    density,
    half_width,
    length,
    seed,
    radius_range=(0.15, 0.35),
    r_drone=0.3,
    max_rejects=10_000,
):
    """Rejection-sampled tree field honoring a minimum separation.

    Separation between trees i and j is at least r_i + r_j + 2*r_drone +
    0.2 m, so a legal gap always exists. The first few meters of corridor
    are kept clear so every policy starts from a collision-free state.
    """
    if density <= 0:
        raise InvalidArgumentError("density must be > 0")
    rng = np.random.default_rng(seed)
    r_max = radius_range[1]
    if 2 * half_width < 2 * (r_max + r_drone) + 1.0:
        raise InvalidArgumentError("corridor too narrow for the separation invariant")
    n_target = rng.poisson(density * 2.0 * half_width * length)
    placed = []
    for _ in range(n_target):
        r = rng.uniform(*radius_range)
        appearance = rng.uniform(0.0, 1.0)
        for attempt in range(max_rejects):
            x = rng.uniform(-(half_width - r), half_width - r)
            y = rng.uniform(START_CLEAR_ZONE, length)
            ok = True
            for px, py, pr, _ in placed:
                sep = r + pr + 2.0 * r_drone + 0.2
                if (x - px) ** 2 + (y - py) ** 2 < sep * sep:
                    ok = False
                    break
            if ok:
                placed.append((x, y, r, appearance))
                break
        else:
            raise InfeasibleDensityError(
                f"could not place tree after {max_rejects} rejections"
            )
    trees = np.array(placed, dtype=np.float64).reshape(-1, 4)
    trees = trees[np.argsort(trees[:, 1], kind="stable")]
    return ForestWorld(trees, float(half_width), float(length), float(density), seed)


def check_world_legal(world, r_drone=0.3):
    """Post-generation check of the minimum-separation invariant."""
    t = world.trees
    for i in range(len(t)):
        if abs(t[i, 0]) > world.half_width - t[i, 2]:
            return False
        for j in range(i + 1, len(t)):
            sep = t[i, 2] + t[j, 2] + 2.0 * r_drone + 0.2
            d2 = (t[i, 0] - t[j, 0]) ** 2 + (t[i, 1] - t[j, 1]) ** 2
            if d2 < sep * sep:
                return False
    return True


def save_world(world, path):
    doc = {
        "schema_version": 1,
        "seed": world.seed,
        "half_width": world.half_width,
        "length": world.length,
        "density": world.density,
        "trees": [list(row) for row in world.trees.tolist()],
    }
    with open(path, "w", newline="\n") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")


def load_world(path):
    with open(path) as f:
        doc = json.load(f)
    if doc.get("schema_version") != 1:
        raise InvalidArgumentError(f"{path}: unsupported world schema")
    trees = np.array(doc["trees"], dtype=np.float64).reshape(-1, 4)
    return ForestWorld(
        trees, doc["half_width"], doc["length"], doc["density"], doc["seed"]
    )


def render_scan(world, state, cfg, rng):
    """Render the 1D intensity scan seen from the drone's pose.

    Per pixel: cast a ray over the FOV; the nearest intersecting tree sets
    the intensity (its appearance mapped into the domain's tree-intensity
    range, attenuated with distance), otherwise the background shows. Then
    clutter speckle, additive noise, gamma, optional inversion, clamp.
    Rolling skew samples each pixel from a laterally offset pose.
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    sen, app = cfg.sensor, cfg.appearance
    w = sen.width
    pix = np.arange(w, dtype=np.float64)
    angles = (pix - (w - 1) / 2.0) * (math.radians(sen.fov_deg) / w)
    dx = np.sin(angles)
    dy = np.cos(angles)
    if sen.rolling_skew != 0.0:
        ox = state.x + sen.rolling_skew * ((pix + 0.5) / w - 0.5) * state.v_lat
    else:
        ox = np.full(w, state.x)

    scan = np.full(w, app.background)
    t = world.trees
    lo = np.searchsorted(t[:, 1], state.y, side="right")
    hi = np.searchsorted(t[:, 1], state.y + RENDER_RANGE, side="right")
    near = t[lo:hi]
    if len(near):
        radii = near[:, 2] * app.tree_radius_scale
        cx = near[None, :, 0] - ox[:, None]  # (w, n)
        cy = near[None, :, 1] - state.y
        tt = dx[:, None] * cx + dy[:, None] * cy
        perp2 = cx * cx + cy * cy - tt * tt
        r2 = radii[None, :] ** 2
        hit = (tt > 0.0) & (perp2 <= r2)
        dist = np.where(hit, tt - np.sqrt(np.maximum(r2 - perp2, 0.0)), np.inf)
        dist[dist <= 0.0] = np.inf
        j = np.argmin(dist, axis=1)
        dmin = dist[np.arange(w), j]
        seen = np.isfinite(dmin)
        ti_lo, ti_hi = app.tree_intensity
        base = ti_lo + near[j, 3] * (ti_hi - ti_lo)
        scan = np.where(seen, base / (1.0 + ATTENUATION * dmin), scan)

    if app.clutter_rate > 0.0:
        p = min(1.0, app.clutter_rate * CLUTTER_PROB_PER_RATE)
        mask = rng.random(w) < p
        scan = np.where(mask, app.clutter_intensity, scan)
    if sen.noise_std > 0.0:
        scan = scan + rng.normal(0.0, sen.noise_std, w)
    scan = np.clip(scan, 0.0, 1.0)
    if sen.gamma != 1.0:
        scan = scan**sen.gamma
    if app.invert:
        scan = 1.0 - scan
    return np.clip(scan, 0.0, 1.0)


def step(state, command, cfg, rng, v_max=1.0):
    """First-order lateral response plus optional wind; constant forward rate."""
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    dyn = cfg.dynamics
    if abs(command) > v_max + 1e-12:
        raise InvalidArgumentError(f"|command| exceeds v_max={v_max}")
    dt = dyn.dt
    v = state.v_lat + (dt / dyn.lateral_tau) * (command - state.v_lat)
    if dyn.wind_std > 0.0:
        v += rng.normal(0.0, dyn.wind_std)
    v = min(max(v, -(v_max + 0.5)), v_max + 0.5)
    return DroneState(
        x=state.x + v * dt,
        y=state.y + dyn.forward_speed * dt,
        v_lat=v,
        alive=state.alive,
    )


def check_collision(world, state, r_drone=0.3):
    """Strict overlap with a tree or a corridor wall; tangency is not a crash."""
    if abs(state.x) > world.half_width - r_drone:
        return True
    t = world.trees
    lo = np.searchsorted(t[:, 1], state.y - 2.0, side="left")
    hi = np.searchsorted(t[:, 1], state.y + 2.0, side="right")
    for x, y, r, _ in t[lo:hi]:
        if (state.x - x) ** 2 + (state.y - y) ** 2 < (r + r_drone) ** 2:
            return True
    return False


def _subtract_blocked(lo, hi, intervals):
    """Free segments of [lo, hi] after removing the sorted blocked intervals."""
    segs = []
    cur = lo
    for b_lo, b_hi in intervals:
        if b_lo > cur:
            segs.append((cur, min(b_lo, hi)))
        cur = max(cur, b_hi)
    if cur < hi:
        segs.append((cur, hi))
    return [(a, b) for a, b in segs if b > a]


def expert_policy(world, state, lookahead=EXPERT_LOOKAHEAD, v_max=1.0, r_drone=0.3):
    """Privileged pilot: funnel planning over depth bands of the lookahead.

    Trees are grouped into downrange bands. Walking bands outward, the set
    of laterally reachable positions (a cone growing at EXPERT_KAPPA m of
    lateral travel per forward meter) is intersected with the band's free
    space, keeping the widest piece (nearest to the drone on ties). A
    backward pass clamps the final piece's midpoint through every earlier
    piece, giving a near-term target consistent with all constraints; the
    command is proportional to the remaining lateral error. If a band has
    no reachable free piece, the nearest free piece ignoring the cone is
    taken (least-bad dodge). Exactly anti-symmetric under world mirroring.
    """
    t = world.trees
    lo_i = np.searchsorted(t[:, 1], state.y, side="right")
    hi_i = np.searchsorted(t[:, 1], state.y + lookahead, side="right")
    trees = t[lo_i:hi_i]
    wall_l = -world.half_width + r_drone
    wall_r = world.half_width - r_drone
    pieces = []
    feas = (state.x, state.x)
    prev_y = state.y
    n_bands = int(math.ceil(lookahead / EXPERT_BAND))
    for bi in range(n_bands):
        y0 = state.y + bi * EXPERT_BAND
        y1 = y0 + EXPERT_BAND
        grow = EXPERT_KAPPA * (y1 - prev_y)
        prev_y = y1
        flo = max(feas[0] - grow, wall_l)
        fhi = min(feas[1] + grow, wall_r)
        sel = trees[(trees[:, 1] > y0) & (trees[:, 1] <= y1)]
        blocked = sorted(
            (x - (r + r_drone + EXPERT_MARGIN), x + (r + r_drone + EXPERT_MARGIN))
            for x, _, r, _ in sel
        )
        segs = _subtract_blocked(flo, fhi, blocked)
        if not segs:
            segs = _subtract_blocked(wall_l, wall_r, blocked) or [(wall_l, wall_r)]
            best = min(segs, key=lambda s: abs((s[0] + s[1]) / 2.0 - state.x))
        else:
            best = max(
                segs,
                key=lambda s: (s[1] - s[0], -abs((s[0] + s[1]) / 2.0 - state.x)),
            )
        pieces.append(best)
        feas = best
    target = (pieces[-1][0] + pieces[-1][1]) / 2.0
    for a, b in reversed(pieces[:-1]):
        target = min(max(target, a), b)
    cmd = EXPERT_GAIN * (target - state.x)
    return min(max(cmd, -v_max), v_max)


def run_episode(
    policy,
    world,
    cfg,
    max_dist,
    seed,
    v_max=1.0,
    r_drone=0.3,
    keep_scans=False,
):
    """Fly one episode; ends at the first crash or at max_dist meters.

    `policy(scan, state)` returns a lateral command; learned policies must
    use only the scan (the state argument exists for the privileged expert
    and for logging wrappers). Bitwise reproducible given the seed.
    """
    if max_dist > world.length:
        raise InvalidArgumentError("max_dist exceeds corridor length")
    rng = np.random.default_rng(seed)
    state = DroneState()
    trajectory = [(0, state.x, state.y, state.v_lat)]
    commands = []
    scans = [] if keep_scans else None
    crashed = False
    tick = 0
    while state.y < max_dist:
        scan = render_scan(world, state, cfg, rng)
        if keep_scans:
            scans.append(scan)
        cmd = float(policy(scan, state))
        cmd = min(max(cmd, -v_max), v_max)
        commands.append(cmd)
        state = step(state, cmd, cfg, rng, v_max=v_max)
        tick += 1
        trajectory.append((tick, state.x, state.y, state.v_lat))
        if check_collision(world, state, r_drone):
            crashed = True
            break
    hit_idx = None
    if crashed and len(world.trees):
        t = world.trees
        d2 = (t[:, 0] - state.x) ** 2 + (t[:, 1] - state.y) ** 2
        over = d2 < (t[:, 2] + r_drone) ** 2
        if over.any():
            hit_idx = int(np.argmax(over))
    hit_tree = int(hit_idx is not None)
    passed = int(np.sum(world.trees[:, 1] < state.y))
    if hit_idx is not None and world.trees[hit_idx, 1] < state.y:
        passed -= 1
    return EpisodeResult(
        distance_flown=float(state.y),
        crashed=crashed,
        trees_passed=max(passed, 0),
        trees_hit=hit_tree,
        trajectory=trajectory,
        commands=commands,
        scans=scans,
    )


def random_policy(v_max, seed):
    """Uniform random lateral commands; the evaluation lower bound."""
    rng = np.random.default_rng(seed)

    def act(scan, state):
        return rng.uniform(-v_max, v_max)

    return act


def expert_pilot(world, lookahead=EXPERT_LOOKAHEAD, v_max=1.0, r_drone=0.3):
    """Wrap the privileged expert as an episode policy."""

    def act(scan, state):
        return expert_policy(world, state, lookahead, v_max, r_drone)

    return act


@dataclass(frozen=True)
class Environment:
    """A domain configuration bound to world-generation parameters."""

    cfg: DomainConfig
    density: float = 1.0 / 36.0
    half_width: float = 10.0
    length: float = 200.0
    r_drone: float = 0.3
    v_max: float = 1.0

    def make_world(self, seed):
        return generate_world(
            self.density, self.half_width, self.length, seed, r_drone=self.r_drone
        )
