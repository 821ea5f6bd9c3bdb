"""Demonstration datasets, velocity discretization, and imitation loops.

Expert lateral velocities are discretized into K odd uniform bins over
[-v_max, v_max] so the policy head can be a softmax classifier; acting
converts the softmax back to a velocity as the probability-weighted mean
of bin centers, which keeps every command inside [-v_max, v_max].
"""
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import dan, net as nets, sim
from .errors import InvalidArgumentError

COARSE3_FRACTIONS = {"left": -0.5, "center": 0.0, "right": 0.5}
# Expert commands within this fraction of v_max of zero coarsen to "center".
COARSE3_DEADBAND = 0.15


def discretize(v, k, v_max):
    """Bin index of a velocity; out-of-range values clamp to a boundary bin."""
    if k < 3 or k % 2 == 0:
        raise InvalidArgumentError("bin count must be odd and >= 3")
    if v_max <= 0:
        raise InvalidArgumentError("v_max must be > 0")
    b = int(math.floor((v + v_max) / (2.0 * v_max / k)))
    return min(max(b, 0), k - 1)


def bin_center(b, k, v_max):
    """Midpoint velocity of a bin; exact zero for the center bin."""
    if not 0 <= b < k:
        raise InvalidArgumentError(f"bin {b} out of range for k={k}")
    return (2 * b + 1 - k) * v_max / k


def bin_centers(k, v_max):
    return np.array([bin_center(b, k, v_max) for b in range(k)])


@dataclass
class Dataset:
    """Scan/velocity pairs from one domain; scans are an (n, W) matrix."""

    scans: np.ndarray
    velocities: np.ndarray
    domain: str = ""
    label_space: str = "fine"  # "fine" or "coarse3"

    def __post_init__(self):
        self.scans = np.asarray(self.scans, dtype=np.float64)
        if self.scans.ndim != 2:
            self.scans = self.scans.reshape(len(self.velocities), -1)
        self.velocities = np.asarray(self.velocities, dtype=np.float64)

    def __len__(self):
        return len(self.velocities)

    @property
    def width(self):
        return self.scans.shape[1]

    def labels(self, k, v_max):
        return np.array([discretize(v, k, v_max) for v in self.velocities])

    def extend(self, other):
        """Append-only aggregation; returns a new Dataset."""
        if len(self) and other.width != self.width:
            raise InvalidArgumentError("cannot aggregate datasets of mixed scan width")
        return Dataset(
            np.concatenate([self.scans, other.scans]),
            np.concatenate([self.velocities, other.velocities]),
            self.domain,
            self.label_space,
        )

    @classmethod
    def empty(cls, width, domain="", label_space="fine"):
        return cls(np.zeros((0, width)), np.zeros(0), domain, label_space)


def save_dataset(ds, path):
    """JSON Lines: one {"scan": [...], "velocity": v, "domain": tag} per line."""
    with open(path, "w", newline="\n") as f:
        for scan, v in zip(ds.scans, ds.velocities):
            f.write(
                json.dumps(
                    {"scan": list(scan), "velocity": float(v), "domain": ds.domain}
                )
            )
            f.write("\n")


def load_dataset(path, label_space="fine"):
    scans, vels, domain = [], [], ""
    width = None
    with open(path) as f:
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            scan = rec["scan"]
            if width is None:
                width = len(scan)
            elif len(scan) != width:
                raise InvalidArgumentError(f"{path}: mixed scan widths")
            s = np.asarray(scan, dtype=np.float64)
            if s.min(initial=0.0) < 0.0 or s.max(initial=0.0) > 1.0:
                raise InvalidArgumentError(f"{path}: scan entries outside [0, 1]")
            scans.append(s)
            vels.append(rec["velocity"])
            domain = rec.get("domain", domain)
    if not scans:
        raise InvalidArgumentError(f"{path}: empty dataset")
    return Dataset(np.array(scans), np.array(vels), domain, label_space)


def resample_scan(scan, width):
    """Linear interpolation onto a different pixel count (sensor-width shim)."""
    scan = np.asarray(scan, dtype=np.float64)
    if scan.shape[-1] == width:
        return scan
    src = np.linspace(0.0, 1.0, scan.shape[-1])
    dst = np.linspace(0.0, 1.0, width)
    if scan.ndim == 1:
        return np.interp(dst, src, scan)
    return np.stack([np.interp(dst, src, row) for row in scan])


def center_scans(scans):
    """Map raw [0, 1] intensities onto the [-1, 1] network input range.

    Zero-mean inputs keep the first-layer gradients from all pushing in
    the same direction, which noticeably speeds up training on this task.
    Datasets store raw scans; centering happens at the network boundary
    (training and decode) so stored data stays in sensor units.
    """
    return 2.0 * np.asarray(scans, dtype=np.float64) - 1.0


def policy_act(net, scan, v_max=1.0):
    """Expected-velocity decode of the softmax head; bounded by v_max."""
    scan = center_scans(scan)
    probs = nets.forward(net, scan[None, :]).outputs[-1][0]
    centers = bin_centers(len(probs), v_max)
    return float(probs @ centers)


def net_policy(net, v_max=1.0):
    """Wrap a network as an episode policy (scan only; state ignored)."""
    width = net.input_dim

    def act(scan, state):
        return policy_act(net, resample_scan(scan, width), v_max)

    return act


def coarsen_velocity(v, v_max):
    """Map a fine command onto the coarse left/center/right label set."""
    if v < -COARSE3_DEADBAND * v_max:
        return COARSE3_FRACTIONS["left"] * v_max
    if v > COARSE3_DEADBAND * v_max:
        return COARSE3_FRACTIONS["right"] * v_max
    return COARSE3_FRACTIONS["center"] * v_max


def behavior_clone(env, n_meters, seed, episode_max_dist=None, label_space="fine"):
    """Expert-piloted rollouts logged tick-by-tick until n_meters of flight.

    If the expert crashes the episode restarts in a fresh world and the
    crash tick is excluded from the record.
    """
    if n_meters <= 0:
        return Dataset.empty(env.cfg.sensor.width, "source", label_space)
    seeder = np.random.default_rng(seed)
    scans, vels = [], []
    meters = 0.0
    max_dist = episode_max_dist or env.length
    while meters < n_meters:
        wseed, eseed = (int(s) for s in seeder.integers(2**63, size=2))
        world = env.make_world(wseed)
        pilot = sim.expert_pilot(world, v_max=env.v_max, r_drone=env.r_drone)

        def logging_pilot(scan, state):
            cmd = pilot(scan, state)
            scans.append(scan)
            vels.append(cmd)
            return cmd

        res = sim.run_episode(
            logging_pilot, world, env.cfg, max_dist, eseed,
            v_max=env.v_max, r_drone=env.r_drone,
        )
        if res.crashed and scans:
            scans.pop()
            vels.pop()
        meters += res.distance_flown
    if label_space == "coarse3":
        vels = [coarsen_velocity(v, env.v_max) for v in vels]
    return Dataset(np.array(scans), np.array(vels), "source", label_space)


def collect_random_scans(env, n_scans, seed):
    """Unlabeled scans from random-policy rollouts (no expert needed)."""
    seeder = np.random.default_rng(seed)
    scans = []
    while len(scans) < n_scans:
        wseed, eseed, pseed = (int(s) for s in seeder.integers(2**63, size=3))
        world = env.make_world(wseed)
        policy = sim.random_policy(env.v_max, pseed)
        res = sim.run_episode(
            policy, world, env.cfg, env.length, eseed,
            v_max=env.v_max, r_drone=env.r_drone, keep_scans=True,
        )
        scans.extend(res.scans)
    return np.array(scans[:n_scans])


@dataclass
class TrainRecipe:
    """How to fit a policy network on a dataset (used by DAgger and BC)."""

    k_bins: int = 9
    init_seed: int = 0
    cfg: dan.DanConfig = field(default_factory=lambda: dan.DanConfig(lam=0.0))

    def fit(self, ds, v_max):
        net = nets.make_policy_net(ds.width, self.k_bins, seed=self.init_seed)
        labels = ds.labels(self.k_bins, v_max)
        scans = center_scans(ds.scans)
        trained, _ = dan.train_dan(
            net, scans, labels, scans[:2], replace(self.cfg, lam=0.0)
        )
        return trained


def dagger(env, recipe, iterations, betas, per_iter_meters, seed,
           episode_max_dist=None):
    """Dataset-aggregation imitation: mix expert and learner per tick,
    always label with the expert, retrain from scratch on the aggregate.

    episode_max_dist caps each rollout so a fixed meter budget spreads
    over many distinct worlds instead of a handful of long flights.
    """
    if iterations < 1:
        raise InvalidArgumentError("iterations must be >= 1")
    betas = list(betas)
    if len(betas) < iterations or betas[0] != 1.0 or any(
        b2 > b1 for b1, b2 in zip(betas, betas[1:])
    ):
        raise InvalidArgumentError("betas must be non-increasing with beta_1 = 1")
    seeder = np.random.default_rng(seed)
    length = env.length if episode_max_dist is None else min(
        env.length, float(episode_max_dist)
    )
    aggregate = Dataset.empty(env.cfg.sensor.width, "source")
    learner = None
    for it in range(iterations):
        beta = betas[it]
        scans, vels = [], []
        meters = 0.0
        while meters < per_iter_meters:
            wseed, eseed, mseed = (int(s) for s in seeder.integers(2**63, size=3))
            world = env.make_world(wseed)
            mix_rng = np.random.default_rng(mseed)
            pilot = sim.expert_pilot(world, v_max=env.v_max, r_drone=env.r_drone)
            policy = net_policy(learner, env.v_max) if learner is not None else None

            def mixed(scan, state):
                expert_cmd = pilot(scan, state)
                scans.append(scan)
                vels.append(expert_cmd)
                if policy is None or mix_rng.random() < beta:
                    return expert_cmd
                return policy(scan, state)

            res = sim.run_episode(
                mixed, world, env.cfg, length, eseed,
                v_max=env.v_max, r_drone=env.r_drone,
            )
            if res.crashed and scans:
                scans.pop()
                vels.pop()
            meters += res.distance_flown
        aggregate = aggregate.extend(
            Dataset(np.array(scans), np.array(vels), "source")
        )
        learner = recipe.fit(aggregate, env.v_max)
    return learner, aggregate
