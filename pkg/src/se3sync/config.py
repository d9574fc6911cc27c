"""Simulation configs: dataclass, TOML round-trip, presets and initial conditions.

Config files are TOML. Agent and edge indices in files are 1-based; in memory
they are 0-based.

    [topology]
    n_agents = 6
    edges = [[1, 2], [2, 3], [3, 4], [2, 5], [5, 6]]
"""

from dataclasses import asdict, dataclass, fields, replace
from typing import Optional
import sys

import numpy as np

from . import liegroup as lg
from . import potential as pt
from .controller import ClosedLoop, Gains, Inertia
from .errors import ConfigError
from .network import build_topology
from .state import SwarmState

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

FIG2_A = [[69.02, 56.08, 61.19], [56.08, 56.25, 51.17], [61.19, 51.17, 57.66]]
FIG2_B = [18.24, 14.43, 15.96]
FIG2_D = 5.0
FIG2_V = [0.2686, 0.8549, 0.4438]
FIG2_EDGES = [(0, 1), (1, 2), (2, 3), (1, 4), (4, 5)]


@dataclass
class SimConfig:
    n_agents: int
    edges: list
    A: list
    b: list
    d: float
    mass: list
    inertia: list
    k_X: float = 100.0
    k_xi: float = 1.0
    k_e: float = 0.6
    k_theta: float = 1.0
    theta_set: Optional[list] = None
    gamma: Optional[float] = None
    delta: Optional[float] = None
    u_c1: Optional[list] = None
    margins: tuple = pt.DEFAULT_MARGINS
    h: float = 1e-3
    t_end: float = 30.0
    eps_sync: float = 1e-3
    sample_dt: float = 1e-2
    # initial conditions: a preset name, explicit arrays, or a random seed
    preset: Optional[str] = None
    rotations: Optional[list] = None
    positions: Optional[list] = None
    twists: Optional[list] = None
    thetas: Optional[list] = None
    seed: Optional[int] = None
    box: float = 5.0
    twist_std: float = 0.0
    random_rotations: bool = True
    disable_jumps: bool = False
    certificate_strictness: str = "strict"

    def __post_init__(self):
        self.n_agents = int(self.n_agents)
        self.edges = [tuple(int(v) for v in e) for e in self.edges]
        n = self.n_agents
        if np.ndim(self.mass) == 0:
            self.mass = [float(self.mass)] * n
        J = np.asarray(self.inertia, dtype=float)
        if J.shape in ((3,), (3, 3)):
            self.inertia = [J.tolist()] * n
        if len(self.mass) != n or len(self.inertia) != n:
            raise ConfigError("mass and inertia need one entry per agent")
        if self.certificate_strictness not in ("strict", "record"):
            raise ConfigError("certificate_strictness must be 'strict' or 'record'")
        for name in ("h", "t_end", "eps_sync", "sample_dt"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")

    def with_(self, **changes):
        return replace(self, **changes)

    def build(self):
        """Validate everything and return (ClosedLoop, initial SwarmState)."""
        topo = build_topology(self.n_agents, self.edges)
        w = pt.validate_weight(self.A, self.b, self.d)
        p = pt.synth_params(
            w,
            self.theta_set,
            tuple(self.margins),
            gamma=self.gamma,
            delta=self.delta,
            u_c1=self.u_c1,
        )
        gains = Gains(self.k_X, self.k_xi, self.k_e, self.k_theta)
        inertias = tuple(Inertia(np.asarray(J, float), m) for J, m in zip(self.inertia, self.mass))
        sys_ = ClosedLoop(topo, w, p, gains, inertias)
        return sys_, initial_state(self, sys_)


def initial_state(cfg, sys_):
    topo = sys_.topo
    n = topo.n_agents
    if cfg.preset is not None:
        if cfg.preset != "fig2":
            raise ConfigError(f"unknown preset {cfg.preset!r}")
        poses = fig2_initial_poses(sys_.weight)
        twists = np.zeros((n, 6))
    elif cfg.rotations is not None:
        R = np.asarray(cfg.rotations, dtype=float).reshape(n, 3, 3)
        P = np.zeros((n, 3)) if cfg.positions is None else np.asarray(cfg.positions, float)
        poses = [lg.pose(lg.project_rotation(Ri), pi) for Ri, pi in zip(R, P.reshape(n, 3))]
        twists = np.zeros((n, 6)) if cfg.twists is None else np.asarray(cfg.twists, float)
    elif cfg.seed is not None:
        rng = np.random.default_rng(cfg.seed)
        poses, twists = random_initial(rng, n, cfg.box, cfg.twist_std, cfg.random_rotations)
    else:
        raise ConfigError("no initial condition: give preset, rotations or seed")
    return SwarmState.from_agents(topo, poses, twists, cfg.thetas)


def fig2_initial_poses(w, v=FIG2_V):
    """Alternating +-pi/2 rotations about ``v`` with p_i = (I - R_i) b/d.

    Every relative pose then is a pi-rotation about ``v`` with the matching
    translation, i.e. (close to) an undesired critical point when ``v`` is
    (close to) an eigenvector of W.
    """
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    poses = []
    for i in range(6):
        angle = -np.pi / 2 if i % 2 == 0 else np.pi / 2
        R = lg.rot_angle_axis(angle, v)
        poses.append(lg.pose(R, (np.eye(3) - R) @ w.offset))
    return poses


def fig2_config(**overrides):
    """The six-UAV tree scenario: gains, inertia, weights and switching constants."""
    cfg = SimConfig(
        n_agents=6,
        edges=list(FIG2_EDGES),
        A=FIG2_A,
        b=FIG2_B,
        d=FIG2_D,
        mass=2.4,
        inertia=[0.043, 0.041, 0.082],
        k_X=100.0,
        k_xi=1.0,
        k_e=0.6,
        k_theta=1.0,
        theta_set=[0.3 * np.pi],
        gamma=0.33,
        delta=0.02,
        preset="fig2",
    )
    return replace(cfg, **overrides) if overrides else cfg


def haar_angle(u):
    """Invert the Haar angle CDF F(t) = (t - sin t)/pi on [0, pi].

    A uniformly random rotation has angle density (1 - cos t)/pi and a
    uniformly distributed axis.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    target = np.pi * u
    lo = np.zeros_like(target)
    hi = np.full_like(target, np.pi)
    # bisection: F is monotone, 60 halvings reach double precision on [0, pi]
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        below = mid - np.sin(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def random_rotation(rng):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = haar_angle(rng.uniform())[0]
    return lg.rot_angle_axis(angle, axis)


def random_initial(rng, n, box, twist_std=0.0, rotations=True):
    """Haar rotations (or identities), positions uniform in [-box, box]^3."""
    poses = []
    for _ in range(n):
        R = random_rotation(rng) if rotations else np.eye(3)
        poses.append(lg.pose(R, rng.uniform(-box, box, size=3)))
    twists = rng.normal(scale=twist_std, size=(n, 6)) if twist_std > 0 else np.zeros((n, 6))
    return poses, twists


_SECTIONS = {
    "topology": ("n_agents", "edges"),
    "inertia": ("mass", "inertia"),
    "weight": ("A", "b", "d"),
    "synergy": ("theta_set", "gamma", "delta", "u_c1", "margins"),
    "gains": ("k_X", "k_xi", "k_e", "k_theta"),
    "integrator": ("h", "t_end", "eps_sync", "sample_dt"),
    "initial": (
        "preset",
        "rotations",
        "positions",
        "twists",
        "thetas",
        "seed",
        "box",
        "twist_std",
        "random_rotations",
    ),
    "flags": ("disable_jumps", "certificate_strictness"),
}


def config_from_dict(data):
    flat = {}
    known = {f.name for f in fields(SimConfig)}
    for section, values in data.items():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        for key, value in values.items():
            if key not in _SECTIONS[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            flat[key] = value
    missing = {"n_agents", "edges", "A", "b", "d", "mass", "inertia"} - flat.keys()
    if missing:
        raise ConfigError(f"config is missing {sorted(missing)}")
    flat["edges"] = [(i - 1, j - 1) for i, j in flat["edges"]]
    if "margins" in flat:
        flat["margins"] = tuple(flat["margins"])
    assert flat.keys() <= known
    return SimConfig(**flat)


def config_to_dict(cfg):
    flat = asdict(cfg)
    flat["edges"] = [[i + 1, j + 1] for i, j in cfg.edges]
    flat["margins"] = list(cfg.margins)
    out = {}
    for section, keys in _SECTIONS.items():
        values = {}
        for k in keys:
            v = flat[k]
            if v is None:
                continue
            values[k] = np.asarray(v).tolist() if isinstance(v, (np.ndarray, tuple)) else v
        if values:
            out[section] = values
    return out


def load_config(path):
    with open(path, "rb") as f:
        return config_from_dict(tomllib.load(f))


def dump_config(cfg, path=None):
    text = tomli_w.dumps(config_to_dict(cfg))
    if path is not None:
        with open(path, "w") as f:
            f.write(text)
    return text
