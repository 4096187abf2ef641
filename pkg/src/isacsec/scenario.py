"""Networked ISAC world: geometry, steering vectors, channels and config I/O.

Angle convention
----------------
Every BS carries a uniform linear array laid along the global x-axis.  The
angle ``theta`` of a target seen from a BS is the angle between the array
axis and the BS->target direction, ``theta = arccos(dx / d)`` with
``(dx, dy) = p - q_m``.  It lives in ``[0, pi]`` so ``sin(theta) >= 0``, and
only ``cos(theta)`` enters the steering phase.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .errors import InvalidArgument, InvalidGeometry

SPEED_OF_LIGHT = 299_792_458.0

PAPER_BS_POSITIONS = ((15.0, 22.5), (-25.0, 25.0), (15.0, -30.0))


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(watts):
    return 10.0 * np.log10(np.asarray(watts, dtype=float)) + 30.0


@dataclass(frozen=True)
class SystemConfig:
    """System constants.  Powers are in dBm, rates in bits/s/Hz.

    ``sensing_prior`` adds the stage-1 information ``Q1^-1`` to the Fisher
    information that sets the stage-2 radius.  A single BS only observes the
    angle of the target, so without the prior its location FIM is singular.
    """

    M: int = 3
    N: int = 4
    K: int = 2
    L: int = 1024
    carrier_freq: float = 5e9
    tau: tuple = (0.2, 0.8)
    P_max: float = 20.0
    R_info: float = 5.0
    R_leak: float = 0.5
    noise_user: float = -100.0
    noise_eve: float = -100.0
    noise_sense: float = -100.0
    rician_kappa: float = 10.0
    beta_nlos: tuple = (0.2, 0.2, 0.2)
    Q1: tuple = ((0.25, 0.0), (0.0, 0.25))
    rng_seed: int = 0
    path_loss_exponent: float = 3.0
    user_radius: tuple = (5.0, 15.0)
    rcs: float = 1.0
    sensing_prior: bool = False

    def __post_init__(self):
        object.__setattr__(self, "tau", tuple(float(t) for t in self.tau))
        object.__setattr__(self, "user_radius", tuple(float(r) for r in self.user_radius))
        beta = np.atleast_1d(np.asarray(self.beta_nlos, dtype=float))
        if beta.size == 1:
            beta = np.full(self.M, beta.item())
        object.__setattr__(self, "beta_nlos", tuple(beta.tolist()))
        Q1 = np.asarray(self.Q1, dtype=float)
        object.__setattr__(self, "Q1", tuple(map(tuple, Q1.tolist())))
        self.validate()

    def validate(self):
        for name in ("M", "N", "K", "L"):
            if int(getattr(self, name)) < 1:
                raise InvalidArgument(f"{name} must be >= 1")
        if len(self.tau) != 2 or min(self.tau) <= 0 or abs(sum(self.tau) - 1.0) > 1e-12:
            raise InvalidArgument("tau must be two positive durations summing to 1")
        if len(self.beta_nlos) != self.M or min(self.beta_nlos) < 0:
            raise InvalidArgument("beta_nlos needs one nonnegative bound per BS")
        if self.rician_kappa < 0:
            raise InvalidArgument("rician_kappa must be nonnegative")
        Q1 = np.asarray(self.Q1)
        if Q1.shape != (2, 2) or not np.allclose(Q1, Q1.T):
            raise InvalidArgument("Q1 must be a symmetric 2x2 matrix")
        if np.linalg.eigvalsh(Q1).min() < -1e-12:
            raise InvalidArgument("Q1 must be positive semidefinite")
        if not (0 < self.user_radius[0] <= self.user_radius[1]):
            raise InvalidArgument("user_radius must satisfy 0 < r_min <= r_max")

    @property
    def wavelength(self):
        return SPEED_OF_LIGHT / self.carrier_freq

    @classmethod
    def paper(cls, **overrides):
        """Full-scale defaults (three BSs, four antennas, 1024 snapshots)."""
        return replace(cls(), **overrides)

    @classmethod
    def desk(cls, **overrides):
        """Reduced defaults used for CI-sized runs."""
        base = cls(M=2, N=3, K=2, L=256, beta_nlos=(0.2, 0.2))
        return replace(base, **overrides)


@dataclass(frozen=True)
class GeometrySpec:
    bs_positions: tuple
    eve_position_true: tuple = (0.0, 0.0)
    eve_position_est: tuple = (0.0, 0.0)

    @classmethod
    def paper(cls, M=3):
        if M > len(PAPER_BS_POSITIONS):
            raise InvalidArgument(f"default layout only has {len(PAPER_BS_POSITIONS)} BSs")
        return cls(bs_positions=PAPER_BS_POSITIONS[:M])


def angle_and_distance(q, p):
    """Angle (array-axis convention) and distance from point ``q`` to ``p``."""
    diff = np.asarray(p, dtype=float) - np.asarray(q, dtype=float)
    d = float(np.hypot(diff[0], diff[1]))
    if d <= 0.0:
        raise InvalidGeometry("target colocated with a BS")
    return float(np.arccos(np.clip(diff[0] / d, -1.0, 1.0))), d


@dataclass(frozen=True)
class Geometry:
    bs_positions: np.ndarray
    eve_position_true: np.ndarray
    eve_position_est: np.ndarray
    d_bar: np.ndarray
    theta_bar: np.ndarray
    d_true: np.ndarray
    theta_true: np.ndarray

    @classmethod
    def from_spec(cls, spec: GeometrySpec):
        q = np.asarray(spec.bs_positions, dtype=float).reshape(-1, 2)
        p = np.asarray(spec.eve_position_true, dtype=float)
        p_bar = np.asarray(spec.eve_position_est, dtype=float)
        est = [angle_and_distance(qm, p_bar) for qm in q]
        true = [angle_and_distance(qm, p) for qm in q]
        return cls(
            bs_positions=q,
            eve_position_true=p,
            eve_position_est=p_bar,
            d_bar=np.array([d for _, d in est]),
            theta_bar=np.array([t for t, _ in est]),
            d_true=np.array([d for _, d in true]),
            theta_true=np.array([t for t, _ in true]),
        )

    @property
    def M(self):
        return len(self.bs_positions)


@dataclass(frozen=True)
class ChannelSet:
    """All channel realizations.

    ``h[mp, m, k]`` is the channel from BS ``mp`` to user ``(m, k)``;
    ``alpha_mm[mp, m]`` is the round-trip gain of the sensing link that
    leaves BS ``mp``, hits the eavesdropper and returns to BS ``m``.
    """

    h: np.ndarray
    g_bar: np.ndarray
    g_true: np.ndarray
    g_nlos: np.ndarray
    alpha: np.ndarray
    alpha_mm: np.ndarray
    user_positions: np.ndarray


@dataclass(frozen=True)
class Scenario:
    config: SystemConfig
    geometry: Geometry
    channels: ChannelSet

    @property
    def M(self):
        return self.config.M

    @property
    def N(self):
        return self.config.N

    @property
    def K(self):
        return self.config.K

    @property
    def tau(self):
        return np.asarray(self.config.tau)

    @property
    def p_max(self):
        return float(dbm_to_watts(self.config.P_max))

    @property
    def sigma2_user(self):
        return float(dbm_to_watts(self.config.noise_user))

    @property
    def sigma2_eve(self):
        return float(dbm_to_watts(self.config.noise_eve))

    @property
    def sigma2_sense(self):
        return float(dbm_to_watts(self.config.noise_sense))

    @property
    def beta_nlos(self):
        return np.asarray(self.config.beta_nlos)

    @property
    def Q1(self):
        return np.asarray(self.config.Q1)

    def with_config(self, **overrides):
        """Same geometry and channel draws with different scalar requirements.

        Only fields that do not change array shapes or random draws may be
        overridden (rates, power budget, noise levels, durations, Q1, L and
        the sensing-prior switch).
        """
        allowed = {"R_info", "R_leak", "P_max", "tau", "noise_user", "noise_eve",
                   "noise_sense", "Q1", "L", "sensing_prior"}
        bad = set(overrides) - allowed
        if bad:
            raise InvalidArgument(f"cannot override {sorted(bad)} without rebuilding channels")
        return replace(self, config=replace(self.config, **overrides))


def steering_vector(theta, N):
    if N < 1:
        raise InvalidArgument("N must be >= 1")
    n = np.arange(N)
    return np.exp(1j * np.pi * n * np.cos(theta))


def sample_nlos_component(beta, N, rng):
    """Draw a complex N-vector uniformly from the ball of radius ``beta``."""
    if beta < 0:
        raise InvalidArgument("beta must be nonnegative")
    z = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    radius = beta * rng.uniform() ** (1.0 / (2 * N))
    norm = np.linalg.norm(z)
    return z * (radius / norm) if norm > 0 else np.zeros(N, dtype=complex)


def user_path_gain(cfg: SystemConfig, d):
    """Log-distance power gain with free-space reference at 1 m."""
    pl0 = (cfg.wavelength / (4 * np.pi)) ** 2
    return pl0 * np.asarray(d, dtype=float) ** (-cfg.path_loss_exponent)


def build_scenario(config: SystemConfig, geometry_spec: GeometrySpec | None = None) -> Scenario:
    if geometry_spec is None:
        geometry_spec = GeometrySpec.paper(config.M)
    config.validate()
    geom = Geometry.from_spec(geometry_spec)
    if geom.M != config.M:
        raise InvalidArgument(f"geometry has {geom.M} BSs but config says M={config.M}")
    M, N, K = config.M, config.N, config.K
    rng = np.random.default_rng(config.rng_seed)
    lam = config.wavelength
    kappa = config.rician_kappa

    r_min, r_max = config.user_radius
    users = np.empty((M, K, 2))
    for m in range(M):
        for k in range(K):
            r = np.sqrt(rng.uniform(r_min**2, r_max**2))
            phi = rng.uniform(0, 2 * np.pi)
            users[m, k] = geom.bs_positions[m] + r * np.array([np.cos(phi), np.sin(phi)])

    h = np.empty((M, M, K, N), dtype=complex)
    for mp in range(M):
        for m in range(M):
            for k in range(K):
                d = np.linalg.norm(users[m, k] - geom.bs_positions[mp])
                small = (rng.standard_normal(N) + 1j * rng.standard_normal(N)) / np.sqrt(2)
                h[mp, m, k] = np.sqrt(user_path_gain(config, d)) * small

    alpha = lam / (4 * np.pi * geom.d_bar) * np.exp(1j * rng.uniform(0, 2 * np.pi, M))
    phases = rng.uniform(0, 2 * np.pi, (M, M))
    phases = np.triu(phases) + np.triu(phases, 1).T
    amp = lam * np.sqrt(config.rcs) / (4 * np.pi) ** 1.5
    alpha_mm = amp / np.outer(geom.d_bar, geom.d_bar) * np.exp(1j * phases)

    w_los = np.sqrt(kappa / (1 + kappa))
    w_nlos = np.sqrt(1 / (1 + kappa))
    g_nlos = np.stack([sample_nlos_component(config.beta_nlos[m], N, rng) for m in range(M)])
    g_bar = np.stack([alpha[m] * w_los * steering_vector(geom.theta_bar[m], N) for m in range(M)])
    g_true = np.stack([
        alpha[m] * (w_los * steering_vector(geom.theta_true[m], N) + w_nlos * g_nlos[m])
        for m in range(M)
    ])
    channels = ChannelSet(h=h, g_bar=g_bar, g_true=g_true, g_nlos=g_nlos, alpha=alpha,
                          alpha_mm=alpha_mm, user_positions=users)
    return Scenario(config=config, geometry=geom, channels=channels)


# --- config / scenario files -------------------------------------------------

_GEOMETRY_KEYS = ("bs_positions", "eve_position_true", "eve_position_est")


def config_to_dict(config: SystemConfig, geometry_spec: GeometrySpec) -> dict:
    out = asdict(config)
    out.update(asdict(geometry_spec))
    return json.loads(json.dumps(out))


def config_from_dict(data: dict):
    data = dict(data)
    known = set(SystemConfig.__dataclass_fields__) | set(_GEOMETRY_KEYS) | {"channels"}
    unknown = set(data) - known
    if unknown:
        raise InvalidArgument(f"unknown config keys: {sorted(unknown)}")
    geo = {k: data.pop(k) for k in _GEOMETRY_KEYS if k in data}
    data.pop("channels", None)
    config = SystemConfig(**data)
    if "bs_positions" not in geo:
        geo["bs_positions"] = PAPER_BS_POSITIONS[: config.M]
    geometry = GeometrySpec(
        bs_positions=tuple(tuple(map(float, q)) for q in geo["bs_positions"]),
        eve_position_true=tuple(map(float, geo.get("eve_position_true", (0.0, 0.0)))),
        eve_position_est=tuple(map(float, geo.get("eve_position_est", geo.get("eve_position_true", (0.0, 0.0))))),
    )
    return config, geometry


def load_config(path):
    return config_from_dict(json.loads(Path(path).read_text()))


def save_config(path, config: SystemConfig, geometry_spec: GeometrySpec):
    Path(path).write_text(json.dumps(config_to_dict(config, geometry_spec), indent=2) + "\n")


def _hex(arr):
    return np.ascontiguousarray(arr, dtype=np.complex128).tobytes().hex()


def _unhex(text, shape):
    return np.frombuffer(bytes.fromhex(text), dtype=np.complex128).reshape(shape).copy()


def scenario_to_dict(scn: Scenario) -> dict:
    spec = GeometrySpec(
        bs_positions=tuple(map(tuple, scn.geometry.bs_positions.tolist())),
        eve_position_true=tuple(scn.geometry.eve_position_true.tolist()),
        eve_position_est=tuple(scn.geometry.eve_position_est.tolist()),
    )
    out = config_to_dict(scn.config, spec)
    ch = scn.channels
    out["channels"] = {
        name: {"shape": list(np.shape(getattr(ch, name))), "hex": _hex(getattr(ch, name))}
        for name in ("h", "g_bar", "g_true", "g_nlos", "alpha", "alpha_mm", "user_positions")
    }
    return out


def scenario_from_dict(data: dict) -> Scenario:
    config, spec = config_from_dict(data)
    geom = Geometry.from_spec(spec)
    raw = data["channels"]
    arrays = {name: _unhex(v["hex"], tuple(v["shape"])) for name, v in raw.items()}
    arrays["user_positions"] = arrays["user_positions"].real.copy()
    return Scenario(config=config, geometry=geom, channels=ChannelSet(**arrays))


def dumps_scenario(scn: Scenario) -> str:
    return json.dumps(scenario_to_dict(scn), sort_keys=True)
