"""Structured-text configuration.

One YAML file drives the whole stack; sections: sim, sensor, demo, data,
vae, wm, policy, rltc, runtime. Any field omitted falls back to the desk-scale
defaults below.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError


@dataclass
class SimConfig:
    length: float = 0.4                      # workspace extent (m)
    surface_base: float = 0.05               # nominal surface height (m)
    surface_knots: list = field(default_factory=lambda: [[0.0, 0.0], [0.4, 0.0]])
    friction: float = 1.0
    height_offset: float = 0.0               # mutable vertical offset (m)
    dirt_cells: int = 64
    dirt_span: list = field(default_factory=lambda: [0.10, 0.30])
    gel_max: float = 0.0045                  # rigid stop depth (m)
    clear_depth: float = 0.0005              # penetration that wipes dirt (m)
    step_limit: float = 0.003                # per fast tick |dx|,|dz| cap (m)
    grip_limit: float = 0.05                 # per fast tick |dg| cap
    tool_halfwidth: float = 0.012            # sensor footprint half-width (m)
    cam_fu: float = 72.0
    cam_fv: float = 120.0
    cam_cu: float = 32.0
    cam_cv: float = 4.0
    cam_depth: float = 0.5
    image_h: int = 48
    image_w: int = 64


@dataclass
class SensorConfig:
    rows: int = 20
    cols: int = 12
    k_n: float = 250.0                       # capacity fraction per meter
    sigma_g: float = 3.4                     # contact bump width (grid cells)
    eta: float = 0.01                        # noise floor (capacity fraction)
    v_ref: float = 0.05                      # friction saturation speed (m/s)
    overload_ticks: int = 12                 # sustained saturation -> overload


@dataclass
class DemoConfig:
    target_penetration: float = 0.0024       # servo target depth (m)
    approach_speed: float = 0.10             # m/s
    sweep_speed: float = 0.05                # m/s
    servo_gain: float = 0.35                 # fraction of depth error per tick
    settle_ticks: int = 16
    start_x: float = 0.08
    start_z: float = 0.12
    retract_ticks: int = 16
    pos_jitter: float = 0.004                # start pose jitter (m)
    speed_jitter: float = 0.10               # relative speed jitter
    action_noise: float = 0.00012            # per-tick actuation noise (m)
    contact_on: float = 0.25                 # fraction of target mean dz
    heights_train: list = field(default_factory=lambda: [-0.003, 0.0, 0.003])
    heights_unseen: list = field(default_factory=lambda: [-0.006, 0.006])


@dataclass
class DataConfig:
    vision_rate: float = 15.0
    tactile_rate: float = 60.0
    max_sync_err: float = 0.010              # seconds
    tau: float = 0.15                        # contact threshold on mean |d|
    tau_marker: float = 0.05                 # per-marker activity threshold
    k_abnormal: float = 2.0
    motion_eps: float = 0.0008               # trim displacement bound (m)
    trim_window: int = 2
    holdout_frac: float = 0.1


@dataclass
class VaeConfig:
    c_latent: int = 8
    n_down_blocks: int = 2                   # spatial factor s = 2**n
    temporal_factor: int = 4                 # s_t (latent step = 4 raw frames)
    base_channels: int = 12
    freqs: int = 4                           # positional encoding frequencies
    dec_hidden: int = 64
    dec_layers: int = 3
    lambda_kl: float = 1e-6
    variant: str = "implicit"                # implicit|grid|no_posenc|global_token
    clip_len: int = 8
    n_queries: int = 48
    lr: float = 1e-3
    steps: int = 3000
    batch: int = 16


@dataclass
class WmConfig:
    diffusion_steps: int = 100
    beta_min: float = 1e-4
    beta_max: float = 0.02
    cond_frames: int = 2
    pred_frames: int = 6
    channels: int = 24
    cond_width: int = 32
    c_visual: int = 4
    vis_channels: int = 12
    action_repr: str = "2d"                  # 2d|3d_abs|3d_rel
    lambda_dyn: float = 1.0
    lambda_amp: float = 1.0
    ddim_steps: int = 8
    lr: float = 1e-3
    steps: int = 3000
    batch: int = 16
    vis_lr: float = 2e-3
    vis_steps: int = 1200
    vis_batch: int = 8


@dataclass
class PolicyConfig:
    horizon: int = 6
    interp_ratio: int = 4
    d_feat: int = 32
    d_tac: int = 16
    film_channels: int = 32
    blocks: int = 2
    lambda_ct: float = 0.2
    contact_window: int = 8                  # future tactile frames for labels
    pred_len: int = 6                        # predicted frames fed to the LTD
    sampler_steps: int = 10
    plan_step_limit: float = 0.008           # per planner action |dx|,|dz| (m)
    plan_grip_limit: float = 0.02
    use_visual_gen: bool = False
    lr: float = 1e-3
    steps: int = 3000
    batch: int = 16


@dataclass
class RltcConfig:
    history: int = 8
    hidden: int = 48
    alpha: float = 0.3
    clamp_frac: float = 0.25                 # of the micro-step limit
    lr: float = 1e-3
    steps: int = 1500
    batch: int = 32


@dataclass
class RuntimeConfig:
    fast_rate: float = 60.0
    vision_rate: float = 15.0
    replan_frac: float = 0.6667              # consume 2/3 of a chunk, then replan
    seam_steps: int = 2
    deterministic: bool = True
    episode_seconds: float = 8.0
    success_ratio: float = 0.8


_SECTIONS = {
    "sim": SimConfig,
    "sensor": SensorConfig,
    "demo": DemoConfig,
    "data": DataConfig,
    "vae": VaeConfig,
    "wm": WmConfig,
    "policy": PolicyConfig,
    "rltc": RltcConfig,
    "runtime": RuntimeConfig,
}


@dataclass
class Config:
    sim: SimConfig = field(default_factory=SimConfig)
    sensor: SensorConfig = field(default_factory=SensorConfig)
    demo: DemoConfig = field(default_factory=DemoConfig)
    data: DataConfig = field(default_factory=DataConfig)
    vae: VaeConfig = field(default_factory=VaeConfig)
    wm: WmConfig = field(default_factory=WmConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    rltc: RltcConfig = field(default_factory=RltcConfig)
    runtime: RuntimeConfig = field(default_factory=RuntimeConfig)

    def to_dict(self) -> dict:
        return {k: dataclasses.asdict(getattr(self, k)) for k in _SECTIONS}

    def save(self, path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=False))

    @staticmethod
    def load(path=None, overrides: dict | None = None) -> "Config":
        cfg = Config()
        raw = {}
        if path is not None:
            text = Path(path).read_text()
            raw = yaml.safe_load(text) or {}
            if not isinstance(raw, dict):
                raise ConfigError(f"{path}: top level must be a mapping")
        if overrides:
            for key, sub in overrides.items():
                raw.setdefault(key, {}).update(sub)
        for section, payload in raw.items():
            if section not in _SECTIONS:
                raise ConfigError(f"unknown config section {section!r}")
            target = getattr(cfg, section)
            names = {f.name for f in dataclasses.fields(target)}
            for name, value in (payload or {}).items():
                if name not in names:
                    raise ConfigError(f"unknown field {section}.{name}")
                setattr(target, name, value)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.vae.temporal_factor < 1:
            raise ConfigError("vae.temporal_factor must be >= 1")
        ratio = self.data.tactile_rate / self.data.vision_rate
        if abs(ratio - round(ratio)) > 1e-9:
            raise ConfigError("tactile rate must be an integer multiple of vision rate")
        if int(round(ratio)) != self.vae.temporal_factor:
            raise ConfigError("vae.temporal_factor must equal tactile/vision rate ratio")
        if self.policy.interp_ratio < 1:
            raise ConfigError("policy.interp_ratio must be >= 1")
        if not 0.0 <= self.rltc.alpha <= 1.0:
            raise ConfigError("rltc.alpha must lie in [0, 1]")
        if self.vae.variant not in ("implicit", "grid", "no_posenc", "global_token"):
            raise ConfigError(f"unknown vae.variant {self.vae.variant!r}")
        if self.wm.action_repr not in ("2d", "3d_abs", "3d_rel"):
            raise ConfigError(f"unknown wm.action_repr {self.wm.action_repr!r}")
