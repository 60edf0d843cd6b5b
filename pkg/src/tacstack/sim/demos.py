"""Scripted wipe demonstrator.

Phases: approach (descend over the dirt start), contact-servo (regulate mean
normal deformation to the target), lateral sweep clearing dirt while holding
the servo, retract. Streams are emitted at native rates with slightly offset
timestamps; per-tick actuation noise makes the servo corrections visible in
the action record, which is what downstream imitation needs to learn from.
"""

from __future__ import annotations

import numpy as np

from ..config import Config
from ..data.trajectory import RawTrajectory, Stream
from ..errors import DataValidationError
from ..numerics.rng import Rng
from .world import WipeSim

_STREAM_OFFSETS = {"vision": 0.0, "tactile": 0.0012, "proprio": 0.0007}


def grid_mean_gain(cfg: Config) -> float:
    """Mean of the unit-peak contact bump over the marker grid."""
    sc = cfg.sensor
    c_row = (sc.rows - 1) / 2.0
    c_col = (sc.cols - 1) / 2.0
    rr, cc = np.meshgrid(np.arange(sc.rows), np.arange(sc.cols), indexing="ij")
    bump = np.exp(-((rr - c_row) ** 2 + (cc - c_col) ** 2) / (2 * sc.sigma_g ** 2))
    return float(bump.mean())


def target_mean_dz(cfg: Config) -> float:
    """Servo setpoint on measured mean d_z implied by the penetration target."""
    return cfg.sensor.k_n * cfg.demo.target_penetration * grid_mean_gain(cfg)


class ServoController:
    """Tactile feedback law shared by the demonstrator and recovery demos."""

    def __init__(self, cfg: Config):
        self.cfg = cfg
        self.mean_gain = grid_mean_gain(cfg)
        self.target = target_mean_dz(cfg)

    def dz_correction(self, mean_dz: float) -> float:
        # convert the deformation error back to meters of penetration
        p_err = (self.target - mean_dz) / (self.cfg.sensor.k_n * self.mean_gain)
        step = -self.cfg.demo.servo_gain * p_err
        lim = self.cfg.sim.step_limit
        return float(np.clip(step, -lim, lim))


def scripted_wipe_demo(cfg: Config, rng: Rng, height_offset: float = 0.0,
                       perturbations: list[tuple[float, float]] | None = None,
                       jitter: bool = True) -> RawTrajectory:
    demo = cfg.demo
    if demo.target_penetration <= 0:
        raise DataValidationError("demo target deformation must be positive")
    if demo.target_penetration > cfg.sim.gel_max:
        raise DataValidationError("demo target deformation unreachable (gel bottoms out)")

    sim = WipeSim(cfg, rng, height_offset=height_offset)
    if perturbations:
        for t_trig, jump in perturbations:
            sim.inject_perturbation(jump, t_trig)

    j = (lambda s: 1.0 + rng.uniform((), -s, s)) if jitter else (lambda s: 1.0)
    sim.state.x = demo.start_x + (rng.uniform((), -demo.pos_jitter, demo.pos_jitter) if jitter else 0.0)
    sim.state.z = demo.start_z + (rng.uniform((), -demo.pos_jitter, demo.pos_jitter) if jitter else 0.0)
    approach = demo.approach_speed * j(demo.speed_jitter)
    sweep = demo.sweep_speed * j(demo.speed_jitter)

    servo = ServoController(cfg)
    dt = 1.0 / cfg.data.tactile_rate
    s_t = cfg.vae.temporal_factor
    sweep_end = cfg.sim.dirt_span[1] + cfg.sim.tool_halfwidth

    vision_t, vision_v = [], []
    tac_t, tac_v = [], []
    prop_t, prop_v = [], []
    act_t, act_v = [], []
    pending: list[np.ndarray] = []

    phase = "approach"
    settle = 0
    max_ticks = int(cfg.data.tactile_rate * 20)
    tick = 0
    last_mean_dz = 0.0

    while phase != "done" and tick < max_ticks:
        if tick % s_t == 0:
            obs = sim.observe(rng)
            vision_t.append(sim.state.t + _STREAM_OFFSETS["vision"])
            vision_v.append(obs.image.astype(np.float32))
            last_mean_dz = float(obs.tactile.field[:, :, 2].mean())
            if pending:
                act_t.append(vision_t[-2] if len(vision_t) > 1 else vision_t[-1])
                act_v.append(np.sum(pending, axis=0).astype(np.float32))
                pending = []
        else:
            frame = sim.sense_tactile(rng)
            last_mean_dz = float(frame.field[:, :, 2].mean())
            tac_t.append(frame.t + _STREAM_OFFSETS["tactile"])
            tac_v.append(frame.field.astype(np.float32))
            prop = np.array([sim.state.x, sim.state.z, sim.state.g])
            prop_t.append(sim.state.t + _STREAM_OFFSETS["proprio"])
            prop_v.append(np.concatenate([prop, prop - prop_v[-1][:3] if prop_v else prop * 0]).astype(np.float32))

        action = np.zeros(3)
        if phase == "approach":
            action[1] = -approach * dt
            if last_mean_dz >= demo.contact_on * servo.target:
                phase = "servo"
                settle = 0
        elif phase == "servo":
            action[1] = servo.dz_correction(last_mean_dz)
            settle += 1
            if settle >= demo.settle_ticks:
                phase = "sweep"
        elif phase == "sweep":
            action[0] = sweep * dt
            action[1] = servo.dz_correction(last_mean_dz)
            if sim.state.x >= sweep_end:
                phase = "retract"
                settle = 0
        elif phase == "retract":
            action[1] = approach * dt
            settle += 1
            if settle >= demo.retract_ticks:
                phase = "done"

        if jitter:
            action[:2] += rng.normal((2,), demo.action_noise)
        sim.step(action, dt)
        pending.append(action)
        tick += 1

    if phase != "done":
        raise DataValidationError("demo did not complete (target unreachable under step limits)")

    return _assemble(cfg, sim, rng, vision_t, vision_v, tac_t, tac_v,
                     prop_t, prop_v, act_t, act_v, height_offset, perturbations)


def _assemble(cfg, sim, rng, vision_t, vision_v, tac_t, tac_v, prop_t, prop_v,
              act_t, act_v, height_offset, perturbations) -> RawTrajectory:
    # drop trailing vision ticks that lack a full tactile window behind them
    s_t = cfg.vae.temporal_factor
    n_ticks = min(len(vision_t), len(tac_t) // (s_t - 1), len(act_t))
    n_ticks = min(len(vision_t) - 1, len(act_t))
    traj = RawTrajectory(
        vision=Stream(np.asarray(vision_t[:n_ticks]), np.stack(vision_v[:n_ticks])),
        tactile=Stream(np.asarray(tac_t), np.stack(tac_v)),
        proprio=Stream(np.asarray(prop_t), np.stack(prop_v)),
        action=Stream(np.asarray(act_t[:n_ticks]), np.stack(act_v[:n_ticks])),
        meta={
            "task": "wipe",
            "seed": rng.seed,
            "stream": rng.stream,
            "height_offset": float(height_offset),
            "perturbed": bool(perturbations),
            "dirt_initial": float(sim.initial_dirt.sum()),
            "dirt_final": float(sim.profile.dirt.sum()),
            "overload": bool(sim.overload),
        },
    )
    return traj
