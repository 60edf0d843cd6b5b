"""Deterministic 2-D contact world for the wipe task.

The tool tip carries a marker-grid gel pad; the surface is a piecewise-linear
height profile with a mutable vertical offset (perturbations) and a dirt
occupancy row. Contact is a penetration query against the profile: the gel
absorbs up to `gel_max` of overlap, beyond which the surface is rigid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import Config
from ..errors import SimError
from ..numerics.rng import Rng

_FOOT_SAMPLES = 9


@dataclass
class SurfaceProfile:
    knots: np.ndarray            # (K, 2) of (x, height offset) pairs
    base: float
    friction: float
    dz: float                    # uniform vertical offset, perturbation target
    dirt: np.ndarray             # (cells,) occupancy in {0, 1}
    length: float

    def height(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return self.base + self.dz + np.interp(x, self.knots[:, 0], self.knots[:, 1])


@dataclass
class EEState:
    x: float
    z: float
    vx: float
    vz: float
    g: float
    t: float


@dataclass
class TactileFrame:
    field: np.ndarray            # (rows, cols, 3): d_x, d_y, d_z in [-1, 1]
    t: float


@dataclass
class Observation:
    image: np.ndarray
    tactile: TactileFrame
    proprio: np.ndarray          # (x, z, g, dx, dz, dg)
    ee_image_point: tuple
    times: dict


class WipeSim:
    def __init__(self, cfg: Config, rng: Rng, height_offset: float | None = None):
        self.cfg = cfg
        self.rng = rng
        sim = cfg.sim
        dz = sim.height_offset if height_offset is None else height_offset
        self.profile = SurfaceProfile(
            knots=np.asarray(sim.surface_knots, dtype=np.float64),
            base=sim.surface_base,
            friction=sim.friction,
            dz=dz,
            dirt=self._initial_dirt(),
            length=sim.length,
        )
        self.state = EEState(x=cfg.demo.start_x, z=cfg.demo.start_z,
                             vx=0.0, vz=0.0, g=0.5, t=0.0)
        self._last_proprio = np.array([self.state.x, self.state.z, self.state.g])
        self.initial_dirt = self.profile.dirt.copy()
        self._perturbations: list[tuple[float, float]] = []
        self._saturation_run = 0
        self.overload = False

    def _initial_dirt(self) -> np.ndarray:
        sim = self.cfg.sim
        xs = (np.arange(sim.dirt_cells) + 0.5) * sim.length / sim.dirt_cells
        lo, hi = sim.dirt_span
        return ((xs >= lo) & (xs <= hi)).astype(np.float64)

    # -- perturbations -------------------------------------------------------

    def inject_perturbation(self, dz_jump: float, t_trigger: float) -> None:
        if abs(dz_jump) > 0.02:
            raise SimError("perturbation exceeds sim bounds")
        self._perturbations.append((float(t_trigger), float(dz_jump)))
        self._perturbations.sort()

    def _apply_due_perturbations(self) -> None:
        while self._perturbations and self.state.t >= self._perturbations[0][0]:
            _, jump = self._perturbations.pop(0)
            self.profile.dz += jump

    # -- dynamics -------------------------------------------------------------

    def _footprint(self):
        hw = self.cfg.sim.tool_halfwidth
        return np.linspace(self.state.x - hw, self.state.x + hw, _FOOT_SAMPLES)

    def contact(self) -> tuple[float, float]:
        """(penetration depth, contact center x); depth 0 when free."""
        xs = self._footprint()
        pen = self.profile.height(xs) - self.state.z
        pen = np.maximum(pen, 0.0)
        depth = float(pen.max())
        if depth <= 0.0:
            return 0.0, float(self.state.x)
        center = float(np.sum(pen * xs) / np.sum(pen))
        return depth, center

    def step(self, action, dt: float) -> EEState:
        action = np.asarray(action, dtype=np.float64)
        if not np.all(np.isfinite(action)):
            raise SimError("non-finite action")
        if dt <= 0:
            raise SimError("dt must be positive")
        sim = self.cfg.sim
        dx = float(np.clip(action[0], -sim.step_limit, sim.step_limit))
        dz = float(np.clip(action[1], -sim.step_limit, sim.step_limit))
        dg = float(np.clip(action[2], -sim.grip_limit, sim.grip_limit))

        self._apply_due_perturbations()
        x_old, z_old = self.state.x, self.state.z
        self.state.x = float(np.clip(self.state.x + dx, 0.0, sim.length))
        self.state.z = self.state.z + dz
        # gel bottoms out: the surface is rigid past gel_max of overlap
        xs = self._footprint()
        floor = float(self.profile.height(xs).max()) - sim.gel_max
        self.state.z = max(self.state.z, floor)
        self.state.g = float(np.clip(self.state.g + dg, 0.0, 1.0))
        self.state.vx = (self.state.x - x_old) / dt
        self.state.vz = (self.state.z - z_old) / dt
        self.state.t += dt

        depth, _ = self.contact()
        if depth >= sim.clear_depth:
            self._clear_dirt(xs[0], xs[-1])
        return self.state

    def _clear_dirt(self, x_lo: float, x_hi: float) -> None:
        sim = self.cfg.sim
        cells = sim.dirt_cells
        centers = (np.arange(cells) + 0.5) * sim.length / cells
        self.profile.dirt[(centers >= x_lo) & (centers <= x_hi)] = 0.0

    # -- sensing ----------------------------------------------------------------

    def sense_tactile(self, rng: Rng | None = None) -> TactileFrame:
        sc = self.cfg.sensor
        rows, cols = sc.rows, sc.cols
        depth, center = self.contact()
        field = np.zeros((rows, cols, 3))
        if depth > 0.0:
            hw = self.cfg.sim.tool_halfwidth
            u = (center - (self.state.x - hw)) / (2 * hw)
            c_col = np.clip(u, 0.0, 1.0) * (cols - 1)
            c_row = (rows - 1) / 2.0
            rr, cc = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
            bump = np.exp(-((rr - c_row) ** 2 + (cc - c_col) ** 2) / (2 * sc.sigma_g ** 2))
            d_z = np.clip(sc.k_n * depth * bump, 0.0, 1.0)
            sat = float(np.clip(self.state.vx / sc.v_ref, -1.0, 1.0))
            d_x = np.clip(-self.profile.friction * d_z * sat, -1.0, 1.0)
            field[:, :, 0] = d_x
            field[:, :, 2] = d_z
        if rng is not None and sc.eta > 0:
            noise = np.clip(rng.normal(field.shape, sc.eta), -4 * sc.eta, 4 * sc.eta)
            field = np.clip(field + noise, -1.0, 1.0)
        self._track_overload(field)
        return TactileFrame(field=field, t=self.state.t)

    def _track_overload(self, field: np.ndarray) -> None:
        if np.any(np.abs(field) >= 1.0):
            self._saturation_run += 1
        else:
            self._saturation_run = 0
        if self._saturation_run > self.cfg.sensor.overload_ticks:
            self.overload = True

    # -- camera -------------------------------------------------------------------

    def project_ee(self) -> tuple[float, float]:
        sim = self.cfg.sim
        if sim.cam_depth <= 0:
            raise SimError("end effector behind camera")
        u = sim.cam_fu * self.state.x / sim.cam_depth + sim.cam_cu
        v = sim.cam_fv * self.state.z / sim.cam_depth + sim.cam_cv
        return float(u), float(v)

    def render_image(self) -> np.ndarray:
        sim = self.cfg.sim
        h, w = sim.image_h, sim.image_w
        img = np.full((h, w), 0.15)
        xs = (np.arange(w) - sim.cam_cu) * sim.cam_depth / sim.cam_fu
        surf = self.profile.height(np.clip(xs, 0.0, sim.length))
        v_surf = sim.cam_fv * surf / sim.cam_depth + sim.cam_cv
        rows_surf = np.clip((h - 1 - np.round(v_surf)).astype(int), 0, h - 1)
        for col in range(w):
            if 0.0 <= xs[col] <= sim.length:
                img[rows_surf[col]:, col] = 0.45
        # dirt marks sit on the surface top
        cells = sim.dirt_cells
        centers = (np.arange(cells) + 0.5) * sim.length / cells
        cols_dirt = np.round(sim.cam_fu * centers / sim.cam_depth + sim.cam_cu).astype(int)
        for i in range(cells):
            if self.profile.dirt[i] > 0 and 0 <= cols_dirt[i] < w:
                r = rows_surf[min(max(cols_dirt[i], 0), w - 1)]
                img[max(r - 2, 0): r, cols_dirt[i]] = 0.85
        # tool block centered at the projected tip
        u, v = self.project_ee()
        row = int(h - 1 - round(v))
        col = int(round(u))
        img[max(row - 4, 0): max(row, 0), max(col - 1, 0): col + 2] = 0.95
        return img

    def observe(self, rng: Rng | None = None) -> Observation:
        tac = self.sense_tactile(rng)
        prop = np.array([self.state.x, self.state.z, self.state.g])
        deltas = prop - self._last_proprio
        self._last_proprio = prop
        return Observation(
            image=self.render_image(),
            tactile=tac,
            proprio=np.concatenate([prop, deltas]),
            ee_image_point=self.project_ee(),
            times={"vision": self.state.t, "tactile": tac.t, "proprio": self.state.t},
        )


def evaluate_success(tactile_frames: np.ndarray, contact_mask: np.ndarray,
                     dirt_initial: np.ndarray, dirt_final: np.ndarray,
                     overload: bool) -> dict:
    """Episode metrics from logged arrays (replayable from the episode log)."""
    total = float(dirt_initial.sum())
    cleared = float(dirt_initial.sum() - dirt_final.sum())
    ratio = cleared / total if total > 0 else 0.0
    tang = np.abs(tactile_frames[:, :, :, 0])
    if contact_mask.any():
        per_tick_peak = tang[contact_mask].reshape(contact_mask.sum(), -1).max(axis=1)
        mean_dx = float(per_tick_peak.mean())
        peak_dx = float(per_tick_peak.max())
    else:
        mean_dx = 0.0
        peak_dx = 0.0
    return {
        "processed_ratio": ratio,
        "mean_tangential": mean_dx,
        "peak_tangential": peak_dx,
        "overload": bool(overload),
    }
