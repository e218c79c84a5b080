"""Particle descent on a divergence: explicit Euler gradient flows.

``run_flow`` evolves the support of a particle measure ``alpha`` toward a
fixed target ``beta`` by following the position gradient of a chosen loss:

    ``X <- X - dt * n * d_positions(loss)(X)``

where ``n`` is the particle count (with uniform weights ``1/n`` this makes
the step independent of how finely the mass is discretized). Transport
losses warm-start their dual solves from the previous step, so each step
after the first typically converges in a few iterations.

Frames are recorded at the Euler step nearest each requested time; the loss
value at every step is kept as the flow's descent curve.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .costs import MmdKernelSpec
from .errors import GradientUnreliable, InvalidInput, IoError
from .losses import MMD_LOSSES, OT_LOSSES, value_and_position_force
from .measures import DiscreteMeasure, from_arrays
from .solver import SolverParams

__all__ = ["FlowConfig", "FlowTrajectory", "run_flow", "write_trajectory"]

DEFAULT_RECORD_TIMES = (0.0, 0.25, 0.5, 1.0, 5.0)


@dataclass(frozen=True)
class FlowConfig:
    """What to descend, how fast, and which snapshots to keep.

    ``record_times`` must lie within ``[0, t_end]``; each is mapped to the
    nearest Euler step. ``seed`` is provenance for whoever sampled the
    initial particles and is stored in trajectory manifests.
    """

    loss: str
    params: SolverParams | None = None
    kernel: MmdKernelSpec | None = None
    dt: float = 1e-2
    t_end: float = 5.0
    record_times: tuple | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.loss not in OT_LOSSES + MMD_LOSSES:
            raise InvalidInput(f"unknown loss {self.loss!r}")
        if self.loss in OT_LOSSES and self.params is None:
            raise InvalidInput(f"loss {self.loss!r} needs solver parameters")
        if not np.isfinite(self.dt) or self.dt <= 0:
            raise InvalidInput(f"dt must be positive, got {self.dt}")
        if not np.isfinite(self.t_end) or self.t_end < 0:
            raise InvalidInput(f"t_end must be nonnegative, got {self.t_end}")
        if self.record_times is not None:
            for t in self.record_times:
                if not (0.0 <= t <= self.t_end) and not (self.t_end == 0 and t == 0):
                    raise InvalidInput(
                        f"record time {t} outside [0, {self.t_end}]"
                    )

    def effective_record_times(self) -> tuple:
        """Snapshot times actually used: explicit ones, or the standard set
        clipped to the horizon with the endpoints always present."""
        if self.record_times is not None:
            return tuple(self.record_times)
        times = [t for t in DEFAULT_RECORD_TIMES if t <= self.t_end]
        return tuple(sorted(set(times) | {0.0, self.t_end}))


@dataclass(frozen=True)
class FlowTrajectory:
    """Recorded snapshots and the per-step loss curve of one flow run."""

    frames: list = field(default_factory=list)       # [(time, positions)]
    loss_curve: list = field(default_factory=list)   # [(time, value)]
    config: FlowConfig | None = None

    @property
    def final_positions(self) -> np.ndarray:
        return self.frames[-1][1]


def run_flow(alpha0: DiscreteMeasure, beta: DiscreteMeasure,
             config: FlowConfig) -> FlowTrajectory:
    """Integrate the particle flow and return its trajectory.

    With ``t_end == 0`` no step is taken and the trajectory holds the single
    initial frame. If a step's gradient evaluation fails, the exception is
    re-raised with the partial trajectory attached as ``exc.trajectory``.
    """
    if alpha0.dim != beta.dim:
        raise InvalidInput(f"dimension mismatch: {alpha0.dim} vs {beta.dim}")
    n = alpha0.n_atoms
    weights = alpha0.weights
    x = alpha0.positions.copy()
    n_steps = int(round(config.t_end / config.dt)) if config.t_end > 0 else 0
    # map each record time to its nearest Euler step
    wanted = {min(int(round(t / config.dt)), n_steps)
              for t in config.effective_record_times()}
    if n_steps == 0 or not wanted:
        wanted = {0}

    frames: list = []
    loss_curve: list = []
    warm: dict = {}

    def snapshot(step: int):
        if step in wanted:
            frames.append((step * config.dt, x.copy()))

    snapshot(0)
    try:
        for step in range(n_steps):
            state = from_arrays(weights, x)
            value, grad, warm = value_and_position_force(
                config.loss, state, beta, params=config.params,
                kernel=config.kernel, warm=warm,
            )
            loss_curve.append((step * config.dt, value))
            x = x - config.dt * n * grad.d_positions
            snapshot(step + 1)
        # value at the final state completes the curve
        state = from_arrays(weights, x)
        value, _, _ = value_and_position_force(
            config.loss, state, beta, params=config.params,
            kernel=config.kernel, warm=warm,
        )
        loss_curve.append((n_steps * config.dt, value))
    except GradientUnreliable as exc:
        exc.trajectory = FlowTrajectory(frames=frames, loss_curve=loss_curve,
                                        config=config)
        raise
    return FlowTrajectory(frames=frames, loss_curve=loss_curve, config=config)


def _config_payload(config: FlowConfig) -> dict:
    payload = {
        "loss": config.loss,
        "dt": config.dt,
        "t_end": config.t_end,
        "record_times": list(config.effective_record_times()),
        "seed": config.seed,
    }
    if config.params is not None:
        payload["params"] = {
            "epsilon": config.params.epsilon,
            "p": config.params.p,
            "tol": config.params.tol,
            "max_iters": config.params.max_iters,
            "symmetric_max_iters": config.params.symmetric_max_iters,
        }
    if config.kernel is not None:
        payload["kernel"] = {"kind": config.kernel.kind, "sigma": config.kernel.sigma}
    return payload


def write_trajectory(traj: FlowTrajectory, out_dir, stem: str = "frame") -> str:
    """Write one CSV per frame plus a JSON manifest; returns the manifest path.

    Frame rows are ``t,x1,...,xD``. The manifest lists the configuration,
    the frame files with their times, and the loss curve.
    """
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {out_dir}: {exc}") from exc
    entries = []
    for idx, (t, pos) in enumerate(traj.frames):
        name = f"{stem}_{idx:03d}.csv"
        lines = [
            ",".join([format(t, ".17g")] + [format(c, ".17g") for c in row])
            for row in pos
        ]
        path = os.path.join(out_dir, name)
        try:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write("\n".join(lines) + "\n")
        except OSError as exc:
            raise IoError(f"cannot write {path}: {exc}") from exc
        entries.append({"time": t, "file": name})
    manifest = {
        "config": _config_payload(traj.config) if traj.config else {},
        "frames": entries,
        "loss_curve": [[t, v] for t, v in traj.loss_curve],
    }
    manifest_path = os.path.join(out_dir, "manifest.json")
    try:
        with open(manifest_path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {manifest_path}: {exc}") from exc
    return manifest_path
