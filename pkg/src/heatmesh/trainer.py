"""Supervised training of the per-step coefficient trajectories.

Each furnace record maps to a piecewise-constant boundary schedule; the
trajectory is fitted by stochastic (per-record) gradient descent with L1
regularization against the pyrometer exit temperature, and evaluated by
mean absolute error on a held-out split.
"""

import csv
import math
from dataclasses import dataclass, field, replace
from typing import List, Sequence, Tuple

import numpy as np

from .errors import (
    DegenerateRecordError,
    InvalidArgumentError,
    InvalidConfigError,
)
from .gradients import GradientSet, backprop
from .grid import SpatialGrid, TimeGrid
from .materials import MaterialModel
from .solver import OMEGA_MIN, BoundaryConditions, ParamTrajectory, simulate

COOLING_AMBIENT = 300.0  # K, ambient seen by the billet on the way to the pyrometer

DATASET_HEADER = "zt12,zt34,zt56,T135,T246,p12,p34,p56,cool,target"


@dataclass(frozen=True)
class HeatingRecord:
    """One furnace log row: three zone-pair dwell times, the odd/even zone
    temperatures, zone pressures (carried but physically unused), the
    cooling time to the pyrometer and the pyrometer target."""

    zone_time_12: float  # s
    zone_time_34: float
    zone_time_56: float
    zone_temp_135: float  # K
    zone_temp_246: float
    zone_press_12: float
    zone_press_34: float
    zone_press_56: float
    cooling_time: float  # s
    target_temp: float  # K

    def __post_init__(self):
        times = (self.zone_time_12, self.zone_time_34, self.zone_time_56)
        if any(t < 0 for t in times) or self.cooling_time < 0:
            raise InvalidArgumentError("durations must be >= 0")
        if sum(times) + self.cooling_time <= 0:
            raise InvalidArgumentError("record has zero total duration")
        if self.zone_temp_135 <= 0 or self.zone_temp_246 <= 0:
            raise InvalidArgumentError("zone temperatures must be positive")
        if not math.isfinite(self.target_temp):
            raise InvalidArgumentError("target temperature must be finite")


@dataclass(frozen=True)
class TrainConfig:
    eta: float = 0.001
    lambda1: float = 0.05
    max_epochs: int = 500
    grad_stop: float = 1e-6
    split_ratio: float = 0.8
    seed: int = 0
    omega_min: float = OMEGA_MIN
    init_range: Tuple[float, float] = (0.5, 2.0)
    batch: bool = False
    initial_temp: float = 300.0  # K, billet temperature entering the furnace

    def __post_init__(self):
        if self.eta <= 0:
            raise InvalidConfigError("eta must be positive")
        if self.lambda1 < 0:
            raise InvalidConfigError("lambda1 must be >= 0")
        if not 0.0 < self.split_ratio < 1.0:
            raise InvalidConfigError("split_ratio must lie in (0, 1)")
        if not 0.0 < self.init_range[0] <= self.init_range[1]:
            raise InvalidConfigError("init_range must be positive and ordered")
        if self.omega_min <= 0:
            raise InvalidConfigError("omega_min must be positive")

    @property
    def phi_min(self):
        return self.omega_min


@dataclass
class TrainState:
    params: ParamTrajectory
    epoch: int = 0
    # (epoch, train_mae, test_mae, grad_norm) per completed epoch
    history: List[Tuple[int, float, float, float]] = field(default_factory=list)
    last_grad_norm: float = math.nan


def record_to_schedule(
    record: HeatingRecord, time: TimeGrid, bc_template: BoundaryConditions
):
    """Map a furnace record onto a per-step boundary schedule.

    Three heating segments (T1 from the odd zones, T2 from the even ones)
    followed, when cooling_time > 0, by a cooling segment at 300 K ambient
    reusing the faces' exchange coefficients. Segment lengths round to the
    nearest whole number of steps, minimum one; pressures never enter.
    """
    tau = time.tau
    durations = (record.zone_time_12, record.zone_time_34, record.zone_time_56)
    if sum(durations) + record.cooling_time < tau:
        raise DegenerateRecordError("record shorter than one time step")
    heat_bc = replace(bc_template, T1=record.zone_temp_135, T2=record.zone_temp_246)
    schedule = []
    for duration in durations:
        steps = max(1, round(duration / tau))
        schedule.extend([heat_bc] * steps)
    if record.cooling_time > 0:
        cool_bc = replace(bc_template, T1=COOLING_AMBIENT, T2=COOLING_AMBIENT)
        schedule.extend([cool_bc] * max(1, round(record.cooling_time / tau)))
    return schedule, len(schedule)


def init_params(n_steps: int, config: TrainConfig) -> ParamTrajectory:
    """Positive random initialization, deterministic given the seed."""
    rng = np.random.default_rng(config.seed)
    low, high = config.init_range
    draw = lambda: rng.uniform(low, high, n_steps)
    return ParamTrajectory(
        phi_x=draw(),
        omega_x=np.maximum(draw(), config.omega_min),
        phi_y=draw(),
        omega_y=np.maximum(draw(), config.omega_min),
        omega_min=config.omega_min,
    )


def _simulate_record(
    record, provider, bc_template, spatial, time, tape_requested, initial_temp
):
    schedule, n_steps = record_to_schedule(record, time, bc_template)
    horizon = TimeGrid(tau=time.tau, n_steps=n_steps, t_max=time.tau * n_steps)
    return simulate(
        initial_temp,
        provider,
        schedule,
        spatial,
        horizon,
        tape_requested=tape_requested,
    )


def sample_loss(
    record: HeatingRecord,
    params: ParamTrajectory,
    bc_template: BoundaryConditions,
    spatial: SpatialGrid,
    time: TimeGrid,
    lambda1: float = 0.0,
    initial_temp: float = 300.0,
):
    """Single-record loss: half squared residual plus the L1 penalty on the
    whole trajectory. Returns (loss, residual, tape)."""
    result = _simulate_record(
        record, params, bc_template, spatial, time, True, initial_temp
    )
    prediction = result.probe_history[-1]
    residual = record.target_temp - prediction
    loss = 0.5 * residual * residual + lambda1 * params.l1_norm()
    return loss, residual, result.tape


def apply_update(
    params: ParamTrajectory, grads: GradientSet, config: TrainConfig
) -> ParamTrajectory:
    """One descent step p <- p - eta (grad + lambda1 sign(p)), with sign(0)
    treated as 0, over the prefix the gradient covers; phi and omega are
    clamped at their floors afterwards."""
    n = len(grads.d_phi_x)
    if n > len(params):
        raise InvalidArgumentError("gradient longer than the trajectory")
    eta, lam = config.eta, config.lambda1

    def updated(values, grad, floor):
        out = values.copy()
        out[:n] -= eta * (grad + lam * np.sign(out[:n]))
        return np.maximum(out, floor)

    return ParamTrajectory(
        phi_x=updated(params.phi_x, grads.d_phi_x, config.phi_min),
        omega_x=updated(params.omega_x, grads.d_omega_x, config.omega_min),
        phi_y=updated(params.phi_y, grads.d_phi_y, config.phi_min),
        omega_y=updated(params.omega_y, grads.d_omega_y, config.omega_min),
        omega_min=config.omega_min,
    )


def train_epoch(
    dataset: Sequence[HeatingRecord],
    state: TrainState,
    config: TrainConfig,
    bc_template: BoundaryConditions,
    spatial: SpatialGrid,
    time: TimeGrid,
) -> TrainState:
    """One pass over the training records in a seeded-shuffled order with
    stochastic per-record updates (or one averaged update in batch mode)."""
    if len(dataset) == 0:
        raise InvalidArgumentError("training set is empty")
    order = np.random.default_rng([config.seed, state.epoch]).permutation(len(dataset))
    params = state.params
    norms = []
    batch_grads = None
    for idx in order:
        record = dataset[idx]
        _, residual, tape = sample_loss(
            record, params, bc_template, spatial, time, config.lambda1,
            config.initial_temp,
        )
        grads = backprop(tape, residual)
        norms.append(grads.l2_norm())
        if config.batch:
            if batch_grads is None:
                batch_grads = grads
            else:
                for name in ("d_phi_x", "d_omega_x", "d_phi_y", "d_omega_y"):
                    arr = getattr(batch_grads, name)
                    g = getattr(grads, name)
                    arr[: len(g)] += g
        else:
            params = apply_update(params, grads, config)
    if config.batch and batch_grads is not None:
        for name in ("d_phi_x", "d_omega_x", "d_phi_y", "d_omega_y"):
            getattr(batch_grads, name)[:] /= len(dataset)
        params = apply_update(params, batch_grads, config)
    return TrainState(
        params=params,
        epoch=state.epoch + 1,
        history=state.history,
        last_grad_norm=float(np.mean(norms)),
    )


def evaluate_mae(
    dataset: Sequence[HeatingRecord],
    provider,
    bc_template: BoundaryConditions,
    spatial: SpatialGrid,
    time: TimeGrid,
    initial_temp: float = 300.0,
) -> float:
    """Mean absolute error of the probe prediction over a dataset; the
    provider may be a trajectory or a physical MaterialModel."""
    if len(dataset) == 0:
        raise InvalidArgumentError("dataset is empty")
    total = 0.0
    for record in dataset:
        result = _simulate_record(
            record, provider, bc_template, spatial, time, False, initial_temp
        )
        total += abs(record.target_temp - result.probe_history[-1])
    return total / len(dataset)


def split_dataset(dataset: Sequence[HeatingRecord], ratio: float, seed: int):
    """Seeded shuffle, then split at floor(ratio * size)."""
    if len(dataset) < 2:
        raise InvalidArgumentError("dataset must hold at least 2 records")
    if not 0.0 < ratio < 1.0:
        raise InvalidArgumentError("ratio must lie in (0, 1)")
    order = np.random.default_rng(seed).permutation(len(dataset))
    cut = int(ratio * len(dataset))
    train = [dataset[i] for i in order[:cut]]
    test = [dataset[i] for i in order[cut:]]
    return train, test


def max_horizon(
    dataset: Sequence[HeatingRecord], time: TimeGrid, bc_template: BoundaryConditions
) -> int:
    return max(record_to_schedule(r, time, bc_template)[1] for r in dataset)


def train(
    dataset: Sequence[HeatingRecord],
    config: TrainConfig,
    bc_template: BoundaryConditions,
    spatial: SpatialGrid,
    time: TimeGrid,
) -> TrainState:
    """Full training loop: 80/20 seeded split, per-epoch held-out MAE, and
    a stop rule on the slowdown of the smoothed gradient norm."""
    train_set, test_set = split_dataset(dataset, config.split_ratio, config.seed)
    if not train_set or not test_set:
        raise InvalidConfigError("split produced an empty subset")
    n_steps = max_horizon(dataset, time, bc_template)
    state = TrainState(params=init_params(n_steps, config))
    ema = 0.0
    for _ in range(config.max_epochs):
        state = train_epoch(train_set, state, config, bc_template, spatial, time)
        train_mae = evaluate_mae(
            train_set, state.params, bc_template, spatial, time, config.initial_temp
        )
        test_mae = evaluate_mae(
            test_set, state.params, bc_template, spatial, time, config.initial_temp
        )
        state.history.append((state.epoch, train_mae, test_mae, state.last_grad_norm))
        new_ema = 0.9 * ema + 0.1 * state.last_grad_norm
        if abs(new_ema - ema) < config.grad_stop:
            break
        ema = new_ema
    return state


def save_history(history, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_mae", "test_mae", "grad_norm"])
        for row in history:
            writer.writerow([row[0]] + [f"{v:.6g}" for v in row[1:]])


def save_trajectory(params: ParamTrajectory, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "phi_x", "omega_x", "phi_y", "omega_y"])
        for n in range(len(params)):
            writer.writerow(
                [n]
                + [
                    f"{v:.17g}"
                    for v in (
                        params.phi_x[n],
                        params.omega_x[n],
                        params.phi_y[n],
                        params.omega_y[n],
                    )
                ]
            )


def load_trajectory(path) -> ParamTrajectory:
    rows = []
    with open(path, encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["n", "phi_x", "omega_x", "phi_y", "omega_y"]:
            raise InvalidArgumentError(f"bad trajectory header {header!r}")
        for row in reader:
            if row:
                rows.append([float(v) for v in row[1:]])
    arr = np.array(rows)
    return ParamTrajectory(
        phi_x=arr[:, 0], omega_x=arr[:, 1], phi_y=arr[:, 2], omega_y=arr[:, 3]
    )


def save_dataset(records: Sequence[HeatingRecord], path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DATASET_HEADER.split(","))
        for r in records:
            writer.writerow(
                f"{v:.10g}"
                for v in (
                    r.zone_time_12,
                    r.zone_time_34,
                    r.zone_time_56,
                    r.zone_temp_135,
                    r.zone_temp_246,
                    r.zone_press_12,
                    r.zone_press_34,
                    r.zone_press_56,
                    r.cooling_time,
                    r.target_temp,
                )
            )


def load_dataset(path) -> List[HeatingRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != DATASET_HEADER.split(","):
            raise InvalidArgumentError(f"bad dataset header {header!r}")
        for row in reader:
            if not row:
                continue
            v = [float(x) for x in row]
            records.append(
                HeatingRecord(
                    zone_time_12=v[0],
                    zone_time_34=v[1],
                    zone_time_56=v[2],
                    zone_temp_135=v[3],
                    zone_temp_246=v[4],
                    zone_press_12=v[5],
                    zone_press_34=v[6],
                    zone_press_56=v[7],
                    cooling_time=v[8],
                    target_temp=v[9],
                )
            )
    return records
