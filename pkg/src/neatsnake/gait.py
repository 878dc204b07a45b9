"""Close the loop: network outputs -> gait -> joint targets -> fitness.

The serpenoid gait commands joint i toward

    alpha * sin(phase - (i-1) * delta)          i = 1..8, head joint first

so the body wave is delayed by ``delta`` per joint toward the tail, travels
head-to-tail, and the anisotropic ground friction converts it into head-first
propulsion. (The time-reversed variant, phase + (i-1)*delta, makes the robot
swim backwards; it stays available through ``wave_toward_tail=False`` for
comparison.) The steering offset is added to the head servo, whose total
command is clamped to the yaw limit.

The two network outputs modulate the wave:

    omega = 0.5 + 2.0 * sigmoid(o1 / 3)         in (0.5, 2.5) rad/s
    phi0  = tanh(o2 / 3)                        in (-1, 1) rad

Phase accumulates incrementally (phase += omega * dt) so joint targets stay
continuous when omega jumps between control steps.

Per-step fitness is progress along the goal axis, a corridor penalty for
lateral excursion, a fixed penalty per collision step, and a small living
bonus; reaching the goal adds a terminal bonus.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .arena import Arena, build_arena, distance_to_goal
from .genome import CycleError, Genome
from .lidar import downsample, lidar_scan
from .network import FeedforwardNetwork, compile_network
from .physics import (RobotSpec, SimParams, SimulationUnstable, SnakeWorld)

FREQ_BASE = 0.5          # a: minimum wave frequency, rad/s
FREQ_GAIN = 2.0          # b: sigmoid scale factor
TEMPERATURE = 3.0        # tau: sharpness of both output squashers
COMPILE_FAILURE_FITNESS = -1.0e6


@dataclass
class GaitParams:
    """Wave constants plus the mutable controller state."""

    amplitude: float = 0.6            # rad
    delay: float = math.pi / 6.0      # rad between adjacent joints
    omega: float = FREQ_BASE + FREQ_GAIN / 2.0
    phi0: float = 0.0
    phase: float = 0.0


@dataclass(frozen=True)
class GaitConfig:
    """Conventions that close the gait loop."""

    yaw_limit: float = math.radians(45.0)
    steer_at_head: bool = True        # offset on joint 1; False puts it on joint 8
    wave_toward_tail: bool = True     # False selects the time-reversed wave


@dataclass(frozen=True)
class FitnessConfig:
    progress_gain: float = 20.0       # reward per metre of goal-axis progress
    regression_cap: float = 0.05      # metres; caps one step's backward penalty
    corridor_gain: float = 3.0        # penalty per metre outside the corridor
    collision_penalty: float = 20.0
    living_bonus: float = 0.05
    goal_bonus: float = 2000.0
    corridor: tuple[float, float] = (-0.5, 3.5)
    max_steps: int = 20000
    max_collisions: int = 6
    success_radius_train: float = 1.5
    success_radius_eval: float = 0.5

    def success_radius(self, mode: str) -> float:
        if mode == "train":
            return self.success_radius_train
        if mode == "eval":
            return self.success_radius_eval
        raise ValueError(f"unknown episode mode {mode!r}")


def _sigmoid(z: float) -> float:
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def map_outputs(o1: float, o2: float) -> tuple[float, float]:
    """Squash raw network outputs into (omega, phi0)."""
    omega = FREQ_BASE + FREQ_GAIN * _sigmoid(o1 / TEMPERATURE)
    phi0 = math.tanh(o2 / TEMPERATURE)
    return omega, phi0


def advance_phase(params: GaitParams, omega: float, dt: float) -> GaitParams:
    """Accumulate wave phase; reduces to omega*t while omega is constant."""
    params.omega = omega
    params.phase += omega * dt
    return params


def gait_targets(params: GaitParams, cfg: GaitConfig | None = None,
                 joint_count: int = 8) -> np.ndarray:
    """Joint targets for the current phase, steering offset and clamp applied."""
    cfg = cfg or GaitConfig()
    sign = -1.0 if cfg.wave_toward_tail else 1.0
    i = np.arange(joint_count)
    targets = params.amplitude * np.sin(params.phase + sign * i * params.delay)
    steer_index = 0 if cfg.steer_at_head else joint_count - 1
    targets[steer_index] = float(np.clip(targets[steer_index] + params.phi0,
                                         -cfg.yaw_limit, cfg.yaw_limit))
    return targets


def fitness_terms(prev_dy: float, curr_dy: float, head_x: float,
                  collision_started: bool,
                  cfg: FitnessConfig) -> tuple[float, float, float, float]:
    """(progress, corridor, collision, living) contributions for one step."""
    progress = cfg.progress_gain * max(prev_dy - curr_dy, -cfg.regression_cap)
    x_min, x_max = cfg.corridor
    corridor = -cfg.corridor_gain * max(0.0, x_min - head_x, head_x - x_max)
    collision = -cfg.collision_penalty if collision_started else 0.0
    return progress, corridor, collision, cfg.living_bonus


def step_fitness(prev_dy: float, curr_dy: float, head_x: float,
                 collision_started: bool, cfg: FitnessConfig) -> float:
    return sum(fitness_terms(prev_dy, curr_dy, head_x, collision_started, cfg))


TRAJECTORY_COLUMNS = ("step", "t", "head_x", "head_y", "head_theta", "omega",
                      "phi0", "d_goal", "collisions",
                      *(f"tau_{j}" for j in range(1, 9)))


@dataclass
class EpisodeReport:
    fitness: float
    steps: int
    collisions: int
    success: bool
    routing_time_s: float
    routing_time_normalized_s: float
    goal_bonus: float
    final_distance: float
    aborted: bool = False
    trajectory: list[tuple] = field(default_factory=list)
    step_terms: list[tuple[float, float, float, float]] = field(default_factory=list)


def run_episode(network: FeedforwardNetwork, world: SnakeWorld,
                fitness_cfg: FitnessConfig | None = None,
                gait_cfg: GaitConfig | None = None, mode: str = "train",
                seed: int = 0, record_trajectory: bool = True,
                on_step=None) -> EpisodeReport:
    """Drive one full episode with the given controller.

    Per control step: lidar scan -> downsample -> network -> output mapping
    -> phase advance -> gait targets -> physics step -> fitness accumulation.
    Ends with success once the head is within the mode's radius of the
    beacon (adding the goal bonus), or without success after too many
    collisions or at the step cap. A physics blow-up or non-finite network
    output aborts with the fitness accumulated so far minus one collision
    penalty.
    """
    fitness_cfg = fitness_cfg or FitnessConfig()
    gait_cfg = gait_cfg or GaitConfig()
    radius = fitness_cfg.success_radius(mode)
    params = GaitParams()
    arena = world.arena
    dt = world.sim.dt

    total = 0.0
    goal_bonus = 0.0
    success = False
    aborted = False
    _, prev_dy = distance_to_goal(world.head_pose, arena)
    d = float("inf")
    trajectory: list[tuple] = []
    step_terms: list[tuple[float, float, float, float]] = []

    while world.steps < fitness_cfg.max_steps:
        scan = lidar_scan(arena, world.head_pose)
        o1, o2 = network.activate(downsample(scan))
        if not (math.isfinite(o1) and math.isfinite(o2)):
            total -= fitness_cfg.collision_penalty
            aborted = True
            break
        omega, phi0 = map_outputs(o1, o2)
        advance_phase(params, omega, dt)
        params.phi0 = phi0
        targets = gait_targets(params, gait_cfg, world.spec.joint_count)
        try:
            outcome = world.step(targets)
        except SimulationUnstable:
            total -= fitness_cfg.collision_penalty
            aborted = True
            break
        d, dy = distance_to_goal(outcome.head_pose, arena)
        terms = fitness_terms(prev_dy, dy, outcome.head_pose[0],
                              outcome.collision_started, fitness_cfg)
        total += sum(terms)
        step_terms.append(terms)
        prev_dy = dy
        if record_trajectory:
            trajectory.append((
                world.steps, world.time, *outcome.head_pose,
                omega, phi0, d, world.collision_count,
                *outcome.joint_torques.tolist()))
        if on_step is not None:
            on_step(world)
        if d <= radius:
            success = True
            goal_bonus = fitness_cfg.goal_bonus
            total += goal_bonus
            break
        if world.collision_count > fitness_cfg.max_collisions:
            break

    return EpisodeReport(
        fitness=total,
        steps=world.steps,
        collisions=world.collision_count,
        success=success,
        routing_time_s=world.steps * dt,
        routing_time_normalized_s=world.steps * 0.010,
        goal_bonus=goal_bonus,
        final_distance=d,
        aborted=aborted,
        trajectory=trajectory,
        step_terms=step_terms,
    )


@dataclass(frozen=True)
class EvaluationSetup:
    """Everything an episode needs besides the genome."""

    preset: str = "default"
    spec: RobotSpec = field(default_factory=RobotSpec)
    sim: SimParams = field(default_factory=SimParams)
    gait: GaitConfig = field(default_factory=GaitConfig)
    fitness: FitnessConfig = field(default_factory=FitnessConfig)

    def with_yaw_limit(self, yaw_limit_rad: float) -> "EvaluationSetup":
        return replace(self,
                       spec=replace(self.spec, yaw_limit=yaw_limit_rad),
                       gait=replace(self.gait, yaw_limit=yaw_limit_rad))


def episode_for_genome(genome: Genome, setup: EvaluationSetup, seed: int,
                       mode: str = "train",
                       record_trajectory: bool = False) -> EpisodeReport:
    """Compile, spawn and run one deterministic episode for a genome."""
    network = compile_network(genome)
    arena = build_arena(setup.preset)
    world = SnakeWorld(arena, setup.spec, setup.sim)
    return run_episode(network, world, setup.fitness, setup.gait, mode=mode,
                       seed=seed, record_trajectory=record_trajectory)


def evaluate_genome(genome: Genome, setup: EvaluationSetup, seed: int = 0) -> float:
    """Training-mode episode fitness; the evaluator handed to evolution."""
    try:
        report = episode_for_genome(genome, setup, seed, mode="train",
                                    record_trajectory=False)
    except CycleError as exc:
        logging.getLogger(__name__).warning(
            "genome %s failed to compile (%s); sentinel fitness assigned",
            genome.key, exc)
        return COMPILE_FAILURE_FITNESS
    return report.fitness
