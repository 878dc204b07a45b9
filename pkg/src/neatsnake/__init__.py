"""NEAT-evolved serpenoid gait control for a planar snake robot.

The package evolves feedforward-network controllers that modulate the
frequency and steering offset of a serpenoid gait, driving a simulated
9-link wheeled snake through an obstacle-dense arena toward a goal beacon.
"""

from .arena import Arena, build_arena, distance_to_goal, load_arena, save_arena
from .config import ConfigError, NeatConfig, apply_env_overrides, dump_config, load_config
from .evolution import (Evolution, GenerationStats, Species, SpeciesSet,
                        TotalExtinctionError, adjusted_fitness,
                        allocate_offspring, compatibility_distance, reproduce,
                        serial_evaluator, speciate)
from .gait import (EpisodeReport, EvaluationSetup, FitnessConfig, GaitConfig,
                   GaitParams, advance_phase, episode_for_genome,
                   evaluate_genome, fitness_terms, gait_targets, map_outputs,
                   run_episode, step_fitness)
from .genome import (ConnectionGene, CycleError, Genome, GenomeError,
                     InnovationRegistry, NodeGene, crossover, gene_partition,
                     mutate, mutate_add_connection, mutate_add_node,
                     mutate_delete_connection, mutate_delete_node,
                     mutate_weights, new_initial_genome)
from .lidar import downsample, lidar_scan
from .network import FeedforwardNetwork, compile_network
from .physics import (RobotSpec, SimParams, SimulationUnstable, SnakeState,
                      SnakeWorld, SpawnError, StepOutcome, spawn_snake)
from .serialize import (genome_from_bytes, genome_to_bytes, load_checkpoint,
                        load_genome, parameter_count, save_checkpoint,
                        save_genome)

__version__ = "0.1.0"
