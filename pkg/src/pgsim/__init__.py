"""Model checking and simulation checking for probabilistic game structures."""

__version__ = "0.1.0"

from .core import (PGS, PLAYER_I, PLAYER_II, Distribution, HistoryStrategy, Level1Strategy,
                   MemorylessStrategy, ModelError, Play, ProbabilisticGameStructure, StagedStrategy,
                   TableStrategy, convex_combine, joint_step, lifted_step, mix_strategies,
                   reweighted_mix, validate_model)
from .executions import (build_execution, cone_probability, exact_path_probability,
                         markov_chain_probability, monte_carlo_path_probability, transfer_strategies)
from .lifting import (ForwardLiftWitness, ForwardRelationTable, RelationTable, WeightFunction,
                      compose_relations, forward_lift_check, lift_check)
from .logic import classify_fragment, dualize, parse_formula, parse_path, to_text
from .modelcheck import (determinacy_check, extract_strategy, matrix_game_value, patl_sat, ppre,
                         value_of)
from .modelfile import format_model, load_model, parse_model
from .simcheck import (compute_bisimulation, compute_forward_simulation, compute_simulation,
                       embed_sim_as_forward, local_forward_condition, local_sim_condition,
                       verify_forward_simulation, verify_simulation)

__all__ = [
    "__version__", "PGS", "PLAYER_I", "PLAYER_II", "Distribution", "HistoryStrategy",
    "Level1Strategy", "MemorylessStrategy", "ModelError", "Play", "ProbabilisticGameStructure",
    "StagedStrategy", "TableStrategy", "convex_combine", "joint_step", "lifted_step",
    "mix_strategies", "reweighted_mix", "validate_model", "build_execution", "cone_probability",
    "exact_path_probability", "markov_chain_probability", "monte_carlo_path_probability",
    "transfer_strategies", "ForwardLiftWitness", "ForwardRelationTable", "RelationTable",
    "WeightFunction", "compose_relations", "forward_lift_check", "lift_check", "classify_fragment",
    "dualize", "parse_formula", "parse_path", "to_text", "determinacy_check", "extract_strategy",
    "matrix_game_value", "patl_sat", "ppre", "value_of", "format_model", "load_model",
    "parse_model", "compute_bisimulation", "compute_forward_simulation", "compute_simulation",
    "embed_sim_as_forward", "local_forward_condition", "local_sim_condition",
    "verify_forward_simulation", "verify_simulation",
]
