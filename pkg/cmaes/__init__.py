from .config import CmaesConfig, check_dimension, default_population_size
from .state import CmaState, repair_covariance, sample_generation, update
from .fitness import CandidateEvaluation, FitnessStage, evaluate_fitness, family_fitness
from .checkpoint import CmaesCheckpoint, EliteRecord
from .trainer import CHECKPOINT_FILE, CmaesTrainer, GenerationReport, candidate_seeds
from .selftest import SelftestResult, sphere, sphere_selftest
