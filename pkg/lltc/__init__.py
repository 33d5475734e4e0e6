from .baselines import Strategy, StrategyKind
from .config import ExperimentConfig, load_config
from .edgesim import ExperimentResult, run_experiment
