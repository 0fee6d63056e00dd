
from .cli import evtk as evtk
from .config import RunConfig, TrainConfig, load_config, loads_config
from .dataset import load_dataset, write_dataset, split_recordings, WindowSet
from .metrics import MetricReport, TrainingError, evaluate
from .train import train, load_trained
from .ablation import ablation_run, ablation_settings
