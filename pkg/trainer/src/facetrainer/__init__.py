"""CNN regressor from schematic face images to 30 control values.

Consumes a built dataset purely through its files (manifest JSONL, registry
JSON, PNG images) and writes prediction JSONL for the dataset pipeline's
eval command.
"""

from .config import TrainConfig
from .data import Manifest, Registry, load_manifest
from .model import ControlRegressor
from .train import TrainResult, export_predictions, pooled_mae, predict, train

__version__ = "0.1.0"
