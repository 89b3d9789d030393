"""convdiag: 1D-CNN fault classification and degradation regression on
raw sensor time series, with hand-derived backpropagation throughout."""

from .data import (Bundle, ChannelStats, LabelMap, RawRecording, Sample,
                   SplitDataset, SyntheticClass, SyntheticSpec, crop_head,
                   generate_degradation, generate_synthetic, load_bundle,
                   prepare_dataset, segment, split, standardize, write_bundle)
from .errors import (CheckpointError, ConfigError, ConvdiagError, DataError,
                     DivergenceError, NumericError, ShapeError, StateError)
from .layers import (Conv1D, Dense, Flatten, LayerSpec, MaxPool1D, ReLU,
                     SigmoidHead, SoftmaxHead, sigmoid, softmax)
from .losses import cross_entropy_loss, least_squares_loss
from .metrics import (ClassificationReport, ConfusionCounts, RegressionReport,
                      classification_metrics, format_report, regression_metrics)
from .optim import SGD, Adam, make_optimizer
from .trainer import (Checkpoint, Model, ModelConfig, TrainConfig, TrainingLog,
                      build_model, evaluate, export_features, load_checkpoint,
                      predict, save_checkpoint, train)

__version__ = "0.1.0"
