"""Handwritten digit recognition: octant shadow and centroid features with a backprop MLP."""

from .dataset_io import GrayImage, LabeledSample, SampleSet, load_directory, load_idx, load_pgm, write_pgm
from .evaluation import CVResult, SweepTable, cross_validate, evaluate, make_folds, sweep_hidden
from .features import extract_features, extract_many
from .mlp import MlpLayout, MlpModel, TrainConfig, classify, forward, init_model, load_model, save_model, train
from .preprocess import BinaryImage, Fixed, Otsu, normalize_sample

__version__ = "0.1.0"
