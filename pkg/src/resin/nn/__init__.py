"""Numpy implementation of the residual signal-image network and its fusion head."""

from resin.nn.fusion import FeatureMode, FusionClassifier, ResSin, fuse_and_classify
from resin.nn.layers import cross_entropy, softmax, softmax_cross_entropy
from resin.nn.resnet import ResidualBlock, ResSiConfig, ResSiNet
from resin.nn.train import TrainConfig, TrainingSet, evaluate, learning_rate, predict, train

__all__ = [
    'FeatureMode',
    'FusionClassifier',
    'ResSiConfig',
    'ResSiNet',
    'ResSin',
    'ResidualBlock',
    'TrainConfig',
    'TrainingSet',
    'cross_entropy',
    'evaluate',
    'fuse_and_classify',
    'learning_rate',
    'predict',
    'softmax',
    'softmax_cross_entropy',
    'train',
]
