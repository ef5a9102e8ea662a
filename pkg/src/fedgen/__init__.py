"""Round-based federated SVM simulator and generalization-bound toolkit."""

__version__ = "0.1.0"
