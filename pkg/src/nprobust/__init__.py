"""Adversarial attacks and defenses for non-parametric classifiers.

Submodules: ``data``, ``classifiers``, ``geometry``, ``convexsolve``,
``attacks``, ``defense``, ``theory`` and ``harness``. The numeric kernels in
``kernels`` use a compiled extension when available.
"""

__version__ = "0.1.0"

from .attacks import (AdversarialExample, direct_attack, rba_approx, rba_exact,  # noqa: E402
                      robustness_radius, verify_adversarial)
from .classifiers import (DecisionTree, Forest, KnnModel, accuracy, dt_train,  # noqa: E402
                          rf_train)
from .data import Dataset, load_csv, pca_fit, pca_transform, scale_features, split  # noqa: E402
from .defense import adversarial_prune, adversarial_training  # noqa: E402
from .harness import ExperimentConfig, run_experiment, synth_dataset  # noqa: E402

__all__ = [
    "__version__", "AdversarialExample", "direct_attack", "rba_approx", "rba_exact", "robustness_radius",
    "verify_adversarial", "DecisionTree", "Forest", "KnnModel", "accuracy", "dt_train", "rf_train", "Dataset",
    "load_csv", "pca_fit", "pca_transform", "scale_features", "split", "adversarial_prune",
    "adversarial_training", "ExperimentConfig", "run_experiment", "synth_dataset",
]
