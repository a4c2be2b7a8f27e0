"""Core library for regattack."""

from regattack.core.attacks import (
    clip_perturbation,
    cw_loss,
    cw_r,
    cw_r_batch,
    derive_seed,
    gaussian_noise_attack,
    gaussian_noise_batch,
    ifgsm_r,
    ifgsm_r_batch,
    ifgsm_r_grid,
    ifgsm_r_grid_batch,
    tanh_reparam,
    tanh_reparam_inv,
)
from regattack.core.data import (
    Dataset,
    SubjectData,
    extract_band_power,
    load_csv,
    normalize_features,
    split_cross_subject,
    split_within_subject,
    synthesize_dataset,
)
from regattack.core.evaluation import (
    asr,
    calibrate_noise_sigma,
    mean_output,
    rmse,
    transferability,
)
from regattack.core.exceptions import (
    DegenerateSystemError,
    DivergenceError,
    InputError,
    NumericalError,
    RegAttackError,
)
from regattack.core.experiment import run_experiment
from regattack.core.regressors import (
    MlpModel,
    RegressionModel,
    RidgeModel,
    input_gradient,
    predict,
    train_mlp,
    train_ridge,
)

__all__ = [
    "Dataset",
    "DegenerateSystemError",
    "DivergenceError",
    "InputError",
    "MlpModel",
    "NumericalError",
    "RegAttackError",
    "RegressionModel",
    "RidgeModel",
    "SubjectData",
    "asr",
    "calibrate_noise_sigma",
    "clip_perturbation",
    "cw_loss",
    "cw_r",
    "cw_r_batch",
    "derive_seed",
    "extract_band_power",
    "gaussian_noise_attack",
    "gaussian_noise_batch",
    "ifgsm_r",
    "ifgsm_r_batch",
    "ifgsm_r_grid",
    "ifgsm_r_grid_batch",
    "input_gradient",
    "load_csv",
    "mean_output",
    "normalize_features",
    "predict",
    "rmse",
    "run_experiment",
    "split_cross_subject",
    "split_within_subject",
    "synthesize_dataset",
    "tanh_reparam",
    "tanh_reparam_inv",
    "train_mlp",
    "train_ridge",
    "transferability",
]
