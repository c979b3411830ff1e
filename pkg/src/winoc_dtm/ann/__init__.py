"""Temperature predictor: network, training data, training, float and quantized inference."""
from .dataset import H_MAX, TrainingDataset, generate_training_data, load_dataset, save_dataset
from .footprint import lut_estimator_footprint, memory_footprint
from .inference import predict, predict_rise
from .io import load_model, load_quantized, save_model
from .network import DEFAULT_STREAMS, AnnModel, StreamSpec, forward, gradient_check, init_model
from .quantized import QuantFormat, QuantizedModel, build_quantized, quantized_predict
from .train import TrainHyper, TrainReport, evaluate_rmse, train

__all__ = [
    "H_MAX", "TrainingDataset", "generate_training_data", "load_dataset", "save_dataset",
    "lut_estimator_footprint", "memory_footprint", "predict", "predict_rise", "load_model",
    "load_quantized", "save_model", "DEFAULT_STREAMS", "AnnModel", "StreamSpec", "forward",
    "gradient_check", "init_model", "QuantFormat", "QuantizedModel", "build_quantized",
    "quantized_predict", "TrainHyper", "TrainReport", "evaluate_rmse", "train",
]
