import os
from pathlib import Path
from dotenv import load_dotenv

load_dotenv()

BACKEND_DIR = Path(__file__).resolve().parent


class Config:
    # Wavelet denoising
    WAVELET = os.getenv("LWS_WAVELET", "db4")
    LEVELS = int(os.getenv("LWS_LEVELS", "4"))
    THRESHOLD = os.getenv("LWS_THRESHOLD", "universal")  # "universal" or a float
    THRESHOLD_MODE = os.getenv("LWS_THRESHOLD_MODE", "soft")

    # Time-domain segmentation
    REL_THRESHOLD = float(os.getenv("LWS_REL_THRESHOLD", "0.2"))
    WINDOW_S = float(os.getenv("LWS_WINDOW_S", "0.25"))
    MARGIN_S = float(os.getenv("LWS_MARGIN_S", "0.1"))
    FIXED_LEN = int(os.getenv("LWS_FIXED_LEN", "600"))

    # Classifier
    K = int(os.getenv("LWS_K", "5"))
    METRIC = os.getenv("LWS_METRIC", "euclidean")

    # Cross-validation
    FOLDS = int(os.getenv("LWS_FOLDS", "10"))
    SEED = int(os.getenv("LWS_SEED", "20240601"))
    MAX_WORKERS = int(os.getenv("LWS_MAX_WORKERS", "4"))

    # Generator
    TEMPLATES_PATH = os.getenv("LWS_TEMPLATES", str(BACKEND_DIR / "templates.json"))

    # App
    DEBUG = os.getenv("DEBUG", "false").lower() == "true"
    LOG_LEVEL = os.getenv("LOG_LEVEL", "DEBUG" if DEBUG else "INFO").upper()

    @classmethod
    def denoise_config(cls, **overrides):
        """Factory for the wavelet denoising block"""
        from wavelet_denoise import DenoiseConfig

        values = {
            "wavelet_id": cls.WAVELET,
            "levels": cls.LEVELS,
            "threshold_rule": cls.THRESHOLD,
            "threshold_mode": cls.THRESHOLD_MODE,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return DenoiseConfig(**values)

    @classmethod
    def segment_config(cls, **overrides):
        """Factory for segmentation + padding settings"""
        from segmentation import SegmentConfig

        values = {
            "envelope_window_s": cls.WINDOW_S,
            "rel_threshold": cls.REL_THRESHOLD,
            "margin_s": cls.MARGIN_S,
            "fixed_len": cls.FIXED_LEN,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return SegmentConfig(**values)

    @classmethod
    def knn_config(cls, **overrides):
        """Factory for classifier hyperparameters"""
        from knn_classifier import KnnConfig

        values = {"k": cls.K, "metric": cls.METRIC}
        values.update({k: v for k, v in overrides.items() if v is not None})
        return KnnConfig(**values)

    @classmethod
    def summary(cls) -> dict:
        """Effective settings, for debug logging"""
        return {
            "wavelet": cls.WAVELET,
            "levels": cls.LEVELS,
            "threshold": cls.THRESHOLD,
            "threshold_mode": cls.THRESHOLD_MODE,
            "rel_threshold": cls.REL_THRESHOLD,
            "window_s": cls.WINDOW_S,
            "margin_s": cls.MARGIN_S,
            "fixed_len": cls.FIXED_LEN,
            "k": cls.K,
            "metric": cls.METRIC,
            "folds": cls.FOLDS,
            "seed": cls.SEED,
            "max_workers": cls.MAX_WORKERS,
            "templates": cls.TEMPLATES_PATH,
        }
