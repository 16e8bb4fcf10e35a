"""
SETTINGS - All configuration in one place

Defaults for the whole private speech pipeline: spectrogram front end,
filter/generator networks, adversarial training, vocoder, fixed evaluation
classifiers and the experiment grid. Typed views of these values live in
settings/experiment.py.
"""

import os
from pathlib import Path

from dotenv import load_dotenv

PROJECT_PATH = Path(__file__).resolve().parent.parent

# Load environment variables from project directory
env_path = PROJECT_PATH / ".env"
if env_path.exists():
    load_dotenv(env_path)


class Config:

    # Dataset preparation (AudioMNIST layout: <root>/<speaker>/<digit>_<speaker>_<rep>.wav)
    SOURCE_SAMPLE_RATE = 48000
    TARGET_SAMPLE_RATE = 8000
    TARGET_LENGTH = 8192
    PCM_SCALE = 32768.0
    GENDER_CODES = {"female": 0, "male": 1}
    TRAIN_SPEAKERS_PER_GENDER = 10
    TEST_SPEAKERS_PER_GENDER = 2
    SPLIT_SEED = 0
    RESAMPLE_WINDOW = ("kaiser", 5.0)
    DATASET_DOWNLOAD_HINT = "https://github.com/soerenab/AudioMNIST (data/ and audioMNIST_meta.txt)"

    # Spectrogram front end
    STFT_WINDOW_SIZE = 1024
    STFT_HOP = 256
    N_MELS = 80
    MEL_FMIN = 0.0
    MEL_FMAX = 4000.0
    LOG_FLOOR = 1e-5
    CLIP_SIGMAS = 3.0
    GRIFFIN_LIM_ITERS = 60
    GRIFFIN_LIM_MOMENTUM = 0.99
    GRIFFIN_LIM_SEED = 0

    # Filter / generator U-Net
    UNET_DEPTH = 4
    UNET_BASE_CHANNELS = 64
    UNET_LEAKY_SLOPE = 0.2

    # AlexNet-style discriminators and spectrogram classifiers
    DISC_CHANNELS = (64, 192, 384, 256, 256)
    DISC_HIDDEN = 1024
    DISC_DROPOUT = 0.5
    DISC_POOL_OUTPUT = (6, 2)

    # AudioNet-style raw waveform classifier (FID embedding network)
    AUDIONET_CHANNELS = (32, 64, 128, 128, 128, 128)
    AUDIONET_POOL = 4
    AUDIONET_HIDDEN = 512
    AUDIONET_DROPOUT = 0.5

    # Privacy training
    LR_FILTER = 0.0004
    LR_GENERATOR = 0.0004
    LR_DISC_FILTER = 0.0004
    LR_DISC_GENERATOR = 0.0004
    ADAM_BETAS = (0.5, 0.9)
    LAMBDA_PENALTY = 100.0
    EPSILON_GRID = (0.005, 0.01, 0.05, 0.1)
    EPOCHS = 1000
    BATCH_SIZE = 64
    SEEDS = (0, 1, 2, 3, 4)
    MODES = ("full", "baseline")
    GENERATOR_TARGET = "synthetic"  # Options: "synthetic", "original", "fake"
    CHECKPOINT_EVERY_EPOCHS = 10

    # Vocoder
    VOCODER_UPSAMPLE_FACTORS = (8, 8, 2, 2)
    VOCODER_NGF = 32
    VOCODER_RESIDUAL_LAYERS = 3
    VOCODER_NUM_DISCRIMINATORS = 3
    VOCODER_DISC_DOWNSAMPLE = 2
    VOCODER_NDF = 16
    VOCODER_DISC_LAYERS = 4
    VOCODER_DISC_STRIDE = 4
    VOCODER_DISC_MAX_CHANNELS = 1024
    VOCODER_FEATURE_MATCH_WEIGHT = 10.0
    VOCODER_LR = 0.0001
    VOCODER_BATCH_SIZE = 16
    VOCODER_STEPS = 5000
    VOCODER_EVAL_EVERY = 100
    VOCODER_DIVERGENCE_THRESHOLD = 1e4
    VOCODER_DIVERGENCE_WINDOW = 50

    # Fixed evaluation classifiers
    CLASSIFIER_EPOCHS = 30
    CLASSIFIER_BATCH_SIZE = 64
    CLASSIFIER_LR = 0.0001
    CLASSIFIER_MIN_CLEAN_ACCURACY = 90.0
    FID_SHRINKAGE = 1e-6
    FID_EIGEN_TOLERANCE = 1e-6

    # Folder Structure
    OUTPUT_DIR = os.getenv("PRIVATE_SPEECH_OUTPUT_DIR", str(PROJECT_PATH / "outputs"))
    DEVICE = os.getenv("PRIVATE_SPEECH_DEVICE", "auto")  # Options: "auto", "cpu", "cuda", "cuda:N"

    # Performance Settings
    MAX_CONCURRENT_OPERATIONS = 4

    # Logging
    LOG_LEVEL = os.getenv("PRIVATE_SPEECH_LOG_LEVEL", "INFO")
    LOG_FILE = "logs/private_speech.log"
    LOG_MAX_BYTES = 10 * 1024 * 1024
    LOG_BACKUP_COUNT = 5

    # Process exit codes
    EXIT_OK = 0
    EXIT_UNKNOWN = 1
    EXIT_CONFIG = 2
    EXIT_DATA = 3
    EXIT_COMPATIBILITY = 4
    EXIT_NUMERIC = 5
