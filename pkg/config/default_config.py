"""Default configuration for the AttnROM pipeline.

IMPORTANT: This is the SINGLE SOURCE OF TRUTH for defaults. RunConfig files
(see config/desk.ini) override individual keys section by section; every key
a RunConfig may set must appear here.

Units: time in hours, grid extents in points, learning rates per step.
"""

# ===================================================================================
# DATA - synthetic desk-scale grid and the held-out "future" fraction
# ===================================================================================

GRID_CONFIG = {
    "height": 33,
    "width": 48,
    "steps": 2000,
    "dt_hours": 6.0,
    "t0_hours": 0.0,
    "n_waves": 6,
    "n_noise": 8,
    "noise_amplitude": 0.05,
    "season_period_hours": 8766.0,  # one year
    "season_amplitude": 0.3,
    "holdout_fraction": 0.1,
}

# ===================================================================================
# MODELS
# ===================================================================================

# Desk-scale autoencoder: 4x33x48 -> latent 8x9x12 (864 values)
CAE_CONFIG = {
    "stem_channels": 16,
    "stage_channels": [16, 32],
    "latent_channels": 8,
    "cbam": True,
    "reduction": 4,
}

# Published-scale autoencoder: 4x121x240 -> latent 8x8x15 (960 values, 121:1)
REFERENCE_SCALE_CAE_CONFIG = {
    "channels": 4,
    "height": 121,
    "width": 240,
    "stem_channels": 32,
    "stage_channels": [64, 128, 256, 256],
    "latent_channels": 8,
    "cbam": True,
    "reduction": 16,
}

TRAIN_CONFIG = {
    "learning_rate": 1e-3,
    "batch_size": 32,
    "epochs": 100,
    "patience": 5,
    "decay_factor": 0.5,
    "min_lr": 1e-6,
    "val_fraction": 0.1,
}

POD_CONFIG = {
    "k": 864,  # same latent size as the desk autoencoder
    "k_list": [8, 16, 32, 64, 128, 256, 512, 864],
    "method": "lapack",  # or "jacobi"
    "weighted": True,
}

ROM_CONFIG = {
    "d": 8,
    "d_list": [1, 2, 4, 8],
    "ridge": 0.0,
}

# ===================================================================================
# EXPERIMENTS
# ===================================================================================

EXPERIMENT_CONFIG = {
    "num_starts": 10,
    "spacing": 12,  # 3 days at 6-hour steps
    "horizon": 32,  # 8 days at 6-hour steps
    "denormalize": False,
}

# Runtime configuration
RUNTIME_CONFIG = {
    "seed": 0,
    "threads": 1,
}

# Logging configuration
LOGGING_CONFIG = {
    "level": "INFO",
    "log_to_console": True,
    "log_to_file": True,
}
