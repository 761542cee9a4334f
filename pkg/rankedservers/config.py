import os


def _env_bool(name, default):
    value = os.environ.get(name)
    if value is None:
        return default
    return value.strip().lower() in ("1", "true", "yes", "on")


def load_config(overrides=None):
    """
    Build the run configuration.

    Defaults first, then optional environment overrides, then explicit
    ``overrides`` (tests pass these). Nothing here is required: every value can
    also be set through a command-line flag.
    """
    config = {
        # --- Exact computations ---
        "DEFAULT_EPS": float(os.environ.get("RANKEDSERVERS_EPS", "1e-10")),
        # --- Simulation ---
        "DEFAULT_ALPHA": 0.001,
        "DEFAULT_WARMUP": 50.0,
        "DEFAULT_SEED": 0,
        "DEFAULT_REPS": 1,
        "DEFAULT_RECORD_EVERY": 1,
        "BATCH_COUNT": 64,
        # worker count for replications; never changes results
        "N_JOBS": int(os.environ.get("RANKEDSERVERS_N_JOBS", "1")),
        # --- Check thresholds ---
        "RESIDUAL_WIDTH_LIMIT": 0.5,
        "BODY_RATIO_LIMIT": 0.75,
        "UNIFORM_ENVELOPE": 2.0,
        "TAIL_WINDOW": 20,
        # --- Logging ---
        "LOG_LEVEL": os.environ.get("RANKEDSERVERS_LOG_LEVEL", "INFO").upper(),
        "SHOW_PROGRESS": _env_bool("RANKEDSERVERS_PROGRESS", False),
        # set from --debug; also turns on simulator consistency checks
        "DEBUG": False,
    }
    if overrides:
        config.update(overrides)
    return config
