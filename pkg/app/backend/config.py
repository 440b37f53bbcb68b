"""Configuration keys and environment variables for the qremlab command-line front end."""

ENV_OUTPUT_DIR = "QREMLAB_OUTPUT_DIR"
ENV_MAX_COST = "QREMLAB_MAX_COST"
ENV_WORKERS = "QREMLAB_WORKERS"
DEFAULT_MAX_COST = 5e11

CONFIG_VARIANT = "variant"
CONFIG_P_LIST = "p_list"
CONFIG_N_LIST = "n_list"
CONFIG_BETA_GRID = "beta_grid"
CONFIG_GAMMA_GRID = "gamma_grid"
CONFIG_EPSILON = "epsilon"
CONFIG_R = "r"
CONFIG_L = "L"
CONFIG_NUM_DISORDER = "num_disorder"
CONFIG_PROBES = "probes"
CONFIG_KRYLOV_DIM = "krylov_dim"
CONFIG_BASE_SEED = "base_seed"
CONFIG_METHOD = "method"
CONFIG_OUTPUT = "output"
CONFIG_FORMAT = "format"
CONFIG_WORKERS = "workers"
CONFIG_MAX_COST = "max_cost"
CONFIG_TIMING = "timing"
CONFIG_INCLUDE_REM = "include_rem"
