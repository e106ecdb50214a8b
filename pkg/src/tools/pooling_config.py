import os
import configparser
from typing import Tuple

from dotenv import load_dotenv

load_dotenv()

_POOLING_INI_PATH = os.environ.get(
    "TPOOL_CONFIG", os.path.join(os.path.dirname(__file__), "../..", ".pooling.ini")
)

config = configparser.RawConfigParser()
# a missing file leaves every value at its built-in default
config.read(_POOLING_INI_PATH)


def _floats(section: str, option: str, fallback: str) -> Tuple[float, ...]:
    raw = config.get(section, option, fallback=fallback)
    return tuple(float(v) for v in raw.split(",") if v.strip())


MINKOWSKI_P = config.getfloat("pooling", "minkowski_p", fallback=2.0)
PERCENTILE_K = config.getfloat("pooling", "percentile_k", fallback=10.0)
VARIATION_K = config.getfloat("pooling", "variation_k", fallback=10.0)
PRIMACY_L = config.getint("pooling", "primacy_L", fallback=180)
ALPHA_P = config.getfloat("pooling", "alpha_p", fallback=0.01)
ALPHA_R = config.getfloat("pooling", "alpha_r", fallback=0.01)
HYSTERESIS_TAU = config.getint("pooling", "hysteresis_tau", fallback=60)
HYSTERESIS_ALPHA = config.getfloat("pooling", "hysteresis_alpha", fallback=0.8)

TRIALS = config.getint("evaluate", "trials", fallback=100)
SEED = config.getint("evaluate", "seed", fallback=0)
TRAIN_FRACTION = config.getfloat("evaluate", "train_fraction", fallback=0.8)
WORKERS = config.getint("evaluate", "workers", fallback=1)

SVR_EPSILON = config.getfloat("svr", "epsilon", fallback=0.1)
SVR_MAX_ITER = config.getint("svr", "max_iter", fallback=10000)
SVR_TOL = config.getfloat("svr", "tol", fallback=1e-3)
GRID_FOLDS = config.getint("svr", "folds", fallback=5)
GRID_C_VALUES = _floats("svr", "c_values", "1,10,100")
GRID_GAMMA_MULTIPLIERS = _floats("svr", "gamma_multipliers", "1,10,100")
FRAME_STRIDE = config.getint("svr", "frame_stride", fallback=1)
