"""
Configuration file for the Holomorphic Algebroid Engine.
Tolerance ledger, sampling defaults, integration settings and logging.
"""
import os
import logging.config
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

# Application Configuration
APP_NAME = "Holomorphic Algebroid Engine"
VERSION = "1.0.0"

# Base Directory
BASE_DIR = Path(__file__).parent
LOG_DIR = Path(os.getenv("ALGEBROID_LOG_DIR", str(BASE_DIR / "logs")))
LOG_LEVEL = os.getenv("ALGEBROID_LOG_LEVEL", "WARNING").upper()
DEBUG_MODE = os.getenv("ALGEBROID_DEBUG", "False").lower() == "true"

# Tolerance ledger used by every residual check
TOLERANCES = {
    "exact_ad": 1e-9,     # identities evaluated with exact forward-mode derivatives
    "metric": 1e-8,       # completions and metric-mediated checks
    "fd": 1e-6,           # finite-difference cross-checks (relative)
    "ode": 1e-6,          # trajectory admissibility
    "exact": 1e-12,       # algebraic identities that hold up to rounding only
    "transport": 1e-10,   # round trips of connection transports
}

# Numerical thresholds
NUMERICS = {
    "pivot_tol": 1e-10,             # rank decisions
    "singular_metric_det": 1e-12,   # |det g| below this is singular
    "jacobian_det": 1e-10,          # |det dz~/dz| below this is singular
    "reality_tol": 1e-12,           # max imaginary part of a Lagrangian
    "fd_step": 1e-5,
    "chart_identity_tol": 1e-10,    # M.W = I
}

# Point sampling
SAMPLING_CONFIG = {
    "points": int(os.getenv("ALGEBROID_POINTS", "100")),
    "seed": int(os.getenv("ALGEBROID_SEED", "42")),
    "radius_min": 0.3,
    "radius_max": 2.0,
    "exclusion_radius": 0.1,
    "max_draws_per_point": 1000,
}

# Sprays
SPRAY_CONFIG = {
    "homogeneity_lambdas": [2.0, 1j, 1.0 + 1.0j, 0.5],
    "spray_tolerance": 1e-9,
}

# Integral curves
INTEGRATION_CONFIG = {
    "method": "rk4",
    "step": 1e-3,
    "t_end": 1.0,
    "order_step": 0.02,      # coarse step of the RK4 order check
    "order_t_end": 0.5,
    "order_ratio_bounds": (12.0, 20.0),
    "exact_error": 1e-12,    # endpoint errors below this count as exact
}

# Report output
REPORT_CONFIG = {
    "indent": 2,
    "sort_keys": True,
    "probe_z": 1.0,   # default probe point z_k = 1
    "probe_u": 2.0,   # default probe point u_alpha = 2
}

# Default Lagrangians of the built-in catalog entries (on E unless noted)
CATALOG_CONFIG = {
    "default_lagrangians": {
        "trivial": "z1*zb1*u1*ub1",
        "tangent": "u1*ub1 + u2*ub2 + z1*zb1*u1*ub1",
        "scaled": "(1 + z1*zb1)*u1*ub1",
        "immersion": "eta1*etab1 + eta2*etab2 + z1*zb1*eta1*etab1",
        "submersion": "u1*ub1 + u2*ub2 + z1*zb1*u1*ub1",
        "twochart": "z1*zb1*u1*ub1",
        "heisenberg-like": "u1*ub1 + u2*ub2 + u3*ub3 + z1*zb1*u1*ub1",
    },
    # Lagrangians of these entries live on T'M (variables eta)
    "tm_lagrangians": ["immersion"],
}

# Logging Configuration
LOGGING_CONFIG = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "standard": {
            "format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
        },
        "detailed": {
            "format": "%(asctime)s - %(name)s - %(levelname)s - %(module)s - %(funcName)s - %(lineno)d - %(message)s"
        }
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "level": LOG_LEVEL,
            "formatter": "standard",
            "stream": "ext://sys.stderr"
        },
        "file": {
            "class": "logging.handlers.RotatingFileHandler",
            "level": "DEBUG",
            "formatter": "detailed",
            "filename": str(LOG_DIR / "engine.log"),
            "maxBytes": 10485760,
            "backupCount": 5
        }
    },
    "loggers": {
        "": {
            "handlers": ["console", "file"],
            "level": "DEBUG" if DEBUG_MODE else "INFO",
            "propagate": False
        },
        "core": {
            "handlers": ["console", "file"],
            "level": "DEBUG" if DEBUG_MODE else "INFO",
            "propagate": False
        },
        "harness": {
            "handlers": ["console", "file"],
            "level": "DEBUG" if DEBUG_MODE else "INFO",
            "propagate": False
        }
    }
}

# Create logs directory
LOG_DIR.mkdir(parents=True, exist_ok=True)

logging.config.dictConfig(LOGGING_CONFIG)
logger = logging.getLogger(__name__)
logger.info(f"Configuration loaded for {APP_NAME} v{VERSION}")
logger.debug(f"Tolerances: {TOLERANCES}")
