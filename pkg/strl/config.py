"""Configuration constants and run configuration for the STRL anomaly detector."""

import os
import re
from dataclasses import asdict, dataclass, fields

from strl.utils.errors import ConfigError

# Debug mode - verbose logging for experiments
DEBUG_MODE = os.getenv('STRL_DEBUG', 'false').lower() == 'true'

# Repository root (parent of the strl package directory)
REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

LOG_DIR = os.getenv('STRL_LOG_DIR', os.path.join(REPO_ROOT, "logs"))

# Model input (reference scale is 256x256; desk scale is 64x64)
RESOLUTION = 64
CLIP_LENGTH = 4
CHANNELS = (16, 32, 64)
EMBED_DIM = 64

# Optimisation (full-scale runs use 1000 epochs)
LEARNING_RATE = 1e-5
BATCH_SIZE = 4
EPOCHS = 50
CHECKPOINT_EVERY = 10
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8

# Batch norm
BN_EPS = 1e-5
BN_MOMENTUM = 0.1

# Loss weights
LAMBDA_GRD = 1.0
LAMBDA_MOT = 1.0
LAMBDA_RL = 0.5

# Relation learning
RL_LOSS_FORMS = ('literal', 'per_location')
NEGATIVE_SPEED_INTERVALS = (1, 2, 3, 4)

# Moving-region extraction (thresholds are defined at 256x256)
REFERENCE_RESOLUTION = 256
REGION_MOTION_THRESHOLD = 0.1
REGION_MORPH_KERNEL = 8
REGION_MIN_EXTENT = 8
REGION_SCALE = 1.5
GAUSSIAN_SIGMA = 1.1
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

# Scoring
SMOOTHING_WINDOW = 15

# Relation map clustering
KMEANS_RESTARTS = 50
KMEANS_TOL = 1e-6

# Synthetic scenarios
SYNTH_SCENARIOS = ('speed', 'region', 'shape')

CACHE_DIR = os.path.join(REPO_ROOT, "cache")

# A comment starts at "#" on a fresh line or after whitespace, so "run#2" stays a value
COMMENT_PATTERN = re.compile(r"(^|\s)#")

# Paths on the writing machine; left out of checkpoint snapshots
MACHINE_LOCAL_KEYS = ('cache_dir',)


@dataclass
class Config:
    """Snapshot of every tunable value of one run."""

    resolution: int = RESOLUTION
    clip_length: int = CLIP_LENGTH
    channels: tuple = CHANNELS
    embed_dim: int = EMBED_DIM
    learning_rate: float = LEARNING_RATE
    batch_size: int = BATCH_SIZE
    epochs: int = EPOCHS
    checkpoint_every: int = CHECKPOINT_EVERY
    lambda_grd: float = LAMBDA_GRD
    lambda_mot: float = LAMBDA_MOT
    lambda_rl: float = LAMBDA_RL
    rl_loss_form: str = 'literal'
    literal_gap: bool = False
    literal_eq11_sum: bool = False
    negative_global_pool: bool = False
    smoothing_window: int = SMOOTHING_WINDOW
    seed: int = 0
    cache_masks: bool = False
    cache_dir: str = CACHE_DIR

    def validate(self):
        """
        Check the invariants every command relies on.

        Raises:
            ConfigError: On the first violated invariant
        """
        if self.resolution <= 0 or self.resolution % 8 != 0:
            raise ConfigError(f"resolution must be a positive multiple of 8, got {self.resolution}")
        if self.clip_length < 3:
            raise ConfigError(f"clip_length must be at least 3, got {self.clip_length}")
        if len(self.channels) != 3 or any(c <= 0 for c in self.channels):
            raise ConfigError(f"channels must be three positive widths, got {self.channels}")
        if self.embed_dim != self.channels[-1]:
            raise ConfigError(
                f"embed_dim ({self.embed_dim}) must equal the last channel width ({self.channels[-1]})"
            )
        for name in ('lambda_grd', 'lambda_mot', 'lambda_rl'):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative, got {getattr(self, name)}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1 or self.epochs < 0 or self.checkpoint_every < 1:
            raise ConfigError("batch_size and checkpoint_every must be >= 1 and epochs >= 0")
        if self.rl_loss_form not in RL_LOSS_FORMS:
            raise ConfigError(f"rl_loss_form must be one of {RL_LOSS_FORMS}, got {self.rl_loss_form!r}")
        if self.smoothing_window < 1 or self.smoothing_window % 2 == 0:
            raise ConfigError(f"smoothing_window must be odd, got {self.smoothing_window}")
        return self

    def to_text(self, portable=False):
        """
        Serialize as the flat ``key = value`` format read by load_config.

        Args:
            portable: Leave out machine-local keys so readers fall back to their own defaults

        Raises:
            ConfigError: If a string value would not read back unchanged
        """
        lines = []
        for key, value in asdict(self).items():
            if portable and key in MACHINE_LOCAL_KEYS:
                continue
            if isinstance(value, (tuple, list)):
                value = ",".join(str(v) for v in value)
            elif isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, str) and (COMMENT_PATTERN.search(value) or value != value.strip()
                                             or "\n" in value):
                raise ConfigError(f"{key} cannot be written as config text: {value!r}")
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text, overrides=None):
        """
        Build a config from ``key = value`` text.

        Args:
            text: File contents; ``#`` at line start or after whitespace starts a comment
            overrides: Optional mapping applied after the file values

        Returns:
            Config: Validated configuration
        """
        values = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            comment = COMMENT_PATTERN.search(raw)
            line = (raw[:comment.start()] if comment else raw).strip()
            if not line:
                continue
            if '=' not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            key, value = (part.strip() for part in line.split('=', 1))
            values[key] = value

        values.update(overrides or {})

        config = cls()
        types = {f.name: f.type for f in fields(cls)}
        for key, value in values.items():
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            setattr(config, key, _coerce(key, value, types[key]))

        return config.validate()


def _coerce(key, value, kind):
    """Convert a raw config value to the field's type."""
    if not isinstance(value, str):
        return tuple(value) if kind in (tuple, 'tuple') else value

    try:
        if kind in (bool, 'bool'):
            lowered = value.lower()
            if lowered not in ('true', 'false', '1', '0', 'yes', 'no'):
                raise ValueError(value)
            return lowered in ('true', '1', 'yes')
        if kind in (int, 'int'):
            return int(value)
        if kind in (float, 'float'):
            return float(value)
        if kind in (tuple, 'tuple'):
            return tuple(int(v) for v in value.split(',') if v.strip())
    except ValueError:
        raise ConfigError(f"invalid value for {key}: {value!r}") from None

    return value


def load_config(path=None, overrides=None):
    """
    Load a run configuration.

    Args:
        path: Optional config file path; defaults apply when None
        overrides: Mapping of key to raw string (or typed) values from the CLI

    Returns:
        Config: Validated configuration
    """
    text = ""
    if path is not None:
        try:
            with open(path, 'r', encoding='utf-8') as f:
                text = f.read()
        except OSError as e:
            raise ConfigError(f"cannot read config file {path}: {e}") from None

    return Config.from_text(text, overrides)
