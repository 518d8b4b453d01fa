"""Python access to the vrgym simulator, bridge codec, learners and predictors."""

from ._vrgym import *  # noqa: F401,F403
from ._vrgym import (
    EnvError,
    FrameError,
    IntentError,
    LogError,
    SceneError,
)

__all__ = [name for name in dir() if not name.startswith("_")]
