from .api import build_app, serve
from .pipeline import (
    PipelineError,
    apply_labels,
    auto_accept_states,
    pipeline_run,
)
from .state import (
    STAGES,
    PipelineConfig,
    ProjectState,
    ServiceError,
    load_state,
    save_state,
)

__all__ = [
    "STAGES",
    "PipelineConfig",
    "PipelineError",
    "ProjectState",
    "ServiceError",
    "apply_labels",
    "auto_accept_states",
    "build_app",
    "load_state",
    "pipeline_run",
    "save_state",
    "serve",
]
