"""Collection server: grid tasks with catch trials, answers, exports."""

from .experiments import (
    AnswerRecord,
    CollectionExperiment,
    ExperimentStore,
    SubmissionRejected,
    WorkerStats,
    generate_task_sequence,
    replay_export,
)

__all__ = [
    "AnswerRecord",
    "CollectionExperiment",
    "ExperimentStore",
    "SubmissionRejected",
    "WorkerStats",
    "generate_task_sequence",
    "replay_export",
]
