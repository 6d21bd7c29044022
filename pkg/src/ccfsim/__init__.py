"""ccfsim: deterministic desk-scale simulator of a decentralized
learning collective.

Nodes solve quadratic tasks privately, export clipped and noised
artifacts through a pairwise-mask secure-aggregation channel, and an
aggregator folds the surviving artifacts into reputation-weighted
per-type priors that condition every node's next update. A carbon-aware
scheduler decides when rounds run; a transcript with a content hash
makes every run reproducible and auditable.
"""

from .config import RunConfig
from .engine import RunResult, Transcript, apply_adversary, consolidate, run
from .errors import (CcfSimError, ConfigurationError,
                     DispersionUndefinedError, EmptyAggregateError,
                     IntegrityError, PrivacyBudgetExhausted,
                     ProtocolSetupError, ProtocolViolationError, RoundAborted)
from .field import (ImprovementSignal, ReputationLedger, detect_anomalies,
                    filter_and_weight, form_field, improve, update_reputation)
from .kernels import BACKEND
from .node import (CollectiveView, Node, PatternObject, PrivateState,
                   RawSignal, ValidationResult)
from .privacy import (AggregateResult, DpParams, MaskedShare,
                      aggregate_masked, derive_pairwise_seeds, dequantize,
                      make_masks, mask_share, proj, quantize)
from .scheduler import (ActivityPlan, EnergyTrace, Job, Mode, Thresholds,
                        baseline_earliest, classify_slot, plan_carbon,
                        schedule)
from .spaces import (Artifact, CcfSnapshot, SharedSpaceConfig, dispersion,
                     distance, learning_activity)
from .tasks import (Outcome, Task, TaskFamily, gradient_step, quadratic_loss,
                    sample_task, solve, task_distance)

__version__ = "0.1.0"

__all__ = [
    "Artifact", "ActivityPlan", "AggregateResult", "BACKEND", "CcfSimError",
    "CcfSnapshot", "CollectiveView", "ConfigurationError",
    "DispersionUndefinedError", "DpParams", "EmptyAggregateError",
    "EnergyTrace", "ImprovementSignal", "IntegrityError", "Job",
    "MaskedShare", "Mode", "Node", "Outcome", "PatternObject",
    "PrivacyBudgetExhausted", "PrivateState", "ProtocolSetupError",
    "ProtocolViolationError", "RawSignal", "ReputationLedger", "RoundAborted",
    "RunConfig", "RunResult", "SharedSpaceConfig", "Task", "TaskFamily",
    "Thresholds", "Transcript", "ValidationResult", "aggregate_masked",
    "apply_adversary", "baseline_earliest", "classify_slot", "consolidate",
    "dequantize", "derive_pairwise_seeds", "detect_anomalies", "dispersion",
    "distance", "filter_and_weight", "form_field", "gradient_step",
    "improve", "learning_activity", "make_masks", "mask_share",
    "plan_carbon", "proj", "quadratic_loss", "quantize", "run",
    "sample_task", "schedule", "solve", "task_distance", "update_reputation",
]
