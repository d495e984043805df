"""Secret-key agreement simulations for correlated Gaussian features.

Implements the quantization-correction advantage-distillation protocol
(ADQC), the no-exchange (NEC) and guard-band (GB) baselines, plug-in
mutual-information metrics, adversarial quantizer design by alternating
min-max search, and a CLI reproducing the reference experiments.
"""

from .errors import AdqsimError
from .metrics import (
    JointPMF,
    MetricsReport,
    csk_lower,
    gamma_cost,
    joint_pmf,
    mutual_information,
)
from .optimizer import (
    AlternationResult,
    OptimizerConfig,
    ThresholdVector,
    alternate,
    objective,
    optimize_alice_bob,
    optimize_eve,
)
from .protocols import (
    OutcomeBatch,
    ProtocolOutcome,
    SchemeSpec,
    run_adqc,
    run_gb,
    run_nec,
)
from .quantizer import (
    CorrectionIndex,
    Quantizer,
    decode_correction,
    encode_correction,
    interval_of,
    quantize,
    uniform,
)
from .source import (
    CorrelationConfig,
    Dataset,
    TriSample,
    sample_dataset,
    validate_config,
)

__version__ = "0.1.0"
