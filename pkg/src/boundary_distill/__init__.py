"""Instance-incremental learning with boundary-aware distillation.

Core pieces: a flat-parameter numpy classifier (network), fused-label +
noisy-input distillation (distill), scheduled teacher consolidation
(consolidation), drifting synthetic benchmarks and CSV ingestion (data),
the incremental protocol with four strategies (protocol), metrics and
report writers (metrics, reporting), and a CLI (cli).
"""

__version__ = "0.1.0"

from .config import (
    ConfigError,
    ExperimentConfig,
    apply_overrides,
    dump_config,
    load_config,
)
from .consolidation import (
    ConsolidationSchedule,
    EmaState,
    QuadraticLoss,
    TradeoffReport,
    adaptive_momentum,
    closed_form_teacher,
    consolidate,
    gradient_tradeoff_diagnostic,
    should_consolidate,
)
from .data import (
    CsvSchema,
    Dataset,
    DriftSpec,
    NormStats,
    Sample,
    SyntheticSpec,
    compute_norm_stats,
    elongated_cov,
    gen_base,
    gen_phase,
    gen_test,
    load_csv,
    ring_means,
    save_csv,
    standardize,
)
from .distill import (
    DistillLossTerms,
    FuseConfig,
    LabelAssignment,
    NoiseSpec,
    classify_inner_outer,
    distillation_loss,
    fuse_labels,
    fuse_labels_batch,
    perturb_inputs,
)
from .metrics import (
    MetricsRecord,
    PhaseAccuracy,
    accuracy,
    forgetting_rate,
    performance_promotion,
)
from .network import (
    ForwardCache,
    NetworkSpec,
    backward,
    forward,
    init_network,
    loss_and_grad,
    one_hot,
    sgd_step,
    soft_cross_entropy,
)
from .protocol import (
    STRATEGIES,
    IILBenchmark,
    PhaseContext,
    PhaseResult,
    RunConfig,
    drift_benchmark,
    run_benchmark,
    run_phase_boundary_distill,
    run_phase_fine_tune,
    run_phase_full_data,
    run_phase_vanilla_distill,
    split_benchmark,
    standardized_benchmark,
    train_base,
)
from .reporting import (
    BoundaryGrid,
    export_boundary_grid,
    export_report,
    read_report,
    t_confidence_interval,
)
from .seeding import derive_seed, rng_for, seed_sequence
