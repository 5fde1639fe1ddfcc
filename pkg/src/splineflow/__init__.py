"""Batched cubic-spline/Bezier reconstruction of particle trajectories."""

from .analysis import (
    ErrorMetrics,
    EquivalenceReport,
    cfl_max_timestep,
    cfl_min_spacestep,
    flops_coeffs,
    flops_values,
    trajectory_error,
    virtual_equivalence,
)
from .batch_sparse import (
    BlockSparseG,
    CoeffPlane,
    FlopCounter,
    SplineFit,
    StackedInput,
    assemble_b,
    assemble_g,
    batched_coeffs,
    fit_flow,
    memory_report,
)
from .errors import (
    DivisibilityError,
    IncompleteInputError,
    InvalidArgumentError,
    NumericError,
    ParseError,
    RangeError,
    ShapeError,
    SplineFlowError,
)
from .evaluator import Snapshot, assemble_snapshot, eval_segment_batch, tick_matrix
from .flow_model import (
    Flow,
    FlowField,
    GroundTruth,
    GroupOfFour,
    bezier_power_coeffs,
    generate_flow,
    ground_truth,
    group_points,
)
from .partitioner import Partition, TimingBreakdown, partition, run_spmd, speedup_report
from .spline_kernel import (
    BlendParams,
    Convention,
    SegmentCoeffs,
    blend,
    eval_cubic,
    segment_coeffs,
    t_matrix,
)

__version__ = "0.1.0"
