"""pointkit: deterministic point-cloud tokenization, encoding, matching,
oriented-box grounding, corruption benchmarks and judged QA scoring."""

from .boxes import (
    GroundingResult,
    OrientedBox,
    corners_from_pose,
    fit_pose_from_corners,
    format_box,
    ground,
    intersection_volume,
    iou,
    parse_box,
    reg_accuracy,
)
from .cloud import (
    Neighborhood,
    PointCloud,
    SeedSet,
    chamfer,
    fps,
    knn_group,
    normalize_unit_sphere,
)
from .cloud_io import read_cloud, write_cloud
from .corruptions import (
    KINDS,
    CorruptionSpec,
    apply_corruption,
    augment,
    jitter,
    rotate,
    single_view,
    single_view_indices,
)
from .encoder import (
    EncoderConfig,
    RepresentationBundle,
    WeightBank,
    ape,
    assemble,
    bundle_from_cloud,
    dump_weights,
    encode,
    load_weights,
    masked_token_indices,
    point_mlp_embed,
    project,
    tokens_from_neighborhoods,
)
from .errors import (
    ConsistencyError,
    DegenerateFeature,
    EmptyInput,
    EmptyView,
    InvalidBox,
    InvalidConfig,
    InvalidCost,
    InvalidCount,
    InvalidPose,
    JudgeUnavailable,
    ParseError,
    PointkitError,
    SchemaError,
)
from .evalkit import (
    CAPABILITIES,
    QARecord,
    Report,
    ScoreRecord,
    aggregate,
    emit_report,
    ingest,
    run_eval,
    score_answer,
    zeroshot_topk,
)
from .judges import HttpJudge, StubJudge, build_prompt, parse_score, token_f1
from .matching import Assignment, CostMatrix, alignment_loss, cosine_cost, hungarian
from .rng import SeededStream

__version__ = "0.1.0"
