"""Quote-aware teaser assembly: retrieval-backed quote fulfillment for long videos."""

from .assembler import (
    FramePool,
    TeaserTimeline,
    TimelineEntry,
    assemble,
    export_timeline,
    load_timeline,
    match_narration_visuals,
)
from .corpus import (
    ClipRecord,
    DocumentaryRecord,
    SpeakerSegment,
    TrainingSample,
    build_training_samples,
    chunk_transcript,
    extract_quotable_clips,
    identify_narrator,
    load_transcript,
)
from .embedding import (
    FusionHead,
    QueryEncoder,
    TrainConfig,
    cosine_similarity,
    encode_query,
    fuse,
    grad_retrieval_loss,
    hash_text_embedder,
    l2_retrieval_loss,
    retrieval_loss,
    total_loss,
    train,
)
from .errors import ConfigError, DataError, ParseError, QuoteReelError
from .metrics import (
    MetricReport,
    frame_f1,
    interview_ratio,
    overlap_ratio,
    qcr,
    qdi,
    repetitiveness,
    rouge,
    scene_change_rate,
)
from .retriever import (
    CandidatePool,
    RetrievalResult,
    build_pool,
    clip_fitness,
    fulfill_quotes,
    group_sample_negatives,
    recall_at_k,
    retrieve_top_k,
)
from .script import (
    DirectQuote,
    Narration,
    QuotePlaceholder,
    Script,
    count_quotes,
    parse_dq,
    parse_idq,
    serialize,
)

__version__ = "0.1.0"
