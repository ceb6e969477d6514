"""Query-response engine for agricultural call-centre corpora.

Pipeline: ingest logged (crop, query, answer) rows, cluster queries by a
blended embedding/token similarity with a threshold sweep, train an LSTM
classifier mapping new queries to clusters, and retrieve top-k
representative answers filtered by the query's crop.
"""

from .corpus import (
    CallRecord,
    CorpusConfig,
    CropLexicon,
    PreprocessedQuery,
    detect_and_strip_crop,
    ingest,
    is_realtime_query,
    load_corpus,
    preprocess_corpus,
    preprocess_query,
    preprocess_user_query,
)
from .embed import EmbedderSpec, cosine_similarity, hashed_embedding, make_embedder
from .errors import (
    AgriQRSError,
    ArtifactError,
    ConfigurationError,
    DataError,
    EmbeddingError,
    FitError,
    IngestionError,
    QueryError,
    UnsupportedQueryError,
    UsageError,
)
from .evalharness import (
    EvalReport,
    average_precision,
    classification_report,
    dcg,
    evaluate_retrieval,
    mean_average_precision,
    ndcg,
)
from .mapper import (
    MapperModel,
    TrainConfig,
    gradient_check,
    init_model,
    lstm_forward,
    predict_cluster,
    split_dataset,
    train_mapper,
)
from .pipeline import PipelineArtifact, PipelineConfig, fit
from .retrieval import (
    AnswerParams,
    RankedAnswer,
    RankedAnswers,
    answer_similarity,
    cluster_answers,
    select_candidates,
    top_k_answers,
)
from .simcluster import (
    ClusterParams,
    ClusterSet,
    benchmark_clustering,
    calinski_harabasz,
    davies_bouldin,
    jaccard_similarity,
    kmeans_baseline,
    query_similarity_matrix,
    silhouette_score,
    threshold_cluster,
)

__version__ = "0.1.0"
