"""End-to-end pipeline: fit, persist, reload, answer queries.

A fitted pipeline is saved as a directory of four files:

* ``manifest.json``: every knob needed to reproduce the fit (cluster
  and answer parameters, training config, embedder spec, word lists,
  crop lexicon), plus drop accounting and the tensor index for the
  weights file. Serialized with sorted keys and no timestamps, so two
  identical fits produce byte-identical manifests.
* ``records.jsonl``: the cleaned corpus records, one JSON object per
  line in index order.
* ``clusters.json``: cluster membership and drop lists as record
  indices.
* ``weights.bin``: raw little-endian float32 tensors, row-major,
  concatenated in manifest order.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .corpus import (
    CallRecord,
    CorpusConfig,
    CropLexicon,
    IngestReport,
    PreprocessReport,
    ingest,
    preprocess_corpus,
    preprocess_user_query,
)
from .embed import EmbedderSpec, embed_texts, make_embedder
from .errors import ArtifactError, ConfigurationError, FitError
from .mapper import MapperModel, TrainConfig, predict_cluster, train_mapper
from .retrieval import AnswerParams, RankedAnswers, top_k_answers
from .simcluster import ClusterParams, query_similarity_matrix, save_similarity_matrix, threshold_cluster
from .textproc import load_wordlist

FORMAT_VERSION = 1

MANIFEST_FILE = "manifest.json"
RECORDS_FILE = "records.jsonl"
CLUSTERS_FILE = "clusters.json"
WEIGHTS_FILE = "weights.bin"


@dataclass(frozen=True)
class PipelineConfig:
    cluster: ClusterParams = field(default_factory=ClusterParams)
    answer: AnswerParams = field(default_factory=AnswerParams)
    train: TrainConfig = field(default_factory=TrainConfig)
    embedder: EmbedderSpec = field(default_factory=EmbedderSpec)
    corpus: CorpusConfig = field(default_factory=CorpusConfig)

    _SECTIONS = ("cluster", "answer", "train", "embedder", "corpus")

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        unknown = set(data) - set(cls._SECTIONS) - {"stopwords_path", "realtime_keywords_path"}
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        corpus_kwargs = dict(data.get("corpus", {}))
        extra = set(corpus_kwargs) - {"crop_column", "query_column", "answer_column", "delimiter"}
        if extra:
            raise ConfigurationError(f"unknown corpus config keys: {sorted(extra)}")
        if "stopwords_path" in data:
            corpus_kwargs["stopwords"] = frozenset(load_wordlist(data["stopwords_path"]))
        if "realtime_keywords_path" in data:
            corpus_kwargs["realtime_keywords"] = tuple(
                load_wordlist(data["realtime_keywords_path"])
            )
        try:
            return cls(
                cluster=ClusterParams.from_dict(data.get("cluster", {})),
                answer=AnswerParams.from_dict(data.get("answer", {})),
                train=TrainConfig.from_dict(data.get("train", {})),
                embedder=EmbedderSpec.from_dict(data.get("embedder", {})),
                corpus=CorpusConfig(**corpus_kwargs),
            )
        except TypeError as exc:
            raise ConfigurationError(f"bad config: {exc}") from exc


@dataclass
class PipelineArtifact:
    config: PipelineConfig
    lexicon_names: tuple[str, ...]
    records: list[CallRecord]
    clusters: list[list[int]]
    dropped_small: list[int]
    dropped_realtime: list[int]
    dropped_empty: list[int]
    model: MapperModel
    counts: dict

    def __post_init__(self):
        self._provider = None
        self._lexicon = None

    @property
    def lexicon(self) -> CropLexicon:
        if self._lexicon is None:
            self._lexicon = CropLexicon(self.lexicon_names)
        return self._lexicon

    @property
    def provider(self):
        if self._provider is None:
            self._provider = make_embedder(self.config.embedder)
        return self._provider

    def query(self, text: str, k: int = 5) -> RankedAnswers:
        """Answer one query: preprocess, map to a cluster, retrieve top-k."""
        view = preprocess_user_query(text, self.lexicon, self.config.corpus)
        embedding = self.provider.embed_batch([view.text_contextual])[0]
        cluster_id, _ = predict_cluster(self.model, embedding)
        members = self.clusters[cluster_id]
        return top_k_answers(
            self.records,
            members,
            query_text=text,
            crop=view.detected_crop,
            cluster_id=cluster_id,
            k=k,
            params=self.config.answer,
        )

    # -- persistence --------------------------------------------------------

    def save(self, out_dir) -> None:
        os.makedirs(out_dir, exist_ok=True)
        tensors = []
        offset = 0
        blobs = []
        for name, value in self.model.tensor_items():
            raw = np.ascontiguousarray(value.astype("<f4")).tobytes()
            tensors.append(
                {
                    "name": name,
                    "shape": list(value.shape),
                    "dtype": "float32",
                    "offset_bytes": offset,
                }
            )
            blobs.append(raw)
            offset += len(raw)

        manifest = {
            "format_version": FORMAT_VERSION,
            "cluster_params": self.config.cluster.to_dict(),
            "answer_params": self.config.answer.to_dict(),
            "train_config": self.config.train.to_dict(),
            "embedder": self.config.embedder.to_dict(),
            "corpus_config": {
                "crop_column": self.config.corpus.crop_column,
                "query_column": self.config.corpus.query_column,
                "answer_column": self.config.corpus.answer_column,
                "delimiter": self.config.corpus.delimiter,
            },
            "stopwords": sorted(self.config.corpus.stopwords),
            "realtime_keywords": list(self.config.corpus.realtime_keywords),
            "crop_lexicon": sorted(self.lexicon_names),
            "counts": self.counts,
            "model": {
                "kind": self.model.kind,
                "input_dim": self.model.input_dim,
                "hidden1": self.model.hidden1,
                "hidden2": self.model.hidden2,
                "n_classes": self.model.n_classes,
                "label_map": list(self.model.label_map),
                "tensors": tensors,
            },
        }
        with open(os.path.join(out_dir, MANIFEST_FILE), "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, sort_keys=True, indent=2)
            fh.write("\n")
        with open(os.path.join(out_dir, RECORDS_FILE), "w", encoding="utf-8") as fh:
            for rec in self.records:
                fh.write(
                    json.dumps(
                        {
                            "index": rec.index,
                            "crop": rec.crop,
                            "query": rec.query,
                            "answer": rec.answer,
                        },
                        sort_keys=True,
                        ensure_ascii=False,
                    )
                )
                fh.write("\n")
        with open(os.path.join(out_dir, CLUSTERS_FILE), "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "clusters": self.clusters,
                    "dropped_small": self.dropped_small,
                    "dropped_realtime": self.dropped_realtime,
                    "dropped_empty": self.dropped_empty,
                },
                fh,
                sort_keys=True,
                indent=2,
            )
            fh.write("\n")
        with open(os.path.join(out_dir, WEIGHTS_FILE), "wb") as fh:
            for blob in blobs:
                fh.write(blob)

    @classmethod
    def load(cls, artifact_dir) -> "PipelineArtifact":
        def path_of(name):
            p = os.path.join(artifact_dir, name)
            if not os.path.isfile(p):
                raise ArtifactError(f"artifact {artifact_dir} is missing {name}")
            return p

        with open(path_of(MANIFEST_FILE), encoding="utf-8") as fh:
            try:
                manifest = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ArtifactError(f"manifest is not valid JSON: {exc}") from exc
        version = manifest.get("format_version")
        if version != FORMAT_VERSION:
            raise ArtifactError(f"unsupported artifact format_version {version!r}")

        try:
            config = PipelineConfig(
                cluster=ClusterParams.from_dict(manifest["cluster_params"]),
                answer=AnswerParams.from_dict(manifest["answer_params"]),
                train=TrainConfig.from_dict(manifest["train_config"]),
                embedder=EmbedderSpec.from_dict(manifest["embedder"]),
                corpus=CorpusConfig(
                    stopwords=frozenset(manifest["stopwords"]),
                    realtime_keywords=tuple(manifest["realtime_keywords"]),
                    **manifest["corpus_config"],
                ),
            )
            lexicon_names = tuple(manifest["crop_lexicon"])
            model_meta = manifest["model"]
            counts = manifest["counts"]
        except (KeyError, TypeError) as exc:
            raise ArtifactError(f"manifest is missing fields: {exc}") from exc

        records = []
        with open(path_of(RECORDS_FILE), encoding="utf-8") as fh:
            for lineno, line in enumerate(fh):
                try:
                    row = json.loads(line)
                    rec = CallRecord(
                        index=int(row["index"]),
                        crop=row["crop"],
                        query=row["query"],
                        answer=row["answer"],
                    )
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise ArtifactError(f"bad record at line {lineno}: {exc}") from exc
                if rec.index != lineno:
                    raise ArtifactError(
                        f"record index {rec.index} out of order at line {lineno}"
                    )
                records.append(rec)

        with open(path_of(CLUSTERS_FILE), encoding="utf-8") as fh:
            try:
                cj = json.load(fh)
                clusters = [list(map(int, c)) for c in cj["clusters"]]
                dropped_small = list(map(int, cj["dropped_small"]))
                dropped_realtime = list(map(int, cj["dropped_realtime"]))
                dropped_empty = list(map(int, cj["dropped_empty"]))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ArtifactError(f"bad clusters file: {exc}") from exc
        n_rec = len(records)
        for idx in (i for c in clusters for i in c):
            if not 0 <= idx < n_rec:
                raise ArtifactError(f"cluster member {idx} outside record range")
        if len(clusters) != int(model_meta["n_classes"]):
            raise ArtifactError(
                f"{len(clusters)} clusters but model has {model_meta['n_classes']} classes"
            )

        blob = open(path_of(WEIGHTS_FILE), "rb").read()
        params: dict[str, np.ndarray] = {}
        end = 0
        for meta in model_meta["tensors"]:
            shape = tuple(int(s) for s in meta["shape"])
            count = int(np.prod(shape)) if shape else 1
            start = int(meta["offset_bytes"])
            end = start + count * 4
            if end > len(blob):
                raise ArtifactError(
                    f"weights.bin too short for tensor {meta['name']} ({end} > {len(blob)})"
                )
            params[meta["name"]] = (
                np.frombuffer(blob, dtype="<f4", count=count, offset=start)
                .reshape(shape)
                .copy()
            )
        if end != len(blob):
            raise ArtifactError(f"weights.bin has {len(blob) - end} trailing bytes")

        model = MapperModel(
            kind=model_meta["kind"],
            input_dim=int(model_meta["input_dim"]),
            hidden1=int(model_meta["hidden1"]),
            hidden2=int(model_meta["hidden2"]),
            n_classes=int(model_meta["n_classes"]),
            params=params,
            label_map=[int(x) for x in model_meta["label_map"]],
        )
        return cls(
            config=config,
            lexicon_names=lexicon_names,
            records=records,
            clusters=clusters,
            dropped_small=dropped_small,
            dropped_realtime=dropped_realtime,
            dropped_empty=dropped_empty,
            model=model,
            counts=counts,
        )


def fit(
    corpus_path,
    lexicon: CropLexicon,
    config: PipelineConfig | None = None,
    dump_sim_path=None,
) -> PipelineArtifact:
    """Ingest, preprocess, cluster, and train the query mapper.

    Raises FitError when no cluster survives the size floor; singleton
    corpora can be clustered by lowering min_size to 1.
    """
    config = config or PipelineConfig()
    ingest_report: IngestReport = ingest(corpus_path, config.corpus)
    records = ingest_report.records
    if not records:
        raise FitError(f"no usable records in {corpus_path}")

    pre: PreprocessReport = preprocess_corpus(records, lexicon, config.corpus)
    queries = pre.queries
    if not queries:
        raise FitError("every query was dropped during preprocessing")

    provider = make_embedder(config.embedder)
    embeddings = embed_texts(provider, [q.text_contextual for q in queries])
    token_sets = [frozenset(q.tokens_lexical) for q in queries]
    sim = query_similarity_matrix(embeddings, token_sets, config.cluster)
    if dump_sim_path:
        save_similarity_matrix(dump_sim_path, sim)
    cluster_set = threshold_cluster(sim, config.cluster)
    if len(cluster_set) == 0:
        raise FitError(
            f"no cluster of size >= {config.cluster.min_size} at thresh "
            f"{config.cluster.thresh}; lower min_size or thresh"
        )

    positions = []
    labels = []
    for cid, members in enumerate(cluster_set.clusters):
        positions.extend(members)
        labels.extend([cid] * len(members))
    model = train_mapper(
        embeddings[positions],
        np.asarray(labels, dtype=np.int64),
        config.train,
        n_classes=len(cluster_set),
    )
    # artifacts always hold float32 weights so that answers served before
    # and after a save/load round trip are identical
    model = model.astype(np.float32)

    clusters_rec = [[queries[p].record_index for p in c] for c in cluster_set.clusters]
    dropped_small = [queries[p].record_index for p in cluster_set.dropped]
    counts = {
        "rows_read": ingest_report.rows_read,
        "dropped_empty_rows": ingest_report.dropped_empty,
        "dropped_duplicate_rows": ingest_report.dropped_duplicate,
        "records": len(records),
        "dropped_realtime": len(pre.dropped_realtime),
        "dropped_empty_queries": len(pre.dropped_empty),
        "clustered_queries": sum(len(c) for c in clusters_rec),
        "clusters": len(clusters_rec),
        "dropped_small": len(dropped_small),
    }
    return PipelineArtifact(
        config=config,
        lexicon_names=tuple(lexicon.names),
        records=records,
        clusters=clusters_rec,
        dropped_small=dropped_small,
        dropped_realtime=list(pre.dropped_realtime),
        dropped_empty=list(pre.dropped_empty),
        model=model,
        counts=counts,
    )


def rebuild_query_views(artifact: PipelineArtifact):
    """Recompute preprocessing views and embeddings for an artifact's
    records, for evaluation flows that need vector space back.

    Returns (views, embeddings, position_of_record) where views follow
    record order restricted to queries that survive preprocessing.
    """
    pre = preprocess_corpus(artifact.records, artifact.lexicon, artifact.config.corpus)
    embeddings = embed_texts(
        artifact.provider, [q.text_contextual for q in pre.queries]
    )
    position_of_record = {q.record_index: i for i, q in enumerate(pre.queries)}
    return pre.queries, embeddings, position_of_record


def replace_config(config: PipelineConfig, **kwargs) -> PipelineConfig:
    return replace(config, **kwargs)
