"""Synthetic call-centre corpora for benchmarks and evaluation.

Queries are drawn from fixed topic templates with a crop slot; per-token
noise injects misspelling-like variants so the corpus has both dense
duplicate groups and stray near-duplicates. Answers embed the crop and a
row-specific quantity, which keeps (crop, query, answer) triples unique
through ingestion dedup and gives retrieval realistic per-crop answers.
"""

from __future__ import annotations

import csv

import numpy as np

from .corpus import CallRecord, CorpusConfig, CropLexicon, preprocess_corpus
from .embed import hashed_embedding

TEMPLATES: list[tuple[str, str]] = [
    ("how to control fungal attack in {crop}", "spray mancozeb plus carbendazim at {q} gram per pump on {crop}"),
    ("fertilizer dose recommendation for {crop}", "apply npk 19 19 19 at {q} kg per acre for {crop}"),
    ("yellowing of leaves problem in {crop}", "apply ferrous sulphate {q} gram per litre to correct yellowing in {crop}"),
    ("nematode attack control measure for {crop}", "drench carbofuran {q} kg per acre against nematode in {crop}"),
    ("precaution against bollworm damage in {crop}", "install {q} pheromone traps per acre for bollworm in {crop}"),
    ("improve growth and production of {crop}", "spray growth promoter at {q} ml per pump to boost {crop} production"),
    ("seed quantity needed per acre of {crop}", "use {q} kg certified seed per acre of {crop}"),
    ("suitable sowing period advice for {crop}", "sow {crop} in week {q} after soil preparation"),
    ("weed management practice recommendation in {crop}", "apply pendimethalin {q} ml per litre within two days of sowing {crop}"),
    ("irrigation schedule guidance needed for {crop}", "irrigate {crop} every {q} days depending upon soil moisture"),
    ("high yielding varieties information of {crop}", "prefer released hybrid number {q} of {crop} suited locally"),
    ("whitefly infestation remedy required on {crop}", "spray imidacloprid {q} ml per pump against whitefly on {crop}"),
    ("stem borer damage management in {crop}", "release trichogramma cards {q} per acre against stem borer in {crop}"),
    ("flower drop problem solution for {crop}", "spray planofix {q} ml per pump to reduce flower drop in {crop}"),
    ("fruit rot treatment suggestion for {crop}", "spray copper oxychloride {q} gram per litre against fruit rot in {crop}"),
    ("micronutrient deficiency symptom correction in {crop}", "apply chelated micronutrient mixture {q} gram per pump on {crop}"),
    ("aphid colony spreading control on {crop}", "spray dimethoate {q} ml per pump when aphid crosses threshold on {crop}"),
    ("leaf curl virus management advice in {crop}", "remove infected plants and spray {q} ml acetamiprid per pump in {crop}"),
    ("harvesting maturity stage identification of {crop}", "harvest {crop} when moisture reaches {q} percent"),
    ("safe storage method after harvest of {crop}", "dry produce below {q} percent moisture before storing {crop}"),
]

CROP_POOL: list[str] = [
    "onion", "wheat", "garlic", "tomato", "potato", "brinjal", "paddy",
    "sugarcane", "soybean", "mustard", "chilli", "turmeric", "ginger",
    "banana", "mango", "groundnut", "maize", "bajra", "lemon",
    "pomegranate", "grapes", "okra", "cucumber", "bottle gourd",
]

_MUTATION_SUFFIXES = ("x", "xx", "xxx")


def synth_lexicon() -> CropLexicon:
    return CropLexicon(CROP_POOL)


def generate_rows(
    n: int,
    seed: int = 0,
    noise: float = 0.1,
    n_templates: int | None = None,
) -> list[tuple[str, str, str]]:
    """n (crop, query, answer) rows cycling over the templates.

    Each non-crop query token independently mutates with probability
    ``noise`` into one of three suffixed variants, so identical mutation
    patterns collide into duplicate groups while most mutated rows stay
    unique.
    """
    templates = TEMPLATES[: n_templates or len(TEMPLATES)]
    rng = np.random.default_rng([seed, 7])
    rows = []
    for i in range(n):
        q_pattern, a_pattern = templates[i % len(templates)]
        crop = CROP_POOL[int(rng.integers(len(CROP_POOL)))]
        tokens = []
        for tok in q_pattern.split():
            if tok == "{crop}":
                tokens.append(crop)
            elif float(rng.random()) < noise:
                tokens.append(tok + _MUTATION_SUFFIXES[int(rng.integers(3))])
            else:
                tokens.append(tok)
        query = " ".join(tokens)
        answer = a_pattern.format(crop=crop, q=10 + i)
        rows.append((crop, query, answer))
    return rows


def write_corpus_csv(path, rows, config: CorpusConfig | None = None) -> None:
    config = config or CorpusConfig()
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter=config.delimiter)
        writer.writerow([config.crop_column, config.query_column, config.answer_column])
        writer.writerows(rows)


def synthetic_pipeline_inputs(
    n: int,
    seed: int = 0,
    dim: int = 768,
    noise: float = 0.1,
    embed_seed: int = 0,
) -> tuple[np.ndarray, list[frozenset]]:
    """Preprocessed clustering inputs (embeddings, lexical token sets)
    for n synthetic queries, bypassing file round-trips."""
    rows = generate_rows(n, seed=seed, noise=noise)
    records = [
        CallRecord(index=i, crop=c, query=q, answer=a) for i, (c, q, a) in enumerate(rows)
    ]
    report = preprocess_corpus(records, synth_lexicon())
    embeddings = np.stack(
        [hashed_embedding(pq.text_contextual, dim, embed_seed) for pq in report.queries]
    )
    token_sets = [frozenset(pq.tokens_lexical) for pq in report.queries]
    return embeddings, token_sets
