"""Shared fixtures: a five-row call-centre corpus and a small crop lexicon."""

import csv

import pytest

from agriqrs import CropLexicon

# Real call-centre rows: five crops, five topics, punctuation-bearing answers.
SAMPLE_ROWS = [
    (
        "Garlic",
        "How to control fungal attack in garlic",
        "Spray to mencozeb carbendazim 35-40 grampump",
    ),
    (
        "Onion",
        "Want to know how to increase size and production in onion crop",
        "To increase size and production in onion crop n : p : k 0:52:34 1 kg at per acer",
    ),
    (
        "Wheat",
        "Fungal attack in  wheat  crop",
        "Dear farmer spray of hexaconazole 5 ec 250-400 mlacre or 20mlpump and "
        "streptocyclin 2 gram at 15 liter of water in wheat crop",
    ),
    (
        "Cotton Kapas",
        "Control of pink bollworm of cotton",
        "To control the pink bollworm of cotton use pheromon and light",
    ),
    (
        "Chillies",
        "Varieties of chilli",
        "Varieties of chilli -agni -jwala sankeshwari-32 tejswini sitara phule "
        "jyoti pant c agnirekha",
    ),
]

SAMPLE_CROPS = ["garlic", "onion", "wheat", "cotton", "cotton kapas", "chilli", "chillies"]


def write_corpus(path, rows, header=("crop", "query", "answer")):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


@pytest.fixture
def sample_corpus(tmp_path):
    return write_corpus(tmp_path / "sample.csv", SAMPLE_ROWS)


@pytest.fixture
def sample_lexicon():
    return CropLexicon(SAMPLE_CROPS)
