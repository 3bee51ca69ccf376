"""Scoring and filtering of noisy dialogue utterance pairs.

Pairs are scored for connectivity (key phrase pairs learned from word
alignments, weighted by nPMI) and content relatedness (cosine of SIF
sentence vectors); the calibrated sum ranks pairs for filtering.
"""

from .aligner import AlignmentMatrix, AlignmentModel, align_corpus, symmetrize, train_alignment, viterbi_align
from .corpus import Corpus, Utterance, UtterancePair, apply_rule_filters, pair_consecutive_lines, tokenize
from .evalkit import diversity_stats, histogram, spearman
from .filtering import FilterSpec, entropy_scores, rank_and_select, write_filtered
from .phrase_table import PhraseTable, build_table, extract_modified, extract_reference, npmi
from .scorer import Calibration, ScoreRecord, calibrate, enumerate_phi, s_content, s_frame, s_ours, score_corpus
from .sentvec import (SentenceEmbedder, content_cosine, fit_common_component, load_frequencies,
                      load_word_vectors, sif_embed)

__version__ = "0.1.0"
