"""relchain: modelling word-pair relations as relation embedding chains.

The package answers multiple-choice word analogy questions by routing
between a direct relation-embedding comparison and chain-based methods,
according to a learned informativeness score.
"""
from .concepts import normalize
from .condenser import (Chain, CondenserModel, TrainConfig, TrainResult,
                        chains_for_pair, compose, condense, init_model,
                        load_condenser, train_condenser, write_condenser)
from .config import Config, load_config
from .datasets import AnalogyQuestion, Dataset, load_dataset
from .errors import (DimensionMismatchError, FormatError, MissingPairError,
                     NoRepresentationError, NotFoundError, ParseError, RelchainError)
from .evaluate import (DEFAULT_BUCKETS, EvalReport, EvalResult, QuestionRecord,
                       evaluate, macro_rows, micro_report, read_records,
                       render_csv, render_text, report_from_records, write_records)
from .graph import (ConceptGraph, GraphEdge, IntermediateSet, augment_graph,
                    ingest_kg, intermediates, load_graph, predict_missing_links,
                    write_graph)
from .informativeness import (ClassifierConfig, InformativenessClassifier,
                              LabeledPair, corrupt_negatives, inf, load_classifier,
                              load_labeled_pairs, train_classifier, write_classifier)
from .relations import RelationStore, get_relation, load_relation_store, write_relation_store
from .solver import (ChainContext, SolverVerdict, comp, confidence, explain,
                     sim1, sim2, sim3, solve_cn_types, solve_condensed,
                     solve_direct, solve_hybrid, solve_relbert)
from .vectors import (WordVectorTable, cosine, load_word_vectors, merged_neighbors,
                      top_k_neighbors, write_word_vectors)

__version__ = "0.1.0"
