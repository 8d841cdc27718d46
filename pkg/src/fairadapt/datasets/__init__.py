from .encoding import FeatureSpec, default_spec, fit_encode, transform
from .fetch import fetch_datasets
from .raw import DATASET_IDS, RawTable, compas_filter, load_dataset
from .splits import (
    RANDOM,
    RANDOM_SPLIT_SEED,
    SPLITS,
    DomainDataset,
    SplitDef,
    apply_split,
    make_split,
    random_split,
    split_stats,
    stats_rows,
    train_val_partition,
    valid_split_ids,
    write_stats_csv,
)

__all__ = [
    "DATASET_IDS", "RANDOM", "RANDOM_SPLIT_SEED", "SPLITS", "DomainDataset", "FeatureSpec", "RawTable",
    "SplitDef", "apply_split", "compas_filter", "default_spec", "fetch_datasets",
    "fit_encode", "load_dataset", "make_split", "random_split", "split_stats",
    "stats_rows", "train_val_partition", "transform", "valid_split_ids",
    "write_stats_csv",
]
