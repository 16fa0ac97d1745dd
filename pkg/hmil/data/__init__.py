from .io import (
    decode_bag,
    encode_bag,
    load_dataset,
    load_manifest_taxonomy,
    read_bag_csv,
    read_bag_file,
    write_bag_file,
    write_dataset,
)
from .models import Dataset, FeatureBag, Split, SyntheticConfig, labels_of
from .splits import KFoldSplit, RatioSplit, SplitScheme, make_splits
from .synthetic import generate_synthetic

__all__ = [
    "Dataset",
    "FeatureBag",
    "KFoldSplit",
    "RatioSplit",
    "Split",
    "SplitScheme",
    "SyntheticConfig",
    "decode_bag",
    "encode_bag",
    "generate_synthetic",
    "labels_of",
    "load_dataset",
    "load_manifest_taxonomy",
    "make_splits",
    "read_bag_csv",
    "read_bag_file",
    "write_bag_file",
    "write_dataset",
]
