"""molt: descriptor-based and equivariant-network regression of molecular properties,
with pre-training on cheap labels and fine-tuning on accurate ones."""
from .chemdata import LabeledDataset, Molecule, SplitSpec, load_dataset, parse_xyz, split_dataset
from .descriptors import (
    PCACompressor,
    SimpleDescriptorFeaturizer,
    SoapFeaturizer,
    SoapParams,
    soap_molecular,
)
from .gboost import TreeBoostRegressor
from .krr import CosineKernelRidge
from .regressors import PaiNNRegressor, SoapMLPRegressor
from .transfer import LabelStandardizer, finetune, pretrain

__version__ = "0.1.0"

__all__ = [
    "CosineKernelRidge",
    "LabelStandardizer",
    "LabeledDataset",
    "Molecule",
    "PCACompressor",
    "PaiNNRegressor",
    "SimpleDescriptorFeaturizer",
    "SoapFeaturizer",
    "SoapMLPRegressor",
    "SoapParams",
    "SplitSpec",
    "TreeBoostRegressor",
    "finetune",
    "load_dataset",
    "parse_xyz",
    "pretrain",
    "soap_molecular",
    "split_dataset",
]
