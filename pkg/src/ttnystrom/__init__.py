"""Randomized compression and rounding in the tree tensor network format."""

from .analysis import (
    BoundReport,
    PreconditionError,
    deterministic_audit,
    expected_audit,
    lemma_projection_check,
    matrix_bounds,
)
from .baselines import ttn_hmt, ttn_svd
from .kernels import SingularCoreError, gn, hmt
from .sketch import DrmSpec, SketchState, sketch_dense, sketch_ttn
from .sttnn import ReusePlan, compress_dense_sequential, reuse_plan, sequential_sketch
from .tensor import hilbert_tensor, matricize
from .tree import IndexTree, Node, balanced_binary_tree, named_tree, toy_tree, tt_tree, tucker_tree
from .ttn import TtnTensor, random_ttn, rel_error, to_dense
from .ttnn import StreamCompressor, TtnnConfig, compress_dense, compress_ttn, recover

__version__ = "0.1.0"
