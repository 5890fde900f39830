"""Structured precoding for spatially correlated MIMO channels.

Statistical and perfect-CSI precoders, linear MMSE link metrics, Monte
Carlo estimators of the relative performance gaps, and the analytic bounds
on those gaps.
"""

from .bounds import BoundConditionError, BoundParams, evaluate_bound
from .channel import (
    CanonicalModel,
    ChannelRealization,
    SeparableModel,
    make_matched,
    make_mismatched,
    matching_metric_rx,
    matching_metric_tx,
    matching_sweep_family,
    sample,
)
from .link import BPSK, QPSK, Constellation, LinkMetrics, link_metrics, mutual_info, sinr
from .metrics import DeltaReport, MCEstimate, estimate_delta, gap_statistics
from .precoding import (
    Precoder,
    perfect_equalized,
    perfect_fixed,
    perfect_semiunitary,
    perfect_unconstrained,
    stat_fixed,
    stat_semiunitary,
    waterfill,
)

__version__ = "0.1.0"
