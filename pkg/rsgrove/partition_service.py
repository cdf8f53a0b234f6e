"""
Partitioner dispatch: turn a sample into a PartitionScheme with whichever
partitioner the settings name.
"""

from typing import Optional, Tuple
import logging

from rsgrove.baselines import kdtree_partition, str_partition
from rsgrove.config import Settings
from rsgrove.curves import curve_partition
from rsgrove.grove_service import CapacityConfig, compute_capacity, grove_partition
from rsgrove.ingest_service import GridHistogram, WeightedSample, assign_weights
from rsgrove.scheme import PartitionScheme

logger = logging.getLogger(__name__)


def build_scheme(
    sample: WeightedSample,
    settings: Settings,
    histogram: Optional[GridHistogram] = None,
) -> Tuple[PartitionScheme, CapacityConfig]:
    """
    Partition a sample.

    Args:
        sample: Unweighted (or already weighted) sample
        settings: Partitioner, strategy, mode, block size, alpha and rho
        histogram: Storage-size histogram; weights the sample for the
            full rsgrove strategy and is ignored otherwise

    Returns:
        (scheme, capacity the scheme was built for)
    """
    name = settings.partitioner
    if name == "rsgrove":
        if settings.strategy == "grove" and histogram is not None and not sample.weighted:
            sample = assign_weights(sample, histogram)
        weighted = sample.weighted and settings.strategy == "grove"
        cfg = compute_capacity(
            sample,
            settings.block_size,
            settings.alpha,
            settings.rho,
            weighted=weighted,
            check=settings.strategy != "blackbox",
        )
        return grove_partition(sample, cfg, settings.strategy, settings.disjoint), cfg

    # baselines partition point counts
    cfg = compute_capacity(sample, settings.block_size, settings.alpha, settings.rho, weighted=False, check=False)
    M = cfg.max_capacity
    if name == "str":
        scheme = str_partition(sample, M, settings.disjoint, block_size=settings.block_size)
    elif name == "kdtree":
        scheme = kdtree_partition(sample, M, settings.disjoint, block_size=settings.block_size)
    elif name in ("zcurve", "hcurve"):
        curve = "z" if name == "zcurve" else "hilbert"
        scheme = curve_partition(sample, M, curve, settings.disjoint, block_size=settings.block_size)
    else:
        raise ValueError(f"unknown partitioner {name!r}")
    return scheme, cfg
