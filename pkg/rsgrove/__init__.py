# rsgrove - validity-constrained spatial partitioning for large datasets

__version__ = "0.1.0"

FORMAT_VERSION = __version__
