"""liftc: lift loop kernels in a small imperative language onto tensor operators."""

__version__ = "0.1.0"
