"""hypwave: hyperboloidal vector-field laboratory for 2+1D semilinear waves."""

__version__ = "0.1.0"
