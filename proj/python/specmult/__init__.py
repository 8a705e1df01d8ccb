"""Multiplicity experiments on random block perturbations."""

try:
    from ._specmult import *  # noqa: F401,F403
    from ._specmult import __doc__ as _core_doc  # noqa: F401
except ImportError:
    # Source-tree layout: the extension sits next to the package on sys.path.
    from _specmult import *  # noqa: F401,F403
