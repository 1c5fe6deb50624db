"""Streaming and batch EM estimators for latent-variable models.

The compiled extension carries all functionality; this package just locates
it. When built as an installed wheel the extension sits inside the package;
in a build tree it sits on PYTHONPATH next to the sources.
"""

try:
    from ._streamem import *  # noqa: F401,F403
    from ._streamem import __version__  # noqa: F401
except ImportError:
    from _streamem import *  # noqa: F401,F403
    from _streamem import __version__  # noqa: F401
