"""Harmonized ICU cohort extraction and prediction benchmark (python surface)."""

try:
    from ._icubench import *  # noqa: F401,F403  (installed wheel layout)
    from ._icubench import __version__, metrics, labelers, tuner  # noqa: F401
except ImportError:  # in-tree build: the module sits on PYTHONPATH directly
    from _icubench import *  # noqa: F401,F403
    from _icubench import __version__, metrics, labelers, tuner  # noqa: F401
