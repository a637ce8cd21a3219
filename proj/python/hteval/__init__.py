"""Discrimination and calibration metrics for individualized treatment
effect models: matched and model-based c-for-benefit statistics,
offset-logistic calibration, bootstrap internal validation and a
simulation harness."""

try:
    from ._hteval import *  # noqa: F401,F403
    from ._hteval import __version__  # noqa: F401
except ImportError:  # extension on sys.path rather than inside the package
    from _hteval import *  # noqa: F401,F403
    from _hteval import __version__  # noqa: F401
