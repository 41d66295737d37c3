"""Contact-process laboratory.

Tools for sampling vertex-weighted random graphs, certifying that they
contain dense collections of stars, and measuring extinction times of the
contact process running on them.
"""

__version__ = "0.1.0"
