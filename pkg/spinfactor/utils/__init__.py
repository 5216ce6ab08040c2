"""
Utility functions and data processing tools.

Contains helpers for random test functions and instances, report export,
schemas, logging and the ordered worker pool. Submodules are imported
directly (``spinfactor.utils.data_processor``) since the model layer
depends on the logging helpers here.
"""
