"""
AFRY Text to Box
Unsupervised textual grounding: link query words to image concepts and return a box
"""

__version__ = "1.0.0"
__author__ = "AFRY"
__description__ = "Find the image region a text query refers to, trained without box annotations"
