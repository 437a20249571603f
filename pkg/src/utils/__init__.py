"""
Utility modules for the application
"""

from . import config, files, summary

__all__ = ['config', 'files', 'summary']
