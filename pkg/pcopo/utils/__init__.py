"""
Utility modules for the PCOPO workbench
"""

from .file_manager import FileManager
from .config import ConfigManager, config_load, serialize_config

__all__ = ['FileManager', 'ConfigManager', 'config_load', 'serialize_config']
