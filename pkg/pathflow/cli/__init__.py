"""
Command-line surface
"""

from pathflow.cli.main import PathflowCLI, build_parser, main
from pathflow.cli.output_formatter import Colors, OutputFormatter

__all__ = ['PathflowCLI', 'build_parser', 'main', 'Colors', 'OutputFormatter']
