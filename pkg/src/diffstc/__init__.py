"""Differential space-time coding: alphabets, codes, detectors and simulation tools."""

from . import (alphabets, channels, cli, cxmat, design_analysis, diff_qostbc, diff_stbc, dustm, errors,
               siso_diff, simkit, stcodes)

__version__ = "0.1.0"

__all__ = ["alphabets", "channels", "cli", "cxmat", "design_analysis", "diff_qostbc", "diff_stbc", "dustm",
           "errors", "siso_diff", "simkit", "stcodes"]
