"""Coverage-guided analysis of SystemVerilog assertions against a design spec."""

__version__ = "0.1.0"
