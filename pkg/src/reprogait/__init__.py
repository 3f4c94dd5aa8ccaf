"""Joint-motion prediction for amputee gait by input-level reprogramming
of a frozen multi-task time-series model."""

__version__ = "0.1.0"
