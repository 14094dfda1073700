"""Figure rendering for covertower experiment CSV outputs."""

__version__ = "0.1.0"

from .figures import (
    PlotSpec,
    SchemaError,
    plot_asconv,
    plot_decay,
    plot_variance,
    plot_zeros,
    read_csv,
    save_figure,
)
