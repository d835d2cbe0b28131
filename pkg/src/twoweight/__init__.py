"""Two-weight testing laboratory for well-localized operators on dyadic grids."""

__version__ = "0.1.0"

from .grid import (
    DyadicCube,
    Grid,
    GridSpec,
    HaarRectangle,
    ancestor_rectangle,
    build_grid,
    split_rectangles,
)
from .haar import (
    HaarCoefficients,
    haar0,
    haar_avg,
    martingale_decompose,
    weighted_haar,
)
from .measures import (
    LeafFunction,
    LeafMeasure,
    from_pointwise_weights,
    indicator,
    inner,
    lebesgue,
)

__all__ = [
    "DyadicCube",
    "Grid",
    "GridSpec",
    "HaarRectangle",
    "HaarCoefficients",
    "LeafFunction",
    "LeafMeasure",
    "ancestor_rectangle",
    "build_grid",
    "from_pointwise_weights",
    "haar0",
    "haar_avg",
    "indicator",
    "inner",
    "lebesgue",
    "martingale_decompose",
    "split_rectangles",
    "weighted_haar",
]
