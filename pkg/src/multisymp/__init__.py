"""Symbolic toolkit for premultisymplectic field theories on trivial bundles."""

__version__ = "0.1.0"

from .exterior import (  # noqa: E402
    BundleChart,
    DecomposableAnsatz,
    DiffForm,
    FiberedMap,
    MultiVector,
    Section,
    contract,
    exterior_derivative,
    lie_derivative,
    sn_bracket,
    wedge,
)
from .sysfile import load_system_file, parse_system  # noqa: E402
from .systems import PremultisymplecticSystem, system_from_coordinate_data, system_from_theta  # noqa: E402
from .verdict import Verdict  # noqa: E402

__all__ = [
    "__version__",
    "BundleChart",
    "DecomposableAnsatz",
    "DiffForm",
    "FiberedMap",
    "MultiVector",
    "Section",
    "contract",
    "exterior_derivative",
    "lie_derivative",
    "sn_bracket",
    "wedge",
    "load_system_file",
    "parse_system",
    "PremultisymplecticSystem",
    "system_from_coordinate_data",
    "system_from_theta",
    "Verdict",
]
