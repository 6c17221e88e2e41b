"""Make src/ importable when the package is not installed."""

import sys
from pathlib import Path

_src = Path(__file__).parent / "src"
if _src.is_dir() and str(_src) not in sys.path:
    try:
        import hetgain  # noqa: F401
    except ImportError:
        sys.path.insert(0, str(_src))
