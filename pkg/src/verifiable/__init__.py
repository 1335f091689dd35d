"""BLE app logic extraction, pi-calculus modelling and bounded verification."""

__version__ = "0.1.0"
