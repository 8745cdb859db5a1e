"""fewgest: few-shot hand-gesture customization for wrist IMU streams."""

__version__ = "0.1.0"
