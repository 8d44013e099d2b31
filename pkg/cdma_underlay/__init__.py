"""CDMA-underlay IoT uplink link-level simulator."""

__version__ = '0.3.0'
