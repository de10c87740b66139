"""domelab: snowflake curves, level sets and double-dome surfaces with their geometric gauges."""

__version__ = "0.1.0"
