"""Normal-behaviour isolation and drift quantification for wind-turbine SCADA data."""

__version__ = "0.1.0"
