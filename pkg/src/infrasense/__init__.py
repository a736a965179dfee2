"""infrasense: smartphone inertial/GPS traces to transport-infrastructure
maintenance indicators, crowd aggregation, and SSID beacon dissemination."""

__version__ = "0.1.0"
