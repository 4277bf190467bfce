"""Double-IRS aided link: channel synthesis, joint passive beamforming, power scaling."""

__version__ = "0.1.0"
