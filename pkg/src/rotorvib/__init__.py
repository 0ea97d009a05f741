"""Rotor vibration simulation and diagnostics.

Modules
-------
signal_core  channel records, CSV I/O, calibration, spectra, filtering
rotor        system matrices, Jeffcott rotor, modal extraction, Newmark integration
frf          receptance synthesis (real and complex modes), direct inversion, H1
orbit        key-phasor detection, revolution slicing, averaged and order orbits
shock        shock capture, pulse parameters, limit overlays, decay windows
diagnosis    order spectra, overall levels, fault rules, trend store
corpus       seeded synthetic fault corpus
cli          ``rotorvib`` command line
"""

from .errors import ComputationError, InputError, RotorVibError

__version__ = "0.1.0"

__all__ = ["ComputationError", "InputError", "RotorVibError", "__version__"]
