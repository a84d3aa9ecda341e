"""Dipole emission in planar stacks, mirror-spacer design and photophysics fits.

Modules
-------
materials     tabulated optical constants
stratified    layer stacks and generalised Fresnel amplitudes
emission      dipole power, far field and collection efficiency
design        thickness / wavelength sweeps, peaks, enhancement
photophysics  saturation, Lorentzian and g2 fits; HBT Monte Carlo
cli           ``ndphotonics`` command line
"""
__version__ = "0.1.0"

from . import design, emission, materials, photophysics, stratified  # noqa: E402

__all__ = ["__version__", "design", "emission", "materials", "photophysics", "stratified"]
