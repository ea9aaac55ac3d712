"""Ultrasound tomography of penetrable cylinders from monochromatic ring data.

Modules, bottom up: ``specfun`` (Bessel and Hankel functions), ``scene``
(geometry and truth fields), ``forward`` (exact partial-wave solution),
``acquisition`` (transducer-ring data and noise), ``nearfar`` (ring data to
far-field amplitude), ``recon`` (Born and beyond-Born engines, filtering,
calibration), ``metrics`` and ``cli``.
"""

__version__ = "0.1.0"
