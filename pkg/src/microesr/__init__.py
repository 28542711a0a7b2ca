"""Crystal-field ESR simulation and micro-resonator absorption fitting.

Subpackages and modules:

* ``spincore``  -- Stevens operators, spin Hamiltonian, diagonalization
* ``geometry``  -- field/microwave orientation chains for the device regions
* ``resonance`` -- resonance-field search and transition intensities
* ``spectra``   -- angular maps, edge filter, CSV/SVG export
* ``lossfit``   -- S21 notch fits, loss budgets, multi-peak absorption fits
* ``configio``  -- YAML run configuration
* ``kernels``   -- compiled eigenvalue-sweep core with numpy fallback
* ``cli``       -- the ``microesr`` command-line interface
"""

__version__ = "0.1.0"
