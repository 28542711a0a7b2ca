"""Fixed physical constants.

All Hamiltonian entries in this package are frequencies (energy divided by
the Planck constant) in MHz; magnetic fields are in mT. The two conversion
constants below are pinned so every module shares bit-identical values.
"""

# Bohr magneton / Planck constant. GHz/T is numerically equal to MHz/mT.
MU_B_OVER_H_MHZ_PER_MT = 13.9962449

# Boltzmann constant / Planck constant.
K_B_OVER_H_GHZ_PER_K = 20.836619
