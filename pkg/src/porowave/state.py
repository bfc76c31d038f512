"""State vector layout shared by every module.

The 13-component state is ordered stress-first:

    Q = (tau_11, tau_22, tau_33, tau_23, tau_13, tau_12, p,
         v_1, v_2, v_3, q_1, q_2, q_3)

where tau is the total stress of the aggregate in Voigt order, p the pore
(or fluid) pressure, v the solid matrix velocity, and q the Darcy flux
(porosity times fluid velocity relative to the matrix).  Fluid cells carry
the same layout with tau and v identically zero.
"""

NSTATE = 13

# Stress block (7 components), then velocity block (6 components).
TAU11, TAU22, TAU33, TAU23, TAU13, TAU12, P = range(7)
V1, V2, V3 = 7, 8, 9
Q1, Q2, Q3 = 10, 11, 12

STRESS = slice(0, 6)
STRESS_P = slice(0, 7)
VEL = slice(7, 13)

COMPONENT_NAMES = (
    "tau_xx", "tau_yy", "tau_zz", "tau_yz", "tau_xz", "tau_xy", "p",
    "v_x", "v_y", "v_z", "q_x", "q_y", "q_z",
)

# Voigt pair (i, j) for each of the six stress slots.
VOIGT_PAIRS = ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1))
