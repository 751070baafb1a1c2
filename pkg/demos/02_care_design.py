# %% [markdown]
# # Designing the two W-infinity loops
#
# Each loop tracks an error stack chi = (integral, error, rate) and the
# optimal feedback follows from one 9x9 algebraic Riccati equation.

# %%
import numpy as np
import scipy.linalg

from octolift.winf_control import (ATTITUDE_WEIGHTS, TRANSLATION_WEIGHTS, LoopDesign,
                                   build_care_matrices)

np.set_printoptions(precision=3, suppress=True, linewidth=110)

for name, w in (("position", TRANSLATION_WEIGHTS), ("attitude", ATTITUDE_WEIGHTS)):
    d = LoopDesign.from_weights(w)
    eig = d.solution.closed_loop_eigs
    print(f"{name}: residual {d.solution.residual_norm:.1e}, "
          f"slowest pole {eig.real.max():.3f}, fastest {eig.real.min():.3f}")

# %% [markdown]
# The solver uses the ordered Schur form of the Hamiltonian followed by two
# Newton-Kleinman sweeps.  scipy's general solver agrees to rounding.

# %%
A, B, Psi = build_care_matrices(TRANSLATION_WEIGHTS)
Q = LoopDesign.from_weights(TRANSLATION_WEIGHTS).solution.Q
G = np.vstack([np.zeros((6, 3)), np.eye(3)])
ref = scipy.linalg.solve_continuous_are(A, G, Psi, np.diag([6.0, 6.0, 1.0]))
print("max |Q - Q_scipy| =", np.abs(Q - ref).max())

# %% [markdown]
# The gain is the last block row of Q scaled by Y3^-1.  Per axis it is a PID
# with the integral, proportional and derivative gains below.

# %%
K = LoopDesign.from_weights(TRANSLATION_WEIGHTS).gain
print("x-axis gains (I, P, D):", K[0, [0, 3, 6]])
print("z-axis gains (I, P, D):", K[2, [2, 5, 8]])

# %% [markdown]
# The published attitude poles (about -0.3) are only a few times faster than
# the position poles (about -0.45).  The cascade therefore lags: see
# 04_scenario.py for what that does to the position storage function.
