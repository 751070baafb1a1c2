# %% [markdown]
# # Octocopter with a rigid load: the equations of motion
#
# The vehicle and its cubic load are one rigid body described by six
# generalized coordinates q = (x, y, z, phi, theta, psi).  Attaching 100 kg
# half a metre below the frame couples translation and rotation through the
# mass matrix.

# %%
import numpy as np

from octolift.multibody import (LoadParams, VehicleParams, coriolis_matrix, gravity_vector,
                                input_matrix, mass_matrix, generalized_acceleration)

np.set_printoptions(precision=3, suppress=True, linewidth=110)
veh = VehicleParams()
load = LoadParams(m_L=100.0, r_L=0.5)
q = np.array([0.0, 0.0, 5.0, 0.1, -0.05, 0.3])

M = mass_matrix(q, veh, load)
print("mass matrix at a tilted attitude:\n", M)
print("smallest eigenvalue:", np.linalg.eigvalsh(M).min())

# %% [markdown]
# The off-diagonal block is the load's first moment.  Without the load it
# vanishes and the inertia block collapses to the frame's own inertia.

# %%
print(mass_matrix(np.zeros(6), veh, LoadParams(0.0, 0.0)))

# %% [markdown]
# Coriolis terms come from Christoffel symbols of the closed-form mass
# matrix derivative, so M_dot - 2C is skew-symmetric to rounding.

# %%
qdot = np.array([1.0, 0.0, 0.2, 0.3, -0.1, 0.5])
h = 1e-6
Mdot = (mass_matrix(q + h * qdot, veh, load) - mass_matrix(q - h * qdot, veh, load)) / (2 * h)
N = Mdot - 2 * coriolis_matrix(q, qdot, veh, load)
print("max |N + N'| =", np.abs(N + N.T).max())

# %% [markdown]
# Eight propellers map into the six generalized forces.  At level attitude the
# equal split of the total weight is an exact equilibrium.

# %%
B = input_matrix(np.zeros(6), veh)
print("input matrix at level attitude:\n", B)
tau = np.full(8, (veh.m_O + 100.0) * 9.81 / 8)
print("hover acceleration:", generalized_acceleration(np.zeros(6), np.zeros(6), B @ tau, veh, load))
print("gravity vector:", gravity_vector(q, veh, load))
