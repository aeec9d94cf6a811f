# coding: utf-8

# # Following one particle
#
# The table is the plane with a disk of radius sigma around every integer
# point. A phase point lives on the disk of the origin cell: theta says where
# on the disk (measured clockwise from the top) and phi says how the outgoing
# velocity leans away from the normal.

# %%

import math

import numpy as np

from lorentzgas import PhasePoint, TableParams, billiard_map, reverse, to_cartesian

table = TableParams(0.1)
start = PhasePoint(0.0, 0.0)
print(to_cartesian(start, table))

# %%

# Shooting straight up from the top of the disk hits the disk above after a
# free flight of 1 - 2 sigma and bounces straight back.

step = billiard_map(start, table)
print(step.kappa, step.tau, step.next)

# %%

# A generic launch. kappa is the lattice displacement between the two disks.

p = PhasePoint(1.0, 0.4)
step = billiard_map(p, table)
print("cell jump", step.kappa, "flight time", round(step.tau, 6))

# %%

# Reflection is reversible: flip the outgoing angle and the particle retraces
# its path, landing back on the origin disk with the opposite jump.

back = billiard_map(reverse(step.next), table)
print(back.kappa, math.isclose(back.next.theta, p.theta), math.isclose(-back.next.phi, p.phi))

# %%

# Twenty bounces. Most jumps are short; now and then the particle slips into a
# corridor between rows of disks and travels far.

x = p
path = [np.zeros(2)]
for _ in range(20):
    step = billiard_map(PhasePoint(x.theta, x.phi), table)
    path.append(path[-1] + step.kappa)
    x = step.next
print(np.array(path, dtype=int))
