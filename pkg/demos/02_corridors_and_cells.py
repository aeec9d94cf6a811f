# coding: utf-8

# # Corridors and long flights
#
# A corridor is an open strip in a rational direction xi that touches no
# disk. Its width is 1/|xi| - 2 sigma, so small disks open many corridors.

# %%

from lorentzgas import CellId, StreamFactory, enumerate_corridors
from lorentzgas.cells import cell_measure_leading, cell_measure_mc, singularity_angles, tail_sweep

for sigma in (0.4, 0.2, 0.1):
    cs = enumerate_corridors(sigma)
    print(sigma, len(cs.directions), "directions", cs.directions[:8])

# %%

# Long jumps along a corridor land in cells kappa = xi' + N xi, where xi' is
# the lattice point on the far wall. The measure of such a cell has a closed
# leading term; compare it with a Monte Carlo estimate that only samples
# directions able to reach the target disk.

stream = StreamFactory(1, "demo-cells")
for N in (5, 20, 80):
    cell = CellId.along((1, 0), N, 0.1)
    lead = cell_measure_leading(cell, 0.1)
    mc = cell_measure_mc(cell, 0.1, 2_000_000, stream, stratified=True)
    print(N, cell.kappa, f"{lead.value:.3e}", f"{mc.estimate:.3e} +- {mc.se:.1e}",
          f"ratio {mc.estimate / lead.value:.3f}")

# %%

# The ratio approaches 1 as N grows; the correction is of order 1/N.
#
# The edges of a cell are set by rays tangent to two disks. Their angular
# gaps shrink like 1/M and 1/sqrt(M) along the corridor.

for M in (10, 100, 1000):
    a = singularity_angles((1, 0), M, 0.1)
    print(M, f"{a.theta_gap:.3e} vs {a.predicted_theta_gap:.3e}",
          f"{a.phi_gap:.4f} vs {a.predicted_phi_gap:.4f}")

# %%

# Summing cells gives a tail that decays like H^-2, the borderline case that
# makes the second moment of the jump diverge logarithmically.

rep = tail_sweep([8, 16, 32, 64, 128], 0.1, 4_000_000, StreamFactory(2, "demo-tail"))
for h, p, lead in zip(rep.H, rep.estimate, rep.leading):
    print(h, f"{p:.3e}", f"{lead:.3e}", f"ratio {p / lead:.2f}")
print("log-log slope", round(rep.slope, 3))

# %%

# At small H the estimate sits above the sum of leading cell terms, because
# cells near a corridor mouth are larger than their leading term. The excess
# fades as H grows, so a fit over a short window comes out steeper than -2.
