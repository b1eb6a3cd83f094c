"""Tolerances shared across modules.

Acceptance tests import these directly, so changing a value here changes
what the test suite enforces.
"""

#: Half-width of the box used to cache vertex loops of unbounded cells.
R_BOX = 64.0

#: |normal| must be within this of 1.
UNIT_TOL = 1e-12

#: Feasibility tolerance for half-plane constraints and parallel tests.
FEAS_TOL = 1e-12

#: Segments shorter than this do not count as cell edges.
EDGE_TOL = 1e-12

#: Tie tolerance for argmax over contact scores.
TIE_TOL = 1e-12

#: Minimum shared boundary length for two cells to count as neighbors.
NEIGHBOR_TOL = 1e-9

#: Supporting condition slack: nu_i . (x_j - x_i) <= SUPPORT_TOL.
SUPPORT_TOL = 1e-9

#: Ray property slack on unit constraint normals.
RAY_TOL = 1e-9

#: Points must lie this close to the section boundary.
ON_BOUNDARY_TOL = 1e-9

#: boundary_normal accepts points this far from the boundary.
NEAR_BOUNDARY_TOL = 1e-6

#: Inequality checks (ABP margin, phi margin, capillary margin).
INEQ_TOL = 1e-9

#: Grid levels closer than this to an arc-endpoint level are nudged.
BREAKPOINT_TOL = 1e-9
BREAKPOINT_NUDGE = 1e-8

#: Derivative identity is only checked this far from breakpoints.
DERIVATIVE_GAP = 1e-3
DERIVATIVE_TOL = 1e-4

#: Default snap distance for classifying droplet edges as wetted.
SNAP_TOL = 1e-7

#: Maximum overlap area between droplet and obstacle.
OVERLAP_TOL = 1e-9

#: Droplets with smaller area are degenerate.
DEGENERATE_AREA = 1e-12

#: Meshes with a smaller minimum angle (degrees) are rejected.
MIN_MESH_ANGLE = 15.0

#: Relative residual targets for the Neumann solve.
SOLVER_RTOL = 1e-12
GALERKIN_RTOL = 1e-10
