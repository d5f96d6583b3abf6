"""Direct derivative recovery from scattered data.

The classical route differentiates the moving-least-squares shape functions;
the direct route applies the derivative to the polynomial basis instead, so
no weight-function derivatives ever appear.  Both recover the gradient of a
smooth field; this script compares their errors over a refinement ladder.
"""

import numpy as np

from dmlpg import geometry as geo
from dmlpg import mlpg
from dmlpg import mls


def field(points):
    return np.sin(2.0 * points[:, 0]) * np.cos(points[:, 1])


def field_dx(x):
    return 2.0 * np.cos(2.0 * x[0]) * np.cos(x[1])


def main():
    x = np.array([0.515, 0.515])
    print("recovering d/dx of sin(2x)cos(y) at", x)
    print(f"{'h':>10} {'direct (GMLS)':>16} {'standard (MLS)':>16}")
    exact = field_dx(x)
    for n in (11, 21, 41, 81):
        nodes = geo.generate_grid_nodes((n, n), (1.0, 1.0), m=2)
        u = field(nodes.points)

        direct = mls.gmls_derivative_row(x, [1, 0], nodes, 2)
        err_direct = abs(direct.apply(u)[0] - exact)

        ev = mlpg.mls_shape_with_derivatives(x, nodes, 2)
        err_standard = abs(ev.gradients[:, 0] @ u[ev.active] - exact)

        print(f"{nodes.mesh_size:10.4f} {err_direct:16.3e} {err_standard:16.3e}")

    print("\nboth converge at the same rate; the direct row never touches")
    print("derivatives of the weight function.")


if __name__ == "__main__":
    main()
