"""Cauchy marching from partial boundary data against a dense Dirichlet solve.

Below zero the edge transfer values grow like cosh(sqrt(-lam)), and the
march amplifies rounding accordingly on wide domains.  This is why the
energy scan starts above zero.

    python scripts/marching_conditioning.py
"""
import numpy as np

from qgraph import CouplingField, EdgeField, SymmetricPotential, build_hex_parallelogram, build_square_domain, solve_dirichlet
from qgraph.sturm import PoleProximityError
from qgraph.vertex_op import BoundaryData, MarchingError, SingularSystemError, march_partial_cauchy, neumann_derivative

LAMS = (-20.0, -5.0, -1.0, 0.5, 5.0, 30.0, 120.0)


def main():
    rng = np.random.default_rng(1)
    domains = [("square 5x4", build_square_domain(5, 4)), ("hex N=2", build_hex_parallelogram(2)),
               ("hex N=3", build_hex_parallelogram(3))]
    print(f"{'domain':12}" + "".join(f"{lam:>10g}" for lam in LAMS))
    for name, dom in domains:
        edges = EdgeField(SymmetricPotential((0.0, 0.4, -0.3)))
        couplings = CouplingField(0.3)
        f = rng.normal(size=len(dom.boundary))
        row = []
        for lam in LAMS:
            try:
                u = solve_dirichlet(dom, edges, couplings, lam, f).values
            except (PoleProximityError, SingularSystemError):
                row.append("singular")
                continue
            data = BoundaryData.partial(dom, f, neumann_derivative(dom, edges, u, lam))
            try:
                marched = march_partial_cauchy(dom, edges, couplings, lam, data)
            except MarchingError:
                row.append("failed")
                continue
            err = float(np.max(np.abs(marched.values - u)) / max(1.0, np.max(np.abs(u))))
            row.append(f"{err:.1e}")
        print(f"{name:12}" + "".join(f"{x:>10}" for x in row))


if __name__ == "__main__":
    main()
