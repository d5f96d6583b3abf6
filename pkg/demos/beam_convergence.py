"""End-loaded cantilever: refinement study and direct-vs-classical cost.

Runs the three standard grids with square and circular subdomains for the
direct method, then the classical volume-integrated variant for comparison.
The direct assembly integrates polynomials only (and caches the one interior
functional matrix), so its assembly time stays far below the classical loop
over shape-function evaluations.
"""

from dmlpg import assembly as asm
from dmlpg import benchmarks as bm


def run_study(label, method, shape):
    problem = bm.BeamProblem()
    factory = bm.beam_level_factory(problem)
    eval_pts = bm.beam_eval_mesh()
    rows = bm.convergence_study(factory, method, 3, eval_pts,
                                asm.SolverConfig(shape=shape))
    print(f"\n{label}")
    print(f"{'h':>8} {'N':>6} {'r_u':>10} {'r_eps':>10} {'order_u':>8} "
          f"{'assemble':>9} {'evals':>8}")
    for r in rows:
        print(f"{r.h:8.4f} {r.n_nodes:6d} {r.r_u:10.2e} {r.r_eps:10.2e} "
              f"{r.order_u:8.2f} {r.t_assemble:8.2f}s {r.shape_evals:8d}")
    return rows


def main():
    direct_sq = run_study("direct method, square subdomains (2-point exact rules)",
                          "dmlpg1", "box")
    direct_ci = run_study("direct method, circular subdomains (10x10 rules)",
                          "dmlpg1", "ball")
    classical = run_study("classical method, square subdomains (10x10 rules)",
                          "mlpg1", "box")

    print("\nsummary at the finest grid:")
    print(f"  direct squares  r_u = {direct_sq[-1].r_u:.2e}  "
          f"assembly {direct_sq[-1].t_assemble:.2f}s")
    print(f"  direct circles  r_u = {direct_ci[-1].r_u:.2e}  "
          f"assembly {direct_ci[-1].t_assemble:.2f}s")
    print(f"  classical       r_u = {classical[-1].r_u:.2e}  "
          f"assembly {classical[-1].t_assemble:.2f}s  "
          f"({classical[-1].shape_evals} shape evaluations)")
    ratio = classical[-1].t_assemble / direct_sq[-1].t_assemble
    print(f"  assembly speedup of the direct method: {ratio:.0f}x")


if __name__ == "__main__":
    main()
