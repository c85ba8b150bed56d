"""Number of l1-EQ quadrature points against the test-space size at fixed delta."""
import argparse
import csv

import numpy as np

from dualnorm.fem import build_hf, build_mesh
from dualnorm.problems import make_fields, sample_parameters, thermal_block_spec
from dualnorm.quadrature import assemble_problem, l1_eq
from dualnorm.testspace import build_test_space


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nx", type=int, default=12)
    ap.add_argument("--loss", default="phi1", choices=("phi1", "phi2"))
    ap.add_argument("--jmin", type=int, default=2)
    ap.add_argument("--jmax", type=int, default=10)
    ap.add_argument("--delta", type=float, default=1e-3)
    ap.add_argument("--n-train-es", type=int, default=60)
    ap.add_argument("--n-train-eq", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="qeq_trend.csv")
    args = ap.parse_args()

    hf = build_hf(build_mesh(args.nx))
    spec = thermal_block_spec(hf, args.loss)
    train = sample_parameters(spec.box, args.n_train_es, 2 * args.seed)
    space = build_test_space(hf, spec, train, args.jmax)
    tr = train[: args.n_train_eq]
    fields = make_fields(hf, tr, spec)
    J = np.arange(args.jmin, space.J + 1)
    Q = np.array([l1_eq(assemble_problem(hf, space.truncate(j), spec, tr, args.delta, fields=fields)).Q for j in J])
    slope, icpt = np.polyfit(J, Q, 1)
    r2 = 1 - np.sum((Q - (slope * J + icpt)) ** 2) / np.sum((Q - Q.mean()) ** 2)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["Jes", "Q_eq"])
        w.writerows(zip(J.tolist(), Q.tolist()))
    print(f"wrote {args.out}; fit Q_eq = {slope:.2f} Jes + {icpt:.2f}, R^2 = {r2:.3f}")


if __name__ == "__main__":
    main()
