"""Max-over-test error L - L_Jes against Jes for both thermal-block losses.

Writes one CSV row per (loss, Jes) with the observed error and the value
predicted from the projection error, ||Pi_perp xi||^2 / (L + L_Jes).
"""
import argparse
import csv

import numpy as np

from dualnorm.estimators import projection_identity_gap
from dualnorm.fem import build_hf, build_mesh
from dualnorm.problems import assemble_functional_vector, make_fields, sample_parameters, thermal_block_spec
from dualnorm.testspace import build_test_space


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nx", type=int, default=12)
    ap.add_argument("--jmax", type=int, default=15)
    ap.add_argument("--n-train", type=int, default=60)
    ap.add_argument("--n-test", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="convergence.csv")
    args = ap.parse_args()

    hf = build_hf(build_mesh(args.nx))
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["loss", "Jes", "max_gap", "max_gap_rel", "predicted"])
        for loss in ("phi1", "phi2"):
            spec = thermal_block_spec(hf, loss)
            space = build_test_space(hf, spec, sample_parameters(spec.box, args.n_train, 2 * args.seed), args.jmax)
            test = sample_parameters(spec.box, args.n_test, 2 * args.seed + 1)
            Ls = [assemble_functional_vector(hf, f, spec) for f in make_fields(hf, test, spec)]
            for J in range(1, space.J + 1):
                rows = [projection_identity_gap(hf, space.truncate(J), L) for L in Ls]
                gaps = np.array([g for g, _, _ in rows])
                L = np.array([v for _, _, v in rows])
                k = int(np.argmax(gaps))
                perp2 = np.array([r for _, r, _ in rows]) * (2 * L - gaps)
                w.writerow([loss, J, f"{gaps[k]:.6e}", f"{gaps[k] / L[k]:.6e}",
                            f"{perp2.max() / (2 * L[k] - gaps[k]):.6e}"])
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
