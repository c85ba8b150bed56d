"""Offline/online pipeline: snapshots, artifacts, method comparison, checks.

Output directory layout::

    mesh.txt
    snapshots/solutions/   PDE solutions u(mu) (thermal block only)
    snapshots/riesz/       Riesz representers of the training functionals
    artifacts/space/       empirical test space (largest Jes)
    artifacts/ati/         ATI model (largest M)
    rules/*.txt            empirical quadrature rules
    build_log.csv, estimates.csv, compare.csv, verify.txt
"""
from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ati import AtiModel, ati_from_snapshots
from .config import ExperimentConfig
from .eim import EimModel
from .estimators import (EstimatorReport, a_priori_bound, ati_es_estimator, ati_estimator, eq_es_estimate,
                         eq_es_estimator, es_estimate, evaluate, exact_dual_norms, projection_identity_gap)
from .fem import build_hf, build_mesh, load_mesh, riesz_solve, save_mesh
from .problems import (assemble_functional_vector, make_affine_synthetic, make_fields, sample_parameters,
                       thermal_block_spec, integrand_matrix)
from .quadrature import L1, MIO, divide_and_conquer, eim_eq, load_rule, save_rule
from .storage import SnapshotStore, read_matrix_bundle, write_matrix_bundle
from .testspace import EmpiricalTestSpace, pod, f_tables

log = logging.getLogger(__name__)

CSV_COLUMNS = ["method", "M", "Jes", "delta", "Q_eq", "C_on", "E_test_inf", "E_test_mean", "runtime_s"]


class MissingArtifact(FileNotFoundError):
    pass


def fmt(v) -> str:
    if v is None or v == "":
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def rule_name(kind: str, Jes: int, delta=None, Q=None) -> str:
    if kind == "eim":
        return f"eim_J{Jes}_Q{Q}.txt"
    return f"{kind}_J{Jes}_d{delta:.6g}.txt"


class Experiment:
    """All state derived deterministically from one configuration."""

    def __init__(self, cfg: ExperimentConfig, jobs: int = 1):
        self.cfg = cfg
        self.jobs = jobs
        self.out = Path(cfg.output_dir)
        self.mesh = build_mesh(cfg.nx)
        self.hf = build_hf(self.mesh)
        self._solutions = None
        if cfg.problem.startswith("thermal-block"):
            self._solutions = SnapshotStore(self.out / "snapshots", "solutions")
            self.spec = thermal_block_spec(self.hf, cfg.problem.rsplit("-", 1)[1], store=self._solutions)
            self.affine = None
        else:
            self.affine = make_affine_synthetic(self.hf, cfg.affine_terms, seed=cfg.seed)
            self.spec = self.affine.spec()
        self.riesz_store = SnapshotStore(self.out / "snapshots", "riesz")
        self.train = sample_parameters(self.spec.box, cfg.n_train_es, cfg.train_seed)
        self.train_eq = self.train[: cfg.n_train_eq]
        self.test = sample_parameters(self.spec.box, cfg.n_test, cfg.test_seed)
        self._fields = {}

    # ---------------------------------------------------------------- helpers
    def fields(self, which: str):
        if which not in self._fields:
            params = {"train": self.train, "train_eq": self.train_eq, "test": self.test}[which]
            self._fields[which] = make_fields(self.hf, params, self.spec, self.jobs)
        return self._fields[which]

    @property
    def artifacts(self) -> Path:
        return self.out / "artifacts"

    @property
    def rules_dir(self) -> Path:
        return self.out / "rules"

    # --------------------------------------------------------------- generate
    def generate(self) -> dict:
        self.out.mkdir(parents=True, exist_ok=True)
        mesh_path = self.out / "mesh.txt"
        if mesh_path.exists():
            if load_mesh(mesh_path).digest() != self.mesh.digest():
                raise RuntimeError(f"{mesh_path} holds a different mesh; use a fresh output directory")
        else:
            save_mesh(self.mesh, mesh_path)
        missing = [mu for mu in self.train if mu not in self.riesz_store]
        if missing:
            fields = make_fields(self.hf, np.array(missing), self.spec, self.jobs)
            Ls = np.column_stack([assemble_functional_vector(self.hf, f, self.spec) for f in fields])
            xi = riesz_solve(self.hf, Ls)
            for k, mu in enumerate(missing):
                self.riesz_store.put(mu, xi[:, k])
        solves = self._solutions.writes if self._solutions is not None else 0
        return {"new_riesz": self.riesz_store.writes, "new_solves": solves, "stored": len(self.riesz_store),
                "digest": self.riesz_store.digest()}

    def riesz_snapshots(self) -> np.ndarray:
        cols = []
        for mu in self.train:
            v = self.riesz_store.get(mu)
            if v is None:
                raise MissingArtifact(f"no Riesz snapshot for a training parameter in {self.riesz_store.root}; "
                                      "run 'generate' first")
            cols.append(v)
        return np.column_stack(cols)

    # ------------------------------------------------------------------ build
    def build(self) -> list:
        xi = self.riesz_snapshots()
        entries = []
        space = self._build_space(xi, entries)
        wants = set(self.cfg.methods)
        if wants & {"ATI", "ATI+ES"}:
            self._build_ati(entries)
        self.rules_dir.mkdir(parents=True, exist_ok=True)
        ups = [f.values for f in self.fields("train_eq")]
        for J in self.cfg.jes:
            sub = space.truncate(min(J, space.J))
            for delta in self.cfg.delta:
                if "l1-EQ+ES" in wants or "MIO-EQ+ES" in wants:
                    entries += self._build_dc(sub, J, delta, L1)
                if "MIO-EQ+ES" in wants:
                    entries += self._build_dc(sub, J, delta, MIO)
            if "EIM-EQ+ES" in wants:
                S = np.column_stack([integrand_matrix(sub.tables, u) for u in ups])
                for Q in self.cfg.eim_q:
                    path = self.rules_dir / rule_name("eim", J, Q=Q)
                    if path.exists():
                        continue
                    t0 = time.perf_counter()
                    rule = eim_eq(self.hf, S, Q)
                    save_rule(rule, path)
                    entries.append(("eim", J, "", rule.Q, "", time.perf_counter() - t0))
        log_path = self.out / "build_log.csv"
        new = not log_path.exists()
        with open(log_path, "a", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if new:
                w.writerow(["artifact", "Jes_or_M", "delta", "Q_eq", "residual", "build_s"])
            for e in entries:
                w.writerow([fmt(x) if not isinstance(x, str) else x for x in e])
        return entries

    def _build_space(self, xi, entries) -> EmpiricalTestSpace:
        d = self.artifacts / "space"
        if (d / "meta.json").exists():
            return self.load_space()
        t0 = time.perf_counter()
        res = pod(xi, self.hf.gram, max(self.cfg.jes))
        space = EmpiricalTestSpace(basis=res.basis, eigenvalues=res.eigenvalues,
                                   tables=f_tables(self.hf, res.basis, self.spec.components),
                                   components=self.spec.components,
                                   provenance={"mesh": self.hf.digest, "J": res.n_modes, "problem": self.spec.name})
        write_matrix_bundle(d, {"basis": space.basis, "eigenvalues": space.eigenvalues, "tables": space.tables},
                            {"components": list(space.components), "provenance": space.provenance})
        entries.append(("space", space.J, "", "", "", time.perf_counter() - t0))
        return space

    def load_space(self) -> EmpiricalTestSpace:
        d = self.artifacts / "space"
        if not (d / "meta.json").exists():
            raise MissingArtifact(f"{d} missing; run 'build' first")
        arrays, meta = read_matrix_bundle(d)
        return EmpiricalTestSpace(basis=arrays["basis"], eigenvalues=arrays["eigenvalues"], tables=arrays["tables"],
                                  components=tuple(meta["components"]), provenance=meta["provenance"])

    def _build_ati(self, entries) -> AtiModel:
        d = self.artifacts / "ati"
        if (d / "meta.json").exists():
            return self.load_ati()
        t0 = time.perf_counter()
        S = np.stack([f.values for f in self.fields("train")], axis=2)
        model = ati_from_snapshots(self.hf, self.spec, S, max(self.cfg.m))
        arrays = {"basis": model.eim.basis, "points": model.eim.points.astype(float), "B": model.eim.B,
                  "functionals": model.functionals, "riesz": model.riesz, "A_off": model.A_off}
        write_matrix_bundle(d, arrays, {"mode": model.eim.mode})
        entries.append(("ati", model.M, "", "", "", time.perf_counter() - t0))
        return model

    def load_ati(self) -> AtiModel:
        d = self.artifacts / "ati"
        if not (d / "meta.json").exists():
            raise MissingArtifact(f"{d} missing; run 'build' first")
        a, meta = read_matrix_bundle(d)
        eim = EimModel(meta["mode"], a["basis"], a["points"].astype(np.int64), a["B"])
        eim = eim.truncate(eim.M)  # restores the pseudo-inverse in vector mode
        return AtiModel(eim=eim, functionals=a["functionals"], riesz=a["riesz"], A_off=a["A_off"])

    def _build_dc(self, space, J, delta, backend) -> list:
        kind = "l1" if backend == L1 else "mio"
        path = self.rules_dir / rule_name(kind, J, delta)
        if path.exists():
            return []
        t0 = time.perf_counter()
        res = divide_and_conquer(self.hf, space, self.spec, self.train_eq, delta, self.cfg.n_part, backend=backend,
                                 fields=self.fields("train_eq"), jobs=self.jobs,
                                 mio_time_budget=self.cfg.mio_time_budget, mio_node_limit=self.cfg.mio_node_limit)
        save_rule(res.rule, path)
        return [(kind, J, delta, res.rule.Q, res.rule.residual, time.perf_counter() - t0)]

    # --------------------------------------------------------------- compare
    def reports(self) -> list:
        """(row, EstimatorReport | None, skip reason) for every configured method/grid point."""
        cfg = self.cfg
        fields = self.fields("test")
        exact = exact_dual_norms(self.hf, self.spec, fields)
        out = []

        def run(row, make):
            try:
                est = make()
            except MissingArtifact as exc:
                log.warning("skipping %s: %s", row, exc)
                out.append((row, None, str(exc)))
                return
            t0 = time.perf_counter()
            rep = evaluate(est, self.hf, self.spec, fields=fields, exact=exact)
            rep.meta["runtime_s"] = time.perf_counter() - t0
            out.append((row, rep, ""))

        space, space_error = None, None
        try:
            space = self.load_space()
        except MissingArtifact as exc:
            space_error = exc
        ati = None
        if {"ATI", "ATI+ES"} & set(cfg.methods):
            try:
                ati = self.load_ati()
            except MissingArtifact:
                ati = None

        def need_space():
            if space is None:
                raise space_error
            return space

        def need_ati(M):
            if ati is None:
                raise MissingArtifact("ATI model missing; run 'build' first")
            if M > ati.M:
                raise MissingArtifact(f"ATI model holds {ati.M} terms, {M} requested")
            return ati.truncate(M)

        def need_rule(name):
            p = self.rules_dir / name
            if not p.exists():
                raise MissingArtifact(f"{p} missing; run 'build' first")
            return load_rule(p)

        for method in cfg.methods:
            if method == "ATI":
                for M in cfg.m:
                    run({"method": method, "M": M}, lambda M=M: ati_estimator(need_ati(M)))
            elif method == "ATI+ES":
                for J in cfg.jes:
                    for M in cfg.m:
                        run({"method": method, "M": M, "Jes": min(M, J)},
                            lambda M=M, J=J: ati_es_estimator(need_ati(M), need_space().truncate(min(J, need_space().J))))
            elif method in ("l1-EQ+ES", "MIO-EQ+ES"):
                kind = "l1" if method.startswith("l1") else "mio"
                for J in cfg.jes:
                    for delta in cfg.delta:
                        run({"method": method, "Jes": J, "delta": delta},
                            lambda J=J, d=delta, k=kind: eq_es_estimator(
                                need_space().truncate(min(J, need_space().J)), need_rule(rule_name(k, J, d)), method))
            elif method == "EIM-EQ+ES":
                for J in cfg.jes:
                    for Q in cfg.eim_q:
                        run({"method": method, "Jes": J},
                            lambda J=J, Q=Q: eq_es_estimator(need_space().truncate(min(J, need_space().J)),
                                                             need_rule(rule_name("eim", J, Q=Q)), method))
        return out

    def compare(self, reports=None) -> str:
        reports = self.reports() if reports is None else reports
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row, rep, _ in reports:
            if rep is None:
                continue
            runtime = rep.meta["runtime_s"] if self.cfg.record_runtime else ""
            w.writerow([row["method"], fmt(row.get("M")), fmt(rep.meta.get("Jes")), fmt(row.get("delta")),
                        fmt(rep.meta.get("Q_eq")), fmt(rep.C_on), fmt(rep.E_inf), fmt(rep.E_mean), fmt(runtime)])
        text = buf.getvalue()
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / "compare.csv").write_text(text)
        skipped = [f"{r}: {why}" for r, rep, why in reports if rep is None]
        (self.out / "skipped.txt").write_text("\n".join(skipped) + ("\n" if skipped else ""))
        return text

    def estimate(self, reports=None) -> str:
        reports = self.reports() if reports is None else reports
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "M", "Jes", "delta", "Q_eq", "mu_index", "exact", "estimate", "abs_error"])
        for row, rep, _ in reports:
            if rep is None:
                continue
            for k, (L, Lh, e) in enumerate(rep.records()):
                w.writerow([row["method"], fmt(row.get("M")), fmt(rep.meta.get("Jes")), fmt(row.get("delta")),
                            fmt(rep.meta.get("Q_eq")), k, fmt(L), fmt(Lh), fmt(e)])
        text = buf.getvalue()
        (self.out / "estimates.csv").write_text(text)
        return text

    # ---------------------------------------------------------------- verify
    def verify(self) -> list:
        checks = []
        space = self.load_space()
        hf, spec = self.hf, self.spec

        test_fields = self.fields("test")
        Ls = np.column_stack([assemble_functional_vector(hf, f, spec) for f in test_fields])
        for J in self.cfg.jes:
            sub = space.truncate(min(J, space.J))
            worst, below = 0.0, True
            for k in range(Ls.shape[1]):
                gap, rhs, L = projection_identity_gap(hf, sub, Ls[:, k])
                if np.isfinite(rhs):
                    worst = max(worst, abs(gap - rhs) / L)
                below &= gap >= -1e-12 * L
            checks.append(Check(f"projection identity Jes={J}", worst <= 1e-9, f"max rel gap {worst:.3e}"))
            checks.append(Check(f"L_Jes <= L Jes={J}", bool(below), ""))

        train_fields = self.fields("train_eq")
        sizes = {}
        for J in self.cfg.jes:
            sub = space.truncate(min(J, space.J))
            for delta in self.cfg.delta:
                for kind in ("l1", "mio"):
                    p = self.rules_dir / rule_name(kind, J, delta)
                    if not p.exists():
                        continue
                    rule = load_rule(p)
                    sizes[(kind, J, delta)] = rule.Q
                    res = independent_residual(hf, sub, rule, train_fields)
                    checks.append(Check(f"{kind} feasibility Jes={J} delta={delta:g}", res <= delta + 1e-9,
                                        f"residual {res:.3e}"))
                    worst = max(abs(eq_es_estimate(sub, rule, f.values) - es_estimate(sub, hf.weights, f.values))
                                for f in train_fields)
                    bound = np.sqrt(sub.J) * delta
                    checks.append(Check(f"{kind} training bound Jes={J} delta={delta:g}", worst <= bound + 1e-12,
                                        f"{worst:.3e} vs {bound:.3e}"))
                    rep = a_priori_bound(sub, rule, hf, spec, self.train_eq, self.train_eq, self.jobs)
                    checks.append(Check(f"{kind} a priori bound on training set Jes={J} delta={delta:g}",
                                        rep.all_pass, f"delta_hat {rep.delta_hat:.3e} eps_hat {rep.eps_hat:.3e}"))
                if ("l1", J, delta) in sizes and ("mio", J, delta) in sizes:
                    a, b = sizes[("mio", J, delta)], sizes[("l1", J, delta)]
                    checks.append(Check(f"MIO no larger than l1 Jes={J} delta={delta:g}", a <= b, f"{a} vs {b}"))

        if self.affine is not None and {"ATI", "ATI+ES"} & set(self.cfg.methods):
            ati = self.load_ati()
            if ati.M >= self.affine.M:
                model = ati.truncate(self.affine.M)
                rep = evaluate(ati_estimator(model), hf, spec, fields=test_fields)
                checks.append(Check("ATI exact on affine truth", rep.E_inf <= 1e-9, f"E_inf {rep.E_inf:.3e}"))
        lines = [f"{'PASS' if c.passed else 'FAIL'}  {c.name}  {c.detail}".rstrip() for c in checks]
        (self.out / "verify.txt").write_text("\n".join(lines) + "\n")
        return checks


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


def independent_residual(hf, space, rule, fields) -> float:
    """max |Q_eq - Q_hf| over the training integrands and the constant, from scratch."""
    worst = abs(float(rule.weights.sum()) - float(hf.weights.sum()))
    for f in fields:
        eta = integrand_matrix(space.tables, f.values)
        worst = max(worst, float(np.max(np.abs(rule.weights @ eta[rule.points] - hf.weights @ eta))))
    return worst


def compare_methods(cfg: ExperimentConfig, jobs: int = 1) -> list:
    """Run the full offline/online pipeline and return the comparison reports."""
    exp = Experiment(cfg, jobs)
    exp.generate()
    exp.build()
    return [(row, rep) for row, rep, _ in exp.reports() if rep is not None]


__all__ = ["Experiment", "Check", "CSV_COLUMNS", "MissingArtifact", "compare_methods", "independent_residual",
           "EstimatorReport"]
