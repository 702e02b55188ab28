"""Acceptance gate: one test per criterion, each at its stated tolerance.

Every test records a one-line PASS/FAIL verdict (shown in the terminal summary) before asserting.
"""

import json
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
import scipy.linalg as la

from lrom import cli, config
from lrom.clustering import elbow_scan, kmeans
from lrom.fom import (Elasticity, FeSpace, FomRunner, MaterialParams, Poisson, assemble_raw, build_mesh,
                      function_l2_error, solve_fom)
from lrom.geometry import GeometrySpec, ParameterDomain, ResolvedHoles
from lrom.pod import pod, principal_angles, projection_residual_energy
from lrom.rbf import rbf_eval, rbf_fit, saddle_matrix
from lrom.rom import evaluate, fom_operator_snapshots, offline_deim, offline_rb, train, train_with_global
from lrom.sampling import generate, uniform_random
from lrom.store import manifest_digest
from oracles import reassignment_optimal, record

pytestmark = pytest.mark.slow


def _p1d():
    return config.to_rom_config(config.builtin("poisson_1d"))


def _test_set(cfg, n=100):
    return uniform_random(n, cfg.geometry.domain, 3)


@pytest.fixture(scope="module")
def deim_study():
    """1D benchmark at 32x32, N_s^d = 500, DEIM trained at N_c^d in {1, 4, 8, 16} on shared snapshots."""
    cfg = _p1d()
    runner = cfg.runner()
    t0 = time.perf_counter()
    train_d = generate(cfg.sampling_deim, cfg.n_train_deim, cfg.geometry.domain, cfg.seed_deim)
    snaps = fom_operator_snapshots(runner, train_d.points)
    deims = {k: offline_deim(replace(cfg, n_clusters_deim=k), runner, snaps) for k in (1, 4, 8, 16)}
    seconds = time.perf_counter() - t0
    return cfg, runner, snaps, deims, seconds


@pytest.fixture(scope="module")
def end_to_end():
    """Full local 1D model (N_c = N_c^d = 16) trained from scratch and evaluated on 100 test points."""
    cfg = _p1d()
    runner = cfg.runner()
    t0 = time.perf_counter()
    model = train(cfg, runner)
    report = evaluate(model, _test_set(cfg), runner)
    return model, report, time.perf_counter() - t0


# 1 ---------------------------------------------------------------------------------------------


def test_criterion_01_manufactured_convergence():
    t0 = time.perf_counter()
    spec = GeometrySpec((0.0, 0.0, 2.0, 2.0), ParameterDomain((0.0,), (1.0,)))
    src = "pi*pi/2*sin(pi*x/2)*sin(pi*y/2)"
    exact = lambda x, y: np.sin(np.pi * x / 2) * np.sin(np.pi * y / 2)
    errs = []
    for n in (8, 16, 32):
        runner = FomRunner(Poisson(src, ("left", "right", "bottom", "top")), spec, build_mesh(spec.box, n, n))
        _, u, _ = runner.solve([0.5])
        errs.append(function_l2_error(runner.space, u, exact))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    secs = time.perf_counter() - t0
    ok = record(1, bool(np.all(rates >= 1.9) and secs < 30.0),
                f"L2 rates {np.round(rates, 3).tolist()} (>= 1.9), {secs:.1f} s (< 30 s)")
    assert ok


# 2 ---------------------------------------------------------------------------------------------


def test_criterion_02_extension_oracle():
    cfg = _p1d()
    runner = cfg.runner()
    worst = 0.0
    for mu in uniform_random(20, cfg.geometry.domain, 21).points:
        s = runner.assemble(mu)
        free = s.active_map.free_indices
        # oracle route: dense Cholesky of the active-restricted block, then zero extension
        A_ff = s.matrix[free][:, free].toarray()
        u_ref = np.zeros(s.matrix.shape[0])
        u_ref[free] = la.cho_solve(la.cho_factor(A_ff), s.rhs[free])
        worst = max(worst, float(np.max(np.abs(solve_fom(s) - u_ref))))
    ok = record(2, worst <= 1e-10, f"max |restricted+extended - extended solve| = {worst:.2e} (<= 1e-10)")
    assert ok


# 3 ---------------------------------------------------------------------------------------------


def test_criterion_03_pod_identities():
    rng = np.random.default_rng(303)
    orth = energy = angle = 0.0
    for m, n, rate in [(200, 40, 0.6), (150, 60, 0.7), (400, 30, 0.5), (80, 80, 0.8), (300, 120, 0.75)]:
        U, _ = la.qr(rng.standard_normal((m, n)), mode="economic")
        W, _ = la.qr(rng.standard_normal((n, n)))
        S = U @ np.diag(rate ** np.arange(n)) @ W.T
        g, s = pod(S, 1e-8, route="gram"), pod(S, 1e-8, route="svd")
        for b in (g, s):
            V = b.modes
            orth = max(orth, float(np.max(np.abs(V.T @ V - np.eye(V.shape[1])))))
            tail = float(np.sum(b.singular_values[b.retained_count:] ** 2))
            energy = max(energy, abs(projection_residual_energy(S, b) - tail) / tail)
        assert g.retained_count == s.retained_count
        angle = max(angle, float(np.max(principal_angles(g.modes, s.modes))))
    ok = record(3, orth <= 1e-10 and energy <= 1e-8 and angle <= 1e-8,
                f"orthonormality {orth:.1e} (<= 1e-10), energy identity {energy:.1e} (<= 1e-8), "
                f"Gram vs SVD angle {angle:.1e} (<= 1e-8)")
    assert ok


# 4 ---------------------------------------------------------------------------------------------


def test_criterion_04_deim_exactness(deim_study):
    _, _, (A_all, F_all), deims, _ = deim_study
    rng = np.random.default_rng(404)
    constraint = span = 0.0
    for c in deims[16].clusters:
        for model, S in ((c.A, A_all[c.members][:, c.A.pattern_positions]), (c.f, F_all[c.members])):
            for s in S:
                r = model.reconstruct_values(model.theta_from_snapshot(s))
                constraint = max(constraint, float(np.max(np.abs(r[model.magic] - s[model.magic]))
                                                   / np.max(np.abs(s))))
            for _ in range(50):
                v = model.basis @ rng.standard_normal(model.Q)
                r = model.reconstruct_values(model.theta_from_snapshot(v))
                span = max(span, float(np.linalg.norm(r - v) / np.linalg.norm(v)))
    ok = record(4, constraint <= 1e-10 and span <= 1e-9,
                f"magic-index constraint {constraint:.1e} (<= 1e-10), span reproduction {span:.1e} "
                f"(<= 1e-9) over 16 clusters x (matrix, vector)")
    assert ok


# 5 ---------------------------------------------------------------------------------------------


def test_criterion_05_deim_localization(deim_study):
    _, _, _, deims, seconds = deim_study
    q = {k: max(qa for qa, _ in d.q_sizes()) for k, d in deims.items()}
    ratio = q[1] / q[16]
    decreasing = q[4] > q[8] > q[16]
    ok = record(5, ratio >= 3 and decreasing and seconds < 600,
                f"global Q_a {q[1]} / max local Q_a {q[16]} = {ratio:.1f} (>= 3); max local Q_a at "
                f"N_c^d = 4/8/16: {q[4]}/{q[8]}/{q[16]} (strictly decreasing); {seconds:.0f} s (< 600 s)")
    assert ok


# 6 ---------------------------------------------------------------------------------------------


def test_criterion_06_rb_localization(deim_study):
    cfg, runner, _, deims, _ = deim_study
    n_global = max(offline_rb(replace(cfg, n_clusters=1), deims[16], runner).n_sizes())
    n_local = max(offline_rb(replace(cfg, n_clusters=16), deims[16], runner).n_sizes())
    ratio = n_global / n_local
    ok = record(6, ratio >= 3, f"global N {n_global} / max local N {n_local} = {ratio:.1f} (>= 3)")
    assert ok


# 7 ---------------------------------------------------------------------------------------------


def test_criterion_07_end_to_end_accuracy(end_to_end):
    _, report, seconds = end_to_end
    mean = float(report.column("rel_l2").mean())
    ok = record(7, mean <= 1e-3 and seconds < 1200,
                f"mean rel_l2 {mean:.3e} (<= 1e-3) over 100 points; {seconds:.0f} s (< 1200 s)")
    assert ok


# 8 ---------------------------------------------------------------------------------------------


def test_criterion_08_speedup():
    cfg = replace(_p1d(), nx=64, ny=64)
    runner = cfg.runner()
    local, glob = train_with_global(cfg, runner)
    test = _test_set(cfg)
    rl, rg = evaluate(local, test, runner), evaluate(glob, test, runner)
    t_loc, t_glob = np.median(rl.column("rom_time")), np.median(rg.column("rom_time"))
    speedup = np.median(rl.column("fom_time")) / t_loc
    ok = record(8, t_loc < t_glob and speedup >= 5,
                f"64x64 median online local {1e3 * t_loc:.3f} ms < global {1e3 * t_glob:.3f} ms; "
                f"local speedup {speedup:.1f}x (>= 5x) over 100 queries")
    assert ok


# 9 ---------------------------------------------------------------------------------------------


def _saddle_residual(r, targets):
    # recomputed independently in the frame the fit used
    A = saddle_matrix((r.centers - r.shift) / r.scale)
    x = np.concatenate([r.weights, r.poly_coeffs])
    b = np.concatenate([targets, np.zeros((A.shape[0] - len(targets), targets.shape[1]))])
    return float(np.linalg.norm(A @ x - b) / np.linalg.norm(b))


def test_criterion_09_rbf_contract(deim_study):
    _, _, (A_all, F_all), deims, _ = deim_study
    rng = np.random.default_rng(909)
    center = affine = residual = 0.0
    for c in deims[16].clusters:
        mus = deims[16].training.points[c.members]
        for model, r, S in ((c.A, c.rbf_a, A_all[c.members][:, c.A.pattern_positions]),
                            (c.f, c.rbf_f, F_all[c.members])):
            theta = np.stack([model.theta_from_snapshot(s) for s in S])  # exact training targets
            center = max(center, float(np.max(np.abs(rbf_eval(r, mus) - theta)) / np.max(np.abs(theta))))
            residual = max(residual, _saddle_residual(r, theta))
        # targets affine in mu on the same cluster centers, checked at 50 off-center points
        coef = rng.standard_normal((1 + mus.shape[1], 3))
        lin = lambda m: coef[0] + m @ coef[1:]
        fit = rbf_fit(mus, lin(mus))
        x = rng.uniform(mus.min(axis=0), mus.max(axis=0), (50, mus.shape[1]))
        affine = max(affine, float(np.max(np.abs(rbf_eval(fit, x) - lin(x))) / np.max(np.abs(lin(x)))))
        residual = max(residual, _saddle_residual(fit, lin(mus)))
    ok = record(9, center <= 1e-9 and affine <= 1e-9 and residual <= 1e-10,
                f"center exactness {center:.1e} (<= 1e-9), affine reproduction {affine:.1e} (<= 1e-9), "
                f"saddle residual {residual:.1e} (<= 1e-10) over 16 cluster fits")
    assert ok


# 10 --------------------------------------------------------------------------------------------


def test_criterion_10_kmeans_contract(deim_study):
    cfg, _, _, deims, _ = deim_study
    rng = np.random.default_rng(1010)
    monotone = optimal = True
    cases = 0
    for n in (5, 12, 30, 60, 120, 200):
        for k in (1, 2, 3, 5, 8):
            for dim in (1, 2):
                if k > n:
                    continue
                m = kmeans(rng.uniform(size=(n, dim)), k, seed=int(rng.integers(1 << 16)))
                h = np.array(m.history)
                monotone &= bool(np.all(np.diff(h) <= 1e-12 * h[:-1]))
                optimal &= reassignment_optimal(m)
                cases += 1
    real = kmeans(deims[16].training.points, 16, seed=cfg.seed_cluster)
    h = np.array(real.history)
    monotone &= bool(np.all(np.diff(h) <= 1e-12 * h[:-1]))
    P = rng.standard_normal((80, 2))
    k1 = float(np.max(np.abs(kmeans(P, 1).centroids[0] - P.mean(axis=0))))
    table = elbow_scan(deims[16].training.points, [1, 2, 4, 8, 12, 16, 20, 24], seed=cfg.seed_cluster)
    v = [t[1] for t in table]
    elbow = all(b <= a for a, b in zip(v, v[1:]))
    ok = record(10, monotone and optimal and k1 <= 1e-14 and elbow,
                f"Lloyd monotone {monotone}, assignment optimal on {cases} cases (n <= 200) {optimal}, "
                f"k=1 centroid error {k1:.1e} (<= 1e-14), elbow nonincreasing {elbow}")
    assert ok


# 11 --------------------------------------------------------------------------------------------


def test_criterion_11_elasticity():
    mat = MaterialParams(1.0, 0.3)
    # E/(2(1+nu)) = 1/2.6 = 5/13 and E nu/((1+nu)(1-2nu)) = 0.3/0.52 = 15/26
    lame = max(abs(mat.lame_mu - 5 / 13), abs(mat.lame_lambda - 15 / 26))
    space = FeSpace(build_mesh((0.0, 0.0, 2.0, 2.0), 8, 8), "vector2")
    K = space.csr(assemble_raw(Elasticity(material=mat), ResolvedHoles(np.zeros((0, 2)), np.zeros(0)),
                               space).stiffness)
    xy = space.mesh.node_coords
    modes = [np.tile([1.0, 0.0], len(xy)), np.tile([0.0, 1.0], len(xy)),
             np.column_stack([-xy[:, 1], xy[:, 0]]).ravel()]
    rigid = max(float(np.max(np.abs(K @ r))) for r in modes) / abs(K).max()

    cfg = config.to_rom_config(config.builtin("plate"))
    runner = cfg.runner()
    model = train(cfg, runner)
    mean = float(evaluate(model, _test_set(cfg), runner).column("rel_l2").mean())
    ok = record(11, lame <= 1e-12 and rigid <= 1e-10 and mean <= 1e-2,
                f"Lame error {lame:.1e} (<= 1e-12), rigid-body residual {rigid:.1e} (<= 1e-10), "
                f"plate N_c = N_c^d = 10 mean rel_l2 {mean:.3e} (<= 1e-2)")
    assert ok


# 12 --------------------------------------------------------------------------------------------


def test_criterion_12_determinism(tmp_path):
    doc = config.builtin("poisson_1d")
    doc.pop("output")
    cfg = tmp_path / "poisson_1d.json"
    cfg.write_text(json.dumps(doc))
    dirs = []
    for tag in ("a", "b"):
        code = cli.main(["offline", "--config", str(cfg), "--model", str(tmp_path / tag),
                         "--out", str(tmp_path / f"report_{tag}")])
        assert code == 0
        dirs.append(tmp_path / tag)
    da, db = (manifest_digest(d) for d in dirs)
    files = lambda d: {p.relative_to(d): p.read_bytes() for p in sorted(Path(d).rglob("*")) if p.is_file()}
    identical = files(dirs[0]) == files(dirs[1])
    ok = record(12, da == db and identical,
                f"manifest digests {da[:12]} / {db[:12]} equal {da == db}, all files byte-identical {identical}")
    assert ok
