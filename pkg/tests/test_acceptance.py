"""End-to-end acceptance criteria.

Every test carries a ``criterion`` marker; the conftest prints one
PASS/FAIL line per criterion at the end of the session. Run this file
alone with ``pytest tests/test_acceptance.py -v`` or as a script.
"""
import json
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from oracles import mincut_min
from tvrelax import synthetic as sy
from tvrelax.apps import chan_vese, denoise, multilabel
from tvrelax.energy import SolverParams, primal_energy, smoothed_dual_energy
from tvrelax.grid import div, grad, laplacian_dirichlet
from tvrelax.io import write_grid_csv, write_pgm
from tvrelax.oracle import brute_force_min, brute_force_volume
from tvrelax.recovery import binary_fraction, recover_u, threshold
from tvrelax.ssn import residual, solve
from tvrelax.volume import solve_with_volume, volume_curve


def report(number, msg):
    print(f"[criterion {number}] {msg}")


@pytest.fixture(scope="module")
def standard_solve():
    clean, noisy = sy.standard_denoise_instance(64, 0.3, 0)
    t0 = time.perf_counter()
    res = denoise(noisy, SolverParams(beta=1e-3))
    return clean, noisy, res, time.perf_counter() - t0


@pytest.mark.criterion(1, "operator calculus")
def test_c01_operator_calculus():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst_adj = worst_sym = 0.0
    for k in range(200):
        dims = (int(rng.integers(2, 33)),) if k % 4 == 0 else tuple(rng.integers(2, 33, size=2))
        h = float(rng.choice([1.0, 0.5, 1 / 32]))
        u = rng.standard_normal(dims)
        v = rng.standard_normal(dims)
        p = rng.standard_normal((len(dims),) + dims)
        adj = abs(np.sum(grad(u, h) * p) + np.sum(u * div(p, h)))
        scale = np.linalg.norm(grad(u, h)) * np.linalg.norm(p) + np.linalg.norm(u) * np.linalg.norm(div(p, h))
        worst_adj = max(worst_adj, adj / scale)
        lu, lv = laplacian_dirichlet(u, h), laplacian_dirichlet(v, h)
        sym = abs(np.sum(lu * v) - np.sum(u * lv)) / (np.linalg.norm(lu) * np.linalg.norm(v))
        worst_sym = max(worst_sym, sym)
        assert np.sum(lu * u) < 0
    elapsed = time.perf_counter() - t0
    report(1, f"adjointness {worst_adj:.2e}, symmetry {worst_sym:.2e}, {elapsed:.2f}s")
    assert worst_adj <= 1e-12
    assert worst_sym <= 1e-12
    assert elapsed < 5


def _smooth_point(rng, dims, p, h):
    """Random (q, g) with every clamp argument and box argument off its kinks."""
    g = rng.uniform(-1, 1, dims)
    for _ in range(100):
        q = rng.uniform(-2 * p.beta, 2 * p.beta, (len(dims),) + dims)
        w = div(q, h) - g
        knots = np.array([-p.eps - 2 * p.c, -p.eps, p.eps, p.eps + 2 * p.c])
        far_w = np.min(np.abs(w[..., None] - knots)) > 1e-3
        far_q = np.min(np.abs(np.abs(q) - p.beta)) > 1e-3 * p.beta
        if far_w and far_q:
            return q, g
    raise RuntimeError("no smooth point found")


@pytest.mark.criterion(2, "residual consistency")
def test_c02_residual_consistency():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = 0.0
    for k in range(100):
        dims = (int(rng.integers(4, 12)),) if k % 3 == 0 else tuple(rng.integers(3, 9, size=2))
        h = float(rng.choice([1.0, 0.25]))
        p = SolverParams(
            beta=float(rng.uniform(0.05, 0.5)),
            gamma=float(rng.uniform(0.0, 1.0)),
            alpha=float(rng.choice([10.0, 1e3])),
            div_weight=float(rng.choice([0.0, 0.3])),
        )
        q, g = _smooth_point(rng, dims, p, h)
        dq = rng.standard_normal(q.shape)
        dq /= np.linalg.norm(dq)
        s = 1e-6 * p.beta
        fd = (smoothed_dual_energy(q + s * dq, g, p, h) - smoothed_dual_energy(q - s * dq, g, p, h)) / (2 * s)
        cell = h ** len(dims)
        an = cell * np.sum(residual(q, g, p, h) * dq)
        rel = abs(fd - an) / max(abs(an), 1e-300)
        worst = max(worst, rel)
    elapsed = time.perf_counter() - t0
    report(2, f"worst relative mismatch {worst:.2e} over 100 points, {elapsed:.2f}s")
    assert worst <= 1e-6
    assert elapsed < 30


@pytest.mark.criterion(3, "exactness on 4x4 instances at default parameters")
def test_c03_exactness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    t_rng = np.random.default_rng(1)
    betas = (0.01, 0.1, 0.5)
    misses, weakest = [], 100
    for k in range(50):
        g = rng.uniform(-1, 1, (4, 4))
        beta = betas[k % 3]
        p = SolverParams(beta=beta)
        q, rep = solve(g, p)
        u = recover_u(q, g, p)
        _, e_min = brute_force_min(g, beta)
        e_half = primal_energy(threshold(u, 0.5), g, beta)
        if abs(e_half - e_min) > 1e-6:
            misses.append((k, beta, e_half - e_min))
        ts = t_rng.uniform(0, 1, 100)
        hits = sum(abs(primal_energy(threshold(u, t), g, beta) - e_min) <= 1e-6 for t in ts if t > 0)
        weakest = min(weakest, hits)
    elapsed = time.perf_counter() - t0
    report(3, f"t=0.5 misses {len(misses)}/50 {misses}, fewest threshold hits {weakest}/100, {elapsed:.1f}s")
    assert not misses
    assert weakest >= 95
    assert elapsed < 120


@pytest.mark.criterion(4, "step example")
def test_c04_step_example():
    t0 = time.perf_counter()
    x, f, h = sy.step_example(256)
    res = denoise(f, SolverParams(beta=0.1), h=h)
    elapsed = time.perf_counter() - t0
    wrong = int(np.sum(res.u != (x <= 0)))
    report(4, f"cells off {wrong}, energy {res.energy:.6f} (target -0.4, tol {2 * h}), {elapsed:.2f}s")
    assert wrong <= 1
    assert abs(res.energy - (0.1 - 0.5)) <= 2 * h
    assert elapsed < 5


@pytest.mark.criterion(5, "plateau example")
def test_c05_plateau_example():
    t0 = time.perf_counter()
    width, beta = 0.25, 0.1
    x, f, h = sy.plateau_example(256, width)
    res = denoise(f, SolverParams(beta=beta), h=h)
    elapsed = time.perf_counter() - t0
    jumps = np.flatnonzero(np.diff(res.u))
    # single downward jump between cells j and j+1, located at the shared face
    location = x[jumps[0]] + h / 2 if len(jumps) == 1 else np.nan
    target = beta - (1 - width) / 2
    report(5, f"energy {res.energy:.6f} (target {target}), jump at {location:.4f}, {elapsed:.2f}s")
    assert len(jumps) == 1 and res.u[0] == 1 and res.u[-1] == 0
    assert abs(res.energy - target) <= 2 * h
    assert -width <= location <= width
    assert elapsed < 5


@pytest.mark.criterion(6, "binary solution before thresholding")
def test_c06_binary_directness(standard_solve):
    _, _, res, _ = standard_solve
    frac = binary_fraction(res.relaxed, 1e-6)
    report(6, f"binary fraction {frac:.4f}")
    assert frac >= 0.99


@pytest.mark.criterion(7, "Newton behaviour on 64x64")
def test_c07_solver_behaviour(standard_solve):
    _, _, res, elapsed = standard_solve
    rep = res.report
    hist = np.array(rep.residual_history)
    ratios = hist[1:] / hist[:-1]
    tail = ratios[-3:]
    report(7, f"{rep.newton_iters} Newton steps, reason {rep.reason}, "
              f"final rel. residual {hist[-1] / hist[0]:.2e}, tail ratios {tail}, {elapsed:.1f}s")
    assert rep.newton_iters <= 40
    assert rep.converged
    assert hist[-1] <= 1e-8 * hist[0] or rep.reason == "stall"
    assert np.all(np.diff(tail) < 0)
    assert elapsed < 30


@pytest.mark.criterion(8, "gamma consistency")
def test_c08_gamma_consistency():
    # integer data so that the min-cut oracle is exact; with h = 1/16 the
    # energy equals h^2 (sum g u + (beta/h) * jumps)
    rng = np.random.default_rng(0)
    n, scale, beta_int = 16, 1000, 100
    g_int = rng.integers(-scale, scale + 1, (n, n))
    h = 1.0 / n
    g, beta = g_int / scale, beta_int / scale * h
    e_min = mincut_min(g_int, beta_int) / scale * h * h
    energies = []
    for gamma in (0.5, 0.1, 0.02):
        p = SolverParams(beta=beta, gamma=gamma, alpha_max=1e6, newton_max_iters=400)
        q, rep = solve(g, p, h=h)
        assert rep.converged
        energies.append(primal_energy(threshold(recover_u(q, g, p, h)), g, beta, h))
    report(8, f"energies {energies}, oracle {e_min}")
    assert all(e >= e_min - 1e-6 for e in energies)
    assert all(b <= a + 1e-6 for a, b in zip(energies, energies[1:]))
    assert abs(energies[-1] - e_min) <= 1e-6


@pytest.mark.criterion(9, "epsilon sweep")
def test_c09_eps_sweep():
    _, noisy = sy.standard_denoise_instance(64, 0.3, 0)
    fracs = [denoise(noisy, SolverParams(beta=1e-3, eps=eps)).report.binary_fraction
             for eps in (1e-3, 1e-5, 1e-7)]
    report(9, f"binary fractions {fracs}")
    assert all(b >= a for a, b in zip(fracs, fracs[1:]))


@pytest.mark.criterion(10, "volume constraint")
def test_c10_volume():
    g = sy.ramp(16)
    beta, target = 0.01, 8.0
    p = SolverParams(beta=beta)
    res = solve_with_volume(g, p, target, 0.5)
    _, e_ref = brute_force_volume(g, beta, target, 0.5)
    e = primal_energy(res.u, g, beta)
    lams = np.linspace(-1, 1, 11)
    w = volume_curve(g, p, lams)
    report(10, f"energy {e} vs oracle {e_ref}, multiplier {res.multiplier}, W = {w.tolist()}")
    assert abs(e - e_ref) <= 1e-6
    assert np.all(np.diff(w) <= 0)


@pytest.mark.criterion(11, "two-phase segmentation of a noisy disk")
def test_c11_chan_vese():
    clean = sy.disk(64)
    noisy, _ = sy.add_noise(clean, 0.3, 11)
    st = chan_vese(noisy, SolverParams(beta=8e-3))
    agree = float(np.mean(st.u == clean))
    obj = np.array(st.objective_history)
    report(11, f"agreement {agree:.4f}, outer {st.outer_iters}, objective {obj.tolist()}")
    assert agree >= 0.99
    assert np.all(np.diff(obj) <= 1e-12 * np.abs(obj[:-1]))
    assert st.converged and st.outer_iters <= 50


@pytest.mark.criterion(12, "multi-phase labeling")
def test_c12_multilabel():
    levels = (0.0, 1 / 3, 2 / 3, 1.0)
    f = sy.quadrants(64, levels)
    st = multilabel(f, SolverParams(beta=1e-3), 2)
    exact = bool(np.array_equal(st.piecewise_image, f))
    # each quadrant value must appear among the constants
    const_err = max(np.min(np.abs(st.constants - v)) for v in levels)
    two = sy.two_level(32)
    cv = chan_vese(two, SolverParams(beta=1e-3))
    ml = multilabel(two, SolverParams(beta=1e-3), 1)
    same = (np.array_equal(cv.u, ml.indicators[0]) and cv.c1 == ml.constants[1]
            and cv.c2 == ml.constants[0])
    report(12, f"f^pc exact {exact}, constant error {const_err:.1e}, M=1 equals two-phase {same}")
    assert exact
    assert const_err <= 1e-6
    assert same


def _strip_timing(obj):
    if isinstance(obj, dict):
        return {k: _strip_timing(v) for k, v in obj.items() if k != "wall_time"}
    if isinstance(obj, list):
        return [_strip_timing(v) for v in obj]
    return obj


def _run_cli(args, cwd):
    env = dict(os.environ, TVRELAX_THREADS="1")
    proc = subprocess.run([sys.executable, "-m", "tvrelax", *args], cwd=cwd, env=env,
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc


@pytest.mark.criterion(13, "CLI determinism")
def test_c13_cli_determinism(tmp_path):
    write_pgm(tmp_path / "shapes.pgm", sy.shapes(48))
    write_pgm(tmp_path / "disk.pgm", sy.disk(48))
    write_pgm(tmp_path / "quad.pgm", sy.quadrants(32))
    x, f, h = sy.step_example(128)
    write_grid_csv(tmp_path / "g.csv", 0.5 - f)
    write_grid_csv(tmp_path / "ramp.csv", sy.ramp(16))
    commands = {
        "add-noise": ["add-noise", "--input", "shapes.pgm", "--level", "0.3", "--seed", "5",
                      "--out", "{d}/noisy.pgm", "--report", "{d}/noise.json"],
        "denoise": ["denoise", "--input", "shapes.pgm", "--beta", "1e-3", "--out", "{d}/u.pgm",
                    "--report", "{d}/r.json", "--residuals", "{d}/r.csv"],
        "segment": ["segment", "--input", "disk.pgm", "--beta", "8e-3", "--out", "{d}/s.pgm",
                    "--truth", "disk.pgm", "--report", "{d}/s.json", "--residuals", "{d}/s.csv"],
        "label": ["label", "--input", "quad.pgm", "--m", "2", "--out", "{d}/pc.pgm",
                  "--indicators", "{d}/ind", "--report", "{d}/l.json"],
        "solve": ["solve", "--g", "g.csv", "--spacing", str(h), "--beta", "0.1",
                  "--out", "{d}/u.csv", "--report", "{d}/g.json", "--residuals", "{d}/g_res.csv"],
        "solve-volume": ["solve", "--g", "ramp.csv", "--beta", "0.01", "--volume", "6",
                         "--out", "{d}/v.csv", "--report", "{d}/v.json"],
    }
    mismatched = []
    for name, template in commands.items():
        outputs = []
        for run in ("a", "b"):
            d = tmp_path / f"{name}_{run}"
            d.mkdir()
            _run_cli([arg.format(d=d) for arg in template], tmp_path)
            files = {}
            for path in sorted(d.iterdir()):
                data = path.read_bytes()
                if path.suffix == ".json":
                    data = json.dumps(_strip_timing(json.loads(data)), sort_keys=True).encode()
                files[path.name] = data
            outputs.append(files)
        if outputs[0] != outputs[1] or not outputs[0]:
            mismatched.append(name)
    report(13, f"{len(commands)} commands run twice, mismatches: {mismatched or 'none'}")
    assert not mismatched


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
