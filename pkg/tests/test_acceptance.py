"""The ten acceptance criteria, each at its stated tolerance.

Every test records a one-line verdict (printed in the terminal summary) and
then asserts it. Expensive offline runs are shared through module fixtures.
"""
import time
import warnings

import numpy as np
import pytest

from conftest import ACCEPTANCE
from hyprom import ReducedBasis, TimeSchedule, apply_operator, build_uniform_grid, evolve, make_model
from hyprom.eim import EimSpace, complete_space, eim_greedy
from hyprom.greedy import (OfflineProblem, OfflineSettings, TrainingSet, estimate_lipschitz, run_offline,
                           second_level_spaces, true_errors)
from hyprom.grid import dependency_count
from hyprom.hdm import LocalOperator
from hyprom.indicator import validate_bound
from hyprom.models import ParameterDomain
from hyprom.online import OnlineOperator, system_norm
from hyprom.pod import pod
from hyprom.uq import DistributionSpec, McStatistics, mc_mean, mc_variance, run_uq_campaign

BURGERS_DOMAIN = ParameterDomain.from_intervals([(0.4, 0.5), (1.0, 1.0), (1.0, 1.0)])


def verdict(n, ok, detail):
    ACCEPTANCE[n] = (bool(ok), detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, detail


def burgers_problem(n_cells, n_train=100):
    grid = build_uniform_grid(0.0, np.pi, n_cells)
    training = TrainingSet.uniform_grid(BURGERS_DOMAIN, (n_train, 1, 1))
    return OfflineProblem(make_model("burgers1d"), grid, TimeSchedule(1e-3, 159), training)


@pytest.fixture(scope="module")
def case1():
    """Burgers case 1 at full resolution: sequential offline, true-error greedy."""
    problem = burgers_problem(1000)
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        state = run_offline(problem, OfflineSettings(greedy_tol=1e-4, eim_tol=1e-6), BURGERS_DOMAIN)
    return problem, state, time.perf_counter() - t0


@pytest.fixture(scope="module")
def case1_uq(case1):
    problem, state, _ = case1
    op = problem.online_operator(state.bases, state.spaces)
    spec = DistributionSpec.uniform(BURGERS_DOMAIN, 12345, 100)
    truth = run_uq_campaign("truth", problem.model, problem.grid, problem.schedule, spec)
    reduced = run_uq_campaign("reduced", problem.model, problem.grid, problem.schedule, spec,
                              online=op, bases=state.bases)
    return truth, reduced, op


# 1 -----------------------------------------------------------------------

def full_space_error(kind, n, lo, hi, mu, muscl):
    m = make_model(kind)
    g = build_uniform_grid(lo, hi, n, m.boundary)
    sched = TimeSchedule(1e-3, 50)
    truth = evolve(m, g, sched, mu, muscl=muscl)
    bases = [ReducedBasis.canonical(n, g.dx) for _ in range(m.n_components)]
    spaces = [complete_space(EimSpace.empty(n, g.dx)) for _ in range(m.n_components)]
    U = OnlineOperator(m, g, bases, spaces, sched.dt, muscl=muscl).solve(mu, 50).reconstruct_all(bases)
    return max(system_norm(truth.states[k] - U[k], g.dx) for k in range(51))


def test_criterion_01_full_space_equivalence():
    eb = full_space_error("burgers1d", 100, 0.0, np.pi, [0.45, 1.0, 1.0], False)
    es = full_space_error("euler1d_sod", 120, -1.0, 1.0, [0.01, 1.45], True)
    verdict(1, eb <= 1e-12 and es <= 1e-12, f"max step error Burgers {eb:.2e}, Sod {es:.2e} (tol 1e-12)")


# 2 -----------------------------------------------------------------------

def test_criterion_02_burgers_case1_offline(case1):
    problem, state, seconds = case1
    err = float(true_errors(problem, state.bases, state.spaces).max())
    N, M = state.n_rb[0], state.n_eim[0]
    ok = err <= 1e-4 and 6 <= N <= 24 and 40 <= M <= 90
    verdict(2, ok, f"max training error {err:.2e} (<=1e-4), N={N} in [6,24], N_EIM={M} in [40,90], "
                   f"offline {seconds:.0f}s")


# 3 -----------------------------------------------------------------------

def test_criterion_03_indicator_bound():
    problem = burgers_problem(200)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        state = run_offline(problem, OfflineSettings(greedy_tol=1e-4, eim_tol=1e-6), BURGERS_DOMAIN)
    C = estimate_lipschitz(problem.model, problem.grid, BURGERS_DOMAIN, problem.schedule.dt)
    mus = TrainingSet.monte_carlo(BURGERS_DOMAIN, 10, 2024).parameters
    full = validate_bound(problem.model, problem.grid, problem.schedule, state.bases, state.spaces, mus,
                          mode="full_second_level", C=C)
    training = [problem.eim_training(0)]
    fixed = validate_bound(problem.model, problem.grid, problem.schedule, state.bases, state.spaces, mus,
                           mode="fixed", n_extra=5, training=training, C=C)
    eff = fixed.effectivity
    share = float(np.mean((eff >= 1.0) & (eff <= 1e3)))
    slack = float(full.slack.min())
    ok = slack >= -1e-12 and share >= 0.9
    verdict(3, ok, f"full mode min slack {slack:.2e} (>= -1e-12), N_EIM'=5 effectivity in [1,1e3] for "
                   f"{share:.0%} (range {eff.min():.2f}..{eff.max():.2f})")


# 4 -----------------------------------------------------------------------

def eim_suite(model, grid, schedule, mus, muscl, tol):
    failures = []
    for c in range(model.n_components):
        T = np.concatenate([evolve(model, grid, schedule, mu, muscl=muscl, record_operator=True).operators[:, c]
                            for mu in mus])
        res = eim_greedy(T, tol, grid.n_cells, grid.dx)
        sp = res.space
        scale = max(1.0, np.abs(T).max())
        if sp.relaxed_kronecker_error() > 1e-12:
            failures.append(f"c{c} Kronecker")
        if not np.allclose(np.abs(sp.functions).max(axis=0), 1.0, rtol=0, atol=1e-14):
            failures.append(f"c{c} sup-norm")
        half = eim_greedy(T, tol, max(1, sp.size // 2), grid.dx).space
        if not (np.array_equal(half.magic, sp.magic[:half.size])
                and np.allclose(half.functions, sp.functions[:, :half.size], atol=1e-12 * scale)):
            failures.append(f"c{c} hierarchy")
        for f in T[:: max(1, len(T) // 20)]:
            interp = sp.interpolate(f[sp.magic])
            if np.abs(interp[sp.magic] - f[sp.magic]).max() > 1e-10 * scale:
                failures.append(f"c{c} magic exactness")
                break
        h = np.array(res.history)
        ups = np.flatnonzero(np.diff(h) > 1e-12 * h[0])
        if ups.size:
            worst = float(np.max(h[ups + 1] / h[ups]))
            failures.append(f"c{c} history increases {ups.size}x in {h.size - 1} steps (max ratio {worst:.2f})")
        # restricted-stencil evaluation against the dense operator
        U = evolve(model, grid, schedule, mus[0], muscl=muscl).final
        dense = apply_operator(model, grid, U, mus[0], muscl=muscl)[c, sp.magic]
        local = LocalOperator(grid, sp.magic, muscl)
        vals = local.evaluate(model, U[:, local.cells], mus[0])[c, np.searchsorted(local.targets, sp.magic)]
        if np.abs(vals - dense).max() > 1e-14 * max(1.0, np.abs(dense).max()):
            failures.append(f"c{c} stencil evaluation")
    return failures


def test_criterion_04_eim_properties():
    bg = build_uniform_grid(0.0, np.pi, 200)
    fb = eim_suite(make_model("burgers1d"), bg, TimeSchedule(1e-3, 80),
                   [[m, 1.0, 1.0] for m in np.linspace(0.4, 0.5, 8)], False, 1e-6)
    eg = build_uniform_grid(-1.0, 1.0, 120, "transmissive")
    fe = eim_suite(make_model("euler1d_sod"), eg, TimeSchedule(1e-3, 50),
                   [[y, g] for y in (-0.02, 0.0, 0.02) for g in (1.4, 1.5)], True, 1e-6)
    verdict(4, not (fb or fe), f"Burgers failures {fb or 'none'}, Euler failures {fe or 'none'}")


# 5 -----------------------------------------------------------------------

def test_criterion_05_pod_properties():
    rng = np.random.default_rng(11)
    w = 0.01
    # synthetic rank-5 trajectory: 5 space modes times time signals
    x = np.linspace(0, 1, 300)
    modes = np.array([np.sin((j + 1) * np.pi * x) for j in range(5)]).T
    V = modes @ rng.standard_normal((5, 120))
    rb = pod(V, w, n_modes=20)
    full = pod(V, w, n_modes=5)
    ortho = rb.orthonormality_error()
    total = w * np.sum(V * V)
    energy = abs(np.sum(full.singular_values ** 2) - total) / total
    p1 = rb.reconstruct(rb.project(V))
    idem = np.abs(rb.reconstruct(rb.project(p1)) - p1).max()
    trunc = pod(V, w, n_modes=3)
    r = trunc.projector_residual(V)
    tail = abs(w * np.sum(r * r) - np.sum(full.singular_values[3:] ** 2)) / total
    ok = rb.size == 5 and ortho <= 1e-10 and energy <= 1e-8 and idem <= 1e-10 and tail <= 1e-8
    verdict(5, ok, f"rank {rb.size} (expected 5), orthonormality {ortho:.1e}, energy {energy:.1e}, "
                   f"idempotence {idem:.1e}, truncation energy {tail:.1e}")


# 6 -----------------------------------------------------------------------

def test_criterion_06_podeim_discard_rule():
    model = make_model("euler1d_smooth")
    grid = build_uniform_grid(-1.0, 1.0, 300)
    dom = ParameterDomain.from_intervals([(0.4, 0.5), (1.4, 1.4)])
    problem = OfflineProblem(model, grid, TimeSchedule(1e-3, 100), TrainingSet.uniform_grid(dom, (10, 1)),
                             muscl=True)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        state = run_offline(problem, OfflineSettings(mode="podei", greedy_tol=5e-6, n_max=60,
                                                     eim_seed_tol=0.0, eim_seed_max=3), dom)
    hist = state.history
    discard_frozen = any(r.discarded and r.n_rb == p.n_rb for p, r in zip(hist, hist[1:]))
    errs = np.array([r.max_error for r in hist])
    monotone = bool(np.all(np.diff(errs) <= 0))
    gap = max(abs(n - m) for n, m in zip(state.n_rb, state.n_eim))
    ok = (discard_frozen or monotone) and gap <= 5
    verdict(6, ok, f"discard with N frozen: {discard_frozen}, monotone: {monotone}, N={state.n_rb}, "
                   f"N_EIM={state.n_eim}, max |N-N_EIM|={gap} (<=5), converged={state.converged}")


# 7 -----------------------------------------------------------------------

def test_criterion_07_online_cost(case1, case1_uq):
    problem, state, _ = case1
    truth, reduced, op = case1_uq
    ext = second_level_spaces(problem, state.spaces, 5)
    op2 = problem.online_operator(state.bases, state.spaces, second_level=ext)
    R = dependency_count(op2.local.width)
    budget = R * (state.n_eim[0] + (ext[0].size - state.spaces[0].size))
    per_step = op2.flux_evaluations_per_step
    truth_step = truth.flux_evaluations[0] / problem.schedule.n_steps
    ratio = reduced.mean_time / truth.mean_time
    ok = per_step <= budget and truth_step >= problem.grid.n_cells and ratio <= 0.5
    verdict(7, ok, f"reduced flux evals/step {per_step} <= {budget}, truth {truth_step:.0f} >= "
                   f"{problem.grid.n_cells}, time ratio {ratio:.2f} (<=0.5)")


# 8 -----------------------------------------------------------------------

def test_criterion_08_monte_carlo(case1_uq):
    hand = mc_mean([[1.0], [2.0], [3.0]])[0] == 2.0 and mc_variance([[1.0], [2.0], [3.0]])[0] == 1.0
    truth, reduced, _ = case1_uq
    assert np.array_equal(truth.parameters, reduced.parameters)
    mt, mr = truth.stats.mean, reduced.stats.mean
    rel = np.linalg.norm(mr - mt) / np.linalg.norm(mt)
    dmean = np.abs(mr - mt).max()
    dvar = np.abs(reduced.stats.variance - truth.stats.variance).max()
    ok = hand and rel <= 2e-3 and dvar <= 10 * dmean
    verdict(8, ok, f"hand values {hand}, relative mean difference {rel:.2e} (<=2e-3), "
                   f"variance sup diff {dvar:.2e} <= 10 x mean sup diff {dmean:.2e}")


# 9 -----------------------------------------------------------------------

def test_criterion_09_sod():
    t0 = time.perf_counter()
    model = make_model("euler1d_sod")
    grid = build_uniform_grid(-1.0, 1.0, 400, "transmissive")
    dom = ParameterDomain.from_intervals([(-0.02, 0.02), (1.4, 1.5)])
    sched = TimeSchedule(1e-3, 160)
    problem = OfflineProblem(model, grid, sched, TrainingSet.uniform_grid(dom, (5, 5)), muscl=True)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        state = run_offline(problem, OfflineSettings(mode="podei", greedy_tol=1e-2, n_max=150), dom)
    op = problem.online_operator(state.bases, state.spaces)
    spec = DistributionSpec.uniform(dom, 99, 20)
    truth = run_uq_campaign("truth", model, grid, sched, spec, muscl=True)
    red = run_uq_campaign("reduced", model, grid, sched, spec, online=op, bases=state.bases, muscl=True)
    d = truth.stats.mean[0] - red.stats.mean[0]
    diff = float(np.sqrt(grid.dx * np.sum(d * d)))
    minutes = (time.perf_counter() - t0) / 60
    verdict(9, diff <= 5e-2 and minutes <= 15, f"mean density L2 difference {diff:.2e} (<=5e-2), "
                                                f"N={state.n_rb}, N_EIM={state.n_eim}, {minutes:.1f} min")


# 10 ----------------------------------------------------------------------

def test_criterion_10_conservation_and_maximum_principle(case1):
    problem, _, _ = case1
    drift = 0.0
    violations = 0
    for traj in problem.snapshots:
        mass = problem.grid.dx * traj.states[:, 0].sum(axis=1)
        drift = max(drift, float(np.abs(np.diff(mass)).max()))
        lo, hi = traj.states[0].min(), traj.states[0].max()
        violations += int(traj.states.min() < lo) + int(traj.states.max() > hi)
    em = make_model("euler1d_smooth")
    eg = build_uniform_grid(-1.0, 1.0, 300)
    tr = evolve(em, eg, TimeSchedule(1e-3, 100), [0.45, 1.4], muscl=True)
    edrift = float(np.abs(np.diff(eg.dx * tr.states.sum(axis=2), axis=0)).max())
    ok = drift <= 1e-12 and edrift <= 1e-12 and violations == 0
    verdict(10, ok, f"per-step mass drift Burgers {drift:.1e}, Euler {edrift:.1e} (<=1e-12), "
                    f"maximum-principle violations {violations} over {len(problem.snapshots)} trajectories")
