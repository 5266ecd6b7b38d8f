import math

import numpy as np
import pytest

from bregdc import (ConfigurationError, DCProblem, DivergenceError, DomainError,
                    EuclideanKernel, InvalidInputError, IterationRecord, QuarticKernel,
                    SolverConfig, UnsupportedError, check_descent, check_step_size,
                    criticality_residual, ibpdca_step, inertial_candidate, line_search_beta,
                    lyapunov, read_trace_csv, solve, write_trace_csv)
from bregdc.priors import smoother_denoiser, binomial_stencil

from conftest import toy_dc_problem

E = EuclideanKernel()


def quadratic(f2=False):
    return DCProblem(
        f1_value=lambda x: 0.5 * float(np.sum(x * x)),
        f1_grad=lambda x: np.asarray(x, dtype=np.float64),
        f2_value=lambda x: 0.0,
        f2_subgrad=lambda x: np.zeros_like(x),
        smad_L=1.0,
    )


def zero_problem(kernel=E):
    return DCProblem(lambda x: 0.0, lambda x: np.zeros_like(x), lambda x: 0.0,
                     lambda x: np.zeros_like(x), kernel=kernel)


# --- configuration ------------------------------------------------------

@pytest.mark.parametrize("kw", [
    dict(lam=0.0), dict(lam=0.1, delta=1.0), dict(lam=0.1, delta=0.3, epsilon=0.4),
    dict(lam=0.1, epsilon=0.0), dict(lam=0.1, beta="nesterov"), dict(lam=0.1, beta=1.0),
    dict(lam=0.1, c=1.0), dict(lam=0.1, tol=0.0), dict(lam=0.1, max_iter=0),
])
def test_config_invariants(kw):
    with pytest.raises(ConfigurationError):
        SolverConfig(**kw)


def test_step_size_inequality():
    p = quadratic()
    check_step_size(p, SolverConfig(lam=0.9))
    with pytest.raises(ConfigurationError, match="1/lam"):
        check_step_size(p, SolverConfig(lam=1.0))
    p.weak_convexity_eta = 1.0
    with pytest.raises(ConfigurationError):
        check_step_size(p, SolverConfig(lam=0.9))  # 1/0.9 < 0.51 + 1


def test_problem_invariants():
    with pytest.raises(ConfigurationError):
        DCProblem(None, None, None, None, weak_convexity_eta=-1.0)
    d = smoother_denoiser(binomial_stencil(0.5))
    with pytest.raises(ConfigurationError):
        DCProblem(None, None, None, None, denoiser=d, g_value=lambda x: 0.0)
    with pytest.raises(ConfigurationError):
        DCProblem(None, None, None, None, denoiser=d, prox=lambda lam, x: x)


# --- inertial candidate and line search ---------------------------------

def test_inertial_candidate_examples():
    np.testing.assert_array_equal(inertial_candidate([1.0, 1.0], [1.0, 1.0], 0.5), [1.0, 1.0])
    np.testing.assert_array_equal(inertial_candidate([2.0, 0.0], [0.0, 0.0], 0.5), [3.0, 0.0])
    np.testing.assert_array_equal(inertial_candidate([2.0, -1.0], [7.0, 3.0], 0.0), [2.0, -1.0])
    with pytest.raises(InvalidInputError):
        inertial_candidate([1.0], [1.0, 2.0], 0.1)


def test_line_search_stationary_pair_keeps_beta0():
    cfg = SolverConfig(lam=0.5)
    x = np.array([1.0, 2.0])
    ls = line_search_beta(E, cfg, x, x, mu_state=3.0)
    assert ls.beta == pytest.approx(2.0 / 3.0)
    assert not ls.fallback


def test_line_search_first_step_and_mu_update():
    cfg = SolverConfig(lam=0.5)
    ls = line_search_beta(E, cfg, np.array([1.0]), np.array([0.0]), mu_state=1.0)
    assert ls.beta == 0.0
    assert ls.mu == pytest.approx((1 + math.sqrt(5)) / 2, rel=1e-15)
    np.testing.assert_array_equal(ls.y, [1.0])


def test_line_search_euclidean_bound():
    # lam (delta - eps) = 0.25 caps the accepted beta at 0.5
    cfg = SolverConfig(lam=0.5, delta=0.51, epsilon=0.01)
    rng = np.random.default_rng(1)
    for mu in [1.5, 2.0, 5.0, 50.0, 1e4]:
        xk, xkm1 = rng.standard_normal((2, 7))
        ls = line_search_beta(E, cfg, xk, xkm1, mu)
        beta0 = (mu - 1) / mu
        assert ls.beta <= 0.5 + 1e-12
        # the first trial under the cap is taken
        assert ls.beta >= min(beta0, 0.5 * cfg.c)


def test_line_search_zero_and_fixed_modes():
    xk, xkm1 = np.array([1.0, 0.0]), np.array([0.0, 0.0])
    assert line_search_beta(E, SolverConfig(lam=0.5, beta="zero"), xk, xkm1, 9.0).beta == 0.0
    ls = line_search_beta(E, SolverConfig(lam=0.9, beta=0.3), xk, xkm1, 1.0)
    assert ls.beta == 0.3  # 0.09 <= 0.45


def test_line_search_fallback_to_zero_after_budget():
    cfg = SolverConfig(lam=0.01, backtrack_max=2)
    ls = line_search_beta(E, cfg, np.array([1.0]), np.array([0.0]), mu_state=10.0)
    assert ls.beta == 0.0
    np.testing.assert_array_equal(ls.y, [1.0])


def test_line_search_domain_reset():
    cfg = SolverConfig(lam=0.9)
    ls = line_search_beta(E, cfg, np.array([1.0]), np.array([1.0 + 1e-9]), mu_state=10.0,
                          in_domain=lambda y: bool(np.all(y > 1.0 - 1e-12)) and False)
    assert ls.fallback and ls.beta == 0.0
    np.testing.assert_array_equal(ls.y, [1.0])


def test_line_search_rejects_small_mu():
    with pytest.raises(InvalidInputError):
        line_search_beta(E, SolverConfig(lam=0.5), np.ones(1), np.ones(1), 0.5)


# --- single step --------------------------------------------------------

def test_step_examples(toy):
    cfg = SolverConfig(lam=0.5)
    np.testing.assert_array_equal(ibpdca_step(quadratic(), cfg, np.array([2.0]), np.array([2.0])), [1.0])
    y = np.array([0.3, -4.0])
    for h in (E, QuarticKernel()):
        np.testing.assert_allclose(ibpdca_step(zero_problem(h), cfg, y, y), y, rtol=1e-14)
    x = np.array([0.5])
    np.testing.assert_allclose(ibpdca_step(toy, cfg, x, x), [0.75], rtol=1e-15)


def test_step_domain_error():
    p = zero_problem()
    p.domain_member = lambda x: bool(np.all(x > 0))
    with pytest.raises(DomainError):
        ibpdca_step(p, SolverConfig(lam=0.5), np.array([1.0]), np.array([-1.0]))


def test_step_prior_error_propagates():
    def bad(lam, p):
        raise RuntimeError("prior failed")
    p = zero_problem()
    p.prox = bad
    with pytest.raises(RuntimeError, match="prior failed"):
        ibpdca_step(p, SolverConfig(lam=0.5), np.ones(2), np.ones(2))


# --- full solves --------------------------------------------------------

def test_quadratic_contraction():
    early = solve(quadratic(), SolverConfig(lam=0.5, tol=1e-8, max_iter=60), np.array([8.0]))
    assert abs(early.x_final[0]) < 1e-8
    # the relative change of a geometric sequence stays constant, so the stop
    # only fires once the 1e-12 denominator guard takes over
    res = solve(quadratic(), SolverConfig(lam=0.5, tol=1e-8), np.array([8.0]))
    assert res.converged
    assert abs(res.x_final[0]) < 1e-6
    assert res.iterations == len(res.trace)
    assert res.trace[-1].rel_change < 1e-8


@pytest.mark.parametrize("x0,target", [(0.5, 1.0), (-0.5, -1.0), (3.0, 1.0)])
def test_dc_toy_reaches_critical_point(toy, x0, target):
    cfg = SolverConfig(lam=0.5, tol=1e-12, max_iter=500)
    res = solve(toy, cfg, np.array([x0]))
    assert res.converged
    assert res.x_final[0] == pytest.approx(target, abs=1e-9)
    assert criticality_residual(toy, cfg, res.x_final) < 1e-9


def test_dc_toy_monotone_approach_from_half(toy):
    res = solve(toy, SolverConfig(lam=0.5, beta="zero", tol=1e-12, max_iter=200),
                np.array([0.5]))
    psi = [r.psi for r in res.trace]
    assert all(b <= a + 1e-15 for a, b in zip(psi, psi[1:]))


def test_criticality_residual_examples(toy):
    cfg = SolverConfig(lam=0.5)
    assert criticality_residual(toy, cfg, np.array([1.0])) == 0.0
    r = criticality_residual(toy, cfg, np.array([0.5]))
    assert r == pytest.approx(0.25 / 1.5) and r > 0.1
    assert criticality_residual(zero_problem(), cfg, np.array([3.0, -1.0])) == 0.0


def test_solve_rejects_bad_start(toy):
    with pytest.raises(InvalidInputError):
        solve(toy, SolverConfig(lam=0.5), np.array([np.nan]))
    p = toy_dc_problem()
    p.domain_member = lambda x: bool(np.all(x > 0))
    with pytest.raises(DomainError):
        solve(p, SolverConfig(lam=0.5), np.array([-1.0]))
    with pytest.raises(ConfigurationError):
        solve(toy, SolverConfig(lam=1.0), np.array([0.5]))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_error_carries_trace():
    p = DCProblem(lambda x: 0.0, lambda x: -x * 1e150, lambda x: 0.0, lambda x: 0 * x)
    with pytest.raises(DivergenceError) as ei:
        solve(p, SolverConfig(lam=0.5, max_iter=50), np.array([1.0]))
    assert len(ei.value.trace) >= 1


def test_max_iter_not_converged(toy):
    res = solve(toy, SolverConfig(lam=0.5, max_iter=3, tol=1e-15), np.array([0.5]))
    assert not res.converged and res.iterations == 3


def test_callback_sees_every_iterate(toy):
    seen = []
    solve(toy, SolverConfig(lam=0.5, max_iter=5, tol=1e-15), np.array([0.5]),
          callback=lambda k, x, rec: seen.append((k, float(x[0]), rec.k)))
    assert [s[0] for s in seen] == list(range(5))
    assert seen[0][1] == 0.75


def test_determinism(toy):
    cfg = SolverConfig(lam=0.5, tol=1e-12)
    a = solve(toy, cfg, np.array([0.2]))
    b = solve(toy, cfg, np.array([0.2]))
    assert a.trace == b.trace


def test_zero_and_fista_share_first_iterate(toy):
    x0 = np.array([0.2])
    z = solve(toy, SolverConfig(lam=0.5, beta="zero", max_iter=10, tol=1e-15), x0)
    f = solve(toy, SolverConfig(lam=0.5, beta="fista", max_iter=10, tol=1e-15), x0)
    assert z.trace[0] == f.trace[0]
    assert z.trace[1:] != f.trace[1:]
    assert all(r.beta_accepted == 0.0 for r in z.trace)


def test_pnp_solve_without_lyapunov():
    d = smoother_denoiser(binomial_stencil(0.5), check_shape=(8, 8))
    p = DCProblem(lambda x: 0.5 * float(np.sum(x * x)), lambda x: x, lambda x: 0.0,
                  lambda x: 0 * x, denoiser=d, weak_convexity_eta=0.2, smad_L=1.0)
    assert not p.explicit
    with pytest.raises(UnsupportedError):
        p.g(np.zeros(2))
    with pytest.raises(UnsupportedError):
        lyapunov(p, 0.5, np.zeros((8, 8)), np.zeros((8, 8)))
    res = solve(p, SolverConfig(lam=0.5), np.full((8, 8), 3.0))
    assert all(r.psi is None and r.lyapunov is None for r in res.trace)
    rep = check_descent(res.trace)
    assert rep.passed


# --- diagnostics --------------------------------------------------------

def test_lyapunov_examples():
    p = DCProblem(lambda x: 1.0, lambda x: 0 * x, lambda x: 0.0, lambda x: 0 * x)
    assert lyapunov(p, 0.1, np.array([0.0]), np.array([2.0])) == pytest.approx(1.2)
    assert lyapunov(p, 0.7, np.array([5.0]), np.array([5.0])) == 1.0
    assert lyapunov(quadratic(), 0.5, np.array([1.0]), np.array([3.0])) == pytest.approx(1.5)


def _rec(k, h, dh=0.0):
    return IterationRecord(k, 0.0, h, h, dh, 0.0, 0.0, False)


def test_check_descent_cases(toy):
    res = solve(quadratic(), SolverConfig(lam=0.5, tol=1e-8), np.array([8.0]))
    assert check_descent(res.trace, epsilon=0.01).passed
    assert check_descent([_rec(0, 3.0)]).monotone
    rep = check_descent([_rec(0, 1.0), _rec(1, 0.5), _rec(2, 1.5)])
    assert not rep.monotone and rep.first_increase == 2


def test_trace_csv_roundtrip(tmp_path, toy):
    res = solve(toy, SolverConfig(lam=0.5, tol=1e-12), np.array([0.3]))
    path = tmp_path / "trace.csv"
    write_trace_csv(res.trace, path)
    assert path.read_text().splitlines()[0] == "k,beta,psi,lyapunov,dh_prev_cur,dh_cur_y,rel_change,fallback_y"
    assert read_trace_csv(path) == res.trace


def test_trace_csv_rejects_bad_header(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(InvalidInputError):
        read_trace_csv(p)


def test_descent_failure_is_logged_not_fatal(caplog):
    # a "prox" that pushes away from the minimiser breaks descent on purpose
    bad = DCProblem(f1_value=lambda x: 0.5 * float(np.sum(x * x)), f1_grad=lambda x: x,
                    f2_value=lambda x: 0.0, f2_subgrad=lambda x: 0 * x,
                    prox=lambda lam, p: p + 1.0, g_value=lambda x: 0.0)
    with caplog.at_level("WARNING", logger="bregdc.solver"):
        res = solve(bad, SolverConfig(lam=0.5, beta="zero", max_iter=5), np.array([-3.0]))
    assert res.iterations == 5
    assert any("H_delta increased" in r.message for r in caplog.records)
