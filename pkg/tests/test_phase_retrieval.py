import numpy as np
import pytest

from bregdc import (CDPOperator, ConfigurationError, GaussianSNR, InvalidInputError, NoNoise,
                    PRMeasurement, QuarticKernel, ShotNoise, SolverConfig, align_global_sign,
                    binary_phantom, build_pr_problem, cdp_adjoint, cdp_forward, check_descent,
                    estimate_smad_bound, pr_f1, pr_f1_grad, pr_f1_hess_action, pr_f2,
                    pr_f2_subgrad, pr_objective, pr_smad_bound, random_masks, read_masks,
                    realized_snr, simulate_pr, smoother_denoiser, binomial_stencil, solve,
                    spectral_init, write_masks)

from conftest import fd_gradient, pr_instance, rel_err


def op(m=3, shape=(8, 8), seed=0):
    return CDPOperator(random_masks(m, shape, seed=seed))


def test_masks_unit_modulus():
    masks = random_masks(5, (6, 7), seed=1)
    assert masks.shape == (5, 6, 7)
    np.testing.assert_allclose(np.abs(masks), 1.0, atol=1e-12)
    assert set(np.unique(masks)) <= {1, -1, 1j, -1j}
    np.testing.assert_array_equal(masks, random_masks(5, (6, 7), seed=1))


def test_operator_rejects_bad_masks():
    with pytest.raises(InvalidInputError):
        CDPOperator(np.full((1, 2, 2), 0.5 + 0j))


def test_forward_examples():
    K = op()
    np.testing.assert_array_equal(cdp_forward(K, np.zeros((8, 8))), np.zeros((3, 8, 8)))
    one = CDPOperator(np.ones((1, 2, 2), dtype=complex))
    x = np.zeros((2, 2))
    x[0, 0] = 1.0
    np.testing.assert_allclose(np.abs(cdp_forward(one, x)), 0.5)
    with pytest.raises(InvalidInputError):
        cdp_forward(K, np.zeros((4, 4)))


def test_parseval(rng):
    K = op(4)
    x = rng.standard_normal((8, 8))
    assert np.sum(np.abs(cdp_forward(K, x)) ** 2) == pytest.approx(4 * np.sum(x ** 2), rel=1e-12)


def test_adjoint_examples(rng):
    one = CDPOperator(np.ones((1, 8, 8), dtype=complex))
    x = rng.standard_normal((8, 8))
    np.testing.assert_allclose(cdp_adjoint(one, cdp_forward(one, x)), x, atol=1e-13)
    K = op()
    np.testing.assert_array_equal(cdp_adjoint(K, np.zeros((3, 8, 8), dtype=complex)), 0.0)
    with pytest.raises(InvalidInputError):
        cdp_adjoint(K, np.zeros((2, 8, 8), dtype=complex))


def test_adjoint_identity(rng):
    K = op()
    for _ in range(100):
        x = rng.standard_normal((8, 8))
        z = rng.standard_normal((3, 8, 8)) + 1j * rng.standard_normal((3, 8, 8))
        lhs = np.real(np.vdot(cdp_forward(K, x), z))
        rhs = np.vdot(x, cdp_adjoint(K, z))
        scale = np.linalg.norm(x) * np.linalg.norm(z)
        assert abs(lhs - rhs) <= 1e-10 * scale


def test_linearity(rng):
    K = op()
    x, y = rng.standard_normal((2, 8, 8))
    np.testing.assert_allclose(cdp_forward(K, 2 * x - 3 * y),
                               2 * cdp_forward(K, x) - 3 * cdp_forward(K, y), atol=1e-12)


def test_forward_matches_dense_dft(rng):
    masks = random_masks(2, (4, 6), seed=3)
    x = rng.standard_normal((4, 6))

    def dft(n):
        j = np.arange(n)
        return np.exp(-2j * np.pi * np.outer(j, j) / n) / np.sqrt(n)
    dense = np.stack([dft(4) @ (mk * x) @ dft(6).T for mk in masks])
    np.testing.assert_allclose(CDPOperator(masks).forward(x), dense, atol=1e-12)


def test_simulate_noise_models(rng):
    K = op(4, (16, 16))
    x = binary_phantom((16, 16))
    clean = np.abs(cdp_forward(K, x)) ** 2
    np.testing.assert_array_equal(simulate_pr(K, x, NoNoise()).d, clean)
    meas = simulate_pr(K, x, GaussianSNR(15.0), seed=2)
    assert 14.9 <= realized_snr(clean, meas.d) <= 15.1
    np.testing.assert_array_equal(meas.d, simulate_pr(K, x, GaussianSNR(15.0), seed=2).d)
    with pytest.raises(InvalidInputError):
        GaussianSNR(np.inf)
    with pytest.raises(InvalidInputError):
        ShotNoise(0.0)


def test_shot_noise_variance():
    K = op(1, (320, 320), seed=5)
    x = 1.0 + np.random.default_rng(0).random((320, 320))
    alpha = 0.3
    clean = np.abs(cdp_forward(K, x)) ** 2
    d = simulate_pr(K, x, ShotNoise(alpha), seed=9).d
    ratio = np.mean((d - clean) ** 2 / clean) / alpha ** 2
    assert abs(ratio - 1) < 0.05


def test_measurement_length_check():
    K = op()
    with pytest.raises(InvalidInputError):
        PRMeasurement(d=np.zeros(10), operator=K)


def test_identity_surrogate_gradients():
    K = CDPOperator.identity_surrogate((1, 2))
    x = np.array([[2.0, 0.0]])
    np.testing.assert_allclose(pr_f1_grad(K, None, x), [[8.0, 0.0]])
    np.testing.assert_array_equal(pr_f1_grad(K, None, np.zeros((1, 2))), 0.0)
    x = np.array([[2.0, 3.0]])
    np.testing.assert_allclose(pr_f2_subgrad(K, np.ones((1, 1, 2)), x), [[2.0, 3.0]])
    np.testing.assert_array_equal(pr_f2_subgrad(K, np.ones((1, 1, 2)), np.zeros((1, 2))), 0.0)


def test_gradients_match_finite_differences(rng):
    K = op(3, (8, 8), seed=4)
    d = simulate_pr(K, rng.standard_normal((8, 8))).d
    for _ in range(5):
        x = rng.standard_normal((8, 8))
        assert rel_err(fd_gradient(lambda z: pr_f1(K, d, z), x, 1e-6), pr_f1_grad(K, d, x)) < 1e-5
        assert rel_err(fd_gradient(lambda z: pr_f2(K, d, z), x, 1e-6), pr_f2_subgrad(K, d, x)) < 1e-5


def test_objective_examples(rng):
    K = op()
    x = rng.standard_normal((8, 8))
    meas = simulate_pr(K, x)
    assert pr_objective(K, meas, x) == 0.0
    one = CDPOperator.identity_surrogate((1, 1))
    assert pr_objective(one, np.array([4.0]), np.zeros((1, 1))) == 4.0
    for _ in range(20):
        y = rng.standard_normal((8, 8))
        d = meas.d + rng.standard_normal(meas.d.shape)
        assert pr_f1(K, d, y) - pr_f2(K, d, y) == pytest.approx(pr_objective(K, d, y), rel=1e-10)


def test_smad_bound_examples(rng):
    assert pr_smad_bound(op(4, (8, 8))) == pytest.approx(12.0, abs=1e-8)
    assert pr_smad_bound(CDPOperator.identity_surrogate((3, 3))) == pytest.approx(3.0, abs=1e-12)
    K = op(2, (6, 6))
    pts = [rng.standard_normal((6, 6)) for _ in range(100)]
    dirs = [rng.standard_normal((6, 6)) for _ in range(100)]
    est = estimate_smad_bound(lambda x, u: pr_f1_hess_action(K, x, u), QuarticKernel(), pts, dirs)
    assert est.L <= pr_smad_bound(K)


def test_build_problem_step_size():
    K = op(4, (8, 8))
    meas = simulate_pr(K, np.ones((8, 8)))
    p = build_pr_problem(K, meas, None, 0.9 / 13)
    assert isinstance(p.kernel, QuarticKernel) and p.smad_L == pytest.approx(12.0)
    with pytest.raises(ConfigurationError, match="12"):
        build_pr_problem(K, meas, None, 1.0)
    with pytest.raises(ConfigurationError):
        build_pr_problem(K, meas, None, None)


def test_build_problem_with_denoiser():
    K = op(4, (8, 8))
    meas = simulate_pr(K, np.ones((8, 8)))
    d = smoother_denoiser(binomial_stencil(0.5), check_shape=(8, 8))
    lam = 0.9 / 13
    p = build_pr_problem(K, meas, d, lam)
    assert p.weak_convexity_eta == pytest.approx(d.lipschitz_bound / (1 + d.lipschitz_bound) / lam)
    assert not p.explicit
    res = solve(p, SolverConfig(lam=lam, max_iter=50), spectral_init(K, meas))
    assert np.all(np.isfinite(res.x_final))


def test_noiseless_objective_monotone_without_inertia():
    x, K, meas, lam, problem = pr_instance()
    res = solve(problem, SolverConfig(lam=lam, beta="zero", max_iter=300),
                spectral_init(K, meas))
    psi = [r.psi for r in res.trace]
    assert all(q <= p + 1e-8 for p, q in zip(psi, psi[1:]))


def test_noiseless_descent_with_inertia():
    x, K, meas, lam, problem = pr_instance()
    res = solve(problem, SolverConfig(lam=lam, max_iter=500), spectral_init(K, meas))
    rep = check_descent(res.trace, epsilon=0.01)
    assert rep.monotone and rep.summable and rep.min_bound_ok


def test_noiseless_recovery_long_run():
    # at lam = 0.9/13 the error contracts slowly (about a factor 2 per 2000
    # iterations), so an exact fit needs a long run
    x, K, meas, lam, problem = pr_instance()
    res = solve(problem, SolverConfig(lam=lam, tol=1e-12, max_iter=16000), spectral_init(K, meas))
    d = meas.d
    assert pr_objective(K, meas, res.x_final) < 1e-6 * float(np.sum(d * d))
    assert np.linalg.norm(np.abs(cdp_forward(K, res.x_final)) ** 2 - d) / np.linalg.norm(d) < 1e-3
    np.testing.assert_allclose(align_global_sign(res.x_final, x), x, atol=1e-2)


def test_align_global_sign_examples():
    x = np.array([1.0, -2.0])
    np.testing.assert_array_equal(align_global_sign(-x, x), x)
    np.testing.assert_array_equal(align_global_sign(x, x), x)
    np.testing.assert_array_equal(align_global_sign(np.array([1.0, 0.0]), np.array([0.0, 1.0])),
                                  [1.0, 0.0])
    with pytest.raises(InvalidInputError):
        align_global_sign(x, np.ones(3))


def test_spectral_init_scale():
    x, K, meas, lam, _ = pr_instance()
    x0 = spectral_init(K, meas)
    assert np.linalg.norm(x0) == pytest.approx(np.linalg.norm(x), rel=1e-12)


def test_mask_file_roundtrip(tmp_path):
    masks = random_masks(3, (5, 4), seed=8)
    p = tmp_path / "m.cdpm"
    write_masks(masks, p)
    raw = p.read_bytes()
    assert raw[:4] == b"CDPM" and len(raw) == 16 + 16 * 3 * 5 * 4
    np.testing.assert_array_equal(read_masks(p), masks)
    p.write_bytes(raw[:-1])
    with pytest.raises(InvalidInputError):
        read_masks(p)
    p.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(InvalidInputError):
        read_masks(p)
