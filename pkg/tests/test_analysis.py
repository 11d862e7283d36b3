import numpy as np
import pytest

import quakeroute.analysis as an
import quakeroute.qsim as qs


def test_mini_config_counts():
    for n in (1, 2):
        for k in (1, 2, 3):
            cfg = an.MiniConfig(sublayers=n, reuploads=k)
            assert cfg.n_film_params == 2 * n * (k + 1)
            assert cfg.n_params == cfg.n_film_params + 4
            circ = an.build_mini_circuit(cfg)
            assert circ.n_qubits == 3
            assert circ.n_params == cfg.n_params
    with pytest.raises(ValueError):
        an.MiniConfig(sublayers=0, reuploads=1)


def test_fourier_one_frequency_hand_circuit():
    """RY(pi/2) RZ(x) RY(pi/2) gives <Z> = -cos x, i.e. c_{+-1} = -1/2."""
    circ = qs.Circuit(1, (
        qs.Rot("y", 0, "const", offset=np.pi / 2),
        qs.Rot("z", 0, "feature", 0),
        qs.Rot("y", 0, "const", offset=np.pi / 2),
    ), 0, 1, measured=(0,))
    d = 1
    m = 2 * d + 1
    xs = 2 * np.pi * np.arange(m) / m
    f = np.array([float(qs.expectation_z(qs.run(circ, [], np.array([x])), 0, 1))
                  for x in xs])
    omegas = np.arange(-d, d + 1)
    dft = np.exp(1j * np.outer(omegas, xs)) / m
    coeffs = dft @ f
    assert abs(coeffs[0] - (-0.5)) < 1e-10   # omega = -1
    assert abs(coeffs[1]) < 1e-10            # omega = 0
    assert abs(coeffs[2] - (-0.5)) < 1e-10   # omega = +1


@pytest.mark.parametrize("k", [1, 2, 3])
def test_fourier_truncation_and_symmetry(k):
    cfg = an.MiniConfig(sublayers=1, reuploads=k)
    rng = np.random.default_rng(42)
    oversampled = 2 * (2 * k) + 1  # resolves frequencies up to 2k
    samples = an.sample_fourier(cfg, 40, rng, grid_points=oversampled)
    # recompute on the oversampled grid to look for beyond-degree leakage
    circuit = an.build_mini_circuit(cfg)
    rng2 = np.random.default_rng(42)
    xs = 2 * np.pi * np.arange(oversampled) / oversampled
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    grid = np.stack([gx.ravel(), gy.ravel(),
                     np.zeros(oversampled ** 2), np.zeros(oversampled ** 2)], 1)
    wide = np.arange(-2 * k, 2 * k + 1)
    dft = np.exp(1j * np.outer(wide, xs)) / oversampled
    for _ in range(10):
        theta = rng2.uniform(0, 2 * np.pi, circuit.n_params)
        f = np.asarray(qs.expectation_z(qs.run(circuit, theta, grid), 0, 3))
        table = dft @ f.reshape(oversampled, oversampled) @ dft.T
        beyond = np.abs(wide) > k
        assert np.abs(table[beyond, :]).max() < 1e-10
        assert np.abs(table[:, beyond]).max() < 1e-10
    # conjugate symmetry and the bounded constant coefficient on every draw
    flipped = samples.coeffs[:, ::-1, ::-1]
    assert np.abs(samples.coeffs - flipped.conj()).max() < 1e-10
    c00 = samples.coeffs[:, k, k]
    assert np.abs(c00.imag).max() < 1e-10
    assert (np.abs(c00.real) <= 1.0 + 1e-12).all()


def test_fourier_rejects_aliasing_grid():
    cfg = an.MiniConfig(sublayers=1, reuploads=2)
    with pytest.raises(ValueError):
        an.sample_fourier(cfg, 1, np.random.default_rng(0), grid_points=4)


def test_violin_csv(tmp_path):
    cfg = an.MiniConfig(sublayers=1, reuploads=1)
    samples = an.sample_fourier(cfg, 3, np.random.default_rng(1))
    path = tmp_path / "violin.csv"
    an.write_violin_csv(samples, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "sample,omega_x,omega_y,real,imag"
    assert len(lines) == 1 + 3 * 3 * 3


def test_fisher_symmetric_psd_all_configs():
    rng = np.random.default_rng(3)
    for n in (1, 2):
        for k in (1, 2, 3):
            cfg = an.MiniConfig(sublayers=n, reuploads=k)
            res = an.fisher_matrix(cfg, n_x=6, n_theta=3, rng=rng)
            f = res.matrix
            assert f.shape == (cfg.n_film_params,) * 2
            assert np.abs(f - f.T).max() < 1e-10
            ev = np.linalg.eigvalsh(f)
            assert ev.min() > -1e-8


def test_fisher_rank_pattern():
    rng = np.random.default_rng(0)
    for k in (1, 2, 3):
        cfg = an.MiniConfig(sublayers=1, reuploads=k)
        res = an.fisher_matrix(cfg, n_x=10, n_theta=8, rng=rng)
        rep = an.fisher_spectrum(res.matrix)
        assert rep.rank == cfg.n_film_params
    cfg = an.MiniConfig(sublayers=2, reuploads=3)
    res = an.fisher_matrix(cfg, n_x=10, n_theta=8, rng=rng)
    rep = an.fisher_spectrum(res.matrix)
    assert rep.rank == cfg.n_film_params - 4


def test_fisher_inert_parameter_row_is_zero():
    """A parameter entering as a rotation immediately undone by its inverse
    contributes nothing: its Fisher row and column vanish."""
    circ = qs.Circuit(2, (
        qs.Rot("y", 0, "param", 0),
        qs.Rot("x", 1, "param", 1),
        qs.Rot("x", 1, "param", 1, scale=-1.0),
        qs.CNot(0, 1),
        qs.Rot("y", 1, "param", 2),
    ), 3, 1, measured=(0, 1))
    rng = np.random.default_rng(5)
    f = np.zeros((3, 3))
    for _ in range(4):
        theta = rng.uniform(0, 2 * np.pi, 3)
        x = rng.normal(0, 1, (5, 1))
        probs = np.maximum(qs.probabilities(qs.run(circ, theta, x)), 1e-12)
        dp = np.stack([qs.prob_grad(circ, theta, x, index=i) for i in range(3)])
        f += np.einsum("ixy,jxy->ij", dp / probs, dp) / len(x)
    assert np.abs(f[1, :]).max() < 1e-12
    assert np.abs(f[:, 1]).max() < 1e-12
    assert f[0, 0] > 1e-3 and f[2, 2] > 1e-3


def test_fisher_spectrum_basics():
    rep = an.fisher_spectrum(np.eye(4))
    assert rep.rank == 4
    assert rep.near_zero_fraction == 0.0
    v = np.array([1.0, 2.0, 3.0])
    rep1 = an.fisher_spectrum(np.outer(v, v))
    assert rep1.rank == 1
    with pytest.raises(ValueError):
        an.fisher_spectrum(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_spectrum_csv(tmp_path):
    rep = an.fisher_spectrum(np.diag([3.0, 1.0, 0.0]))
    path = tmp_path / "spec.csv"
    an.write_spectrum_csv(rep, path)
    text = path.read_text()
    assert text.startswith("index,eigenvalue")
    assert "rank,2" in text


def test_block_ratio():
    decoupled = np.block([
        [np.eye(3), np.zeros((3, 2))],
        [np.zeros((2, 3)), 2 * np.eye(2)],
    ])
    assert an.block_ratio(decoupled, 3) == 0.0
    coupled = np.ones((5, 5))
    assert an.block_ratio(coupled, 3) > 0.0


def test_block_ratio_on_mini_circuit():
    cfg = an.MiniConfig(sublayers=1, reuploads=2)
    res = an.fisher_matrix(cfg, n_x=8, n_theta=4,
                           rng=np.random.default_rng(9), include_main=True)
    assert res.matrix.shape == (cfg.n_params,) * 2
    ratio = an.block_ratio(res.matrix, cfg.n_film_params)
    assert ratio >= 0.0


def test_pooled_near_zero_fraction():
    cfg = an.MiniConfig(sublayers=2, reuploads=1)
    res = an.fisher_matrix(cfg, n_x=6, n_theta=4, rng=np.random.default_rng(2))
    frac = an.pooled_near_zero_fraction(res)
    assert 0.0 <= frac <= 1.0
    assert frac >= 2 / 8 - 1e-9  # at least the structurally dead directions
