import json
import subprocess
import sys
import warnings

import numpy as np
import pytest

from swsampling import io
from swsampling.cli import main
from swsampling.errors import ConfigError, DiagramError, DimensionError
from swsampling.harness import (
    TWO_DIRAC_VALUE,
    ConvergenceRecord,
    ExperimentConfig,
    Reference,
    SweepWarning,
    augment_diagrams,
    convergence_sweep,
    distance_matrix,
    gen_gaussian_pair,
    median_errors,
    read_sweep_csv,
    reference_estimate,
    reference_value,
    two_dirac_case,
    write_sweep_csv,
)
from swsampling.ot1d import sw2_estimate
from swsampling.samplers import riesz_minimize, sample
from swsampling.sphere import PointCloud, make_rng

# ---------------------------------------------------------------- data


def test_gaussian_pair_is_deterministic():
    a = gen_gaussian_pair(4, 100, make_rng(3))
    b = gen_gaussian_pair(4, 100, make_rng(3))
    assert a[0] == b[0] and a[1] == b[1]
    assert a[0].n == 100 and a[0].dim == 4


def test_gaussian_pair_moments():
    d, n = 3, 10_000
    mu, _ = gen_gaussian_pair(d, n, make_rng(4))
    # replay the generator to recover the drawn parameters of the first cloud
    rng = make_rng(4)
    mean = 1.0 + rng.standard_normal(d)
    S = rng.standard_normal((d, d))
    pts = mu.points
    assert np.all(np.abs(pts.mean(axis=0) - mean) <= 3 * pts.std(axis=0) / np.sqrt(n))
    cov = S @ S.T
    assert np.linalg.norm(np.cov(pts.T) - cov) / np.linalg.norm(cov) < 0.10


def test_two_dirac_case():
    mu, nu, value = two_dirac_case()
    assert value == TWO_DIRAC_VALUE == pytest.approx(2 * (np.pi - np.sqrt(2)) / (3 * np.pi), rel=1e-15)
    assert mu.n == nu.n == 2
    res = sw2_estimate(mu, nu, sample("uniform", 10**6, 3, seed=99))
    assert abs(res.value - value) < 3 * res.std_error


def test_two_dirac_riesz_beats_large_monte_carlo():
    mu, nu, value = two_dirac_case()
    mc = sw2_estimate(mu, nu, sample("uniform", 10**6, 3, seed=5))
    # T=30: the default T=10 only reaches the Monte Carlo 10^6 error level
    dirs, _ = riesz_minimize(10_000, 3, T=30, rng=make_rng(0))
    err = abs(sw2_estimate(mu, nu, dirs).value - value)
    assert err < abs(mc.value - value)
    assert err < mc.std_error


# ---------------------------------------------------------------- references


def test_reference_protocols():
    mu, nu, value = two_dirac_case()
    assert reference_value(mu, nu, "analytic_two_dirac") == value
    assert reference_value(nu, mu, "analytic_two_dirac") == value
    with pytest.raises(ConfigError):
        reference_value(mu, mu, "analytic_two_dirac")
    cloud = gen_gaussian_pair(3, 50, make_rng(1))[0]
    assert reference_value(cloud, cloud, "big_uniform:1000") == 0.0
    assert reference_value(cloud, cloud, "fibonacci_lattice:1000") == 0.0
    with pytest.raises(ConfigError):
        Reference.parse("exact")


def test_reference_seed_is_reserved():
    ref = Reference("big_uniform", 10)
    assert ref.seed >= 2**63
    assert Reference("big_uniform", 10, stream=1).seed != ref.seed
    with pytest.raises(ConfigError):
        ExperimentConfig(seeds=[2**63])


def test_reference_cache(tmp_path):
    mu, nu = gen_gaussian_pair(3, 30, make_rng(2))
    first = reference_estimate(mu, nu, "big_uniform:5000", cache_dir=tmp_path)
    again = reference_estimate(mu, nu, "big_uniform:5000", cache_dir=tmp_path)
    assert len(list(tmp_path.iterdir())) == 1
    assert first.value == again.value and first.std_error == again.std_error


def test_big_reference_seeds_agree(gauss3, ref_cache):
    mu, nu = gauss3
    a = reference_estimate(mu, nu, Reference("big_uniform", 10**7, 0), cache_dir=ref_cache)
    b = reference_estimate(mu, nu, Reference("big_uniform", 10**7, 1), cache_dir=ref_cache)
    assert abs(a.value - b.value) <= 4 * a.std_error


def test_fibonacci_reference_agrees_with_big_uniform(gauss3, gauss3_ref, ref_cache):
    mu, nu = gauss3
    big = reference_estimate(mu, nu, Reference("big_uniform", 10**7, 0), cache_dir=ref_cache)
    assert abs(gauss3_ref.value - big.value) <= 4 * big.std_error


# ---------------------------------------------------------------- diagrams and matrices


def test_augment_examples():
    mu, nu = augment_diagrams([[0.0, 2.0]], [[0.0, 4.0]])
    np.testing.assert_array_equal(mu.points, [[0, 2], [2, 2]])
    np.testing.assert_array_equal(nu.points, [[0, 4], [1, 1]])
    mu, nu = augment_diagrams([[0.0, 1.0]], np.empty((0, 2)))
    np.testing.assert_array_equal(mu.points, [[0, 1]])
    np.testing.assert_array_equal(nu.points, [[0.5, 0.5]])


def test_augment_errors():
    with pytest.raises(DiagramError):
        augment_diagrams([[2.0, 1.0]], [[0.0, 1.0]])
    with pytest.raises(DiagramError):
        augment_diagrams(np.empty((0, 2)), np.empty((0, 2)))
    with pytest.raises(DiagramError):
        augment_diagrams([[0.0, 1.0, 2.0]], [[0.0, 1.0]])


def test_identical_diagrams_give_zero():
    d = np.array([[0.0, 1.0], [0.5, 3.0], [1.0, 1.5]])
    mu, nu = augment_diagrams(d, d[::-1])
    assert sw2_estimate(mu, nu, sample("uniform", 100, 2, seed=0)).value == pytest.approx(0.0, abs=1e-15)


def test_distance_matrix_basics():
    clouds = [PointCloud(make_rng(i).normal(size=(40, 3))) for i in range(4)]
    dirs = sample("uniform", 500, 3, seed=1)
    mat = distance_matrix(clouds, dirs)
    assert np.array_equal(mat, mat.T)
    assert np.all(np.diag(mat) == 0.0) and np.all(mat[np.triu_indices(4, 1)] > 0)
    same = distance_matrix([clouds[0]] * 3, dirs)
    assert np.all(same == 0.0)
    with pytest.raises(DimensionError):
        distance_matrix([clouds[0], PointCloud(np.zeros((40, 2)))], dirs)


def test_distance_matrix_diagrams():
    diagrams = [np.array([[0.0, 1.0], [0.2, 0.9]]), np.array([[0.1, 2.0]]), np.empty((0, 2))]
    mat = distance_matrix(diagrams, sample("uniform", 200, 2, seed=2), diagrams=True)
    assert mat.shape == (3, 3) and np.array_equal(mat, mat.T)


def test_distance_matrix_against_references(ref_cache):
    rng = make_rng(21)
    clouds = [gen_gaussian_pair(3, 200, rng)[k] for k in (0, 1)] + [gen_gaussian_pair(3, 200, rng)[0]]
    dirs = sample("uniform", 100_000, 3, seed=22)
    mat = distance_matrix(clouds, dirs)
    for i, j in [(0, 1), (0, 2), (1, 2)]:
        ref = reference_estimate(clouds[i], clouds[j], "big_uniform:1000000", cache_dir=ref_cache)
        own = sw2_estimate(clouds[i], clouds[j], dirs)
        assert abs(mat[i, j] - ref.value) <= 3 * np.hypot(ref.std_error, own.std_error)


# ---------------------------------------------------------------- sweeps


def test_config_parser(tmp_path):
    text = """
    # comment
    dims = 3, 5
    m_schedule = 100, 300
    strategies = uniform, halton:normalize:shift, shcv;degree=1
    seeds = 0..3, 9
    reference = big_uniform:2000
    relative = yes
    n_points = 50
    """
    cfg = ExperimentConfig.from_text(text)
    assert cfg.dims == [3, 5] and cfg.seeds == [0, 1, 2, 3, 9]
    assert cfg.reference == Reference("big_uniform", 2000) and cfg.relative
    path = tmp_path / "c.cfg"
    path.write_text(text)
    assert ExperimentConfig.from_file(path) == cfg
    for bad in ("m_schedule = 300, 100", "colour = red", "strategies = lattice", "relative = maybe", "dims"):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_text(bad)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(tmp_path / "missing.cfg")


def test_csv_round_trip(tmp_path):
    rows = [ConvergenceRecord("uniform", 3, m, 1.0 / m + 1e-17, 0.1 * m, 0) for m in (100, 300)]
    write_sweep_csv(tmp_path / "e.csv", rows)
    assert read_sweep_csv(tmp_path / "e.csv") == [(r.m, r.error, r.seconds) for r in rows]
    raw = (tmp_path / "e.csv").read_bytes()
    assert raw.startswith(b"N_sample,Error,Timers\n") and b"\r" not in raw


def test_sweep_outputs_and_skips(tmp_path, ref_cache):
    cfg = ExperimentConfig(
        dims=[3, 4],
        m_schedule=[50, 100, 200],
        strategies=["uniform", "fibonacci", "shcv"],
        seeds=[0, 1],
        reference="big_uniform:20000",
        n_points=40,
        out=str(tmp_path / "out"),
    )
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        records = convergence_sweep(cfg, cache_dir=ref_cache)
    assert any(issubclass(w.category, SweepWarning) for w in caught)
    assert {(r.strategy, r.d) for r in records} == {("uniform", 3), ("uniform", 4), ("fibonacci", 3), ("shcv", 3), ("shcv", 4)}
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["skipped"][0]["strategy"] == "fibonacci"
    for name in manifest["files"]:
        rows = read_sweep_csv(tmp_path / "out" / name)
        assert [r[0] for r in rows] == cfg.m_schedule
    by_file = read_sweep_csv(tmp_path / "out" / "errors_uniform_d3_seed1.csv")
    expected = [(r.m, r.error, r.seconds) for r in records if r.strategy == "uniform" and r.d == 3 and r.seed == 1]
    assert by_file == expected


def test_two_dirac_data_skips_other_dimensions():
    cfg = ExperimentConfig(dims=[3, 5], m_schedule=[10, 20, 40], seeds=[0], data="two_dirac", reference="analytic_two_dirac")
    with pytest.warns(SweepWarning):
        records = convergence_sweep(cfg)
    assert {r.d for r in records} == {3}


def test_direction_cache_gives_identical_errors(tmp_path):
    cfg = ExperimentConfig(
        dims=[3],
        m_schedule=[64, 128, 256],
        strategies=["sobol:normalize:rotation", "riesz;T=2"],
        seeds=[0, 1],
        reference="fibonacci_lattice:20000",
        n_points=30,
        direction_cache=str(tmp_path / "cache"),
    )
    fresh = convergence_sweep(cfg)
    cached = convergence_sweep(cfg)
    assert [r.error for r in fresh] == [r.error for r in cached]
    assert not any(r.amortized for r in fresh) and all(r.amortized for r in cached)


def test_timings_grow_with_m():
    cfg = ExperimentConfig(dims=[3], m_schedule=[100, 1000, 10_000], seeds=list(range(5)), reference="fibonacci_lattice:1000", n_points=300)
    records = convergence_sweep(cfg)
    med = {}
    for m in cfg.m_schedule:
        med[m] = np.median([r.seconds for r in records if r.m == m])
    assert med[100] <= med[1000] <= med[10_000]
    assert set(median_errors(records, "uniform", 3)) == set(cfg.m_schedule)


# ---------------------------------------------------------------- CLI


@pytest.fixture()
def clouds_on_disk(tmp_path):
    mu, nu = gen_gaussian_pair(3, 60, make_rng(30))
    io.write_point_cloud(tmp_path / "mu.csv", mu)
    io.write_point_cloud(tmp_path / "nu.csv", nu)
    io.write_point_cloud(tmp_path / "small.csv", PointCloud(np.ones((5, 3))))
    return tmp_path


def run_cli(capsys, *args):
    code = main([str(a) for a in args])
    return code, capsys.readouterr()


def test_cli_generate(tmp_path, capsys):
    out = tmp_path / "riesz.swds"
    code, cap = run_cli(capsys, "generate", "--kind", "riesz;T=3", "--m", 50, "--dim", 3, "--out", out)
    assert code == 0
    info = json.loads(cap.out)
    assert info["M"] == 50 and info["optimizer"]["iterations"] == 3
    assert io.load_directions(out).m == 50


def test_cli_estimate_variants(clouds_on_disk, capsys):
    mu, nu = clouds_on_disk / "mu.csv", clouds_on_disk / "nu.csv"
    code, cap = run_cli(capsys, "estimate", "--mu", mu, "--nu", nu, "--m", 2000, "--seed", 4)
    plain = json.loads(cap.out)
    assert code == 0 and plain["std_error"] > 0 and plain["interval"][0] < plain["value"] < plain["interval"][1]
    code, cap = run_cli(capsys, "estimate", "--mu", mu, "--nu", nu, "--strategy", "shcv", "--m", 2000, "--degree", 2)
    assert code == 0 and json.loads(cap.out)["degree"] == 2
    code, cap = run_cli(capsys, "estimate", "--mu", mu, "--nu", nu, "--strategy", "sobol:normalize:shift", "--m", 128, "--replicates", 5)
    rq = json.loads(cap.out)
    assert code == 0 and rq["replicates"] == 5 and rq["m_used"] == 640
    assert abs(rq["value"] - plain["value"]) < 0.1 * plain["value"]


def test_cli_estimate_with_saved_directions(clouds_on_disk, capsys):
    dirs = clouds_on_disk / "d.swds"
    run_cli(capsys, "generate", "--strategy", "fibonacci", "--m", 300, "--d", 3, "--out", dirs)
    code, cap = run_cli(capsys, "estimate", "--mu", clouds_on_disk / "mu.csv", "--nu", clouds_on_disk / "nu.csv", "--directions", dirs)
    assert code == 0 and json.loads(cap.out)["std_error"] is None


def test_cli_bench(tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("dims = 3\nm_schedule = 20, 40, 80\nstrategies = uniform, fibonacci\nseeds = 0..1\nreference = fibonacci_lattice:5000\nn_points = 20\n")
    code, cap = run_cli(capsys, "bench", "--config", cfg, "--out", tmp_path / "res")
    assert code == 0 and json.loads(cap.out)["records"] == 12
    assert (tmp_path / "res" / "errors_fibonacci_d3_seed1.csv").exists()
    code, _ = run_cli(capsys, "bench", "--dims", "5", "--m-schedule", "10,20,30", "--strategies", "fibonacci", "--n-seeds", 1, "--reference", "big_uniform:100", "--out", tmp_path / "r2")
    assert code == 0


def test_cli_discrepancy(capsys):
    code, cap = run_cli(capsys, "discrepancy", "--measure", "star", "--strategy", "halton", "--m", 64, "--d", 2)
    assert code == 0 and json.loads(cap.out)["bound"] == "exact"
    code, cap = run_cli(capsys, "discrepancy", "--measure", "cap_l2", "--strategy", "fibonacci", "--m", 100)
    assert code == 0 and json.loads(cap.out)["value"] > 0
    code, cap = run_cli(capsys, "discrepancy", "--measure", "cap_max", "--m", 100, "--n-caps", 500)
    assert code == 0 and json.loads(cap.out)["bound"] == "lower"


def test_cli_distmat(clouds_on_disk, capsys):
    out = clouds_on_disk / "m.csv"
    code, _ = run_cli(capsys, "distmat", clouds_on_disk / "mu.csv", clouds_on_disk / "nu.csv", clouds_on_disk / "mu.csv", "--m", 200, "--out", out)
    mat = io.read_matrix(out)
    assert code == 0 and mat.shape == (3, 3) and mat[0, 2] == 0.0 and np.array_equal(mat, mat.T)
    diag = clouds_on_disk / "dg.csv"
    diag.write_text("0,1\n0.5,2\n")
    code, cap = run_cli(capsys, "distmat", diag, diag, "--diagrams", "--m", 50)
    assert code == 0 and np.all(np.loadtxt(cap.out.splitlines(), delimiter=",") == 0.0)


def test_cli_exit_codes(clouds_on_disk, capsys):
    mu, small = clouds_on_disk / "mu.csv", clouds_on_disk / "small.csv"
    assert run_cli(capsys, "generate", "--strategy", "lattice", "--m", 5, "--d", 3)[0] == 2
    assert run_cli(capsys, "generate", "--strategy", "fibonacci", "--m", 5, "--d", 4)[0] == 2
    assert run_cli(capsys, "estimate", "--mu", mu, "--nu", small)[0] == 3
    assert run_cli(capsys, "estimate", "--mu", mu, "--nu", clouds_on_disk / "absent.csv")[0] == 3
    code, cap = run_cli(capsys, "bench", "--config", clouds_on_disk / "absent.cfg")
    assert code == 2 and "error" in cap.err


def test_console_script_entry_point():
    res = subprocess.run([sys.executable, "-m", "swsampling.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "distmat" in res.stdout
