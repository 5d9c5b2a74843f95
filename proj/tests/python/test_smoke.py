import math
import os

import pytest

import rho_bayes as rb

CONFIGS = os.path.join(os.path.dirname(__file__), "..", "..", "configs")


def test_kernel():
    assert rb.psi(1.0) == 0.0
    assert abs(rb.phi(1.5) / math.log(1.5) - 1.0) < 0.01


def test_posterior_on_scale_grid():
    fam = rb.FamilySpec.uniform_scale()
    net = rb.grid_net(fam, [rb.linspace(0.5, 4.0, 36)])
    data = rb.sample(rb.DensityMember(fam, [2.0]), 200, seed=3)
    rho = rb.rho_posterior(data, net)
    classical = rb.classical_posterior(data, net)
    assert abs(sum(rho) - 1.0) < 1e-12
    assert abs(net[max(range(len(net)), key=rho.__getitem__)].params[0] - 2.0) < 0.25
    assert classical[0] == 0.0


def test_two_atom_eta():
    assert rb.eta_from_distances([0.0, 2.0], [0.5, 0.5], 0.5) == pytest.approx(math.sqrt(2 * math.log(2)), abs=1e-12)


def test_config_errors_are_positioned():
    with pytest.raises(rb.ConfigError, match=r"cfg.json:2: /sede"):
        rb.parse_config('{"scenario": "contamination",\n "sede": 1}', "cfg.json")


def test_bounds_report_runs():
    cfg = rb.load_config(os.path.join(CONFIGS, "bounds_report.json"))
    cfg.n_ladder = [100]
    table = rb.run_experiment(cfg, threads=2)
    assert table["scenario"] == "bounds_report"
    metrics = {row[3] for row in table["summary"]}
    assert "eps_finite_bound" in metrics
