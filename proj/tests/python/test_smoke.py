import json

import numpy as np
import pytest

import specmult as sm


def test_builders_and_resolvent():
    base = sm.build_strip(4, 3)
    assert base.dim == 12
    assert base.block_count == 4
    inst = sm.with_disorder(base, 0)
    assert inst.has_omega and len(inst.omega) == 4

    z = 0.3 + 0.9j
    g = sm.green_block(inst, 1, 1, z)
    assert g.shape == (3, 3)
    # resolvent convention (A - z)^{-1}, against dense inversion
    dense = np.linalg.inv(inst.assembled - z * np.eye(inst.dim))
    sup = inst.block_support(1)
    assert np.allclose(g, dense[np.ix_(sup, sup)], atol=1e-10)


def test_json_round_trip():
    inst = sm.with_disorder(sm.build_shell_model(2, 1), 3)
    doc = sm.to_json(inst)
    back = sm.from_json(doc)
    assert back.dim == inst.dim
    assert np.array_equal(np.asarray(back.omega), np.asarray(inst.omega))
    assert json.loads(doc)["disorder"]["family"] == "uniform"


def test_multiplicity_chain():
    base = sm.build_strip(4, 2)
    est = sm.estimate_M_n(base, 1, 10, 6, 5)
    assert est.constant and est.value == 2
    gd = max(sm.global_degeneracy(sm.with_disorder(base, s)) for s in range(10))
    assert gd <= est.value
    assert sm.corollary_bound(base, 1) >= 1


def test_tree_simplicity():
    tree = sm.build_rooted_tree(2, 2)
    assert tree.vertex_count == 7
    rng = np.random.default_rng(11)
    tau = rng.uniform(0.0, 1.0, size=len(tree.boundary))
    rep = sm.simplicity_report(tree, tau)
    assert rep.verdict and rep.pole_count == 7

    flat = sm.simplicity_report(tree, np.zeros(len(tree.boundary)))
    assert not flat.verdict


def test_spectral_measures():
    inst = sm.with_disorder(sm.build_strip(3, 2), 1)
    evals, clusters = sm.spectrum(inst)
    assert len(evals) == inst.dim
    assert sum(len(c) for c in clusters) == inst.dim
    atoms = sm.trace_measure(inst, 0)
    assert sum(w for _, w in atoms) == pytest.approx(2.0, abs=1e-10)


def test_run_experiment_and_errors():
    config = {
        "task": "green",
        "model": {"name": "strip", "params": {"length": 3, "fibers": 2}},
        "disorder": {"family": "uniform", "params": [0.0, 1.0], "seed": 2},
        "task_params": {"samples": 3, "n": 0, "z": [0.2, 0.7]},
    }
    out = sm.run_experiment(json.dumps(config))
    assert out["all_passed"]
    assert out["csv"].startswith("sample_id,n,z_re,z_im,k,method,certified")
    assert json.loads(out["summary"])["task"] == "green"

    bad = dict(config, mystery=1)
    with pytest.raises(sm.ConfigError):
        sm.run_experiment(json.dumps(bad))
