import warnings

import numpy as np
import pytest

from pagelink.baselines import (GNNExpLinkExplainer, PGExpConfig, PGExpLinkExplainer, gnnexp_link,
                                init_predictor, load_predictor, node_representations, pgexp_jobs,
                                pgexp_link_infer, pgexp_link_train, predictor_objective, save_predictor)
from pagelink.evalkit import mask_auc
from pagelink.exceptions import ConfigError, SchemaError
from pagelink.explainer import ExplainerConfig, learn_mask
from pagelink.hetgraph import ComputationGraph, build_graph, extract_computation_graph
from pagelink.masks import EdgeMaskSet
from pagelink.rgcn import init_model, load_model

from oracles import central_differences, random_graph, relative_error


def test_gnnexp_is_the_pathless_ablation():
    g = random_graph(np.random.default_rng(0), 12, 26)
    params = init_model(g, 2, 6, seed=0)
    cg = extract_computation_graph(g, 0, 11, 2)
    cfg = ExplainerConfig(max_iter=40)
    a = gnnexp_link(cg, params, cfg=cfg).flat(cg)
    b = learn_mask(cg, params, cfg=ExplainerConfig(alpha=0.0, beta=0.0, max_iter=40)).flat(cg)
    assert np.array_equal(a, b)


def test_gnnexp_flat_loss_leaves_mask_at_init():
    g = build_graph([("v", i) for i in range(4)], [("v", 0, "e", "v", 1), ("v", 1, "e", "v", 2), ("v", 2, "e", "v", 3)])
    p = init_model(g, 1, 3, seed=0)
    p.embedding[:] = 3.0
    p.w_self[0] = 4.0 * np.eye(3)
    p.w_rel[:] *= 1e-3
    cg = ComputationGraph.whole(g, 0, 3)
    mask = gnnexp_link(cg, p, cfg=ExplainerConfig(lambda_ent=0.0, lambda_norm=0.0))
    assert np.abs(mask.flat(cg)).max() < 1e-9


def test_predictor_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    g = random_graph(rng, 12, 24)
    params = init_model(g, 2, 4, seed=1)
    reps = node_representations(g, params)
    pred = init_predictor(params, hidden=3, seed=2, input_scale=0.7)
    jobs = pgexp_jobs(g, params, [(0, 11), (1, 10), (2, 9)], reps, 0.7)
    _, grads = predictor_objective(pred, params, jobs)
    for key, arr in pred.arrays().items():
        flat = arr.reshape(-1)

        def f(x, flat=flat):
            saved = flat.copy()
            flat[:] = x
            out = predictor_objective(pred, params, jobs)[0]
            flat[:] = saved
            return out

        fd = central_differences(f, flat.copy(), step=1e-5)
        assert relative_error(grads[key].reshape(-1), fd) < 1e-4, key


def test_training_lowers_the_objective(small_synth, trained_small):
    g, links = small_synth
    params = trained_small.params_
    pairs = [p for p, _ in links[:12]]
    mp = trained_small.graph_
    reps = node_representations(mp, params)
    scale = 1.0 / reps.std()
    jobs = pgexp_jobs(mp, params, np.array(pairs), reps, scale)
    before = predictor_objective(init_predictor(params, seed=0, input_scale=scale), params, jobs)[0]
    pred = pgexp_link_train(g, params, pairs, PGExpConfig(epochs=15, lr=0.02))
    after = predictor_objective(pred, params, jobs)[0]
    assert after < before


def test_needs_ten_training_pairs(small_synth, trained_small):
    g, links = small_synth
    with pytest.raises(ConfigError):
        pgexp_link_train(g, trained_small.params_, [p for p, _ in links[:9]])


def test_untrained_predictor_is_at_chance(small_synth, trained_small):
    g, links = small_synth
    params = trained_small.params_
    mp = trained_small.graph_
    aucs = []
    for seed in range(4):
        pred = init_predictor(params, seed=seed, input_scale=1.0 / node_representations(mp, params).std())
        for (s, t), gt in links[:15]:
            cg = extract_computation_graph(mp, s, t, params.n_layers)
            aucs.append(mask_auc(pgexp_link_infer(cg, pred, params), gt, cg))
    assert abs(np.mean(aucs) - 0.5) <= 0.1


def test_predictor_checkpoint(tmp_path, trained_small):
    params = trained_small.params_
    pred = init_predictor(params, hidden=5, seed=3, input_scale=2.0)
    save_predictor(pred, tmp_path / "p.ckpt")
    back = load_predictor(tmp_path / "p.ckpt", expect_schema=params.schema_hash)
    assert back.input_scale == 2.0
    for k, v in pred.arrays().items():
        assert np.array_equal(v, back.arrays()[k])
    # the container is shared with the encoder but the section tags differ
    with pytest.raises(SchemaError):
        load_model(tmp_path / "p.ckpt")


def test_estimators_emit_masks_over_the_computation_graph(small_synth, trained_small):
    g, links = small_synth
    (s, t), _ = links[0]
    gn = GNNExpLinkExplainer(max_iter=10).fit(g, trained_small)
    pg = PGExpLinkExplainer(epochs=2).fit(g, trained_small, [p for p, _ in links[:10]])
    for est in (gn, pg):
        cg, mask = est.explain_mask((s, t))
        assert isinstance(mask, EdgeMaskSet)
        assert mask.flat(cg).shape == (cg.num_edges,)
        assert len(est.transform([(s, t)])) == 1
    assert gn.get_params()["max_iter"] == 10
