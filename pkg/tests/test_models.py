"""Design-table, wiring, weight-regime, and gradient-flow contracts for the
six model designs."""

import numpy as np
import pytest

from funnellab import autodiff as ad
from funnellab import funnel as fd
from funnellab import models as md
from funnellab import training as tr


NET = md.NetworkConfig(dense_input_dim=4, n_categorical=2, vocab_size=10,
                       embedding_dim=3, shared_layer_dims=(8, 6),
                       head_layer_dims=(4, 4))


def _batch(n=16, seed=0):
    rng = np.random.default_rng(seed)
    dense = rng.standard_normal((n, NET.dense_input_dim))
    cats = rng.integers(0, NET.vocab_size, (n, NET.n_categorical))
    return dense, cats


class TestCharacteristicsTable:
    def test_flag_table_matches_design_checklist(self):
        expected = {
            "IP": (False, False, False),
            "ESMM": (True, True, True),
            "ESMM-NS": (False, True, True),
            "ESSP-Split": (True, True, False),
            "IPSP": (True, False, False),
            "ESP": (False, True, False),
        }
        assert set(md.MODEL_TABLE) == set(expected)
        for name, (shared, entire, weighted) in expected.items():
            c = md.MODEL_TABLE[name]
            assert (c.shared_params, c.entire_space, c.weighted_cvr) == (
                shared, entire, weighted)
            assert c.name == name


class TestBuild:
    def test_unknown_name_rejected(self):
        with pytest.raises(ValueError):
            md.build("ESMM2", NET, seed=0)

    def test_invalid_dims_rejected(self):
        with pytest.raises(ValueError):
            md.NetworkConfig(embedding_dim=0)
        with pytest.raises(ValueError):
            md.NetworkConfig(shared_layer_dims=(4,))

    def test_ipsp_count_within_5pct_of_esmm(self):
        ipsp = md.build("IPSP", NET, seed=0).parameter_count()
        esmm = md.build("ESMM", NET, seed=0).parameter_count()
        assert abs(ipsp - esmm) / esmm < 0.05

    def test_ip_is_twice_esp_with_same_tower_dims(self):
        ip = md.build("IP", NET, seed=0).parameter_count()
        esp = md.build("ESP", NET, seed=0).parameter_count()
        assert ip == 2 * esp

    def test_single_graph_parity_at_default_config(self):
        default = md.NetworkConfig()
        counts = [md.build(name, default, seed=0).parameter_count()
                  for name in ("ESMM", "ESSP-Split", "IPSP", "ESP")]
        assert max(counts) / min(counts) < 1.05

    def test_dual_tower_designs_about_twice_single_graph(self):
        default = md.NetworkConfig()
        ip = md.build("IP", default, seed=0).parameter_count()
        esmm = md.build("ESMM", default, seed=0).parameter_count()
        assert 1.8 < ip / esmm < 2.1

    def test_esp_has_no_ctr_head(self):
        model = md.build("ESP", NET, seed=0)
        dense, cats = _batch(4)
        with pytest.raises(ValueError, match="no CTR head"):
            model.predict_ctr(dense, cats)

    def test_conditional_head_exposure(self):
        dense, cats = _batch(4)
        for name in ("IP", "IPSP", "ESMM", "ESMM-NS"):
            model = md.build(name, NET, seed=1)
            cvr = model.predict_cvr_given_click(dense, cats)
            assert np.all((cvr > 0) & (cvr < 1))
        for name in ("ESSP-Split", "ESP"):
            with pytest.raises(ValueError):
                md.build(name, NET, seed=1).predict_cvr_given_click(dense, cats)


def _zero_output_layers(model):
    for head in model._heads.values():
        head.out.weights.value[...] = 0.0
        head.out.biases.value[...] = 0.0


class TestPredictions:
    def test_esmm_joint_bounded_by_ctr(self):
        model = md.build("ESMM", NET, seed=2)
        dense, cats = _batch(64, seed=5)
        out = model.predict_all(dense, cats)
        assert np.all(out["joint"] <= out["ctr"])

    def test_ip_zero_final_layers_joint_quarter(self):
        model = md.build("IP", NET, seed=3)
        _zero_output_layers(model)
        dense, cats = _batch(8)
        np.testing.assert_allclose(model.predict_joint(dense, cats), 0.25)

    def test_esmm_zero_final_layers_ctr_half(self):
        model = md.build("ESMM", NET, seed=3)
        _zero_output_layers(model)
        dense, cats = _batch(8)
        np.testing.assert_allclose(model.predict_ctr(dense, cats), 0.5)

    def test_product_designs_joint_is_exact_product(self):
        dense, cats = _batch(32, seed=9)
        for name in ("IP", "IPSP", "ESMM", "ESMM-NS"):
            model = md.build(name, NET, seed=4)
            out = model.predict_all(dense, cats)
            np.testing.assert_array_equal(out["joint"], out["ctr"] * out["cvr"])

    def test_essp_heads_unconstrained(self):
        model = md.build("ESSP-Split", NET, seed=4)
        dense, cats = _batch(8)
        out = model.predict_all(dense, cats)
        assert set(out) == {"ctr", "joint"}

    def test_ip_ctr_tower_matches_standalone_single_tower(self):
        """Tower init order: the click-side tower of a dual-tower design is
        draw-for-draw identical to a standalone single tower (same seed)."""
        ip = md.build("IP", NET, seed=7)
        esp = md.build("ESP", NET, seed=7)
        dense, cats = _batch(16, seed=8)
        np.testing.assert_array_equal(ip.predict_ctr(dense, cats),
                                      esp.predict_joint(dense, cats))

    def test_single_vector_prediction(self):
        model = md.build("ESMM", NET, seed=5)
        dense, cats = _batch(3, seed=6)
        batched = model.predict_joint(dense, cats)
        single = model.predict_joint(dense[1], cats[1])
        assert single == pytest.approx(batched[1], rel=1e-14)
        assert isinstance(single, float)

    def test_same_seed_same_predictions(self):
        dense, cats = _batch(4)
        a = md.build("IPSP", NET, seed=11).predict_joint(dense, cats)
        b = md.build("IPSP", NET, seed=11).predict_joint(dense, cats)
        np.testing.assert_array_equal(a, b)


class TestLossWeights:
    def _example(self, click, weight):
        return fd.Example(np.zeros(4), np.zeros(2, dtype=int), click,
                          0, weight, 0)

    def test_ipsp_unclicked_gets_zero_cvr_weight(self):
        model = md.build("IPSP", NET, seed=0)
        assert model.loss_weights(self._example(0, 1.0)) == (1.0, 0.0)
        assert model.loss_weights(self._example(1, 1.0)) == (1.0, 1.0)

    def test_ip_same_regime_as_ipsp(self):
        model = md.build("IP", NET, seed=0)
        assert model.loss_weights(self._example(0, 10.0)) == (10.0, 0.0)

    def test_esmm_regime_scales_with_calibration_weight(self):
        for name in ("ESMM", "ESMM-NS", "ESSP-Split"):
            model = md.build(name, NET, seed=0)
            assert model.loss_weights(self._example(0, 10.0)) == (10.0, 10.0)
            assert model.loss_weights(self._example(1, 1.0)) == (1.0, 1.0)

    def test_esp_has_no_ctr_loss(self):
        model = md.build("ESP", NET, seed=0)
        assert model.loss_weights(self._example(1, 2.5)) == (0.0, 2.5)

    def test_cvr_loss_targets(self):
        # conditional designs attach the conversion loss to the conditional
        # head; entire-space designs attach it to the joint output
        assert md.build("IP", NET, 0).cvr_loss_key() == "cvr"
        assert md.build("IPSP", NET, 0).cvr_loss_key() == "cvr"
        for name in ("ESMM", "ESMM-NS", "ESSP-Split", "ESP"):
            assert md.build(name, NET, 0).cvr_loss_key() == "joint"


def _all_negative_datasets(n=64):
    rng = np.random.default_rng(0)
    dense = rng.standard_normal((n, NET.dense_input_dim))
    cats = rng.integers(0, NET.vocab_size, (n, NET.n_categorical))
    train = fd.Dataset(dense, cats, np.zeros(n, dtype=int), np.zeros(n, dtype=int),
                       np.ones(n), np.zeros(n, dtype=int), "fp", "all-negative")
    m = 8
    eval_click = np.array([1, 1, 0, 0, 1, 0, 0, 0])
    eval_conv = np.array([1, 0, 0, 0, 0, 0, 0, 0])
    evalds = fd.Dataset(rng.standard_normal((m, NET.dense_input_dim)),
                        rng.integers(0, NET.vocab_size, (m, NET.n_categorical)),
                        eval_click, eval_conv, np.ones(m), np.ones(m, dtype=int),
                        "fp", "eval")
    return train, evalds


class TestGradientGating:
    def test_ipsp_all_unclicked_batch_leaves_cvr_head_bit_identical(self):
        model = md.build("IPSP", NET, seed=13)
        train_ds, eval_ds = _all_negative_datasets()
        cvr_before = [p.value.copy() for p in model.head_exclusive_parameters("cvr")]
        trunk_before = [p.value.copy() for p in model._stacks["shared"].params()]
        tr.train(model, train_ds, eval_ds,
                 tr.TrainConfig(learning_rate=0.05, batch_size=64, epochs=1, seed=0))
        for before, param in zip(cvr_before, model.head_exclusive_parameters("cvr")):
            np.testing.assert_array_equal(before, param.value)
        changed = any(not np.array_equal(b, p.value)
                      for b, p in zip(trunk_before, model._stacks["shared"].params()))
        assert changed, "shared trunk should still move via the click loss"

    def test_esmm_joint_loss_reaches_ctr_branch(self):
        model = md.build("ESMM", NET, seed=14)
        rng = np.random.default_rng(3)
        dense, cats = _batch(16, seed=15)
        z = (rng.random(16) < 0.5).astype(float)
        tape = ad.Tape()
        out = model.forward_heads(tape, dense, cats)
        joint_loss = ad.weighted_bce(out["joint"], z, np.ones(16))
        tape.backward(joint_loss)
        ctr_grads = [p.grad for p in model.head_exclusive_parameters("ctr")]
        assert any(np.any(g != 0) for g in ctr_grads)

    def test_esmm_ns_gradient_routing(self):
        """The click tower is reached by both losses; the conversion tower
        only by the joint loss."""
        model = md.build("ESMM-NS", NET, seed=16)
        dense, cats = _batch(16, seed=17)
        y = np.array([1.0, 0.0] * 8)
        z = np.array([1.0] + [0.0] * 15)

        tape = ad.Tape()
        out = model.forward_heads(tape, dense, cats)
        tape.backward(ad.weighted_bce(out["ctr"], y, np.ones(16)))
        cvr_tower = model.tower_parameters("cvr")
        assert all(np.all(p.grad == 0) for p in cvr_tower), \
            "click loss must not reach the conversion tower"
        assert any(np.any(p.grad != 0) for p in model.tower_parameters("ctr"))

        tape = ad.Tape()
        out = model.forward_heads(tape, dense, cats)
        tape.backward(ad.weighted_bce(out["joint"], z, np.ones(16)))
        assert any(np.any(p.grad != 0) for p in cvr_tower)
        assert any(np.any(p.grad != 0) for p in model.tower_parameters("ctr")), \
            "joint loss flows through the product into the click tower"


class TestSaveLoad:
    @pytest.mark.parametrize("name", md.MODEL_NAMES)
    def test_round_trip_predictions_bit_exact(self, name, tmp_path):
        model = md.build(name, NET, seed=21)
        rng = np.random.default_rng(1)
        for p in model.parameters():
            p.value += rng.uniform(-0.5, 0.5, p.value.shape)
        path = tmp_path / f"{name}.model"
        model.save(path)
        loaded = md.Model.load(path)
        assert loaded.characteristics == model.characteristics
        dense, cats = _batch(12, seed=2)
        np.testing.assert_array_equal(loaded.predict_joint(dense, cats),
                                      model.predict_joint(dense, cats))

    def test_load_rejects_foreign_file(self, tmp_path):
        path = tmp_path / "bogus.model"
        path.write_text("not a model\n")
        with pytest.raises(ValueError):
            md.Model.load(path)
