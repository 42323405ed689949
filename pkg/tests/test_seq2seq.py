import dataclasses

import numpy as np
import pytest

from motionseq import baselines, dataio, grunet, seq2seq
from motionseq.config import ModelConfig
from motionseq.errors import ConfigError, InvalidInputError, NumericError
from motionseq.synthetic import make_sinusoid_split


def tiny_params(rng, d_in=6, hidden=5, n_out=6):
    return grunet.init_params(rng, d_in, hidden, n_out)


def tiny_config(**overrides):
    base = dict(n_joint_dims=6, hidden=5, actions=("sinusoid",), t_in=8,
                t_out=3, lr=0.05, batch_size=4, iterations=3, seed=0)
    base.update(overrides)
    return ModelConfig(**base)


def tiny_split(n_dims=6, n_frames=60, n_train=3, n_test=2, seed=0):
    return make_sinusoid_split(seed=seed, n_train=n_train, n_test=n_test,
                               n_frames=n_frames, n_dims=n_dims)


class TestEncode:
    def test_single_step_zero_params_gives_zero_state(self):
        shapes = grunet.expected_shapes(3, 4, 3)
        params = grunet.GruParams(**{n: np.zeros(s) for n, s in shapes.items()})
        h, _ = seq2seq.encode(np.ones((2, 1, 3)), params)
        np.testing.assert_array_equal(h, np.zeros((2, 4)))

    def test_deterministic(self):
        rng = np.random.default_rng(0)
        params = tiny_params(rng)
        seed = rng.normal(size=(2, 4, 6))
        h1, _ = seq2seq.encode(seed, params)
        h2, _ = seq2seq.encode(seed.copy(), params)
        np.testing.assert_array_equal(h1, h2)

    def test_matches_hand_unrolled_cells(self):
        rng = np.random.default_rng(1)
        params = tiny_params(rng)
        seed = rng.normal(size=(2, 2, 6))
        h0 = np.zeros((2, 5))
        h1 = grunet.gru_cell(seed[:, 0, :], h0, params)
        h2 = grunet.gru_cell(seed[:, 1, :], h1, params)
        h, _ = seq2seq.encode(seed, params)
        np.testing.assert_array_equal(h, h2)


class TestDecode:
    def test_zeroed_readout_with_residual_repeats_last_frame(self):
        rng = np.random.default_rng(2)
        params = tiny_params(rng)
        params.W_out[:] = 0.0
        params.b_out[:] = 0.0
        last = rng.normal(size=(3, 6))
        preds, _, _ = seq2seq.decode(np.zeros((3, 5)), last, None, 4, params,
                                     residual=True)
        for t in range(4):
            np.testing.assert_array_equal(preds[:, t, :], last)

    def test_constant_bias_without_residual(self):
        rng = np.random.default_rng(3)
        params = tiny_params(rng)
        params.W_out[:] = 0.0
        params.b_out[:] = 1.25
        preds, _, _ = seq2seq.decode(np.zeros((2, 5)),
                                     rng.normal(size=(2, 6)), None, 3, params,
                                     residual=False)
        np.testing.assert_array_equal(preds, np.full((2, 3, 6), 1.25))

    def test_matches_hand_unrolled_two_steps_with_feedback(self):
        rng = np.random.default_rng(4)
        params = tiny_params(rng)
        h0 = rng.normal(size=(2, 5))
        last = rng.normal(size=(2, 6))
        # manual unroll, feeding the first prediction into the second step
        h1 = grunet.gru_cell(last, h0, params)
        p1 = last + grunet.output_decoder(h1, params)
        h2 = grunet.gru_cell(p1, h1, params)
        p2 = p1 + grunet.output_decoder(h2, params)
        preds, _, _ = seq2seq.decode(h0, last, None, 2, params, residual=True,
                                     sample_feedback=True)
        np.testing.assert_array_equal(preds[:, 0, :], p1)
        np.testing.assert_array_equal(preds[:, 1, :], p2)

    def test_onehot_is_appended_to_every_decoder_input(self):
        rng = np.random.default_rng(5)
        params = tiny_params(rng, d_in=6 + 2, hidden=5, n_out=6)
        h0 = rng.normal(size=(1, 5))
        last = rng.normal(size=(1, 6))
        onehot = np.array([[0.0, 1.0]])
        h1 = grunet.gru_cell(np.hstack([last, onehot]), h0, params)
        p1 = last + grunet.output_decoder(h1, params)
        h2 = grunet.gru_cell(np.hstack([p1, onehot]), h1, params)
        p2 = p1 + grunet.output_decoder(h2, params)
        preds, _, _ = seq2seq.decode(h0, last, onehot, 2, params,
                                     residual=True)
        np.testing.assert_array_equal(preds[:, 1, :], p2)

    def test_teacher_forcing_requires_targets(self):
        params = tiny_params(np.random.default_rng(6))
        with pytest.raises(InvalidInputError):
            seq2seq.decode(np.zeros((1, 5)), np.zeros((1, 6)), None, 2, params,
                           sample_feedback=False)


class TestLoss:
    def test_zero_when_equal(self):
        pred = np.random.default_rng(7).normal(size=(2, 3, 4))
        assert seq2seq.mse_loss(pred, pred.copy()) == 0.0

    def test_constant_offset(self):
        rng = np.random.default_rng(8)
        target = rng.normal(size=(2, 3, 4))
        delta = 0.35
        assert abs(seq2seq.mse_loss(target + delta, target) - delta ** 2) < 1e-15

    def test_random_case_matches_hand_computation(self):
        rng = np.random.default_rng(9)
        pred = rng.normal(size=(1, 2, 3))
        target = rng.normal(size=(1, 2, 3))
        acc = 0.0
        for t in range(2):
            for d in range(3):
                acc += (pred[0, t, d] - target[0, t, d]) ** 2
        np.testing.assert_allclose(seq2seq.mse_loss(pred, target), acc / 6.0,
                                   rtol=1e-15)

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            seq2seq.mse_loss(np.zeros((1, 2, 3)), np.zeros((1, 2, 4)))


class TestModes:
    def test_sampling_and_teacher_share_first_prediction(self):
        rng = np.random.default_rng(10)
        params = tiny_params(rng)
        h0 = rng.normal(size=(2, 5))
        last = rng.normal(size=(2, 6))
        targets = rng.normal(size=(2, 4, 6))
        sampled, _, _ = seq2seq.decode(h0, last, None, 4, params,
                                       residual=True, sample_feedback=True)
        forced, _, _ = seq2seq.decode(h0, last, None, 4, params,
                                      residual=True, sample_feedback=False,
                                      teacher_frames=targets)
        np.testing.assert_array_equal(sampled[:, 0, :], forced[:, 0, :])
        assert np.max(np.abs(sampled[:, 1:, :] - forced[:, 1:, :])) > 0.0

    def test_zero_velocity_equivalence(self):
        # residual model with a zeroed readout behaves as the constant-pose
        # baseline, bit for bit, whatever the parameter seed
        for seed in (0, 1, 2):
            rng = np.random.default_rng(seed)
            split = tiny_split(seed=seed)
            stats = dataio.compute_normalization(split.train)
            cfg = tiny_config()
            params = grunet.init_params(rng, cfg.d_in, cfg.hidden,
                                        cfg.n_joint_dims)
            params.W_out[:] = 0.0
            params.b_out[:] = 0.0
            model = seq2seq.TrainedModel(params, params, cfg, stats)
            zero_vel = baselines.as_predictor("zero-velocity", stats,
                                              cfg.t_out)
            tasks = dataio.select_test_clips(rng, split, stats, cfg,
                                             actions=["sinusoid"],
                                             clips_per_action=2)
            for task in tasks["sinusoid"]:
                np.testing.assert_array_equal(seq2seq.predict(model, task),
                                              zero_vel(task))


class TestTrain:
    def test_zero_iterations_returns_initial_params(self):
        split = tiny_split()
        stats = dataio.compute_normalization(split.train)
        cfg = tiny_config(iterations=0, seed=21)
        model = seq2seq.train(cfg, split, stats)
        assert model.loss_curve.size == 0
        expected = grunet.init_params(np.random.default_rng(21), cfg.d_in,
                                      cfg.hidden, cfg.n_joint_dims)
        for name, arr in model.encoder.tensors().items():
            np.testing.assert_array_equal(arr, expected.tensors()[name])

    def test_training_is_deterministic_in_the_seed(self):
        split = tiny_split()
        stats = dataio.compute_normalization(split.train)
        cfg = tiny_config(iterations=4, seed=5)
        a = seq2seq.train(cfg, split, stats)
        b = seq2seq.train(cfg, split, stats)
        np.testing.assert_array_equal(a.loss_curve, b.loss_curve)
        for name, arr in a.encoder.tensors().items():
            np.testing.assert_array_equal(arr, b.encoder.tensors()[name])

    def test_tied_training_shares_one_parameter_set(self):
        split = tiny_split()
        stats = dataio.compute_normalization(split.train)
        model = seq2seq.train(tiny_config(iterations=2), split, stats)
        assert model.decoder is model.encoder

    def test_untied_training_keeps_two_sets(self):
        split = tiny_split()
        stats = dataio.compute_normalization(split.train)
        model = seq2seq.train(tiny_config(iterations=2, tied=False), split,
                              stats)
        assert model.decoder is not model.encoder
        diff = np.max(np.abs(model.decoder.W_z - model.encoder.W_z))
        assert diff > 0.0

    def test_tied_update_moves_encode_and_decode_together(self):
        split = tiny_split()
        stats = dataio.compute_normalization(split.train)
        cfg = tiny_config(iterations=1)
        model = seq2seq.train(cfg, split, stats)
        for name, arr in model.encoder.tensors().items():
            assert np.shares_memory(arr, model.decoder.tensors()[name])

    def test_loss_decreases_on_easy_data(self):
        split = tiny_split(n_frames=120, n_train=6)
        stats = dataio.compute_normalization(split.train)
        cfg = tiny_config(iterations=150, hidden=12, seed=3)
        model = seq2seq.train(cfg, split, stats)
        assert model.loss_curve[-10:].mean() < model.loss_curve[0]

    @pytest.mark.filterwarnings("ignore:overflow")
    def test_non_finite_loss_names_the_iteration(self):
        split = tiny_split()
        stats = dataio.compute_normalization(split.train)
        cfg = tiny_config(iterations=2)
        params = grunet.init_params(np.random.default_rng(0), cfg.d_in,
                                    cfg.hidden, cfg.n_joint_dims)
        params.W_out[:] = 1e200  # finite forward, infinite squared error
        with pytest.raises(NumericError, match="iteration 0"):
            seq2seq.train(cfg, split, stats, initial=(params, params))

    def test_stats_width_mismatch_rejected(self):
        split = tiny_split()
        stats = dataio.compute_normalization(split.train)
        with pytest.raises(ConfigError):
            seq2seq.train(tiny_config(n_joint_dims=7), split, stats)


class TestBackwardExamples:
    def test_gradients_vanish_when_prediction_equals_target(self):
        rng = np.random.default_rng(12)
        params = tiny_params(rng)
        enc_in = rng.normal(size=(2, 4, 6))
        # run once to obtain predictions, then use them as the target
        _, graph = seq2seq.forward(params, params, enc_in,
                                   np.zeros((2, 3, 6)), None)
        _, graph = seq2seq.forward(params, params, enc_in, graph.preds, None)
        for _, grads in seq2seq.backward(graph):
            for arr in grads.values():
                assert not arr.any()

    def test_readout_gradient_has_outer_product_structure(self):
        # single step, no residual: d(loss)/d(W_out) = h^T (2 (pred - y) / n)
        rng = np.random.default_rng(13)
        params = tiny_params(rng)
        enc_in = rng.normal(size=(2, 3, 6))
        targets = rng.normal(size=(2, 1, 6))
        _, graph = seq2seq.forward(params, params, enc_in, targets, None,
                                   residual=False)
        grads = seq2seq.backward(graph)[0][1]
        h = graph.dec_hs[0]
        dpred = 2.0 * (graph.preds[:, 0, :] - targets[:, 0, :]) / targets.size
        np.testing.assert_allclose(grads["W_out"], h.T @ dpred, rtol=1e-12)
        np.testing.assert_allclose(grads["b_out"], dpred.sum(axis=0),
                                   rtol=1e-12)

    def test_detached_feedback_drops_the_carry_paths(self):
        rng = np.random.default_rng(14)
        params = tiny_params(rng)
        enc_in = rng.normal(size=(2, 3, 6))
        targets = rng.normal(size=(2, 3, 6))
        _, g_full = seq2seq.forward(params, params, enc_in, targets, None)
        _, g_detached = seq2seq.forward(params, params, enc_in, targets, None,
                                        detach_feedback=True)
        full = seq2seq.backward(g_full)[0][1]
        detached = seq2seq.backward(g_detached)[0][1]
        assert np.max(np.abs(full["W_z"] - detached["W_z"])) > 0.0


class TestPredict:
    def make_model(self, supervised=False, seed=15):
        rng = np.random.default_rng(seed)
        split = tiny_split(seed=seed)
        stats = dataio.compute_normalization(split.train)
        cfg = tiny_config(supervised=supervised)
        params = grunet.init_params(rng, cfg.d_in, cfg.hidden,
                                    cfg.n_joint_dims)
        model = seq2seq.TrainedModel(params, params, cfg, stats)
        rng2 = np.random.default_rng(seed + 1)
        tasks = dataio.select_test_clips(rng2, split, stats, cfg,
                                         actions=["sinusoid"],
                                         clips_per_action=1)
        return model, tasks["sinusoid"][0], stats

    def test_supervised_model_requires_onehot(self):
        model, task, _ = self.make_model(supervised=False)
        supervised_cfg = tiny_config(supervised=True)
        params = grunet.init_params(np.random.default_rng(0),
                                    supervised_cfg.d_in, supervised_cfg.hidden,
                                    supervised_cfg.n_joint_dims)
        supervised = seq2seq.TrainedModel(params, params, supervised_cfg,
                                          model.stats)
        with pytest.raises(ConfigError):
            seq2seq.predict(supervised, task)

    def test_unconditioned_model_rejects_onehot_task(self):
        model, task, _ = self.make_model()
        widened = dataio.append_action_onehot(task, 0, num_actions=1)
        with pytest.raises(ConfigError):
            seq2seq.predict(model, widened)

    def test_matches_decode_plus_denormalize(self):
        model, task, stats = self.make_model()
        h, _ = seq2seq.encode(task.seed[None], model.encoder)
        preds, _, _ = seq2seq.decode(h, task.seed[None, -1, :6], None,
                                     model.config.t_out, model.decoder,
                                     residual=True, sample_feedback=True)
        expected = dataio.denormalize(preds[0], stats)
        np.testing.assert_array_equal(seq2seq.predict(model, task), expected)

    def test_zeroed_readout_predicts_last_frame_denormalized(self):
        model, task, stats = self.make_model()
        model.decoder.W_out[:] = 0.0
        model.decoder.b_out[:] = 0.0
        out = seq2seq.predict(model, task)
        expected = dataio.denormalize(
            np.tile(task.seed[-1, :6], (model.config.t_out, 1)), stats)
        np.testing.assert_array_equal(out, expected)


class TestCheckpoint:
    def roundtrip(self, tmp_path, tied=True):
        split = tiny_split()
        stats = dataio.compute_normalization(split.train)
        cfg = tiny_config(iterations=2, tied=tied)
        model = seq2seq.train(cfg, split, stats)
        path = tmp_path / "model.ckpt"
        seq2seq.save_model(path, model)
        return model, seq2seq.load_model(path), split, stats

    def test_round_trip_tied(self, tmp_path):
        model, back, split, stats = self.roundtrip(tmp_path, tied=True)
        assert back.decoder is back.encoder
        for name, arr in model.encoder.tensors().items():
            np.testing.assert_array_equal(arr, back.encoder.tensors()[name])
        np.testing.assert_array_equal(model.loss_curve, back.loss_curve)
        assert back.config == model.config
        np.testing.assert_array_equal(back.stats.mean, model.stats.mean)

    def test_round_trip_untied(self, tmp_path):
        model, back, _, _ = self.roundtrip(tmp_path, tied=False)
        assert back.decoder is not back.encoder
        np.testing.assert_array_equal(model.decoder.W_z, back.decoder.W_z)

    def test_loaded_model_predicts_identically(self, tmp_path):
        model, back, split, stats = self.roundtrip(tmp_path)
        rng = np.random.default_rng(1)
        tasks = dataio.select_test_clips(rng, split, stats, model.config,
                                         actions=["sinusoid"],
                                         clips_per_action=1)
        task = tasks["sinusoid"][0]
        np.testing.assert_array_equal(seq2seq.predict(model, task),
                                      seq2seq.predict(back, task))

    def test_shape_mismatch_rejected(self, tmp_path):
        from motionseq import numkernel

        split = tiny_split()
        stats = dataio.compute_normalization(split.train)
        cfg = tiny_config()
        model = seq2seq.train(dataclasses.replace(cfg, iterations=0), split,
                              stats)
        path = tmp_path / "bad.ckpt"
        tensors = dict(model.encoder.tensors())
        tensors["W_z"] = np.zeros((2, 2))  # wrong shape for the config
        tensors["stats/mean"] = stats.mean
        tensors["stats/std"] = stats.std
        tensors["stats/used_dims"] = stats.used_dims.astype(float)
        numkernel.save_tensors(path, tensors,
                               {"config": numkernel.meta_json(cfg.to_dict())})
        with pytest.raises(ConfigError, match="shape"):
            seq2seq.load_model(path)
