import numpy as np
import pytest

from giugan.autodiff import Tensor, grad_check
from giugan.config import RunConfig
from giugan.gan import (
    LayerSpec,
    ModelSpec,
    NumericError,
    build_model,
    check_finite,
    critic_loss,
    default_discriminator_spec,
    default_generator_spec,
    generator_loss,
    gradient_penalty,
    interpolate,
    make_optimizer,
    wgan_gp_losses,
)
from giugan.gan import train as train_mod
from giugan.gan.train import read_csv, train
from giugan.nn import Linear, Module


def names(net):
    return {n for n, _ in net.named_parameters()}


class FirstCoord(Module):
    def __init__(self, scale):
        super().__init__()
        self.scale = scale

    def forward(self, x):
        return x[:, 0:1] * self.scale


class Constant(Module):
    def forward(self, x):
        return x[:, 0:1] * 0.0 + 3.0


class MLP(Module):
    def __init__(self, w1, w2):
        super().__init__()
        self.fc1, self.fc2 = Linear(4, 3, bias=False), Linear(3, 1, bias=False)
        self.fc1.weight.data[...] = w1
        self.fc2.weight.data[...] = w2

    def forward(self, x):
        from giugan.autodiff import leaky_relu

        return self.fc2(leaky_relu(self.fc1(x), 0.1))


class TestModels:
    def test_cifar_scale_shapes(self, rng):
        G = build_model(default_generator_spec(32, 8), rng)
        D = build_model(default_discriminator_spec(32, 8), rng)
        x = G(Tensor(rng.standard_normal((2, 64))))
        assert x.shape == (2, 3, 32, 32)
        assert np.all(np.abs(x.data) <= 1)
        scores = D(x)
        assert scores.shape == (2, 1)
        assert np.any(np.abs(scores.data) > 0)

    @pytest.mark.parametrize("size", [8, 16])
    def test_giu_ablation_parameter_sets(self, size):
        for full_spec, ablated_spec in (
            (default_generator_spec(size), default_generator_spec(size, giu_on=False)),
            (default_discriminator_spec(size), default_discriminator_spec(size, giu_on=False)),
        ):
            full, abl = names(build_model(full_spec)), names(build_model(ablated_spec))
            assert abl < full
            diff = full - abl
            assert diff and all(n.startswith("giu.giu.") for n in diff)
            assert {n for n in full if ".giu." in n or n.startswith("giu.")} == diff

    def test_rbn_ablation_parameter_sets(self):
        full = names(build_model(default_generator_spec(16)))
        abl = names(build_model(default_generator_spec(16, rbn_on=False)))
        diff = full - abl
        assert abl < full
        assert {n.rsplit(".", 1)[1] for n in diff} == {"w_m", "w_v", "w_b"}
        assert {n.split(".")[0] for n in diff} == {"fc", "up2"}

    def test_discriminator_has_no_batch_norm(self):
        spec = default_discriminator_spec(8)
        assert all(l.norm == "none" for l in spec.layers)
        spec.layers[1].norm = "bn"
        with pytest.raises(ValueError):
            build_model(spec)

    def test_generator_must_end_in_tanh(self):
        spec = default_generator_spec(8)
        spec.layers[-1].activation = "none"
        with pytest.raises(ValueError):
            build_model(spec)

    def test_giu_only_where_flagged(self):
        spec = default_generator_spec(16)
        net = build_model(spec)
        flagged = {l.name for l in spec.layers if l.kind == "giu"}
        holders = {n.split(".")[0] for n in names(net) if ".giu." in n}
        assert holders == flagged == {"giu"}

    def test_spec_roundtrip(self):
        spec = default_generator_spec(16, 4, rbn_on=False)
        assert ModelSpec.from_dict(spec.to_dict()) == spec

    def test_unknown_layer_kind(self):
        spec = ModelSpec("discriminator", [LayerSpec("x", "pool", 4)], 8)
        with pytest.raises(ValueError):
            spec.validate()

    def test_bad_image_size(self):
        with pytest.raises(ValueError):
            default_generator_spec(12)

    def test_spectral_norm_everywhere(self):
        D = build_model(default_discriminator_spec(8))
        weights = [n for n, _ in D.named_parameters() if n.endswith("weight")]
        assert len(D.spectral_norms()) == len(weights)


class TestPenalty:
    lam = 10.0

    def test_unit_slope_critic(self, rng):
        p = gradient_penalty(FirstCoord(1.0), rng.standard_normal((4, 3)), rng.standard_normal((4, 3)), self.lam, rng)
        assert p.item() == pytest.approx(0.0, abs=1e-15)

    def test_double_slope_critic(self, rng):
        p = gradient_penalty(FirstCoord(2.0), rng.standard_normal((4, 3)), rng.standard_normal((4, 3)), self.lam, rng)
        assert p.item() == pytest.approx(self.lam, abs=1e-12)

    def test_frozen_finite_difference_oracle(self, frozen):
        f = frozen["penalty"]
        D = MLP(f["w1"], f["w2"])
        x_hat = f["x_hat"]
        # eps = 1 puts the interpolate exactly on the "real" batch
        got = gradient_penalty(D, x_hat, np.zeros_like(x_hat), f["lam"], eps=np.ones((5, 1))).item()
        assert got == pytest.approx(f["out"], abs=1e-6)

    def test_parameter_gradient_second_order(self, rng):
        D = MLP(rng.standard_normal((3, 4)), rng.standard_normal((1, 3)))
        real, fake = rng.standard_normal((5, 4)), rng.standard_normal((5, 4))
        eps = rng.uniform(size=(5, 1))
        f = lambda *ps: gradient_penalty(D, real, fake, self.lam, eps=eps)  # noqa: E731
        assert grad_check(f, D.parameters(), tol=1e-3).passed

    def test_interpolate_per_sample(self):
        eps = np.array([[0.0], [1.0]])
        np.testing.assert_array_equal(interpolate(np.ones((2, 2)), np.zeros((2, 2)), eps), [[0, 0], [1, 1]])

    def test_shape_mismatch(self, rng):
        with pytest.raises(ValueError):
            gradient_penalty(FirstCoord(1.0), np.ones((2, 3)), np.ones((3, 3)))


class TestLosses:
    def test_constant_critic(self, rng):
        loss, penalty = critic_loss(Constant(), rng.standard_normal((4, 2)), rng.standard_normal((4, 2)), 10.0, rng)
        assert penalty.item() == 10.0 and loss.item() == pytest.approx(10.0)
        assert generator_loss(Constant(), Tensor(rng.standard_normal((4, 2)))).item() == -3.0

    def test_perfect_separation(self):
        real = np.array([[1.0, 5.0], [1.0, -2.0]])
        fake = np.array([[0.0, 1.0], [0.0, 3.0]])
        loss, penalty = critic_loss(FirstCoord(1.0), real, fake, 10.0, eps=np.array([[0.3], [0.6]]))
        assert penalty.item() == 0.0 and loss.item() == -1.0

    def test_matches_separate_passes(self, rng):
        D = build_model(default_discriminator_spec(8, 4), rng)
        G = build_model(default_generator_spec(8, 4), rng)
        D(Tensor(rng.standard_normal((2, 3, 8, 8))))
        D.eval(), G.eval()  # freeze power iteration so repeated calls agree
        real, z = rng.uniform(-1, 1, (3, 3, 8, 8)), rng.standard_normal((3, 64))
        eps = rng.uniform(size=(3, 1, 1, 1))
        loss_d, loss_g = wgan_gp_losses(D, G, real, z, 10.0, eps=eps)
        fake = G(Tensor(z))
        manual_d = D(fake.detach()).mean() - D(Tensor(real)).mean() + gradient_penalty(D, real, fake.data, 10.0, eps=eps)
        assert loss_d.item() == pytest.approx(manual_d.item(), rel=1e-12, abs=1e-12)
        assert loss_g.item() == pytest.approx(-D(fake).mean().item(), rel=1e-12)

    def test_nan_detected(self):
        with pytest.raises(NumericError):
            check_finite(loss=Tensor([np.nan]))

    def test_critic_step_descends(self, rng):
        spec = default_discriminator_spec(8, 4, spectral_norm=False)
        D = build_model(spec, rng)
        for p in D.parameters():
            p.data += rng.standard_normal(p.shape) * 0.3
        real, fake = rng.uniform(-1, 1, (8, 3, 8, 8)), rng.uniform(-1, 1, (8, 3, 8, 8))
        before, _ = critic_loss(D, real, fake, 0.0, eps=np.full((8, 1, 1, 1), 0.5))
        opt = make_optimizer("adam", D.parameters(), 1e-5)
        before.backward()
        opt.step()
        after, _ = critic_loss(D, real, fake, 0.0, eps=np.full((8, 1, 1, 1), 0.5))
        assert after.item() < before.item()


class TestTraining:
    def cfg(self, tmp_path, **kw):
        base = dict(iters=12, synth_n=256, width=4, log_every=5, out_dir=str(tmp_path / "run"))
        base.update(kw)
        return RunConfig(**base)

    @pytest.mark.filterwarnings("ignore:proxy extractor accuracy")
    def test_outputs_and_finite_losses(self, tmp_path):
        cfg = self.cfg(tmp_path, ckpt_every=5, sample_every=5, eval_every=6, eval_samples=40, proxy_epochs=1)
        res = train(cfg)
        rows = read_csv(res.run_dir / "metrics.csv")
        assert len(rows) == 12 and list(rows[0]) == list(train_mod.CSV_COLUMNS)
        for r in rows:
            assert all(np.isfinite(float(r[k])) for k in ("loss_d", "loss_g", "penalty"))
        assert rows[5]["fid"] and not rows[4]["fid"]
        ckpts = sorted(p.name for p in (res.run_dir / "checkpoints").iterdir())
        assert ckpts == ["final.giuc", "iter_0000005.giuc", "iter_0000010.giuc"]
        assert (res.run_dir / "samples" / "final.ppm").exists()
        log = (res.run_dir / "train.log").read_text()
        assert "sigma G.fc.op=" in log and "D.score.op=" in log

    def test_bit_identical_replay(self, tmp_path):
        a = train(self.cfg(tmp_path / "a"))
        b = train(self.cfg(tmp_path / "b"))
        assert (a.run_dir / "metrics.csv").read_bytes() == (b.run_dir / "metrics.csv").read_bytes()

    def test_seed_changes_losses(self, tmp_path):
        a = train(self.cfg(tmp_path / "a", iters=3))
        b = train(self.cfg(tmp_path / "b", iters=3, seed=1))
        assert a.rows[0]["loss_d"] != b.rows[0]["loss_d"]

    def test_ttur_changes_only_learning_rates(self, tmp_path):
        res = train(self.cfg(tmp_path, iters=1, ttur=True))
        assert res.effective_lr == (1e-4, 4e-4)
        assert "lr_G=0.0001 lr_D=0.0004" in (res.run_dir / "train.log").read_text()
        plain = RunConfig(ttur=True)
        assert plain.replace(ttur=False, lr_g=1e-4, lr_d=4e-4).effective_lrs() == plain.effective_lrs()

    def test_n_critic(self, tmp_path):
        res = train(self.cfg(tmp_path, iters=2, n_critic=3))
        assert len(res.rows) == 2

    def test_nan_writes_crash_checkpoint(self, tmp_path, monkeypatch):
        monkeypatch.setattr(train_mod, "generator_loss", lambda D, fake: fake.mean() * float("nan"))
        with pytest.raises(NumericError):
            train(self.cfg(tmp_path))
        assert (tmp_path / "run" / "checkpoints" / "crash.giuc").exists()

    def test_checkpoint_restores_generator(self, tmp_path, rng):
        res = train(self.cfg(tmp_path, iters=2))
        G, D, cfg, manifest = train_mod.load_run_checkpoint(res.final_checkpoint)
        z = rng.standard_normal((3, cfg.latent_dim))
        np.testing.assert_array_equal(train_mod.generate(G, z), train_mod.generate(res.G, z))
        assert manifest["iteration"] == 2
