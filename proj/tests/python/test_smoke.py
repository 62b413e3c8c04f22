# Copyright 2026 The fkinterp Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import math

import numpy as np
import pytest

import fkinterp


def test_config_presets_round_trip():
    for cfg in (fkinterp.NetConfig.defaults(), fkinterp.NetConfig.toy(), fkinterp.NetConfig.tiny()):
        cfg.validate()
        assert fkinterp.NetConfig.from_json(cfg.to_json()) == cfg
    assert fkinterp.NetConfig.defaults().kernel_lengths == [13, 25, 51]


def test_invalid_config_raises():
    cfg = fkinterp.NetConfig.tiny()
    cfg.widths = [2]
    with pytest.raises(fkinterp.DomainError):
        cfg.validate()


def test_losses_match_numpy_oracle():
    rng = np.random.default_rng(3)
    a = rng.uniform(0, 255, (16, 24))
    b = rng.uniform(0, 255, (16, 24))
    assert fkinterp.l1_loss(a, b) == pytest.approx(np.abs(a - b).sum(), rel=1e-12)

    h = np.array([[1]])
    while h.shape[0] < 8:
        h = np.block([[h, h], [h, -h]])
    expected = 0.0
    d = a - b
    for y in range(0, 16, 8):
        for x in range(0, 24, 8):
            expected += np.abs(h @ d[y:y + 8, x:x + 8] @ h.T).sum()
    assert fkinterp.satd_loss(a, b) == pytest.approx(expected, rel=1e-12)


def test_quant_step_doubles_every_six():
    for qp in range(0, 46):
        assert fkinterp.quant_step(qp + 6) == pytest.approx(2 * fkinterp.quant_step(qp))


def test_degrade_grows_with_qp():
    left, _, _ = fkinterp.synthesize_clip(5, "deform", 64)
    err = [np.abs(fkinterp.degrade(left, qp) - left).mean() for qp in (10, 30, 50)]
    assert err[0] < err[1] < err[2]


def test_interpolate_shapes_and_weights(tmp_path):
    net = fkinterp.InterpNet(fkinterp.NetConfig.tiny(), seed=11)
    left, mid, right = fkinterp.synthesize_clip(2, "rotate", 40)
    assert left.shape == mid.shape == right.shape == (40, 40)
    out = net.interpolate(left, right[:, :], 29, 40)
    assert out["frame"].shape == (40, 40)
    assert out["half"].shape == (20, 20)
    assert out["quarter"].shape == (10, 10)
    assert out["weights"].shape == (2, 40, 40)
    assert np.allclose(out["contributions"].sum(axis=0), out["frame"])

    path = tmp_path / "net.fkc"
    net.save(path)
    again = fkinterp.InterpNet.load(path)
    assert again.config == net.config
    assert again.parameter_count == net.parameter_count
    np.testing.assert_array_equal(again.interpolate(left, right, 29, 40)["frame"], out["frame"])


def test_interpolate_rejects_bad_input(tmp_path):
    net = fkinterp.InterpNet(fkinterp.NetConfig.tiny(), seed=1)
    with pytest.raises(fkinterp.ShapeError):
        net.interpolate(np.zeros((8, 8)), np.zeros((9, 8)), 30, 30)
    with pytest.raises(fkinterp.DomainError):
        net.interpolate(np.zeros((8, 8)), np.zeros((8, 8)), 30, 60)
    with pytest.raises(ValueError):
        net.interpolate(np.zeros((2, 8, 8)), np.zeros((8, 8)), 30, 30)
    (tmp_path / "bad.fkc").write_bytes(b"not a checkpoint")
    with pytest.raises((fkinterp.CheckpointError, fkinterp.IoError)):
        fkinterp.InterpNet.load(tmp_path / "bad.fkc")


def test_bd_rate():
    anchor = [(100, 30.0), (180, 33.0), (330, 36.2), (610, 39.1)]
    assert fkinterp.bd_rate(anchor, anchor) == pytest.approx(0.0, abs=1e-9)
    cheaper = [(r * 0.8, p) for r, p in anchor]
    assert fkinterp.bd_rate(anchor, cheaper) == pytest.approx(-20.0, abs=1e-6)
    with pytest.raises(fkinterp.DomainError):
        fkinterp.bd_rate(anchor[:3], anchor[:3])


def test_simulate_baseline_and_pc():
    frames = [np.full((32, 32), 100.0 + 2 * i) for i in range(17)]
    base = fkinterp.simulate(frames, qps=[27, 32, 37, 42])
    assert [p["qp"] for p in base] == [27, 32, 37, 42]
    assert all(p["pc_ratio"] == 0 for p in base)
    rates = [p["rate"] for p in base]
    assert rates == sorted(rates, reverse=True)
    assert all(math.isfinite(p["psnr"]) for p in base)

    net = fkinterp.InterpNet(fkinterp.NetConfig.tiny(), seed=4)
    with_pc = fkinterp.simulate(frames, qps=[27, 32, 37, 42], model=net)
    assert len(with_pc) == 4
    with pytest.raises(fkinterp.DomainError):
        fkinterp.simulate(frames[:5])


def test_verify_and_fault_injection():
    clean = fkinterp.verify()
    assert all(r["passed"] for r in clean), clean
    faulty = {r["name"]: r["passed"] for r in fkinterp.verify(skip_rank2=True)}
    assert not faulty["factorization.rank3_equivalence"]
