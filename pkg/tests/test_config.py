from pathlib import Path

import pytest

from cafqa_vqe.config import ConfigError, from_mapping, load_config


@pytest.fixture
def ham(tmp_path):
    (tmp_path / "h.txt").write_text("2\n-0.5 ZI\n0.2 XX\n")
    return tmp_path


def write(dir_: Path, text: str) -> Path:
    path = dir_ / "run.yaml"
    path.write_text(text)
    return path


class TestLoadConfig:
    def test_defaults(self, ham):
        cfg = load_config(write(ham, 'hamiltonian_path: "h.txt"\n'))
        assert cfg.hamiltonian.n_qubits == 2
        assert cfg.inits == ("hf", "cafqa")
        assert cfg.shots == 300
        assert cfg.cafqa.max_evaluations == 1000
        assert cfg.spsa.calibration_pairs == 25 and cfg.spsa.run_budget == 400
        assert cfg.ansatz.rotation_axes == ("ry", "rz") and cfg.ansatz.n_layers == 2
        assert (cfg.noise.p1, cfg.noise.p2, cfg.noise.p_spam) == (0.003, 0.009, 0.0027)
        assert cfg.backend == "sim"

    def test_paths_relative_to_config(self, ham, monkeypatch, tmp_path):
        monkeypatch.chdir(tmp_path.parent)
        cfg = load_config(write(ham, 'hamiltonian_path: "h.txt"\noutput_dir: "res"\n'))
        assert cfg.hamiltonian_path == ham / "h.txt"
        assert cfg.output_dir == ham / "res"

    def test_full(self, ham):
        cfg = load_config(write(ham, "\n".join([
            'hamiltonian_path: "h.txt"', "ansatz.n_occupied: 1", "ansatz.n_layers: 1",
            'ansatz.rotation_axes: "ry"', 'ansatz.entangler: "1-0"', "ansatz.final_rotation: true",
            'init: "explicit,hf"', 'init_values: "0.1,0.2,0.3,0.4"', 'backend: "broker:/tmp/s"',
            "shots: 10", "seed: 9", "spsa.seed: 3", "noise.p2: 0.02", "record_wallclock: false", ""])))
        assert cfg.ansatz.entangler == ((1, 0),)
        assert cfg.init_values == (0.1, 0.2, 0.3, 0.4)
        assert cfg.inits == ("explicit", "hf")
        assert cfg.spsa.seed == 3 and cfg.cafqa.seed == 9
        assert cfg.noise.p2 == 0.02 and not cfg.record_wallclock

    def test_with_seed_overrides_all(self, ham):
        cfg = load_config(write(ham, 'hamiltonian_path: "h.txt"\nspsa.seed: 3\n')).with_seed(42)
        assert (cfg.seed, cfg.cafqa.seed, cfg.spsa.seed) == (42, 42, 42)

    @pytest.mark.parametrize("body", [
        "shots: 0",
        "shots: 1.5",
        "bogus.key: 1",
        'init: "random"',
        'init: "explicit"',
        'init: "explicit"\ninit_values: "0.1"',
        'backend: "gpu"',
        'backend: "broker:"',
        "ansatz.n_qubits: 3",
        'cafqa.strategy: "annealing"',
        "spsa.run_budget: 5",
        "noise.p1: 2.0",
        'ansatz.rotation_axes: "rq"',
    ])
    def test_rejected(self, ham, body):
        with pytest.raises(ConfigError):
            load_config(write(ham, 'hamiltonian_path: "h.txt"\n' + body + "\n"))

    def test_missing_hamiltonian_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(write(tmp_path, 'hamiltonian_path: "nope.txt"\n'))

    def test_missing_hamiltonian_key(self, tmp_path):
        with pytest.raises(ConfigError):
            from_mapping({}, tmp_path)

    def test_missing_config_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.yaml")

    def test_malformed_config_file(self, ham):
        with pytest.raises(ConfigError):
            load_config(write(ham, "no colon here\n"))
