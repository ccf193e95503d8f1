"""Run configuration, read from the same flat key-value format as broker files.

Example::

    hamiltonian_path: "lih.txt"
    ansatz.n_occupied: 2
    ansatz.n_layers: 2
    ansatz.rotation_axes: "ry,rz"
    init: "hf,cafqa"
    cafqa.max_evaluations: 1000
    spsa.run_budget: 400
    backend: "sim-noisy"
    shots: 300
    output_dir: "out"
    seed: 7

Relative paths are resolved against the config file's directory.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from . import kvfile
from .ansatz import AnsatzSpec
from .backend import NoiseModel
from .cafqa import SearchBudget
from .pauli import PauliHamiltonian, load_hamiltonian
from .spsa import SpsaConfig

INIT_KINDS = ("hf", "cafqa", "explicit")

_KNOWN = {
    "hamiltonian_path", "init", "init_values", "backend", "shots", "output_dir", "seed",
    "record_wallclock", "broker.timeout", "broker.poll_interval", "broker.send_expected",
    "ansatz.n_qubits", "ansatz.n_occupied", "ansatz.n_layers", "ansatz.rotation_axes",
    "ansatz.entangler", "ansatz.final_rotation",
    "cafqa.max_evaluations", "cafqa.strategy", "cafqa.seed",
    "spsa.calibration_pairs", "spsa.run_budget", "spsa.c0", "spsa.alpha", "spsa.gamma",
    "spsa.target_first_step", "spsa.seed",
    "noise.p1", "noise.p2", "noise.p_spam",
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    hamiltonian_path: Path
    hamiltonian: PauliHamiltonian
    ansatz: AnsatzSpec
    inits: tuple[str, ...] = ("hf", "cafqa")
    init_values: tuple[float, ...] | None = None
    cafqa: SearchBudget = field(default_factory=SearchBudget)
    spsa: SpsaConfig = field(default_factory=SpsaConfig)
    backend: str = "sim"
    noise: NoiseModel = field(default_factory=NoiseModel)
    shots: int = 300
    output_dir: Path = Path("out")
    seed: int = 0
    record_wallclock: bool = True
    broker_timeout: float | None = None
    broker_poll_interval: float = 0.2
    broker_send_expected: bool = True

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, seed=seed, cafqa=replace(self.cafqa, seed=seed),
                       spsa=replace(self.spsa, seed=seed))


def _split(value: Any) -> list[str]:
    return [v.strip() for v in str(value).split(",") if v.strip()]


def _int(data, key, default):
    v = data.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{key} must be an integer, got {v!r}")
    return v


def _float(data, key, default):
    v = data.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key} must be a number, got {v!r}")
    return float(v)


def from_mapping(data: dict[str, Any], base_dir: Path = Path(".")) -> RunConfig:
    unknown = sorted(set(data) - _KNOWN)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    try:
        if "hamiltonian_path" not in data:
            raise ConfigError("hamiltonian_path is required")
        h_path = base_dir / str(data["hamiltonian_path"])
        if not h_path.is_file():
            raise ConfigError(f"Hamiltonian file not found: {h_path}")
        h = load_hamiltonian(h_path)
        seed = _int(data, "seed", 0)

        entangler = None
        if data.get("ansatz.entangler"):
            entangler = tuple(tuple(int(q) for q in pair.split("-")) for pair in _split(data["ansatz.entangler"]))
        ansatz = AnsatzSpec(
            n_qubits=_int(data, "ansatz.n_qubits", h.n_qubits),
            n_occupied=_int(data, "ansatz.n_occupied", 0),
            n_layers=_int(data, "ansatz.n_layers", 2),
            rotation_axes=tuple(_split(data.get("ansatz.rotation_axes", "ry,rz"))),
            entangler=entangler,
            final_rotation=bool(data.get("ansatz.final_rotation", False)),
        )
        if ansatz.n_qubits != h.n_qubits:
            raise ConfigError(f"ansatz has {ansatz.n_qubits} qubits, Hamiltonian {h.n_qubits}")

        inits = tuple(_split(data.get("init", "hf,cafqa")))
        bad = [i for i in inits if i not in INIT_KINDS]
        if bad or not inits:
            raise ConfigError(f"init must be drawn from {INIT_KINDS}, got {data.get('init')!r}")
        init_values = None
        if "explicit" in inits:
            if "init_values" not in data:
                raise ConfigError("init 'explicit' needs init_values")
            init_values = tuple(float(v) for v in _split(data["init_values"]))
            if len(init_values) != ansatz.param_count():
                raise ConfigError(f"init_values has {len(init_values)} entries, ansatz needs {ansatz.param_count()}")

        budget = SearchBudget(
            max_evaluations=_int(data, "cafqa.max_evaluations", 1000),
            seed=_int(data, "cafqa.seed", seed),
            strategy=str(data.get("cafqa.strategy", "multistart_hillclimb")),
        )
        spsa = SpsaConfig(
            calibration_pairs=_int(data, "spsa.calibration_pairs", 25),
            run_budget=_int(data, "spsa.run_budget", 400),
            c0=_float(data, "spsa.c0", 0.1),
            alpha=_float(data, "spsa.alpha", 0.602),
            gamma=_float(data, "spsa.gamma", 0.101),
            target_first_step=_float(data, "spsa.target_first_step", 0.1),
            seed=_int(data, "spsa.seed", seed),
        )
        noise = NoiseModel(
            p1=_float(data, "noise.p1", 0.003),
            p2=_float(data, "noise.p2", 0.009),
            p_spam=_float(data, "noise.p_spam", 0.0027),
        )
        backend = str(data.get("backend", "sim"))
        check_backend(backend)
        shots = _int(data, "shots", 300)
        if shots < 1:
            raise ConfigError("shots must be >= 1")
        return RunConfig(
            hamiltonian_path=h_path,
            hamiltonian=h,
            ansatz=ansatz,
            inits=inits,
            init_values=init_values,
            cafqa=budget,
            spsa=spsa,
            backend=backend,
            noise=noise,
            shots=shots,
            output_dir=base_dir / str(data.get("output_dir", "out")),
            seed=seed,
            record_wallclock=bool(data.get("record_wallclock", True)),
            broker_timeout=_float(data, "broker.timeout", None),
            broker_poll_interval=_float(data, "broker.poll_interval", 0.2),
            broker_send_expected=bool(data.get("broker.send_expected", True)),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def check_backend(selector: str) -> None:
    if selector in ("sim", "sim-noisy"):
        return
    if selector.startswith("broker:") and len(selector) > len("broker:"):
        return
    raise ConfigError(f"backend must be 'sim', 'sim-noisy' or 'broker:<dir>', got {selector!r}")


def load_config(path: Path | str) -> RunConfig:
    path = Path(path)
    try:
        data = kvfile.load_file(path)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except kvfile.KVFormatError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return from_mapping(data, path.parent)


def explicit_init(cfg: RunConfig) -> np.ndarray:
    return np.array(cfg.init_values, dtype=float)
