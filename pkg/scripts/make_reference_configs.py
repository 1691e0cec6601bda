# make_reference_configs.py
import json
import math
import os
import sys

CONFIG_DIR = os.environ.get("CONFIG_DIR", "./configs")

SIGMA_X = {"re": [[0.0, 1.0], [1.0, 0.0]]}
SIGMA_Z = {"re": [[1.0, 0.0], [0.0, -1.0]]}


def reference_configs():
    """
    Named run documents covering every input form the parser accepts
    """
    half = 1.0 / math.sqrt(2.0)
    return {
        # two levels one unit apart, equal superposition
        "two_level": {
            "hbar": 1.0, "tau1": 0.1, "tau2": 0.1,
            "hamiltonian": {"eigenvalues": [0.0, 1.0]},
            "initial_state": {"pure_vector": [1.0, 1.0]},
            "times": {"start": 0.0, "stop": 5.0, "count": 51},
            "observables": [{"name": "sx", "matrix": SIGMA_X}, {"name": "sz", "matrix": SIGMA_Z}],
            "track_elements": [[0, 1]],
            "seed": 20240601,
        },
        # spin along +x in a Zeeman field, one Larmor turn
        "spin_larmor": {
            "tau1": 0.1, "tau2": 0.1,
            "hamiltonian": {"matrix": {"re": [[0.5, 0.0], [0.0, -0.5]]}},
            "initial_state": {"pure_vector": {"re": [half, half], "im": [0.0, 0.0]}},
            "times": {"start": 0.0, "stop": 2.0 * math.pi, "count": 64},
            "observables": [{"name": "sx", "matrix": SIGMA_X}],
            "track_elements": [[0, 1]],
            "seed": 7,
        },
        # three levels, complex couplings, mixed state
        "three_level_mixed": {
            "tau1": 0.05, "tau2": 0.2,
            "hamiltonian": {"matrix": {
                "re": [[0.0, 0.3, 0.0], [0.3, 1.0, 0.2], [0.0, 0.2, 2.5]],
                "im": [[0.0, 0.1, 0.0], [-0.1, 0.0, -0.4], [0.0, 0.4, 0.0]],
            }},
            "initial_state": {"matrix": {
                "re": [[0.5, 0.2, 0.1], [0.2, 0.3, 0.0], [0.1, 0.0, 0.2]],
                "im": [[0.0, 0.05, 0.0], [-0.05, 0.0, 0.0], [0.0, 0.0, 0.0]],
            }},
            "times": {"start": 0.0, "stop": 4.0, "count": 21},
            "observables": [{"name": "population_2", "matrix": {
                "re": [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]]}}],
            "track_elements": [[0, 1], [0, 2], [1, 2]],
            "seed": 11,
        },
        # coherent state |alpha=2> on the default Fock truncation
        "coherent_oscillator": {
            "tau1": 0.1, "tau2": 0.1,
            "hamiltonian": {"eigenvalues": [n + 0.5 for n in range(44)]},
            "initial_state": {"coherent": {"alpha_re": 2.0, "alpha_im": 0.0, "dim": 44}},
            "times": {"start": 0.0, "stop": 20.0, "count": 41},
            "track_elements": [[1, 0], [2, 0], [5, 5]],
            "seed": 3,
        },
    }


def write_reference_configs(config_dir=CONFIG_DIR):
    """
    Write every reference document as <name>.json under config_dir
    """
    os.makedirs(config_dir, exist_ok=True)
    written = []
    for name, doc in reference_configs().items():
        path = os.path.join(config_dir, f"{name}.json")
        if os.path.exists(path):
            os.remove(path)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(doc, f, indent=2, sort_keys=True)
            f.write("\n")
        written.append(path)
    print(f"Wrote {len(written)} reference configs to '{config_dir}'")
    return written


if __name__ == '__main__':
    write_reference_configs(sys.argv[1] if len(sys.argv) > 1 else CONFIG_DIR)
