"""Forward model, inversion and comparison for the bundled configs.

    python scripts/roundtrip.py [config.json ...]
"""
import sys
import time
from pathlib import Path

from qgraph.cli import NumericFailure, cmd_roundtrip
from qgraph.files import ProblemConfig

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
DEFAULT = ["square_5x4.json", "hex_2.json"]


def main(paths):
    print(f"{'config':24} {'potential':>10} {'coupling':>10} {'energies':>9} {'secs':>6}  flags")
    for path in paths:
        cfg = ProblemConfig.load(path)
        t0 = time.perf_counter()
        try:
            data = cmd_roundtrip(cfg)
        except NumericFailure as exc:
            data = exc.report
            if data is None:
                print(f"{Path(path).name:24} failed: {exc}")
                continue
        c = data["comparison"]
        print(f"{Path(path).name:24} {c['potential_error']:10.1e} {c['coupling_error']:10.1e} "
              f"{data['n_lam']:9d} {time.perf_counter() - t0:6.1f}  {len(data['flags'])}")


if __name__ == "__main__":
    main(sys.argv[1:] or [CONFIGS / name for name in DEFAULT])
