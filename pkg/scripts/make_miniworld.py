"""Write a synthetic mini-world and optionally run the whole pipeline on it.

    python scripts/make_miniworld.py /tmp/world --run
    python scripts/make_miniworld.py /tmp/noisy --noise-r2 0.7 --run
"""

import argparse
import sys
from pathlib import Path

from nightlight_gdp import cli
from nightlight_gdp.synth import generate


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("root", type=Path)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-r2", type=float, default=None,
                   help="target pooled R^2 for noisy level targets (default: exact polynomials)")
    p.add_argument("--run", action="store_true", help="run `all` on the generated world")
    p.add_argument("--workers", type=int, default=1)
    args = p.parse_args(argv)

    world = generate(args.root, seed=args.seed, noise_r2=args.noise_r2)
    print(f"wrote {world.config_path} ({len(world.countries)} countries)")
    if not args.run:
        return 0
    code = cli.main(["all", "--config", str(world.config_path), "--workers", str(args.workers)])
    print((world.root / "out" / "report.md").read_text())
    return code


if __name__ == "__main__":
    sys.exit(main())
