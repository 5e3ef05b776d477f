"""Run every recipe in configs/ and write CSV tables under results/.

    python scripts/reproduce.py              # full replication counts (slow)
    python scripts/reproduce.py --reps 500   # quick look

Boxplot recipes go through ``sobol-rank study``, MSE recipes through
``sobol-rank mse-curve``; ``scripts/plot.py`` turns the CSVs into figures.
"""

import argparse
import re
import sys
import tempfile
from pathlib import Path

from sobol_rank.cli import main as cli

HERE = Path(__file__).resolve().parent


def with_reps(text: str, reps: int | None) -> str:
    if reps is None:
        return text
    return re.sub(r"(?m)^reps\s*=.*$", f"reps = {reps}", text)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--reps", type=int, help="override the replication count of every recipe")
    p.add_argument("--out", default="results")
    p.add_argument("--only", help="substring filter on recipe names")
    args = p.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for cfg in sorted((HERE / "configs").glob("*.cfg")):
        if args.only and args.only not in cfg.stem:
            continue
        with tempfile.NamedTemporaryFile("w", suffix=".cfg", delete=False) as fh:
            fh.write(with_reps(cfg.read_text(), args.reps))
        print(f"== {cfg.stem}", flush=True)
        if cfg.stem.startswith("fig3"):
            code = cli(["mse-curve", "--config", fh.name, "--out", str(out / f"{cfg.stem}.csv")])
        else:
            code = cli(["study", "--config", fh.name, "--out-dir", str(out / cfg.stem)])
        Path(fh.name).unlink()
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
