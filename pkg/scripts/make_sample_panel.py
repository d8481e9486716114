"""Regenerate the bundled sample price panel under src/stocknet/data/sample/."""
import argparse
import json
from pathlib import Path

from stocknet.synthetic import SamplePanelDesign, make_sample_prices, write_price_files

DEFAULT_OUT = Path(__file__).resolve().parents[1] / "src" / "stocknet" / "data" / "sample"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=DEFAULT_OUT)
    ap.add_argument("--seed", type=int, default=SamplePanelDesign.seed)
    args = ap.parse_args()
    design = SamplePanelDesign(seed=args.seed)
    tickers, dates, prices, truth = make_sample_prices(design)
    write_price_files(args.out, tickers, dates, prices)
    (args.out / "truth.json").write_text(json.dumps(truth, indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(tickers)} tickers x {len(dates)} days to {args.out}; injected {truth['injected']}")


if __name__ == "__main__":
    main()
