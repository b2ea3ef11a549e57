"""Convert the UCI Multiple Features digits into data/handwritten/ (manifest + CSV)."""
import argparse

from tmvc.handwritten import ensure_handwritten


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dest", default="data/handwritten")
    ap.add_argument("--wheel", help="already downloaded mvlearn wheel (skips pip download)")
    args = ap.parse_args()
    print(ensure_handwritten(args.dest, args.wheel))


if __name__ == "__main__":
    main()
