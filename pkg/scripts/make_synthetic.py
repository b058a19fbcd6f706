"""Write a synthetic QA task (train/dev SQuAD files, KB, word vectors) to a directory."""

import argparse

from gnr.synthetic import make_task


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("out")
    p.add_argument("--train", type=int, default=500)
    p.add_argument("--dev", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--held-out", action="store_true", help="dev uses unseen person/city names")
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--spread", type=float, default=0.5)
    args = p.parse_args()
    task = make_task(args.train, args.dev, args.seed, args.held_out, dim=args.dim, spread=args.spread)
    for name, path in task.write(args.out).items():
        print(f"{name:8s} {path}")


if __name__ == "__main__":
    main()
