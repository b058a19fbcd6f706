"""Dev EM against the number of Type Swap examples per epoch.

Dev questions mention people and cities never seen in training, so any gain
comes from the swapped surfaces the knowledge base injects.
"""

import argparse
import tempfile
from pathlib import Path

from gnr.config import RunConfig
from gnr.synthetic import make_task
from gnr.train import train


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--counts", type=int, nargs="+", default=[0, 50, 250, 1000])
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--train", type=int, default=500)
    p.add_argument("--epochs", type=int, default=3)
    p.add_argument("--spread", type=float, default=2.0)
    args = p.parse_args()

    work = Path(tempfile.mkdtemp(prefix="gnr-trend-"))
    table = {t: [] for t in args.counts}
    for seed in range(args.seeds):
        paths = make_task(args.train, 100, seed=seed, held_out=True,
                          spread=args.spread).write(work / f"data{seed}")
        for t in args.counts:
            cfg = RunConfig(depth=1, hidden=16, embedding_dim=16, mlp_hidden=16,
                            recurrent_dropout=0.0, fc_dropout=0.0, noise_sigma=0.0, lr=0.01,
                            batch_size=10, beam_width=4, augment_count=t,
                            kb_path=str(paths["kb"]), train_path=str(paths["train"]),
                            dev_path=str(paths["dev"]), word_vectors=str(paths["vectors"]),
                            epochs=args.epochs, patience=args.epochs, seed=seed,
                            checkpoint_dir=str(work / f"run{seed}-{t}"))
            em = train(cfg).best_dev.exact_match
            table[t].append(em)
            print(f"seed {seed} T={t:<5d} dev EM {em:5.1f}", flush=True)
    print("\n    T   mean EM   per seed")
    for t, ems in table.items():
        print(f"{t:5d}   {sum(ems) / len(ems):7.1f}   {' '.join(f'{e:5.1f}' for e in ems)}")


if __name__ == "__main__":
    main()
