"""Train one globally normalised model, then decode the dev set at several beam widths.

Reports EM/F1 and the mean number of end-scorer calls per question, which
stays bounded by the beam width.
"""

import argparse
import tempfile
from pathlib import Path

from gnr.config import RunConfig
from gnr.dataio import load_squad
from gnr.metrics import evaluate
from gnr.search import predict
from gnr.synthetic import make_task
from gnr.train import train


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--train-width", type=int, default=10)
    p.add_argument("--widths", type=int, nargs="+", default=[1, 2, 10, 32, 64])
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    work = Path(tempfile.mkdtemp(prefix="gnr-beam-"))
    paths = make_task(300, 100, seed=args.seed, held_out=True, spread=2.0).write(work / "data")
    cfg = RunConfig(depth=1, hidden=16, embedding_dim=16, mlp_hidden=16, recurrent_dropout=0.0,
                    fc_dropout=0.0, noise_sigma=0.0, lr=0.01, batch_size=10,
                    beam_width=args.train_width, augment_count=0, train_path=str(paths["train"]),
                    dev_path=str(paths["dev"]), word_vectors=str(paths["vectors"]),
                    epochs=args.epochs, patience=args.epochs, seed=args.seed,
                    checkpoint_dir=str(work / "ck"))
    model = train(cfg).model
    dev, _ = load_squad(paths["dev"])
    print("    B     EM     F1   end calls")
    for width in args.widths:
        metrics, _ = evaluate(model, dev, width)
        calls = sum(predict(model, ex, width).end_calls for ex in dev) / len(dev)
        print(f"{width:5d}  {metrics.exact_match:5.1f}  {metrics.f1:5.1f}   {calls:6.1f}")


if __name__ == "__main__":
    main()
