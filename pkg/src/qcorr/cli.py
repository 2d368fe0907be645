"""Command-line front end.

Every artifact embeds the configuration that produced it: JSON files carry
a ``config`` object and CSV files start with a ``# config: {...}`` line.
Trials are seeded from ``(seed, trial)`` so results do not depend on how
many worker processes run them (``QCORR_THREADS`` caps that number).  Any
failure removes the files the command had already written.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from qcorr import bbqc, data, evaluation, hmm
from qcorr.quantumlab import cluster, contextuality, ghz, stabilizer

log = logging.getLogger("qcorr")

DEFAULT_HOLDOUT = 0.25
DEFAULT_BETA = 0.5
DEFAULT_BATCH = 8
DEFAULT_TRIALS = 10


class CliError(Exception):
    pass


def _defaults_for(fmt: str) -> dict:
    if fmt == "biofam":
        return {"alpha": 1e-3, "epochs": 75}
    return {"alpha": 1e-2, "epochs": 150}


def _trial_seed(seed: int, trial: int) -> int:
    return int(np.random.SeedSequence([seed, trial]).generate_state(1)[0])


def _workers(trials: int) -> int:
    cap = os.environ.get("QCORR_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = max(1, int(cap))
        except ValueError:
            raise CliError(f"QCORR_THREADS must be an integer, got {cap!r}") from None
    return max(1, min(n, trials))


def _run_trials(fn: Callable, jobs: list) -> list:
    """Map ``fn`` over ``jobs`` in order, in worker processes when allowed."""
    workers = _workers(len(jobs))
    if workers == 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*jobs)))


class Artifacts:
    """Tracks written files so a failed command can remove them."""

    def __init__(self, out: Optional[str], config: dict):
        self.dir = Path(out) if out else None
        self.config = config
        self.written: list[Path] = []

    def _path(self, name: str) -> Path:
        if self.dir is None:
            raise CliError("--out is required for this command")
        self.dir.mkdir(parents=True, exist_ok=True)
        return self.dir / name

    def _write(self, name: str, text: str) -> Path:
        path = self._path(name)
        self.written.append(path)
        path.write_text(text)
        return path

    def json(self, name: str, payload: dict) -> Path:
        doc = {"config": self.config, **payload}
        return self._write(name, json.dumps(doc, indent=2, sort_keys=True) + "\n")

    def csv(self, name: str, header: list, rows: list) -> Path:
        buf = io.StringIO()
        buf.write("# config: " + json.dumps(self.config, sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return self._write(name, buf.getvalue())

    def cleanup(self) -> None:
        for path in self.written:
            try:
                path.unlink()
            except FileNotFoundError:
                pass


# ------------------------------------------------------------------ data


def _load(args) -> tuple[data.Dataset, data.Dataset]:
    try:
        ds = data.load_sequences(args.data, args.format)
        if args.test_data:
            test = data.load_sequences(args.test_data, args.format)
            if (test.M, test.n) != (ds.M, ds.n):
                raise CliError("train and test files disagree on alphabet or length")
            return ds, test
        return data.split(ds, args.holdout, args.seed)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot load data: {exc}") from exc


def _data_config(args) -> dict:
    return {
        "data": str(args.data),
        "test_data": str(args.test_data) if args.test_data else None,
        "format": args.format,
        "holdout": args.holdout,
        "seed": args.seed,
    }


def _fmt(x: float) -> str:
    return repr(float(x))


# --------------------------------------------------------------- trials


def _hmm_trial(h: int, train: np.ndarray, test: np.ndarray, M: int, epochs: int, seed: int, trial: int):
    rng = np.random.default_rng(_trial_seed(seed, trial))
    model, history = hmm.train_hmm(hmm.random_hmm(h, M, rng), train, epochs)
    drops = np.diff(history)
    if drops.size and drops.min() < -1e-9:
        raise RuntimeError(f"Baum-Welch log-likelihood decreased by {-drops.min():.3g}")
    n = train.shape[1]
    train_nll = -history / (train.shape[0] * n)
    return {
        "model": model.to_json(),
        "history": train_nll.tolist(),
        "train": hmm.nll_per_symbol(model, train),
        "test": hmm.nll_per_symbol(model, test) if len(test) else None,
    }


def _bbqc_trial(k: int, train: np.ndarray, test: np.ndarray, M: int, alpha: float, beta: float,
                epochs: int, batch: int, seed: int, trial: int):
    tseed = _trial_seed(seed, trial)
    init = bbqc.random_bbqc(k, M, np.random.default_rng(tseed))
    cfg = bbqc.TrainConfig(alpha=alpha, beta=beta, epochs=epochs, batch_size=batch, seed=tseed)
    test_hist = []

    def monitor(epoch, model):
        if len(test):
            test_hist.append(bbqc.nll_per_symbol(model, test))

    model, history = bbqc.train_bbqc(init, train, cfg, callback=monitor)
    return {
        "model": model.to_json(),
        "history": history.tolist(),
        "test_history": test_hist,
        "train": float(history[-1]),
        "test": test_hist[-1] if test_hist else None,
    }


def _history_rows(res: dict) -> list:
    rows = [[e, "train", _fmt(v)] for e, v in enumerate(res["history"])]
    rows += [[e, "test", _fmt(v)] for e, v in enumerate(res.get("test_history", []))]
    return rows


def _result_records(kind: str, ds_name: str, size: int, results: list) -> list:
    out = []
    for trial, res in enumerate(results):
        for split in ("train", "test"):
            if res[split] is not None:
                out.append({"model": kind, "dataset": ds_name, "split": split, "k_or_h": size,
                            "trial": trial, "nll_per_symbol": res[split]})
    return out


def _best(results: list) -> int:
    return int(np.argmin([r["train"] for r in results]))


# ------------------------------------------------------------- commands


def cmd_train_hmm(args, art: Artifacts) -> None:
    train, test = _load(args)
    epochs = args.epochs or _defaults_for(args.format)["epochs"]
    art.config.update(_data_config(args), hidden=args.hidden, epochs=epochs, trials=args.trials)
    jobs = [(args.hidden, train.sequences, test.sequences, train.M, epochs, args.seed, t)
            for t in range(args.trials)]
    results = _run_trials(_hmm_trial, jobs)
    for t, res in enumerate(results):
        art.csv(f"hmm_history_trial{t:02d}.csv", ["epoch", "split", "nll_per_symbol"], _history_rows(res))
    best = _best(results)
    art.json("hmm_results.json", {
        "results": _result_records("hmm", train.name, args.hidden, results),
        "best_trial": best,
        "best_model": results[best]["model"],
    })


def cmd_train_bbqc(args, art: Artifacts) -> None:
    train, test = _load(args)
    d = _defaults_for(args.format)
    alpha = args.alpha if args.alpha is not None else d["alpha"]
    epochs = args.epochs or d["epochs"]
    art.config.update(_data_config(args), bond_dim=args.bond_dim, alpha=alpha, beta=args.beta,
                      epochs=epochs, batch_size=args.batch_size, trials=args.trials)
    jobs = [(args.bond_dim, train.sequences, test.sequences, train.M, alpha, args.beta, epochs,
             args.batch_size, args.seed, t) for t in range(args.trials)]
    results = _run_trials(_bbqc_trial, jobs)
    for t, res in enumerate(results):
        art.csv(f"bbqc_history_trial{t:02d}.csv", ["epoch", "split", "nll_per_symbol"], _history_rows(res))
    best = _best(results)
    art.json("bbqc_results.json", {
        "results": _result_records("bbqc", train.name, args.bond_dim, results),
        "best_trial": best,
        "best_model": results[best]["model"],
    })


def compare_models(train: data.Dataset, test: data.Dataset, sizes: list, *, alpha: float,
                   beta: float, epochs: int, hmm_epochs: int, batch: int, trials: int, seed: int,
                   dof_convention: str = "stiefel") -> dict:
    """Best-of-``trials`` HMM (``h = k``) against BBQC for every ``k``."""
    nll_rows, threshold_rows, tests = [], [], []
    K, n, M = train.K, train.n, train.M
    for k in sizes:
        hjobs = [(k, train.sequences, test.sequences, M, hmm_epochs, seed, t) for t in range(trials)]
        bjobs = [(k, train.sequences, test.sequences, M, alpha, beta, epochs, batch, seed, t)
                 for t in range(trials)]
        hres = _run_trials(_hmm_trial, hjobs)
        bres = _run_trials(_bbqc_trial, bjobs)
        for name, results in (("hmm", hres), ("bbqc", bres)):
            for t, r in enumerate(results):
                for split in ("train", "test"):
                    if r[split] is not None:
                        nll_rows.append([k, name, split, t, _fmt(r[split])])
        h_best = min(r["train"] for r in hres)
        b_best = min(r["train"] for r in bres)
        df_alt = evaluation.dof_bbqc(k, M, dof_convention)
        df_null = evaluation.dof_hmm(k, M)
        threshold = evaluation.kl_threshold_for_sigma(max(1, df_alt - df_null), 5.0, K, n)
        threshold_rows.append([k, _fmt(h_best - b_best), _fmt(threshold)])
        lr = evaluation.lr_test(-b_best * K * n, -h_best * K * n, df_alt, df_null)
        tests.append({"k": k, "lr_statistic": lr.statistic, "df": lr.df, "p_value": lr.p_value,
                      "log_p_value": lr.log_p_value, "sigma": lr.sigma,
                      "best_hmm_train": h_best, "best_bbqc_train": b_best})
    return {"nll": nll_rows, "threshold": threshold_rows, "lr_tests": tests}


def cmd_compare(args, art: Artifacts) -> None:
    train, test = _load(args)
    d = _defaults_for(args.format)
    alpha = args.alpha if args.alpha is not None else d["alpha"]
    epochs = args.epochs or d["epochs"]
    sizes = [int(s) for s in args.bond_dims.split(",") if s.strip()]
    if not sizes or min(sizes) < 1:
        raise CliError("--bond-dims must list positive integers")
    art.config.update(_data_config(args), bond_dims=sizes, alpha=alpha, beta=args.beta,
                      epochs=epochs, batch_size=args.batch_size, trials=args.trials,
                      dof_convention=args.dof_convention)
    out = compare_models(train, test, sizes, alpha=alpha, beta=args.beta, epochs=epochs,
                         hmm_epochs=epochs, batch=args.batch_size, trials=args.trials,
                         seed=args.seed, dof_convention=args.dof_convention)
    art.csv("nll_comparison.csv", ["k", "model", "split", "trial", "nll_per_symbol"], out["nll"])
    art.csv("kl_threshold.csv", ["k", "delta_kl", "threshold_5sigma"], out["threshold"])
    art.json("lr_tests.json", {"tests": out["lr_tests"], "K": train.K, "n": train.n})


def cmd_gen_synth(args, art: Artifacts) -> None:
    if args.model:
        try:
            doc = json.loads(Path(args.model).read_text())
        except (OSError, ValueError) as exc:
            raise CliError(f"cannot read model: {exc}") from exc
        for key in ("best_model", "generator"):
            doc = doc.get(key, doc)
        try:
            model = bbqc.BbqcModel.from_json(doc) if "U_t" in doc else hmm.Hmm.from_json(doc)
        except (KeyError, TypeError) as exc:
            raise CliError(f"{args.model} is not an HMM or BBQC checkpoint") from exc
    else:
        k, M = args.random_bbqc
        model = bbqc.random_bbqc(k, M, np.random.default_rng(args.seed))
    ds = data.synth_from_model(model, args.count, args.length, args.seed)
    art.config.update(model=args.model, random_bbqc=args.random_bbqc, count=args.count,
                      length=args.length, seed=args.seed, provenance=ds.provenance)
    path = art._path(args.name + ".csv")
    art.written.append(path)
    data.save_csv(ds, path, comment="config: " + json.dumps(art.config, sort_keys=True))
    art.json(args.name + "_generator.json", {"generator": model.to_json()})


def nonlocality_report(pairs: int, positions=None) -> dict:
    layouts = [tuple(positions)] if positions else cluster.valid_layouts(pairs)
    if not layouts:
        raise CliError(f"no admissible signal layout fits in {pairs} pairs; try 5 or 7")
    checked = []
    ok = True
    for lay in layouts:
        dist = cluster.cluster_distribution(pairs, lay, 0)
        bad = cluster.ghz_support_violations(dist.conditional)
        ok &= not bad
        checked.append({"signal_positions": list(lay), "violations": [list(b) + list(s) for b, s in bad]})
    lhv = ghz.lhv_bruteforce()
    ok &= lhv == 3
    allowed = [{"b": list(b), "s": list(s)} for b in ghz.contexts()
               for s in np.ndindex(2, 2, 2) if ghz.ghz_constraint(b, s)]
    return {
        "construction": "cluster-chain GHZ nonlocality",
        "parameters": {"pairs": pairs, "layouts": [list(l) for l in layouts], "ancilla_outcome": 0},
        "verdict": ("quantum support obeys the GHZ constraint exactly; local strategies reach "
                    f"{lhv}/4 contexts") if ok else "FAILED",
        "witness": {"layouts": checked, "lhv_max_contexts": lhv, "allowed_outcomes": allowed},
        "ok": bool(ok),
    }


def contextuality_report() -> dict:
    s1 = stabilizer.StabTableau.zero(2)
    s2 = stabilizer.StabTableau.graph(2, [])
    s3 = stabilizer.StabTableau.graph(2, [(0, 1)])
    grid = contextuality.find_magic_square(s1, s2, s3)
    counts = {n: stabilizer.enumerate_stabilizer_states(n)[0] for n in (1, 2, 3)}
    ok = grid is not None and contextuality.dense_square_check(grid) and counts == {1: 6, 2: 60, 3: 1080}
    return {
        "construction": "Mermin-Peres square from three two-qubit stabilizer states",
        "parameters": {"states": [s1.labels(), s2.labels(), s3.labels()]},
        "verdict": "magic square found and verified; stabilizer counts 6/60/1080" if ok else "FAILED",
        "witness": {"square": contextuality.grid_labels(grid) if grid else None,
                    "stabilizer_state_counts": counts},
        "ok": bool(ok),
    }


def cmd_demo_nonlocality(args, art: Artifacts) -> dict:
    art.config.update(pairs=args.pairs, positions=args.positions)
    try:
        return nonlocality_report(args.pairs, args.positions)
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def cmd_demo_contextuality(args, art: Artifacts) -> dict:
    return contextuality_report()


def cmd_demo_walk(args, art: Artifacts) -> dict:
    art.config.update(max_k=args.max_k)
    rows = []
    ok = True
    for k in range(args.max_k + 1):
        walk, closed = ghz.s3_walk_prob(k), ghz.s3_walk_closed_form(k)
        ok &= abs(walk - closed) < 1e-12
        rows.append([k, _fmt(walk), _fmt(closed), _fmt(abs(walk - closed))])
    if art.dir is not None:
        art.csv("s3_walk.csv", ["k", "walk", "closed_form", "abs_diff"], rows)
    return {
        "construction": "S3 random walk",
        "parameters": {"max_k": args.max_k},
        "verdict": "matches 1/3 + (2/3) 4^-k" if ok else "FAILED",
        "witness": {"table": [{"k": r[0], "walk": float(r[1]), "closed_form": float(r[2])} for r in rows]},
        "ok": bool(ok),
    }


# ---------------------------------------------------------------- parser


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="training file (or the full file when splitting)")
    p.add_argument("--format", default="generic-csv", choices=sorted(data.LOADERS))
    p.add_argument("--test-data", help="separate test file; otherwise a seeded holdout is used")
    p.add_argument("--holdout", type=float, default=DEFAULT_HOLDOUT)
    p.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
    p.add_argument("--epochs", type=int, help="default: 75 for biofam, 150 otherwise")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")


def _add_opt_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, help="learning rate; default 1e-3 for biofam, 1e-2 otherwise")
    p.add_argument("--beta", type=float, default=DEFAULT_BETA)
    p.add_argument("--batch-size", type=int, default=DEFAULT_BATCH)


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qcorr", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-hmm", help="Baum-Welch training, best of several trials")
    _add_data_args(p)
    p.add_argument("--hidden", type=_positive, default=2)
    p.set_defaults(func=cmd_train_hmm)

    p = sub.add_parser("train-bbqc", help="Riemannian training of the unitary MPS model")
    _add_data_args(p)
    _add_opt_args(p)
    p.add_argument("--bond-dim", type=_positive, default=2)
    p.set_defaults(func=cmd_train_bbqc)

    p = sub.add_parser("compare", help="both families over a grid of sizes, plus LR tests")
    _add_data_args(p)
    _add_opt_args(p)
    p.add_argument("--bond-dims", default="2,4", help="comma-separated k values (HMMs use h = k)")
    p.add_argument("--dof-convention", default="stiefel", choices=["stiefel", "gauge-fixed"])
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gen-synth", help="sample a synthetic dataset from a model")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--model", help="HMM or BBQC JSON checkpoint (or a *_results.json)")
    src.add_argument("--random-bbqc", type=_positive, nargs=2, metavar=("K", "M"))
    p.add_argument("--count", type=_positive, default=1000)
    p.add_argument("--length", type=_positive, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--name", default="synthetic")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("demo-nonlocality", help="cluster-state GHZ support vs local strategies")
    p.add_argument("--pairs", type=_positive, default=5, help="total pairs, signals plus ancillas")
    p.add_argument("--positions", type=int, nargs=3, help="signal pair indices (default: all layouts)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_demo_nonlocality)

    p = sub.add_parser("demo-contextuality", help="magic square and stabilizer-state counts")
    p.add_argument("--out")
    p.set_defaults(func=cmd_demo_contextuality)

    p = sub.add_parser("demo-walk", help="S3 walk probabilities against the closed form")
    p.add_argument("--max-k", type=int, default=12)
    p.add_argument("--out")
    p.set_defaults(func=cmd_demo_walk)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    config = {"command": args.command}
    art = Artifacts(getattr(args, "out", None), config)
    try:
        report = args.func(args, art)
        if report is not None:
            ok = report.pop("ok", True)
            payload = {"config": config, **report}
            print(json.dumps(payload, indent=2, sort_keys=True))
            if art.dir is not None:
                art.json(args.command.replace("-", "_") + ".json", report)
            if not ok:
                art.cleanup()
                return 1
    except (CliError, RuntimeError, ValueError, OSError) as exc:
        art.cleanup()
        print(f"qcorr {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except BaseException:
        art.cleanup()
        raise
    return 0


def main() -> None:
    sys.exit(run())
