"""Command line workbench.

Subcommands: gen-data, train, eval, sample, embed. Exit codes: 0 on success,
2 for configuration/usage problems (bad flags, malformed files, non-SPD
covariances), 3 for numeric aborts during training.

NC_WORKBENCH_THREADS caps BLAS thread pools; it is applied in maskcond's
package init, which runs before numpy loads when the CLI is the entry point.
"""

import argparse
import json
import sys


def _build_parser():
    p = argparse.ArgumentParser(
        prog="maskcond",
        description="Train and evaluate a mask-conditioned generator against a Gaussian oracle.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    gd = sub.add_parser("gen-data", help="sample a training set from the Gaussian")
    gd.add_argument("--out", required=True, help="output JSON path")
    gd.add_argument("--config", help="run config JSON supplying the gaussian section")
    gd.add_argument("--n", type=int, default=10000)
    gd.add_argument("--seed", type=int, default=0)
    gd.add_argument("--rho", type=float, help="use the rho-structured covariance")
    gd.set_defaults(func=cmd_gen_data)

    tr = sub.add_parser("train", help="train a generator (and discriminator)")
    tr.add_argument("--config", help="run config JSON")
    tr.add_argument("--data", help="dataset JSON (falls back to io.data_path)")
    tr.add_argument("--out", help="checkpoint path (falls back to io.ckpt_path)")
    tr.add_argument("--trace", help="JSON-lines trace path (falls back to io.trace_path)")
    tr.add_argument("--mode", choices=["adversarial", "moment-matching"])
    tr.add_argument("--steps", type=int)
    tr.add_argument("--seed", type=int)
    tr.add_argument("--gp", type=float, help="gradient penalty coefficient")
    tr.add_argument("--no-sn", action="store_true", help="disable the spectral ceiling")
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="evaluate checkpoints against the oracle")
    ev.add_argument("--ckpt", help="checkpoint path, or comma-separated list")
    ev.add_argument("--protocol", required=True,
                    choices=["table1", "ablation", "grid", "joint", "bound"])
    ev.add_argument("--out", required=True, help="CSV report path (JSON written alongside)")
    ev.add_argument("--config", help="run config JSON (required for ablation)")
    ev.add_argument("--data", help="dataset JSON (required for ablation and bound)")
    ev.add_argument("--n", type=int, help="samples per estimate (protocol-specific default)")
    ev.add_argument("--seeds", default="0",
                    help="comma list; evaluation seeds broadcast/paired with checkpoints "
                         "(for ablation: the training seeds)")
    ev.set_defaults(func=cmd_eval)

    sa = sub.add_parser("sample", help="draw conditional samples from a checkpoint")
    sa.add_argument("--ckpt", required=True)
    sa.add_argument("--available", default="",
                    help="1-based coord=value pairs, e.g. '1=2.0,3=1.5'")
    sa.add_argument("--request", required=True, help="1-based coords, e.g. '2,3'")
    sa.add_argument("--n", type=int, default=10)
    sa.add_argument("--seed", type=int, default=0)
    sa.add_argument("--oracle", action="store_true",
                    help="sample the exact conditional instead of the generator")
    sa.add_argument("--out", help="CSV path (default: stdout)")
    sa.set_defaults(func=cmd_sample)

    em = sub.add_parser("embed", help="encoder features for dataset rows under masks")
    em.add_argument("--ckpt", required=True)
    em.add_argument("--data", required=True)
    em.add_argument("--available", default="", help="1-based coords, e.g. '1,3'")
    em.add_argument("--request", default="", help="1-based coords, e.g. '2'")
    em.add_argument("--all-masks", action="store_true",
                    help="enumerate every valid mask pair instead")
    em.add_argument("--out", help="CSV path (default: stdout)")
    em.set_defaults(func=cmd_embed)
    return p


def _load_run_config(path):
    from .errors import ConfigError

    if path is None:
        return {}
    try:
        with open(path) as f:
            cfg = json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"config {path} must contain a JSON object")
    return cfg


def _gaussian_from(ns, run_cfg):
    from .checkpoint import gaussian_from_dict
    from .gaussian import rho_gaussian

    if getattr(ns, "rho", None) is not None:
        return rho_gaussian(ns.rho)
    return gaussian_from_dict(run_cfg.get("gaussian"))


def cmd_gen_data(ns):
    from .checkpoint import write_dataset
    from .gaussian import sample_joint

    run_cfg = _load_run_config(ns.config)
    g = _gaussian_from(ns, run_cfg)
    rows = sample_joint(g, ns.n, ns.seed)
    write_dataset(ns.out, rows, ns.seed)
    print(f"wrote {ns.n} rows of dimension {g.dim} to {ns.out}")
    return 0


def _resolve_io(ns, run_cfg, key, flag_value, required=False):
    from .errors import ConfigError

    value = flag_value if flag_value else run_cfg.get("io", {}).get(key)
    if required and not value:
        raise ConfigError(f"missing --{key.replace('_path', '')} (or io.{key} in the config)")
    return value


def cmd_train(ns):
    from .checkpoint import (Checkpoint, read_dataset, save_checkpoint,
                             train_config_from_dict)
    from .training import train

    run_cfg = _load_run_config(ns.config)
    cfg = train_config_from_dict(run_cfg.get("train", {}))
    if ns.mode is not None:
        cfg.mode = ns.mode
    if ns.steps is not None:
        cfg.steps = ns.steps
    if ns.seed is not None:
        cfg.seed = ns.seed
    if ns.gp is not None:
        cfg.gp_coeff = ns.gp
    if ns.no_sn:
        cfg.sn_enabled = False
    cfg.__post_init__()

    data_path = _resolve_io(ns, run_cfg, "data_path", ns.data, required=True)
    ckpt_path = _resolve_io(ns, run_cfg, "ckpt_path", ns.out, required=True)
    trace_path = _resolve_io(ns, run_cfg, "trace_path", ns.trace)
    g = _gaussian_from(ns, run_cfg)
    dataset, _ = read_dataset(data_path)

    result = train(cfg, dataset, trace_path=trace_path)
    save_checkpoint(
        Checkpoint(
            generator=result.generator,
            discriminator=result.discriminator,
            train_config=cfg,
            gaussian=g,
            rng_state=result.rng_state,
            steps_completed=result.steps_completed,
        ),
        ckpt_path,
    )
    if result.trace:
        last = result.trace[-1]
        print(f"step {last.step}: d_loss={last.d_loss:.4f} g_loss={last.g_loss:.4f} "
              f"gp={last.gp_value:.4f} sigma_max={max(last.sigma_max):.4f}")
    print(f"saved checkpoint to {ckpt_path}")
    return 0


def _parse_seeds(text):
    from .errors import ConfigError

    try:
        return [int(t) for t in str(text).split(",") if t != ""]
    except ValueError:
        raise ConfigError(f"--seeds must be comma-separated integers, got {text!r}") from None


def cmd_eval(ns):
    import numpy as np

    from .checkpoint import load_checkpoint, read_dataset, train_config_from_dict
    from .errors import ConfigError
    from .evaluation import (AGGREGATE_SEED, EvalReport, ablation_suite,
                             grid_protocol, joint_sampling_eval,
                             reconstruction_check, table1_protocol)

    run_cfg = _load_run_config(ns.config)
    seeds = _parse_seeds(ns.seeds)
    if not seeds:
        raise ConfigError("--seeds must contain at least one integer")

    ckpts = []
    if ns.ckpt:
        ckpts = [load_checkpoint(p) for p in ns.ckpt.split(",") if p]
    if ns.protocol != "ablation" and not ckpts:
        raise ConfigError("--ckpt is required for this protocol")

    report = EvalReport()
    if ns.protocol == "ablation":
        if not run_cfg:
            raise ConfigError("--config is required for the ablation protocol")
        if not ns.data:
            raise ConfigError("--data is required for the ablation protocol")
        from .checkpoint import gaussian_from_dict

        cfg = train_config_from_dict(run_cfg.get("train", {}))
        g = gaussian_from_dict(run_cfg.get("gaussian"))
        dataset, _ = read_dataset(ns.data)
        n = ns.n if ns.n else 10000
        report = ablation_suite(cfg, dataset, seeds, g, n_samples=n)
    else:
        # Checkpoints carry their own gaussian snapshot; pair/broadcast the
        # evaluation seeds with the checkpoint list.
        if len(seeds) == 1:
            seeds = seeds * len(ckpts)
        if len(seeds) != len(ckpts):
            raise ConfigError(
                f"{len(ckpts)} checkpoints but {len(seeds)} seeds; give one seed "
                "or exactly one per checkpoint"
            )
        for ckpt, eval_seed in zip(ckpts, seeds):
            g = ckpt.gaussian
            train_seed = ckpt.train_config.seed
            if ns.protocol == "table1":
                n = ns.n if ns.n else 10000
                sub = table1_protocol({train_seed: ckpt.generator}, g,
                                      n_samples=n, eval_seed=eval_seed)
                report.rows.extend(r for r in sub.rows if r.protocol == "table1")
            elif ns.protocol == "grid":
                n = ns.n if ns.n else 1000
                report.extend(grid_protocol(ckpt.generator, g, n_samples=n,
                                            eval_seed=eval_seed, seed_label=train_seed))
            elif ns.protocol == "joint":
                n = ns.n if ns.n else 10000
                report.extend(joint_sampling_eval(ckpt.generator, g, n_samples=n,
                                                  eval_seed=eval_seed, seed_label=train_seed))
            else:
                if not ns.data:
                    raise ConfigError("--data is required for the bound protocol")
                dataset, _ = read_dataset(ns.data)
                report.extend(reconstruction_check(ckpt.generator, g, dataset,
                                                   eval_seed=eval_seed,
                                                   seed_label=train_seed))
        if ns.protocol == "table1":
            by_row = {}
            for row in report.rows:
                by_row.setdefault((row.a, row.r), []).append(row)
            for (a, r), rows in by_row.items():
                report.add(a=a, r=r, metric="param_error",
                           value=float(np.mean([x.value for x in rows])),
                           n_samples=rows[0].n_samples, seed=AGGREGATE_SEED,
                           protocol="table1-mean")

    report.to_csv(ns.out)
    json_path = ns.out[:-4] + ".json" if ns.out.endswith(".csv") else ns.out + ".json"
    report.to_json(json_path)
    print(f"wrote {len(report.rows)} rows to {ns.out} and {json_path}")
    return 0


def _parse_coords(text, d, what):
    from .errors import ConfigError

    coords = []
    for tok in str(text).split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            c = int(tok)
        except ValueError:
            raise ConfigError(f"{what} coordinates must be integers, got {tok!r}") from None
        if not 1 <= c <= d:
            raise ConfigError(f"{what} coordinate {c} out of range 1..{d}")
        if c in coords:
            raise ConfigError(f"duplicate {what} coordinate {c}")
        coords.append(c)
    return coords


def _parse_available(text, d):
    from .errors import ConfigError

    coords, values = [], []
    for tok in str(text).split(","):
        tok = tok.strip()
        if not tok:
            continue
        if "=" not in tok:
            raise ConfigError(f"--available entries look like coord=value, got {tok!r}")
        c_txt, v_txt = tok.split("=", 1)
        try:
            c, v = int(c_txt), float(v_txt)
        except ValueError:
            raise ConfigError(f"bad --available entry {tok!r}") from None
        if not 1 <= c <= d:
            raise ConfigError(f"available coordinate {c} out of range 1..{d}")
        if c in coords:
            raise ConfigError(f"duplicate available coordinate {c}")
        coords.append(c)
        values.append(v)
    return coords, values


def cmd_sample(ns):
    import numpy as np

    from . import rng as rng_mod
    from .checkpoint import load_checkpoint
    from .errors import ConfigError
    from .evaluation import generator_sampler
    from .gaussian import sample_conditional
    from .masks import MaskPair

    ckpt = load_checkpoint(ns.ckpt)
    d = ckpt.generator.data_dim
    avail_coords, avail_values = _parse_available(ns.available, d)
    req_coords = _parse_coords(ns.request, d, "request")
    if not req_coords:
        raise ConfigError("--request must name at least one coordinate")
    overlap = set(avail_coords) & set(req_coords)
    if overlap:
        raise ConfigError(f"coordinates {sorted(overlap)} are both available and requested")
    a = np.zeros(d)
    r = np.zeros(d)
    for c in avail_coords:
        a[c - 1] = 1.0
    for c in req_coords:
        r[c - 1] = 1.0
    mask = MaskPair(a, r)
    order = np.argsort([c - 1 for c in avail_coords])
    x_avail = np.asarray(avail_values)[order]
    if ns.n < 0:
        raise ConfigError("--n must be >= 0")

    if ns.oracle:
        rows = sample_conditional(ckpt.gaussian, mask, x_avail, ns.n, ns.seed)
    else:
        stream = rng_mod.stream(ns.seed, rng_mod.SAMPLE)
        rows = generator_sampler(ckpt.generator)(mask, x_avail, ns.n, stream)

    idx_r = np.flatnonzero(r == 1.0)
    header = ",".join(f"x{i + 1}" for i in idx_r)
    lines = [header] + [",".join(repr(float(v)) for v in row) for row in rows]
    text = "\n".join(lines) + "\n"
    if ns.out:
        with open(ns.out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_embed(ns):
    import numpy as np

    from .checkpoint import load_checkpoint, read_dataset
    from .errors import ConfigError
    from .masks import MaskPair, enumerate_mask_pairs, mask_to_bits
    from .model import embed_batch

    ckpt = load_checkpoint(ns.ckpt)
    d = ckpt.generator.data_dim
    dataset, _ = read_dataset(ns.data)
    if dataset.shape[1] != d:
        raise ConfigError(f"dataset dimension {dataset.shape[1]} does not match model {d}")

    if ns.all_masks:
        masks = enumerate_mask_pairs(d)
    else:
        avail = _parse_coords(ns.available, d, "available")
        req = _parse_coords(ns.request, d, "request")
        if not req:
            raise ConfigError("give --request (and optionally --available) or --all-masks")
        if set(avail) & set(req):
            raise ConfigError("available and request coordinates overlap")
        a = np.zeros(d)
        r = np.zeros(d)
        for c in avail:
            a[c - 1] = 1.0
        for c in req:
            r[c - 1] = 1.0
        masks = [MaskPair(a, r)]

    width = None
    lines = []
    for mask in masks:
        emb = embed_batch(ckpt.generator, dataset, mask.a, mask.r)
        width = emb.shape[1]
        for row in emb:
            lines.append(
                mask_to_bits(mask.a) + "," + mask_to_bits(mask.r) + ","
                + ",".join(repr(float(v)) for v in row)
            )
    header = "a,r," + ",".join(f"e{i}" for i in range(width))
    text = "\n".join([header] + lines) + "\n"
    if ns.out:
        with open(ns.out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    print(f"embedded {dataset.shape[0]} rows under {len(masks)} masks", file=sys.stderr)
    return 0


def main(argv=None):
    from .errors import ConfigError, ContractError, NotSpdError, NumericError, ShapeError

    parser = _build_parser()
    ns = parser.parse_args(argv)
    try:
        return ns.func(ns)
    except (ConfigError, ShapeError, ContractError, NotSpdError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return 3


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
