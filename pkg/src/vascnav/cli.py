"""Command-line surface: map generation, demo collection, training,
evaluation, diagnostics, and the teleoperation server.

Sizes 64 and 140 select the matching tuned configuration; any other
size runs the generator with defaults at that raster, which may take
longer to find a feasible layout.
"""

import os

import click
import numpy as np

from vascnav.agent.bc import bc_train
from vascnav.agent.checkpoint import load_checkpoint, save_checkpoint
from vascnav.agent.config import TrainerConfig, load_trainer_config
from vascnav.agent.trainer import pretrain_loop, train_loop
from vascnav.data.episodes import (episode_from_rollout, load_dataset,
                                   save_episode)
from vascnav.evals.diagnostics import (save_td_map_pgm, td_error_curves,
                                       td_error_map)
from vascnav.evals.harness import evaluate_policy
from vascnav.sim import (EnvConfig, GuidewireEnv, desk_config, generate_map,
                         paper_config, run_scripted_episode, save_map)


def _env_config(size):
    if size == 64:
        return desk_config()
    if size == 140:
        return paper_config()
    return EnvConfig(h=size, w=size)


def _load_config(path):
    return load_trainer_config(path) if path else TrainerConfig()


def _progress(label, total, every=500):
    def cb(m):
        if m.step % every == 0 or m.step == total:
            click.echo(f"{label} {m.step}/{total}  J_Q={m.j_q:.4f} "
                       f"J_pi={m.j_pi:.4f} S={m.s:.3f}")
    return cb


@click.group()
def main():
    """Offline actor-critic navigation on simulated vascular maps."""


@main.command("gen-map")
@click.option("--seed", type=int, required=True)
@click.option("--size", type=int, default=64, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def gen_map(seed, size, out):
    """Generate one vascular map and write it as a map container file."""
    vmap = generate_map(seed, _env_config(size))
    save_map(vmap, out)
    click.echo(f"map seed {seed} ({size}x{size}) -> {out}")


@main.command("collect-scripted")
@click.option("--episodes", type=int, required=True)
@click.option("--noise", type=float, default=0.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--size", type=int, default=64, show_default=True)
@click.option("--map-seeds", default="0", show_default=True,
              help="comma-separated map seeds, cycled over episodes")
@click.option("--decoy-prob", type=float, default=0.0, show_default=True)
def collect_scripted(episodes, noise, seed, out, size, map_seeds,
                     decoy_prob):
    """Run the scripted demonstrator and save episodes as CASD files."""
    cfg = _env_config(size)
    seeds = [int(s) for s in map_seeds.split(",")]
    maps = {s: generate_map(s, cfg) for s in seeds}
    preset = {64: "desk", 140: "paper"}.get(size, f"{size}px")
    os.makedirs(out, exist_ok=True)
    rng = np.random.default_rng(seed)
    n_success = 0
    for e in range(episodes):
        ms = seeds[e % len(seeds)]
        env = GuidewireEnv(maps[ms], cfg, seed=seed)
        reset_seed = int(rng.integers(2 ** 31))
        trans, info = run_scripted_episode(env, noise, rng,
                                           decoy_prob=decoy_prob,
                                           reset_seed=reset_seed)
        rec = episode_from_rollout(env, trans, info, ms, reset_seed, preset)
        save_episode(rec, os.path.join(out, f"ep_{e:04d}.casd"))
        n_success += int(rec.success)
    click.echo(f"{episodes} episodes -> {out} "
               f"({n_success} successful, noise={noise})")


@main.command()
@click.option("--data", type=click.Path(exists=True), required=True)
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--out", type=click.Path(), required=True)
def pretrain(data, config, out):
    """Joint imitation + critic pretraining from scratch."""
    dataset = load_dataset(data)
    cfg = _load_config(config)
    os.makedirs(out, exist_ok=True)
    pretrain_loop(dataset, cfg, out_dir=out,
                  progress=_progress("pretrain", cfg.pretrain_steps))
    click.echo(f"pretrained checkpoint and metrics in {out}")


@main.command()
@click.option("--data", type=click.Path(exists=True), required=True)
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--pretrained", type=click.Path(exists=True), default=None,
              help="checkpoint to warm-start from (omit: fresh networks)")
@click.option("--resume", type=click.Path(exists=True), default=None,
              help="checkpoint of an interrupted run to continue")
@click.option("--out", type=click.Path(), required=True)
def train(data, config, pretrained, resume, out):
    """Offline actor-critic training."""
    if pretrained and resume:
        raise click.UsageError("--pretrained and --resume are exclusive")
    dataset = load_dataset(data)
    os.makedirs(out, exist_ok=True)
    start = None
    if resume:
        nets, state, cfg = load_checkpoint(resume)
        if config:
            cfg = load_trainer_config(config, base=cfg)
        start = (nets, state)
    else:
        cfg = _load_config(config)
        if pretrained:
            nets, state, _ = load_checkpoint(pretrained)
            start = (nets, state)
    train_loop(dataset, cfg, pretrained=start, out_dir=out,
               progress=_progress("train", cfg.rl_steps))
    click.echo(f"final checkpoint and metrics in {out}")


@main.command()
@click.option("--data", type=click.Path(exists=True), required=True)
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--out", type=click.Path(), required=True)
def bc(data, config, out):
    """Behavior-cloning baseline on the successful episodes."""
    dataset = load_dataset(data)
    cfg = _load_config(config)
    os.makedirs(out, exist_ok=True)

    def show(step, train_nll, val_nll):
        click.echo(f"bc {step}/{cfg.pretrain_steps}  "
                   f"train={train_nll:.4f} valid={val_nll:.4f}")

    nets, history = bc_train(dataset, cfg, progress=show)
    from vascnav.agent.trainer import init_trainer
    _, state = init_trainer(dataset, cfg)  # carrier for optimizer/rng state
    save_checkpoint(os.path.join(out, "bc.ckpt"), nets, state, cfg)
    with open(os.path.join(out, "bc_history.csv"), "w") as f:
        f.write("step,train_nll,valid_nll\n")
        for step, tr, va in history:
            f.write(f"{step},{repr(float(tr))},{repr(float(va))}\n")
    click.echo(f"cloned policy in {out}")


@main.command()
@click.option("--policy", type=click.Path(exists=True), required=True)
@click.option("--maps", default="0", show_default=True,
              help="comma-separated map seeds")
@click.option("--episodes", type=int, default=50, show_default=True)
@click.option("--seeds", type=int, default=3, show_default=True)
@click.option("--stochastic", is_flag=True, default=False)
@click.option("--size", type=int, default=64, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def evaluate(policy, maps, episodes, seeds, stochastic, size, out):
    """Roll out a trained policy and report the delivery metrics."""
    nets, _, _ = load_checkpoint(policy)
    map_seeds = [int(s) for s in maps.split(",")]
    report = evaluate_policy(nets, map_seeds, _env_config(size),
                             n_episodes=episodes,
                             seeds=tuple(range(seeds)),
                             greedy=not stochastic)
    report.to_csv(out)
    agg = report.aggregate()
    sr, sr_sd = agg["success_rate"]
    bw, bw_sd = agg["backward_mean"]
    rw, rw_sd = agg["reward_mean"]
    click.echo(f"success rate  {sr:.3f} +/- {sr_sd:.3f}")
    click.echo(f"backward steps {bw:.2f} +/- {bw_sd:.2f} "
               "(successful episodes)")
    click.echo(f"episode reward {rw:.2f} +/- {rw_sd:.2f}")
    click.echo(f"per-episode rows -> {out}")


@main.command()
@click.option("--dataset", "dataset_dir", type=click.Path(exists=True),
              required=True)
@click.option("--checkpoints", required=True,
              help="comma-separated checkpoint paths, curve order")
@click.option("--out", type=click.Path(), required=True)
def diagnose(dataset_dir, checkpoints, out):
    """TD-error curves on a 4:1 episode split and the spatial TD map."""
    dataset = load_dataset(dataset_dir)
    paths = checkpoints.split(",")
    loaded = [load_checkpoint(p) for p in paths]
    cfg = loaded[0][2]
    os.makedirs(out, exist_ok=True)
    curves = td_error_curves([n for n, _, _ in loaded], dataset, cfg)
    with open(os.path.join(out, "td_curves.csv"), "w") as f:
        f.write("checkpoint,train_td,valid_td\n")
        for p, tr, va in zip(paths, curves.train, curves.valid):
            f.write(f"{p},{repr(float(tr))},{repr(float(va))}\n")
    td_map, counts = td_error_map(loaded[-1][0], dataset, cfg)
    save_td_map_pgm(os.path.join(out, "td_map.pgm"), td_map)
    with open(os.path.join(out, "td_map.csv"), "w") as f:
        f.write("row,col,mean_abs_td,count\n")
        for r, c in np.argwhere(counts > 0):
            f.write(f"{r},{c},{repr(float(td_map[r, c]))},"
                    f"{int(counts[r, c])}\n")
    click.echo(f"td_curves.csv, td_map.csv, td_map.pgm -> {out}")


@main.command("serve-teleop")
@click.option("--bind", default="127.0.0.1:8765", show_default=True)
@click.option("--out-dir", type=click.Path(), required=True)
@click.option("--preset", type=click.Choice(["desk", "paper"]),
              default="desk", show_default=True)
def serve_teleop(bind, out_dir, preset):
    """Serve the interactive demonstration-collection session."""
    import uvicorn

    from vascnav.teleop.server import create_app
    os.makedirs(out_dir, exist_ok=True)
    host, _, port = bind.rpartition(":")
    app = create_app(out_dir, preset=preset)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))


if __name__ == "__main__":
    main()
