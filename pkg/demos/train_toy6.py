"""Train the policy on the 6-macro fixture and compare it with random placement.

Takes about a minute on one CPU core.
"""
from rectiplace import data_path
from rectiplace.agent import PPOConfig, evaluate_policy, random_baseline, train_loop
from rectiplace.env import PlacementEnv
from rectiplace.netlist import load_netlist

n = load_netlist(data_path("toy6.json"))
factory = lambda: PlacementEnv(n)

bl = random_baseline(factory(), 200, seed=0)
base, se = bl.mean, bl.se
print(f"random policy: {base:.3f} +/- {se:.3f}")


def log(row):
    if row["update"] % 10 == 9:
        print(f"update {row['update'] + 1:4d}  mean reward {row['mean_reward']:.3f}  entropy {row['entropy']:.3f}")


result = train_loop(factory, PPOConfig(), updates=60, seed=0, log=log)
ev = evaluate_policy(result.model, factory, episodes=32)
print(f"greedy policy: {ev.greedy_reward:.3f}  ({(ev.greedy_reward - base) / se:.1f} standard errors above random)")
