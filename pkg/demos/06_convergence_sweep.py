"""
Particles versus the mean field as N grows
==========================================

A reduced version of the convergence study: the cloud starts on the
particles, both systems evolve, and the phase-space W2 distance at the
final time shrinks with N.  The full study is ``mfstokes converge
--config configs/converge.cfg``.
"""
from mfstokes.config import parse_text
from mfstokes.experiments import run_converge

config = parse_text("""
T = 0.3
dt = 0.01
diag_interval = 10
sweep.n = 64,128,256,512
sweep.seeds = 2
""")

rows, summary = run_converge(config)
for N, stats in summary["per_n"].items():
    print(f"N = {N:4d}  median W2(T) = {stats['median_w2_phase_final']:.4f}"
          f"  min d_min ratio = {stats['min_dmin_ratio']:.3f}")
print("fitted slope:", round(summary["w2_rate"]["slope"], 3))
print("checks:", summary["w2_checks"])
