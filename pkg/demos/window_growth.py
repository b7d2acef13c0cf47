"""Best window infimum over a longer stretch of space keeps growing."""

from shelab import verify as vf

rep = vf.growth_scan(1.0, 1.0, L_list=[10.0, 100.0, 1000.0], reps=10, seed=0)
for L, m in zip(rep.L_list, rep.medians()):
    print(f"L={L:g}: median max window infimum {m:.3f}")
print(f"strict gain from L=10 to L=1000 in {sum(rep.strict_gain())}/{len(rep.seeds)} seeds")
