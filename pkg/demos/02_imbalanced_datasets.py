"""
Building imbalanced training sets
=================================

A balanced blob dataset is cut down class by class into a long-tailed
(geometric decay) or a step-shaped distribution. The test split is left
balanced.
"""

from ccelab import ImbalanceSpec, generate_blobs, measure_ratio, plan_long_tailed, plan_step, subsample
from ccelab.imbalance import class_distribution

print("long-tailed plan:", plan_long_tailed(5000, 10, 100).counts)
print("step plan:       ", plan_step(5000, 10, 100).counts)

balanced = generate_blobs(num_classes=10, per_class=500, dims=8, seed=0)
for kind in ("long_tailed", "step"):
    for ratio in (10, 100):
        ds = subsample(balanced, ImbalanceSpec(kind, ratio, seed=0))
        print(f"{kind:11s} ratio {ratio:3d}: {len(ds):5d} samples, "
              f"measured ratio {measure_ratio(ds):6.1f}, counts {class_distribution(ds).counts}")

# Distribution CSV for plotting
class_distribution(subsample(balanced, ImbalanceSpec("long_tailed", 100, seed=0))).to_csv(
    "lt100_distribution.csv")
