"""
Bi-objective training versus a single CCE pass
==============================================

COT takes a cross-entropy step and then a second, ascending step on the
balanced complement entropy, so every iteration costs two forward/backward
passes. CCE folds both terms into one loss.
"""

from ccelab.harness import desk_config, train

for objective in ("erm", "focal", "cot", "cce"):
    r = train(desk_config(objective, epochs=30, seed=0))
    print(f"{objective:5s} bACC {r.final_bacc:.3f}  backward passes {r.backward_passes:5d}  "
          f"{1e3 * r.mean_seconds_per_iteration:.3f} ms/iteration")

cce = train(desk_config("cce", epochs=10, seed=1))
cot = train(desk_config("cot", epochs=10, seed=1))
print("COT / CCE time per iteration: %.2f" % (cot.mean_seconds_per_iteration / cce.mean_seconds_per_iteration))

# per-epoch curve of the CCE run
for rec in cce.per_epoch:
    print(f"epoch {rec['epoch']:2d} lr {rec['lr']:.4f} loss {rec['train_loss']:+.4f} "
          f"test error {100 * rec['test_error']:.1f}%")
