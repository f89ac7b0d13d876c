"""How pseudo-label confidence weights are formed.

A teacher network predicts, for every unlabeled sample, a position and a
position bias relative to the sample's nearest labeled neighbor. The
norm d of the predicted bias acts as a typicality score: a kernel
density estimate over all d values is evaluated at each d and rescaled
to mean one. Samples whose d sits in a dense region get weight above
one, samples in the sparse tail get less.

The unlabeled set below is half in-distribution, half drawn from a
channel without the usual dominant direct path (Ricean K dropped from
+7 dB to -10 dB). Those samples resemble no labeled neighbor, so their
predicted bias norms land in the sparse tail on purpose.
"""

from dataclasses import replace

import numpy as np

from sslpos import (
    Dataset,
    NetworkSpec,
    ScenarioConfig,
    TrainConfig,
    build_scenario,
    confidence_weights,
    default_simulator_params,
    feature_dim,
    fit_kde,
    generate_dataset,
    kde_eval,
    linear_confidence,
    pseudo_label,
    silverman_bandwidth,
    train_teacher,
)

config = ScenarioConfig(hall_width=40.0, hall_length=40.0, bs_spacing=20.0,
                        n_bs=4, n_delay=16)
scenario = build_scenario(config)
params = default_simulator_params(config)
perturbed = replace(params, ricean_k_db=-10.0)

labeled = generate_dataset(scenario, params, 250, labeled=True, seed=31)
clean = generate_dataset(scenario, params, 120, labeled=False, seed=32)
shifted = generate_dataset(scenario, perturbed, 120, labeled=False, seed=33)
mixed = Dataset(cirs=np.concatenate([clean.cirs, shifted.cirs]),
                positions=None)

spec = NetworkSpec(input_dim=feature_dim(labeled.cirs.shape[1:]),
                   hidden_dims=(32, 16))
teacher = train_teacher(labeled, spec,
                        TrainConfig(lr0=0.02, batch_size=32, epochs=15, seed=1))

pseudo = pseudo_label(teacher, mixed, labeled)
d = pseudo.d
half = len(clean)

print("predicted bias norm d (meters):")
print(f"  in-distribution half: median {np.median(d[:half]):6.2f}")
print(f"  perturbed half:       median {np.median(d[half:]):6.2f}")

h = silverman_bandwidth(d)
model = fit_kde(d)
print(f"\nSilverman bandwidth over all {d.size} values: {h:.3f} m")
grid = np.linspace(d.min(), d.max(), 7)
print("density along the d axis:")
for x, f in zip(grid, kde_eval(model, grid)):
    print(f"  d = {x:6.2f}   f = {f:.4f}")

w_kde = confidence_weights(d)
w_lin = linear_confidence(d)
print(f"\nmean weight (both are normalized): kde {w_kde.mean():.6f},"
      f" linear {w_lin.mean():.6f}")
print("average weight by group:")
print(f"  {'':18s}  {'kde':>6s}  {'linear':>6s}")
print(f"  {'in-distribution':18s}  {w_kde[:half].mean():6.3f}  {w_lin[:half].mean():6.3f}")
print(f"  {'perturbed':18s}  {w_kde[half:].mean():6.3f}  {w_lin[half:].mean():6.3f}")
